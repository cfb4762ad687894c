//! Discretized measure spaces and piecewise-constant functions.
//!
//! A [`MeasureSpace`] is a finite partition of a domain into cells that carry
//! positive measures; geometry is irrelevant, only the weights enter any
//! computation. A [`GridFunction`] assigns one value per cell, so every
//! integral in the crate is an exact finite sum. Sums are always reduced with
//! pairwise summation to keep results deterministic and well conditioned.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairwise (cascade) summation. Deterministic for a fixed input order and
/// noticeably more accurate than a running sum on long arrays.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// A finite partition of the domain into cells with positive measures.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureSpace {
    cell_measures: Vec<f64>,
    total_measure: f64,
}

#[derive(Serialize, Deserialize)]
struct MeasureSpaceRepr {
    cell_measures: Vec<f64>,
}

impl MeasureSpace {
    /// Builds a space from per-cell measures. Every measure must be positive
    /// and finite and there must be at least one cell.
    pub fn new(cell_measures: Vec<f64>) -> Result<Self> {
        if cell_measures.is_empty() {
            return Err(Error::InvalidParameter(
                "measure space needs at least one cell".into(),
            ));
        }
        for (i, &m) in cell_measures.iter().enumerate() {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "cell measure {i} must be positive and finite, got {m}"
                )));
            }
        }
        let total_measure = pairwise_sum(&cell_measures);
        if !total_measure.is_finite() {
            return Err(Error::InvalidParameter("total measure overflows".into()));
        }
        Ok(Self {
            cell_measures,
            total_measure,
        })
    }

    /// Uniform partition of a domain of measure `total` into `n` cells.
    pub fn uniform(n: usize, total: f64) -> Result<Arc<Self>> {
        if n == 0 || !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidParameter(
                "uniform space needs n > 0 and positive finite total".into(),
            ));
        }
        Ok(Arc::new(Self::new(vec![total / n as f64; n])?))
    }

    pub fn len(&self) -> usize {
        self.cell_measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_measures.is_empty()
    }

    pub fn cell_measures(&self) -> &[f64] {
        &self.cell_measures
    }

    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    /// Sum of the measures of the cells selected by `mask`.
    pub fn mask_measure(&self, mask: &CellMask) -> Result<f64> {
        if mask.len() != self.len() {
            return Err(Error::DimensionMismatch {
                left: mask.len(),
                right: self.len(),
            });
        }
        let selected: Vec<f64> = self
            .cell_measures
            .iter()
            .zip(mask.flags())
            .filter(|(_, &f)| f)
            .map(|(&m, _)| m)
            .collect();
        Ok(pairwise_sum(&selected))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MeasureSpaceRepr {
            cell_measures: self.cell_measures.clone(),
        })
        .expect("measure space serializes")
    }

    pub fn from_json(s: &str) -> Result<Arc<Self>> {
        let repr: MeasureSpaceRepr =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Arc::new(Self::new(repr.cell_measures)?))
    }
}

/// Boolean cell selection, same length as the owning space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellMask {
    flags: Vec<bool>,
}

impl CellMask {
    pub fn new(flags: Vec<bool>) -> Self {
        Self { flags }
    }

    pub fn full(n: usize) -> Self {
        Self {
            flags: vec![true; n],
        }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            flags: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn get(&self, i: usize) -> bool {
        self.flags[i]
    }

    pub fn complement(&self) -> Self {
        Self {
            flags: self.flags.iter().map(|f| !f).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn any(&self) -> bool {
        self.flags.iter().any(|&f| f)
    }

    /// True if every selected cell of `self` is also selected by `other`.
    pub fn is_subset_of(&self, other: &CellMask) -> bool {
        self.flags.len() == other.flags.len()
            && self
                .flags
                .iter()
                .zip(other.flags.iter())
                .all(|(&a, &b)| !a || b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(i, _)| i)
    }
}

/// Conjugate exponent pair `(s, r)` with `1/s + 1/r = 1` plus the sparsity
/// exponent `p`. For `s = 1` the dual index is `r = ∞`, stored as
/// `f64::INFINITY`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExponentsRepr", into = "ExponentsRepr")]
pub struct Exponents {
    s: f64,
    p: f64,
    r: f64,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct ExponentsRepr {
    s: f64,
    p: f64,
}

impl TryFrom<ExponentsRepr> for Exponents {
    type Error = Error;
    fn try_from(repr: ExponentsRepr) -> Result<Self> {
        Exponents::new(repr.s, repr.p)
    }
}

impl From<Exponents> for ExponentsRepr {
    fn from(e: Exponents) -> Self {
        ExponentsRepr { s: e.s, p: e.p }
    }
}

impl Exponents {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "s must be in [1, inf), got {s}"
            )));
        }
        if !(p.is_finite() && (0.0..1.0).contains(&p)) {
            return Err(Error::InvalidParameter(format!(
                "p must be in [0, 1), got {p}"
            )));
        }
        let r = if s == 1.0 {
            f64::INFINITY
        } else {
            s / (s - 1.0)
        };
        Ok(Self { s, p, r })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// True in the `s = 1` case where the dual space carries the sup norm.
    pub fn is_l1(&self) -> bool {
        self.s == 1.0
    }
}

/// Piecewise-constant representative of a function: one value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    space: Arc<MeasureSpace>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridFunctionRepr {
    cell_measures: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(space: Arc<MeasureSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::DimensionMismatch {
                left: values.len(),
                right: space.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value {v}")));
        }
        Ok(Self { space, values })
    }

    pub fn constant(space: Arc<MeasureSpace>, c: f64) -> Result<Self> {
        let n = space.len();
        Self::new(space, vec![c; n])
    }

    pub fn zero(space: Arc<MeasureSpace>) -> Self {
        let n = space.len();
        Self {
            space,
            values: vec![0.0; n],
        }
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Cells where `|u| > zero_tol`. Negative tolerances behave like zero.
    pub fn support_mask(&self, zero_tol: f64) -> CellMask {
        let tol = zero_tol.max(0.0);
        CellMask::new(self.values.iter().map(|v| v.abs() > tol).collect())
    }

    /// Partial (quasi-)norm over the masked cells:
    /// `(Σ_{i∈m} λ_i |u_i|^ν)^{1/ν}` for finite `ν > 0`, the masked max of
    /// `|u_i|` for `ν = ∞`. Values of `ν < 1` are computed identically and
    /// yield the quasi-norm.
    pub fn partial_norm(&self, nu: f64, mask: &CellMask) -> Result<f64> {
        if mask.len() != self.len() {
            return Err(Error::DimensionMismatch {
                left: mask.len(),
                right: self.len(),
            });
        }
        if nu.is_infinite() && nu > 0.0 {
            let mut best = 0.0f64;
            for i in mask.indices() {
                best = best.max(self.values[i].abs());
            }
            return Ok(best);
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "norm exponent must be positive, got {nu}"
            )));
        }
        let measures = self.space.cell_measures();
        let terms: Vec<f64> = mask
            .indices()
            .map(|i| measures[i] * self.values[i].abs().powf(nu))
            .collect();
        let sum = pairwise_sum(&terms);
        Ok(sum.powf(1.0 / nu))
    }

    /// Norm over the whole space.
    pub fn norm(&self, nu: f64) -> Result<f64> {
        self.partial_norm(nu, &CellMask::full(self.len()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GridFunctionRepr {
            cell_measures: self.space.cell_measures().to_vec(),
            values: self.values.clone(),
        })
        .expect("grid function serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: GridFunctionRepr =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let space = Arc::new(MeasureSpace::new(repr.cell_measures)?);
        Self::new(space, repr.values)
    }

    /// Two-column CSV `measure,value`, one row per cell. The float formatting
    /// is the shortest representation that parses back to the same bits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("measure,value\n");
        for (m, v) in self.space.cell_measures().iter().zip(&self.values) {
            out.push_str(&format!("{m},{v}\n"));
        }
        out
    }

    pub fn from_csv(s: &str) -> Result<Self> {
        let mut measures = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("measure")) {
                continue;
            }
            let mut parts = line.split(',');
            let m = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: missing measure", lineno + 1)))?;
            let v = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: missing value", lineno + 1)))?;
            measures.push(
                m.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?,
            );
            values.push(
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?,
            );
        }
        let space = Arc::new(MeasureSpace::new(measures)?);
        Self::new(space, values)
    }

    /// Returns a copy with `f` applied to each value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.space.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Returns a copy with `f` applied on the masked cells only.
    pub fn map_masked(&self, mask: &CellMask, f: impl Fn(f64) -> f64) -> Result<Self> {
        if mask.len() != self.len() {
            return Err(Error::DimensionMismatch {
                left: mask.len(),
                right: self.len(),
            });
        }
        Self::new(
            self.space.clone(),
            self.values
                .iter()
                .zip(mask.flags())
                .map(|(&v, &on)| if on { f(v) } else { v })
                .collect(),
        )
    }

    /// Componentwise sum; both functions must live on spaces of equal size.
    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        if other.len() != self.len() {
            return Err(Error::DimensionMismatch {
                left: other.len(),
                right: self.len(),
            });
        }
        Self::new(
            self.space.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        if other.len() != self.len() {
            return Err(Error::DimensionMismatch {
                left: other.len(),
                right: self.len(),
            });
        }
        Self::new(
            self.space.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }
}

impl Serialize for MeasureSpace {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        MeasureSpaceRepr {
            cell_measures: self.cell_measures.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MeasureSpace {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let repr = MeasureSpaceRepr::deserialize(deserializer)?;
        MeasureSpace::new(repr.cell_measures).map_err(serde::de::Error::custom)
    }
}

impl Serialize for GridFunction {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        GridFunctionRepr {
            cell_measures: self.space.cell_measures().to_vec(),
            values: self.values.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GridFunction {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let repr = GridFunctionRepr::deserialize(deserializer)?;
        let space =
            Arc::new(MeasureSpace::new(repr.cell_measures).map_err(serde::de::Error::custom)?);
        GridFunction::new(space, repr.values).map_err(serde::de::Error::custom)
    }
}

/// Weighted dual pairing `Σ λ_i η_i h_i`, the discrete form of `∫ η h`.
pub fn dual_pairing(eta: &GridFunction, h: &GridFunction) -> Result<f64> {
    if eta.len() != h.len() {
        return Err(Error::DimensionMismatch {
            left: eta.len(),
            right: h.len(),
        });
    }
    let measures = eta.space().cell_measures();
    let terms: Vec<f64> = (0..eta.len())
        .map(|i| measures[i] * eta.values()[i] * h.values()[i])
        .collect();
    Ok(pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval(n: usize) -> Arc<MeasureSpace> {
        MeasureSpace::uniform(n, 1.0).unwrap()
    }

    #[test]
    fn support_mask_by_definition() {
        let space = unit_interval(3);
        let u = GridFunction::new(space, vec![0.0, 3.0, -1.0]).unwrap();
        assert_eq!(u.support_mask(0.0).flags(), &[false, true, true]);
    }

    #[test]
    fn support_mask_tolerance() {
        let space = unit_interval(2);
        let u = GridFunction::new(space, vec![1e-15, 2.0]).unwrap();
        assert_eq!(u.support_mask(1e-12).flags(), &[false, true]);
    }

    #[test]
    fn support_mask_zero_function() {
        let space = unit_interval(5);
        let u = GridFunction::zero(space);
        assert!(!u.support_mask(0.0).any());
    }

    #[test]
    fn mask_measure_half() {
        let space = unit_interval(4);
        let m = CellMask::new(vec![true, true, false, false]);
        assert_eq!(space.mask_measure(&m).unwrap(), 0.5);
    }

    #[test]
    fn mask_measure_empty_and_full() {
        let space = unit_interval(4);
        assert_eq!(space.mask_measure(&CellMask::empty(4)).unwrap(), 0.0);
        assert_eq!(
            space.mask_measure(&CellMask::full(4)).unwrap(),
            space.total_measure()
        );
    }

    #[test]
    fn mask_measure_dimension_error() {
        let space = unit_interval(4);
        assert!(matches!(
            space.mask_measure(&CellMask::full(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partial_norm_constant() {
        let space = unit_interval(8);
        let u = GridFunction::constant(space, 2.0).unwrap();
        let norm = u.norm(2.0).unwrap();
        assert!((norm - 2.0).abs() < 1e-15);
    }

    #[test]
    fn partial_norm_sqrt_profile_quadrature() {
        // u(x) = x^{1/2} sampled at cell midpoints; the L^2 norm is
        // (∫_0^1 x dx)^{1/2} = 1/√2.
        let n = 10_000;
        let space = unit_interval(n);
        let values: Vec<f64> = (0..n)
            .map(|i| (((i as f64) + 0.5) / n as f64).sqrt())
            .collect();
        let u = GridFunction::new(space, values).unwrap();
        let norm = u.norm(2.0).unwrap();
        assert!((norm - 1.0 / 2f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn partial_norm_empty_mask() {
        let space = unit_interval(4);
        let u = GridFunction::constant(space, 7.0).unwrap();
        assert_eq!(u.partial_norm(2.0, &CellMask::empty(4)).unwrap(), 0.0);
    }

    #[test]
    fn partial_norm_rejects_nonpositive_exponent() {
        let space = unit_interval(4);
        let u = GridFunction::constant(space, 1.0).unwrap();
        assert!(u.partial_norm(0.0, &CellMask::full(4)).is_err());
        assert!(u.partial_norm(-1.0, &CellMask::full(4)).is_err());
    }

    #[test]
    fn partial_norm_sup() {
        let space = unit_interval(3);
        let u = GridFunction::new(space, vec![-3.0, 0.5, 2.0]).unwrap();
        assert_eq!(
            u.partial_norm(f64::INFINITY, &CellMask::full(3)).unwrap(),
            3.0
        );
        let m = CellMask::new(vec![false, true, true]);
        assert_eq!(u.partial_norm(f64::INFINITY, &m).unwrap(), 2.0);
    }

    #[test]
    fn dual_pairing_constants() {
        let space = unit_interval(10);
        let eta = GridFunction::constant(space.clone(), 1.0).unwrap();
        let h = GridFunction::constant(space, 1.0).unwrap();
        assert!((dual_pairing(&eta, &h).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dual_pairing_disjoint_supports() {
        let space = unit_interval(4);
        let eta = GridFunction::new(space.clone(), vec![1.0, 2.0, 0.0, 0.0]).unwrap();
        let h = GridFunction::new(space, vec![0.0, 0.0, -1.0, 5.0]).unwrap();
        assert_eq!(dual_pairing(&eta, &h).unwrap(), 0.0);
    }

    #[test]
    fn dual_pairing_direct_sum() {
        let space = Arc::new(MeasureSpace::new(vec![0.5, 0.5]).unwrap());
        let eta = GridFunction::new(space.clone(), vec![2.0, -1.0]).unwrap();
        let h = GridFunction::new(space, vec![3.0, 3.0]).unwrap();
        assert!((dual_pairing(&eta, &h).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn exponents_conjugate() {
        let e = Exponents::new(2.0, 0.5).unwrap();
        assert_eq!(e.r(), 2.0);
        let e = Exponents::new(1.0, 0.0).unwrap();
        assert!(e.r().is_infinite());
        let e = Exponents::new(1.5, 0.0).unwrap();
        assert!((1.0 / e.s() + 1.0 / e.r() - 1.0).abs() < 1e-15);
        assert!(Exponents::new(0.5, 0.0).is_err());
        assert!(Exponents::new(2.0, 1.0).is_err());
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let space = Arc::new(MeasureSpace::new(vec![0.1, 0.2, 0.7]).unwrap());
        let u = GridFunction::new(space, vec![1.0 / 3.0, -2.5e-17, 4.0]).unwrap();
        let back = GridFunction::from_json(&u.to_json()).unwrap();
        assert_eq!(u.values(), back.values());
        assert_eq!(u.space().cell_measures(), back.space().cell_measures());
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let space = Arc::new(MeasureSpace::new(vec![0.25, 1e-3, 3.0]).unwrap());
        let u = GridFunction::new(space, vec![std::f64::consts::PI, -0.0, 1e-300]).unwrap();
        let back = GridFunction::from_csv(&u.to_csv()).unwrap();
        for (a, b) in u.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in u
            .space()
            .cell_measures()
            .iter()
            .zip(back.space().cell_measures())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn grid_function_rejects_non_finite() {
        let space = unit_interval(2);
        assert!(GridFunction::new(space, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn measure_space_rejects_bad_cells() {
        assert!(MeasureSpace::new(vec![]).is_err());
        assert!(MeasureSpace::new(vec![1.0, 0.0]).is_err());
        assert!(MeasureSpace::new(vec![1.0, -2.0]).is_err());
        assert!(MeasureSpace::new(vec![f64::INFINITY]).is_err());
    }
}
