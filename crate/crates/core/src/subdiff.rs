//! Closed-form descriptors of the Fréchet, limiting, and singular
//! subdifferentials of the sparsity functionals, plus a membership predicate
//! and a probe that exhibits the lack of Lipschitz continuity.
//!
//! The subdifferential sets are infinite; a [`SubdiffDescriptor`] is their
//! finite symbolic encoding. Membership in the encoded set is decided cell by
//! cell with a tolerance.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::functionals::SparsityFunctional;
use crate::measure::{CellMask, Exponents, GridFunction};
use crate::sd::SdVerdict;

/// Which subdifferential a descriptor encodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SubdiffKind {
    Frechet,
    Limiting,
    Singular,
}

/// The shape of the encoded set.
#[derive(Clone, Debug, PartialEq)]
pub enum DescriptorShape {
    /// No dual element qualifies.
    Empty,
    /// Exactly the zero element (the `s = 1` case at the zero function).
    ZeroOnly,
    /// All η vanishing outside `zero_mask`, i.e. `{η ≠ 0} ⊂ {u = 0}`.
    SupportConstrained { zero_mask: CellMask },
    /// η is pinned to `p |u|^{p-2} u` on the support and free elsewhere.
    PointwiseFixed {
        fixed_values: GridFunction,
        free_mask: CellMask,
    },
}

/// Finite description of one subdifferential set.
#[derive(Clone, Debug)]
pub struct SubdiffDescriptor {
    pub shape: DescriptorShape,
    pub kind: SubdiffKind,
    pub exps: Exponents,
    /// Whether the nonemptiness condition held.
    pub regular: bool,
}

impl Serialize for SubdiffDescriptor {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("SubdiffDescriptor", 6)?;
        st.serialize_field("kind", &self.kind)?;
        let shape = match &self.shape {
            DescriptorShape::Empty => "empty",
            DescriptorShape::ZeroOnly => "zero_only",
            DescriptorShape::SupportConstrained { .. } => "support_constrained",
            DescriptorShape::PointwiseFixed { .. } => "pointwise_fixed",
        };
        st.serialize_field("shape", shape)?;
        match &self.shape {
            DescriptorShape::SupportConstrained { zero_mask } => {
                st.serialize_field("zero_mask", zero_mask.flags())?;
                st.skip_field("fixed_values")?;
            }
            DescriptorShape::PointwiseFixed {
                fixed_values,
                free_mask,
            } => {
                st.serialize_field("zero_mask", free_mask.flags())?;
                st.serialize_field("fixed_values", fixed_values.values())?;
            }
            _ => {
                st.skip_field("zero_mask")?;
                st.skip_field("fixed_values")?;
            }
        }
        st.serialize_field("regular", &self.regular)?;
        st.end()
    }
}

impl SubdiffDescriptor {
    pub fn is_empty_set(&self) -> bool {
        matches!(self.shape, DescriptorShape::Empty)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("descriptor serializes")
    }

    /// Membership test against the encoded set, cell by cell with tolerance.
    pub fn contains(&self, eta: &GridFunction, tol: f64) -> Result<bool> {
        match &self.shape {
            DescriptorShape::Empty => Ok(false),
            DescriptorShape::ZeroOnly => Ok(eta.values().iter().all(|v| v.abs() <= tol)),
            DescriptorShape::SupportConstrained { zero_mask } => {
                if zero_mask.len() != eta.len() {
                    return Err(Error::DimensionMismatch {
                        left: zero_mask.len(),
                        right: eta.len(),
                    });
                }
                Ok(eta
                    .values()
                    .iter()
                    .zip(zero_mask.flags())
                    .all(|(v, &is_zero_cell)| is_zero_cell || v.abs() <= tol))
            }
            DescriptorShape::PointwiseFixed {
                fixed_values,
                free_mask,
            } => {
                if fixed_values.len() != eta.len() {
                    return Err(Error::DimensionMismatch {
                        left: fixed_values.len(),
                        right: eta.len(),
                    });
                }
                Ok(eta
                    .values()
                    .iter()
                    .zip(fixed_values.values())
                    .zip(free_mask.flags())
                    .all(|((v, fixed), &free)| free || (v - fixed).abs() <= tol))
            }
        }
    }

    /// A canonical member of the set, when one exists. Useful for building
    /// consistency checks.
    pub fn canonical_member(&self, u: &GridFunction) -> Option<GridFunction> {
        match &self.shape {
            DescriptorShape::Empty => None,
            DescriptorShape::ZeroOnly | DescriptorShape::SupportConstrained { .. } => {
                Some(GridFunction::zero(u.space().clone()))
            }
            DescriptorShape::PointwiseFixed { fixed_values, .. } => Some(fixed_values.clone()),
        }
    }
}

/// The pinned dual value `p |v|^{p-2} v` on the support, zero off it.
pub fn pointwise_dual_value(v: f64, p: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        p * v.abs().powf(p - 2.0) * v
    }
}

fn pointwise_fixed_shape(u: &GridFunction, p: f64, zero_tol: f64) -> DescriptorShape {
    let support = u.support_mask(zero_tol);
    let fixed = GridFunction::new(
        u.space().clone(),
        u.values()
            .iter()
            .zip(support.flags())
            .map(|(&v, &on)| if on { pointwise_dual_value(v, p) } else { 0.0 })
            .collect(),
    )
    .expect("finite dual values on a finite support");
    DescriptorShape::PointwiseFixed {
        fixed_values: fixed,
        free_mask: support.complement(),
    }
}

/// Fréchet subdifferential descriptor.
///
/// * `s = 1`: `{0}` at the zero function, empty otherwise (any `p`).
/// * `s > 1, p = 0`: all η supported on `{u = 0}` when `u` is slowly
///   decreasing, empty otherwise. The verdict must be supplied by the caller
///   whenever the support is nontrivial.
/// * `s > 1, p ∈ (0,1)`: η pinned to `p |u|^{p-2} u` on the support when
///   `|u|^{p-1}` has finite dual norm there, which is automatic on a grid.
pub fn frechet_descriptor(
    u: &GridFunction,
    exps: Exponents,
    sd: Option<&SdVerdict>,
    zero_tol: f64,
) -> Result<SubdiffDescriptor> {
    let support = u.support_mask(zero_tol);
    let vanishes = !support.any();
    let p = exps.p();

    if exps.is_l1() {
        let shape = if vanishes {
            DescriptorShape::ZeroOnly
        } else {
            DescriptorShape::Empty
        };
        return Ok(SubdiffDescriptor {
            regular: vanishes,
            shape,
            kind: SubdiffKind::Frechet,
            exps,
        });
    }

    if p == 0.0 {
        if vanishes {
            return Ok(SubdiffDescriptor {
                shape: DescriptorShape::SupportConstrained {
                    zero_mask: CellMask::full(u.len()),
                },
                kind: SubdiffKind::Frechet,
                exps,
                regular: true,
            });
        }
        let verdict = sd.ok_or_else(|| {
            Error::InvalidParameter(
                "s > 1, p = 0 with nontrivial support requires a slowly-decreasing verdict".into(),
            )
        })?;
        if verdict.is_sd {
            Ok(SubdiffDescriptor {
                shape: DescriptorShape::SupportConstrained {
                    zero_mask: support.complement(),
                },
                kind: SubdiffKind::Frechet,
                exps,
                regular: true,
            })
        } else {
            Ok(SubdiffDescriptor {
                shape: DescriptorShape::Empty,
                kind: SubdiffKind::Frechet,
                exps,
                regular: false,
            })
        }
    } else {
        // |u|^{p-1} has finite r-norm on any finite support, so the descriptor
        // is nonempty; profile-level analysis is where emptiness can occur.
        let dual = u.map(|v| {
            if v.abs() > zero_tol.max(0.0) {
                v.abs().powf(p - 1.0)
            } else {
                0.0
            }
        })?;
        let rnorm = dual.partial_norm(exps.r(), &support)?;
        let regular = rnorm.is_finite();
        if !regular {
            return Ok(SubdiffDescriptor {
                shape: DescriptorShape::Empty,
                kind: SubdiffKind::Frechet,
                exps,
                regular: false,
            });
        }
        Ok(SubdiffDescriptor {
            shape: pointwise_fixed_shape(u, p, zero_tol),
            kind: SubdiffKind::Frechet,
            exps,
            regular: true,
        })
    }
}

/// Limiting subdifferential descriptor. For `p = 0, s > 1` the support
/// constraint holds with no slowly-decreasing hypothesis; for `p ∈ (0,1),
/// s > 1` the set equals the Fréchet set; for `s = 1` it mirrors the Fréchet
/// set (externally justified).
pub fn limiting_descriptor(
    u: &GridFunction,
    exps: Exponents,
    zero_tol: f64,
) -> Result<SubdiffDescriptor> {
    if exps.is_l1() {
        let f = frechet_descriptor(u, exps, None, zero_tol)?;
        return Ok(SubdiffDescriptor {
            kind: SubdiffKind::Limiting,
            ..f
        });
    }
    if exps.p() == 0.0 {
        let support = u.support_mask(zero_tol);
        return Ok(SubdiffDescriptor {
            shape: DescriptorShape::SupportConstrained {
                zero_mask: support.complement(),
            },
            kind: SubdiffKind::Limiting,
            exps,
            regular: true,
        });
    }
    let f = frechet_descriptor(u, exps, None, zero_tol)?;
    Ok(SubdiffDescriptor {
        kind: SubdiffKind::Limiting,
        ..f
    })
}

/// Singular subdifferential descriptor: all η supported on `{u = 0}`, for
/// both `p = 0` and `p ∈ (0,1)`. Defined only for `s > 1`.
pub fn singular_descriptor(
    u: &GridFunction,
    exps: Exponents,
    zero_tol: f64,
) -> Result<SubdiffDescriptor> {
    if exps.is_l1() {
        return Err(Error::NotApplicable(
            "the singular subdifferential is defined only for s > 1".into(),
        ));
    }
    let support = u.support_mask(zero_tol);
    Ok(SubdiffDescriptor {
        shape: DescriptorShape::SupportConstrained {
            zero_mask: support.complement(),
        },
        kind: SubdiffKind::Singular,
        exps,
        regular: true,
    })
}

/// One stage of the non-Lipschitz probe: the driving scale and the largest
/// difference-quotient ratio observed at that scale.
pub type ProbeStage = (f64, f64);

/// Exhibits unbounded difference quotients `|q(v) - q(w)| / ‖v - w‖_s` within
/// a fixed ball around `u`, certifying that the functional is not Lipschitz
/// near `u`. Stage `k` shrinks the perturbation scale geometrically; the
/// reported ratios are nondecreasing in `k` and grow without bound.
pub fn lipschitz_probe(
    u: &GridFunction,
    exps: Exponents,
    radius: f64,
    stages: usize,
) -> Result<Vec<ProbeStage>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if stages == 0 {
        return Ok(Vec::new());
    }
    let q = SparsityFunctional::new(exps, u.space().clone());
    let s = exps.s();
    let p = exps.p();
    let n = u.len();

    // Candidate cell sets: a single cell and a prefix of roughly a quarter of
    // the total measure.
    let mut candidate_sets: Vec<CellMask> = Vec::new();
    let mut flags = vec![false; n];
    flags[0] = true;
    candidate_sets.push(CellMask::new(flags));
    let measures = u.space().cell_measures();
    let mut flags = vec![false; n];
    let mut acc = 0.0;
    for i in 0..n {
        flags[i] = true;
        acc += measures[i];
        if acc >= u.space().total_measure() * 0.25 {
            break;
        }
    }
    candidate_sets.push(CellMask::new(flags));

    let mut out = Vec::with_capacity(stages);
    let mut best_so_far = 0.0f64;
    for k in 0..stages {
        let scale = radius * 0.25f64.powi(k as i32 + 1);
        let mut best = best_so_far;
        for set in &candidate_sets {
            for pair in probe_pairs(u, set, p, scale, radius)? {
                let (v, w) = pair;
                // Both perturbations must stay inside the probe ball.
                if v.sub(u)?.norm(s)? > radius || w.sub(u)?.norm(s)? > radius {
                    continue;
                }
                let diff = v.sub(&w)?;
                let denom = diff.norm(s)?;
                if denom == 0.0 {
                    continue;
                }
                let ratio = (q.evaluate(&v, 0.0)? - q.evaluate(&w, 0.0)?).abs() / denom;
                best = best.max(ratio);
            }
        }
        best_so_far = best;
        out.push((scale, best));
    }
    Ok(out)
}

/// Perturbation pairs used by the probe, all within `radius` of `u` in the
/// `s`-norm when the value scale is at most the radius.
fn probe_pairs(
    u: &GridFunction,
    set: &CellMask,
    p: f64,
    scale: f64,
    radius: f64,
) -> Result<Vec<(GridFunction, GridFunction)>> {
    let mut pairs = Vec::new();
    if p == 0.0 {
        // Support collapse versus a vanishing recreation of it: v kills u on
        // the set, w additionally plants value `scale` there. The functional
        // gap stays at the set measure while the distance shrinks.
        let v = u.map_masked(set, |_| 0.0)?;
        let w = u.map_masked(set, |_| scale)?;
        pairs.push((w, v));
    } else {
        // Values γ versus 2γ on the set: the functional gap scales like
        // γ^p, the distance like γ.
        let gamma = scale.min(radius / 2.0);
        let v = u.map_masked(set, |_| gamma)?;
        let w = u.map_masked(set, |_| 2.0 * gamma)?;
        pairs.push((w, v));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureSpace;
    use crate::sd::check_bounded_away;

    fn exps(s: f64, p: f64) -> Exponents {
        Exponents::new(s, p).unwrap()
    }

    fn unit(n: usize) -> std::sync::Arc<MeasureSpace> {
        MeasureSpace::uniform(n, 1.0).unwrap()
    }

    #[test]
    fn l1_zero_function_gets_zero_only() {
        let u = GridFunction::zero(unit(8));
        let d = frechet_descriptor(&u, exps(1.0, 0.0), None, 0.0).unwrap();
        assert_eq!(d.shape, DescriptorShape::ZeroOnly);
        assert!(d.contains(&GridFunction::zero(unit(8)), 1e-10).unwrap());
        let d = frechet_descriptor(&u, exps(1.0, 0.5), None, 0.0).unwrap();
        assert_eq!(d.shape, DescriptorShape::ZeroOnly);
    }

    #[test]
    fn l1_nonzero_function_is_empty() {
        let u = GridFunction::constant(unit(8), 1.0).unwrap();
        for p in [0.0, 0.5] {
            let d = frechet_descriptor(&u, exps(1.0, p), None, 0.0).unwrap();
            assert!(d.is_empty_set());
            assert!(!d.regular);
            assert!(!d.contains(&GridFunction::zero(unit(8)), 1e-10).unwrap());
        }
    }

    #[test]
    fn sd_constant_function_support_constrained() {
        // Constant functions are bounded away from zero, hence slowly
        // decreasing; the only admissible η with full support is zero.
        let u = GridFunction::constant(unit(8), 1.0).unwrap();
        let sd = check_bounded_away(&u, 0.0).to_verdict();
        let d = frechet_descriptor(&u, exps(2.0, 0.0), Some(&sd), 0.0).unwrap();
        match &d.shape {
            DescriptorShape::SupportConstrained { zero_mask } => {
                assert_eq!(zero_mask.count(), 0);
            }
            other => panic!("unexpected shape {other:?}"),
        }
        assert!(d.contains(&GridFunction::zero(unit(8)), 0.0).unwrap());
        let bump =
            GridFunction::new(unit(8), vec![1e-6, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(!d.contains(&bump, 1e-10).unwrap());
    }

    #[test]
    fn frechet_requires_verdict_for_nontrivial_support() {
        let u = GridFunction::constant(unit(4), 1.0).unwrap();
        assert!(frechet_descriptor(&u, exps(2.0, 0.0), None, 0.0).is_err());
    }

    #[test]
    fn frechet_pointwise_fixed_constant_four() {
        let u = GridFunction::constant(unit(4), 4.0).unwrap();
        let d = frechet_descriptor(&u, exps(2.0, 0.5), None, 0.0).unwrap();
        let eta = GridFunction::constant(unit(4), 0.25).unwrap();
        assert!(d.contains(&eta, 1e-12).unwrap());
        let wrong = GridFunction::constant(unit(4), 0.26).unwrap();
        assert!(!d.contains(&wrong, 1e-12).unwrap());
    }

    #[test]
    fn limiting_unconditional_for_p_zero() {
        // A discretized steep power profile: the limiting set is support
        // constrained even where the continuum Fréchet set would be empty.
        let n = 256;
        let space = unit(n);
        let vals: Vec<f64> = (0..n)
            .map(|i| (((i as f64) + 0.5) / n as f64).powf(0.9))
            .collect();
        let u = GridFunction::new(space, vals).unwrap();
        let d = limiting_descriptor(&u, exps(2.0, 0.0), 0.0).unwrap();
        match &d.shape {
            DescriptorShape::SupportConstrained { zero_mask } => {
                assert_eq!(zero_mask.count(), 0)
            }
            other => panic!("unexpected shape {other:?}"),
        }
    }

    #[test]
    fn limiting_zero_function_is_full_dual_space() {
        let u = GridFunction::zero(unit(6));
        let d = limiting_descriptor(&u, exps(2.0, 0.0), 0.0).unwrap();
        match &d.shape {
            DescriptorShape::SupportConstrained { zero_mask } => {
                assert_eq!(zero_mask.count(), 6)
            }
            other => panic!("unexpected shape {other:?}"),
        }
        let anything = GridFunction::new(unit(6), vec![3.0, -1.0, 0.5, 9.0, 0.0, -7.0]).unwrap();
        assert!(d.contains(&anything, 0.0).unwrap());
    }

    #[test]
    fn limiting_equals_frechet_for_fractional_p() {
        let u = GridFunction::constant(unit(4), 4.0).unwrap();
        let d = limiting_descriptor(&u, exps(2.0, 0.5), 0.0).unwrap();
        let eta = GridFunction::constant(unit(4), 0.25).unwrap();
        assert!(d.contains(&eta, 1e-12).unwrap());
    }

    #[test]
    fn singular_support_constrained_and_never_empty() {
        let u = GridFunction::constant(unit(4), 1.0).unwrap();
        let d = singular_descriptor(&u, exps(2.0, 0.5), 0.0).unwrap();
        assert!(!d.is_empty_set());
        assert!(d.contains(&GridFunction::zero(unit(4)), 0.0).unwrap());

        let zero = GridFunction::zero(unit(4));
        let d = singular_descriptor(&zero, exps(2.0, 0.0), 0.0).unwrap();
        let anything = GridFunction::new(unit(4), vec![5.0, -2.0, 0.1, 8.0]).unwrap();
        assert!(d.contains(&anything, 0.0).unwrap());

        // Indicator of the left half: η free on the right half only.
        let u = GridFunction::new(unit(4), vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let d = singular_descriptor(&u, exps(2.0, 0.0), 0.0).unwrap();
        let right = GridFunction::new(unit(4), vec![0.0, 0.0, 2.0, -3.0]).unwrap();
        let left = GridFunction::new(unit(4), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(d.contains(&right, 1e-12).unwrap());
        assert!(!d.contains(&left, 1e-12).unwrap());
    }

    #[test]
    fn singular_rejects_l1() {
        let u = GridFunction::zero(unit(4));
        assert!(singular_descriptor(&u, exps(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn descriptor_json_schema() {
        let u = GridFunction::constant(unit(2), 4.0).unwrap();
        let d = frechet_descriptor(&u, exps(2.0, 0.5), None, 0.0).unwrap();
        let json: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(json["kind"], "frechet");
        assert_eq!(json["shape"], "pointwise_fixed");
        assert_eq!(json["regular"], true);
        assert_eq!(json["fixed_values"][0], 0.25);
        assert_eq!(json["zero_mask"][0], false);
    }

    #[test]
    fn contains_rejects_dimension_mismatch() {
        let u = GridFunction::constant(unit(4), 4.0).unwrap();
        let d = frechet_descriptor(&u, exps(2.0, 0.5), None, 0.0).unwrap();
        let eta = GridFunction::constant(unit(3), 0.25).unwrap();
        assert!(d.contains(&eta, 1e-10).is_err());
    }

    #[test]
    fn nonemptiness_dichotomy_matrix() {
        // Empty exactly when the function is nonzero with s = 1; for s > 1
        // every grid function qualifies (bounded away on its support).
        let zero = GridFunction::zero(unit(6));
        let nonzero = GridFunction::new(unit(6), vec![1.0, 0.0, -2.0, 0.0, 0.5, 0.0]).unwrap();
        for &s in &[1.0, 2.0] {
            for &p in &[0.0, 0.5] {
                let e = exps(s, p);
                for (u, has_support) in [(&zero, false), (&nonzero, true)] {
                    let sd = check_bounded_away(u, 0.0).to_verdict();
                    let d = frechet_descriptor(u, e, Some(&sd), 0.0).unwrap();
                    let expect_empty = has_support && s == 1.0;
                    assert_eq!(d.is_empty_set(), expect_empty, "s={s} p={p}");
                    assert_eq!(d.regular, !expect_empty, "s={s} p={p}");
                }
            }
        }
    }

    #[test]
    fn probe_single_stage_is_finite() {
        let u = GridFunction::constant(unit(16), 1.0).unwrap();
        let stagewise = lipschitz_probe(&u, exps(2.0, 0.0), 1.0, 1).unwrap();
        assert_eq!(stagewise.len(), 1);
        assert!(stagewise[0].1.is_finite() && stagewise[0].1 > 0.0);
    }

    #[test]
    fn probe_ratios_grow_for_both_regimes() {
        let u = GridFunction::constant(unit(16), 1.0).unwrap();
        for p in [0.0, 0.5] {
            let stagewise = lipschitz_probe(&u, exps(2.0, p), 1.0, 12).unwrap();
            for w in stagewise.windows(2) {
                assert!(w[1].1 >= w[0].1);
            }
            assert!(stagewise.last().unwrap().1 > stagewise[0].1 * 10.0);
        }
    }

    #[test]
    fn probe_ratio_matches_direct_evaluation_p_zero() {
        // Support gap λ(B) against distance γ λ(B)^{1/2}: the quarter-measure
        // candidate set wins with ratio 0.5 / γ.
        let u = GridFunction::constant(unit(16), 1.0).unwrap();
        let stagewise = lipschitz_probe(&u, exps(2.0, 0.0), 1.0, 3).unwrap();
        for &(scale, ratio) in &stagewise {
            let expected = 0.5f64 / scale;
            assert!((ratio - expected).abs() <= 1e-12 * expected);
        }
    }
}
