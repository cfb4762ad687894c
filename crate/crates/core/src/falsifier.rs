//! Brute-force oracle for claimed Fréchet subgradients.
//!
//! A dual element η belongs to the Fréchet subdifferential of `q` at `u` when
//! the difference quotient
//!
//! ```text
//! D(h) = (q(u + h) - q(u) - <η, h>) / ‖h‖_s
//! ```
//!
//! has nonnegative lim inf as `‖h‖_s → 0`. Membership is a statement over all
//! directions and cannot be certified numerically; what can be done is to
//! evaluate `D` along the direction families that witness every exclusion in
//! the closed-form characterizations, and report either a persistent
//! violation (with the witnessing direction) or consistency.
//!
//! A lim inf cannot be computed on a finite family either, so falsification
//! demands persistence: the violation must hold at the three smallest driving
//! scales and must not be attenuating as scales shrink. Quotients that are
//! negative but improve toward zero are exactly the slowly-decreasing
//! signature and are reported consistent.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::SparsityFunctional;
use crate::measure::{dual_pairing, CellMask, Exponents, GridFunction};
use crate::subdiff::pointwise_dual_value;

/// Relative slack when comparing scale-group minima for persistence.
const IMPROVEMENT_SLACK: f64 = 1e-6;

/// The difference quotient `D(h)`; errors on `h = 0`.
pub fn quotient(
    q: &SparsityFunctional,
    u: &GridFunction,
    eta: &GridFunction,
    h: &GridFunction,
) -> Result<f64> {
    let s = q.exps().s();
    let hnorm = h.norm(s)?;
    if hnorm == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let shifted = u.add(h)?;
    let numerator = q.evaluate(&shifted, 0.0)? - q.evaluate(u, 0.0)? - dual_pairing(eta, h)?;
    Ok(numerator / hnorm)
}

/// How the members of a family are built from `(u, η)` and the stored scales
/// and target sets.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyKind {
    /// `h = -u χ_T` over shrinking value-minimal prefixes `T` of the support.
    SupportKill,
    /// `h = c |u| sgn(η) χ_T` with decaying amplitudes `c` on a fixed set
    /// (`toward_eta`), or `h = c u χ_T` with amplitudes `c = λ(T)^{-1/2}`
    /// growing as the sets shrink.
    ScaledSupport { toward_eta: bool },
    /// `h = c sgn(η) χ_T`; either a fixed amplitude with shrinking sets or a
    /// fixed set with decaying amplitudes.
    SignScaled { amplitude: Option<f64> },
    /// `h = ±t χ_B` on a fixed set with decaying `t`.
    ConstantBump,
    /// Random cell subsets of shrinking measure with value `±a·scale`.
    RandomSparse { seed: u64, amplitude_base: f64 },
}

/// A family of probe directions with strictly decreasing driving scales.
#[derive(Clone, Debug)]
pub struct DirectionFamily {
    pub kind: FamilyKind,
    pub scales: Vec<f64>,
    pub target_sets: Vec<CellMask>,
    pub label: &'static str,
}

impl DirectionFamily {
    /// Shrinking value-minimal support prefixes, halving in measure down to a
    /// single cell.
    pub fn support_kill(u: &GridFunction, zero_tol: f64, levels: usize) -> Result<Self> {
        let support = u.support_mask(zero_tol);
        if !support.any() {
            return Err(Error::InvalidParameter(
                "support kill needs a nontrivial support".into(),
            ));
        }
        let total = u.space().mask_measure(&support)?;
        let prefixes = value_ascending_prefixes(u, &support, total, levels);
        let (target_sets, scales): (Vec<_>, Vec<_>) = prefixes.into_iter().unzip();
        Ok(Self {
            kind: FamilyKind::SupportKill,
            scales,
            target_sets,
            label: "support_kill",
        })
    }

    /// Fixed set where `|η| ≥ ρ` inside the support, amplitudes `1/(2k)`.
    pub fn scaled_support_decaying(
        u: &GridFunction,
        eta: &GridFunction,
        zero_tol: f64,
        steps: usize,
    ) -> Result<Self> {
        let support = u.support_mask(zero_tol);
        let rho = threshold_level(eta, Some(&support));
        if rho == 0.0 {
            return Err(Error::InvalidParameter(
                "η vanishes on the support; nothing to scale against".into(),
            ));
        }
        let target = CellMask::new(
            (0..u.len())
                .map(|i| support.get(i) && eta.values()[i].abs() >= rho)
                .collect(),
        );
        if !target.any() {
            return Err(Error::InvalidParameter(
                "η vanishes on the support; nothing to scale against".into(),
            ));
        }
        Ok(Self {
            kind: FamilyKind::ScaledSupport { toward_eta: true },
            scales: (1..=steps.max(1)).map(|k| 0.5 / k as f64).collect(),
            target_sets: vec![target],
            label: "scaled_support",
        })
    }

    /// Shrinking support prefixes with amplitude `λ(T)^{-1/2}`.
    pub fn scaled_support_growing(u: &GridFunction, zero_tol: f64, levels: usize) -> Result<Self> {
        let support = u.support_mask(zero_tol);
        if !support.any() {
            return Err(Error::InvalidParameter("empty support".into()));
        }
        let total = u.space().mask_measure(&support)?;
        let prefixes = value_ascending_prefixes(u, &support, total, levels);
        let (target_sets, scales): (Vec<_>, Vec<_>) = prefixes.into_iter().unzip();
        Ok(Self {
            kind: FamilyKind::ScaledSupport { toward_eta: false },
            scales,
            target_sets,
            label: "scaled_support_growing",
        })
    }

    /// Fixed set where `|η| ≥ ρ`, decaying amplitudes.
    pub fn sign_scaled_decaying(eta: &GridFunction, steps: usize) -> Result<Self> {
        let rho = threshold_level(eta, None);
        if rho == 0.0 {
            return Err(Error::InvalidParameter("η vanishes everywhere".into()));
        }
        let target = CellMask::new(eta.values().iter().map(|v| v.abs() >= rho).collect());
        if !target.any() {
            return Err(Error::InvalidParameter("η vanishes everywhere".into()));
        }
        Ok(Self {
            kind: FamilyKind::SignScaled { amplitude: None },
            scales: (1..=steps.max(1)).map(|k| 2f64.powi(-(k as i32))).collect(),
            target_sets: vec![target],
            label: "sign_scaled",
        })
    }

    /// Fixed amplitude `α` with `α^{p-1} < ρ` (resp. `α = 2/ρ` for `p = 0`)
    /// over sets of shrinking measure where `|η| ≥ ρ`.
    pub fn sign_scaled_fixed(eta: &GridFunction, exps: Exponents, levels: usize) -> Result<Self> {
        let rho = threshold_level(eta, None);
        if rho == 0.0 {
            return Err(Error::InvalidParameter("η vanishes everywhere".into()));
        }
        let p = exps.p();
        let amplitude = if p == 0.0 {
            2.0 / rho
        } else {
            // α^{p-1} = ρ/2 < ρ.
            (rho / 2.0).powf(1.0 / (p - 1.0))
        };
        let big = CellMask::new(eta.values().iter().map(|v| v.abs() >= rho).collect());
        let total = eta.space().mask_measure(&big)?;
        let prefixes = magnitude_descending_prefixes(eta, &big, total, levels);
        let (target_sets, scales): (Vec<_>, Vec<_>) = prefixes.into_iter().unzip();
        Ok(Self {
            kind: FamilyKind::SignScaled {
                amplitude: Some(amplitude),
            },
            scales,
            target_sets,
            label: "sign_scaled_fixed",
        })
    }

    /// Two-sided bumps `±t χ_B` on a fixed region with halving `t`.
    pub fn constant_bump(region: CellMask, start_amplitude: f64, steps: usize) -> Result<Self> {
        if !region.any() {
            return Err(Error::InvalidParameter(
                "constant bump needs a region".into(),
            ));
        }
        if !(start_amplitude > 0.0 && start_amplitude.is_finite()) {
            return Err(Error::InvalidParameter(
                "bump amplitude must be positive".into(),
            ));
        }
        Ok(Self {
            kind: FamilyKind::ConstantBump,
            scales: (0..steps.max(1))
                .map(|k| start_amplitude * 2f64.powi(-(k as i32)))
                .collect(),
            target_sets: vec![region],
            label: "constant_bump",
        })
    }

    /// Seeded random subsets of shrinking measure, three draws per scale.
    pub fn random_sparse(u: &GridFunction, seed: u64, steps: usize) -> Self {
        let amplitude_base = {
            let sup = u.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if sup > 0.0 {
                sup
            } else {
                1.0
            }
        };
        Self {
            kind: FamilyKind::RandomSparse {
                seed,
                amplitude_base,
            },
            scales: (1..=steps.max(1)).map(|k| 2f64.powi(-(k as i32))).collect(),
            target_sets: Vec::new(),
            label: "random_sparse",
        }
    }

    /// Materializes all probe directions, tagged with their scale-group index.
    pub fn directions(
        &self,
        u: &GridFunction,
        eta: &GridFunction,
    ) -> Result<Vec<(usize, GridFunction)>> {
        let mut out = Vec::new();
        let space = u.space().clone();
        match &self.kind {
            FamilyKind::SupportKill => {
                for (gi, (scale, set)) in self.scales.iter().zip(&self.target_sets).enumerate() {
                    let _ = scale;
                    let h = masked_values(&space, set, |i| -u.values()[i])?;
                    out.push((gi, h));
                }
            }
            FamilyKind::ScaledSupport { toward_eta: true } => {
                let set = &self.target_sets[0];
                for (gi, &c) in self.scales.iter().enumerate() {
                    let h = masked_values(&space, set, |i| {
                        c * u.values()[i].abs() * eta.values()[i].signum()
                    })?;
                    out.push((gi, h));
                }
            }
            FamilyKind::ScaledSupport { toward_eta: false } => {
                for (gi, (&m, set)) in self.scales.iter().zip(&self.target_sets).enumerate() {
                    let c = m.powf(-0.5);
                    let h = masked_values(&space, set, |i| c * u.values()[i])?;
                    out.push((gi, h));
                }
            }
            FamilyKind::SignScaled { amplitude: Some(a) } => {
                for (gi, (scale, set)) in self.scales.iter().zip(&self.target_sets).enumerate() {
                    let _ = scale;
                    let h = masked_values(&space, set, |i| a * eta.values()[i].signum())?;
                    out.push((gi, h));
                }
            }
            FamilyKind::SignScaled { amplitude: None } => {
                let set = &self.target_sets[0];
                for (gi, &c) in self.scales.iter().enumerate() {
                    let h = masked_values(&space, set, |i| c * eta.values()[i].signum())?;
                    out.push((gi, h));
                }
            }
            FamilyKind::ConstantBump => {
                let set = &self.target_sets[0];
                for (gi, &t) in self.scales.iter().enumerate() {
                    out.push((gi, masked_values(&space, set, |_| t)?));
                    out.push((gi, masked_values(&space, set, |_| -t)?));
                }
            }
            FamilyKind::RandomSparse {
                seed,
                amplitude_base,
            } => {
                let mut rng = StdRng::seed_from_u64(*seed);
                let n = u.len();
                let measures = space.cell_measures();
                let total = space.total_measure();
                for (gi, &scale) in self.scales.iter().enumerate() {
                    for _ in 0..3 {
                        let mut order: Vec<usize> = (0..n).collect();
                        order.shuffle(&mut rng);
                        let target_measure = total * scale;
                        let mut acc = 0.0;
                        let mut flags = vec![false; n];
                        for &i in &order {
                            flags[i] = true;
                            acc += measures[i];
                            if acc >= target_measure {
                                break;
                            }
                        }
                        let set = CellMask::new(flags);
                        let amp = amplitude_base * scale;
                        let h = masked_values(&space, &set, |_| {
                            if rng.gen::<bool>() {
                                amp
                            } else {
                                -amp
                            }
                        })?;
                        out.push((gi, h));
                    }
                }
            }
        }
        Ok(out)
    }
}

fn masked_values(
    space: &std::sync::Arc<crate::measure::MeasureSpace>,
    set: &CellMask,
    mut f: impl FnMut(usize) -> f64,
) -> Result<GridFunction> {
    let values: Vec<f64> = (0..space.len())
        .map(|i| if set.get(i) { f(i) } else { 0.0 })
        .collect();
    GridFunction::new(space.clone(), values)
}

/// Half the largest magnitude of η over the region (whole domain when none).
fn threshold_level(eta: &GridFunction, region: Option<&CellMask>) -> f64 {
    let mut max_abs = 0.0f64;
    for (i, v) in eta.values().iter().enumerate() {
        if region.map_or(true, |m| m.get(i)) {
            max_abs = max_abs.max(v.abs());
        }
    }
    max_abs / 2.0
}

/// Prefix sets of the support ordered by ascending `|u|`, halving in measure,
/// deduplicated, down to a single cell. Returns `(mask, measure)` pairs.
fn value_ascending_prefixes(
    u: &GridFunction,
    support: &CellMask,
    total: f64,
    levels: usize,
) -> Vec<(CellMask, f64)> {
    let mut cells: Vec<usize> = support.indices().collect();
    cells.sort_by(|&a, &b| {
        u.values()[a]
            .abs()
            .partial_cmp(&u.values()[b].abs())
            .expect("finite values")
    });
    prefixes_of(cells, u, total, levels)
}

/// Prefix sets ordered by descending `|eta|`.
fn magnitude_descending_prefixes(
    eta: &GridFunction,
    region: &CellMask,
    total: f64,
    levels: usize,
) -> Vec<(CellMask, f64)> {
    let mut cells: Vec<usize> = region.indices().collect();
    cells.sort_by(|&a, &b| {
        eta.values()[b]
            .abs()
            .partial_cmp(&eta.values()[a].abs())
            .expect("finite values")
    });
    prefixes_of(cells, eta, total, levels)
}

fn prefixes_of(
    ordered_cells: Vec<usize>,
    on: &GridFunction,
    total: f64,
    levels: usize,
) -> Vec<(CellMask, f64)> {
    let measures = on.space().cell_measures();
    let n = on.len();
    let mut out: Vec<(CellMask, f64)> = Vec::new();
    let mut last_count = usize::MAX;
    for j in 1..=levels {
        let target = total * 2f64.powi(-(j as i32));
        let mut flags = vec![false; n];
        let mut acc = 0.0;
        let mut count = 0;
        for &i in &ordered_cells {
            flags[i] = true;
            acc += measures[i];
            count += 1;
            if acc >= target {
                break;
            }
        }
        if count == last_count {
            continue; // the grid floor was reached; avoid duplicate sets
        }
        last_count = count;
        out.push((CellMask::new(flags), acc));
        if count == 1 {
            break;
        }
    }
    out
}

/// Verdict of a falsification run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Falsified,
}

/// Evidence gathered while probing one direction family.
#[derive(Clone, Debug, Serialize)]
pub struct QuotientReport {
    /// `(‖h‖_s, D(h))` for every probed direction.
    pub samples: Vec<(f64, f64)>,
    /// Minimum quotient over the smallest 20% of direction norms.
    pub inf_tail: f64,
    pub verdict: Verdict,
    /// The direction achieving the persistent violation, when falsified.
    pub witness: Option<GridFunction>,
}

/// Probes η along a family and reports a persistent violation, if any.
///
/// Falsified requires the per-scale minima of `D` at the three smallest
/// driving scales to all lie below `-δ` without attenuating as the scale
/// shrinks.
pub fn falsify(
    q: &SparsityFunctional,
    u: &GridFunction,
    eta: &GridFunction,
    family: &DirectionFamily,
    delta: f64,
) -> Result<QuotientReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(
            "violation threshold must be positive".into(),
        ));
    }
    if family.scales.is_empty() {
        return Err(Error::InvalidParameter("empty direction family".into()));
    }
    let directions = family.directions(u, eta)?;
    if directions.is_empty() {
        return Err(Error::InvalidParameter(
            "family produced no directions".into(),
        ));
    }

    let s = q.exps().s();
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(directions.len());
    // Per-scale-group minima and their witnessing directions.
    let mut group_min: Vec<Option<(f64, GridFunction)>> = vec![None; family.scales.len()];
    for (gi, h) in directions {
        let hnorm = h.norm(s)?;
        if hnorm == 0.0 {
            continue;
        }
        let d = quotient(q, u, eta, &h)?;
        samples.push((hnorm, d));
        match &group_min[gi] {
            Some((best, _)) if *best <= d => {}
            _ => group_min[gi] = Some((d, h)),
        }
    }
    if samples.is_empty() {
        return Err(Error::InvalidParameter(
            "family produced no directions".into(),
        ));
    }

    let mut by_norm: Vec<(f64, f64)> = samples.clone();
    by_norm.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite norms"));
    let tail_len = ((by_norm.len() as f64) * 0.2).ceil().max(1.0) as usize;
    let inf_tail = by_norm[..tail_len]
        .iter()
        .map(|&(_, d)| d)
        .fold(f64::INFINITY, f64::min);

    let groups: Vec<(f64, GridFunction)> = group_min.into_iter().flatten().collect();
    let k = groups.len().min(3);
    let tail_groups = &groups[groups.len() - k..];
    let all_violate = tail_groups.iter().all(|(d, _)| *d < -delta);
    // A single scale group means the probe bottomed out on the grid before
    // any trend was observable; that is a discretization floor, not evidence.
    let persistent = k >= 2 && {
        let first = tail_groups[0].0;
        let last = tail_groups[k - 1].0;
        last <= first + IMPROVEMENT_SLACK * first.abs() + 1e-12
    };

    let falsified = inf_tail < -delta && all_violate && persistent;
    let witness = if falsified {
        tail_groups
            .iter()
            .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"))
            .map(|(_, h)| h.clone())
    } else {
        None
    };
    Ok(QuotientReport {
        samples,
        inf_tail,
        verdict: if falsified {
            Verdict::Falsified
        } else {
            Verdict::Consistent
        },
        witness,
    })
}

/// The standard battery of families for a given pair `(u, η)`. Families whose
/// preconditions fail (empty support, vanishing η) are skipped.
pub fn builtin_families(
    u: &GridFunction,
    eta: &GridFunction,
    exps: Exponents,
    zero_tol: f64,
    seed: u64,
) -> Vec<DirectionFamily> {
    let mut out = Vec::new();
    if let Ok(f) = DirectionFamily::scaled_support_decaying(u, eta, zero_tol, 12) {
        out.push(f);
    }
    if let Ok(f) = DirectionFamily::sign_scaled_decaying(eta, 24) {
        out.push(f);
    }
    // Support kills, fixed-amplitude bumps, and norm-scaled directions are
    // the L^1 exclusion constructions. For s > 1 every grid function is
    // bounded away from zero on its support, so a negative support-kill tail
    // at the cell floor is a discretization artifact, not evidence; the
    // support condition is probed through the pairing term instead.
    if exps.is_l1() {
        if let Ok(f) = DirectionFamily::support_kill(u, zero_tol, 14) {
            out.push(f);
        }
        if let Ok(f) = DirectionFamily::scaled_support_growing(u, zero_tol, 14) {
            out.push(f);
        }
        if let Ok(f) = DirectionFamily::sign_scaled_fixed(eta, exps, 10) {
            out.push(f);
        }
    }
    if let Some(region) = bump_region(u, eta, exps, zero_tol) {
        let floor = u
            .values()
            .iter()
            .zip(region.flags())
            .filter(|(_, &on)| on)
            .map(|(v, _)| v.abs())
            .fold(f64::INFINITY, f64::min);
        if floor.is_finite() && floor > 0.0 {
            if let Ok(f) = DirectionFamily::constant_bump(region, floor / 4.0, 24) {
                out.push(f);
            }
        }
    }
    out.push(DirectionFamily::random_sparse(u, seed, 20));
    out
}

/// Support cells where the pinned dual value is most violated (fractional p),
/// or the value-minimal support prefix (p = 0).
fn bump_region(
    u: &GridFunction,
    eta: &GridFunction,
    exps: Exponents,
    zero_tol: f64,
) -> Option<CellMask> {
    let support = u.support_mask(zero_tol);
    if !support.any() {
        return None;
    }
    let p = exps.p();
    if p == 0.0 {
        let total = u.space().mask_measure(&support).ok()?;
        return value_ascending_prefixes(u, &support, total, 2)
            .into_iter()
            .next()
            .map(|(m, _)| m);
    }
    let worst = support.indices().max_by(|&a, &b| {
        let ra = (eta.values()[a] - pointwise_dual_value(u.values()[a], p)).abs();
        let rb = (eta.values()[b] - pointwise_dual_value(u.values()[b], p)).abs();
        ra.partial_cmp(&rb).expect("finite")
    })?;
    let mut flags = vec![false; u.len()];
    flags[worst] = true;
    Some(CellMask::new(flags))
}

/// Two-sided difference-quotient bracket for the dual value on a region where
/// `u` is constant: for each probe amplitude `t` the forward quotient bounds
/// the pinned value from below and the backward quotient from above, and the
/// bracket tightens as `t` shrinks.
pub fn bump_gradient_bracket(
    q: &SparsityFunctional,
    u: &GridFunction,
    region: &CellMask,
    scales: &[f64],
) -> Result<Vec<(f64, f64, f64)>> {
    if !region.any() {
        return Err(Error::InvalidParameter("bracket needs a region".into()));
    }
    let min_abs = u
        .values()
        .iter()
        .zip(region.flags())
        .filter(|(_, &on)| on)
        .map(|(v, _)| v.abs())
        .fold(f64::INFINITY, f64::min);
    if !(min_abs > 0.0) {
        return Err(Error::InvalidParameter(
            "u must not vanish on the region".into(),
        ));
    }
    let lam = u.space().mask_measure(region)?;
    let qu = q.evaluate(u, 0.0)?;
    let mut out = Vec::with_capacity(scales.len());
    for &t in scales {
        if !(t > 0.0 && t < min_abs) {
            return Err(Error::InvalidParameter(format!(
                "bump amplitude {t} must lie in (0, min |u| on region)"
            )));
        }
        let plus = u.map_masked(region, |v| v + t)?;
        let minus = u.map_masked(region, |v| v - t)?;
        let forward = (q.evaluate(&plus, 0.0)? - qu) / (t * lam);
        let backward = (qu - q.evaluate(&minus, 0.0)?) / (t * lam);
        out.push((t, forward, backward));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureSpace;

    fn setup(n: usize, s: f64, p: f64) -> (SparsityFunctional, std::sync::Arc<MeasureSpace>) {
        let space = MeasureSpace::uniform(n, 1.0).unwrap();
        (
            SparsityFunctional::new(Exponents::new(s, p).unwrap(), space.clone()),
            space,
        )
    }

    #[test]
    fn quotient_scaled_support_is_scale_free() {
        // u ≡ 1, η ≡ 1, h = (1/2k) u χ_{(0,1/4)}: D = -0.25/0.5 = -1/2 for
        // every k.
        let (q, space) = setup(16, 2.0, 0.0);
        let u = GridFunction::constant(space.clone(), 1.0).unwrap();
        let eta = GridFunction::constant(space.clone(), 1.0).unwrap();
        for k in 1..=4u32 {
            let c = 0.5 / k as f64;
            let values: Vec<f64> = (0..16).map(|i| if i < 4 { c } else { 0.0 }).collect();
            let h = GridFunction::new(space.clone(), values).unwrap();
            let d = quotient(&q, &u, &eta, &h).unwrap();
            assert!((d - (-0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn quotient_zero_direction_errors() {
        let (q, space) = setup(4, 2.0, 0.0);
        let u = GridFunction::constant(space.clone(), 1.0).unwrap();
        let z = GridFunction::zero(space);
        assert!(matches!(
            quotient(&q, &u, &u, &z),
            Err(Error::ZeroDirection)
        ));
    }

    #[test]
    fn quotient_nonnegative_at_zero_with_zero_eta() {
        let (q, space) = setup(8, 2.0, 0.0);
        let u = GridFunction::zero(space.clone());
        let eta = GridFunction::zero(space.clone());
        let h = GridFunction::new(space, vec![0.3, 0.0, -0.1, 0.0, 0.0, 0.0, 0.2, 0.0]).unwrap();
        assert!(quotient(&q, &u, &eta, &h).unwrap() >= 0.0);
    }

    #[test]
    fn falsifies_support_violation_p_zero() {
        // η living on the support of u violates the support condition.
        let (q, space) = setup(16, 2.0, 0.0);
        let values: Vec<f64> = (0..16).map(|i| if i < 8 { 1.0 } else { 0.0 }).collect();
        let u = GridFunction::new(space.clone(), values.clone()).unwrap();
        let eta = GridFunction::new(space.clone(), values).unwrap();
        let fam = DirectionFamily::scaled_support_decaying(&u, &eta, 0.0, 12).unwrap();
        let report = falsify(&q, &u, &eta, &fam, 1e-6).unwrap();
        assert_eq!(report.verdict, Verdict::Falsified);
        // The violation is bounded by -ρ ‖u‖_{1,Ω'} / ‖u‖_{2,Ω'}.
        let rho = 0.5; // half the max of |η|
        let omega = fam.target_sets[0].clone();
        let l1 = u.partial_norm(1.0, &omega).unwrap();
        let l2 = u.partial_norm(2.0, &omega).unwrap();
        assert!(report.inf_tail <= -rho * l1 / l2 + 1e-8);
        // The witness reproduces the violation when replayed.
        let witness = report.witness.expect("falsified reports carry a witness");
        assert!(quotient(&q, &u, &eta, &witness).unwrap() < -1e-6);
    }

    #[test]
    fn quotient_vanishes_at_the_pinned_value() {
        // With η equal to the pinned dual value on a constant-sign region,
        // the quotient tends to zero from below as the bump amplitude
        // shrinks.
        let (q, space) = setup(8, 2.0, 0.5);
        let u = GridFunction::constant(space.clone(), 4.0).unwrap();
        let eta = GridFunction::constant(space.clone(), 0.25).unwrap();
        let mut last = f64::NEG_INFINITY;
        for k in 2..=14 {
            let t = 2f64.powi(-k);
            let values: Vec<f64> = (0..8).map(|i| if i < 4 { t } else { 0.0 }).collect();
            let h = GridFunction::new(space.clone(), values).unwrap();
            let d = quotient(&q, &u, &eta, &h).unwrap();
            assert!(d <= 0.0 && d >= last - 1e-15);
            last = d;
        }
        assert!(last > -1e-4);
    }

    #[test]
    fn consistent_for_valid_support_constrained_eta() {
        // u bounded away from zero, η supported on {u = 0}: every family
        // stays consistent.
        let (q, space) = setup(16, 2.0, 0.0);
        let uvals: Vec<f64> = (0..16).map(|i| if i < 8 { 2.0 } else { 0.0 }).collect();
        let evals: Vec<f64> = (0..16).map(|i| if i >= 8 { 1.5 } else { 0.0 }).collect();
        let u = GridFunction::new(space.clone(), uvals).unwrap();
        let eta = GridFunction::new(space, evals).unwrap();
        for fam in builtin_families(&u, &eta, q.exps(), 0.0, 42) {
            let report = falsify(&q, &u, &eta, &fam, 1e-6).unwrap();
            assert_eq!(report.verdict, Verdict::Consistent, "family {}", fam.label);
        }
    }

    #[test]
    fn consistent_for_exact_dual_value_fractional_p() {
        let (q, space) = setup(16, 2.0, 0.5);
        let u = GridFunction::constant(space.clone(), 4.0).unwrap();
        let eta = GridFunction::constant(space, 0.25).unwrap();
        for fam in builtin_families(&u, &eta, q.exps(), 0.0, 7) {
            let report = falsify(&q, &u, &eta, &fam, 1e-6).unwrap();
            assert_eq!(report.verdict, Verdict::Consistent, "family {}", fam.label);
        }
    }

    #[test]
    fn fixed_amplitude_probe_meets_analytic_bound() {
        // s = 1, p = 0.5, u ≡ 1, η ≡ 0.5: D ≤ α^{p-1} - ρ < 0.
        let (q, space) = setup(16, 1.0, 0.5);
        let u = GridFunction::constant(space.clone(), 1.0).unwrap();
        let eta = GridFunction::constant(space, 0.5).unwrap();
        let fam = DirectionFamily::sign_scaled_fixed(&eta, q.exps(), 8).unwrap();
        let report = falsify(&q, &u, &eta, &fam, 1e-6).unwrap();
        assert_eq!(report.verdict, Verdict::Falsified);
        let alpha = match fam.kind {
            FamilyKind::SignScaled { amplitude: Some(a) } => a,
            _ => unreachable!(),
        };
        let rho = 0.25; // half of max |η|
        assert!(report.inf_tail <= alpha.powf(-0.5) - rho + 1e-8);
    }

    #[test]
    fn l1_nonzero_support_is_falsified_by_support_kill() {
        let (q, space) = setup(32, 1.0, 0.0);
        let values: Vec<f64> = (0..32).map(|i| 0.5 + (i as f64) / 32.0).collect();
        let u = GridFunction::new(space.clone(), values).unwrap();
        let eta = GridFunction::zero(space);
        let fam = DirectionFamily::support_kill(&u, 0.0, 12).unwrap();
        let report = falsify(&q, &u, &eta, &fam, 1e-6).unwrap();
        assert_eq!(report.verdict, Verdict::Falsified);
    }

    #[test]
    fn growing_amplitude_family_falsifies_l1_fractional() {
        // s = 1, p ∈ (0,1), u ≠ 0: even the pointwise dual candidate fails.
        let (q, space) = setup(16, 1.0, 0.5);
        let u = GridFunction::constant(space.clone(), 1.0).unwrap();
        let eta = GridFunction::constant(space, 0.5).unwrap();
        let fam = DirectionFamily::scaled_support_growing(&u, 0.0, 12).unwrap();
        let report = falsify(&q, &u, &eta, &fam, 1e-4).unwrap();
        assert_eq!(report.verdict, Verdict::Falsified);
    }

    #[test]
    fn empty_family_is_rejected() {
        let (q, space) = setup(4, 2.0, 0.0);
        let u = GridFunction::constant(space.clone(), 1.0).unwrap();
        let fam = DirectionFamily {
            kind: FamilyKind::SupportKill,
            scales: Vec::new(),
            target_sets: Vec::new(),
            label: "empty",
        };
        assert!(falsify(&q, &u, &GridFunction::zero(space), &fam, 1e-6).is_err());
    }

    #[test]
    fn bump_bracket_converges_to_dual_value() {
        let (q, space) = setup(8, 2.0, 0.5);
        let u = GridFunction::constant(space, 4.0).unwrap();
        let region = CellMask::new((0..8).map(|i| i < 2).collect());
        let scales: Vec<f64> = (4..=20).map(|k| 2f64.powi(-k)).collect();
        let brackets = bump_gradient_bracket(&q, &u, &region, &scales).unwrap();
        let target = pointwise_dual_value(4.0, 0.5);
        for &(_, lo, hi) in &brackets {
            assert!(lo <= target + 1e-12 && target <= hi + 1e-12);
        }
        let (_, lo, hi) = brackets.last().copied().unwrap();
        assert!((hi - lo).abs() < 1e-5);
        assert!((0.5 * (hi + lo) - target).abs() < 1e-4);
    }

    #[test]
    fn support_kill_falsifies_discretized_steep_profile() {
        // x^{0.9} with s = 2 decays too fast to be slowly decreasing; on a
        // fine grid the support-kill quotients worsen like λ^{-0.4} until the
        // cell floor, which is persistent evidence.
        let n = 4096;
        let (q, space) = setup(n, 2.0, 0.0);
        let values: Vec<f64> = (0..n)
            .map(|i| (((i as f64) + 0.5) / n as f64).powf(0.9))
            .collect();
        let u = GridFunction::new(space.clone(), values).unwrap();
        let eta = GridFunction::zero(space);
        let fam = DirectionFamily::support_kill(&u, 0.0, 10).unwrap();
        let report = falsify(&q, &u, &eta, &fam, 1e-6).unwrap();
        assert_eq!(report.verdict, Verdict::Falsified);
        // The quotient over the prefix (0, t) is -(αs+1)^{-1/s} t^{1-α-1/s}.
        let worst = report
            .samples
            .iter()
            .map(|&(_, d)| d)
            .fold(f64::INFINITY, f64::min);
        let t = 2f64.powi(-10);
        let expected = -(0.9f64 * 2.0 + 1.0).powf(-0.5) * t.powf(1.0 - 0.9 - 0.5);
        assert!(worst <= expected * 0.9);
    }

    #[test]
    fn random_sparse_is_deterministic_per_seed() {
        let (_, space) = setup(12, 2.0, 0.0);
        let u = GridFunction::constant(space.clone(), 1.0).unwrap();
        let eta = GridFunction::zero(space);
        let f1 = DirectionFamily::random_sparse(&u, 9, 6);
        let f2 = DirectionFamily::random_sparse(&u, 9, 6);
        let d1 = f1.directions(&u, &eta).unwrap();
        let d2 = f2.directions(&u, &eta).unwrap();
        assert_eq!(d1.len(), d2.len());
        for ((g1, h1), (g2, h2)) in d1.iter().zip(&d2) {
            assert_eq!(g1, g2);
            assert_eq!(h1.values(), h2.values());
        }
    }
}
