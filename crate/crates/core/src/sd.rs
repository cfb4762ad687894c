//! Slowly-decreasing classification of functions through their level-measure
//! behavior near zero.
//!
//! A function `u` with conjugate exponents `(s, r)` is order-`s` slowly
//! decreasing (s-SD) when the quotient `λ(Ω_k)/‖u‖_{s,Ω_k}` vanishes along
//! every shrinking family of measurable subsets of the support. Three
//! computable criteria are implemented, ordered from strongest hypothesis to
//! exact characterization:
//!
//! 1. bounded away from zero on the support ([`check_bounded_away`]),
//! 2. `|u|^{-1}` integrable to the power `r` on the support
//!    ([`check_hoelder_criterion`]),
//! 3. `λ({0 < |u| ≤ γ}) γ^{-r} → 0` ([`check_level_decay`]), which is
//!    equivalent to the s-SD property.
//!
//! Analytic [`ProfileFamily`] values carry exact level-measure functions so
//! criteria 2 and 3 run on closed forms instead of quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Exponents, GridFunction};

/// Truncation for the dyadic profile series; terms decay geometrically.
const SERIES_RELATIVE_CUTOFF: f64 = 1e-16;

/// Analytic function family with an exact level-measure function
/// `g(γ) = λ({0 < |u| ≤ γ})`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileFamily {
    /// `u(x) = x^alpha` on the unit interval.
    Power { alpha: f64 },
    /// Piecewise-constant profile on dyadic intervals `(2^{-k-1}, 2^{-k}]`
    /// taking the value `(k 2^{-k})^{1/rule_r}` on the k-th interval.
    Dyadic {
        #[serde(alias = "r")]
        rule_r: f64,
    },
    /// Explicit monotone level-measure samples `(γ_i, g(γ_i))`, interpreted
    /// as a right-continuous step function.
    Table { points: Vec<(f64, f64)> },
}

impl ProfileFamily {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(Self::Power { alpha })
    }

    pub fn dyadic(rule_r: f64) -> Result<Self> {
        if !(rule_r.is_finite() && rule_r > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "dyadic rule exponent must be > 1, got {rule_r}"
            )));
        }
        Ok(Self::Dyadic { rule_r })
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("table profile needs points".into()));
        }
        for w in points.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::InvalidParameter(
                    "table gamma values must be strictly increasing".into(),
                ));
            }
            if w[0].1 > w[1].1 {
                return Err(Error::InvalidParameter(
                    "table level measures must be nondecreasing".into(),
                ));
            }
        }
        if points
            .iter()
            .any(|&(g, m)| !(g > 0.0 && g.is_finite() && m >= 0.0 && m.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "table entries must be finite with positive gamma".into(),
            ));
        }
        Ok(Self::Table { points })
    }

    /// Exact table profile built from a grid function: breakpoints are the
    /// distinct values of `|u|` on the support, masses are cell measures.
    pub fn from_grid(u: &GridFunction, zero_tol: f64) -> Result<Self> {
        let tol = zero_tol.max(0.0);
        let mut atoms: Vec<(f64, f64)> = u
            .values()
            .iter()
            .zip(u.space().cell_measures())
            .filter(|(v, _)| v.abs() > tol)
            .map(|(v, &m)| (v.abs(), m))
            .collect();
        if atoms.is_empty() {
            return Err(Error::InvalidParameter(
                "grid function vanishes; no level measure to tabulate".into(),
            ));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
        let mut points: Vec<(f64, f64)> = Vec::new();
        let mut cumulative = 0.0;
        for (value, mass) in atoms {
            cumulative += mass;
            match points.last_mut() {
                Some(last) if last.0 == value => last.1 = cumulative,
                _ => points.push((value, cumulative)),
            }
        }
        Self::table(points)
    }

    /// `g(γ) = λ({0 < |u| ≤ γ})`.
    pub fn level_measure(&self, gamma: f64) -> f64 {
        if gamma <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Power { alpha } => gamma.powf(1.0 / alpha).min(1.0),
            Self::Dyadic { rule_r } => {
                let j0 = dyadic_first_index_below(gamma, *rule_r);
                match j0 {
                    Some(j) => 2f64.powi(-(j as i32)),
                    None => 0.0,
                }
            }
            Self::Table { points } => {
                // Last breakpoint ≤ gamma, right-continuous step.
                let mut g = 0.0;
                for &(bp, cum) in points {
                    if bp <= gamma {
                        g = cum;
                    } else {
                        break;
                    }
                }
                g
            }
        }
    }

    /// Measure of the support `{u ≠ 0}`.
    pub fn support_measure(&self) -> f64 {
        match self {
            Self::Power { .. } => 1.0,
            Self::Dyadic { .. } => 0.5,
            Self::Table { points } => points.last().expect("nonempty").1,
        }
    }

    /// Largest value attained (supremum of `|u|`).
    pub fn value_sup(&self) -> f64 {
        match self {
            Self::Power { .. } => 1.0,
            Self::Dyadic { rule_r } => dyadic_gamma(1, *rule_r),
            Self::Table { points } => points.last().expect("nonempty").0,
        }
    }

    /// Essential infimum of `|u|` over the support; positive exactly when the
    /// profile is bounded away from zero.
    pub fn essential_lower_bound(&self) -> f64 {
        match self {
            Self::Power { .. } | Self::Dyadic { .. } => 0.0,
            Self::Table { points } => points
                .iter()
                .find(|&&(_, cum)| cum > 0.0)
                .map(|&(bp, _)| bp)
                .unwrap_or(0.0),
        }
    }

    /// `‖u‖_{s,Ω_t}` where `Ω_t` is the worst-case (value-minimal) subset of
    /// the support with measure exactly `t`.
    pub fn snorm_on_prefix(&self, t: f64, s: f64) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prefix measure must be positive, got {t}"
            )));
        }
        let support = self.support_measure();
        if t > support * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "prefix measure {t} exceeds support measure {support}"
            )));
        }
        let t = t.min(support);
        match self {
            Self::Power { alpha } => {
                // Ω_t = (0, t); ∫_0^t x^{αs} dx = t^{αs+1}/(αs+1).
                let e = alpha * s + 1.0;
                Ok((t.powf(e) / e).powf(1.0 / s))
            }
            Self::Dyadic { rule_r } => {
                // Ω_t = (0, t) inside the support (0, 1/2].
                let ell = (-t.log2()).ceil().max(1.0) as u32; // t_{ell+1} < t <= t_ell
                let ell = if 2f64.powi(-(ell as i32)) >= t {
                    ell
                } else {
                    ell - 1
                };
                let mut acc =
                    dyadic_gamma(ell, *rule_r).powf(s) * (t - 2f64.powi(-(ell as i32 + 1)));
                let mut j = ell + 1;
                loop {
                    let term = dyadic_gamma(j, *rule_r).powf(s) * 2f64.powi(-(j as i32 + 1));
                    acc += term;
                    if term <= acc * SERIES_RELATIVE_CUTOFF || j > ell + 4000 {
                        break;
                    }
                    j += 1;
                }
                Ok(acc.powf(1.0 / s))
            }
            Self::Table { points } => {
                let mut remaining = t;
                let mut acc = 0.0;
                let mut prev_cum = 0.0;
                for &(bp, cum) in points {
                    let mass = cum - prev_cum;
                    prev_cum = cum;
                    if mass <= 0.0 {
                        continue;
                    }
                    let take = mass.min(remaining);
                    acc += bp.powf(s) * take;
                    remaining -= take;
                    if remaining <= 0.0 {
                        break;
                    }
                }
                Ok(acc.powf(1.0 / s))
            }
        }
    }

    /// Partial dual-norm integral `∫_{ {|u| > γ_min} } |u|^{-r}` via the
    /// level-measure function.
    fn dual_integral_above(&self, gamma_min: f64, r: f64) -> f64 {
        match self {
            Self::Power { alpha } => {
                // ∫_a^1 x^{-αr} dx with a = γ_min^{1/α}.
                let a = gamma_min.powf(1.0 / alpha).min(1.0);
                let e = 1.0 - alpha * r;
                if e.abs() < 1e-12 {
                    -a.ln()
                } else {
                    (1.0 - a.powf(e)) / e
                }
            }
            Self::Dyadic { rule_r } => {
                let mut acc = 0.0;
                let mut j = 1u32;
                loop {
                    let gamma_j = dyadic_gamma(j, *rule_r);
                    if gamma_j <= gamma_min || gamma_j == 0.0 {
                        break;
                    }
                    // γ_j^{-r} (t_j - t_{j+1}) computed in log space to stay
                    // clear of overflow when r exceeds the rule exponent.
                    let log_term = -r * gamma_j.ln() - (j as f64 + 1.0) * std::f64::consts::LN_2;
                    if log_term > 600.0 {
                        return f64::INFINITY;
                    }
                    acc += log_term.exp();
                    if j > 200_000 {
                        break;
                    }
                    j += 1;
                }
                acc
            }
            Self::Table { points } => {
                let mut acc = 0.0;
                let mut prev_cum = 0.0;
                for &(bp, cum) in points {
                    let mass = cum - prev_cum;
                    prev_cum = cum;
                    if bp > gamma_min && mass > 0.0 {
                        acc += bp.powf(-r) * mass;
                    }
                }
                acc
            }
        }
    }

    /// A γ-grid adapted to the profile: log-spaced for smooth level measures,
    /// the exact jump locations for piecewise-constant ones. Strictly
    /// decreasing.
    pub fn natural_gamma_grid(&self, gamma_min: f64, gamma_max: f64) -> Vec<f64> {
        match self {
            Self::Power { .. } => log_spaced_desc(gamma_min, gamma_max, 60),
            Self::Dyadic { rule_r } => {
                let mut grid = Vec::new();
                let mut j = 1u32;
                loop {
                    let g = dyadic_gamma(j, *rule_r);
                    if g < gamma_min || g == 0.0 || j > 100_000 {
                        break;
                    }
                    if g <= gamma_max && grid.last().map_or(true, |&last| g < last) {
                        grid.push(g);
                    }
                    j += 1;
                }
                grid
            }
            Self::Table { points } => {
                let mut grid: Vec<f64> = points
                    .iter()
                    .rev()
                    .map(|&(bp, _)| bp)
                    .filter(|&bp| bp >= gamma_min && bp <= gamma_max)
                    .collect();
                // Pad below the smallest breakpoint so the trace shows the
                // exact-zero tail of the level measure.
                let floor = self.essential_lower_bound();
                if floor > 0.0 {
                    let mut pad = floor;
                    for _ in 0..6 {
                        pad /= 10.0;
                        if pad < gamma_min * 1e-6 {
                            break;
                        }
                        grid.push(pad);
                    }
                }
                if grid.len() < 2 {
                    grid = log_spaced_desc(gamma_min.min(floor / 1e6), gamma_max, 40);
                }
                grid
            }
        }
    }
}

fn dyadic_gamma(k: u32, rule_r: f64) -> f64 {
    (k as f64 * 2f64.powi(-(k as i32))).powf(1.0 / rule_r)
}

/// Smallest `j` with `γ_j ≤ γ`, if any is representable. The comparison
/// carries a relative slack so that querying exactly at a jump value, which
/// round-trips through `powf`, lands on the jump rather than past it.
fn dyadic_first_index_below(gamma: f64, rule_r: f64) -> Option<u32> {
    let target = gamma.powf(rule_r) * (1.0 + 1e-12); // compare j 2^{-j} <= target
    let h = |j: u32| j as f64 * 2f64.powi(-(j as i32));
    if h(2) <= target {
        // γ_1 = γ_2, so anything at or above that level has index 1.
        return Some(if h(1) <= target { 1 } else { 2 });
    }
    // h is strictly decreasing from j = 2 on; find the crossing.
    let mut hi = 4u32;
    while h(hi) > target {
        if hi > 1_000_000 {
            return None; // below every representable level
        }
        hi *= 2;
    }
    let mut lo = hi / 2; // h(lo) > target, h(hi) <= target
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if h(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Descending log-spaced grid with `count` points.
pub fn log_spaced_desc(min: f64, max: f64, count: usize) -> Vec<f64> {
    assert!(min > 0.0 && max > min && count >= 2);
    let lmin = min.ln();
    let lmax = max.ln();
    (0..count)
        .map(|i| (lmax + (lmin - lmax) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Default probe grid: 60 log-spaced levels spanning `[1e-9, 1e-1]`.
pub fn default_gamma_grid() -> Vec<f64> {
    log_spaced_desc(1e-9, 1e-1, 60)
}

/// Which criterion produced a verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionMethod {
    /// Bounded away from zero on the support.
    BoundedAway,
    /// `|u|^{-1}` lies in the dual Lebesgue space on the support.
    DualNormFinite,
    /// Level-measure decay `g(γ) γ^{-r} → 0`.
    LevelMeasureDecay,
    /// Direct worst-case quotient evaluation.
    AdversarialQuotient,
}

/// Outcome of a slowly-decreasing classification.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdVerdict {
    pub is_sd: bool,
    /// Samples `(γ, g(γ) γ^{-r})`, strictly decreasing in γ.
    pub criterion_trace: Vec<(f64, f64)>,
    pub method: CriterionMethod,
    pub slope_estimate: f64,
}

/// Minimum of `|u|` over the support, or the vacuous certificate when the
/// support is empty. Either case certifies the s-SD property for `s > 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SupportBound {
    /// Support has measure zero; trivially slowly decreasing.
    Vacuous,
    /// Positive lower bound of `|u|` on the support.
    MinAbs(f64),
}

impl SupportBound {
    pub fn bound(&self) -> Option<f64> {
        match self {
            Self::Vacuous => None,
            Self::MinAbs(b) => Some(*b),
        }
    }

    pub fn to_verdict(&self) -> SdVerdict {
        SdVerdict {
            is_sd: true,
            criterion_trace: Vec::new(),
            method: CriterionMethod::BoundedAway,
            slope_estimate: f64::INFINITY,
        }
    }
}

/// Every grid function is bounded away from zero on its (finite) support, so
/// this is the canonical classifier for discretized data.
pub fn check_bounded_away(u: &GridFunction, zero_tol: f64) -> SupportBound {
    let tol = zero_tol.max(0.0);
    let mut min_abs = f64::INFINITY;
    for &v in u.values() {
        let a = v.abs();
        if a > tol {
            min_abs = min_abs.min(a);
        }
    }
    if min_abs.is_infinite() {
        SupportBound::Vacuous
    } else {
        SupportBound::MinAbs(min_abs)
    }
}

/// Result of the dual-integrability criterion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HoelderCheck {
    pub converged: bool,
    /// Partial integral `∫_{ {|u| > γ_min} } |u|^{-r}`.
    pub partial: f64,
    /// `(γ, partial integral above γ)` per probed decade.
    pub decade_partials: Vec<(f64, f64)>,
}

/// Sufficient criterion: `|u|^{-1} χ_{support} ∈ L^r` certifies s-SD. The
/// partial integrals are exact per level; convergence is judged from the
/// per-decade increments (geometric decay converges, flattening or growing
/// increments diverge).
pub fn check_hoelder_criterion(
    profile: &ProfileFamily,
    exps: &Exponents,
    gamma_min: f64,
) -> Result<HoelderCheck> {
    if exps.is_l1() {
        return Err(Error::NotApplicable(
            "dual-integrability criterion needs s > 1".into(),
        ));
    }
    if !(gamma_min > 0.0 && gamma_min.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma_min must be positive, got {gamma_min}"
        )));
    }
    let r = exps.r();
    let sup = profile.value_sup();
    if gamma_min >= sup {
        return Err(Error::InvalidParameter(
            "gamma_min must lie below the profile's value range".into(),
        ));
    }
    let decades = (sup / gamma_min).log10().ceil().max(2.0) as usize;
    let mut decade_partials = Vec::with_capacity(decades + 1);
    for k in 0..=decades {
        let gamma = (sup * 10f64.powi(-(k as i32))).max(gamma_min);
        decade_partials.push((gamma, profile.dual_integral_above(gamma, r)));
        if gamma == gamma_min {
            break;
        }
    }
    let partial = profile.dual_integral_above(gamma_min, r);
    let increments: Vec<f64> = decade_partials
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .collect();
    let converged = partial.is_finite() && increments_converge(&increments);
    Ok(HoelderCheck {
        converged,
        partial,
        decade_partials,
    })
}

/// Heuristic on per-decade increments of a monotone partial sum: geometric
/// decay means the tail is summable, while ratios that flatten toward one or
/// exceed it indicate divergence (covers the logarithmically divergent case).
fn increments_converge(increments: &[f64]) -> bool {
    if increments.is_empty() || increments.iter().any(|d| !d.is_finite()) {
        return increments.iter().all(|d| d.is_finite());
    }
    if *increments.last().expect("nonempty") == 0.0 {
        return true; // no mass left at depth
    }
    let positive: Vec<f64> = increments.iter().copied().filter(|&d| d > 0.0).collect();
    if positive.len() < 3 {
        return true;
    }
    let ratios: Vec<f64> = positive.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    if tail_mean >= 0.95 {
        return false;
    }
    let head_mean = (ratios[0] + ratios[1.min(ratios.len() - 1)]) / 2.0;
    let last2 = &ratios[ratios.len().saturating_sub(2)..];
    let last2_mean = last2.iter().sum::<f64>() / last2.len() as f64;
    last2_mean <= head_mean + 0.05
}

/// Decision thresholds for the level-decay verdict. A finite grid cannot
/// evaluate a limit, so the verdict demands an observed decrease of the
/// criterion function plus a positive fitted log-log slope over the smallest
/// two decades.
#[derive(Clone, Copy, Debug)]
pub struct SdPolicy {
    /// `φ(γ_min)` must fall below this fraction of `φ(γ_max)`.
    pub decrease_factor: f64,
    /// Minimum least-squares slope of `log φ` against `log γ` near zero.
    pub min_slope: f64,
}

impl Default for SdPolicy {
    fn default() -> Self {
        Self {
            decrease_factor: 0.2,
            min_slope: 0.02,
        }
    }
}

/// Exact characterization: s-SD holds iff `φ(γ) = g(γ) γ^{-r} → 0`. The grid
/// must be strictly decreasing and span at least five decades.
pub fn check_level_decay(
    profile: &ProfileFamily,
    exps: &Exponents,
    gamma_grid: &[f64],
    policy: &SdPolicy,
) -> Result<SdVerdict> {
    if exps.is_l1() {
        return Err(Error::NotApplicable(
            "level-decay criterion needs s > 1".into(),
        ));
    }
    if gamma_grid.len() < 2 {
        return Err(Error::InvalidParameter(
            "gamma grid needs at least 2 points".into(),
        ));
    }
    for w in gamma_grid.windows(2) {
        if !(w[1] > 0.0 && w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "gamma grid must be strictly decreasing and positive".into(),
            ));
        }
    }
    let gmax = gamma_grid[0];
    let gmin = *gamma_grid.last().expect("nonempty");
    if gmax / gmin < 1e5 {
        return Err(Error::InvalidParameter(
            "gamma grid must span at least five decades".into(),
        ));
    }
    let r = exps.r();
    let trace: Vec<(f64, f64)> = gamma_grid
        .iter()
        .map(|&g| (g, profile.level_measure(g) * g.powf(-r)))
        .collect();

    let phi_first = trace[0].1;
    let phi_last = trace.last().expect("nonempty").1;

    if phi_last == 0.0 {
        // The level measure vanishes identically near zero; the limit is
        // attained exactly.
        return Ok(SdVerdict {
            is_sd: true,
            criterion_trace: trace,
            method: CriterionMethod::LevelMeasureDecay,
            slope_estimate: f64::INFINITY,
        });
    }

    // Fit over the smallest two decades of the grid.
    let window: Vec<(f64, f64)> = trace
        .iter()
        .copied()
        .filter(|&(g, phi)| g <= gmin * 100.0 && phi > 0.0)
        .collect();
    let slope = if window.len() >= 2 {
        log_log_slope(&window)
    } else {
        0.0
    };
    let decreased = phi_first > 0.0 && phi_last < policy.decrease_factor * phi_first;
    Ok(SdVerdict {
        is_sd: decreased && slope >= policy.min_slope,
        criterion_trace: trace,
        method: CriterionMethod::LevelMeasureDecay,
        slope_estimate: slope,
    })
}

/// Convenience wrapper: the default log grid for smooth profiles, the
/// natural jump grid for piecewise-constant ones.
pub fn check_level_decay_default(profile: &ProfileFamily, exps: &Exponents) -> Result<SdVerdict> {
    let grid = match profile {
        ProfileFamily::Power { .. } => default_gamma_grid(),
        _ => profile.natural_gamma_grid(1e-9, profile.value_sup()),
    };
    check_level_decay(profile, exps, &grid, &SdPolicy::default())
}

/// Runs the criteria in order of strength and reports which one decided:
/// a positive essential lower bound certifies immediately, a finite dual
/// norm certifies next, and the exact level-decay characterization settles
/// the remaining cases either way.
pub fn classify_profile(profile: &ProfileFamily, exps: &Exponents) -> Result<SdVerdict> {
    if profile.essential_lower_bound() > 0.0 {
        let mut verdict = check_level_decay_default(profile, exps)?;
        verdict.is_sd = true;
        verdict.method = CriterionMethod::BoundedAway;
        return Ok(verdict);
    }
    let hoelder = check_hoelder_criterion(profile, exps, 1e-8)?;
    if hoelder.converged {
        let mut verdict = check_level_decay_default(profile, exps)?;
        verdict.is_sd = true;
        verdict.method = CriterionMethod::DualNormFinite;
        return Ok(verdict);
    }
    check_level_decay_default(profile, exps)
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_log_slope(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(x, y) in samples {
        sx += x.ln();
        sy += y.ln();
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut num, mut den) = (0.0, 0.0);
    for &(x, y) in samples {
        let dx = x.ln() - mx;
        num += dx * (y.ln() - my);
        den += dx * dx;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Worst-case quotients `λ(Ω_t)/‖u‖_{s,Ω_t}` over value-minimal sets of
/// measure `t`, one sample per grid entry.
pub fn adversarial_quotient(
    profile: &ProfileFamily,
    exps: &Exponents,
    t_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty t grid".into()));
    }
    for w in t_grid.windows(2) {
        if !(w[1] > 0.0 && w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "t grid must be strictly decreasing and positive".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let norm = profile.snorm_on_prefix(t, exps.s())?;
        if norm == 0.0 {
            return Err(Error::UnsupportedProfile(
                "zero norm on a positive-measure prefix".into(),
            ));
        }
        out.push((t, t / norm));
    }
    Ok(out)
}

/// Verdict from adversarial samples: the quotient tends to zero iff its
/// log-log slope against `t` is positive.
pub fn adversarial_verdict(samples: &[(f64, f64)]) -> SdVerdict {
    let tmin = samples.last().map(|&(t, _)| t).unwrap_or(0.0);
    let window: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(t, q)| t <= tmin * 100.0 && q > 0.0)
        .collect();
    let slope = if window.len() >= 2 {
        log_log_slope(&window)
    } else {
        0.0
    };
    SdVerdict {
        is_sd: slope >= 0.005,
        criterion_trace: samples.to_vec(),
        method: CriterionMethod::AdversarialQuotient,
        slope_estimate: slope,
    }
}

/// Unique crossing of a monotone level function against `C γ^{-α}`: returns
/// `γ_C` with `g(γ_C^-) ≤ C γ_C^{-α} ≤ g(γ_C^+)`, found by bisection on the
/// monotone map `γ ↦ γ^α g(γ)`.
pub fn ivt_gamma(g: impl Fn(f64) -> f64, alpha: f64, c: f64, tol: f64) -> Result<f64> {
    if !(alpha > 0.0 && c > 0.0 && tol > 0.0) {
        return Err(Error::InvalidParameter(
            "ivt_gamma needs positive alpha, C, and tolerance".into(),
        ));
    }
    let h = |gamma: f64| gamma.powf(alpha) * g(gamma);

    let mut hi = 1.0;
    while h(hi) < c {
        hi *= 2.0;
        if hi > 1e30 {
            return Err(Error::NoCrossing);
        }
    }
    let mut lo = hi / 2.0;
    while h(lo) >= c {
        lo /= 2.0;
        if lo < 1e-300 {
            // g carries an atom at zero stronger than C γ^{-α}; no positive
            // crossing exists in the representable range.
            return Err(Error::NoCrossing);
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if h(mid) >= c {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
