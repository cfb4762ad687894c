//! Proximal-gradient solver for composite problems
//! `F(u) = ½‖Au − b‖² + β q_{2,p}(u)` on the Hilbert grid (`s = 2`), with
//! exact scalar proximal maps for the counting penalty (`p = 0`, hard
//! thresholding) and the fractional penalty (`p ∈ (0,1)`, thresholded root
//! finding).
//!
//! The measure weights multiply both the quadratic and the penalty term, so
//! the proximal subproblem decouples into identical weight-free scalar
//! problems per cell.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::SparsityFunctional;
use crate::measure::{pairwise_sum, Exponents, GridFunction, MeasureSpace};
use crate::subdiff::pointwise_dual_value;

/// Forward map from the control grid to the observation grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlOperator {
    /// Explicit dense matrix, one row per observation cell.
    Dense { rows: Vec<Vec<f64>> },
    /// Control-to-state map of the 1D Poisson problem `-y'' = u` with
    /// homogeneous Dirichlet boundary on `n` interior nodes; the observation
    /// grid equals the control grid.
    Poisson1d { n: usize },
}

impl ControlOperator {
    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                row
            })
            .collect();
        Self::Dense { rows }
    }

    fn control_dim(&self) -> usize {
        match self {
            Self::Dense { rows } => rows.first().map_or(0, |r| r.len()),
            Self::Poisson1d { n } => *n,
        }
    }

    fn observation_dim(&self) -> usize {
        match self {
            Self::Dense { rows } => rows.len(),
            Self::Poisson1d { n } => *n,
        }
    }

    fn apply_values(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Self::Dense { rows } => rows
                .iter()
                .map(|row| {
                    let terms: Vec<f64> = row.iter().zip(u).map(|(a, x)| a * x).collect();
                    pairwise_sum(&terms)
                })
                .collect(),
            Self::Poisson1d { n } => poisson_solve(*n, u),
        }
    }

    /// Adjoint with respect to the weighted inner products on the control
    /// (`λ`) and observation (`μ`) grids.
    fn adjoint_values(&self, w: &[f64], control: &[f64], observation: &[f64]) -> Vec<f64> {
        match self {
            Self::Dense { rows } => {
                let cols = self.control_dim();
                let mut out = vec![0.0; cols];
                for (j, row) in rows.iter().enumerate() {
                    let scaled = observation[j] * w[j];
                    for (k, a) in row.iter().enumerate() {
                        out[k] += a * scaled;
                    }
                }
                for (k, v) in out.iter_mut().enumerate() {
                    *v /= control[k];
                }
                out
            }
            Self::Poisson1d { n } => {
                // Symmetric map on a uniform grid: the adjoint is the map
                // itself up to the weight ratio, which is one here.
                let _ = (control, observation);
                poisson_solve(*n, w)
            }
        }
    }
}

/// Solves `(1/h²) tridiag(-1, 2, -1) y = u` with `h = 1/(n+1)` by the Thomas
/// algorithm.
fn poisson_solve(n: usize, u: &[f64]) -> Vec<f64> {
    assert_eq!(u.len(), n);
    let h = 1.0 / (n as f64 + 1.0);
    let h2 = h * h;
    let mut diag = vec![2.0 / h2; n];
    let off = -1.0 / h2;
    let mut rhs = u.to_vec();
    for i in 1..n {
        let m = off / diag[i - 1];
        diag[i] -= m * off;
        rhs[i] -= m * rhs[i - 1];
    }
    let mut y = vec![0.0; n];
    y[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        y[i] = (rhs[i] - off * y[i + 1]) / diag[i];
    }
    y
}

/// The composite minimization problem.
#[derive(Clone, Debug)]
pub struct CompositeProblem {
    pub operator: ControlOperator,
    /// Observation-grid target.
    pub b: GridFunction,
    pub beta: f64,
    pub exps: Exponents,
    pub space: Arc<MeasureSpace>,
}

impl CompositeProblem {
    pub fn new(
        operator: ControlOperator,
        space: Arc<MeasureSpace>,
        b: GridFunction,
        beta: f64,
        p: f64,
    ) -> Result<Self> {
        let exps = Exponents::new(2.0, p)?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        if operator.control_dim() != space.len() {
            return Err(Error::DimensionMismatch {
                left: operator.control_dim(),
                right: space.len(),
            });
        }
        if operator.observation_dim() != b.len() {
            return Err(Error::DimensionMismatch {
                left: operator.observation_dim(),
                right: b.len(),
            });
        }
        Ok(Self {
            operator,
            b,
            beta,
            exps,
            space,
        })
    }

    /// Identity observation of the control grid.
    pub fn identity(space: Arc<MeasureSpace>, b: GridFunction, beta: f64, p: f64) -> Result<Self> {
        let n = space.len();
        Self::new(ControlOperator::identity(n), space, b, beta, p)
    }

    /// 1D Poisson control problem on `n` interior nodes with uniform cells.
    pub fn poisson1d(n: usize, b_values: Vec<f64>, beta: f64, p: f64) -> Result<Self> {
        let h = 1.0 / (n as f64 + 1.0);
        let space = Arc::new(MeasureSpace::new(vec![h; n])?);
        let b = GridFunction::new(space.clone(), b_values)?;
        Self::new(ControlOperator::Poisson1d { n }, space, b, beta, p)
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        if u.len() != self.space.len() {
            return Err(Error::DimensionMismatch {
                left: u.len(),
                right: self.space.len(),
            });
        }
        GridFunction::new(
            self.b.space().clone(),
            self.operator.apply_values(u.values()),
        )
    }

    pub fn adjoint_apply(&self, w: &GridFunction) -> Result<GridFunction> {
        if w.len() != self.b.len() {
            return Err(Error::DimensionMismatch {
                left: w.len(),
                right: self.b.len(),
            });
        }
        GridFunction::new(
            self.space.clone(),
            self.operator.adjoint_values(
                w.values(),
                self.space.cell_measures(),
                self.b.space().cell_measures(),
            ),
        )
    }

    /// Gradient of the smooth part: `A*(Au − b)`.
    pub fn gradient(&self, u: &GridFunction) -> Result<GridFunction> {
        let residual = self.apply(u)?.sub(&self.b)?;
        self.adjoint_apply(&residual)
    }

    /// Full objective `½‖Au − b‖² + β q(u)`.
    pub fn objective(&self, u: &GridFunction) -> Result<f64> {
        let residual = self.apply(u)?.sub(&self.b)?;
        let quad = residual.norm(2.0)?;
        let q = SparsityFunctional::new(self.exps, self.space.clone());
        Ok(0.5 * quad * quad + self.beta * q.evaluate(u, 0.0)?)
    }

    /// Upper bound for the operator norm of `A*A`, from 50 power iterations
    /// padded by one percent.
    pub fn lipschitz_bound(&self) -> Result<f64> {
        let mut v = GridFunction::constant(self.space.clone(), 1.0)?;
        let mut estimate = 1.0;
        for _ in 0..50 {
            let w = self.adjoint_apply(&self.apply(&v)?)?;
            let norm = w.norm(2.0)?;
            if norm == 0.0 || !norm.is_finite() {
                break;
            }
            let vnorm = v.norm(2.0)?;
            estimate = norm / vnorm;
            v = w.scale(1.0 / norm)?;
        }
        Ok(estimate * 1.01)
    }
}

/// Global minimizer of `v ↦ ½ (v - z)² + τ φ_p(v)`, ties broken toward zero.
///
/// For `p = 0` this is the hard threshold: keep `z` when `z² > 2τ`. For
/// `p ∈ (0,1)` the candidate stationary value solves
/// `v - |z| + τ p v^{p-1} = 0` on `(0, |z|)`; the equation has no root below
/// the stationary point of its left side, so the root is bracketed between
/// that point and `|z|` and polished by safeguarded bisection-Newton.
pub fn prox_scalar(z: f64, tau: f64, p: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "prox weight must be positive, got {tau}"
        )));
    }
    if !((0.0..1.0).contains(&p)) {
        return Err(Error::InvalidParameter(format!(
            "p must be in [0, 1), got {p}"
        )));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(if z * z > 2.0 * tau { z } else { 0.0 });
    }

    let a = z.abs();
    let tp = tau * p;
    // ψ(v) = v + τ p v^{p-1} attains its minimum at v̂; below ψ(v̂) the
    // stationarity equation ψ(v) = a has no solution and the prox collapses
    // to zero.
    let vhat = (tp * (1.0 - p)).powf(1.0 / (2.0 - p));
    let psi_min = vhat + tp * vhat.powf(p - 1.0);
    if psi_min >= a {
        return Ok(0.0);
    }

    let root = stationary_root(a, tp, p, vhat)?;
    // Compare against the zero candidate; ties go to zero.
    let obj_root = 0.5 * (root - a) * (root - a) + tau * root.powf(p);
    let obj_zero = 0.5 * a * a;
    if obj_root < obj_zero {
        Ok(z.signum() * root)
    } else {
        Ok(0.0)
    }
}

/// Larger root of `h(v) = v + tp v^{p-1} - a` on `[vhat, a]` where `h` is
/// increasing and convex. Bisection narrows the bracket; Newton finishes once
/// the bracket is tight.
fn stationary_root(a: f64, tp: f64, p: f64, vhat: f64) -> Result<f64> {
    let h = |v: f64| v + tp * v.powf(p - 1.0) - a;
    let dh = |v: f64| 1.0 + tp * (p - 1.0) * v.powf(p - 2.0);
    let mut lo = vhat;
    let mut hi = a;
    if h(hi) < 0.0 {
        // Cannot happen analytically (h(a) = tp a^{p-1} > 0); guard against
        // pathological rounding.
        return Ok(hi);
    }
    for _ in 0..200 {
        if (hi - lo) <= 1e-3 * hi.max(1e-300) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if h(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..60 {
        let hv = h(v);
        if hv >= 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let slope = dh(v);
        let mut next = v - hv / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - v).abs() <= 1e-14 + 1e-15 * v.abs() {
            v = next;
            break;
        }
        v = next;
    }
    Ok(v)
}

/// One forward-backward step: gradient descent on the smooth part followed by
/// the exact componentwise prox of `step·β·φ_p`.
pub fn prox_step(prob: &CompositeProblem, u: &GridFunction, step: f64) -> Result<GridFunction> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step must be positive, got {step}"
        )));
    }
    let g = prob.gradient(u)?;
    let tau = step * prob.beta;
    let p = prob.exps.p();
    let values: Result<Vec<f64>> = u
        .values()
        .iter()
        .zip(g.values())
        .map(|(&ui, &gi)| prox_scalar(ui - step * gi, tau, p))
        .collect();
    GridFunction::new(prob.space.clone(), values?)
}

/// One row of the iterate trace.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub support_measure: f64,
    pub step_norm: f64,
}

/// First-order stationarity summary at a point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StationarityReport {
    /// Max over the support of `|g + β p |u|^{p-2} u|` (`p > 0`) or `|g|`
    /// (`p = 0`), `g` the gradient of the smooth part.
    pub support_residual: f64,
    /// Dual norm of `p |u|^{p-1}` on the support.
    pub regularity_norm: f64,
    pub support_measure: f64,
    pub objective: f64,
    pub converged: bool,
}

/// Residual tolerance defining `converged` in the report.
pub const STATIONARITY_TOL: f64 = 1e-6;

/// Evaluates the first-order conditions at `u`: the negated gradient must be
/// the pinned dual value on the support (zero when `p = 0`).
pub fn stationarity_check(
    prob: &CompositeProblem,
    u: &GridFunction,
    zero_tol: f64,
) -> Result<StationarityReport> {
    let g = prob.gradient(u)?;
    let p = prob.exps.p();
    let support = u.support_mask(zero_tol);
    let mut residual = 0.0f64;
    for i in support.indices() {
        let ui = u.values()[i];
        let gi = g.values()[i];
        let r = if p == 0.0 {
            gi.abs()
        } else {
            (gi + prob.beta * pointwise_dual_value(ui, p)).abs()
        };
        residual = residual.max(r);
    }
    let dual_pow = u.map(|v| {
        if v != 0.0 {
            p * v.abs().powf(p - 1.0)
        } else {
            0.0
        }
    })?;
    let regularity_norm = dual_pow.partial_norm(prob.exps.r(), &support)?;
    Ok(StationarityReport {
        support_residual: residual,
        regularity_norm,
        support_measure: prob.space.mask_measure(&support)?,
        objective: prob.objective(u)?,
        converged: residual <= STATIONARITY_TOL,
    })
}

/// Output of [`solve`].
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub solution: GridFunction,
    pub report: StationarityReport,
    pub trace: Vec<TraceRow>,
}

/// Fixed-step forward-backward iteration with step `1/L`. The objective must
/// not increase; any rise beyond rounding slack aborts with a divergence
/// error. Stops when the weighted iterate change drops below `tol`.
pub fn solve(
    prob: &CompositeProblem,
    u0: &GridFunction,
    max_iter: usize,
    tol: f64,
) -> Result<SolveResult> {
    if u0.len() != prob.space.len() {
        return Err(Error::DimensionMismatch {
            left: u0.len(),
            right: prob.space.len(),
        });
    }
    let lipschitz = prob.lipschitz_bound()?;
    let step = 1.0 / lipschitz;
    let mut u = u0.clone();
    let mut objective = prob.objective(&u)?;
    if !objective.is_finite() {
        return Err(Error::Divergence(0));
    }
    let zero_tol = 1e-12;
    let mut trace = Vec::new();
    for iter in 0..max_iter {
        let next = prox_step(prob, &u, step)?;
        let next_objective = prob.objective(&next)?;
        if !next_objective.is_finite() {
            return Err(Error::Divergence(iter));
        }
        if next_objective > objective + 1e-12 * (1.0 + objective.abs()) {
            return Err(Error::Divergence(iter));
        }
        let step_norm = next.sub(&u)?.norm(2.0)?;
        let support = next.support_mask(zero_tol);
        trace.push(TraceRow {
            iter,
            objective: next_objective,
            support_measure: prob.space.mask_measure(&support)?,
            step_norm,
        });
        u = next;
        objective = next_objective;
        if step_norm <= tol {
            break;
        }
    }
    let report = stationarity_check(prob, &u, zero_tol)?;
    Ok(SolveResult {
        solution: u,
        report,
        trace,
    })
}
