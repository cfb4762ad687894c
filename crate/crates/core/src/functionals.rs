//! The sparsity functionals: `∫ |u|^p` for `p ∈ (0,1)` and the support
//! measure `λ({u ≠ 0})` for `p = 0`, evaluated exactly on grid functions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measure::{pairwise_sum, Exponents, GridFunction, MeasureSpace};

/// `|y|_0` (0 at 0, 1 otherwise) when `p = 0`, else `|y|^p`.
pub fn pointwise_integrand(y: f64, p: f64) -> f64 {
    if p == 0.0 {
        if y == 0.0 {
            0.0
        } else {
            1.0
        }
    } else if y == 0.0 {
        // powf(0, p) would also yield 0, but guard explicitly so tiny
        // denormals cannot round through log to NaN.
        0.0
    } else {
        y.abs().powf(p)
    }
}

/// Evaluator for one fixed exponent pair on one fixed space.
#[derive(Clone, Debug)]
pub struct SparsityFunctional {
    exps: Exponents,
    space: Arc<MeasureSpace>,
}

impl SparsityFunctional {
    pub fn new(exps: Exponents, space: Arc<MeasureSpace>) -> Self {
        Self { exps, space }
    }

    pub fn exps(&self) -> Exponents {
        self.exps
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    /// Exact value `Σ λ_i φ_p(u_i)`. The tolerance only matters for `p = 0`,
    /// where `|u_i| ≤ zero_tol` counts as zero; for `p ∈ (0,1)` the integrand
    /// is continuous and the tolerance is ignored.
    pub fn evaluate(&self, u: &GridFunction, zero_tol: f64) -> Result<f64> {
        if u.len() != self.space.len() {
            return Err(Error::DimensionMismatch {
                left: u.len(),
                right: self.space.len(),
            });
        }
        let p = self.exps.p();
        let tol = zero_tol.max(0.0);
        let measures = self.space.cell_measures();
        let terms: Vec<f64> = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let y = if p == 0.0 && v.abs() <= tol { 0.0 } else { v };
                measures[i] * pointwise_integrand(y, p)
            })
            .collect();
        Ok(pairwise_sum(&terms))
    }

    /// `q(u−v) − |q(u) − q(v)|`, which is nonnegative for `p ∈ (0,1)` because
    /// `y ↦ |y|^p` is subadditive. Only defined for `p ∈ (0,1)`.
    pub fn subadditivity_gap(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        let p = self.exps.p();
        if p == 0.0 {
            return Err(Error::NotApplicable(
                "subadditivity gap needs p in (0,1)".into(),
            ));
        }
        let qu = self.evaluate(u, 0.0)?;
        let qv = self.evaluate(v, 0.0)?;
        let qdiff = self.evaluate(&u.sub(v)?, 0.0)?;
        Ok(qdiff - (qu - qv).abs())
    }
}
