//! Python bindings: grid functions, penalty evaluation, subdifferential
//! descriptors with membership tests, falsification of claimed subgradients,
//! slow-decay classification, and the proximal solver.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use sparsity_subdiff as core;
use sparsity_subdiff::falsifier::{builtin_families, falsify, Verdict};
use sparsity_subdiff::prox::{self, CompositeProblem};
use sparsity_subdiff::sd;
use sparsity_subdiff::subdiff;

fn err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Piecewise-constant function on a finite weighted partition.
#[pyclass(name = "GridFunction", skip_from_py_object)]
#[derive(Clone)]
struct PyGridFunction {
    inner: core::GridFunction,
}

#[pymethods]
impl PyGridFunction {
    #[new]
    fn new(cell_measures: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        let space = Arc::new(core::MeasureSpace::new(cell_measures).map_err(err)?);
        Ok(Self {
            inner: core::GridFunction::new(space, values).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: core::GridFunction::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn cell_measures(&self) -> Vec<f64> {
        self.inner.space().cell_measures().to_vec()
    }

    #[getter]
    fn total_measure(&self) -> f64 {
        self.inner.space().total_measure()
    }

    #[pyo3(signature = (zero_tol = 0.0))]
    fn support_measure(&self, zero_tol: f64) -> PyResult<f64> {
        let mask = self.inner.support_mask(zero_tol);
        self.inner.space().mask_measure(&mask).map_err(err)
    }

    fn norm(&self, nu: f64) -> PyResult<f64> {
        self.inner.norm(nu).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("GridFunction(cells={})", self.inner.len())
    }
}

/// Finite description of a subdifferential set with a membership predicate.
#[pyclass(name = "SubdiffDescriptor")]
struct PyDescriptor {
    inner: subdiff::SubdiffDescriptor,
}

#[pymethods]
impl PyDescriptor {
    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind {
            subdiff::SubdiffKind::Frechet => "frechet",
            subdiff::SubdiffKind::Limiting => "limiting",
            subdiff::SubdiffKind::Singular => "singular",
        }
    }

    #[getter]
    fn shape(&self) -> &'static str {
        match self.inner.shape {
            subdiff::DescriptorShape::Empty => "empty",
            subdiff::DescriptorShape::ZeroOnly => "zero_only",
            subdiff::DescriptorShape::SupportConstrained { .. } => "support_constrained",
            subdiff::DescriptorShape::PointwiseFixed { .. } => "pointwise_fixed",
        }
    }

    #[getter]
    fn regular(&self) -> bool {
        self.inner.regular
    }

    fn is_empty_set(&self) -> bool {
        self.inner.is_empty_set()
    }

    #[pyo3(signature = (eta, tol = 1e-10))]
    fn contains(&self, eta: &PyGridFunction, tol: f64) -> PyResult<bool> {
        self.inner.contains(&eta.inner, tol).map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "SubdiffDescriptor(kind={}, shape={})",
            self.kind(),
            self.shape()
        )
    }
}

/// Penalty value: the support measure for p = 0, the p-th power integral for
/// p in (0, 1).
#[pyfunction]
#[pyo3(signature = (u, s, p, zero_tol = 0.0))]
fn evaluate(u: &PyGridFunction, s: f64, p: f64, zero_tol: f64) -> PyResult<f64> {
    let exps = core::Exponents::new(s, p).map_err(err)?;
    let q = core::SparsityFunctional::new(exps, u.inner.space().clone());
    q.evaluate(&u.inner, zero_tol).map_err(err)
}

#[pyfunction]
fn pointwise_integrand(y: f64, p: f64) -> f64 {
    core::pointwise_integrand(y, p)
}

/// Global minimizer of `v -> 0.5 (v - z)^2 + tau * phi_p(v)`.
#[pyfunction]
fn prox_scalar(z: f64, tau: f64, p: f64) -> PyResult<f64> {
    prox::prox_scalar(z, tau, p).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (u, s, p, kind = "frechet", zero_tol = 0.0))]
fn descriptor(
    u: &PyGridFunction,
    s: f64,
    p: f64,
    kind: &str,
    zero_tol: f64,
) -> PyResult<PyDescriptor> {
    let exps = core::Exponents::new(s, p).map_err(err)?;
    let inner = match kind {
        "frechet" => {
            let sd = sd::check_bounded_away(&u.inner, zero_tol).to_verdict();
            subdiff::frechet_descriptor(&u.inner, exps, Some(&sd), zero_tol).map_err(err)?
        }
        "limiting" => subdiff::limiting_descriptor(&u.inner, exps, zero_tol).map_err(err)?,
        "singular" => subdiff::singular_descriptor(&u.inner, exps, zero_tol).map_err(err)?,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown descriptor kind {other:?}"
            )))
        }
    };
    Ok(PyDescriptor { inner })
}

/// Probes a claimed subgradient with the built-in direction families.
/// Returns a dict with the overall verdict and per-family evidence.
#[pyfunction]
#[pyo3(signature = (u, eta, s, p, delta = 1e-6, zero_tol = 0.0, seed = 42))]
fn falsify_membership<'py>(
    py: Python<'py>,
    u: &PyGridFunction,
    eta: &PyGridFunction,
    s: f64,
    p: f64,
    delta: f64,
    zero_tol: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let exps = core::Exponents::new(s, p).map_err(err)?;
    let q = core::SparsityFunctional::new(exps, u.inner.space().clone());
    let out = PyDict::new(py);
    let families = PyList::empty(py);
    let mut falsified = false;
    let mut worst = f64::INFINITY;
    for family in builtin_families(&u.inner, &eta.inner, exps, zero_tol, seed) {
        let report = falsify(&q, &u.inner, &eta.inner, &family, delta).map_err(err)?;
        let entry = PyDict::new(py);
        entry.set_item("family", family.label)?;
        entry.set_item("falsified", report.verdict == Verdict::Falsified)?;
        entry.set_item("inf_tail", report.inf_tail)?;
        entry.set_item("samples", report.samples.len())?;
        if let Some(w) = &report.witness {
            entry.set_item("witness_values", w.values().to_vec())?;
        }
        falsified |= report.verdict == Verdict::Falsified;
        worst = worst.min(report.inf_tail);
        families.append(entry)?;
    }
    out.set_item("falsified", falsified)?;
    out.set_item("worst_inf_tail", worst)?;
    out.set_item("families", families)?;
    Ok(out)
}

fn verdict_dict<'py>(py: Python<'py>, verdict: &sd::SdVerdict) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("is_sd", verdict.is_sd)?;
    out.set_item("slope_estimate", verdict.slope_estimate)?;
    out.set_item(
        "method",
        match verdict.method {
            sd::CriterionMethod::BoundedAway => "bounded_away",
            sd::CriterionMethod::DualNormFinite => "dual_norm_finite",
            sd::CriterionMethod::LevelMeasureDecay => "level_measure_decay",
            sd::CriterionMethod::AdversarialQuotient => "adversarial_quotient",
        },
    )?;
    out.set_item("trace", verdict.criterion_trace.clone())?;
    Ok(out)
}

/// Slow-decay classification of an analytic profile.
///
/// `kind` is "power" (uses `alpha`) or "dyadic" (uses the conjugate of `s`).
#[pyfunction]
#[pyo3(signature = (kind, s, alpha = 0.5))]
fn sd_check_profile<'py>(
    py: Python<'py>,
    kind: &str,
    s: f64,
    alpha: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let exps = core::Exponents::new(s, 0.0).map_err(err)?;
    let profile = match kind {
        "power" => sd::ProfileFamily::power(alpha).map_err(err)?,
        "dyadic" => sd::ProfileFamily::dyadic(exps.r()).map_err(err)?,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown profile kind {other:?}"
            )))
        }
    };
    let verdict = sd::classify_profile(&profile, &exps).map_err(err)?;
    let hoelder = sd::check_hoelder_criterion(&profile, &exps, 1e-8).map_err(err)?;
    let out = verdict_dict(py, &verdict)?;
    out.set_item("hoelder_converged", hoelder.converged)?;
    out.set_item("hoelder_partial", hoelder.partial)?;
    Ok(out)
}

/// Slow-decay classification of a grid function through its support bound.
#[pyfunction]
#[pyo3(signature = (u, zero_tol = 0.0))]
fn sd_check_grid<'py>(
    py: Python<'py>,
    u: &PyGridFunction,
    zero_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let bound = sd::check_bounded_away(&u.inner, zero_tol);
    let out = verdict_dict(py, &bound.to_verdict())?;
    out.set_item("support_bound", bound.bound())?;
    Ok(out)
}

/// Stagewise difference-quotient ratios exhibiting non-Lipschitz growth.
#[pyfunction]
#[pyo3(signature = (u, s, p, radius = 1.0, stages = 25))]
fn lipschitz_probe(
    u: &PyGridFunction,
    s: f64,
    p: f64,
    radius: f64,
    stages: usize,
) -> PyResult<Vec<(f64, f64)>> {
    let exps = core::Exponents::new(s, p).map_err(err)?;
    subdiff::lipschitz_probe(&u.inner, exps, radius, stages).map_err(err)
}

fn solve_to_dict<'py>(
    py: Python<'py>,
    prob: &CompositeProblem,
    max_iter: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let out = prox::solve(
        prob,
        &core::GridFunction::zero(prob.space.clone()),
        max_iter,
        tol,
    )
    .map_err(err)?;
    let dict = PyDict::new(py);
    dict.set_item("values", out.solution.values().to_vec())?;
    dict.set_item("objective", out.report.objective)?;
    dict.set_item("support_residual", out.report.support_residual)?;
    dict.set_item("support_measure", out.report.support_measure)?;
    dict.set_item("regularity_norm", out.report.regularity_norm)?;
    dict.set_item("converged", out.report.converged)?;
    dict.set_item("iterations", out.trace.len())?;
    Ok(dict)
}

/// Sparse recovery with the identity observation operator.
#[pyfunction]
#[pyo3(signature = (cell_measures, b, beta, p, max_iter = 10_000, tol = 1e-12))]
fn solve_identity<'py>(
    py: Python<'py>,
    cell_measures: Vec<f64>,
    b: Vec<f64>,
    beta: f64,
    p: f64,
    max_iter: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let space = Arc::new(core::MeasureSpace::new(cell_measures).map_err(err)?);
    let target = core::GridFunction::new(space.clone(), b).map_err(err)?;
    let prob = CompositeProblem::identity(space, target, beta, p).map_err(err)?;
    solve_to_dict(py, &prob, max_iter, tol)
}

/// Sparse control of the 1D Poisson problem on `n` interior nodes.
#[pyfunction]
#[pyo3(signature = (n, b, beta, p, max_iter = 50_000, tol = 1e-12))]
fn solve_poisson1d<'py>(
    py: Python<'py>,
    n: usize,
    b: Vec<f64>,
    beta: f64,
    p: f64,
    max_iter: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let prob = CompositeProblem::poisson1d(n, b, beta, p).map_err(err)?;
    solve_to_dict(py, &prob, max_iter, tol)
}

/// Unique crossing gamma with `g(gamma) ~ C gamma^{-alpha}` for a monotone
/// level function supplied as a Python callable.
#[pyfunction]
#[pyo3(signature = (g, alpha, c, tol = 1e-12))]
fn ivt_gamma(g: Bound<'_, PyAny>, alpha: f64, c: f64, tol: f64) -> PyResult<f64> {
    let call = |x: f64| -> f64 {
        g.call1((x,))
            .and_then(|v| v.extract::<f64>())
            .unwrap_or(f64::NAN)
    };
    sd::ivt_gamma(call, alpha, c, tol).map_err(err)
}

#[pymodule]
fn sparsity_subdiff_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridFunction>()?;
    m.add_class::<PyDescriptor>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(pointwise_integrand, m)?)?;
    m.add_function(wrap_pyfunction!(prox_scalar, m)?)?;
    m.add_function(wrap_pyfunction!(descriptor, m)?)?;
    m.add_function(wrap_pyfunction!(falsify_membership, m)?)?;
    m.add_function(wrap_pyfunction!(sd_check_profile, m)?)?;
    m.add_function(wrap_pyfunction!(sd_check_grid, m)?)?;
    m.add_function(wrap_pyfunction!(lipschitz_probe, m)?)?;
    m.add_function(wrap_pyfunction!(solve_identity, m)?)?;
    m.add_function(wrap_pyfunction!(solve_poisson1d, m)?)?;
    m.add_function(wrap_pyfunction!(ivt_gamma, m)?)?;
    Ok(())
}
