//! Sparsity functionals on discretized measure spaces: exact evaluation,
//! closed-form subdifferential descriptors, falsification of claimed
//! subgradients, slowly-decreasing classification, and a proximal-gradient
//! solver whose output is checked against the first-order conditions.
//!
//! The library works with piecewise-constant functions on finite weighted
//! partitions, so every integral is an exact finite sum and every closed
//! form is computable without quadrature error. The central objects:
//!
//! - [`measure`]: measure spaces, grid functions, masks, conjugate exponents,
//!   weighted (quasi-)norms, dual pairings.
//! - [`functionals`]: the penalty `q_{s,p}`, i.e. `∫ |u|^p` for `p ∈ (0,1)` and
//!   the support measure for `p = 0`.
//! - [`sd`]: slowly-decreasing classification through level-measure decay,
//!   with analytic profile families and the monotone intermediate-value
//!   solver.
//! - [`subdiff`]: Fréchet, limiting, and singular subdifferential descriptors
//!   with a membership predicate and a non-Lipschitz probe.
//! - [`falsifier`]: the difference-quotient oracle that hunts for persistent
//!   violations of claimed subgradient memberships.
//! - [`prox`]: hard/fractional thresholding prox maps and the forward-
//!   backward solver with stationarity reports.

pub mod error;
pub mod falsifier;
pub mod functionals;
pub mod measure;
pub mod prox;
pub mod sd;
pub mod subdiff;

pub use error::{Error, Result};
pub use falsifier::{
    builtin_families, falsify, quotient, DirectionFamily, QuotientReport, Verdict,
};
pub use functionals::{pointwise_integrand, SparsityFunctional};
pub use measure::{dual_pairing, CellMask, Exponents, GridFunction, MeasureSpace};
pub use prox::{
    prox_scalar, prox_step, solve, stationarity_check, CompositeProblem, ControlOperator,
    SolveResult, StationarityReport,
};
pub use sd::{
    adversarial_quotient, adversarial_verdict, check_bounded_away, check_hoelder_criterion,
    check_level_decay, check_level_decay_default, ivt_gamma, CriterionMethod, ProfileFamily,
    SdPolicy, SdVerdict, SupportBound,
};
pub use subdiff::{
    frechet_descriptor, limiting_descriptor, lipschitz_probe, singular_descriptor, DescriptorShape,
    SubdiffDescriptor, SubdiffKind,
};
