//! Conditional extremes for three responses with covariate-dependent
//! dependence parameters.
//!
//! Given component `i` above a high Laplace-scale threshold `u`, the other
//! two components follow `Y₋ᵢ = α(x)·Yᵢ + Yᵢ^{β(x)}·Z`, with
//! `α = tanh(α⁰ + α¹x)` and `β = logistic(β⁰ + β¹x)`. Fitting assumes a
//! Gaussian copula with delta-Laplace margins for `Z`; simulation then
//! resamples the empirical residuals instead.

mod model;
mod simulate;

pub use model::{
    fit_all, fit_condex, logistic, logit, negloglik, total_aic, CondExData, CondExFit, CondExParams, Residual,
    MIN_EXCEEDANCES,
};
pub use simulate::{
    estimate_joint_probability, qq_aggregate, qq_grid, simulate_conditional, simulate_unconditional,
    write_coefficient_table, write_qq_csv, Bound, JointProbability, JointSample, Provenance, QqPoint,
};

/// The 0.95 quantile of the standard Laplace law, the default threshold.
pub fn default_threshold() -> f64 {
    crate::distributions::laplace_quantile(0.95).expect("valid level")
}
