//! Covariate-dependent peaks-over-threshold modelling: additive quantile
//! regression for the threshold, GPD regression above it, model scoring,
//! threshold-level selection, conditional quantiles and bootstrap intervals.

mod formula;
mod gpdreg;
mod predict;
mod quantreg;

pub use formula::{DesignSpec, ModelFormula, Term, TermKind, SMOOTH_DEGREE, SMOOTH_INTERIOR_KNOTS};
pub use gpdreg::{bic, fit_gpd_regression, GpdRegressionFit, MIN_EXCEEDANCES, XI_BOUNDS};
pub use predict::{
    bootstrap_quantiles, conditional_quantile, excess_quantile, select_threshold, transform_to_exponential, twsmad,
    twsmad_with_grid, BootstrapQuantiles, ExponentialTransform, QuantileInterval, ThresholdSelection, TWSMAD_GRID,
};
pub use quantreg::{fit_threshold, ThresholdFit, MIN_THRESHOLD_ROWS};
