//! Univariate laws used throughout the toolkit and the margin transforms
//! between them.
//!
//! All parameter types are immutable once built. Sampling takes the caller's
//! generator; nothing here owns random state.

mod delta_laplace;
mod empirical;
mod gpd;
mod margins;
pub mod special;

pub use delta_laplace::{delta_laplace_cdf, delta_laplace_pdf, delta_laplace_quantile, DeltaLaplaceParams};
pub use empirical::EmpiricalDistribution;
pub use gpd::{gpd_cdf, gpd_quantile, GpdParams, XI_ZERO_TOL};
pub use margins::{
    exp1_sample, gumbel_cdf, gumbel_quantile, gumbel_sf, gumbel_to_laplace, laplace_cdf, laplace_quantile,
    laplace_sf, laplace_to_gumbel, GUMBEL_MEDIAN,
};

use rand::Rng;

/// A uniform draw on the open interval (0, 1).
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
