//! Shared numerical machinery: parameter transforms, derivative-free and
//! quasi-Newton minimisation, finite-difference gradients, B-spline bases,
//! small dense linear algebra, and the seeded generator contract.

mod gradient;
pub mod linalg;
mod minimize;
pub mod rng;
mod spline;
mod transform;

pub use gradient::fd_gradient;
pub use minimize::{minimize, minimize_bfgs, MinimizeSettings, OptimResult};
pub use spline::{centred_row, spline_design, SplineBasis, SplineDesign};
pub use transform::ParamTransform;
