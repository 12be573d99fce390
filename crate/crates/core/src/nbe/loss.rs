use crate::{Error, Result};

/// Conservative asymmetric loss: zero within ±1% of `theta`, slope 0.9 for
/// underestimates and 0.1 for overestimates beyond the band.
pub fn asymmetric_loss(theta: f64, theta_hat: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::domain(format!("asymmetric loss needs theta > 0, got {theta}")));
    }
    Ok(loss_unchecked(theta, theta_hat))
}

pub(crate) fn loss_unchecked(theta: f64, theta_hat: f64) -> f64 {
    let lo = 0.99 * theta;
    let hi = 1.01 * theta;
    if theta_hat < lo {
        0.9 * (lo - theta_hat)
    } else if theta_hat > hi {
        0.1 * (theta_hat - hi)
    } else {
        0.0
    }
}

/// Derivative of the loss in `theta_hat` (zero on the kinks).
pub(crate) fn loss_slope(theta: f64, theta_hat: f64) -> f64 {
    if theta_hat < 0.99 * theta {
        -0.9
    } else if theta_hat > 1.01 * theta {
        0.1
    } else {
        0.0
    }
}
