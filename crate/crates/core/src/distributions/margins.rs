//! Standard Gumbel and standard Laplace margins and the probability-integral
//! transforms between them.

use rand::Rng;

use super::open_uniform;
use crate::{Error, Result};

/// Median of the standard Gumbel law, `-log(log 2)`.
pub const GUMBEL_MEDIAN: f64 = 0.366_512_920_581_664_3;

fn check_open_unit(prob: f64, what: &str) -> Result<()> {
    if prob > 0.0 && prob < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} quantile level must lie in (0, 1), got {prob}")))
    }
}

pub fn gumbel_cdf(y: f64) -> f64 {
    (-(-y).exp()).exp()
}

/// `1 - exp(-exp(-y))`, accurate for large `y`.
pub fn gumbel_sf(y: f64) -> f64 {
    -(-(-y).exp()).exp_m1()
}

pub fn gumbel_quantile(prob: f64) -> Result<f64> {
    check_open_unit(prob, "Gumbel")?;
    Ok(-(-prob.ln()).ln())
}

pub fn laplace_cdf(y: f64) -> f64 {
    if y < 0.0 {
        0.5 * y.exp()
    } else {
        1.0 - 0.5 * (-y).exp()
    }
}

pub fn laplace_sf(y: f64) -> f64 {
    laplace_cdf(-y)
}

pub fn laplace_quantile(prob: f64) -> Result<f64> {
    check_open_unit(prob, "Laplace")?;
    Ok(if prob < 0.5 {
        (2.0 * prob).ln()
    } else {
        -(2.0 * (1.0 - prob)).ln()
    })
}

/// Maps a standard Gumbel value to the standard Laplace value with the same
/// distribution-function level.
pub fn gumbel_to_laplace(y: f64) -> f64 {
    let e = (-y).exp();
    // ln F = -e
    if e > std::f64::consts::LN_2 {
        std::f64::consts::LN_2 - e
    } else {
        -(2.0 * -(-e).exp_m1()).ln()
    }
}

/// Inverse of [`gumbel_to_laplace`].
pub fn laplace_to_gumbel(z: f64) -> f64 {
    if z < 0.0 {
        -(std::f64::consts::LN_2 - z).ln()
    } else {
        -(-(-0.5 * (-z).exp()).ln_1p()).ln()
    }
}

/// A standard exponential draw.
pub fn exp1_sample<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -open_uniform(rng).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gumbel_examples() {
        assert!((GUMBEL_MEDIAN + (2f64.ln()).ln()).abs() < 1e-16);
        assert!((gumbel_cdf(GUMBEL_MEDIAN) - 0.5).abs() < 1e-15);
        assert!((gumbel_quantile(0.5).unwrap() - 0.366513).abs() < 1e-6);
        assert!((gumbel_cdf(0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(gumbel_quantile(0.0).is_err());
        assert!(gumbel_quantile(1.0).is_err());
    }

    #[test]
    fn laplace_examples() {
        assert_eq!(laplace_cdf(0.0), 0.5);
        assert_eq!(laplace_quantile(0.5).unwrap(), 0.0);
        assert!((laplace_cdf(2f64.ln()) - 0.75).abs() < 1e-15);
        assert!(laplace_quantile(1.0).is_err());
    }

    #[test]
    fn margin_transform_examples() {
        assert!(gumbel_to_laplace(GUMBEL_MEDIAN).abs() < 1e-15);
        assert!((laplace_to_gumbel(0.0) - GUMBEL_MEDIAN).abs() < 1e-15);
        assert!((laplace_to_gumbel(gumbel_to_laplace(3.7)) - 3.7).abs() < 1e-10);
    }

    #[test]
    fn margin_transform_matches_pit() {
        for &y in &[-2.0, -0.5, 0.1, 1.0, 4.0, 9.0] {
            let direct = laplace_quantile(gumbel_cdf(y)).unwrap();
            assert!((gumbel_to_laplace(y) - direct).abs() < 1e-9 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn margin_transform_round_trip_far_tails() {
        for &y in &[-3.0, -1.0, 0.0, 2.5, 12.0, 30.0] {
            assert!((laplace_to_gumbel(gumbel_to_laplace(y)) - y).abs() < 1e-10, "y={y}");
        }
        for &z in &[-20.0, -3.0, 0.0, 0.7, 15.0, 35.0] {
            assert!((gumbel_to_laplace(laplace_to_gumbel(z)) - z).abs() < 1e-10, "z={z}");
        }
    }
}
