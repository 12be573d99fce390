use rand::Rng;
use serde::{Deserialize, Serialize};

use super::open_uniform;
use crate::{Error, Result};

/// Shape values with `|xi|` below this use the exponential branch.
pub const XI_ZERO_TOL: f64 = 1e-9;

/// Generalised Pareto law for threshold excesses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    sigma: f64,
    xi: f64,
}

impl GpdParams {
    pub fn new(sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::domain(format!("GPD scale must be positive, got {sigma}")));
        }
        if !xi.is_finite() {
            return Err(Error::domain(format!("GPD shape must be finite, got {xi}")));
        }
        Ok(Self { sigma, xi })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    fn is_exponential(&self) -> bool {
        self.xi.abs() < XI_ZERO_TOL
    }

    /// Right end of the support; infinite unless `xi < 0`.
    pub fn upper_endpoint(&self) -> f64 {
        if self.xi < 0.0 && !self.is_exponential() {
            -self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }

    pub fn in_support(&self, y: f64) -> bool {
        y >= 0.0 && y <= self.upper_endpoint()
    }

    /// Survival function `1 - H(y)`, clamped to the support.
    pub fn sf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        if y >= self.upper_endpoint() {
            return 0.0;
        }
        let z = y / self.sigma;
        if self.is_exponential() {
            (-z).exp()
        } else {
            (-(self.xi * z).ln_1p() / self.xi).exp()
        }
    }

    /// Distribution function, clamped to the support.
    pub fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= self.upper_endpoint() {
            return 1.0;
        }
        let z = y / self.sigma;
        if self.is_exponential() {
            -(-z).exp_m1()
        } else {
            -(-(self.xi * z).ln_1p() / self.xi).exp_m1()
        }
    }

    /// Log-density; `-inf` outside the support.
    pub fn ln_pdf(&self, y: f64) -> f64 {
        if y < 0.0 || y > self.upper_endpoint() {
            return f64::NEG_INFINITY;
        }
        let z = y / self.sigma;
        if self.is_exponential() {
            -self.sigma.ln() - z
        } else {
            -self.sigma.ln() - (1.0 + 1.0 / self.xi) * (self.xi * z).ln_1p()
        }
    }

    /// Quantile for `prob` in `[0, 1)`.
    pub fn quantile(&self, prob: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&prob) {
            return Err(Error::domain(format!("GPD quantile level must lie in [0, 1), got {prob}")));
        }
        Ok(self.quantile_unchecked(prob))
    }

    fn quantile_unchecked(&self, prob: f64) -> f64 {
        let log_sf = (-prob).ln_1p();
        if self.is_exponential() {
            -self.sigma * log_sf
        } else {
            self.sigma / self.xi * (-self.xi * log_sf).exp_m1()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // invert the survival function with an open-interval uniform
        let u = open_uniform(rng);
        let log_sf = u.ln();
        if self.is_exponential() {
            -self.sigma * log_sf
        } else {
            self.sigma / self.xi * (-self.xi * log_sf).exp_m1()
        }
    }
}

/// `H(y)` with a domain error outside the support.
pub fn gpd_cdf(y: f64, p: &GpdParams) -> Result<f64> {
    if !p.in_support(y) {
        return Err(Error::domain(format!(
            "y = {y} outside GPD support [0, {}]",
            p.upper_endpoint()
        )));
    }
    Ok(p.cdf(y))
}

pub fn gpd_quantile(prob: f64, p: &GpdParams) -> Result<f64> {
    p.quantile(prob)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gpd(s: f64, x: f64) -> GpdParams {
        GpdParams::new(s, x).unwrap()
    }

    #[test]
    fn cdf_examples() {
        assert!((gpd_cdf(1.0, &gpd(1.0, 0.0)).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((gpd_cdf(1.0, &gpd(1.0, 1.0)).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(gpd_cdf(2.0, &gpd(1.0, -0.5)).unwrap(), 1.0);
        assert_eq!(gpd_cdf(0.0, &gpd(3.0, 0.2)).unwrap(), 0.0);
    }

    #[test]
    fn cdf_outside_support_is_domain_error() {
        assert!(matches!(gpd_cdf(-0.1, &gpd(1.0, 0.1)), Err(Error::Domain(_))));
        assert!(matches!(gpd_cdf(2.5, &gpd(1.0, -0.5)), Err(Error::Domain(_))));
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(gpd_quantile(0.0, &gpd(2.0, 0.3)).unwrap(), 0.0);
        assert!((gpd_quantile(0.5, &gpd(1.0, 1.0)).unwrap() - 1.0).abs() < 1e-14);
        let p = 1.0 - (-1.0f64).exp();
        assert!((gpd_quantile(p, &gpd(1.0, 0.0)).unwrap() - 1.0).abs() < 1e-14);
        assert!(gpd_quantile(1.0, &gpd(1.0, 0.0)).is_err());
        assert!(gpd_quantile(-0.1, &gpd(1.0, 0.0)).is_err());
    }

    #[test]
    fn invalid_params() {
        assert!(GpdParams::new(0.0, 0.1).is_err());
        assert!(GpdParams::new(-1.0, 0.1).is_err());
        assert!(GpdParams::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn xi_continuity_near_zero() {
        for &xi in &[1e-8, -1e-8] {
            let p = gpd(1.7, xi);
            let p0 = gpd(1.7, 0.0);
            for k in 0..=100 {
                let y = 10.0 * 1.7 * k as f64 / 100.0;
                assert!((p.cdf(y) - p0.cdf(y)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn density_integrates_to_cdf() {
        let p = gpd(1.3, 0.25);
        let n = 20000;
        let b = 4.0;
        let h = b / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let y = (i as f64 + 0.5) * h;
            acc += p.ln_pdf(y).exp() * h;
        }
        assert!((acc - p.cdf(b)).abs() < 1e-7);
    }
}
