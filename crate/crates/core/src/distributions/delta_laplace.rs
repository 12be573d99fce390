//! Delta-Laplace (generalised Gaussian) law with location `mu`, scale `sigma`
//! and shape `delta`:
//!
//! ```text
//! f(z) = delta / (2 k sigma Γ(1/delta)) · exp{-(|z - mu| / (k sigma))^delta},
//! k² = Γ(1/delta) / Γ(3/delta)
//! ```
//!
//! `delta = 1` is the Laplace law and `delta = 2` the Gaussian, both with
//! standard deviation `sigma`. The distribution function goes through the
//! regularised incomplete gamma function: `|s|^delta ~ Gamma(1/delta)` for
//! `s = (z - mu) / (k sigma)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::open_uniform;
use super::special::{inverse_upper_gamma, ln_gamma, regularized_gamma};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDeltaLaplace", into = "RawDeltaLaplace")]
pub struct DeltaLaplaceParams {
    mu: f64,
    sigma: f64,
    delta: f64,
    // derived
    k: f64,
    shape: f64,
    ln_gamma_shape: f64,
    ln_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct RawDeltaLaplace {
    mu: f64,
    sigma: f64,
    delta: f64,
}

impl TryFrom<RawDeltaLaplace> for DeltaLaplaceParams {
    type Error = Error;
    fn try_from(r: RawDeltaLaplace) -> Result<Self> {
        DeltaLaplaceParams::new(r.mu, r.sigma, r.delta)
    }
}

impl From<DeltaLaplaceParams> for RawDeltaLaplace {
    fn from(p: DeltaLaplaceParams) -> Self {
        RawDeltaLaplace { mu: p.mu, sigma: p.sigma, delta: p.delta }
    }
}

impl DeltaLaplaceParams {
    pub fn new(mu: f64, sigma: f64, delta: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::domain(format!("delta-Laplace location must be finite, got {mu}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::domain(format!("delta-Laplace scale must be positive, got {sigma}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::domain(format!("delta-Laplace shape must be positive, got {delta}")));
        }
        let shape = 1.0 / delta;
        let ln_gamma_shape = ln_gamma(shape);
        let k = (0.5 * (ln_gamma_shape - ln_gamma(3.0 * shape))).exp();
        let ln_norm = delta.ln() - (2.0 * k * sigma).ln() - ln_gamma_shape;
        Ok(Self { mu, sigma, delta, k, shape, ln_gamma_shape, ln_norm })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    /// Scale constant `k` with `k² = Γ(1/δ)/Γ(3/δ)`.
    pub fn k(&self) -> f64 {
        self.k
    }

    fn standardise(&self, z: f64) -> f64 {
        (z - self.mu) / (self.k * self.sigma)
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        self.ln_norm - self.standardise(z).abs().powf(self.delta)
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.ln_pdf(z).exp()
    }

    /// `(F(z), 1 - F(z))`, each accurate in its own tail.
    pub fn cdf_sf(&self, z: f64) -> (f64, f64) {
        let s = self.standardise(z);
        let t = s.abs().powf(self.delta);
        let (_, q) = regularized_gamma(self.shape, t, self.ln_gamma_shape);
        let tail = 0.5 * q;
        if s < 0.0 {
            (tail, 1.0 - tail)
        } else {
            (1.0 - tail, tail)
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        self.cdf_sf(z).0
    }

    pub fn quantile(&self, prob: f64) -> Result<f64> {
        if !(prob > 0.0 && prob < 1.0) {
            return Err(Error::domain(format!(
                "delta-Laplace quantile level must lie in (0, 1), got {prob}"
            )));
        }
        Ok(self.quantile_unchecked(prob))
    }

    fn quantile_unchecked(&self, prob: f64) -> f64 {
        let (tail, sign) = if prob < 0.5 { (prob, -1.0) } else { (1.0 - prob, 1.0) };
        if tail >= 0.5 {
            return self.mu;
        }
        let t = inverse_upper_gamma(self.shape, 2.0 * tail, self.ln_gamma_shape);
        self.mu + sign * self.k * self.sigma * t.powf(1.0 / self.delta)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile_unchecked(open_uniform(rng))
    }
}

pub fn delta_laplace_pdf(z: f64, p: &DeltaLaplaceParams) -> f64 {
    p.pdf(z)
}

pub fn delta_laplace_cdf(z: f64, p: &DeltaLaplaceParams) -> f64 {
    p.cdf(z)
}

pub fn delta_laplace_quantile(prob: f64, p: &DeltaLaplaceParams) -> Result<f64> {
    p.quantile(prob)
}
