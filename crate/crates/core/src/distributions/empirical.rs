use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Step-function law of an observed sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    sorted_values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empirical distribution needs at least one value"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("empirical sample contains {bad}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { sorted_values: values })
    }

    pub fn len(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted_values
    }

    /// Fraction of the sample `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let count = self.sorted_values.partition_point(|&v| v <= x);
        count as f64 / self.len() as f64
    }

    /// Left-continuous inverse of [`cdf`](Self::cdf): the smallest sample
    /// value `v` with `cdf(v) >= prob`.
    pub fn quantile(&self, prob: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::domain(format!("quantile level must lie in [0, 1], got {prob}")));
        }
        Ok(crate::stats::quantile_sorted(&self.sorted_values, prob))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sorted_values[rng.random_range(0..self.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let e = EmpiricalDistribution::new(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(e.quantile(0.5).unwrap(), 2.0);
        assert_eq!(e.cdf(3.0), 1.0);
        assert_eq!(e.cdf(0.5), 0.0);
        assert_eq!(e.quantile(0.0).unwrap(), 1.0);
        assert_eq!(e.quantile(1.0).unwrap(), 3.0);
        assert!(e.quantile(1.5).is_err());
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(EmpiricalDistribution::new(vec![]).is_err());
    }

    #[test]
    fn quantile_is_generalised_inverse() {
        let e = EmpiricalDistribution::new((0..37).map(|i| ((i * 17) % 37) as f64 * 0.3).collect()).unwrap();
        for k in 1..1000 {
            let p = k as f64 / 1000.0;
            let q = e.quantile(p).unwrap();
            assert!(e.cdf(q) >= p);
            // nothing smaller in the sample reaches level p
            let below = e.values().iter().filter(|&&v| v < q).count() as f64 / e.len() as f64;
            assert!(below < p);
        }
    }
}
