use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::quantile;
use crate::{Error, Result};

pub const MIN_EDM_EXCEEDANCES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    fn of(&self, a: f64, b: f64) -> f64 {
        match self {
            Norm::L1 => a + b,
            Norm::L2 => a.hypot(b),
        }
    }

    /// `ω₁ω₂ = ab/‖(a, b)‖²`, scaled by the larger value so the diagonal
    /// gives the maximum exactly.
    fn angular_product(&self, a: f64, b: f64) -> f64 {
        let m = a.max(b);
        if m == 0.0 {
            return 0.0;
        }
        let (a, b) = (a / m, b / m);
        let r2 = match self {
            Norm::L1 => (a + b) * (a + b),
            Norm::L2 => a * a + b * b,
        };
        a * b / r2
    }

    /// Largest attainable EDM: all angular mass on the diagonal.
    pub fn edm_max(&self) -> f64 {
        match self {
            Norm::L1 => 0.25,
            Norm::L2 => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdmConfig {
    pub norm: Norm,
    /// Tail index used by [`gumbel_to_frechet`].
    pub alpha: f64,
    /// Level of the empirical radius quantile used as threshold.
    pub threshold_prob: f64,
}

impl Default for EdmConfig {
    fn default() -> Self {
        Self { norm: Norm::L2, alpha: 2.0, threshold_prob: 0.99 }
    }
}

impl EdmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_prob > 0.5 && self.threshold_prob < 1.0) {
            return Err(Error::domain(format!("EDM threshold level must lie in (0.5, 1), got {}", self.threshold_prob)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::domain(format!("tail index must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Maps a standard Gumbel value to a Fréchet law with tail index `alpha`:
/// `exp(y)` is unit Fréchet and its `1/alpha` power has index `alpha`.
pub fn gumbel_to_frechet(y: f64, alpha: f64) -> f64 {
    (y / alpha).exp()
}

/// Empirical extremal dependence measure: the mean product of the angular
/// components over the rows whose radius exceeds its empirical
/// `threshold_prob` quantile.
pub fn edm_pair(y1: &[f64], y2: &[f64], cfg: &EdmConfig) -> Result<f64> {
    cfg.validate()?;
    if y1.len() != y2.len() {
        return Err(Error::invalid(format!("EDM inputs differ in length ({} vs {})", y1.len(), y2.len())));
    }
    if y1.iter().chain(y2).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::domain("EDM inputs must be finite and nonnegative"));
    }
    let r: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| cfg.norm.of(*a, *b)).collect();
    if r.is_empty() {
        return Err(Error::InsufficientData { what: "EDM rows".into(), have: 0, need: MIN_EDM_EXCEEDANCES });
    }
    let u = quantile(&r, cfg.threshold_prob);
    let mut count = 0usize;
    let mut acc = 0.0;
    for ((a, b), rt) in y1.iter().zip(y2).zip(&r) {
        if *rt > u {
            count += 1;
            acc += cfg.norm.angular_product(*a, *b);
        }
    }
    if count < MIN_EDM_EXCEEDANCES {
        return Err(Error::InsufficientData {
            what: "radius exceedances for the EDM".into(),
            have: count,
            need: MIN_EDM_EXCEEDANCES,
        });
    }
    Ok(acc / count as f64)
}

/// Symmetric matrix of pairwise EDMs with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdmMatrix {
    pub values: Vec<Vec<f64>>,
    /// Norm-dependent maximum; the self-EDM of every component.
    pub max: f64,
}

impl EdmMatrix {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn write_csv<W: std::io::Write>(&self, names: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::new()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in names.iter().zip(&self.values) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// EDM for every pair of columns; each column must already be on a common
/// nonnegative heavy-tailed scale.
pub fn edm_matrix(columns: &[Vec<f64>], cfg: &EdmConfig) -> Result<EdmMatrix> {
    let d = columns.len();
    if d < 2 {
        return Err(Error::invalid(format!("EDM matrix needs at least two columns, got {d}")));
    }
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| edm_pair(&columns[i], &columns[j], cfg))
        .collect::<Result<_>>()?;
    let mut values = vec![vec![0.0; d]; d];
    for (&(i, j), v) in pairs.iter().zip(vals) {
        values[i][j] = v;
        values[j][i] = v;
    }
    Ok(EdmMatrix { values, max: cfg.norm.edm_max() })
}
