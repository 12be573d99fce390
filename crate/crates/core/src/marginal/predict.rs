use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::formula::ModelFormula;
use super::gpdreg::{fit_gpd_regression, GpdRegressionFit};
use super::quantreg::fit_threshold;
use crate::dataset::Dataset;
use crate::numopt::rng::stream;
use crate::stats::{percentile_interval, quantile_sorted};
use crate::{Error, Result};

/// Default number of grid levels for [`twsmad`].
pub const TWSMAD_GRID: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentialTransform {
    /// Values on standard exponential margins, one per kept row.
    pub values: Vec<f64>,
    /// Dataset row of each value.
    pub rows: Vec<usize>,
    /// Rows dropped for a missing response or covariate.
    pub excluded: Vec<usize>,
}

/// Maps each complete row to standard exponential margins. Below the
/// threshold the CDF is `λ·Ĝ(y − u(x))` with `Ĝ` the empirical law of the
/// training residuals below the threshold; above it `λ + (1 − λ)H(y − u(x))`
/// with `H` the fitted GPD. The output is `−log(1 − F)`.
pub fn transform_to_exponential(fit: &GpdRegressionFit, data: &Dataset) -> Result<ExponentialTransform> {
    let mut needed: Vec<&str> = vec![fit.formula.response.as_str()];
    needed.extend(fit.formula.covariates());
    let cols: Vec<&[Option<f64>]> = needed.iter().map(|c| data.column(c)).collect::<Result<_>>()?;
    let lambda = fit.lambda();
    let mut out = ExponentialTransform { values: vec![], rows: vec![], excluded: vec![] };
    for r in 0..data.n_rows() {
        if cols.iter().any(|c| c[r].is_none()) {
            out.excluded.push(r);
            continue;
        }
        let lookup = |name: &str| needed.iter().position(|c| *c == name).and_then(|k| cols[k][r]);
        let (u, gpd) = fit.params_at(lookup)?;
        let d = cols[0][r].unwrap() - u;
        let value = if d <= 0.0 {
            let f = lambda * fit.body.cdf(d);
            -(-f).ln_1p()
        } else {
            // −log((1 − λ) S(d)), computed in logs to keep the far tail exact
            let s = gpd.sf(d);
            if s > 0.0 {
                -(1.0 - lambda).ln() - s.ln()
            } else {
                f64::INFINITY
            }
        };
        out.values.push(value);
        out.rows.push(r);
    }
    Ok(out)
}

/// Tail-weighted standardised mean absolute deviance of data on standard
/// exponential margins, over levels above `lambda_star`.
pub fn twsmad(std_data: &[f64], lambda_star: f64) -> Result<f64> {
    twsmad_with_grid(std_data, lambda_star, TWSMAD_GRID)
}

pub fn twsmad_with_grid(std_data: &[f64], lambda_star: f64, grid: usize) -> Result<f64> {
    if !(lambda_star > 0.0 && lambda_star < 1.0) {
        return Err(Error::domain(format!("lambda_star {lambda_star} outside (0, 1)")));
    }
    if grid < 100 || std_data.len() < 100 {
        return Err(Error::InsufficientData {
            what: "twsMAD grid points and data values".into(),
            have: grid.min(std_data.len()),
            need: 100,
        });
    }
    let mut sorted = std_data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let levels = (1..=grid).map(|i| i as f64 / (grid + 1) as f64).filter(|&l| l > lambda_star);
    let theo: Vec<(f64, f64)> = levels.map(|l| (l, -(-l).ln_1p())).collect();
    if theo.is_empty() {
        return Err(Error::domain("no grid level lies above lambda_star"));
    }
    let norm: f64 = theo.iter().map(|(_, q)| q).sum();
    let total: f64 = theo
        .iter()
        .map(|&(l, q)| (q / norm) * (quantile_sorted(&sorted, l) - q).abs())
        .sum();
    Ok(total / grid as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdSelection {
    pub selected: f64,
    /// twsMAD per candidate, `None` where the fit failed.
    pub scores: Vec<(f64, Option<f64>)>,
}

fn score_candidate(data: &Dataset, formula: &ModelFormula, lambda: f64, lambda_star: f64) -> Result<f64> {
    let thr = fit_threshold(data, formula, lambda)?;
    let fit = fit_gpd_regression(data, formula, &thr)?;
    let t = transform_to_exponential(&fit, data)?;
    twsmad(&t.values, lambda_star)
}

/// Refits the model at every candidate level and returns the one with the
/// smallest twsMAD; ties go to the smaller level.
pub fn select_threshold(
    data: &Dataset,
    formula: &ModelFormula,
    candidates: &[f64],
    lambda_star: f64,
) -> Result<ThresholdSelection> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate threshold levels"));
    }
    if let Some(bad) = candidates.iter().find(|&&l| l >= lambda_star) {
        return Err(Error::domain(format!("candidate {bad} is not below lambda_star {lambda_star}")));
    }
    let results: Vec<Result<f64>> =
        candidates.par_iter().map(|&l| score_candidate(data, formula, l, lambda_star)).collect();
    let mut best: Option<(f64, f64)> = None;
    let mut scores = Vec::with_capacity(candidates.len());
    let mut errors = Vec::new();
    for (&l, r) in candidates.iter().zip(results) {
        match r {
            Ok(s) => {
                scores.push((l, Some(s)));
                let better = match best {
                    None => true,
                    Some((bl, bs)) => s < bs || (s == bs && l < bl),
                };
                if better {
                    best = Some((l, s));
                }
            }
            Err(e) => {
                scores.push((l, None));
                errors.push(format!("lambda {l}: {e}"));
            }
        }
    }
    match best {
        Some((selected, _)) => Ok(ThresholdSelection { selected, scores }),
        None => Err(Error::ReplicateFailures {
            failed: candidates.len(),
            total: candidates.len(),
            last: errors.join("; "),
        }),
    }
}

/// Level-`q` conditional quantile at covariate row `x` (absent keys count as
/// missing). Requires `λ ≤ q < 1`.
pub fn conditional_quantile(fit: &GpdRegressionFit, x: &BTreeMap<String, f64>, q: f64) -> Result<f64> {
    let lambda = fit.lambda();
    if !(q >= lambda && q < 1.0) {
        return Err(Error::domain(format!("quantile level {q} must lie in [{lambda}, 1)")));
    }
    let (u, gpd) = fit.params_at(|name| x.get(name).copied())?;
    Ok(u + excess_quantile(gpd.sigma(), gpd.xi(), lambda, q))
}

/// `(σ/ξ)[((1−q)/(1−λ))^{−ξ} − 1]`, continuous through `ξ = 0`.
pub fn excess_quantile(sigma: f64, xi: f64, lambda: f64, q: f64) -> f64 {
    let l = ((1.0 - lambda) / (1.0 - q)).ln();
    if xi == 0.0 {
        sigma * l
    } else {
        sigma * (xi * l).exp_m1() / xi
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantileInterval {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapQuantiles {
    pub intervals: Vec<QuantileInterval>,
    pub replicates: usize,
    pub failures: usize,
    /// Set when fewer than 50 replicates were requested.
    pub degenerate: bool,
}

/// Non-parametric bootstrap of conditional quantiles: rows are resampled
/// with replacement, the threshold and GPD models refitted, and central
/// `interval_level` percentile intervals reported per covariate row.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_quantiles(
    data: &Dataset,
    formula: &ModelFormula,
    lambda: f64,
    x_set: &[BTreeMap<String, f64>],
    q: f64,
    b: usize,
    interval_level: f64,
    seed: u64,
) -> Result<BootstrapQuantiles> {
    if b == 0 {
        return Err(Error::invalid("bootstrap needs at least one replicate"));
    }
    let rows = data.complete_rows(&[formula.response.as_str()])?;
    let replicate = |i: usize| -> Result<Vec<f64>> {
        let mut rng = stream(seed, i as u64);
        let pick: Vec<usize> = (0..rows.len()).map(|_| rows[rng.random_range(0..rows.len())]).collect();
        let boot = data.select_rows(&pick);
        let thr = fit_threshold(&boot, formula, lambda)?;
        let fit = fit_gpd_regression(&boot, formula, &thr)?;
        x_set.iter().map(|x| conditional_quantile(&fit, x, q)).collect()
    };
    let results: Vec<Result<Vec<f64>>> = (0..b).into_par_iter().map(replicate).collect();
    let mut ok = Vec::with_capacity(b);
    let mut last = String::new();
    for r in results {
        match r {
            Ok(v) if v.iter().all(|x| x.is_finite()) => ok.push(v),
            Ok(_) => last = "non-finite quantile".into(),
            Err(e) => last = e.to_string(),
        }
    }
    let failures = b - ok.len();
    if ok.is_empty() || failures as f64 > 0.2 * b as f64 {
        return Err(Error::ReplicateFailures { failed: failures, total: b, last });
    }
    let intervals = (0..x_set.len())
        .map(|j| {
            let vals: Vec<f64> = ok.iter().map(|v| v[j]).collect();
            let (lower, median, upper) = percentile_interval(&vals, interval_level);
            QuantileInterval { lower, median, upper }
        })
        .collect();
    Ok(BootstrapQuantiles { intervals, replicates: b, failures, degenerate: b < 50 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twsmad_zero_for_exact_quantiles() {
        let n = TWSMAD_GRID;
        let data: Vec<f64> = (1..=n).map(|i| -(-(i as f64) / (n + 1) as f64).ln_1p()).collect();
        let s = twsmad(&data, 0.9).unwrap();
        assert!(s.abs() < 1e-15, "{s}");
        let shifted: Vec<f64> = data.iter().map(|v| v + 0.5).collect();
        assert!(twsmad(&shifted, 0.9).unwrap() > s);
    }

    #[test]
    fn twsmad_needs_enough_data() {
        assert!(twsmad(&[1.0; 50], 0.9).is_err());
    }

    #[test]
    fn excess_quantile_closed_forms() {
        assert!((excess_quantile(1.0, 0.0, 0.9, 0.99) - 10f64.ln()).abs() < 1e-14);
        assert_eq!(excess_quantile(2.0, 0.3, 0.9, 0.9), 0.0);
        let a = excess_quantile(1.3, 1e-8, 0.9, 0.9999);
        let b = excess_quantile(1.3, 0.0, 0.9, 0.9999);
        let c = excess_quantile(1.3, -1e-8, 0.9, 0.9999);
        assert!((a - b).abs() < 1e-6 && (c - b).abs() < 1e-6);
    }
}
