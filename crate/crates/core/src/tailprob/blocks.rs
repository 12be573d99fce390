use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cluster::BlockPartition;
use super::estimator::{fit_tail_model, log_estimate_p, u_max, TailModelFit};
use crate::numopt::rng::stream;
use crate::stats::percentile_interval;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogProbability {
    pub ln: f64,
}

impl LogProbability {
    pub fn log10(&self) -> f64 {
        self.ln / std::f64::consts::LN_10
    }

    /// May underflow to zero; the log is the primary result.
    pub fn value(&self) -> f64 {
        self.ln.exp()
    }
}

/// Product of per-block probabilities, accumulated in logs.
pub fn block_product(partition: &BlockPartition, estimates: &[f64]) -> Result<LogProbability> {
    if estimates.len() != partition.n_blocks() {
        return Err(Error::invalid(format!(
            "{} estimates for {} blocks",
            estimates.len(),
            partition.n_blocks()
        )));
    }
    if let Some(bad) = estimates.iter().find(|&&p| !(p > 0.0)) {
        return Err(Error::domain(format!("block probabilities must be positive, got {bad}")));
    }
    Ok(LogProbability { ln: estimates.iter().map(|p| p.ln()).sum() })
}

/// Settings shared by the point estimate and its bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProbConfig {
    pub phi: f64,
    pub phi_star: f64,
    /// One weight per component; all ones for a common exceedance level.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimate {
    pub fits: Vec<TailModelFit>,
    /// Natural log of each block probability.
    pub block_log_p: Vec<f64>,
    pub log_p: LogProbability,
}

/// Fits the tail model separately in each block of uniform-margin columns
/// and multiplies the block estimates at `cfg.phi`.
pub fn estimate_blocks(columns: &[Vec<f64>], partition: &BlockPartition, cfg: &TailProbConfig) -> Result<BlockEstimate> {
    if columns.len() != partition.dim() || cfg.weights.len() != columns.len() {
        return Err(Error::invalid(format!(
            "{} columns, {} weights and a partition of {} components",
            columns.len(),
            cfg.weights.len(),
            partition.dim()
        )));
    }
    let mut fits = Vec::with_capacity(partition.n_blocks());
    let mut block_log_p = Vec::with_capacity(partition.n_blocks());
    for block in &partition.blocks {
        let cols: Vec<Vec<f64>> = block.iter().map(|&i| columns[i].clone()).collect();
        let c: Vec<f64> = block.iter().map(|&i| cfg.weights[i]).collect();
        let fit = fit_tail_model(&u_max(&cols, &c)?, cfg.phi_star)?;
        block_log_p.push(log_estimate_p(&fit, cfg.phi)?);
        fits.push(fit);
    }
    // same as block_product, without leaving log space
    let log_p = LogProbability { ln: block_log_p.iter().sum() };
    Ok(BlockEstimate { fits, block_log_p, log_p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProbBootstrap {
    /// Full-sample natural-log estimate.
    pub estimate: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub replicates: Vec<f64>,
    pub failures: usize,
    /// Fewer than 50 replicates.
    pub degenerate: bool,
}

/// Row-resampling bootstrap of the block estimate with the partition held
/// fixed. Intervals are percentile intervals of the natural-log estimate.
pub fn bootstrap_tailprob(
    columns: &[Vec<f64>],
    partition: &BlockPartition,
    cfg: &TailProbConfig,
    b: usize,
    level: f64,
    seed: u64,
) -> Result<TailProbBootstrap> {
    if b == 0 {
        return Err(Error::invalid("need at least one bootstrap replicate"));
    }
    let estimate = estimate_blocks(columns, partition, cfg)?.log_p.ln;
    let n = columns.first().map_or(0, Vec::len);
    let results: Vec<Result<f64>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let resampled: Vec<Vec<f64>> = columns.iter().map(|c| idx.iter().map(|&t| c[t]).collect()).collect();
            estimate_blocks(&resampled, partition, cfg).map(|e| e.log_p.ln)
        })
        .collect();
    let mut replicates = Vec::with_capacity(b);
    let mut failures = 0;
    let mut last = String::new();
    for r in results {
        match r {
            Ok(v) => replicates.push(v),
            Err(e) => {
                failures += 1;
                last = e.to_string();
            }
        }
    }
    if failures * 5 > b || replicates.is_empty() {
        return Err(Error::ReplicateFailures { failed: failures, total: b, last });
    }
    let (lower, median, upper) = percentile_interval(&replicates, level);
    Ok(TailProbBootstrap { estimate, median, lower, upper, level, replicates, failures, degenerate: b < 50 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_in_log_space() {
        let one = BlockPartition::explicit(vec![vec![0, 1]]).unwrap();
        assert!((block_product(&one, &[0.2]).unwrap().value() - 0.2).abs() < 1e-15);
        let five = BlockPartition::explicit((0..5).map(|i| vec![i]).collect()).unwrap();
        let lp = block_product(&five, &[1e-12; 5]).unwrap();
        assert!((lp.log10() + 60.0).abs() < 1e-9);
        assert!(block_product(&five, &[1e-12, 0.0, 1.0, 1.0, 1.0]).is_err());
        assert!(block_product(&five, &[0.5]).is_err());
    }
}
