//! Joint tail probabilities in many dimensions without covariates.
//!
//! Pairwise extremal dependence measures group the components into
//! strongly dependent blocks; within each block the probability that every
//! component exceeds its `1 − cᵢφ` quantile is extrapolated from an
//! intermediate level `φ*` with the working model
//! `Pr(U_max < φ | U_max < φ*) = k₁φ + k₂φ^{1/η}`; blocks are then treated
//! as independent.

mod blocks;
mod cluster;
mod edm;
mod estimator;

pub use blocks::{
    block_product, bootstrap_tailprob, estimate_blocks, BlockEstimate, LogProbability, TailProbBootstrap,
    TailProbConfig,
};
pub use cluster::{cluster_edm, dendrogram, BlockPartition, Cut, Dendrogram, Merge};
pub use edm::{edm_matrix, edm_pair, gumbel_to_frechet, EdmConfig, EdmMatrix, Norm, MIN_EDM_EXCEEDANCES};
pub use estimator::{
    estimate_p, fit_tail_model, log_estimate_p, stability_scan, u_max, ScanRow, StabilityScan, TailModelFit,
    ETA_MIN, MIN_BELOW,
};

/// Uniform margins from standard Gumbel values.
pub fn gumbel_to_uniform(column: &[f64]) -> Vec<f64> {
    column.iter().map(|&y| crate::distributions::gumbel_cdf(y)).collect()
}

/// Uniform margins from ranks, `rank/(n + 1)`, for data whose margins are
/// not known. Ties share their lowest rank.
pub fn rank_to_uniform(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut out = vec![0.0; n];
    let mut k = 0;
    while k < n {
        let mut e = k;
        while e + 1 < n && column[order[e + 1]] == column[order[k]] {
            e += 1;
        }
        for &i in &order[k..=e] {
            out[i] = (k + 1) as f64 / (n + 1) as f64;
        }
        k = e + 1;
    }
    out
}
