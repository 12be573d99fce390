use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distributions::{EmpiricalDistribution, GpdParams};
use crate::marginal::{fit_gpd_regression, fit_threshold, GpdRegressionFit, ModelFormula};
use crate::numopt::rng::stream;
use crate::{Error, Result};

/// One realisation of per-row threshold and GPD parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorPool {
    /// `(u, σ, ξ)` triples.
    pub triples: Vec<(f64, f64, f64)>,
}

impl PriorPool {
    pub fn new(triples: Vec<(f64, f64, f64)>) -> Result<Self> {
        if let Some(t) = triples.iter().find(|t| !(t.1 > 0.0) || !t.0.is_finite() || !t.2.is_finite()) {
            return Err(Error::domain(format!("invalid prior triple {t:?}")));
        }
        Ok(Self { triples })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

/// Collection of pools plus the shared body distribution and level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NbePrior {
    pub pools: Vec<PriorPool>,
    pub body: EmpiricalDistribution,
    pub lambda: f64,
}

/// A replicate set and its true level-`q` quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub replicates: Vec<f64>,
    pub theta: f64,
}

/// Independently permutes each coordinate of the triples across the pool.
pub fn permute_prior<R: Rng + ?Sized>(pool: &PriorPool, rng: &mut R) -> PriorPool {
    let mut u: Vec<f64> = pool.triples.iter().map(|t| t.0).collect();
    let mut s: Vec<f64> = pool.triples.iter().map(|t| t.1).collect();
    let mut x: Vec<f64> = pool.triples.iter().map(|t| t.2).collect();
    u.shuffle(rng);
    s.shuffle(rng);
    x.shuffle(rng);
    PriorPool { triples: u.into_iter().zip(s).zip(x).map(|((a, b), c)| (a, b, c)).collect() }
}

/// Draws `m_mc` values of the unconditional response by picking a triple
/// uniformly and sampling `u + GPD(σ, ξ)` with probability `1 − λ`, else the
/// body. `theta` is the empirical `q`-quantile of all draws and the
/// replicates are the first `m` of them.
pub fn simulate_training_pair<R: Rng + ?Sized>(
    pool: &PriorPool,
    m: usize,
    q: f64,
    lambda: f64,
    body: &EmpiricalDistribution,
    m_mc: usize,
    rng: &mut R,
) -> Result<TrainingPair> {
    if pool.is_empty() {
        return Err(Error::invalid("prior pool is empty"));
    }
    if m_mc <= m || m == 0 {
        return Err(Error::invalid(format!("need 0 < m < M, got m = {m}, M = {m_mc}")));
    }
    if !(q > 0.0 && q < 1.0) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!("bad levels q = {q}, lambda = {lambda}")));
    }
    let gpds: Vec<(f64, GpdParams)> =
        pool.triples.iter().map(|&(u, s, x)| Ok((u, GpdParams::new(s, x)?))).collect::<Result<_>>()?;
    let mut draws = Vec::with_capacity(m_mc);
    for _ in 0..m_mc {
        let (u, g) = &gpds[rng.random_range(0..gpds.len())];
        let v = if rng.random::<f64>() < 1.0 - lambda { u + g.sample(rng) } else { body.sample(rng) };
        draws.push(v);
    }
    let replicates = draws[..m].to_vec();
    let rank = ((q * m_mc as f64).ceil() as usize).clamp(1, m_mc) - 1;
    let (_, theta, _) = draws.select_nth_unstable_by(rank, f64::total_cmp);
    Ok(TrainingPair { replicates, theta: *theta })
}

/// Warning text when the Monte Carlo quantile rests on fewer than 100
/// exceedances.
pub fn quantile_noise_warning(m_mc: usize, q: f64) -> Option<String> {
    let tail = m_mc as f64 * (1.0 - q);
    (tail < 100.0 * (1.0 - 1e-9)).then(|| format!("M(1-q) = {tail:.1} < 100: Monte Carlo quantiles will be noisy"))
}

/// `n` pairs, each from a randomly chosen pool after coordinate permutation.
/// Pair `i` uses generator lane `first_stream + i`.
#[allow(clippy::too_many_arguments)]
pub fn generate_pairs(
    prior: &NbePrior,
    n: usize,
    m: usize,
    q: f64,
    m_mc: usize,
    seed: u64,
    first_stream: u64,
) -> Result<Vec<TrainingPair>> {
    if prior.pools.is_empty() {
        return Err(Error::invalid("prior has no pools"));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, first_stream + i as u64);
            let pool = &prior.pools[rng.random_range(0..prior.pools.len())];
            let permuted = permute_prior(pool, &mut rng);
            simulate_training_pair(&permuted, m, q, prior.lambda, &prior.body, m_mc, &mut rng)
        })
        .collect()
}

/// Empirical prior from bootstrap refits of the threshold + GPD model: each
/// refit contributes one pool of per-row `(u, σ, ξ)` evaluated at the
/// original covariates. The body is the law of responses at or below the
/// full-data threshold.
pub fn build_prior(data: &Dataset, formula: &ModelFormula, lambda: f64, n_boot: usize, seed: u64) -> Result<NbePrior> {
    if n_boot == 0 {
        return Err(Error::invalid("need at least one bootstrap fit"));
    }
    let resp_rows = data.complete_rows(&[formula.response.as_str()])?;
    let mut needed = vec![formula.response.as_str()];
    needed.extend(formula.covariates());
    let eval_rows = data.complete_rows(&needed)?;
    let cols: Vec<&[Option<f64>]> = needed.iter().map(|c| data.column(c)).collect::<Result<_>>()?;
    let triples_for = |fit: &GpdRegressionFit| -> Result<Vec<(f64, f64, f64)>> {
        eval_rows
            .iter()
            .map(|&r| {
                let lookup = |name: &str| needed.iter().position(|c| *c == name).and_then(|k| cols[k][r]);
                let (u, g) = fit.params_at(lookup)?;
                Ok((u, g.sigma(), g.xi()))
            })
            .collect()
    };

    let full = {
        let thr = fit_threshold(data, formula, lambda)?;
        fit_gpd_regression(data, formula, &thr)?
    };
    let body: Vec<f64> = eval_rows
        .iter()
        .filter_map(|&r| {
            let lookup = |name: &str| needed.iter().position(|c| *c == name).and_then(|k| cols[k][r]);
            let y = cols[0][r]?;
            (y <= full.threshold.predict_row(lookup)).then_some(y)
        })
        .collect();

    let pools: Vec<Result<PriorPool>> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, b as u64);
            let pick: Vec<usize> = (0..resp_rows.len()).map(|_| resp_rows[rng.random_range(0..resp_rows.len())]).collect();
            let boot = data.select_rows(&pick);
            let thr = fit_threshold(&boot, formula, lambda)?;
            let fit = fit_gpd_regression(&boot, formula, &thr)?;
            PriorPool::new(triples_for(&fit)?)
        })
        .collect();
    let mut ok = Vec::new();
    let mut last = String::new();
    for p in pools {
        match p {
            Ok(p) => ok.push(p),
            Err(e) => last = e.to_string(),
        }
    }
    let failed = n_boot - ok.len();
    if ok.is_empty() || failed as f64 > 0.2 * n_boot as f64 {
        return Err(Error::ReplicateFailures { failed, total: n_boot, last });
    }
    Ok(NbePrior { pools: ok, body: EmpiricalDistribution::new(body)?, lambda })
}
