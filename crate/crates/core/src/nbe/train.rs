use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_slope, loss_unchecked};
use super::network::{DeepSetsNetwork, PreparedSet};
use super::prior::{generate_pairs, quantile_noise_warning, NbePrior, TrainingPair};
use crate::numopt::rng::child_seed;
use crate::stats::{mean, percentile_interval};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    /// Training parameter draws; validation uses `k / 5`.
    pub k: usize,
    /// Replicate sets per parameter draw.
    pub j: usize,
    /// Replicates per set.
    pub m: usize,
    /// Monte Carlo sample size for each true quantile.
    pub m_mc: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub q: f64,
    pub lambda: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            k: 5000,
            j: 1,
            m: 2000,
            m_mc: 1_000_000,
            batch_size: 32,
            patience: 10,
            max_epochs: 500,
            learning_rate: 1e-3,
            q: 1.0 - 1.0 / 6e4,
            lambda: 0.6,
        }
    }
}

impl TrainingConfig {
    /// Checks invariants and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.j < 1 || self.m < 1 || self.k < 1 || self.batch_size < 1 {
            return Err(Error::invalid("k, j, m and batch_size must all be at least 1"));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::domain(format!("q = {} outside (0, 1)", self.q)));
        }
        if self.m_mc <= self.m {
            return Err(Error::invalid("Monte Carlo size must exceed m"));
        }
        Ok(quantile_noise_warning(self.m_mc, self.q).into_iter().collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Validation risk before training (index 0) and after each epoch.
    pub validation_risk: Vec<f64>,
    pub training_risk: Vec<f64>,
    pub best_epoch: usize,
    pub warnings: Vec<String>,
}

impl TrainingReport {
    pub fn best_risk(&self) -> f64 {
        self.validation_risk[self.best_epoch]
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Mean asymmetric loss of `net` over prepared sets.
pub fn risk(net: &DeepSetsNetwork, sets: &[(PreparedSet, f64)]) -> f64 {
    sets.iter().map(|(s, theta)| loss_unchecked(*theta, net.forward_prepared(s).0)).sum::<f64>() / sets.len() as f64
}

fn standardisation(pairs: &[TrainingPair]) -> Result<(f64, f64)> {
    let (mut n, mut s, mut ss) = (0.0, 0.0, 0.0);
    for p in pairs {
        for v in &p.replicates {
            n += 1.0;
            s += v;
            ss += v * v;
        }
    }
    if n < 2.0 {
        return Err(Error::InsufficientData { what: "training replicates".into(), have: n as usize, need: 2 });
    }
    let mean = s / n;
    let var = (ss / n - mean * mean).max(0.0) * n / (n - 1.0);
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    Ok((mean, sd))
}

/// Trains on fixed training and validation pairs with Adam and early
/// stopping on the validation risk; the returned network carries the best
/// validation weights. Inputs are standardised by the training-replicate
/// mean and sd; the output bias starts at the mean training quantile.
pub fn train_on_pairs<R: Rng + ?Sized>(
    net: &DeepSetsNetwork,
    cfg: &TrainingConfig,
    train: &[TrainingPair],
    validation: &[TrainingPair],
    rng: &mut R,
) -> Result<(DeepSetsNetwork, TrainingReport)> {
    let warnings = cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    let std = standardisation(train)?;
    let prep = |pairs: &[TrainingPair]| -> Result<Vec<(PreparedSet, f64)>> {
        pairs.iter().map(|p| Ok((PreparedSet::new(&p.replicates, std)?, p.theta))).collect()
    };
    let train_sets = prep(train)?;
    let val_sets = prep(validation)?;

    let mut net = net.clone();
    net.standardisation = Some(std);
    *net.output_bias_mut() = mean(&train.iter().map(|p| p.theta).collect::<Vec<_>>());

    let mut report = TrainingReport {
        validation_risk: vec![risk(&net, &val_sets)],
        training_risk: vec![risk(&net, &train_sets)],
        best_epoch: 0,
        warnings,
    };
    let mut best = net.clone();
    let mut adam = Adam::new(net.n_params(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_sets.len()).collect();
    let mut grad = vec![0.0; net.n_params()];
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (set, theta) = &train_sets[i];
                let (out, cache) = net.forward_prepared(set);
                let l = loss_unchecked(*theta, out);
                if !l.is_finite() {
                    return Err(Error::NonFinite(format!("training loss at epoch {epoch}, batch {b}")));
                }
                epoch_loss += l;
                net.backward(&cache, scale * loss_slope(*theta, out), &mut grad);
            }
            adam.step(&mut net.params, &grad);
        }
        let val = risk(&net, &val_sets);
        if !val.is_finite() {
            return Err(Error::NonFinite(format!("validation risk at epoch {epoch}")));
        }
        report.training_risk.push(epoch_loss / train_sets.len() as f64);
        report.validation_risk.push(val);
        if val < report.validation_risk[report.best_epoch] {
            report.best_epoch = epoch;
            best = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok((best, report))
}

/// Generates `k` training and `k / 5` validation pairs from the prior and
/// trains. `j > 1` reuses each parameter draw for `j` replicate sets.
pub fn train<R: Rng + ?Sized>(
    net: &DeepSetsNetwork,
    cfg: &TrainingConfig,
    prior: &NbePrior,
    rng: &mut R,
) -> Result<(DeepSetsNetwork, TrainingReport)> {
    cfg.validate()?;
    if (cfg.lambda - prior.lambda).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "config lambda {} differs from the prior's {}",
            cfg.lambda, prior.lambda
        )));
    }
    let seed = child_seed(rng);
    let n_val = (cfg.k / 5).max(1);
    let train_pairs = generate_pairs(prior, cfg.k * cfg.j, cfg.m, cfg.q, cfg.m_mc, seed, 0)?;
    let val_pairs = generate_pairs(prior, n_val, cfg.m, cfg.q, cfg.m_mc, seed, (cfg.k * cfg.j) as u64)?;
    train_on_pairs(net, cfg, &train_pairs, &val_pairs, rng)
}

pub fn estimate(net: &DeepSetsNetwork, data: &[f64]) -> Result<f64> {
    net.forward(data)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub replicates: Vec<f64>,
}

/// Point estimate plus a percentile interval from `b` resamples of the data
/// (the network is not retrained).
pub fn bootstrap_estimate<R: Rng + ?Sized>(
    net: &DeepSetsNetwork,
    data: &[f64],
    b: usize,
    level: f64,
    rng: &mut R,
) -> Result<BootstrapEstimate> {
    if b == 0 {
        return Err(Error::invalid("bootstrap needs at least one replicate"));
    }
    let point = net.forward(data)?;
    let mut replicates = Vec::with_capacity(b);
    let mut resample = vec![0.0; data.len()];
    for _ in 0..b {
        for v in resample.iter_mut() {
            *v = data[rng.random_range(0..data.len())];
        }
        replicates.push(net.forward(&resample)?);
    }
    let (lower, _, upper) = percentile_interval(&replicates, level);
    Ok(BootstrapEstimate { point, lower, upper, replicates })
}
