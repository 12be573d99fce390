use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{others, CondExData, CondExFit};
use crate::distributions::{exp1_sample, gumbel_to_laplace, laplace_to_gumbel};
use crate::numopt::rng::stream;
use crate::stats::quantile_sorted;
use crate::{Error, Result};

const BATCH: usize = 1 << 15;

/// One draw from the fitted conditional model: `y_i = u + E`, a residual
/// pair resampled from the fit, and
/// `y_{-i} = α(x)·y_i + y_i^{β(x)}·z`. Laplace margins.
pub fn simulate_conditional<R: Rng + ?Sized>(fit: &CondExFit, x: &[f64], rng: &mut R) -> Result<[f64; 3]> {
    if fit.residuals.is_empty() {
        return Err(Error::invalid("the fit has no residuals to resample"));
    }
    if x.len() != fit.params.n_covariates() {
        return Err(Error::invalid(format!(
            "covariate row has {} values, the fit expects {}",
            x.len(),
            fit.params.n_covariates()
        )));
    }
    Ok(draw(fit, x, rng))
}

fn draw<R: Rng + ?Sized>(fit: &CondExFit, x: &[f64], rng: &mut R) -> [f64; 3] {
    let i = fit.params.index;
    let yi = fit.u + exp1_sample(rng);
    let z = fit.residuals[rng.random_range(0..fit.residuals.len())].z;
    let a = fit.params.alpha_at(x);
    let b = fit.params.beta_at(x);
    let mut out = [0.0; 3];
    out[i] = yi;
    for (j, &k) in others(i).iter().enumerate() {
        out[k] = a[j] * yi + yi.powf(b[j]) * z[j];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulated,
    EmpiricalBody,
}

/// Rows on standard Gumbel margins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointSample {
    pub rows: Vec<[f64; 3]>,
    pub provenance: Vec<Provenance>,
    /// Empirical probability that no component exceeds the threshold.
    pub p_body: f64,
}

impl JointSample {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn laplace_rows(&self) -> Vec<[f64; 3]> {
        self.rows.iter().map(|r| r.map(gumbel_to_laplace)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["y1", "y2", "y3", "source"])?;
        for (r, p) in self.rows.iter().zip(&self.provenance) {
            let src = match p {
                Provenance::Simulated => "simulated",
                Provenance::EmpiricalBody => "empirical_body",
            };
            w.write_record([r[0].to_string(), r[1].to_string(), r[2].to_string(), src.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Unconditional sample built from the three conditional fits: `n_prime`
/// conditional draws at random conditioning index and random time, a
/// weighted resample of `n` of them with weight `1/#{components above u}`,
/// then each row swapped for an observed below-threshold row with the
/// empirical probability that no component exceeds `u`.
pub fn simulate_unconditional(fits: &[CondExFit], data: &CondExData, n: usize, n_prime: usize, seed: u64) -> Result<JointSample> {
    if fits.len() != 3 {
        return Err(Error::invalid(format!("need one fit per component, got {}", fits.len())));
    }
    for (i, f) in fits.iter().enumerate() {
        if f.params.index != i {
            return Err(Error::invalid(format!("fit {i} conditions on component {}", f.params.index)));
        }
        if f.residuals.is_empty() {
            return Err(Error::invalid(format!("fit {i} has no residuals")));
        }
        if f.params.n_covariates() != data.n_covariates() {
            return Err(Error::invalid(format!("fit {i} and the data disagree on the number of covariates")));
        }
    }
    let u = fits[0].u;
    if fits.iter().any(|f| f.u != u) {
        return Err(Error::invalid("the three fits must share one threshold"));
    }
    if !(n_prime > n) || n == 0 {
        return Err(Error::invalid(format!("need 0 < n < n_prime, got n = {n}, n_prime = {n_prime}")));
    }

    let laplace = data.laplace_rows();
    let body: Vec<usize> = (0..laplace.len()).filter(|&t| laplace[t].iter().all(|&v| v < u)).collect();
    let p_body = body.len() as f64 / laplace.len() as f64;

    let n_batches = n_prime.div_ceil(BATCH);
    let draws: Vec<([f64; 3], f64)> = (0..n_batches)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = stream(seed, b as u64 + 1);
            let len = BATCH.min(n_prime - b * BATCH);
            let laplace = &laplace;
            (0..len)
                .map(move |_| {
                    let i = rng.random_range(0..3);
                    let t = rng.random_range(0..laplace.len());
                    let y = draw(&fits[i], &data.covariates[t], &mut rng);
                    let above = y.iter().filter(|&&v| v > u).count().max(1);
                    (y, 1.0 / above as f64)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut rng = stream(seed, 0);
    let picker = WeightedIndex::new(draws.iter().map(|d| d.1))
        .map_err(|e| Error::invalid(format!("importance weights: {e}")))?;
    let mut rows = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for _ in 0..n {
        let sim = draws[picker.sample(&mut rng)].0;
        if p_body > 0.0 && rng.random::<f64>() < p_body {
            let t = body[rng.random_range(0..body.len())];
            rows.push(data.rows[t]);
            provenance.push(Provenance::EmpiricalBody);
        } else {
            rows.push(sim.map(laplace_to_gumbel));
            provenance.push(Provenance::Simulated);
        }
    }
    Ok(JointSample { rows, provenance, p_body })
}

/// Constraint on one component of a joint event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Any,
    Above(f64),
    Below(f64),
}

impl Bound {
    fn holds(&self, v: f64) -> bool {
        match *self {
            Bound::Any => true,
            Bound::Above(c) => v > c,
            Bound::Below(c) => v < c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointProbability {
    pub estimate: f64,
    pub count: usize,
    pub n: usize,
}

impl JointProbability {
    /// True when no row fell in the region; the probability is then only
    /// known to be below `1/n`.
    pub fn below_resolution(&self) -> bool {
        self.count == 0
    }

    pub fn upper_bound(&self) -> f64 {
        if self.count == 0 {
            1.0 / self.n as f64
        } else {
            self.estimate
        }
    }
}

impl std::fmt::Display for JointProbability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.below_resolution() {
            write!(f, "< {:e}", 1.0 / self.n as f64)
        } else {
            write!(f, "{:e}", self.estimate)
        }
    }
}

/// Fraction of sample rows inside the region.
pub fn estimate_joint_probability(sample: &JointSample, region: &[Bound; 3]) -> Result<JointProbability> {
    if sample.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    let count = sample.rows.iter().filter(|r| (0..3).all(|k| region[k].holds(r[k]))).count();
    Ok(JointProbability { estimate: count as f64 / sample.len() as f64, count, n: sample.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub prob: f64,
    pub simulated: f64,
    pub observed: f64,
}

/// Default probability grid: the median and 0.90 to 0.999.
pub fn qq_grid() -> Vec<f64> {
    let mut g = vec![0.5];
    g.extend((0..=99).map(|k| 0.9 + 0.00099 * k as f64));
    g
}

/// Quantiles of `R = Y₁ + Y₂ + Y₃` in the simulated and observed rows.
/// Both inputs must be on the same margins.
pub fn qq_aggregate(simulated: &[[f64; 3]], observed: &[[f64; 3]], probs: &[f64]) -> Result<Vec<QqPoint>> {
    if simulated.is_empty() || observed.is_empty() {
        return Err(Error::invalid("Q-Q needs non-empty samples"));
    }
    let sums = |rows: &[[f64; 3]]| {
        let mut r: Vec<f64> = rows.iter().map(|v| v[0] + v[1] + v[2]).collect();
        r.sort_by(f64::total_cmp);
        r
    };
    let (s, o) = (sums(simulated), sums(observed));
    Ok(probs
        .iter()
        .map(|&p| QqPoint { prob: p, simulated: quantile_sorted(&s, p), observed: quantile_sorted(&o, p) })
        .collect())
}

pub fn write_qq_csv<W: Write>(points: &[QqPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["prob", "simulated", "observed"])?;
    for p in points {
        w.write_record([p.prob.to_string(), p.simulated.to_string(), p.observed.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (conditioning index, other component): the dependence
/// coefficients followed by the residual correlation and margin.
/// Components are numbered from 1.
pub fn write_coefficient_table<W: Write>(fits: &[CondExFit], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let names = fits.first().map(|f| f.covariate_names.clone()).unwrap_or_default();
    let mut header = vec!["i".to_string(), "j".to_string(), "alpha0".to_string()];
    header.extend(names.iter().map(|n| format!("alpha1_{n}")));
    header.push("beta0".into());
    header.extend(names.iter().map(|n| format!("beta1_{n}")));
    header.extend(["rho", "mu", "sigma", "delta", "u", "n_exceedances", "aic"].map(String::from));
    w.write_record(&header)?;
    for f in fits {
        let p = &f.params;
        for (j, &k) in p.others().iter().enumerate() {
            let mut rec = vec![(p.index + 1).to_string(), (k + 1).to_string(), p.alpha0[j].to_string()];
            rec.extend(p.alpha1[j].iter().map(f64::to_string));
            rec.push(p.beta0[j].to_string());
            rec.extend(p.beta1[j].iter().map(f64::to_string));
            let m = &p.margins[j];
            rec.extend([p.rho, m.mu(), m.sigma(), m.delta(), f.u].map(|v| v.to_string()));
            rec.push(f.n_exceedances().to_string());
            rec.push(f.aic().to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
