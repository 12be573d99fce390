//! Data generators with known truth, used by recovery tests and the
//! `simulate-synthetic` command.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::condex::{logit, CondExData, CondExParams};
use crate::dataset::Dataset;
use crate::distributions::special::{normal_cdf, normal_quantile};
use crate::distributions::{gpd_quantile, gumbel_quantile, laplace_quantile, laplace_to_gumbel, DeltaLaplaceParams, GpdParams};
use crate::Result;

/// Peaks-over-threshold regression model with one covariate `x ~ U(−1, 1)`:
/// with probability `lambda` the response is uniform on
/// `[u(x) − body_width, u(x)]`, otherwise `u(x) + GPD(σ(x), ξ)`, where
/// `u(x) = u0 + u1·x` and `σ(x) = exp(s0 + s1·x)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PotModel {
    pub lambda: f64,
    pub u0: f64,
    pub u1: f64,
    pub s0: f64,
    pub s1: f64,
    pub xi: f64,
    pub body_width: f64,
}

impl Default for PotModel {
    fn default() -> Self {
        Self { lambda: 0.9, u0: 2.0, u1: 1.0, s0: 0.5, s1: 0.3, xi: 0.1, body_width: 3.0 }
    }
}

impl PotModel {
    pub fn threshold(&self, x: f64) -> f64 {
        self.u0 + self.u1 * x
    }

    pub fn gpd(&self, x: f64) -> GpdParams {
        GpdParams::new((self.s0 + self.s1 * x).exp(), self.xi).expect("valid synthetic GPD")
    }

    /// Exact conditional quantile of `Y | X = x`.
    pub fn quantile(&self, x: f64, q: f64) -> Result<f64> {
        let u = self.threshold(x);
        if q <= self.lambda {
            Ok(u - self.body_width * (1.0 - q / self.lambda))
        } else {
            Ok(u + gpd_quantile((q - self.lambda) / (1.0 - self.lambda), &self.gpd(x))?)
        }
    }

    /// Exact conditional CDF of `Y | X = x`.
    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        let u = self.threshold(x);
        if y <= u {
            (self.lambda * (1.0 - (u - y) / self.body_width)).max(0.0)
        } else {
            self.lambda + (1.0 - self.lambda) * self.gpd(x).cdf(y - u)
        }
    }

    pub fn sample_response<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let u = self.threshold(x);
        if rng.random::<f64>() < self.lambda {
            u - self.body_width * rng.random::<f64>()
        } else {
            u + self.gpd(x).sample(rng)
        }
    }

    /// `n` rows with columns `y`, `x` and an unrelated `noise ~ U(−1, 1)`.
    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Dataset {
        let mut y = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        let mut noise = Vec::with_capacity(n);
        for _ in 0..n {
            let xi = rng.random_range(-1.0..1.0);
            y.push(self.sample_response(xi, rng));
            x.push(xi);
            noise.push(rng.random_range(-1.0..1.0));
        }
        Dataset::from_complete(&["y", "x", "noise"], vec![y, x, noise])
            .expect("consistent columns")
            .with_roles(&["y"], &["x", "noise"])
            .expect("known columns")
    }
}

/// Synthetic empirical prior for the quantile estimator: each pool has its
/// own base scale `σ0 ~ U(0.5, 2)` and shape `ξ0 ~ U(−0.1, 0.3)`, and its
/// `m` triples vary around them as a covariate would. The body is uniform
/// on `[−2, 0]`, below every threshold.
pub fn nbe_prior<R: Rng + ?Sized>(n_pools: usize, m: usize, lambda: f64, rng: &mut R) -> crate::nbe::NbePrior {
    use crate::distributions::EmpiricalDistribution;
    use crate::nbe::{NbePrior, PriorPool};
    let pools = (0..n_pools)
        .map(|_| {
            let s0: f64 = rng.random_range(0.5..2.0);
            let x0: f64 = rng.random_range(-0.1..0.3);
            let triples = (0..m)
                .map(|_| {
                    let x: f64 = rng.random_range(-1.0..1.0);
                    (0.5 + 0.5 * x, s0 * (0.2 * x).exp(), x0 + 0.02 * x)
                })
                .collect();
            PriorPool::new(triples).expect("positive scales")
        })
        .collect();
    let body = EmpiricalDistribution::new((0..1000).map(|_| -2.0 * rng.random::<f64>()).collect()).expect("finite body");
    NbePrior { pools, body, lambda }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    normal_quantile(crate::distributions::open_uniform(rng))
}

fn standard_laplace<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    laplace_quantile(crate::distributions::open_uniform(rng)).expect("open unit interval")
}

/// Three responses whose joint tail given component `params.index` above
/// `u` (Laplace scale) follows the conditional extremes model exactly, with
/// a Gaussian-copula delta-Laplace residual. Below the threshold the other
/// two components are independent standard Laplace. Covariates are
/// independent `U(−1, 1)`, one per entry of `params.alpha1[0]`, named
/// `x1, x2, …`. Output is on Gumbel margins.
#[derive(Debug, Clone)]
pub struct CondExTruth {
    pub params: CondExParams,
    pub u: f64,
}

impl CondExTruth {
    /// One covariate, homogeneous β, conditioning on the first component.
    pub fn one_covariate() -> Self {
        let m0 = DeltaLaplaceParams::new(0.2, 1.0, 1.5).expect("valid margin");
        let m1 = DeltaLaplaceParams::new(-0.1, 0.8, 1.2).expect("valid margin");
        Self {
            params: CondExParams {
                index: 0,
                alpha0: [0.6f64.atanh(), 0.3f64.atanh()],
                alpha1: [vec![0.3], vec![-0.2]],
                beta0: [logit(0.3), logit(0.2)],
                beta1: [vec![0.0], vec![0.0]],
                homogeneous_beta: true,
                rho: 0.2,
                margins: [m0, m1],
            },
            u: std::f64::consts::LN_2,
        }
    }

    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> CondExData {
        let p = &self.params;
        let l = p.n_covariates();
        let i = p.index;
        let others = p.others();
        let mut rows = Vec::with_capacity(n);
        let mut cov = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..1.0)).collect();
            let yi = standard_laplace(rng);
            let mut y = [0.0; 3];
            y[i] = yi;
            if yi > self.u {
                let a = p.alpha_at(&x);
                let b = p.beta_at(&x);
                let q0 = standard_normal(rng);
                let q1 = p.rho * q0 + (1.0 - p.rho * p.rho).sqrt() * standard_normal(rng);
                for (j, q) in [q0, q1].into_iter().enumerate() {
                    let z = p.margins[j].quantile(normal_cdf(q).clamp(1e-300, 1.0 - 1e-16)).expect("open level");
                    y[others[j]] = a[j] * yi + yi.powf(b[j]) * z;
                }
            } else {
                for k in others {
                    y[k] = standard_laplace(rng);
                }
            }
            rows.push(y.map(laplace_to_gumbel));
            cov.push(x);
        }
        let names = (1..=l).map(|c| format!("x{c}")).collect();
        CondExData::new(rows, cov, names).expect("finite synthetic data")
    }
}

/// `n` rows of a trivariate Gaussian copula on standard Gumbel margins with
/// pairwise correlations `(r01, r02, r12)`, plus `n_noise` independent
/// `U(−1, 1)` covariates that play no role.
pub fn gaussian_copula_gumbel<R: Rng + ?Sized>(n: usize, corr: [f64; 3], n_noise: usize, rng: &mut R) -> Result<CondExData> {
    let [r01, r02, r12] = corr;
    // Cholesky factor of the 3×3 correlation matrix
    let l11 = (1.0 - r01 * r01).sqrt();
    let l21 = (r12 - r02 * r01) / l11;
    let l22sq = 1.0 - r02 * r02 - l21 * l21;
    if !(l11 > 0.0 && l22sq > 0.0) {
        return Err(crate::Error::domain("correlation matrix is not positive definite"));
    }
    let l22 = l22sq.sqrt();
    let mut rows = Vec::with_capacity(n);
    let mut cov = Vec::with_capacity(n);
    for _ in 0..n {
        let e = [standard_normal(rng), standard_normal(rng), standard_normal(rng)];
        let g = [e[0], r01 * e[0] + l11 * e[1], r02 * e[0] + l21 * e[1] + l22 * e[2]];
        rows.push(g.map(|v| gumbel_quantile(normal_cdf(v).clamp(1e-300, 1.0 - 1e-16)).expect("open level")));
        cov.push((0..n_noise).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    let names = (1..=n_noise).map(|c| format!("x{c}")).collect();
    CondExData::new(rows, cov, names)
}

/// Independent blocks of uniform margins. In block `b`, with probability
/// `weights[b]` every component equals one shared uniform, otherwise all
/// are independent, so
/// `Pr(all Uᵢ > 1 − cᵢφ) = w·minᵢ cᵢφ + (1 − w)·Πᵢ cᵢφ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureBlocks {
    pub sizes: Vec<usize>,
    pub weights: Vec<f64>,
}

impl MixtureBlocks {
    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Component indices of each block, in order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut start = 0;
        self.sizes
            .iter()
            .map(|&s| {
                let b = (start..start + s).collect();
                start += s;
                b
            })
            .collect()
    }

    /// Columns on uniform margins.
    pub fn simulate_uniform<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let mut cols = vec![Vec::with_capacity(n); self.dim()];
        for _ in 0..n {
            for (block, &w) in self.blocks().iter().zip(&self.weights) {
                if rng.random::<f64>() < w {
                    let v = crate::distributions::open_uniform(rng);
                    block.iter().for_each(|&i| cols[i].push(v));
                } else {
                    block.iter().for_each(|&i| cols[i].push(crate::distributions::open_uniform(rng)));
                }
            }
        }
        cols
    }

    /// Columns on standard Gumbel margins.
    pub fn simulate_gumbel<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        self.simulate_uniform(n, rng)
            .into_iter()
            .map(|c| c.into_iter().map(|u| gumbel_quantile(u).expect("open level")).collect())
            .collect()
    }

    pub fn block_probability(&self, b: usize, phi: f64, c: &[f64]) -> f64 {
        let block = &self.blocks()[b];
        let levels: Vec<f64> = block.iter().map(|&i| (c[i] * phi).min(1.0)).collect();
        let w = self.weights[b];
        w * levels.iter().copied().fold(1.0, f64::min) + (1.0 - w) * levels.iter().product::<f64>()
    }

    /// Natural log of the joint probability over all blocks.
    pub fn log_joint_probability(&self, phi: f64, c: &[f64]) -> f64 {
        (0..self.sizes.len()).map(|b| self.block_probability(b, phi, c).ln()).sum()
    }
}
