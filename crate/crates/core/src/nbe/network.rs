//! DeepSets estimator `θ̂(y) = φ(mean_i ψ(y_i))` with hand-written gradients.
//!
//! ψ maps a scalar to 48 features through two ReLU layers; the first layer
//! has one weight per unit and a single shared bias. φ is a 48→48 ReLU
//! layer followed by a linear 48→1 output. Because ψ takes a scalar, it is
//! piecewise linear in that scalar, so the mean of ψ over a set is computed
//! exactly from prefix sums of the sorted inputs instead of per element.
//! Sorting also makes the output bit-identical under input permutations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const WIDTH: usize = 48;

// flat parameter layout
const W1: usize = 0;
const B1: usize = W1 + WIDTH;
const W2: usize = B1 + 1;
const B2: usize = W2 + WIDTH * WIDTH;
const W3: usize = B2 + WIDTH;
const B3: usize = W3 + WIDTH * WIDTH;
const W4: usize = B3 + WIDTH;
const B4: usize = W4 + WIDTH;
pub const N_PARAMS: usize = B4 + 1;

/// Layer shapes `(inputs, outputs)` in storage order.
pub const LAYER_SHAPES: [(usize, usize); 4] = [(1, WIDTH), (WIDTH, WIDTH), (WIDTH, WIDTH), (WIDTH, 1)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepSetsNetwork {
    pub params: Vec<f64>,
    /// Input `(mean, sd)`; `None` until the network has been trained.
    pub standardisation: Option<(f64, f64)>,
}

/// A replicate set, standardised and sorted, with prefix sums.
#[derive(Debug, Clone)]
pub struct PreparedSet {
    z: Vec<f64>,
    prefix: Vec<f64>,
}

impl PreparedSet {
    pub fn new(values: &[f64], standardisation: (f64, f64)) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty replicate set"));
        }
        let (mean, sd) = standardisation;
        let mut z: Vec<f64> = values.iter().map(|v| (v - mean) / sd).collect();
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("replicate set contains non-finite values".into()));
        }
        z.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(z.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in &z {
            acc += v;
            prefix.push(acc);
        }
        Ok(Self { z, prefix })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    fn range_sum(&self, lo: usize, hi: usize) -> f64 {
        self.prefix[hi] - self.prefix[lo]
    }
}

/// Intermediate quantities kept for the backward pass.
pub(crate) struct Cache {
    /// Layer-1 units with non-zero weight, ordered by breakpoint.
    order: Vec<usize>,
    /// Per interval and layer-2 unit: count and input sum over the samples
    /// where that unit is active, laid out `[interval][unit]`.
    s0: Vec<f64>,
    s1: Vec<f64>,
    m: f64,
    agg: [f64; WIDTH],
    h3: [f64; WIDTH],
}

impl DeepSetsNetwork {
    pub fn zeros() -> Self {
        Self { params: vec![0.0; N_PARAMS], standardisation: Some((0.0, 1.0)) }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut params = vec![0.0; N_PARAMS];
        let mut fill = |start: usize, n_in: usize, n_out: usize| {
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for p in &mut params[start..start + n_in * n_out] {
                *p = rng.random_range(-limit..limit);
            }
        };
        fill(W1, 1, WIDTH);
        fill(W2, WIDTH, WIDTH);
        fill(W3, WIDTH, WIDTH);
        fill(W4, WIDTH, 1);
        Self { params, standardisation: None }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn output_bias_mut(&mut self) -> &mut f64 {
        &mut self.params[B4]
    }

    pub fn is_ready(&self) -> bool {
        self.standardisation.is_some()
    }

    pub fn prepare(&self, values: &[f64]) -> Result<PreparedSet> {
        let s = self
            .standardisation
            .ok_or_else(|| Error::NotReady("network has no input standardisation; train it first".into()))?;
        PreparedSet::new(values, s)
    }

    /// Estimate for a raw replicate set.
    pub fn forward(&self, values: &[f64]) -> Result<f64> {
        Ok(self.forward_prepared(&self.prepare(values)?).0)
    }

    pub(crate) fn forward_prepared(&self, set: &PreparedSet) -> (f64, Cache) {
        let p = &self.params;
        let m = set.len();
        let b1 = p[B1];
        let w1 = &p[W1..B1];

        let mut order: Vec<usize> = (0..WIDTH).filter(|&j| w1[j] != 0.0).collect();
        let bp = |j: usize| -b1 / w1[j];
        order.sort_by(|&a, &b| bp(a).total_cmp(&bp(b)).then(a.cmp(&b)));
        let n_int = order.len() + 1;
        // constant units (zero weight) are active everywhere when b1 > 0
        let const_active = b1 > 0.0;

        let mut s0 = vec![0.0; n_int * WIDTH];
        let mut s1 = vec![0.0; n_int * WIDTH];
        let mut agg = [0.0; WIDTH];
        let mut active = [false; WIDTH];
        let mut alpha = [0.0; WIDTH];
        let mut beta = [0.0; WIDTH];
        let mut lo = 0;
        for r in 0..n_int {
            let hi = if r == order.len() { m } else { set.z.partition_point(|&v| v < bp(order[r])) };
            for j in 0..WIDTH {
                active[j] = if w1[j] == 0.0 { const_active } else { false };
            }
            for (s, &j) in order.iter().enumerate() {
                active[j] = if w1[j] > 0.0 { s < r } else { s >= r };
            }
            if hi > lo {
                alpha.fill(0.0);
                beta.copy_from_slice(&p[B2..B2 + WIDTH]);
                for j in (0..WIDTH).filter(|&j| active[j]) {
                    let (wj, bj) = (w1[j], b1);
                    for k in 0..WIDTH {
                        let wk = p[W2 + k * WIDTH + j];
                        alpha[k] += wk * wj;
                        beta[k] += wk * bj;
                    }
                }
                let zs = &set.z[lo..hi];
                for k in 0..WIDTH {
                    let (a, b) = (alpha[k], beta[k]);
                    let (start, end) = if a > 0.0 {
                        let cut = -b / a;
                        (lo + zs.partition_point(|&v| v <= cut), hi)
                    } else if a < 0.0 {
                        let cut = -b / a;
                        (lo, lo + zs.partition_point(|&v| v < cut))
                    } else if b > 0.0 {
                        (lo, hi)
                    } else {
                        (lo, lo)
                    };
                    if end > start {
                        let c0 = (end - start) as f64;
                        let c1 = set.range_sum(start, end);
                        s0[r * WIDTH + k] = c0;
                        s1[r * WIDTH + k] = c1;
                        agg[k] += a * c1 + b * c0;
                    }
                }
            }
            lo = hi;
        }
        let mf = m as f64;
        for a in agg.iter_mut() {
            *a /= mf;
        }

        let mut h3 = [0.0; WIDTH];
        let mut out = p[B4];
        for k in 0..WIDTH {
            let row = &p[W3 + k * WIDTH..W3 + (k + 1) * WIDTH];
            let v = p[B3 + k] + row.iter().zip(&agg).map(|(w, a)| w * a).sum::<f64>();
            h3[k] = v.max(0.0);
            out += p[W4 + k] * h3[k];
        }
        (out, Cache { order, s0, s1, m: mf, agg, h3 })
    }

    /// Accumulates `d_out · ∂output/∂params` into `grad`.
    pub(crate) fn backward(&self, cache: &Cache, d_out: f64, grad: &mut [f64]) {
        let p = &self.params;
        grad[B4] += d_out;
        let mut g_agg = [0.0; WIDTH];
        for k in 0..WIDTH {
            grad[W4 + k] += d_out * cache.h3[k];
            if cache.h3[k] <= 0.0 {
                continue;
            }
            let g = d_out * p[W4 + k];
            grad[B3 + k] += g;
            for i in 0..WIDTH {
                grad[W3 + k * WIDTH + i] += g * cache.agg[i];
                g_agg[i] += g * p[W3 + k * WIDTH + i];
            }
        }

        let w1 = &p[W1..B1];
        let b1 = p[B1];
        let const_active = b1 > 0.0;
        let n_int = cache.order.len() + 1;
        let mut active = [false; WIDTH];
        for r in 0..n_int {
            for j in 0..WIDTH {
                active[j] = if w1[j] == 0.0 { const_active } else { false };
            }
            for (s, &j) in cache.order.iter().enumerate() {
                active[j] = if w1[j] > 0.0 { s < r } else { s >= r };
            }
            for k in 0..WIDTH {
                let c0 = g_agg[k] * cache.s0[r * WIDTH + k] / cache.m;
                let c1 = g_agg[k] * cache.s1[r * WIDTH + k] / cache.m;
                if c0 == 0.0 && c1 == 0.0 {
                    continue;
                }
                grad[B2 + k] += c0;
                for j in (0..WIDTH).filter(|&j| active[j]) {
                    let wk = p[W2 + k * WIDTH + j];
                    grad[W2 + k * WIDTH + j] += w1[j] * c1 + b1 * c0;
                    grad[W1 + j] += wk * c1;
                    grad[B1] += wk * c0;
                }
            }
        }
    }
}

/// Straightforward per-element evaluation, used to cross-check the
/// piecewise-linear aggregation.
#[cfg(test)]
pub(crate) fn forward_naive(net: &DeepSetsNetwork, values: &[f64]) -> f64 {
    let p = &net.params;
    let (mean, sd) = net.standardisation.unwrap();
    let mut agg = [0.0; WIDTH];
    for v in values {
        let z = (v - mean) / sd;
        let h1: Vec<f64> = (0..WIDTH).map(|j| (p[W1 + j] * z + p[B1]).max(0.0)).collect();
        for k in 0..WIDTH {
            let s: f64 = p[B2 + k] + (0..WIDTH).map(|j| p[W2 + k * WIDTH + j] * h1[j]).sum::<f64>();
            agg[k] += s.max(0.0);
        }
    }
    agg.iter_mut().for_each(|a| *a /= values.len() as f64);
    let mut out = p[B4];
    for k in 0..WIDTH {
        let s: f64 = p[B3 + k] + (0..WIDTH).map(|i| p[W3 + k * WIDTH + i] * agg[i]).sum::<f64>();
        out += p[W4 + k] * s.max(0.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numopt::rng::seeded;

    fn random_net(seed: u64) -> DeepSetsNetwork {
        let mut rng = seeded(seed);
        let mut net = DeepSetsNetwork::glorot(&mut rng);
        // non-zero biases so every code path is exercised
        for i in [B1].into_iter().chain(B2..B2 + WIDTH).chain(B3..B3 + WIDTH) {
            net.params[i] = rng.random_range(-0.5..0.5);
        }
        net.standardisation = Some((1.0, 2.0));
        net
    }

    #[test]
    fn parameter_count() {
        assert_eq!(N_PARAMS, 4802);
        assert_eq!(DeepSetsNetwork::zeros().n_params(), 4802);
    }

    #[test]
    fn matches_naive_evaluation() {
        let mut rng = seeded(2);
        for seed in 0..5 {
            let net = random_net(seed);
            let y: Vec<f64> = (0..257).map(|_| rng.random_range(-6.0..9.0)).collect();
            let fast = net.forward(&y).unwrap();
            let slow = forward_naive(&net, &y);
            assert!((fast - slow).abs() < 1e-11 * (1.0 + slow.abs()), "{fast} vs {slow}");
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = DeepSetsNetwork::zeros();
        assert_eq!(net.forward(&[1.0, 5.0, -3.0]).unwrap(), 0.0);
    }

    #[test]
    fn single_replicate_and_empty() {
        let net = random_net(9);
        assert!((net.forward(&[0.7]).unwrap() - forward_naive(&net, &[0.7])).abs() < 1e-12);
        assert!(net.forward(&[]).is_err());
        let mut untrained = net.clone();
        untrained.standardisation = None;
        assert!(matches!(untrained.forward(&[1.0]), Err(Error::NotReady(_))));
    }
}
