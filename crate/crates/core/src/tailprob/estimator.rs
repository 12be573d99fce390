use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MIN_BELOW: usize = 50;
/// Smallest admissible `η`.
pub const ETA_MIN: f64 = 1e-3;

/// Per row, `maxᵢ (1 − Uᵢ)/cᵢ`. `columns` hold uniform margins.
pub fn u_max(columns: &[Vec<f64>], c: &[f64]) -> Result<Vec<f64>> {
    if columns.is_empty() {
        return Err(Error::invalid("u_max needs at least one column"));
    }
    if c.len() != columns.len() {
        return Err(Error::invalid(format!("{} weights for {} columns", c.len(), columns.len())));
    }
    if let Some(bad) = c.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::domain(format!("weights must be positive, got {bad}")));
    }
    let n = columns[0].len();
    if columns.iter().any(|col| col.len() != n) {
        return Err(Error::invalid("columns differ in length"));
    }
    if columns.iter().flatten().any(|&u| !(u > 0.0 && u < 1.0)) {
        return Err(Error::domain("uniform values must lie in (0, 1)"));
    }
    Ok((0..n)
        .map(|t| columns.iter().zip(c).map(|(col, ci)| (1.0 - col[t]) / ci).fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

/// Working model for `U_max | U_max < φ*`: distribution function
/// `k₁φ + k₂φ^{1/η}` on `(0, φ*]` with `k₂ = (1 − k₁φ*)/φ*^{1/η}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModelFit {
    pub k1: f64,
    pub eta: f64,
    pub phi_star: f64,
    /// Fraction of the sample below `φ*`.
    pub p_phi_star_hat: f64,
    pub n_below: usize,
    pub loglik: f64,
    /// The maximum sits on an edge of the parameter space.
    pub boundary: bool,
}

impl TailModelFit {
    pub fn k2(&self) -> f64 {
        (1.0 - self.k1 * self.phi_star) / self.phi_star.powf(1.0 / self.eta)
    }

    /// `Pr(U_max < φ | U_max < φ*)`.
    pub fn conditional_cdf(&self, phi: f64) -> f64 {
        if phi >= self.phi_star {
            return 1.0;
        }
        let r = (phi / self.phi_star).max(0.0);
        self.k1 * phi + (1.0 - self.k1 * self.phi_star) * r.powf(1.0 / self.eta)
    }

    pub fn conditional_density(&self, phi: f64) -> f64 {
        self.k1 + (1.0 - self.k1 * self.phi_star) * log_power_term(phi, self.phi_star, self.eta).exp()
    }
}

/// `ln{φ*^{−1/η} φ^{1/η−1} / η}`, the density of the power component.
fn log_power_term(phi: f64, phi_star: f64, eta: f64) -> f64 {
    (phi / phi_star).ln() / eta - phi.ln() - eta.ln()
}

struct Profile<'a> {
    ln_phi_ratio: &'a [f64],
    ln_phi: &'a [f64],
    phi_star: f64,
}

impl Profile<'_> {
    /// Density `A + k₁B` of each point at this `η`.
    fn terms(&self, eta: f64) -> (Vec<f64>, Vec<f64>) {
        let a: Vec<f64> =
            self.ln_phi_ratio.iter().zip(self.ln_phi).map(|(r, p)| (r / eta - p - eta.ln()).exp()).collect();
        let b = a.iter().map(|v| 1.0 - self.phi_star * v).collect();
        (a, b)
    }

    /// Maximises the concave `Σ ln(A + k₁B)` over `k₁ ∈ [0, 1/φ*]`.
    fn best_k1(&self, eta: f64) -> (f64, f64) {
        let (a, b) = self.terms(eta);
        let hi = 1.0 / self.phi_star;
        let slope = |k: f64| a.iter().zip(&b).map(|(ai, bi)| bi / (ai + k * bi)).sum::<f64>();
        let ll = |k: f64| a.iter().zip(&b).map(|(ai, bi)| (ai + k * bi).ln()).sum::<f64>();
        let k = if !(slope(0.0) > 0.0) {
            0.0
        } else if slope(hi) >= 0.0 {
            hi
        } else {
            let (mut lo, mut up) = (0.0, hi);
            for _ in 0..60 {
                let mid = 0.5 * (lo + up);
                if slope(mid) > 0.0 {
                    lo = mid;
                } else {
                    up = mid;
                }
                if up - lo <= 1e-12 * hi {
                    break;
                }
            }
            0.5 * (lo + up)
        };
        (k, ll(k))
    }
}

/// Maximum likelihood for `(k₁, η)` from the values below `φ*`. The
/// likelihood is concave in `k₁` for fixed `η`, so `k₁` is profiled out
/// and `η` found by a grid on `log(1/η)` refined by golden section.
pub fn fit_tail_model(umax: &[f64], phi_star: f64) -> Result<TailModelFit> {
    if !(phi_star > 0.0 && phi_star < 1.0) {
        return Err(Error::domain(format!("φ* must lie in (0, 1), got {phi_star}")));
    }
    let below: Vec<f64> = umax.iter().copied().filter(|&v| v < phi_star).collect();
    if below.len() < MIN_BELOW {
        return Err(Error::InsufficientData {
            what: format!("values below φ* = {phi_star}"),
            have: below.len(),
            need: MIN_BELOW,
        });
    }
    if below.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::domain("U_max values must be positive"));
    }
    let ln_phi: Vec<f64> = below.iter().map(|v| v.ln()).collect();
    let ln_phi_ratio: Vec<f64> = ln_phi.iter().map(|v| v - phi_star.ln()).collect();
    let prof = Profile { ln_phi_ratio: &ln_phi_ratio, ln_phi: &ln_phi, phi_star };

    // s = ln(1/η) ∈ [0, ln(1/ETA_MIN)]
    let s_max = (1.0 / ETA_MIN).ln();
    let eval = |s: f64| {
        let eta = (-s).exp();
        let (k, ll) = prof.best_k1(eta);
        (if ll.is_finite() { ll } else { f64::NEG_INFINITY }, k)
    };
    let grid = 48;
    let h = s_max / grid as f64;
    let scores: Vec<(f64, f64)> = (0..=grid).map(|g| eval(g as f64 * h)).collect();
    // first grid maximum; ties keep the larger η
    let g_best = (0..=grid).fold(0, |best, g| if scores[g].0 > scores[best].0 { g } else { best });
    let (mut lo, mut hi) = ((g_best as f64 - 1.0).max(0.0) * h, ((g_best + 1) as f64).min(grid as f64) * h);
    let phi_g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi_g * (hi - lo);
    let mut x2 = lo + phi_g * (hi - lo);
    let (mut f1, mut f2) = (eval(x1).0, eval(x2).0);
    for _ in 0..40 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi_g * (hi - lo);
            f1 = eval(x1).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi_g * (hi - lo);
            f2 = eval(x2).0;
        }
    }
    let mut s = 0.5 * (lo + hi);
    let (mut ll, mut k1) = eval(s);
    if scores[g_best].0 > ll {
        s = g_best as f64 * h;
        (ll, k1) = scores[g_best];
    }
    if !ll.is_finite() {
        return Err(Error::NonFinite("tail model likelihood is not finite anywhere".into()));
    }
    let eta = (-s).exp();
    let hi_k = 1.0 / phi_star;
    let boundary = s <= 1e-9 || s >= s_max - 1e-9 || k1 <= 0.0 || k1 >= hi_k;
    Ok(TailModelFit {
        k1,
        eta,
        phi_star,
        p_phi_star_hat: below.len() as f64 / umax.len() as f64,
        n_below: below.len(),
        loglik: ll,
        boundary,
    })
}

/// `p̂(φ) = {k₁φ + k₂φ^{1/η}}·p̂(φ*)` for `0 < φ < φ*`.
pub fn estimate_p(fit: &TailModelFit, phi: f64) -> Result<f64> {
    if !(phi > 0.0 && phi < fit.phi_star) {
        return Err(Error::domain(format!("φ must lie in (0, φ* = {}), got {phi}", fit.phi_star)));
    }
    Ok(fit.conditional_cdf(phi) * fit.p_phi_star_hat)
}

/// Natural log of [`estimate_p`], kept accurate when the estimate is tiny.
pub fn log_estimate_p(fit: &TailModelFit, phi: f64) -> Result<f64> {
    if !(phi > 0.0 && phi < fit.phi_star) {
        return Err(Error::domain(format!("φ must lie in (0, φ* = {}), got {phi}", fit.phi_star)));
    }
    let lin = fit.k1 * phi;
    let ln_pow = ((1.0 - fit.k1 * fit.phi_star).max(0.0)).ln() + (phi / fit.phi_star).ln() / fit.eta;
    let ln_cdf = if lin > 0.0 { log_add(lin.ln(), ln_pow) } else { ln_pow };
    Ok(ln_cdf + fit.p_phi_star_hat.ln())
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub phi_star: f64,
    pub log_p: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityScan {
    pub rows: Vec<ScanRow>,
    /// Smallest `φ*` whose estimate stays within the tolerance of every
    /// estimate at larger `φ*`.
    pub suggestion: Option<f64>,
    pub tolerance: f64,
}

impl StabilityScan {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["phi_star", "log_p", "error"])?;
        for r in &self.rows {
            w.write_record([
                r.phi_star.to_string(),
                r.log_p.map(|v| v.to_string()).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Refits at each `φ*` of the grid and reports the log of the product of
/// the per-block estimates at `phi_target`. A single sample is a one-block
/// product.
pub fn stability_scan(umax_blocks: &[Vec<f64>], phi_grid: &[f64], phi_target: f64, tolerance: f64) -> Result<StabilityScan> {
    if umax_blocks.is_empty() || phi_grid.is_empty() {
        return Err(Error::invalid("stability scan needs samples and a grid"));
    }
    let mut grid = phi_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    if grid[0] <= phi_target {
        return Err(Error::domain(format!("every grid value must exceed the target φ = {phi_target}")));
    }
    let rows: Vec<ScanRow> = grid
        .par_iter()
        .map(|&ps| {
            let r: Result<f64> = umax_blocks
                .iter()
                .map(|u| fit_tail_model(u, ps).and_then(|f| log_estimate_p(&f, phi_target)))
                .sum();
            match r {
                Ok(v) => ScanRow { phi_star: ps, log_p: Some(v), error: None },
                Err(e) => ScanRow { phi_star: ps, log_p: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let suggestion = (0..rows.len())
        .find(|&a| {
            let Some(va) = rows[a].log_p else { return false };
            rows[a..].iter().all(|r| r.log_p.is_some_and(|v| (v - va).abs() <= tolerance))
        })
        .map(|a| rows[a].phi_star);
    Ok(StabilityScan { rows, suggestion, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_maximum_examples() {
        let cols = vec![vec![0.999, 0.3], vec![0.5, 0.9]];
        let m = u_max(&cols, &[1.0, 12.0]).unwrap();
        assert!((m[0] - 0.5 / 12.0).abs() < 1e-15);
        assert!((m[1] - 0.7).abs() < 1e-15);
        let single = u_max(&cols[..1], &[4.0]).unwrap();
        assert!((single[0] - 0.001 / 4.0).abs() < 1e-15);
        assert!(u_max(&cols, &[1.0, 0.0]).is_err());
        assert!(u_max(&[vec![1.0]], &[1.0]).is_err());
    }

    #[test]
    fn unweighted_maximum_matches_joint_exceedance() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 + 0.5) / (1u64 << 53) as f64
        };
        let cols: Vec<Vec<f64>> = (0..4).map(|_| (0..500).map(|_| next()).collect()).collect();
        let m = u_max(&cols, &[1.0; 4]).unwrap();
        for phi in [0.1, 0.3, 0.6, 0.9] {
            for t in 0..500 {
                assert_eq!(m[t] < phi, cols.iter().all(|c| c[t] > 1.0 - phi));
            }
        }
    }

    #[test]
    fn cdf_is_one_at_phi_star_and_density_nonnegative() {
        let f = TailModelFit { k1: 1.3, eta: 0.4, phi_star: 0.3, p_phi_star_hat: 0.05, n_below: 100, loglik: 0.0, boundary: false };
        assert!((f.conditional_cdf(0.3 - 1e-15) - 1.0).abs() < 1e-12);
        for k in 1..100 {
            assert!(f.conditional_density(0.003 * k as f64) >= 0.0);
        }
        assert!((estimate_p(&f, 0.3 - 1e-12).unwrap() - 0.05).abs() < 1e-12);
        assert!(estimate_p(&f, 0.3).is_err());
        let lp = log_estimate_p(&f, 0.01).unwrap();
        assert!((lp - estimate_p(&f, 0.01).unwrap().ln()).abs() < 1e-12);
    }

    #[test]
    fn single_point_scan() {
        let u: Vec<f64> = (1..=1000).map(|k| k as f64 / 1001.0).collect();
        let s = stability_scan(&[u], &[0.2], 0.01, 0.5).unwrap();
        assert_eq!(s.rows.len(), 1);
        assert_eq!(s.suggestion, Some(0.2));
    }
}
