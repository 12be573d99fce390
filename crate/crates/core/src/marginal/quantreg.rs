use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::formula::{dot, DesignSpec, ModelFormula};
use crate::dataset::Dataset;
use crate::numopt::linalg::{collinear_columns, solve_spd};
use crate::stats::quantile;
use crate::{Error, Result};

/// Minimum rows with an observed response for a threshold fit.
pub const MIN_THRESHOLD_ROWS: usize = 50;

/// Ridge multipliers (per observation) tried for smooth threshold terms.
pub(crate) const RIDGE_GRID: [f64; 5] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub response: String,
    pub lambda: f64,
    pub coefficients: Vec<f64>,
    pub column_names: Vec<String>,
    pub design: DesignSpec,
    /// Ridge weight on smooth columns (0 when there are none).
    pub ridge: f64,
}

impl ThresholdFit {
    /// A known constant threshold `u` at level `lambda`.
    pub fn constant(response: &str, lambda: f64, u: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            response: response.into(),
            lambda,
            coefficients: vec![u],
            column_names: vec!["(Intercept)".into()],
            design: DesignSpec::intercept_only(),
            ridge: 0.0,
        })
    }

    pub fn predict_row(&self, lookup: impl Fn(&str) -> Option<f64>) -> f64 {
        dot(&self.design.row(lookup), &self.coefficients)
    }

    pub fn predict(&self, data: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
        let p = self.design.n_columns();
        let x = self.design.matrix(data, rows)?;
        Ok(x.chunks(p).map(|r| dot(r, &self.coefficients)).collect())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 0.9999) {
        return Err(Error::domain(format!("threshold level {lambda} outside (0, 0.9999)")));
    }
    Ok(())
}

/// Additive quantile regression for the level-`lambda` threshold, using the
/// `threshold` terms of the formula.
pub fn fit_threshold(data: &Dataset, formula: &ModelFormula, lambda: f64) -> Result<ThresholdFit> {
    formula.validate()?;
    check_lambda(lambda)?;
    let rows = data.complete_rows(&[formula.response.as_str()])?;
    if rows.len() < MIN_THRESHOLD_ROWS {
        return Err(Error::InsufficientData {
            what: "rows with an observed response".into(),
            have: rows.len(),
            need: MIN_THRESHOLD_ROWS,
        });
    }
    let col = data.column(&formula.response)?;
    let y: Vec<f64> = rows.iter().map(|&r| col[r].unwrap()).collect();
    let design = DesignSpec::build(data, &formula.threshold, &rows)?;
    let p = design.n_columns();
    let x = design.matrix(data, &rows)?;
    let names = design.column_names();

    let columns: Vec<Vec<f64>> = (0..p).map(|j| x.chunks(p).map(|r| r[j]).collect()).collect();
    let bad = collinear_columns(&columns, 1e-9);
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad.into_iter().map(|j| names[j].clone()).collect() });
    }

    let iqr = quantile(&y, 0.75) - quantile(&y, 0.25);
    let h = if iqr > 0.0 { 1e-3 * iqr } else { 1e-9 * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()))) };
    let smooth = design.smooth_columns();
    let n = y.len() as f64;

    let (coefficients, ridge) = if smooth.is_empty() {
        (solve_pinball(&x, &y, p, lambda, h, &vec![0.0; p], None).beta, 0.0)
    } else {
        let mut best: Option<(f64, Vec<f64>, f64)> = None;
        let mut warm = None;
        for g in RIDGE_GRID {
            let kappa = g * n;
            let mut pen = vec![0.0; p];
            smooth.iter().for_each(|&j| pen[j] = kappa);
            let sol = solve_pinball(&x, &y, p, lambda, h, &pen, warm.clone());
            // Schwarz criterion for quantile regression
            let sic = (sol.loss / n).ln() + sol.edf * n.ln() / (2.0 * n);
            warm = Some(sol.beta.clone());
            if best.as_ref().is_none_or(|b| sic < b.0) {
                best = Some((sic, sol.beta, kappa));
            }
        }
        let (_, beta, kappa) = best.unwrap();
        (beta, kappa)
    };

    Ok(ThresholdFit {
        response: formula.response.clone(),
        lambda,
        coefficients,
        column_names: names,
        design,
        ridge,
    })
}

pub(crate) struct PinballSolution {
    pub beta: Vec<f64>,
    /// Unsmoothed pinball loss at the solution.
    pub loss: f64,
    pub edf: f64,
}

fn smoothed_loss(r: f64, lambda: f64, h: f64) -> f64 {
    let a = r.abs();
    let huber = if a <= h { r * r / (2.0 * h) } else { a - 0.5 * h };
    0.5 * huber + (lambda - 0.5) * r
}

fn pinball(r: f64, lambda: f64) -> f64 {
    if r >= 0.0 {
        lambda * r
    } else {
        (lambda - 1.0) * r
    }
}

/// Minimises the Huber-smoothed pinball loss plus a diagonal ridge by
/// majorise–minimise reweighted least squares. `x` is row-major `n × p`.
pub(crate) fn solve_pinball(
    x: &[f64],
    y: &[f64],
    p: usize,
    lambda: f64,
    h: f64,
    penalty: &[f64],
    start: Option<Vec<f64>>,
) -> PinballSolution {
    let n = y.len();
    let mut beta = start.unwrap_or_else(|| {
        // least squares start, shifted to the right quantile of residuals
        let mut b = weighted_solve(x, y, p, &vec![1.0; n], penalty, 0.0).unwrap_or_else(|_| vec![0.0; p]);
        let r: Vec<f64> = y.iter().zip(x.chunks(p)).map(|(yi, xi)| yi - dot(xi, &b)).collect();
        b[0] += quantile(&r, lambda);
        b
    });
    let objective = |b: &[f64]| -> f64 {
        let fit: f64 = y.iter().zip(x.chunks(p)).map(|(yi, xi)| smoothed_loss(yi - dot(xi, b), lambda, h)).sum();
        fit + 0.5 * b.iter().zip(penalty).map(|(v, k)| k * v * v).sum::<f64>()
    };
    let mut obj = objective(&beta);
    let mut w = vec![0.0; n];
    for _ in 0..2000 {
        for (wi, (yi, xi)) in w.iter_mut().zip(y.iter().zip(x.chunks(p))) {
            *wi = 1.0 / (2.0 * (yi - dot(xi, &beta)).abs().max(h));
        }
        let Ok(next) = weighted_solve(x, y, p, &w, penalty, lambda - 0.5) else {
            break;
        };
        let next_obj = objective(&next);
        if !(next_obj <= obj) {
            break;
        }
        let step = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = 1.0 + beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rel = (obj - next_obj) / obj.abs().max(1e-300);
        beta = next;
        obj = next_obj;
        if step <= 1e-10 * scale || rel < 1e-13 {
            break;
        }
    }
    for (wi, (yi, xi)) in w.iter_mut().zip(y.iter().zip(x.chunks(p))) {
        *wi = 1.0 / (2.0 * (yi - dot(xi, &beta)).abs().max(h));
    }
    let edf = effective_df(x, p, &w, penalty).unwrap_or(p as f64);
    let loss = y.iter().zip(x.chunks(p)).map(|(yi, xi)| pinball(yi - dot(xi, &beta), lambda)).sum();
    PinballSolution { beta, loss, edf }
}

fn gram(x: &[f64], p: usize, w: &[f64], penalty: &[f64]) -> DMatrix<f64> {
    let mut a = DMatrix::<f64>::zeros(p, p);
    for (xi, &wi) in x.chunks(p).zip(w) {
        for j in 0..p {
            let v = wi * xi[j];
            for k in 0..=j {
                a[(j, k)] += v * xi[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[(k, j)] = a[(j, k)];
        }
        a[(j, j)] += penalty[j];
    }
    a
}

/// Solves `(X'WX + P) b = X'W y + shift · X'1`.
fn weighted_solve(x: &[f64], y: &[f64], p: usize, w: &[f64], penalty: &[f64], shift: f64) -> Result<Vec<f64>> {
    let a = gram(x, p, w, penalty);
    let mut rhs = DVector::<f64>::zeros(p);
    for ((xi, &wi), &yi) in x.chunks(p).zip(w).zip(y) {
        for j in 0..p {
            rhs[j] += xi[j] * (wi * yi + shift);
        }
    }
    let b = solve_spd(&a, &rhs)?;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quantile regression step".into()));
    }
    Ok(b.iter().copied().collect())
}

fn effective_df(x: &[f64], p: usize, w: &[f64], penalty: &[f64]) -> Result<f64> {
    let h = gram(x, p, w, &vec![0.0; p]);
    let hp = gram(x, p, w, penalty);
    let inv = crate::numopt::linalg::inverse_spd(&hp)?;
    Ok((inv * h).trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::Term;
    use crate::numopt::rng::seeded;
    use rand::Rng;

    #[test]
    fn median_of_intercept_only() {
        let y: Vec<f64> = (0..101).map(|i| ((i * 37) % 101) as f64).collect();
        let d = Dataset::from_complete(&["y"], vec![y]).unwrap();
        let fit = fit_threshold(&d, &ModelFormula::intercept_only("y"), 0.5).unwrap();
        assert!((fit.coefficients[0] - 50.0).abs() < 0.1, "{:?}", fit.coefficients);
    }

    #[test]
    fn rank_deficiency_lists_columns() {
        let mut rng = seeded(1);
        let x: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let x2: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random::<f64>()).collect();
        let d = Dataset::from_complete(&["y", "a", "b"], vec![y, x, x2]).unwrap();
        let f = ModelFormula {
            response: "y".into(),
            threshold: vec![Term::linear("a"), Term::linear("b")],
            sigma: vec![],
            xi: vec![],
        };
        match fit_threshold(&d, &f, 0.5) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["b".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let d = Dataset::from_complete(&["y"], vec![vec![1.0; 20]]).unwrap();
        assert!(matches!(
            fit_threshold(&d, &ModelFormula::intercept_only("y"), 0.5),
            Err(Error::InsufficientData { .. })
        ));
    }
}
