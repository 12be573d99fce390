use serde::{Deserialize, Serialize};

use super::formula::{dot, DesignSpec, ModelFormula};
use super::quantreg::{ThresholdFit, RIDGE_GRID};
use crate::dataset::Dataset;
use crate::distributions::{EmpiricalDistribution, GpdParams};
use crate::numopt::linalg::inverse_spd;
use crate::numopt::{minimize_bfgs, MinimizeSettings};
use crate::{Error, Result};

pub const MIN_EXCEEDANCES: usize = 30;
/// Admissible range for the shape parameter at every training row.
pub const XI_BOUNDS: (f64, f64) = (-0.5, 1.0);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpdRegressionFit {
    pub formula: ModelFormula,
    pub threshold: ThresholdFit,
    pub sigma_design: DesignSpec,
    pub xi_design: DesignSpec,
    pub sigma_coeffs: Vec<f64>,
    pub xi_coeffs: Vec<f64>,
    pub log_link_sigma: bool,
    /// Unpenalised log-likelihood of the training exceedances.
    pub loglik: f64,
    pub n_exceedances: usize,
    pub ridge: f64,
    pub edf: f64,
    pub converged: bool,
    /// Training residuals `y − u(x)` at or below the threshold.
    pub body: EmpiricalDistribution,
}

impl GpdRegressionFit {
    /// Threshold and exceedance distribution at one covariate row.
    pub fn params_at(&self, lookup: impl Fn(&str) -> Option<f64> + Copy) -> Result<(f64, GpdParams)> {
        let u = self.threshold.predict_row(lookup);
        let sigma = dot(&self.sigma_design.row(lookup), &self.sigma_coeffs).exp();
        let xi = dot(&self.xi_design.row(lookup), &self.xi_coeffs);
        Ok((u, GpdParams::new(sigma, xi)?))
    }

    pub fn lambda(&self) -> f64 {
        self.threshold.lambda
    }

    pub fn n_coefficients(&self) -> usize {
        self.sigma_coeffs.len() + self.xi_coeffs.len()
    }
}

/// Exceedance data laid out for the likelihood.
pub(crate) struct Exceedances {
    pub excess: Vec<f64>,
    pub xs: Vec<f64>,
    pub xx: Vec<f64>,
    pub ps: usize,
    pub px: usize,
}

impl Exceedances {
    pub fn n(&self) -> usize {
        self.excess.len()
    }
}

/// GPD negative log-likelihood and gradient over `[β_σ, β_ξ]`, plus a ridge
/// term `½ Σ pen_j β_j²`. Infeasible points give `+∞`.
pub(crate) fn gpd_nll(theta: &[f64], ex: &Exceedances, pen: &[f64], grad: &mut [f64]) -> f64 {
    let (bs, bx) = theta.split_at(ex.ps);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut total = 0.0;
    for i in 0..ex.n() {
        let rs = &ex.xs[i * ex.ps..(i + 1) * ex.ps];
        let rx = &ex.xx[i * ex.px..(i + 1) * ex.px];
        let ls = dot(rs, bs);
        let xi = dot(rx, bx);
        if !(xi > XI_BOUNDS.0 && xi < XI_BOUNDS.1) || !ls.is_finite() {
            return f64::INFINITY;
        }
        let a = ex.excess[i] * (-ls).exp();
        let t = 1.0 + xi * a;
        if !(t > 0.0) {
            return f64::INFINITY;
        }
        let l1p = (xi * a).ln_1p();
        let (lratio, dxi) = if xi.abs() < 1e-7 {
            (a - 0.5 * xi * a * a, a - 0.5 * a * a + xi * (2.0 * a * a * a / 3.0 - a * a))
        } else {
            (l1p / xi, -l1p / (xi * xi) + (1.0 + 1.0 / xi) * a / t)
        };
        total += ls + l1p + lratio;
        let dls = 1.0 - (1.0 + xi) * a / t;
        for (g, v) in grad[..ex.ps].iter_mut().zip(rs) {
            *g += dls * v;
        }
        for (g, v) in grad[ex.ps..].iter_mut().zip(rx) {
            *g += dxi * v;
        }
    }
    for ((g, b), k) in grad.iter_mut().zip(theta).zip(pen) {
        total += 0.5 * k * b * b;
        *g += k * b;
    }
    total
}

pub(crate) fn hessian(theta: &[f64], ex: &Exceedances) -> Vec<f64> {
    let p = theta.len();
    let zero = vec![0.0; p];
    let mut h = vec![0.0; p * p];
    let mut gp = vec![0.0; p];
    let mut gm = vec![0.0; p];
    let mut t = theta.to_vec();
    for k in 0..p {
        let step = 1e-5 * theta[k].abs().max(1.0);
        t[k] = theta[k] + step;
        gpd_nll(&t, ex, &zero, &mut gp);
        t[k] = theta[k] - step;
        gpd_nll(&t, ex, &zero, &mut gm);
        t[k] = theta[k];
        for j in 0..p {
            h[j * p + k] = (gp[j] - gm[j]) / (2.0 * step);
        }
    }
    for j in 0..p {
        for k in 0..j {
            let v = 0.5 * (h[j * p + k] + h[k * p + j]);
            h[j * p + k] = v;
            h[k * p + j] = v;
        }
    }
    h
}

pub(crate) fn exceedances(
    data: &Dataset,
    formula: &ModelFormula,
    threshold: &ThresholdFit,
    sigma_design: &DesignSpec,
    xi_design: &DesignSpec,
) -> Result<(Exceedances, Vec<f64>)> {
    let rows = data.complete_rows(&[formula.response.as_str()])?;
    let col = data.column(&formula.response)?;
    let u = threshold.predict(data, &rows)?;
    let mut exc_rows = Vec::new();
    let mut excess = Vec::new();
    let mut below = Vec::new();
    for (k, &r) in rows.iter().enumerate() {
        let d = col[r].unwrap() - u[k];
        if d > 0.0 {
            exc_rows.push(r);
            excess.push(d);
        } else {
            below.push(d);
        }
    }
    let xs = sigma_design.matrix(data, &exc_rows)?;
    let xx = xi_design.matrix(data, &exc_rows)?;
    Ok((
        Exceedances { excess, xs, xx, ps: sigma_design.n_columns(), px: xi_design.n_columns() },
        below,
    ))
}

fn settings_for(n: usize) -> MinimizeSettings {
    MinimizeSettings {
        max_iterations: 1000,
        gradient_tol: 1e-7 * (1.0 + n as f64).sqrt(),
        f_tol: 1e-13,
        ..Default::default()
    }
}

/// Maximum-likelihood GPD regression for the excesses over a fitted
/// threshold. `σ(x) = exp(design·β_σ)`, `ξ(x) = design·β_ξ`.
pub fn fit_gpd_regression(data: &Dataset, formula: &ModelFormula, threshold: &ThresholdFit) -> Result<GpdRegressionFit> {
    formula.validate()?;
    if threshold.response != formula.response {
        return Err(Error::invalid("threshold was fitted to a different response"));
    }
    let rows = data.complete_rows(&[formula.response.as_str()])?;
    let sigma_design = DesignSpec::build(data, &formula.sigma, &rows)?;
    let xi_design = DesignSpec::build(data, &formula.xi, &rows)?;
    let (ex, below) = exceedances(data, formula, threshold, &sigma_design, &xi_design)?;
    if ex.n() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData { what: "threshold exceedances".into(), have: ex.n(), need: MIN_EXCEEDANCES });
    }
    let body = if below.is_empty() {
        EmpiricalDistribution::new(vec![0.0])?
    } else {
        EmpiricalDistribution::new(below)?
    };

    let (ps, px) = (ex.ps, ex.px);
    let p = ps + px;
    let mut start = vec![0.0; p];
    start[0] = (ex.excess.iter().sum::<f64>() / ex.n() as f64).ln();
    start[ps] = 0.1;

    let smooth: Vec<usize> = sigma_design
        .smooth_columns()
        .into_iter()
        .chain(xi_design.smooth_columns().into_iter().map(|j| j + ps))
        .collect();
    let settings = settings_for(ex.n());
    let n = ex.n() as f64;
    let zero = vec![0.0; p];

    let fit_with = |pen: &[f64], start: &[f64]| {
        minimize_bfgs(|th, g| gpd_nll(th, &ex, pen, g), start, &settings)
    };

    let (theta, ridge, edf, converged) = if smooth.is_empty() {
        let r = fit_with(&zero, &start)?;
        (r.argmin, 0.0, p as f64, r.converged)
    } else {
        let mut best: Option<(f64, Vec<f64>, f64, f64, bool)> = None;
        let mut warm = start.clone();
        for g in RIDGE_GRID {
            let kappa = g * n;
            let mut pen = vec![0.0; p];
            smooth.iter().for_each(|&j| pen[j] = kappa);
            let Ok(r) = fit_with(&pen, &warm) else { continue };
            warm = r.argmin.clone();
            let mut scratch = vec![0.0; p];
            let nll = gpd_nll(&r.argmin, &ex, &zero, &mut scratch);
            let edf = effective_df(&r.argmin, &ex, &pen).unwrap_or(p as f64);
            let bic = 2.0 * nll + edf * n.ln();
            if best.as_ref().is_none_or(|b| bic < b.0) {
                best = Some((bic, r.argmin, kappa, edf, r.converged));
            }
        }
        let (_, th, kappa, edf, conv) =
            best.ok_or_else(|| Error::NonFinite("GPD regression failed at every ridge weight".into()))?;
        (th, kappa, edf, conv)
    };

    let mut scratch = vec![0.0; p];
    let nll = gpd_nll(&theta, &ex, &zero, &mut scratch);
    if !nll.is_finite() {
        return Err(Error::NonFinite("GPD log-likelihood at the fitted coefficients".into()));
    }
    Ok(GpdRegressionFit {
        formula: formula.clone(),
        threshold: threshold.clone(),
        sigma_design,
        xi_design,
        sigma_coeffs: theta[..ps].to_vec(),
        xi_coeffs: theta[ps..].to_vec(),
        log_link_sigma: true,
        loglik: -nll,
        n_exceedances: ex.n(),
        ridge,
        edf,
        converged,
        body,
    })
}

fn effective_df(theta: &[f64], ex: &Exceedances, pen: &[f64]) -> Result<f64> {
    let p = theta.len();
    let h = nalgebra::DMatrix::from_row_slice(p, p, &hessian(theta, ex));
    let mut hp = h.clone();
    for j in 0..p {
        hp[(j, j)] += pen[j];
    }
    Ok((inverse_spd(&hp)? * h).trace())
}

/// `−2 loglik + p log(n_exceedances)` with `p` the number of GPD coefficients.
pub fn bic(fit: &GpdRegressionFit, data: &Dataset) -> Result<f64> {
    let p = fit.n_coefficients();
    if p == 0 {
        return Err(Error::invalid("model has no estimable coefficients"));
    }
    let (ex, _) = exceedances(data, &fit.formula, &fit.threshold, &fit.sigma_design, &fit.xi_design)?;
    if ex.n() == 0 {
        return Err(Error::InsufficientData { what: "threshold exceedances".into(), have: 0, need: 1 });
    }
    let theta: Vec<f64> = fit.sigma_coeffs.iter().chain(&fit.xi_coeffs).copied().collect();
    let mut g = vec![0.0; p];
    let nll = gpd_nll(&theta, &ex, &vec![0.0; p], &mut g);
    Ok(2.0 * nll + p as f64 * (ex.n() as f64).ln())
}
