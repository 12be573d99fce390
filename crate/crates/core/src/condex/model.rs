use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distributions::special::{normal_pdf, normal_quantile};
use crate::distributions::{gumbel_to_laplace, DeltaLaplaceParams};
use crate::numopt::{minimize_bfgs, MinimizeSettings};
use crate::stats::{correlation, mean, std_dev};
use crate::{Error, Result};

pub const MIN_EXCEEDANCES: usize = 30;

/// Three responses on standard Gumbel margins with a shared covariate
/// matrix (row-major, `n × l`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondExData {
    pub rows: Vec<[f64; 3]>,
    pub covariates: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
}

impl CondExData {
    pub fn new(rows: Vec<[f64; 3]>, covariates: Vec<Vec<f64>>, covariate_names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("no rows"));
        }
        if covariates.len() != rows.len() {
            return Err(Error::invalid(format!(
                "{} covariate rows for {} response rows",
                covariates.len(),
                rows.len()
            )));
        }
        let l = covariate_names.len();
        if let Some(t) = covariates.iter().position(|c| c.len() != l) {
            return Err(Error::invalid(format!("covariate row {t} has the wrong length (expected {l})")));
        }
        if rows.iter().flatten().chain(covariates.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("condex data contain a non-finite value".into()));
        }
        Ok(Self { rows, covariates, covariate_names })
    }

    /// Responses without covariates.
    pub fn without_covariates(rows: Vec<[f64; 3]>) -> Result<Self> {
        let n = rows.len();
        Self::new(rows, vec![vec![]; n], vec![])
    }

    /// Complete rows of the named columns of a dataset.
    pub fn from_dataset(data: &Dataset, responses: [&str; 3], covariates: &[&str]) -> Result<Self> {
        let mut names: Vec<&str> = responses.to_vec();
        names.extend_from_slice(covariates);
        let rows_idx = data.complete_rows(&names)?;
        let cols: Vec<&[Option<f64>]> = names.iter().map(|c| data.column(c)).collect::<Result<_>>()?;
        let get = |c: usize, r: usize| cols[c][r].expect("complete row");
        let rows = rows_idx.iter().map(|&r| [get(0, r), get(1, r), get(2, r)]).collect();
        let cov = rows_idx.iter().map(|&r| (3..names.len()).map(|c| get(c, r)).collect()).collect();
        Self::new(rows, cov, covariates.iter().map(|s| s.to_string()).collect())
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn laplace_rows(&self) -> Vec<[f64; 3]> {
        self.rows.iter().map(|r| r.map(gumbel_to_laplace)).collect()
    }

    /// Same rows with only the named covariates kept.
    pub fn select_covariates(&self, names: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.covariate_names
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::invalid(format!("unknown covariate {n}")))
            })
            .collect::<Result<_>>()?;
        let cov = self.covariates.iter().map(|row| idx.iter().map(|&c| row[c]).collect()).collect();
        Self::new(self.rows.clone(), cov, names.iter().map(|s| s.to_string()).collect())
    }
}

/// Parameters of the model for one conditioning index `i`. The two entries
/// of each array refer to the other components in increasing order.
/// Coefficients act on covariates in their original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondExParams {
    pub index: usize,
    pub alpha0: [f64; 2],
    pub alpha1: [Vec<f64>; 2],
    pub beta0: [f64; 2],
    /// All zero when `homogeneous_beta`.
    pub beta1: [Vec<f64>; 2],
    pub homogeneous_beta: bool,
    pub rho: f64,
    pub margins: [DeltaLaplaceParams; 2],
}

pub fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl CondExParams {
    pub fn n_covariates(&self) -> usize {
        self.alpha1[0].len()
    }

    /// The other two component indices.
    pub fn others(&self) -> [usize; 2] {
        others(self.index)
    }

    pub fn alpha_at(&self, x: &[f64]) -> [f64; 2] {
        [0, 1].map(|j| (self.alpha0[j] + dot(&self.alpha1[j], x)).tanh())
    }

    pub fn beta_at(&self, x: &[f64]) -> [f64; 2] {
        [0, 1].map(|j| logistic(self.beta0[j] + dot(&self.beta1[j], x)))
    }

    /// Number of α and β coefficients.
    pub fn n_dependence_params(&self) -> usize {
        let l = self.n_covariates();
        if self.homogeneous_beta {
            4 + 2 * l
        } else {
            4 + 4 * l
        }
    }

    /// Dependence coefficients plus correlation and residual margins.
    pub fn n_params(&self) -> usize {
        self.n_dependence_params() + 7
    }

    fn validate(&self) -> Result<()> {
        if self.index > 2 {
            return Err(Error::invalid(format!("conditioning index must be 0, 1 or 2, got {}", self.index)));
        }
        let l = self.n_covariates();
        if self.alpha1[1].len() != l || self.beta1.iter().any(|b| b.len() != l) {
            return Err(Error::invalid("covariate coefficient vectors have inconsistent lengths"));
        }
        if self.homogeneous_beta && self.beta1.iter().flatten().any(|&b| b != 0.0) {
            return Err(Error::invalid("homogeneous beta needs zero covariate coefficients"));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::domain(format!("residual correlation must lie in (-1, 1), got {}", self.rho)));
        }
        Ok(())
    }
}

pub(crate) fn others(i: usize) -> [usize; 2] {
    match i {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A joint residual extracted at the fitted parameters, with the row it
/// came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub t: usize,
    pub z: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondExFit {
    pub params: CondExParams,
    /// Threshold on the Laplace scale.
    pub u: f64,
    pub residuals: Vec<Residual>,
    pub covariate_names: Vec<String>,
    pub negloglik: f64,
    pub converged: bool,
}

impl CondExFit {
    pub fn n_exceedances(&self) -> usize {
        self.residuals.len()
    }

    pub fn aic(&self) -> f64 {
        2.0 * self.negloglik + 2.0 * self.params.n_params() as f64
    }
}

/// Sum of the per-index AICs.
pub fn total_aic(fits: &[CondExFit]) -> f64 {
    fits.iter().map(CondExFit::aic).sum()
}

// Exceedances of component i on Laplace margins, covariates already
// centred and scaled.
pub(crate) struct Exceedances {
    t: Vec<usize>,
    yi: Vec<f64>,
    log_yi: Vec<f64>,
    yo: Vec<[f64; 2]>,
    x: Vec<Vec<f64>>,
}

impl Exceedances {
    fn n(&self) -> usize {
        self.t.len()
    }
}

#[derive(Debug, Clone)]
struct Standardisation {
    centre: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardisation {
    fn identity(l: usize) -> Self {
        Self { centre: vec![0.0; l], scale: vec![1.0; l] }
    }

    fn from_data(cov: &[Vec<f64>], l: usize) -> Self {
        let mut s = Self::identity(l);
        for c in 0..l {
            let col: Vec<f64> = cov.iter().map(|r| r[c]).collect();
            s.centre[c] = mean(&col);
            let sd = std_dev(&col);
            s.scale[c] = if sd > 0.0 { sd } else { 1.0 };
        }
        s
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.centre.iter().zip(&self.scale)).map(|(v, (c, s))| (v - c) / s).collect()
    }
}

fn exceedances(laplace: &[[f64; 3]], cov: &[Vec<f64>], i: usize, u: f64, st: &Standardisation) -> Result<Exceedances> {
    if !(u > 0.0) {
        return Err(Error::domain(format!("the threshold must be positive on the Laplace scale, got {u}")));
    }
    let [j1, j2] = others(i);
    let mut ex = Exceedances { t: vec![], yi: vec![], log_yi: vec![], yo: vec![], x: vec![] };
    for (t, row) in laplace.iter().enumerate() {
        if row[i] > u {
            ex.t.push(t);
            ex.yi.push(row[i]);
            ex.log_yi.push(row[i].ln());
            ex.yo.push([row[j1], row[j2]]);
            ex.x.push(st.apply(&cov[t]));
        }
    }
    if ex.n() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData {
            what: format!("exceedances of component {i} above u = {u}"),
            have: ex.n(),
            need: MIN_EXCEEDANCES,
        });
    }
    Ok(ex)
}

/// Positions of the parameters in the unconstrained vector: α⁰, α¹, β⁰,
/// β¹ (absent when homogeneous), atanh ρ, then `(μ, log σ, log δ)` per
/// residual margin.
#[derive(Debug, Clone, Copy)]
struct Layout {
    l: usize,
    homogeneous: bool,
}

impl Layout {
    fn a0(&self, j: usize) -> usize {
        j
    }
    fn a1(&self, j: usize, c: usize) -> usize {
        2 + j * self.l + c
    }
    fn b0(&self, j: usize) -> usize {
        2 + 2 * self.l + j
    }
    fn b1(&self, j: usize, c: usize) -> usize {
        4 + 2 * self.l + j * self.l + c
    }
    fn rho(&self) -> usize {
        4 + 2 * self.l + if self.homogeneous { 0 } else { 2 * self.l }
    }
    fn mu(&self, j: usize) -> usize {
        self.rho() + 1 + 3 * j
    }
    fn len(&self) -> usize {
        self.rho() + 7
    }

    fn eta(&self, theta: &[f64], x: &[f64]) -> ([f64; 2], [f64; 2]) {
        let a = [0, 1].map(|j| theta[self.a0(j)] + (0..self.l).map(|c| theta[self.a1(j, c)] * x[c]).sum::<f64>());
        let b = [0, 1].map(|j| {
            let mut v = theta[self.b0(j)];
            if !self.homogeneous {
                v += (0..self.l).map(|c| theta[self.b1(j, c)] * x[c]).sum::<f64>();
            }
            v
        });
        (a, b)
    }

    fn margins(&self, theta: &[f64]) -> Option<[DeltaLaplaceParams; 2]> {
        let m = |j: usize| {
            let k = self.mu(j);
            DeltaLaplaceParams::new(theta[k], theta[k + 1].exp(), theta[k + 2].exp()).ok()
        };
        Some([m(0)?, m(1)?])
    }

    /// Unconstrained vector on the standardised covariate scale.
    fn pack(&self, p: &CondExParams, st: &Standardisation) -> Vec<f64> {
        let mut th = vec![0.0; self.len()];
        for j in 0..2 {
            th[self.a0(j)] = p.alpha0[j];
            th[self.b0(j)] = p.beta0[j];
            for c in 0..self.l {
                th[self.a0(j)] += p.alpha1[j][c] * st.centre[c];
                th[self.a1(j, c)] = p.alpha1[j][c] * st.scale[c];
                if !self.homogeneous {
                    th[self.b0(j)] += p.beta1[j][c] * st.centre[c];
                    th[self.b1(j, c)] = p.beta1[j][c] * st.scale[c];
                }
            }
            let k = self.mu(j);
            th[k] = p.margins[j].mu();
            th[k + 1] = p.margins[j].sigma().ln();
            th[k + 2] = p.margins[j].delta().ln();
        }
        th[self.rho()] = p.rho.atanh();
        th
    }

    fn unpack(&self, th: &[f64], index: usize, st: &Standardisation) -> Result<CondExParams> {
        let mut alpha0 = [0.0; 2];
        let mut beta0 = [0.0; 2];
        let mut alpha1 = [vec![0.0; self.l], vec![0.0; self.l]];
        let mut beta1 = [vec![0.0; self.l], vec![0.0; self.l]];
        for j in 0..2 {
            alpha0[j] = th[self.a0(j)];
            beta0[j] = th[self.b0(j)];
            for c in 0..self.l {
                alpha1[j][c] = th[self.a1(j, c)] / st.scale[c];
                alpha0[j] -= alpha1[j][c] * st.centre[c];
                if !self.homogeneous {
                    beta1[j][c] = th[self.b1(j, c)] / st.scale[c];
                    beta0[j] -= beta1[j][c] * st.centre[c];
                }
            }
        }
        let margins = self
            .margins(th)
            .ok_or_else(|| Error::NonFinite("residual margin parameters left their domain".into()))?;
        Ok(CondExParams {
            index,
            alpha0,
            alpha1,
            beta0,
            beta1,
            homogeneous_beta: self.homogeneous,
            rho: th[self.rho()].tanh(),
            margins,
        })
    }
}

/// Gaussian score of a delta-Laplace value, taken from whichever tail keeps
/// precision.
fn gaussian_score(m: &DeltaLaplaceParams, z: f64) -> f64 {
    let (f, s) = m.cdf_sf(z);
    if z < m.mu() {
        normal_quantile(f)
    } else {
        -normal_quantile(s)
    }
}

/// Negative log-likelihood over the exceedances and, when `grad` is given,
/// its gradient. The two shape coordinates are differentiated numerically.
fn nll_theta(theta: &[f64], lay: Layout, ex: &Exceedances, grad: Option<&mut [f64]>) -> f64 {
    let Some(g) = grad else {
        return nll_core(theta, lay, ex, None);
    };
    let mut acc = vec![0.0; lay.len()];
    let value = nll_core(theta, lay, ex, Some(&mut acc));
    if !value.is_finite() {
        g.fill(f64::NAN);
        return value;
    }
    let h = 1e-5;
    let mut th = theta.to_vec();
    for j in 0..2 {
        let k = lay.mu(j) + 2;
        th[k] = theta[k] + h;
        let up = nll_core(&th, lay, ex, None);
        th[k] = theta[k] - h;
        let dn = nll_core(&th, lay, ex, None);
        th[k] = theta[k];
        acc[k] = (up - dn) / (2.0 * h);
    }
    g.copy_from_slice(&acc);
    value
}

fn nll_core(theta: &[f64], lay: Layout, ex: &Exceedances, mut grad: Option<&mut Vec<f64>>) -> f64 {
    let Some(margins) = lay.margins(theta) else {
        return f64::INFINITY;
    };
    let rho = theta[lay.rho()].tanh();
    let one_m = 1.0 - rho * rho;
    if !(one_m > 0.0) {
        return f64::INFINITY;
    }
    let half_log = -0.5 * one_m.ln();
    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    let mut total = 0.0;
    for t in 0..ex.n() {
        let x = &ex.x[t];
        let (eta_a, eta_b) = lay.eta(theta, x);
        let (yi, ly) = (ex.yi[t], ex.log_yi[t]);
        let mut z = [0.0; 2];
        let mut q = [0.0; 2];
        let mut lnf = [0.0; 2];
        let mut scale = [0.0; 2];
        let a = eta_a.map(f64::tanh);
        let b = eta_b.map(logistic);
        for j in 0..2 {
            scale[j] = (b[j] * ly).exp();
            z[j] = (ex.yo[t][j] - a[j] * yi) / scale[j];
            q[j] = gaussian_score(&margins[j], z[j]);
            lnf[j] = margins[j].ln_pdf(z[j]);
        }
        let sq = q[0] * q[0] + q[1] * q[1];
        let cross = q[0] * q[1];
        let copula = half_log - (rho * rho * sq - 2.0 * rho * cross) / (2.0 * one_m);
        let ll = copula + lnf[0] + lnf[1] - (b[0] + b[1]) * ly;
        if !ll.is_finite() {
            return f64::INFINITY;
        }
        total -= ll;

        let Some(g) = grad.as_deref_mut() else { continue };
        let dcdq = [
            -(rho * rho * q[0] - rho * q[1]) / one_m,
            -(rho * rho * q[1] - rho * q[0]) / one_m,
        ];
        for j in 0..2 {
            let m = &margins[j];
            let ks = m.k() * m.sigma();
            let s = (z[j] - m.mu()) / ks;
            let phi = normal_pdf(q[j]);
            let dq_dz = if phi > 0.0 { lnf[j].exp() / phi } else { 0.0 };
            let abs_s = s.abs();
            let dlnf_dz = if abs_s > 0.0 { -m.delta() * abs_s.powf(m.delta() - 1.0) * s.signum() / ks } else { 0.0 };
            let dl_dz = dcdq[j] * dq_dz + dlnf_dz;

            let d_eta_a = dl_dz * (-yi * (1.0 - a[j] * a[j]) / scale[j]);
            let db = b[j] * (1.0 - b[j]);
            let d_eta_b = dl_dz * (-z[j] * ly) * db - ly * db;
            g[lay.a0(j)] -= d_eta_a;
            g[lay.b0(j)] -= d_eta_b;
            for c in 0..lay.l {
                g[lay.a1(j, c)] -= d_eta_a * x[c];
                if !lay.homogeneous {
                    g[lay.b1(j, c)] -= d_eta_b * x[c];
                }
            }
            let k = lay.mu(j);
            g[k] += dl_dz;
            let dl_dlogsig = -dcdq[j] * dq_dz * (z[j] - m.mu()) - 1.0 + m.delta() * abs_s.powf(m.delta());
            g[k + 1] -= dl_dlogsig;
        }
        let n_rho = rho * rho * sq - 2.0 * rho * cross;
        let dn = 2.0 * rho * sq - 2.0 * cross;
        let dc_drho = rho / one_m - (dn * 2.0 * one_m + 4.0 * rho * n_rho) / (4.0 * one_m * one_m);
        g[lay.rho()] -= dc_drho * one_m;
    }
    total
}

/// Negative log-likelihood of `params` for the rows of `data` whose
/// `params.index` component exceeds `u` on the Laplace scale.
pub fn negloglik(params: &CondExParams, data: &CondExData, u: f64) -> Result<f64> {
    params.validate()?;
    let l = data.n_covariates();
    if params.n_covariates() != l {
        return Err(Error::invalid(format!(
            "parameters carry {} covariate coefficients but the data have {l} covariates",
            params.n_covariates()
        )));
    }
    let st = Standardisation::identity(l);
    let ex = exceedances(&data.laplace_rows(), &data.covariates, params.index, u, &st)?;
    let lay = Layout { l, homogeneous: params.homogeneous_beta };
    Ok(nll_theta(&lay.pack(params, &st), lay, &ex, None))
}

/// Residuals of the exceedances at the given parameters.
fn extract_residuals(params: &CondExParams, data: &CondExData, laplace: &[[f64; 3]], u: f64) -> Vec<Residual> {
    let i = params.index;
    let [j1, j2] = params.others();
    laplace
        .iter()
        .enumerate()
        .filter(|(_, r)| r[i] > u)
        .map(|(t, r)| {
            let x = &data.covariates[t];
            let a = params.alpha_at(x);
            let b = params.beta_at(x);
            let yo = [r[j1], r[j2]];
            Residual { t, z: [0, 1].map(|j| (yo[j] - a[j] * r[i]) / r[i].powf(b[j])) }
        })
        .collect()
}

fn starting_point(ex: &Exceedances, lay: Layout) -> Vec<f64> {
    let mut th = vec![0.0; lay.len()];
    let beta = 0.2;
    let mut z = [vec![], vec![]];
    for j in 0..2 {
        let yo: Vec<f64> = ex.yo.iter().map(|r| r[j]).collect();
        let sxy: f64 = ex.yi.iter().zip(&yo).map(|(a, b)| a * b).sum();
        let sxx: f64 = ex.yi.iter().map(|a| a * a).sum();
        let slope = (sxy / sxx).clamp(-0.9, 0.9);
        th[lay.a0(j)] = slope.atanh();
        th[lay.b0(j)] = logit(beta);
        z[j] = ex.yi.iter().zip(&yo).map(|(y, o)| (o - slope * y) / y.powf(beta)).collect();
        let k = lay.mu(j);
        th[k] = mean(&z[j]);
        th[k + 1] = std_dev(&z[j]).max(1e-3).ln();
        th[k + 2] = 1.5f64.ln();
    }
    let r = correlation(&z[0], &z[1]);
    th[lay.rho()] = if r.is_finite() { r.clamp(-0.9, 0.9).atanh() } else { 0.0 };
    th
}

/// Maximum-likelihood fit for conditioning index `i` (0-based). `data`
/// are on Gumbel margins; `u` is on the Laplace scale. Covariates are
/// centred and scaled for the optimisation and reported in their own units.
pub fn fit_condex(data: &CondExData, i: usize, u: f64, homogeneous_beta: bool) -> Result<CondExFit> {
    if i > 2 {
        return Err(Error::invalid(format!("conditioning index must be 0, 1 or 2, got {i}")));
    }
    let l = data.n_covariates();
    let laplace = data.laplace_rows();
    let st = Standardisation::from_data(&data.covariates, l);
    let ex = exceedances(&laplace, &data.covariates, i, u, &st)?;
    let lay = Layout { l, homogeneous: homogeneous_beta };
    let n = ex.n() as f64;
    let settings = MinimizeSettings {
        max_iterations: 2000,
        gradient_tol: 1e-6,
        f_tol: 1e-13,
        ..Default::default()
    };
    // mean log-likelihood keeps the gradient scale independent of n
    let objective = |th: &[f64], g: &mut [f64]| {
        let v = nll_theta(th, lay, &ex, Some(g));
        g.iter_mut().for_each(|v| *v /= n);
        v / n
    };
    let start = starting_point(&ex, lay);
    let mut best = minimize_bfgs(objective, &start, &settings)?;
    // a restart from the optimum clears stale curvature
    if let Ok(again) = minimize_bfgs(objective, &best.argmin, &settings) {
        if again.objective_value <= best.objective_value {
            best = again;
        }
    }
    let params = lay.unpack(&best.argmin, i, &st)?;
    let residuals = extract_residuals(&params, data, &laplace, u);
    Ok(CondExFit {
        params,
        u,
        residuals,
        covariate_names: data.covariate_names.clone(),
        negloglik: best.objective_value * n,
        converged: best.converged,
    })
}

/// Fits for all three conditioning indices, in parallel.
pub fn fit_all(data: &CondExData, u: f64, homogeneous_beta: bool) -> Result<Vec<CondExFit>> {
    use rayon::prelude::*;
    (0..3).into_par_iter().map(|i| fit_condex(data, i, u, homogeneous_beta)).collect()
}
