use serde::{Deserialize, Serialize};

use super::{fd_gradient, ParamTransform};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizeSettings {
    /// Iteration cap for each Nelder–Mead run and for BFGS.
    pub max_iterations: usize,
    /// Simplex convergence: spread of objective values across vertices.
    pub f_tol: f64,
    /// Simplex convergence: largest vertex distance from the best vertex.
    pub x_tol: f64,
    /// Initial simplex edge in unconstrained coordinates.
    pub initial_step: f64,
    /// Number of Nelder–Mead restarts from the incumbent.
    pub restarts: usize,
    /// Follow the simplex search with a finite-difference BFGS polish.
    pub polish: bool,
    /// BFGS stops when the gradient max-norm falls below this.
    pub gradient_tol: f64,
    /// Relative step for finite-difference gradients.
    pub fd_step: f64,
}

impl Default for MinimizeSettings {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            f_tol: 1e-12,
            x_tol: 1e-10,
            initial_step: 0.5,
            restarts: 1,
            polish: true,
            gradient_tol: 1e-8,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimResult {
    /// Minimiser in the caller's (constrained) coordinates.
    pub argmin: Vec<f64>,
    pub objective_value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimises `objective` over constrained parameters.
///
/// Each coordinate is mapped to the real line by its transform (an empty
/// transform slice means identity everywhere), searched with Nelder–Mead,
/// and optionally refined by BFGS on finite-difference gradients. Points
/// where the objective is not finite are treated as infeasible.
pub fn minimize(
    objective: impl Fn(&[f64]) -> f64,
    start: &[f64],
    transforms: &[ParamTransform],
    settings: &MinimizeSettings,
) -> Result<OptimResult> {
    let n = start.len();
    if n == 0 {
        return Err(Error::invalid("cannot minimise over zero parameters"));
    }
    if !transforms.is_empty() && transforms.len() != n {
        return Err(Error::invalid(format!(
            "{} transforms for {} parameters",
            transforms.len(),
            n
        )));
    }
    let tf = |i: usize| transforms.get(i).copied().unwrap_or(ParamTransform::Identity);
    let to_constrained = |u: &[f64]| -> Vec<f64> { u.iter().enumerate().map(|(i, &v)| tf(i).inverse(v)).collect() };
    let u0: Vec<f64> = start.iter().enumerate().map(|(i, &v)| tf(i).forward(v)).collect();
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("start point lies outside the transform domains"));
    }
    let mut evaluations = 0usize;
    let mut f = |u: &[f64]| {
        evaluations += 1;
        finite_or_inf(objective(&to_constrained(u)))
    };
    let f0 = f(&u0);
    if !f0.is_finite() {
        return Err(Error::NonFinite(format!("objective is {} at the start point", objective(start))));
    }

    let mut best = u0;
    let mut best_f = f0;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..=settings.restarts {
        let run = nelder_mead(&mut f, &best, settings);
        iterations += run.iterations;
        converged = run.converged;
        if run.value <= best_f {
            best = run.point;
            best_f = run.value;
        }
    }

    if settings.polish {
        let fd_step = settings.fd_step;
        let bfgs_settings = settings.clone();
        let mut fg = |u: &[f64], g: &mut [f64]| {
            let v = f(u);
            if !v.is_finite() {
                return v;
            }
            match fd_gradient(|p| finite_or_inf(objective(&to_constrained(p))), u, fd_step) {
                Ok(gr) => {
                    g.copy_from_slice(&gr);
                    v
                }
                Err(_) => {
                    g.iter_mut().for_each(|x| *x = 0.0);
                    v
                }
            }
        };
        if let Ok(polished) = bfgs_core(&mut fg, &best, &bfgs_settings) {
            iterations += polished.iterations;
            if polished.value < best_f {
                best = polished.point;
                best_f = polished.value;
            }
        }
    }

    Ok(OptimResult {
        argmin: to_constrained(&best),
        objective_value: best_f,
        converged,
        iterations,
        evaluations,
    })
}

struct Run {
    point: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

fn nelder_mead(f: &mut impl FnMut(&[f64]) -> f64, start: &[f64], s: &MinimizeSettings) -> Run {
    let n = start.len();
    let nf = n as f64;
    // adaptive coefficients for moderate dimension
    let (alpha, gamma, rho, shrink) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += s.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    // pull infeasible initial vertices towards the start
    for i in 1..=n {
        let mut tries = 0;
        while !values[i].is_finite() && tries < 40 {
            for j in 0..n {
                simplex[i][j] = start[j] + 0.5 * (simplex[i][j] - start[j]);
            }
            values[i] = f(&simplex[i]);
            tries += 1;
        }
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < s.max_iterations {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let spread = (values[worst] - values[best]).abs();
        let size = simplex
            .iter()
            .map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= s.f_tol * (values[best].abs() + s.f_tol) && size <= s.x_tol.max(1e-14) * 1e3
            || size <= s.x_tol
        {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for &idx in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += x / nf;
            }
        }
        let point_along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[worst]).map(|(c, w)| c + t * (c - w)).collect()
        };

        let reflected = point_along(alpha);
        let fr = f(&reflected);
        if fr < values[best] {
            let expanded = point_along(alpha * gamma);
            let fe = f(&expanded);
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[worst] {
            let c = point_along(alpha * rho);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = point_along(-rho);
            let fc = f(&c);
            (c, fc)
        };
        if fc < values[worst].min(fr) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        let anchor = simplex[best].clone();
        for &idx in &order[1..] {
            for (x, a) in simplex[idx].iter_mut().zip(&anchor) {
                *x = a + shrink * (*x - a);
            }
            values[idx] = f(&simplex[idx]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    Run {
        point: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

/// BFGS with backtracking line search on an objective that fills in its own
/// gradient. Coordinates are used as given (no transforms). Points with a
/// non-finite objective are rejected by the line search.
pub fn minimize_bfgs(
    mut objective: impl FnMut(&[f64], &mut [f64]) -> f64,
    start: &[f64],
    settings: &MinimizeSettings,
) -> Result<OptimResult> {
    let mut evaluations = 0;
    let mut counted = |x: &[f64], g: &mut [f64]| {
        evaluations += 1;
        finite_or_inf(objective(x, g))
    };
    let run = bfgs_core(&mut counted, start, settings)?;
    Ok(OptimResult {
        argmin: run.point,
        objective_value: run.value,
        converged: run.converged,
        iterations: run.iterations,
        evaluations,
    })
}

fn bfgs_core(
    f: &mut impl FnMut(&[f64], &mut [f64]) -> f64,
    start: &[f64],
    s: &MinimizeSettings,
) -> Result<Run> {
    let n = start.len();
    let mut x = start.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() {
        return Err(Error::NonFinite("objective not finite at the BFGS start point".into()));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient not finite at the BFGS start point".into()));
    }
    // inverse Hessian approximation, row-major
    let mut h = identity(n);
    let mut first = true;
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut stalls = 0;

    while iterations < s.max_iterations {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < s.gradient_tol {
            converged = true;
            break;
        }
        iterations += 1;
        for i in 0..n {
            dir[i] = -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>();
        }
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if !(slope < 0.0) {
            // not a descent direction: reset to steepest descent
            h = identity(n);
            for i in 0..n {
                dir[i] = -g[i];
            }
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }

        let mut step = 1.0;
        let mut accepted = false;
        let mut f_new = f64::INFINITY;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope && g_new.iter().all(|v| v.is_finite()) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if first {
                break;
            }
            // retry once from a fresh curvature estimate
            h = identity(n);
            first = true;
            stalls += 1;
            if stalls > 2 {
                break;
            }
            continue;
        }

        let sv: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = sv.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let yy: f64 = yv.iter().map(|v| v * v).sum();
        let ss: f64 = sv.iter().map(|v| v * v).sum();
        if sy > 1e-12 * (ss * yy).sqrt() {
            if first {
                let scale = sy / yy;
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] = if i == j { scale } else { 0.0 };
                    }
                }
                first = false;
            }
            // H <- (I - rho s y') H (I - rho y s') + rho s s'
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * yv[j]).sum()).collect();
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * sv[j] + sv[i] * hy[j]) + (rho * rho * yhy + rho) * sv[i] * sv[j];
                }
            }
        }

        let rel_change = (fx - f_new).abs() / fx.abs().max(1.0);
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        fx = f_new;
        if rel_change < s.f_tol {
            stalls += 1;
            if stalls >= 3 {
                converged = true;
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Ok(Run {
        point: x,
        value: fx,
        iterations,
        converged,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let r = minimize(|x| (x[0] - 3.0).powi(2), &[0.0], &[], &MinimizeSettings::default()).unwrap();
        assert!((r.argmin[0] - 3.0).abs() < 1e-5);
        assert!(r.objective_value <= 9.0);
    }

    #[test]
    fn rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize(rosen, &[-1.2, 1.0], &[], &MinimizeSettings::default()).unwrap();
        assert!((r.argmin[0] - 1.0).abs() < 1e-3 && (r.argmin[1] - 1.0).abs() < 1e-3, "{:?}", r.argmin);
    }

    #[test]
    fn rosenbrock_without_polish() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let settings = MinimizeSettings { polish: false, ..Default::default() };
        let r = minimize(rosen, &[-1.2, 1.0], &[], &settings).unwrap();
        assert!((r.argmin[0] - 1.0).abs() < 1e-3 && (r.argmin[1] - 1.0).abs() < 1e-3, "{:?}", r.argmin);
    }

    #[test]
    fn respects_transform_domain() {
        // minimum of (s - 0.5)^2 + 1/s over s > 0 lies near 1.2
        let obj = |x: &[f64]| if x[0] <= 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) + 1.0 / x[0] };
        let r = minimize(obj, &[3.0], &[ParamTransform::Log], &MinimizeSettings::default()).unwrap();
        let s = r.argmin[0];
        assert!(s > 0.0);
        assert!((2.0 * (s - 0.5) - 1.0 / (s * s)).abs() < 1e-5);
    }

    #[test]
    fn non_finite_start_is_error() {
        let err = minimize(|_| f64::NAN, &[1.0], &[], &MinimizeSettings::default());
        assert!(err.is_err());
    }

    #[test]
    fn iteration_cap_returns_best_point() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let settings = MinimizeSettings { max_iterations: 5, restarts: 0, polish: false, ..Default::default() };
        let r = minimize(rosen, &[-1.2, 1.0], &[], &settings).unwrap();
        assert!(!r.converged);
        assert!(r.objective_value <= rosen(&[-1.2, 1.0]));
    }

    #[test]
    fn deterministic() {
        let obj = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(4) + x[0] * x[1] * 0.1;
        let a = minimize(obj, &[0.3, 0.3], &[], &MinimizeSettings::default()).unwrap();
        let b = minimize(obj, &[0.3, 0.3], &[], &MinimizeSettings::default()).unwrap();
        assert_eq!(a.argmin, b.argmin);
        assert_eq!(a.objective_value, b.objective_value);
    }

    #[test]
    fn bfgs_on_quadratic_bowl() {
        let r = minimize_bfgs(
            |x, g| {
                g[0] = 2.0 * (x[0] - 1.0);
                g[1] = 20.0 * (x[1] + 3.0);
                (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 3.0).powi(2)
            },
            &[5.0, 5.0],
            &MinimizeSettings::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.argmin[0] - 1.0).abs() < 1e-7 && (r.argmin[1] + 3.0).abs() < 1e-7);
    }
}
