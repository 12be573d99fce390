use std::collections::BTreeMap;

use rand::Rng;
use tailkit::dataset::Dataset;
use tailkit::distributions::laplace_quantile;
use tailkit::marginal::*;
use tailkit::numopt::rng::seeded;
use tailkit::stats::ks_distance;
use tailkit::synthetic::PotModel;

fn linear(resp: &str, thr: &[&str], sigma: &[&str], xi: &[&str]) -> ModelFormula {
    ModelFormula {
        response: resp.into(),
        threshold: thr.iter().map(|c| Term::linear(c)).collect(),
        sigma: sigma.iter().map(|c| Term::linear(c)).collect(),
        xi: xi.iter().map(|c| Term::linear(c)).collect(),
    }
}

fn row(x: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([("x".to_string(), x)])
}

#[test]
fn threshold_slope_and_coverage() {
    let mut rng = seeded(11);
    let n = 10_000;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + laplace_quantile(rng.random_range(1e-12..1.0)).unwrap()).collect();
    let d = Dataset::from_complete(&["y", "x"], vec![y.clone(), x.clone()]).unwrap();
    let f = linear("y", &["x"], &[], &[]);
    let fit = fit_threshold(&d, &f, 0.5).unwrap();
    assert!((fit.coefficients[1] - 2.0).abs() < 0.1, "{:?}", fit.coefficients);

    for lambda in [0.5, 0.9, 0.97] {
        let fit = fit_threshold(&d, &f, lambda).unwrap();
        let rows: Vec<usize> = (0..n).collect();
        let u = fit.predict(&d, &rows).unwrap();
        let below = y.iter().zip(&u).filter(|(a, b)| a < b).count() as f64 / n as f64;
        assert!((below - lambda).abs() < 0.01, "lambda {lambda}: {below}");
    }
}

#[test]
fn smooth_threshold_tracks_nonlinear_quantile() {
    let mut rng = seeded(12);
    let n = 5000;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..6.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| v.sin() * 2.0 + rng.random::<f64>()).collect();
    let d = Dataset::from_complete(&["y", "x"], vec![y.clone(), x]).unwrap();
    let f = ModelFormula { threshold: vec![Term::smooth("x")], ..ModelFormula::intercept_only("y") };
    let fit = fit_threshold(&d, &f, 0.8).unwrap();
    for t in [0.5, 1.5, 3.0, 4.5, 5.5] {
        let u = fit.predict_row(|_| Some(t));
        assert!((u - (2.0 * t.sin() + 0.8)).abs() < 0.15, "x={t}: {u}");
    }
    let rows: Vec<usize> = (0..n).collect();
    let u = fit.predict(&d, &rows).unwrap();
    let below = y.iter().zip(&u).filter(|(a, b)| a < b).count() as f64 / n as f64;
    assert!((below - 0.8).abs() < 1.0 / (n as f64).sqrt(), "{below}");
}

#[test]
fn gpd_constant_recovery() {
    let mut rng = seeded(13);
    let m = PotModel { lambda: 0.5, u0: 0.0, u1: 0.0, s0: 2f64.ln(), s1: 0.0, xi: 0.1, body_width: 1.0 };
    let d = m.simulate(4000, &mut rng);
    let f = ModelFormula::intercept_only("y");
    let thr = ThresholdFit::constant("y", 0.5, 0.0).unwrap();
    let fit = fit_gpd_regression(&d, &f, &thr).unwrap();
    assert!(fit.n_exceedances > 1900);
    let sigma = fit.sigma_coeffs[0].exp();
    assert!((sigma / 2.0 - 1.0).abs() < 0.1, "{sigma}");
    assert!((fit.xi_coeffs[0] - 0.1).abs() < 0.1 * 0.1 + 0.05, "{}", fit.xi_coeffs[0]);
}

#[test]
fn gpd_scale_slope_recovery_and_nesting() {
    let mut rng = seeded(14);
    let m = PotModel { lambda: 0.5, u0: 0.0, u1: 0.0, s0: 0.5, s1: 0.3, xi: 0.1, body_width: 1.0 };
    let d = m.simulate(8000, &mut rng);
    let thr = ThresholdFit::constant("y", 0.5, 0.0).unwrap();
    let f = linear("y", &[], &["x"], &[]);
    let fit = fit_gpd_regression(&d, &f, &thr).unwrap();
    assert!((fit.sigma_coeffs[1] - 0.3).abs() < 0.045, "{:?}", fit.sigma_coeffs);
    assert_eq!(fit.xi_coeffs.len(), 1);
    let (_, g1) = fit.params_at(|_| Some(-0.7)).unwrap();
    let (_, g2) = fit.params_at(|_| Some(0.9)).unwrap();
    assert_eq!(g1.xi(), g2.xi());

    // adding terms never lowers the maximised likelihood
    let base = fit_gpd_regression(&d, &ModelFormula::intercept_only("y"), &thr).unwrap();
    let bigger = fit_gpd_regression(&d, &linear("y", &[], &["x", "noise"], &["x"]), &thr).unwrap();
    assert!(fit.loglik >= base.loglik - 1e-6);
    assert!(bigger.loglik >= fit.loglik - 1e-6);
}

#[test]
fn bic_penalises_noise_covariate() {
    let mut raised = 0;
    for rep in 0..50 {
        let mut rng = seeded(1000 + rep);
        let m = PotModel { lambda: 0.5, u0: 0.0, u1: 0.0, ..Default::default() };
        let d = m.simulate(1000, &mut rng);
        let thr = ThresholdFit::constant("y", 0.5, 0.0).unwrap();
        let a = fit_gpd_regression(&d, &linear("y", &[], &["x"], &[]), &thr).unwrap();
        let b = fit_gpd_regression(&d, &linear("y", &[], &["x", "noise"], &[]), &thr).unwrap();
        if bic(&b, &d).unwrap() > bic(&a, &d).unwrap() {
            raised += 1;
        }
    }
    assert!(raised >= 40, "{raised}/50");
}

#[test]
fn bic_duplicate_column() {
    let mut rng = seeded(15);
    let m = PotModel { lambda: 0.5, u0: 0.0, u1: 0.0, ..Default::default() };
    let mut d = m.simulate(2000, &mut rng);
    let x = d.column("x").unwrap().to_vec();
    d.push_column("x_copy", x).unwrap();
    let thr = ThresholdFit::constant("y", 0.5, 0.0).unwrap();
    let a = fit_gpd_regression(&d, &linear("y", &[], &["x"], &[]), &thr).unwrap();
    let b = fit_gpd_regression(&d, &linear("y", &[], &["x", "x_copy"], &[]), &thr).unwrap();
    assert!((a.loglik - b.loglik).abs() < 1e-4, "{} {}", a.loglik, b.loglik);
    assert!(bic(&b, &d).unwrap() > bic(&a, &d).unwrap());
}

#[test]
fn transform_is_exponential() {
    let mut rng = seeded(16);
    let m = PotModel::default();
    let d = m.simulate(10_000, &mut rng);
    let f = linear("y", &["x"], &["x"], &[]);
    let thr = fit_threshold(&d, &f, 0.9).unwrap();
    let fit = fit_gpd_regression(&d, &f, &thr).unwrap();
    let t = transform_to_exponential(&fit, &d).unwrap();
    assert!(t.excluded.is_empty());
    let ks = ks_distance(&t.values, |v| -(-v).exp_m1());
    assert!(ks < 0.0163, "KS {ks}");

    // boundary and monotonicity
    let (u, _) = fit.params_at(|_| Some(0.3)).unwrap();
    let probe = |y: f64| {
        let p = Dataset::from_complete(&["y", "x", "noise"], vec![vec![y], vec![0.3], vec![0.0]]).unwrap();
        transform_to_exponential(&fit, &p).unwrap().values[0]
    };
    assert!((probe(u) + (-0.9f64).ln_1p()).abs() < 1e-12);
    let mut last = f64::NEG_INFINITY;
    for k in 0..200 {
        let v = probe(u - 3.0 + k as f64 * 0.1);
        assert!(v >= last);
        last = v;
    }
}

#[test]
fn transform_excludes_missing_rows() {
    let mut rng = seeded(17);
    let d = PotModel::default().simulate(2000, &mut rng);
    let f = linear("y", &["x"], &[], &[]);
    let thr = fit_threshold(&d, &f, 0.9).unwrap();
    let fit = fit_gpd_regression(&d, &f, &thr).unwrap();
    let mut cols: Vec<Vec<Option<f64>>> = d.names().iter().map(|n| d.column(n).unwrap().to_vec()).collect();
    cols[1][7] = None;
    let d2 = Dataset::new(d.names().to_vec(), cols).unwrap();
    let t = transform_to_exponential(&fit, &d2).unwrap();
    assert_eq!(t.excluded, vec![7]);
    assert_eq!(t.values.len(), 1999);
}

#[test]
fn missing_covariate_contributes_zero() {
    let mut rng = seeded(18);
    let d = PotModel::default().simulate(3000, &mut rng);
    let f = linear("y", &["x"], &["x"], &[]);
    let thr = fit_threshold(&d, &f, 0.9).unwrap();
    let fit = fit_gpd_regression(&d, &f, &thr).unwrap();
    let mean_x: f64 = d.complete_column("x").unwrap().iter().sum::<f64>() / 3000.0;
    let a = conditional_quantile(&fit, &BTreeMap::new(), 0.99).unwrap();
    let b = conditional_quantile(&fit, &row(mean_x), 0.99).unwrap();
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn single_candidate_selection() {
    let mut rng = seeded(19);
    let d = PotModel::default().simulate(3000, &mut rng);
    let f = linear("y", &["x"], &[], &[]);
    let s = select_threshold(&d, &f, &[0.9], 0.99).unwrap();
    assert_eq!(s.selected, 0.9);
    assert!(select_threshold(&d, &f, &[0.995], 0.99).is_err());
}

#[test]
fn conditional_quantile_matches_monte_carlo() {
    let mut rng = seeded(20);
    let d = PotModel::default().simulate(5000, &mut rng);
    let f = linear("y", &["x"], &["x"], &[]);
    let thr = fit_threshold(&d, &f, 0.9).unwrap();
    let fit = fit_gpd_regression(&d, &f, &thr).unwrap();
    let x = row(0.4);
    let q = 0.9999;
    let analytic = conditional_quantile(&fit, &x, q).unwrap();
    assert!((conditional_quantile(&fit, &x, 0.9).unwrap() - thr.predict_row(|_| Some(0.4))).abs() < 1e-12);
    assert!(conditional_quantile(&fit, &x, 0.8).is_err());

    // brute force: draw from the fitted conditional law at x
    let (u, gpd) = fit.params_at(|_| Some(0.4)).unwrap();
    let draws = 10_000_000;
    let mut exceed: Vec<f64> = Vec::with_capacity(draws / 5);
    for _ in 0..draws {
        if rng.random::<f64>() >= 0.9 {
            exceed.push(u + gpd.sample(&mut rng));
        }
    }
    // the q-quantile is the k-th largest of all draws, which lies in the tail
    let k = (draws as f64 * (1.0 - q)).round() as usize;
    exceed.sort_by(|a, b| b.total_cmp(a));
    let brute = exceed[k - 1];
    assert!((brute / analytic - 1.0).abs() < 0.02, "{brute} vs {analytic}");
}

#[test]
fn bootstrap_edges() {
    let mut rng = seeded(21);
    let d = PotModel::default().simulate(600, &mut rng);
    let f = linear("y", &["x"], &[], &[]);
    let xs = vec![row(0.0), row(0.5)];
    let b = bootstrap_quantiles(&d, &f, 0.9, &xs, 0.99, 20, 0.0, 5).unwrap();
    for iv in &b.intervals {
        assert_eq!(iv.lower, iv.median);
        assert_eq!(iv.upper, iv.median);
    }
    let b2 = bootstrap_quantiles(&d, &f, 0.9, &xs, 0.99, 2, 0.5, 5).unwrap();
    assert!(b2.degenerate);
    assert_eq!(b2.intervals.len(), 2);
    let again = bootstrap_quantiles(&d, &f, 0.9, &xs, 0.99, 20, 0.0, 5).unwrap();
    assert_eq!(b.intervals[0].median, again.intervals[0].median);
}

#[test]
fn twsmad_weights_normalise() {
    // a pure level shift above lambda_star scales the score exactly by the
    // shift over the grid size, because weights sum to one
    let n = TWSMAD_GRID;
    let exact: Vec<f64> = (1..=n).map(|i| -(-(i as f64) / (n + 1) as f64).ln_1p()).collect();
    let shifted: Vec<f64> = exact.iter().map(|v| v + 0.25).collect();
    let s = twsmad(&shifted, 0.95).unwrap();
    assert!((s - 0.25 / n as f64).abs() < 1e-15, "{s}");
}
