use tailkit::condex::*;
use tailkit::distributions::{gumbel_cdf, laplace_to_gumbel, DeltaLaplaceParams};
use tailkit::numopt::rng::seeded;
use tailkit::stats::{correlation, ks_distance};
use tailkit::synthetic::{gaussian_copula_gumbel, CondExTruth};

fn constant_truth(alpha: f64, beta: f64, rho: f64) -> CondExTruth {
    let mut t = CondExTruth::one_covariate();
    t.params.alpha0 = [alpha.atanh(); 2];
    t.params.alpha1 = [vec![], vec![]];
    t.params.beta0 = [logit(beta); 2];
    t.params.beta1 = [vec![], vec![]];
    t.params.rho = rho;
    t
}

fn params(alpha0: [f64; 2], beta0: [f64; 2], rho: f64, margins: [DeltaLaplaceParams; 2]) -> CondExParams {
    CondExParams {
        index: 0,
        alpha0,
        alpha1: [vec![], vec![]],
        beta0,
        beta1: [vec![], vec![]],
        homogeneous_beta: true,
        rho,
        margins,
    }
}

fn laplace_data(rows: &[[f64; 3]]) -> CondExData {
    CondExData::without_covariates(rows.iter().map(|r| r.map(laplace_to_gumbel)).collect()).unwrap()
}

#[test]
fn collapses_to_independent_gaussian() {
    let rows: Vec<[f64; 3]> = (0..60).map(|t| [1.5 + 0.05 * t as f64, (t as f64 * 0.7).sin(), 0.3 * (t as f64).cos()]).collect();
    let data = laplace_data(&rows);
    let std = DeltaLaplaceParams::new(0.0, 1.0, 2.0).unwrap();
    let p = params([0.0; 2], [f64::NEG_INFINITY; 2], 0.0, [std, std]);
    let got = negloglik(&p, &data, 1.0).unwrap();
    let lap = data.laplace_rows();
    let want: f64 = lap
        .iter()
        .filter(|r| r[0] > 1.0)
        .map(|r| r[1] * r[1] / 2.0 + r[2] * r[2] / 2.0 + (2.0 * std::f64::consts::PI).ln())
        .sum();
    assert!((got - want).abs() < 1e-9 * want.abs(), "{got} vs {want}");
}

#[test]
fn density_in_each_response_integrates_to_one() {
    // vary one response of one exceedance row; with ρ = 0 the row's density
    // in that coordinate is f((y − αyᵢ)/yᵢ^β)/yᵢ^β
    let mut rows: Vec<[f64; 3]> = (0..40).map(|t| [2.0 + 0.1 * t as f64, 0.5, -0.5]).collect();
    let dl = DeltaLaplaceParams::new(0.1, 0.9, 1.3).unwrap();
    let p = params([0.5f64.atanh(), 0.2f64.atanh()], [logit(0.4), logit(0.6)], 0.0, [dl, dl]);
    let yi = rows[7][0];
    let nll_at = |rows: &[[f64; 3]]| negloglik(&p, &laplace_data(rows), 1.0).unwrap();
    let reference = nll_at(&rows);
    let centre = 0.5 * yi;
    let half_width = 12.0 * yi.powf(0.4);
    let n = 2000;
    let h = 2.0 * half_width / n as f64;
    let mut integral = 0.0;
    for k in 0..=n {
        let y = centre - half_width + k as f64 * h;
        rows[7][1] = y;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        integral += w * (reference - nll_at(&rows)).exp();
    }
    integral *= h;
    // density of the reference value 0.5 in the same coordinate
    let f_ref = dl.pdf((0.5 - 0.5 * yi) / yi.powf(0.4)) / yi.powf(0.4);
    assert!((integral * f_ref - 1.0).abs() < 1e-3, "{}", integral * f_ref);
}

#[test]
fn constant_parameters_recovered_within_ten_percent() {
    let truth = constant_truth(0.6, 0.3, 0.2);
    let data = truth.simulate(20_000, &mut seeded(81));
    let fit = fit_condex(&data, 0, truth.u, true).unwrap();
    let p = &fit.params;
    eprintln!("{} exceedances, {:?}", fit.n_exceedances(), p);
    for j in 0..2 {
        let a = p.alpha_at(&[])[j];
        let b = p.beta_at(&[])[j];
        assert!((a / 0.6 - 1.0).abs() < 0.1, "alpha {a}");
        assert!((b / 0.3 - 1.0).abs() < 0.1, "beta {b}");
    }
    assert!((p.rho / 0.2 - 1.0).abs() < 0.1, "rho {}", p.rho);
}

#[test]
fn residuals_are_unrelated_to_the_conditioning_value() {
    let truth = CondExTruth::one_covariate();
    let data = truth.simulate(20_000, &mut seeded(82));
    let fit = fit_condex(&data, 0, truth.u, true).unwrap();
    let lap = data.laplace_rows();
    let yi: Vec<f64> = fit.residuals.iter().map(|r| lap[r.t][0]).collect();
    assert_eq!(fit.n_exceedances(), lap.iter().filter(|r| r[0] > truth.u).count());
    for j in 0..2 {
        let z: Vec<f64> = fit.residuals.iter().map(|r| r.z[j]).collect();
        let c = correlation(&z, &yi);
        assert!(c.abs() < 0.1, "component {j}: {c}");
    }
    for t in 0..data.n() {
        let x = &data.covariates[t];
        assert!(fit.params.alpha_at(x).iter().all(|a| a.abs() < 1.0));
        assert!(fit.params.beta_at(x).iter().all(|b| *b > 0.0 && *b < 1.0));
    }
}

#[test]
fn covariate_without_effect_gives_constant_alpha() {
    let data = gaussian_copula_gumbel(5000, [0.5, 0.5, 0.5], 0, &mut seeded(83)).unwrap();
    let fit = fit_condex(&data, 2, default_threshold(), false).unwrap();
    assert!(fit.params.alpha1[0].is_empty());
    assert_eq!(fit.params.alpha_at(&[])[0], fit.params.alpha0[0].tanh());
    assert_eq!(fit.params.n_params(), 11);
}

#[test]
fn aic_prefers_the_generating_covariate() {
    let mut truth = CondExTruth::one_covariate();
    truth.params.alpha1 = [vec![0.3, 0.0], vec![-0.2, 0.0]];
    truth.params.beta1 = [vec![0.0, 0.0], vec![0.0, 0.0]];
    let mut hits = 0;
    for rep in 0..25 {
        let data = truth.simulate(4000, &mut seeded(1000 + rep));
        let aic = |name: &str| fit_condex(&data.select_covariates(&[name]).unwrap(), 0, truth.u, true).unwrap().aic();
        if aic("x1") < aic("x2") {
            hits += 1;
        }
    }
    assert!(hits >= 20, "true covariate chosen {hits}/25 times");
}

#[test]
fn unconditional_sample_keeps_gumbel_margins() {
    let data = gaussian_copula_gumbel(20_000, [0.6, 0.5, 0.4], 1, &mut seeded(84)).unwrap();
    let u = default_threshold();
    let fits = fit_all(&data, u, true).unwrap();
    let sample = simulate_unconditional(&fits, &data, 100_000, 300_000, 7).unwrap();
    assert_eq!(sample.len(), 100_000);
    let expected_body = data.laplace_rows().iter().filter(|r| r.iter().all(|&v| v < u)).count() as f64 / data.n() as f64;
    assert_eq!(sample.p_body, expected_body);
    for k in 0..3 {
        let col: Vec<f64> = sample.rows.iter().map(|r| r[k]).collect();
        let d = ks_distance(&col, gumbel_cdf);
        assert!(d < 0.02, "margin {k}: KS {d}");
    }
    // aggregate upper quantiles line up with the data
    let grid: Vec<f64> = (0..=99).map(|k| 0.9 + 0.00099 * k as f64).collect();
    let qq = qq_aggregate(&sample.laplace_rows(), &data.laplace_rows(), &grid).unwrap();
    let range = qq.last().unwrap().observed - qq[0].observed;
    let gap = qq.iter().map(|p| (p.simulated - p.observed).abs()).fold(0.0, f64::max);
    assert!(gap < 0.1 * range, "gap {gap} range {range}");

    let again = simulate_unconditional(&fits, &data, 100_000, 300_000, 7).unwrap();
    assert_eq!(sample.rows, again.rows);
    assert!(simulate_unconditional(&fits, &data, 10, 10, 7).is_err());
}

#[test]
fn independent_data_give_product_probability() {
    let data = gaussian_copula_gumbel(20_000, [0.0, 0.0, 0.0], 0, &mut seeded(85)).unwrap();
    let fits = fit_all(&data, default_threshold(), true).unwrap();
    let sample = simulate_unconditional(&fits, &data, 1_000_000, 3_000_000, 11).unwrap();
    let p = (1.0 - gumbel_cdf(3.0)).powi(3);
    let est = estimate_joint_probability(&sample, &[Bound::Above(3.0); 3]).unwrap();
    let se = (p * (1.0 - p) / sample.len() as f64).sqrt();
    assert!((est.estimate - p).abs() < 4.0 * se, "{} vs {p} (se {se})", est.estimate);
}

#[test]
fn coefficient_table_has_two_rows_per_fit() {
    let truth = CondExTruth::one_covariate();
    let data = truth.simulate(4000, &mut seeded(86));
    let fits = fit_all(&data, truth.u, false).unwrap();
    let mut buf = Vec::new();
    write_coefficient_table(&fits, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("i,j,alpha0,alpha1_x1,beta0,beta1_x1,rho"));
    assert!(lines[1].starts_with("1,2,") && lines[6].starts_with("3,2,"));
    assert!((total_aic(&fits) - fits.iter().map(|f| f.aic()).sum::<f64>()).abs() < 1e-9);
}
