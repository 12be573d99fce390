use proptest::prelude::*;
use tailkit::distributions::GpdParams;
use tailkit::numopt::rng::seeded;
use tailkit::numopt::*;

#[test]
fn gpd_scale_recovered_through_log_transform() {
    let truth = GpdParams::new(2.0, 0.2).unwrap();
    let mut rng = seeded(3);
    let data: Vec<f64> = (0..10_000).map(|_| truth.sample(&mut rng)).collect();
    let nll = |p: &[f64]| match GpdParams::new(p[0], p[1]) {
        Ok(g) => -data.iter().map(|&y| g.ln_pdf(y)).sum::<f64>(),
        Err(_) => f64::INFINITY,
    };
    let r = minimize(
        nll,
        &[1.0, 0.0],
        &[ParamTransform::Log, ParamTransform::Identity],
        &MinimizeSettings::default(),
    )
    .unwrap();
    assert!((r.argmin[0] / 2.0 - 1.0).abs() < 0.05, "{:?}", r.argmin);
    assert!(r.objective_value <= nll(&[1.0, 0.0]));
}

proptest! {
    #[test]
    fn transforms_round_trip(u in -30.0f64..30.0, lo in -5.0f64..5.0, w in 0.1f64..10.0) {
        for t in [
            ParamTransform::Identity,
            ParamTransform::Log,
            ParamTransform::ScaledLogit { lo, hi: lo + w },
            ParamTransform::Atanh,
        ] {
            let theta = t.inverse(u / 10.0);
            let back = t.inverse(t.forward(theta));
            prop_assert!((back - theta).abs() < 1e-10 * (1.0 + theta.abs()), "{t:?} {theta} {back}");
        }
    }

    #[test]
    fn spline_partition_of_unity(xs in prop::collection::vec(-100.0f64..100.0, 30..200), probe in 0.0f64..1.0) {
        let x: Vec<Option<f64>> = xs.iter().map(|&v| Some(v)).collect();
        prop_assume!(xs.iter().any(|&v| v != xs[0]));
        let basis = SplineBasis::from_data(&x, 8, 3).unwrap();
        let (lo, hi) = basis.boundary_knots;
        let (row, clamped) = basis.evaluate(lo + probe * (hi - lo));
        prop_assert!(!clamped);
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(row.iter().all(|&b| b >= -1e-15));
        let d = spline_design(&x, &basis);
        for col in &d.columns {
            let m = col.iter().sum::<f64>() / col.len() as f64;
            prop_assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn minimize_never_worse_than_start(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) * (1.0 + x[1] * x[1]) + (x[1] - 0.5).abs().powf(1.5);
        let settings = MinimizeSettings { max_iterations: 50, ..Default::default() };
        let r = minimize(f, &[a, b], &[], &settings).unwrap();
        prop_assert!(r.objective_value <= f(&[a, b]));
        let again = minimize(f, &[a, b], &[], &settings).unwrap();
        prop_assert_eq!(r.argmin, again.argmin);
    }
}
