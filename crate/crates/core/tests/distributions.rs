use proptest::prelude::*;
use tailkit::distributions::*;
use tailkit::numopt::rng::seeded;
use tailkit::stats::ks_distance;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gpd_round_trip(p in 0.0f64..0.999, sigma in 0.05f64..20.0, xi in -0.45f64..1.0) {
        let g = GpdParams::new(sigma, xi).unwrap();
        let y = gpd_quantile(p, &g).unwrap();
        prop_assert!((gpd_cdf(y, &g).unwrap() - p).abs() < 1e-10);
    }

    #[test]
    fn gumbel_and_laplace_round_trip(p in 1e-6f64..0.999999) {
        prop_assert!((gumbel_cdf(gumbel_quantile(p).unwrap()) - p).abs() < 1e-12);
        prop_assert!((laplace_cdf(laplace_quantile(p).unwrap()) - p).abs() < 1e-12);
    }

    #[test]
    fn margin_maps_invert(y in -5.0f64..30.0) {
        prop_assert!((laplace_to_gumbel(gumbel_to_laplace(y)) - y).abs() < 1e-10);
    }

    #[test]
    fn delta_laplace_round_trip(p in 1e-4f64..0.9999, mu in -3.0f64..3.0, sigma in 0.3f64..4.0, delta in 0.5f64..5.0) {
        let d = DeltaLaplaceParams::new(mu, sigma, delta).unwrap();
        let z = d.quantile(p).unwrap();
        prop_assert!((d.cdf(z) - p).abs() < 1e-10);
    }

    #[test]
    fn gpd_cdf_is_monotone(sigma in 0.1f64..5.0, xi in -0.45f64..1.0, a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let g = GpdParams::new(sigma, xi).unwrap();
        let (lo, hi) = (a.min(b).min(g.upper_endpoint()), a.max(b).min(g.upper_endpoint()));
        prop_assert!(g.cdf(lo) <= g.cdf(hi));
    }
}

#[test]
fn samples_follow_their_laws() {
    let mut rng = seeded(40);
    let n = 100_000;
    let g = GpdParams::new(1.5, 0.2).unwrap();
    let s: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)).collect();
    assert!(ks_distance(&s, |y| g.cdf(y)) < 0.01);
    let d = DeltaLaplaceParams::new(0.3, 1.2, 1.4).unwrap();
    let s: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
    assert!(ks_distance(&s, |z| d.cdf(z)) < 0.01);
    let e = EmpiricalDistribution::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[e.sample(&mut rng) as usize] += 1;
    }
    assert!(counts.iter().all(|&c| (c as f64 / n as f64 - 0.25).abs() < 0.01), "{counts:?}");
}

#[test]
fn gpd_continuous_through_zero_shape() {
    let g0 = GpdParams::new(2.0, 0.0).unwrap();
    for xi in [1e-8, -1e-8] {
        let g = GpdParams::new(2.0, xi).unwrap();
        for k in 0..=100 {
            let y = 0.2 * k as f64;
            assert!((g.cdf(y) - g0.cdf(y)).abs() < 1e-6);
        }
    }
}
