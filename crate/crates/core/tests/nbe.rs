use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use tailkit::distributions::EmpiricalDistribution;
use tailkit::nbe::*;
use tailkit::numopt::rng::seeded;

fn trained_like_net(seed: u64) -> DeepSetsNetwork {
    let mut rng = seeded(seed);
    let mut net = DeepSetsNetwork::glorot(&mut rng);
    for p in net.params.iter_mut() {
        if *p == 0.0 {
            *p = rng.random_range(-0.3..0.3);
        }
    }
    net.standardisation = Some((0.5, 1.5));
    net
}

#[test]
fn backprop_matches_finite_differences() {
    let mut rng = seeded(30);
    let net = trained_like_net(31);
    let y: Vec<f64> = (0..300).map(|_| rng.random_range(-3.0..5.0)).collect();
    let (_, grad) = output_gradient(&net, &y).unwrap();
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut checked = 0;
    while checked < 20 {
        let i = rng.random_range(0..net.n_params());
        if grad[i].abs() < 1e-3 * scale {
            continue;
        }
        let h = 1e-6;
        let mut up = net.clone();
        up.params[i] += h;
        let mut down = net.clone();
        down.params[i] -= h;
        let fd = (up.forward(&y).unwrap() - down.forward(&y).unwrap()) / (2.0 * h);
        let rel = (fd - grad[i]).abs() / grad[i].abs().max(fd.abs());
        assert!(rel < 1e-4, "param {i}: backprop {} vs fd {fd} (rel {rel})", grad[i]);
        checked += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn permutation_invariance_is_exact(values in prop::collection::vec(-50.0f64..50.0, 1..400), seed in 0u64..1000) {
        let net = trained_like_net(seed);
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut seeded(seed + 1));
        prop_assert_eq!(net.forward(&values).unwrap().to_bits(), net.forward(&shuffled).unwrap().to_bits());
    }

    #[test]
    fn loss_is_nonnegative(theta in 0.01f64..1e4, ratio in 0.0f64..3.0) {
        prop_assert!(asymmetric_loss(theta, theta * ratio).unwrap() >= 0.0);
    }
}

#[test]
fn m_equal_one_uses_single_feature_vector() {
    let net = trained_like_net(5);
    let a = net.forward(&[2.0]).unwrap();
    let b = net.forward(&[2.0, 2.0, 2.0]).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn learns_a_constant_target() {
    // every pair has the same quantile, so the estimator should output it
    let mut rng = seeded(40);
    let mk = |rng: &mut tailkit::numopt::rng::Rng64, n: usize| -> Vec<TrainingPair> {
        (0..n)
            .map(|_| TrainingPair { replicates: (0..200).map(|_| rng.random_range(0.0..10.0)).collect(), theta: 25.0 })
            .collect()
    };
    let train = mk(&mut rng, 500);
    let val = mk(&mut rng, 100);
    let cfg = TrainingConfig { k: 500, m: 200, m_mc: 1000, q: 0.99, max_epochs: 60, ..Default::default() };
    let net = DeepSetsNetwork::glorot(&mut rng);
    let (trained, report) = train_on_pairs(&net, &cfg, &train, &val, &mut rng).unwrap();
    assert!(report.best_risk() <= report.validation_risk[0]);
    let probe: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..10.0)).collect();
    let est = trained.forward(&probe).unwrap();
    assert!((est / 25.0 - 1.0).abs() < 0.02, "{est}");
}

#[test]
fn bootstrap_behaviour() {
    let net = trained_like_net(50);
    let mut rng = seeded(51);
    let small: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..4.0)).collect();
    let one = bootstrap_estimate(&net, &small, 1, 0.95, &mut rng).unwrap();
    assert_eq!(one.lower, one.upper);
    assert_eq!(one.lower, one.replicates[0]);

    let large: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..4.0)).collect();
    let a = bootstrap_estimate(&net, &small, 300, 0.95, &mut rng).unwrap();
    let b = bootstrap_estimate(&net, &large, 300, 0.95, &mut rng).unwrap();
    assert!(b.upper - b.lower < a.upper - a.lower, "{:?} {:?}", (a.lower, a.upper), (b.lower, b.upper));

    let mut untrained = net.clone();
    untrained.standardisation = None;
    assert!(estimate(&untrained, &small).is_err());
}

#[test]
fn pairs_are_reproducible_and_cached() {
    let mut rng = seeded(60);
    let prior = tailkit::synthetic::nbe_prior(4, 50, 0.6, &mut rng);
    let a = generate_pairs(&prior, 6, 20, 0.99, 5000, 7, 0).unwrap();
    let b = generate_pairs(&prior, 6, 20, 0.99, 5000, 7, 0).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.bin");
    io::write_pairs(&a, &mut std::fs::File::create(&path).unwrap()).unwrap();
    let back = io::read_pairs(&mut std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back, a);
    for p in &a {
        // theta lies above the lambda-level of every generating mixture
        assert!(p.theta > prior.body.values()[prior.body.len() - 1]);
    }
}

#[test]
fn mixed_pool_quantile_matches_analytic_inversion() {
    let body = EmpiricalDistribution::new((0..500).map(|i| -3.0 + i as f64 * 0.005).collect()).unwrap();
    let pool = PriorPool::new(vec![(0.0, 1.0, 0.1), (0.5, 2.0, -0.1), (1.0, 0.5, 0.25), (0.2, 1.5, 0.0)]).unwrap();
    let (lambda, q) = (0.7, 0.999);
    let pair = simulate_training_pair(&pool, 100, q, lambda, &body, 1_000_000, &mut seeded(70)).unwrap();
    let cdf = |y: f64| {
        pool.triples
            .iter()
            .map(|&(u, s, x)| {
                let g = tailkit::distributions::GpdParams::new(s, x).unwrap();
                lambda * body.cdf(y) + (1.0 - lambda) * if y > u { g.cdf(y - u) } else { 0.0 }
            })
            .sum::<f64>()
            / pool.len() as f64
    };
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < q {
            lo = mid
        } else {
            hi = mid
        }
    }
    assert!((pair.theta / hi - 1.0).abs() < 0.01, "{} vs {hi}", pair.theta);
}
