//! Small descriptive-statistics helpers shared by the estimators.

/// Type-1 (inverse-CDF) quantile of an ascending slice. `prob` is clamped to
/// `[0, 1]`; the slice must be non-empty.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let p = prob.clamp(0.0, 1.0);
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Type-1 quantile of an unsorted slice (sorts a copy).
pub fn quantile(values: &[f64], prob: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, prob)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (denominator `n - 1`).
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Lower, middle and upper percentile interval of replicate values at a
/// central `level`.
pub fn percentile_interval(values: &[f64], level: f64) -> (f64, f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level.clamp(0.0, 1.0));
    (
        quantile_sorted(&v, tail),
        quantile_sorted(&v, 0.5),
        quantile_sorted(&v, 1.0 - tail),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interval_degenerate_at_zero_level() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        let (l, m, u) = percentile_interval(&v, 0.0);
        assert_eq!((l, m, u), (3.0, 3.0, 3.0));
        let (l, m, u) = percentile_interval(&v, 0.5);
        assert!(l <= m && m <= u);
    }

    #[test]
    fn ks_of_grid_is_small() {
        let n = 1000;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!(ks_distance(&s, |x| x) <= 0.5 / n as f64 + 1e-12);
    }
}
