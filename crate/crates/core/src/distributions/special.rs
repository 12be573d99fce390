//! Special functions: regularised incomplete gamma and the standard normal.

use statrs::function::erf;
pub use statrs::function::gamma::ln_gamma;

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAX_ITER: usize = 1000;

/// Regularised incomplete gamma functions `(P(a, x), Q(a, x))`.
///
/// `ln_gamma_a` must equal `ln Γ(a)`; callers evaluating many points at a
/// fixed shape pass it in precomputed.
pub fn regularized_gamma(a: f64, x: f64, ln_gamma_a: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma_a;
    if x < a + 1.0 {
        // series for P
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefactor).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        // modified Lentz continued fraction for Q
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefactor).exp().min(1.0);
        (1.0 - q, q)
    }
}

/// Inverse of the upper regularised gamma: the `x` with `Q(a, x) = q`.
pub fn inverse_upper_gamma(a: f64, q: f64, ln_gamma_a: f64) -> f64 {
    if q >= 1.0 {
        return 0.0;
    }
    if q <= 0.0 {
        return f64::INFINITY;
    }
    // bracket
    let mut lo = 0.0;
    let mut hi = a.max(1.0);
    while regularized_gamma(a, hi, ln_gamma_a).1 > q {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (p, qx) = regularized_gamma(a, x, ln_gamma_a);
        // work with whichever tail is smaller for relative accuracy
        let resid = if q < 0.5 { qx - q } else { (1.0 - q) - p };
        if resid > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = (-x + (a - 1.0) * x.ln() - ln_gamma_a).exp();
        let mut next = if dens > 0.0 { x + resid / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) {
            return next;
        }
        x = next;
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    x
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

const LN_GAMMA_HALF: f64 = 0.5723649429247001;

/// `Φ(x)`, with full relative accuracy in the lower tail.
pub fn normal_cdf(x: f64) -> f64 {
    let (p, q) = regularized_gamma(0.5, 0.5 * x * x, LN_GAMMA_HALF);
    if x < 0.0 {
        0.5 * q
    } else {
        0.5 + 0.5 * p
    }
}

/// `Φ⁻¹(p)`, accurate in both tails.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -normal_quantile(1.0 - p);
    }
    let x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    // one Newton step against the accurate CDF
    let dens = normal_pdf(x);
    if dens > 0.0 {
        x - (normal_cdf(x) - p) / dens
    } else {
        x
    }
}
