//! Cubic (or other degree) B-spline bases with quantile-placed knots.

use serde::{Deserialize, Serialize};

use crate::stats::quantile_sorted;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    pub degree: usize,
    pub interior_knots: Vec<f64>,
    pub boundary_knots: (f64, f64),
}

impl SplineBasis {
    pub fn new(degree: usize, interior_knots: Vec<f64>, boundary_knots: (f64, f64)) -> Result<Self> {
        let (lo, hi) = boundary_knots;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("bad boundary knots ({lo}, {hi})")));
        }
        if interior_knots.windows(2).any(|w| w[0] >= w[1])
            || interior_knots.iter().any(|&k| !(k > lo && k < hi))
        {
            return Err(Error::invalid("interior knots must be strictly increasing inside the boundary"));
        }
        Ok(Self { degree, interior_knots, boundary_knots })
    }

    /// Knots at equally spaced quantiles of the observed values; boundary at
    /// the observed range. Tied quantiles are merged.
    pub fn from_data(x: &[Option<f64>], n_interior: usize, degree: usize) -> Result<Self> {
        let mut v: Vec<f64> = x.iter().flatten().copied().filter(|v| v.is_finite()).collect();
        if v.len() < 2 {
            return Err(Error::InsufficientData { what: "spline covariate values".into(), have: v.len(), need: 2 });
        }
        v.sort_by(f64::total_cmp);
        let (lo, hi) = (v[0], v[v.len() - 1]);
        if lo == hi {
            return Err(Error::invalid("spline covariate is constant"));
        }
        let mut knots: Vec<f64> = (1..=n_interior)
            .map(|i| quantile_sorted(&v, i as f64 / (n_interior + 1) as f64))
            .filter(|&k| k > lo && k < hi)
            .collect();
        knots.dedup();
        Self::new(degree, knots, (lo, hi))
    }

    pub fn n_basis(&self) -> usize {
        self.interior_knots.len() + self.degree + 1
    }

    fn knot(&self, i: usize) -> f64 {
        let p = self.degree;
        let m = self.interior_knots.len();
        if i <= p {
            self.boundary_knots.0
        } else if i <= p + m {
            self.interior_knots[i - p - 1]
        } else {
            self.boundary_knots.1
        }
    }

    /// Basis values at `x`, clamped into the boundary. Returns the values and
    /// whether clamping occurred.
    pub fn evaluate(&self, x: f64) -> (Vec<f64>, bool) {
        let (lo, hi) = self.boundary_knots;
        let clamped = x < lo || x > hi;
        let x = x.clamp(lo, hi);
        let p = self.degree;
        let nb = self.n_basis();
        // span index s with knot(s) <= x < knot(s+1), s in [p, nb-1]
        let mut s = p;
        while s < nb - 1 && x >= self.knot(s + 1) {
            s += 1;
        }
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = x - self.knot(s + 1 - j);
            right[j] = self.knot(s + j) - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom > 0.0 { n[r] / denom } else { 0.0 };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        let mut out = vec![0.0; nb];
        for j in 0..=p {
            out[s - p + j] = n[j];
        }
        (out, clamped)
    }
}

/// Column-major spline design block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplineDesign {
    pub columns: Vec<Vec<f64>>,
    /// Means subtracted from each column (over non-missing rows).
    pub column_means: Vec<f64>,
    /// Number of inputs that fell outside the boundary knots and were clamped.
    pub clamped: usize,
}

impl SplineDesign {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

/// Evaluates the basis for every row, centres each column over the
/// non-missing rows, and leaves missing rows as zeros.
pub fn spline_design(x: &[Option<f64>], basis: &SplineBasis) -> SplineDesign {
    let nb = basis.n_basis();
    let mut columns = vec![vec![0.0; x.len()]; nb];
    let mut clamped = 0;
    let mut present = 0usize;
    for (r, xi) in x.iter().enumerate() {
        if let Some(v) = xi.filter(|v| v.is_finite()) {
            let (row, c) = basis.evaluate(v);
            clamped += c as usize;
            present += 1;
            for (col, b) in columns.iter_mut().zip(row) {
                col[r] = b;
            }
        }
    }
    let mut column_means = vec![0.0; nb];
    if present > 0 {
        for (col, mean) in columns.iter_mut().zip(column_means.iter_mut()) {
            *mean = x
                .iter()
                .zip(col.iter())
                .filter(|(xi, _)| xi.is_some_and(f64::is_finite))
                .map(|(_, v)| v)
                .sum::<f64>()
                / present as f64;
            for (xi, v) in x.iter().zip(col.iter_mut()) {
                if xi.is_some_and(f64::is_finite) {
                    *v -= *mean;
                }
            }
        }
    }
    SplineDesign { columns, column_means, clamped }
}

/// Centred basis row for a new point, consistent with a design built by
/// [`spline_design`]. Missing input gives zeros.
pub fn centred_row(basis: &SplineBasis, means: &[f64], x: Option<f64>) -> Vec<f64> {
    match x.filter(|v| v.is_finite()) {
        None => vec![0.0; means.len()],
        Some(v) => basis.evaluate(v).0.into_iter().zip(means).map(|(b, m)| b - m).collect(),
    }
}
