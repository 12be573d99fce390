//! Small dense linear-algebra helpers over nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Solves `a x = b` for symmetric positive-definite `a`. A tiny diagonal
/// jitter is tried when the plain factorisation fails.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for k in [1e-12, 1e-10, 1e-8] {
        let mut aj = a.clone();
        for i in 0..aj.nrows() {
            aj[(i, i)] += k * scale;
        }
        if let Some(ch) = aj.cholesky() {
            return Ok(ch.solve(b));
        }
    }
    Err(Error::NonFinite("matrix is not positive definite".into()))
}

/// Inverse of a symmetric positive-definite matrix.
pub fn inverse_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(&id)),
        None => a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NonFinite("matrix is singular".into())),
    }
}

/// Indices of columns that are (numerically) linear combinations of the
/// columns before them, by modified Gram–Schmidt. Columns are given as
/// slices of equal length.
pub fn collinear_columns(columns: &[Vec<f64>], rel_tol: f64) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = col.clone();
        for q in &basis {
            let d: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
            r.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= rel_tol * norm0 {
            out.push(j);
        } else {
            r.iter_mut().for_each(|v| *v /= norm);
            basis.push(r);
        }
    }
    out
}
