use crate::{Error, Result};

/// Central finite-difference gradient. The step for coordinate `i` is
/// `step * max(1, |x_i|)`.
pub fn fd_gradient(objective: impl Fn(&[f64]) -> f64, point: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let h = step * point[i].abs().max(1.0);
        x[i] = point[i] + h;
        let up = objective(&x);
        x[i] = point[i] - h;
        let down = objective(&x);
        x[i] = point[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective not finite within {h:e} of coordinate {i} (x[{i}] = {})",
                point[i]
            )));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let g = fd_gradient(|x| x[0] * x[0], &[2.0], 1e-5).unwrap();
        assert!((g[0] - 4.0).abs() < 1e-6);
        let g = fd_gradient(|_| 3.5, &[1.0, -2.0, 7.0], 1e-5).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let g = fd_gradient(|x| x[0] * x[1], &[2.0, 3.0], 1e-5).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-6 && (g[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_names_coordinate() {
        let err = fd_gradient(|x| if x[1] > 1.0 { f64::INFINITY } else { x[1] }, &[0.0, 1.0], 1e-3).unwrap_err();
        assert!(err.to_string().contains("coordinate 1"), "{err}");
    }
}
