use serde::{Deserialize, Serialize};

/// Maps a constrained parameter to and from the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParamTransform {
    Identity,
    /// Positive reals via `exp`.
    Log,
    /// Open interval `(lo, hi)` via a scaled logistic.
    ScaledLogit { lo: f64, hi: f64 },
    /// `(-1, 1)` via `tanh`.
    Atanh,
}

impl ParamTransform {
    /// Constrained value to unconstrained coordinate.
    pub fn forward(&self, x: f64) -> f64 {
        match *self {
            ParamTransform::Identity => x,
            ParamTransform::Log => x.ln(),
            ParamTransform::ScaledLogit { lo, hi } => {
                let p = (x - lo) / (hi - lo);
                (p / (1.0 - p)).ln()
            }
            ParamTransform::Atanh => x.atanh(),
        }
    }

    /// Unconstrained coordinate back to the constrained value.
    pub fn inverse(&self, u: f64) -> f64 {
        match *self {
            ParamTransform::Identity => u,
            ParamTransform::Log => u.exp(),
            ParamTransform::ScaledLogit { lo, hi } => lo + (hi - lo) * logistic(u),
            ParamTransform::Atanh => u.tanh(),
        }
    }

    /// `d inverse(u) / du`.
    pub fn inverse_derivative(&self, u: f64) -> f64 {
        match *self {
            ParamTransform::Identity => 1.0,
            ParamTransform::Log => u.exp(),
            ParamTransform::ScaledLogit { lo, hi } => {
                let p = logistic(u);
                (hi - lo) * p * (1.0 - p)
            }
            ParamTransform::Atanh => {
                let t = u.tanh();
                1.0 - t * t
            }
        }
    }
}

pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}
