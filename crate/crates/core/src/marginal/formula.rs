use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::numopt::{centred_row, spline_design, SplineBasis};
use crate::{Error, Result};

/// Interior knots and degree for smooth terms.
pub const SMOOTH_INTERIOR_KNOTS: usize = 8;
pub const SMOOTH_DEGREE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Linear,
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub covariate: String,
    pub kind: TermKind,
}

impl Term {
    pub fn linear(name: &str) -> Self {
        Self { covariate: name.into(), kind: TermKind::Linear }
    }
    pub fn smooth(name: &str) -> Self {
        Self { covariate: name.into(), kind: TermKind::Smooth }
    }
}

/// Term lists for the threshold, the GPD scale and the GPD shape. Every
/// parameter always carries an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFormula {
    pub response: String,
    #[serde(default)]
    pub threshold: Vec<Term>,
    #[serde(default)]
    pub sigma: Vec<Term>,
    #[serde(default)]
    pub xi: Vec<Term>,
}

impl ModelFormula {
    pub fn intercept_only(response: &str) -> Self {
        Self { response: response.into(), threshold: vec![], sigma: vec![], xi: vec![] }
    }

    pub fn validate(&self) -> Result<()> {
        for (label, terms) in [("threshold", &self.threshold), ("sigma", &self.sigma), ("xi", &self.xi)] {
            let mut seen = HashSet::new();
            for t in terms {
                if t.covariate == self.response {
                    return Err(Error::invalid(format!("{label}: response '{}' used as a covariate", t.covariate)));
                }
                if !seen.insert(t.covariate.as_str()) {
                    return Err(Error::invalid(format!("{label}: covariate '{}' repeated", t.covariate)));
                }
            }
        }
        Ok(())
    }

    /// Every covariate mentioned by any parameter.
    pub fn covariates(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in self.threshold.iter().chain(&self.sigma).chain(&self.xi) {
            if !out.contains(&t.covariate.as_str()) {
                out.push(&t.covariate);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Block {
    Linear { covariate: String, center: f64 },
    Smooth { covariate: String, basis: SplineBasis, means: Vec<f64> },
}

impl Block {
    fn width(&self) -> usize {
        match self {
            Block::Linear { .. } => 1,
            // the full centred basis sums to zero, so one column is dropped
            Block::Smooth { means, .. } => means.len() - 1,
        }
    }
}

/// Frozen column construction for one parameter: centring constants and
/// spline bases computed on the training rows. Column 0 is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    blocks: Vec<Block>,
}

impl DesignSpec {
    pub fn intercept_only() -> Self {
        Self { blocks: vec![] }
    }

    pub fn build(data: &Dataset, terms: &[Term], rows: &[usize]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(terms.len());
        for t in terms {
            let col = data.column(&t.covariate)?;
            let values: Vec<Option<f64>> = rows.iter().map(|&r| col[r]).collect();
            match t.kind {
                TermKind::Linear => {
                    let present: Vec<f64> = values.iter().flatten().copied().collect();
                    if present.is_empty() {
                        return Err(Error::InsufficientData {
                            what: format!("observed values of '{}'", t.covariate),
                            have: 0,
                            need: 1,
                        });
                    }
                    let center = present.iter().sum::<f64>() / present.len() as f64;
                    blocks.push(Block::Linear { covariate: t.covariate.clone(), center });
                }
                TermKind::Smooth => {
                    let basis = SplineBasis::from_data(&values, SMOOTH_INTERIOR_KNOTS, SMOOTH_DEGREE)?;
                    let design = spline_design(&values, &basis);
                    blocks.push(Block::Smooth {
                        covariate: t.covariate.clone(),
                        basis,
                        means: design.column_means,
                    });
                }
            }
        }
        Ok(Self { blocks })
    }

    pub fn n_columns(&self) -> usize {
        1 + self.blocks.iter().map(Block::width).sum::<usize>()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut out = vec!["(Intercept)".to_string()];
        for b in &self.blocks {
            match b {
                Block::Linear { covariate, .. } => out.push(covariate.clone()),
                Block::Smooth { covariate, means, .. } => {
                    out.extend((1..means.len()).map(|k| format!("s({covariate}).{k}")));
                }
            }
        }
        out
    }

    /// Column indices that belong to smooth blocks (the ridge-penalised set).
    pub fn smooth_columns(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut at = 1;
        for b in &self.blocks {
            if matches!(b, Block::Smooth { .. }) {
                out.extend(at..at + b.width());
            }
            at += b.width();
        }
        out
    }

    /// Design row for one observation; a missing covariate contributes zero.
    pub fn row(&self, lookup: impl Fn(&str) -> Option<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_columns());
        out.push(1.0);
        for b in &self.blocks {
            match b {
                Block::Linear { covariate, center } => {
                    out.push(lookup(covariate).filter(|v| v.is_finite()).map_or(0.0, |v| v - center));
                }
                Block::Smooth { covariate, basis, means } => {
                    let r = centred_row(basis, means, lookup(covariate));
                    out.extend_from_slice(&r[..r.len() - 1]);
                }
            }
        }
        out
    }

    pub fn row_from_map(&self, x: &BTreeMap<String, f64>) -> Vec<f64> {
        self.row(|name| x.get(name).copied())
    }

    /// Row-major design for the given dataset rows.
    pub fn matrix(&self, data: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
        let cols: Vec<(&str, &[Option<f64>])> = self
            .covariates()
            .into_iter()
            .map(|c| Ok((c, data.column(c)?)))
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(rows.len() * self.n_columns());
        for &r in rows {
            out.extend(self.row(|name| cols.iter().find(|(c, _)| *c == name).and_then(|(_, v)| v[r])));
        }
        Ok(out)
    }

    pub fn covariates(&self) -> Vec<&str> {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Linear { covariate, .. } | Block::Smooth { covariate, .. } => covariate.as_str(),
            })
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Dataset {
        let x: Vec<Option<f64>> = (0..200).map(|i| if i % 17 == 0 { None } else { Some((i as f64 * 0.7).cos()) }).collect();
        let z: Vec<Option<f64>> = (0..200).map(|i| Some(i as f64)).collect();
        let y: Vec<Option<f64>> = (0..200).map(|i| Some(i as f64 * 0.1)).collect();
        Dataset::new(vec!["y".into(), "x".into(), "z".into()], vec![y, x, z]).unwrap()
    }

    #[test]
    fn repeated_covariate_rejected() {
        let f = ModelFormula {
            response: "y".into(),
            threshold: vec![Term::linear("x"), Term::smooth("x")],
            sigma: vec![],
            xi: vec![],
        };
        assert!(f.validate().is_err());
    }

    #[test]
    fn columns_centred_and_missing_zero() {
        let d = data();
        let rows: Vec<usize> = (0..200).collect();
        let spec = DesignSpec::build(&d, &[Term::smooth("x"), Term::linear("z")], &rows).unwrap();
        assert_eq!(spec.n_columns(), 1 + 11 + 1);
        assert_eq!(spec.smooth_columns(), (1..12).collect::<Vec<_>>());
        let m = spec.matrix(&d, &rows).unwrap();
        let p = spec.n_columns();
        for j in 1..p {
            let mean: f64 = (0..200).filter(|r| j > 11 || r % 17 != 0).map(|r| m[r * p + j]).sum::<f64>()
                / if j > 11 { 200.0 } else { 188.0 };
            assert!(mean.abs() < 1e-12, "column {j}: {mean}");
        }
        for j in 1..12 {
            assert_eq!(m[17 * p + j], 0.0);
        }
    }
}
