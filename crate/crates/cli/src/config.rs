use std::path::Path;

use serde::{Deserialize, Serialize};
use tailkit::dataset::CsvSchema;
use tailkit::marginal::ModelFormula;
use tailkit::nbe::TrainingConfig;
use tailkit::synthetic::{MixtureBlocks, PotModel};
use tailkit::tailprob::{Cut, EdmConfig};

use crate::CliError;

/// Everything a run reads besides its input files. Missing sections take
/// their defaults; the effective value is hashed into every output.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub data: CsvSchema,
    pub marginal: MarginalConfig,
    pub nbe: NbeConfig,
    pub condex: CondexConfig,
    pub tailprob: TailprobConfig,
    pub synthetic: SyntheticConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginalConfig {
    /// Defaults to an intercept-only model for the first response column.
    pub formula: Option<ModelFormula>,
    pub lambda: f64,
    pub candidates: Vec<f64>,
    pub lambda_star: f64,
    pub q: f64,
    pub bootstrap: usize,
    pub interval_level: f64,
}

impl Default for MarginalConfig {
    fn default() -> Self {
        Self {
            formula: None,
            lambda: 0.95,
            candidates: (0..=16).map(|k| 0.90 + 0.005 * k as f64).collect(),
            lambda_star: 0.99,
            q: 0.9999,
            bootstrap: 200,
            interval_level: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbeConfig {
    /// Bootstrap refits that make up the empirical prior.
    pub prior_fits: usize,
    pub training: TrainingConfig,
    pub bootstrap: usize,
    pub interval_level: f64,
}

impl Default for NbeConfig {
    fn default() -> Self {
        Self { prior_fits: 200, training: TrainingConfig::default(), bootstrap: 200, interval_level: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CondexConfig {
    /// Three response columns; defaults to the schema's responses.
    pub responses: Vec<String>,
    /// Defaults to the schema's covariates.
    pub covariates: Option<Vec<String>>,
    /// Laplace-scale threshold; defaults to the 0.95 Laplace quantile.
    pub threshold: Option<f64>,
    pub homogeneous_beta: bool,
    pub n: usize,
    pub n_prime: usize,
}

impl Default for CondexConfig {
    fn default() -> Self {
        Self { responses: vec![], covariates: None, threshold: None, homogeneous_beta: true, n: 1_000_000, n_prime: 3_000_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailprobConfig {
    /// Columns to analyse; defaults to the schema's responses, then to all.
    pub columns: Vec<String>,
    pub edm: EdmConfig,
    pub cut: Cut,
    /// Explicit blocks of column positions; overrides clustering.
    pub blocks: Option<Vec<Vec<usize>>>,
    /// Uniform margins from ranks instead of the declared margin.
    pub rank_margins: bool,
    pub phi: f64,
    pub phi_star: f64,
    pub phi_grid: Vec<f64>,
    pub tolerance: f64,
    pub bootstrap: usize,
    pub level: f64,
}

impl Default for TailprobConfig {
    fn default() -> Self {
        Self {
            columns: vec![],
            edm: EdmConfig::default(),
            cut: Cut::Blocks(1),
            blocks: None,
            rank_margins: false,
            phi: 1.0 / 300.0,
            phi_star: 0.25,
            phi_grid: (0..=12).map(|k| 0.1 + 0.025 * k as f64).collect(),
            tolerance: 0.25,
            bootstrap: 200,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SyntheticKind {
    /// One response `y` with covariates `x` and `noise`.
    Pot(PotModel),
    /// Three Gumbel responses from the one-covariate conditional extremes truth.
    Condex,
    /// Three Gumbel responses from a Gaussian copula.
    Gaussian { corr: [f64; 3], noise_covariates: usize },
    /// Independent blocks on Gumbel margins.
    Mixture(MixtureBlocks),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub model: SyntheticKind,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { n: 10_000, model: SyntheticKind::Pot(PotModel::default()) }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
        }
    }

    pub fn marginal_formula(&self) -> Result<ModelFormula, CliError> {
        match (&self.marginal.formula, self.data.responses.first()) {
            (Some(f), _) => Ok(f.clone()),
            (None, Some(r)) => Ok(ModelFormula::intercept_only(r)),
            (None, None) => Err(CliError::usage("no marginal formula and no response column declared")),
        }
    }
}
