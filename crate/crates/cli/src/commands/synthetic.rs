use serde_json::json;
use tailkit::dataset::{export_csv, Dataset};
use tailkit::numopt::rng::seeded;
use tailkit::synthetic::{gaussian_copula_gumbel, CondExTruth};
use tailkit::condex::CondExData;

use crate::config::SyntheticKind;
use crate::output::Run;
use crate::CliError;

fn from_condex(data: &CondExData) -> Result<Dataset, CliError> {
    let mut names = vec!["Y1".to_string(), "Y2".to_string(), "Y3".to_string()];
    names.extend(data.covariate_names.iter().cloned());
    let mut cols: Vec<Vec<f64>> = (0..3).map(|k| data.rows.iter().map(|r| r[k]).collect()).collect();
    cols.extend((0..data.n_covariates()).map(|c| data.covariates.iter().map(|r| r[c]).collect()));
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(Dataset::from_complete(&refs, cols)?)
}

pub fn simulate(run: Run) -> Result<String, CliError> {
    let cfg = run.config.synthetic.clone();
    let mut rng = seeded(run.seed);
    let ds = match &cfg.model {
        SyntheticKind::Pot(m) => m.simulate(cfg.n, &mut rng),
        SyntheticKind::Condex => from_condex(&CondExTruth::one_covariate().simulate(cfg.n, &mut rng))?,
        SyntheticKind::Gaussian { corr, noise_covariates } => {
            from_condex(&gaussian_copula_gumbel(cfg.n, *corr, *noise_covariates, &mut rng)?)?
        }
        SyntheticKind::Mixture(m) => {
            let cols = m.simulate_gumbel(cfg.n, &mut rng);
            let names: Vec<String> = (1..=cols.len()).map(|k| format!("Y{k}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            Dataset::from_complete(&refs, cols)?
        }
    };
    export_csv(&ds, run.path("data.csv"))?;
    run.finish(json!({ "model": cfg.model, "n": ds.n_rows(), "columns": ds.names(), "file": "data.csv" }))
}
