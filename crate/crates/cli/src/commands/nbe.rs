use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde_json::json;
use tailkit::nbe::io::{read_weights, write_weights};
use tailkit::nbe::*;
use tailkit::numopt::rng::seeded;

use crate::input::load_dataset;
use crate::output::Run;
use crate::CliError;

pub fn make_prior(mut run: Run, data: &Path) -> Result<String, CliError> {
    let ds = load_dataset(&mut run, data)?;
    let formula = run.config.marginal_formula()?;
    let prior = build_prior(&ds, &formula, run.config.marginal.lambda, run.config.nbe.prior_fits, run.seed)?;
    if prior.pools.len() < run.config.nbe.prior_fits {
        run.caveat(format!("{} of {} prior refits failed", run.config.nbe.prior_fits - prior.pools.len(), run.config.nbe.prior_fits));
    }
    let text = serde_json::to_string(&prior).map_err(|e| CliError::output(e.to_string()))?;
    fs::write(run.path("prior.json"), text).map_err(|e| CliError::output(e.to_string()))?;
    run.finish(json!({
        "pools": prior.pools.len(),
        "pool_size": prior.pools.first().map_or(0, |p| p.len()),
        "body_size": prior.body.len(),
        "lambda": prior.lambda,
        "file": "prior.json",
    }))
}

pub fn train_network(mut run: Run, prior_path: &Path) -> Result<String, CliError> {
    run.record_input(prior_path)?;
    let file = fs::File::open(prior_path).map_err(|e| CliError::input(format!("{}: {e}", prior_path.display())))?;
    let prior: NbePrior = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::input(format!("{}: {e}", prior_path.display())))?;
    let mut cfg = run.config.nbe.training.clone();
    if (cfg.lambda - prior.lambda).abs() > 1e-12 {
        run.caveat(format!("training lambda {} replaced by the prior's {}", cfg.lambda, prior.lambda));
        cfg.lambda = prior.lambda;
    }
    let mut rng = seeded(run.seed);
    let net = DeepSetsNetwork::glorot(&mut rng);
    let (trained, report) = train(&net, &cfg, &prior, &mut rng)?;
    for w in &report.warnings {
        run.caveat(w.clone());
    }
    let mut out = BufWriter::new(run.create("weights.bin")?);
    write_weights(&trained, &mut out)?;
    drop(out);
    let mut w = csv::Writer::from_writer(run.create("risk.csv")?);
    w.write_record(["epoch", "validation", "training"])?;
    for (e, (v, t)) in report.validation_risk.iter().zip(&report.training_risk).enumerate() {
        w.write_record([e.to_string(), v.to_string(), t.to_string()])?;
    }
    w.flush()?;
    run.finish(json!({
        "parameters": trained.n_params(),
        "best_epoch": report.best_epoch,
        "best_validation_risk": report.best_risk(),
        "initial_validation_risk": report.validation_risk[0],
        "epochs": report.validation_risk.len() - 1,
        "file": "weights.bin",
    }))
}

pub fn estimate_quantile(mut run: Run, weights: &Path, data: &Path) -> Result<String, CliError> {
    run.record_input(weights)?;
    let file = fs::File::open(weights).map_err(|e| CliError::input(format!("{}: {e}", weights.display())))?;
    let net = read_weights(&mut BufReader::new(file))?;
    let ds = load_dataset(&mut run, data)?;
    let response = run.config.marginal_formula()?.response;
    let values = ds.complete_column(&response)?;
    let cfg = run.config.nbe.clone();
    let boot = bootstrap_estimate(&net, &values, cfg.bootstrap, cfg.interval_level, &mut seeded(run.seed))?;
    if values.len() != cfg.training.m {
        run.caveat(format!("network trained on sets of {} values, applied to {}", cfg.training.m, values.len()));
    }
    run.finish(json!({
        "response": response,
        "n": values.len(),
        "estimate": boot.point,
        "lower": boot.lower,
        "upper": boot.upper,
        "interval_level": cfg.interval_level,
        "bootstrap": cfg.bootstrap,
    }))
}
