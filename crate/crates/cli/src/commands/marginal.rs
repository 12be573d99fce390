use std::path::Path;

use serde_json::json;
use tailkit::marginal::*;

use crate::input::{covariate_rows, load_dataset};
use crate::output::Run;
use crate::CliError;

pub fn fit(mut run: Run, data: &Path) -> Result<String, CliError> {
    let ds = load_dataset(&mut run, data)?;
    let formula = run.config.marginal_formula()?;
    let thr = fit_threshold(&ds, &formula, run.config.marginal.lambda)?;
    let fit = fit_gpd_regression(&ds, &formula, &thr)?;
    let b = bic(&fit, &ds)?;
    let t = transform_to_exponential(&fit, &ds)?;
    if !t.excluded.is_empty() {
        run.caveat(format!("{} rows with missing covariates left out of the exponential transform", t.excluded.len()));
    }
    let mut w = csv::Writer::from_writer(run.create("exponential_margins.csv")?);
    w.write_record(["row", "value"])?;
    let kept = (0..ds.n_rows()).filter(|r| !t.excluded.contains(r));
    for (r, v) in kept.zip(&t.values) {
        w.write_record([r.to_string(), v.to_string()])?;
    }
    w.flush()?;
    // The body sample is training data, not a result.
    let mut summary = serde_json::to_value(&fit).map_err(|e| CliError::output(e.to_string()))?;
    if let Some(obj) = summary.as_object_mut() {
        obj.remove("body");
    }
    run.finish(json!({ "fit": summary, "bic": b, "n_body": fit.body.len() }))
}

pub fn select(mut run: Run, data: &Path) -> Result<String, CliError> {
    let ds = load_dataset(&mut run, data)?;
    let formula = run.config.marginal_formula()?;
    let m = &run.config.marginal;
    let sel = select_threshold(&ds, &formula, &m.candidates, m.lambda_star)?;
    let failed = sel.scores.iter().filter(|s| s.1.is_none()).count();
    if failed > 0 {
        run.caveat(format!("{failed} candidate levels failed to fit"));
    }
    let mut w = csv::Writer::from_writer(run.create("twsmad.csv")?);
    w.write_record(["lambda", "twsmad"])?;
    for (l, s) in &sel.scores {
        w.write_record([l.to_string(), s.map(|v| v.to_string()).unwrap_or_default()])?;
    }
    w.flush()?;
    run.finish(sel)
}

pub fn predict(mut run: Run, data: &Path, points: &Path) -> Result<String, CliError> {
    let ds = load_dataset(&mut run, data)?;
    let xs = covariate_rows(&mut run, points)?;
    let formula = run.config.marginal_formula()?;
    let m = run.config.marginal.clone();
    let thr = fit_threshold(&ds, &formula, m.lambda)?;
    let fit = fit_gpd_regression(&ds, &formula, &thr)?;
    let point: Vec<f64> = xs.iter().map(|x| conditional_quantile(&fit, x, m.q)).collect::<Result<_, _>>()?;
    let boot = bootstrap_quantiles(&ds, &formula, m.lambda, &xs, m.q, m.bootstrap, m.interval_level, run.seed)?;
    if boot.degenerate {
        run.caveat(format!("only {} bootstrap replicates; intervals are unreliable", boot.replicates));
    }
    if boot.failures > 0 {
        run.caveat(format!("{} of {} bootstrap refits failed", boot.failures, boot.replicates));
    }
    let mut w = csv::Writer::from_writer(run.create("quantiles.csv")?);
    w.write_record(["row", "estimate", "lower", "median", "upper"])?;
    for (r, (p, iv)) in point.iter().zip(&boot.intervals).enumerate() {
        w.write_record([r.to_string(), p.to_string(), iv.lower.to_string(), iv.median.to_string(), iv.upper.to_string()])?;
    }
    w.flush()?;
    run.finish(json!({
        "q": m.q,
        "lambda": m.lambda,
        "interval_level": m.interval_level,
        "estimates": point,
        "intervals": boot.intervals,
        "replicates": boot.replicates,
        "failures": boot.failures,
    }))
}
