use std::path::Path;

use serde::Serialize;
use serde_json::json;
use tailkit::condex::*;
use tailkit::dataset::Dataset;
use tailkit::distributions::gumbel_cdf;
use tailkit::stats::ks_distance;

use crate::input::{load_dataset, parse_region, to_gumbel};
use crate::output::Run;
use crate::CliError;

struct Prepared {
    data: CondExData,
    responses: Vec<String>,
    fits: Vec<CondExFit>,
}

fn load(run: &mut Run, path: &Path) -> Result<(Dataset, Vec<String>), CliError> {
    let ds = load_dataset(run, path)?;
    let cfg = &run.config.condex;
    let responses = if cfg.responses.is_empty() { ds.responses().to_vec() } else { cfg.responses.clone() };
    if responses.len() != 3 {
        return Err(CliError::usage(format!("conditional extremes need three responses, got {}", responses.len())));
    }
    Ok((ds, responses))
}

fn prepare(run: &mut Run, ds: &Dataset, responses: Vec<String>) -> Result<Prepared, CliError> {
    let cfg = run.config.condex.clone();
    let covariates = cfg.covariates.unwrap_or_else(|| ds.covariates().to_vec());
    let ds = to_gumbel(run, ds, &responses)?;
    let cov: Vec<&str> = covariates.iter().map(String::as_str).collect();
    let data = CondExData::from_dataset(&ds, [&responses[0], &responses[1], &responses[2]], &cov)?;
    if data.n() < ds.n_rows() {
        run.caveat(format!("{} incomplete rows were dropped", ds.n_rows() - data.n()));
    }
    let u = cfg.threshold.unwrap_or_else(default_threshold);
    let fits = fit_all(&data, u, cfg.homogeneous_beta)?;
    for f in &fits {
        if !f.converged {
            run.caveat(format!("fit conditioning on {} did not meet the convergence tolerance", responses[f.params.index]));
        }
    }
    Ok(Prepared { data, responses, fits })
}

#[derive(Serialize)]
struct FitSummary<'a> {
    conditioning_on: &'a str,
    params: &'a CondExParams,
    threshold: f64,
    n_exceedances: usize,
    negloglik: f64,
    aic: f64,
    converged: bool,
}

fn summaries<'a>(p: &'a Prepared) -> Vec<FitSummary<'a>> {
    p.fits
        .iter()
        .map(|f| FitSummary {
            conditioning_on: &p.responses[f.params.index],
            params: &f.params,
            threshold: f.u,
            n_exceedances: f.n_exceedances(),
            negloglik: f.negloglik,
            aic: f.aic(),
            converged: f.converged,
        })
        .collect()
}

pub fn fit(mut run: Run, data: &Path) -> Result<String, CliError> {
    let (ds, responses) = load(&mut run, data)?;
    let p = prepare(&mut run, &ds, responses)?;
    write_coefficient_table(&p.fits, run.create("coefficients.csv")?)?;
    run.finish(json!({
        "responses": p.responses,
        "covariates": p.data.covariate_names,
        "fits": summaries(&p),
        "total_aic": total_aic(&p.fits),
    }))
}

fn simulate(run: &Run, p: &Prepared) -> Result<JointSample, CliError> {
    let cfg = &run.config.condex;
    Ok(simulate_unconditional(&p.fits, &p.data, cfg.n, cfg.n_prime, run.seed)?)
}

pub fn diagnose(mut run: Run, data: &Path) -> Result<String, CliError> {
    let (ds, responses) = load(&mut run, data)?;
    let p = prepare(&mut run, &ds, responses)?;
    let sample = simulate(&run, &p)?;
    let qq = qq_aggregate(&sample.rows, &p.data.rows, &qq_grid())?;
    write_qq_csv(&qq, run.create("qq.csv")?)?;
    let ks: Vec<f64> = (0..3).map(|k| ks_distance(&sample.rows.iter().map(|r| r[k]).collect::<Vec<_>>(), gumbel_cdf)).collect();
    run.finish(json!({
        "responses": p.responses,
        "fits": summaries(&p),
        "n": sample.len(),
        "p_body": sample.p_body,
        "ks_gumbel": ks,
        "qq": qq,
    }))
}

pub fn probability(mut run: Run, data: &Path, regions: &[String]) -> Result<String, CliError> {
    let (ds, responses) = load(&mut run, data)?;
    let parsed = regions.iter().map(|r| parse_region(r, &responses)).collect::<Result<Vec<_>, _>>()?;
    let p = prepare(&mut run, &ds, responses)?;
    let sample = simulate(&run, &p)?;
    let mut out = Vec::with_capacity(regions.len());
    for (spec, region) in regions.iter().zip(&parsed) {
        let est = estimate_joint_probability(&sample, region)?;
        if est.below_resolution() {
            run.caveat(format!("region {spec}: no simulated rows, probability below {:e}", 1.0 / est.n as f64));
        }
        out.push(json!({
            "region": spec,
            "bounds": region,
            "estimate": est.estimate,
            "count": est.count,
            "n": est.n,
            "display": est.to_string(),
        }));
    }
    run.finish(json!({ "responses": p.responses, "fits": summaries(&p), "probabilities": out }))
}
