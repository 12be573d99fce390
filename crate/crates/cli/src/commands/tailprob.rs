use std::path::Path;

use serde_json::json;
use tailkit::tailprob::*;

use crate::input::{complete_columns, load_dataset, read_weights, to_gumbel, uniform_columns};
use crate::output::Run;
use crate::CliError;

struct Columns {
    names: Vec<String>,
    /// Standard Gumbel margins, complete rows only.
    gumbel: Vec<Vec<f64>>,
}

fn columns(run: &mut Run, path: &Path) -> Result<Columns, CliError> {
    let ds = load_dataset(run, path)?;
    let cfg = &run.config.tailprob;
    let names = if !cfg.columns.is_empty() {
        cfg.columns.clone()
    } else if !ds.responses().is_empty() {
        ds.responses().to_vec()
    } else {
        ds.names().to_vec()
    };
    let ds = to_gumbel(run, &ds, &names)?;
    let gumbel = complete_columns(run, &ds, &names)?;
    Ok(Columns { names, gumbel })
}

fn matrix(run: &Run, cols: &Columns) -> Result<EdmMatrix, CliError> {
    let alpha = run.config.tailprob.edm.alpha;
    let scaled: Vec<Vec<f64>> = cols.gumbel.iter().map(|c| c.iter().map(|&y| gumbel_to_frechet(y, alpha)).collect()).collect();
    Ok(edm_matrix(&scaled, &run.config.tailprob.edm)?)
}

fn partition(run: &Run, cols: &Columns) -> Result<BlockPartition, CliError> {
    match &run.config.tailprob.blocks {
        Some(b) => {
            let p = BlockPartition::explicit(b.clone())?;
            if p.dim() != cols.names.len() {
                return Err(CliError::usage(format!("blocks cover {} columns, data have {}", p.dim(), cols.names.len())));
            }
            Ok(p)
        }
        None => Ok(cluster_edm(&matrix(run, cols)?, run.config.tailprob.cut)?),
    }
}

fn named_blocks(p: &BlockPartition, names: &[String]) -> Vec<Vec<String>> {
    p.blocks.iter().map(|b| b.iter().map(|&i| names[i].clone()).collect()).collect()
}

fn weights(run: &mut Run, path: Option<&Path>, d: usize) -> Result<Vec<f64>, CliError> {
    let w = match path {
        Some(p) => read_weights(run, p, d)?,
        None => vec![1.0; d],
    };
    if w.iter().any(|&c| c != 1.0) {
        run.caveat("unequal weights: the weighted tail model is used as a working model without asymptotic guarantees");
    }
    Ok(w)
}

pub fn edm(mut run: Run, data: &Path) -> Result<String, CliError> {
    let cols = columns(&mut run, data)?;
    let m = matrix(&run, &cols)?;
    m.write_csv(&cols.names, run.create("edm.csv")?)?;
    let cfg = run.config.tailprob.edm;
    run.finish(json!({ "columns": cols.names, "norm_maximum": m.max, "edm": m.values, "config": cfg }))
}

pub fn cluster(mut run: Run, data: &Path) -> Result<String, CliError> {
    let cols = columns(&mut run, data)?;
    let m = matrix(&run, &cols)?;
    m.write_csv(&cols.names, run.create("edm.csv")?)?;
    let p = cluster_edm(&m, run.config.tailprob.cut)?;
    let mut w = csv::Writer::from_writer(run.create("dendrogram.csv")?);
    w.write_record(["step", "left", "right", "height", "size"])?;
    for (k, mg) in p.dendrogram.merges.iter().enumerate() {
        w.write_record([k.to_string(), mg.left.to_string(), mg.right.to_string(), mg.height.to_string(), mg.size.to_string()])?;
    }
    w.flush()?;
    run.finish(json!({
        "columns": cols.names,
        "cut": p.cut,
        "blocks": p.blocks,
        "block_names": named_blocks(&p, &cols.names),
        "dendrogram": p.dendrogram,
    }))
}

pub fn estimate(mut run: Run, data: &Path, weight_file: Option<&Path>) -> Result<String, CliError> {
    let cols = columns(&mut run, data)?;
    let p = partition(&run, &cols)?;
    let w = weights(&mut run, weight_file, cols.names.len())?;
    let t = run.config.tailprob.clone();
    let uniform = uniform_columns(&cols.gumbel, t.rank_margins);
    let cfg = TailProbConfig { phi: t.phi, phi_star: t.phi_star, weights: w };
    let est = estimate_blocks(&uniform, &p, &cfg)?;
    for (b, f) in est.fits.iter().enumerate() {
        if f.boundary {
            run.caveat(format!("block {b}: tail model fit on the parameter boundary (k1 = {}, eta = {})", f.k1, f.eta));
        }
    }
    let boot = bootstrap_tailprob(&uniform, &p, &cfg, t.bootstrap, t.level, run.seed)?;
    if boot.degenerate {
        run.caveat(format!("only {} bootstrap replicates; the interval is unreliable", t.bootstrap));
    }
    run.finish(json!({
        "columns": cols.names,
        "blocks": named_blocks(&p, &cols.names),
        "phi": t.phi,
        "phi_star": t.phi_star,
        "weights": cfg.weights,
        "fits": est.fits,
        "block_log_p": est.block_log_p,
        "log_p": est.log_p.ln,
        "log10_p": est.log_p.log10(),
        "p": est.log_p.value(),
        "bootstrap": {
            "replicates": t.bootstrap,
            "failures": boot.failures,
            "level": boot.level,
            "median_log_p": boot.median,
            "lower_log_p": boot.lower,
            "upper_log_p": boot.upper,
        },
    }))
}

pub fn stability(mut run: Run, data: &Path, weight_file: Option<&Path>) -> Result<String, CliError> {
    let cols = columns(&mut run, data)?;
    let p = partition(&run, &cols)?;
    let w = weights(&mut run, weight_file, cols.names.len())?;
    let t = run.config.tailprob.clone();
    let uniform = uniform_columns(&cols.gumbel, t.rank_margins);
    let umax: Vec<Vec<f64>> = p
        .blocks
        .iter()
        .map(|b| {
            let c: Vec<Vec<f64>> = b.iter().map(|&i| uniform[i].clone()).collect();
            let cw: Vec<f64> = b.iter().map(|&i| w[i]).collect();
            u_max(&c, &cw)
        })
        .collect::<Result<_, _>>()?;
    let scan = stability_scan(&umax, &t.phi_grid, t.phi, t.tolerance)?;
    let failed = scan.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        run.caveat(format!("{failed} grid points could not be fitted"));
    }
    scan.write_csv(run.create("stability.csv")?)?;
    run.finish(json!({ "blocks": named_blocks(&p, &cols.names), "phi": t.phi, "scan": scan }))
}
