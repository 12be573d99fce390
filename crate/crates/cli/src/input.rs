use std::collections::BTreeMap;
use std::path::Path;

use tailkit::condex::Bound;
use tailkit::dataset::{ingest_csv, CsvSchema, Dataset, Margin};
use tailkit::distributions::{gumbel_cdf, gumbel_quantile, laplace_to_gumbel};
use tailkit::tailprob::rank_to_uniform;

use crate::output::Run;
use crate::CliError;

pub fn load_dataset(run: &mut Run, path: &Path) -> Result<Dataset, CliError> {
    let schema = run.config.data.clone();
    load_with(run, path, &schema)
}

fn load_with(run: &mut Run, path: &Path, schema: &CsvSchema) -> Result<Dataset, CliError> {
    run.record_input(path)?;
    let (ds, report) = ingest_csv(path, schema).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    for w in report.warnings {
        run.caveat(format!("{}: {w}", path.display()));
    }
    if report.missing_cells > 0 {
        run.caveat(format!("{}: {} missing cells", path.display(), report.missing_cells));
    }
    Ok(ds)
}

/// Copy of the dataset with the named columns on standard Gumbel margins;
/// missing cells stay missing. Raw columns go through a rank transform of
/// their observed values.
pub fn to_gumbel(run: &mut Run, ds: &Dataset, names: &[String]) -> Result<Dataset, CliError> {
    let mut cols: Vec<Vec<Option<f64>>> = Vec::with_capacity(ds.n_cols());
    for name in ds.names() {
        let col = ds.column(name)?.to_vec();
        if !names.contains(name) {
            cols.push(col);
            continue;
        }
        cols.push(match ds.margin() {
            Margin::Gumbel => col,
            Margin::Laplace => col.into_iter().map(|v| v.map(laplace_to_gumbel)).collect(),
            Margin::Uniform => col.into_iter().map(|v| v.map(gumbel_quantile).transpose()).collect::<Result<_, _>>()?,
            Margin::Raw => {
                run.caveat("raw margins were mapped to Gumbel through ranks");
                let observed: Vec<f64> = col.iter().flatten().copied().collect();
                let mut ranks = rank_to_uniform(&observed).into_iter();
                col.into_iter()
                    .map(|v| v.map(|_| gumbel_quantile(ranks.next().expect("one rank per value")).expect("open level")))
                    .collect()
            }
        });
    }
    let responses: Vec<&str> = ds.responses().iter().map(String::as_str).collect();
    let covariates: Vec<&str> = ds.covariates().iter().map(String::as_str).collect();
    Ok(Dataset::new(ds.names().to_vec(), cols)?.with_roles(&responses, &covariates)?.with_margin(Margin::Gumbel))
}

/// Named Gumbel columns restricted to the rows where all are observed.
pub fn complete_columns(run: &mut Run, ds: &Dataset, names: &[String]) -> Result<Vec<Vec<f64>>, CliError> {
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let rows = ds.complete_rows(&refs)?;
    if rows.len() < ds.n_rows() {
        run.caveat(format!("{} rows with a missing value were dropped", ds.n_rows() - rows.len()));
    }
    names
        .iter()
        .map(|n| {
            let col = ds.column(n)?;
            Ok(rows.iter().map(|&r| col[r].expect("complete row")).collect())
        })
        .collect()
}

pub fn uniform_columns(gumbel: &[Vec<f64>], ranks: bool) -> Vec<Vec<f64>> {
    gumbel
        .iter()
        .map(|c| if ranks { rank_to_uniform(c) } else { c.iter().map(|&y| gumbel_cdf(y)).collect() })
        .collect()
}

/// Parses `Y1>6,Y2>6,Y3<1`; unnamed components are unconstrained.
pub fn parse_region(spec: &str, names: &[String]) -> Result<[Bound; 3], CliError> {
    let mut region = [Bound::Any; 3];
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, bound) = if let Some((n, v)) = part.split_once('>') {
            (n.trim(), Bound::Above(parse_number(v, part)?))
        } else if let Some((n, v)) = part.split_once('<') {
            (n.trim(), Bound::Below(parse_number(v, part)?))
        } else {
            return Err(CliError::usage(format!("region term '{part}' needs '>' or '<'")));
        };
        let k = names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::usage(format!("region names unknown response '{name}'")))?;
        if region[k] != Bound::Any {
            return Err(CliError::usage(format!("region constrains '{name}' twice")));
        }
        region[k] = bound;
    }
    Ok(region)
}

fn parse_number(v: &str, part: &str) -> Result<f64, CliError> {
    v.trim().parse().map_err(|_| CliError::usage(format!("region term '{part}': bad number")))
}

/// One positive weight per line (or separated by commas/whitespace).
pub fn read_weights(run: &mut Run, path: &Path, d: usize) -> Result<Vec<f64>, CliError> {
    run.record_input(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let w: Vec<f64> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::input(format!("{}: bad weight '{s}'", path.display()))))
        .collect::<Result<_, _>>()?;
    if w.len() != d {
        return Err(CliError::input(format!("{}: {} weights for {d} columns", path.display(), w.len())));
    }
    Ok(w)
}

/// Covariate rows for prediction; every column of the file is a covariate.
pub fn covariate_rows(run: &mut Run, path: &Path) -> Result<Vec<BTreeMap<String, f64>>, CliError> {
    let ds = load_with(run, path, &CsvSchema::default())?;
    Ok((0..ds.n_rows())
        .map(|r| {
            ds.names()
                .iter()
                .filter_map(|n| ds.column(n).ok().and_then(|c| c[r]).map(|v| (n.clone(), v)))
                .collect()
        })
        .collect())
}
