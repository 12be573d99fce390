use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

mod commands;
mod config;
mod input;
mod output;

use config::RunConfig;
use output::Run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    Input,
    Output,
    Model,
}

#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Usage, message: msg.into() }
    }
    pub fn input(msg: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Input, message: msg.into() }
    }
    pub fn output(msg: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Output, message: msg.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

impl From<tailkit::Error> for CliError {
    fn from(e: tailkit::Error) -> Self {
        CliError { kind: ErrorKind::Model, message: e.to_string() }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::output(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::output(e.to_string())
    }
}

/// Extreme-value analysis toolkit.
#[derive(Parser)]
#[command(name = "tailkit", version)]
struct Cli {
    /// Master RNG seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantile-regression threshold plus GPD regression fit.
    FitMarginal {
        #[arg(long)]
        data: PathBuf,
    },
    /// Score candidate threshold levels.
    SelectThreshold {
        #[arg(long)]
        data: PathBuf,
    },
    /// Conditional quantiles with bootstrap intervals at covariate points.
    PredictQuantile {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        points: PathBuf,
    },
    /// Build the prior for network training from bootstrap refits.
    NbeMakePrior {
        #[arg(long)]
        data: PathBuf,
    },
    /// Train the quantile network.
    NbeTrain {
        #[arg(long)]
        prior: PathBuf,
    },
    /// Apply a trained network to a data set.
    NbeEstimate {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Fit the three conditional extremes models.
    CondexFit {
        #[arg(long)]
        data: PathBuf,
    },
    /// Simulate from the fitted joint model and compare with the data.
    CondexDiagnose {
        #[arg(long)]
        data: PathBuf,
    },
    /// Joint probabilities of regions such as "Y1>6,Y2>6,Y3<1".
    CondexProb {
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "region", required = true)]
        regions: Vec<String>,
    },
    /// Extremal dependence matrix.
    Edm {
        #[arg(long)]
        data: PathBuf,
    },
    /// Cluster columns on the dependence matrix.
    Cluster {
        #[arg(long)]
        data: PathBuf,
    },
    /// Estimate the probability that every column exceeds its quantile.
    Tailprob {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Tail-probability estimates across tail-model thresholds.
    StabilityScan {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Write a synthetic data set from the configured model.
    SimulateSynthetic,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::FitMarginal { .. } => "fit-marginal",
            Command::SelectThreshold { .. } => "select-threshold",
            Command::PredictQuantile { .. } => "predict-quantile",
            Command::NbeMakePrior { .. } => "nbe-make-prior",
            Command::NbeTrain { .. } => "nbe-train",
            Command::NbeEstimate { .. } => "nbe-estimate",
            Command::CondexFit { .. } => "condex-fit",
            Command::CondexDiagnose { .. } => "condex-diagnose",
            Command::CondexProb { .. } => "condex-prob",
            Command::Edm { .. } => "edm",
            Command::Cluster { .. } => "cluster",
            Command::Tailprob { .. } => "tailprob",
            Command::StabilityScan { .. } => "stability-scan",
            Command::SimulateSynthetic => "simulate-synthetic",
        }
    }
}

fn threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("TAILKIT_THREADS") else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| CliError::usage(format!("TAILKIT_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))
}

fn execute(cli: Cli) -> Result<String, CliError> {
    threads()?;
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli
        .seed
        .or(config.seed)
        .ok_or_else(|| CliError::usage("a seed is required: pass --seed or set seed in the config"))?;
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::output(format!("cannot create {}: {e}", cli.out.display())))?;
    let mut run = Run {
        command: cli.command.name().to_string(),
        seed,
        config,
        out: cli.out.clone(),
        inputs: Vec::new(),
        caveats: Vec::new(),
    };
    if let Some(p) = &cli.config {
        run.record_input(p)?;
    }
    use commands::*;
    match &cli.command {
        Command::FitMarginal { data } => marginal::fit(run, data),
        Command::SelectThreshold { data } => marginal::select(run, data),
        Command::PredictQuantile { data, points } => marginal::predict(run, data, points),
        Command::NbeMakePrior { data } => nbe::make_prior(run, data),
        Command::NbeTrain { prior } => nbe::train_network(run, prior),
        Command::NbeEstimate { weights, data } => nbe::estimate_quantile(run, weights, data),
        Command::CondexFit { data } => condex::fit(run, data),
        Command::CondexDiagnose { data } => condex::diagnose(run, data),
        Command::CondexProb { data, regions } => condex::probability(run, data, regions),
        Command::Edm { data } => tailprob::edm(run, data),
        Command::Cluster { data } => tailprob::cluster(run, data),
        Command::Tailprob { data, weights } => tailprob::estimate(run, data, weights.as_deref()),
        Command::StabilityScan { data, weights } => tailprob::stability(run, data, weights.as_deref()),
        Command::SimulateSynthetic => synthetic::simulate(run),
    }
}

// A closed stdout (say `| head`) is not an error for the run itself.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn fail(e: &CliError) -> ExitCode {
    emit(&serde_json::json!({ "error": e }).to_string());
    ExitCode::from(if e.kind == ErrorKind::Usage { 2 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::usage(e.to_string())),
    };
    match execute(cli) {
        Ok(text) => {
            emit(&text);
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
