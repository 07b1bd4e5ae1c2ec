//! Command-line driver for the Monte Carlo experiments.
//!
//! Exit codes: 0 success, 1 invalid config or arguments, 2 a theorem over its
//! failure budget (any violation for `selftest`), 3 runtime failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use perturbkit::harness::{render_report, run_monte_carlo, ExperimentConfig, ReportFormat, Scenario, SummaryReport};
use perturbkit::Error;

const SELFTEST_TRIALS: usize = 100;

#[derive(Parser)]
#[command(name = "perturbkit", version, about = "Monte Carlo checks of singular subspace perturbation bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Perturbation bounds on a low-rank signal plus noise.
    Bounds(RunArgs),
    /// Spectral clustering of a Gaussian mixture.
    Gmm(RunArgs),
    /// Planted submatrix recovery.
    Submatrix(RunArgs),
    /// Resolvent identities and the local law.
    Resolvent(RunArgs),
    /// Deterministic invariants on random instances.
    Selftest(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; optional for `selftest`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => Self::Csv,
            Format::Json => Self::Json,
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) => Self::Config(e.to_string()),
            other => Self::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (scenario, args) = match cli.command {
        Command::Bounds(a) => (Scenario::Bounds, a),
        Command::Gmm(a) => (Scenario::Gmm, a),
        Command::Submatrix(a) => (Scenario::Submatrix, a),
        Command::Resolvent(a) => (Scenario::Resolvent, a),
        Command::Selftest(a) => (Scenario::Selftest, a),
    };
    match run(scenario, &args) {
        Ok(report) => {
            let failing = failing_theorems(scenario, &report);
            for id in &failing {
                eprintln!("violation: {id}");
            }
            if failing.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(scenario: Scenario, args: &RunArgs) -> Result<SummaryReport, Failure> {
    let cfg = load_config(scenario, args)?;
    let report = run_monte_carlo(&cfg)?;
    let text = render_report(&report, cfg.format)?;
    match &cfg.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Runtime(e.to_string()))?,
    }
    Ok(report)
}

fn load_config(scenario: Scenario, args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::Config(e.to_string()))?;
            let obj = value.as_object_mut().ok_or_else(|| Failure::Config("config must be a JSON object".into()))?;
            let name = serde_json::Value::String(scenario.to_string());
            match obj.get("scenario") {
                None => {
                    obj.insert("scenario".into(), name);
                }
                Some(s) if *s == name => {}
                Some(s) => return Err(Failure::Config(format!("config is for scenario {s}, not {scenario}"))),
            }
            if let (false, Some(t)) = (obj.contains_key("trials"), args.trials) {
                obj.insert("trials".into(), t.into());
            }
            serde_json::from_value::<ExperimentConfig>(value).map_err(|e| Failure::Config(e.to_string()))?
        }
        None if scenario == Scenario::Selftest => ExperimentConfig::new(scenario, args.trials.unwrap_or(SELFTEST_TRIALS), 0),
        None => return Err(Failure::Config(format!("{scenario} needs --config"))),
    };
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    if let Some(f) = args.format {
        cfg.format = f.into();
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn failing_theorems(scenario: Scenario, report: &SummaryReport) -> Vec<&str> {
    report
        .theorems
        .iter()
        .filter(|t| match scenario {
            Scenario::Selftest => t.violations > 0,
            _ => t.within_budget == Some(false),
        })
        .map(|t| t.theorem_id.as_str())
        .collect()
}
