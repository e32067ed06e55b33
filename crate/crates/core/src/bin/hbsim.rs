//! Command-line harness for the hidden-basis simulator: seeded,
//! reproducible experiment runs with JSON or CSV reports.
//!
//! Exit codes: 0 when every assertion passes, 1 on assertion failure,
//! 2 on configuration errors. Reports go to stdout or `--output`; status
//! lines go to stderr so piped reports stay clean.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hbsim_core::harness::{self, Command, ExperimentParams, ReportFormat};

#[derive(Parser)]
#[command(
    name = "hbsim",
    version,
    about = "Exact experiments on quantum computation in a hidden basis"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

/// Shared experiment flags; every field falls back to the config file and
/// then to per-command defaults.
#[derive(Args, Default)]
struct ParamArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report format: json or csv.
    #[arg(long)]
    format: Option<String>,
    /// Seed for all randomness in the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Logical qubit count.
    #[arg(long)]
    n: Option<usize>,
    /// Hamming weight of the target sector.
    #[arg(long)]
    w: Option<usize>,
    /// Dimension of the first hidden subspace.
    #[arg(long)]
    d0: Option<usize>,
    /// Dimension of the second hidden subspace.
    #[arg(long)]
    d1: Option<usize>,
    /// Reference size, or copy count for the squash chain.
    #[arg(long)]
    t: Option<usize>,
    /// Number of reference-consuming gates.
    #[arg(long)]
    l: Option<usize>,
    /// Hidden phase in radians.
    #[arg(long)]
    theta: Option<f64>,
    /// Hadamard parameter in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Fingerprint family size.
    #[arg(long)]
    m: Option<usize>,
    /// Accuracy demand in (0, 1/2).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Reusability parameter (key copy budget).
    #[arg(long)]
    r: Option<usize>,
    /// Security parameter (kernel repetitions).
    #[arg(long)]
    s: Option<usize>,
    /// Adversary's key copy count.
    #[arg(long)]
    r_prime: Option<usize>,
    /// Prover role: honest or eve.
    #[arg(long)]
    prover: Option<String>,
    /// Random trials per configuration point.
    #[arg(long)]
    trials: Option<usize>,
    /// Sweep the command's main parameter instead of one point.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    sweep: Option<bool>,
    /// Tolerance override for the command's pass criteria.
    #[arg(long)]
    tolerance: Option<f64>,
}

impl ParamArgs {
    fn to_params(&self) -> ExperimentParams {
        ExperimentParams {
            n: self.n,
            w: self.w,
            d0: self.d0,
            d1: self.d1,
            t: self.t,
            l: self.l,
            theta: self.theta,
            alpha: self.alpha,
            m: self.m,
            epsilon: self.epsilon,
            r: self.r,
            s: self.s,
            r_prime: self.r_prime,
            prover: self.prover.clone(),
            trials: self.trials,
            sweep: self.sweep,
            seed: self.seed,
            tolerance: self.tolerance,
            output: self.output.as_ref().map(|p| p.display().to_string()),
            format: self.format.clone(),
        }
    }
}

#[derive(Subcommand)]
enum CliCommand {
    /// Round-trip random phase-invariant unitaries through hidden bases.
    Lift(ParamArgs),
    /// Prepare random weight-sector targets and check fidelity and cost.
    Prep(ParamArgs),
    /// Drive a chain of reference-consuming Hadamard gates.
    HadamardChain(ParamArgs),
    /// Run identification sessions or the adversary sweep.
    IdProtocol(ParamArgs),
    /// Verify the squashing copy-bound chain.
    Squash(ParamArgs),
    /// Forge a publicly-described signature and compare verifiers.
    Forge(ParamArgs),
}

impl CliCommand {
    fn split(&self) -> (Command, &ParamArgs) {
        match self {
            CliCommand::Lift(a) => (Command::Lift, a),
            CliCommand::Prep(a) => (Command::Prep, a),
            CliCommand::HadamardChain(a) => (Command::HadamardChain, a),
            CliCommand::IdProtocol(a) => (Command::IdProtocol, a),
            CliCommand::Squash(a) => (Command::Squash, a),
            CliCommand::Forge(a) => (Command::Forge, a),
        }
    }
}

fn run() -> Result<bool, String> {
    let cli = Cli::parse();
    let (command, args) = cli.command.split();

    let mut params = ExperimentParams::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        params = ExperimentParams::from_json(&text).map_err(|e| e.to_string())?;
    }
    let params = params.overridden_by(&args.to_params());

    let format = match params.format.as_deref() {
        Some(name) => ReportFormat::from_name(name).map_err(|e| e.to_string())?,
        None => ReportFormat::Json,
    };

    let outcome = harness::run(command, &params).map_err(|e| e.to_string())?;
    let body = match format {
        ReportFormat::Json => &outcome.json,
        ReportFormat::Csv => &outcome.csv,
    };

    match &params.output {
        Some(path) => {
            std::fs::write(path, body).map_err(|e| format!("cannot write report to {path}: {e}"))?
        }
        None => print!("{body}"),
    }
    eprintln!(
        "{}: {}",
        command.name(),
        if outcome.pass { "pass" } else { "FAIL" }
    );
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
