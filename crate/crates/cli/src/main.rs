//! bcslab: solve the BCS gap equation for radial pair potentials, evaluate
//! the linear pairing-instability criterion, and locate the critical
//! temperature by two independent methods.

mod config;
mod emit;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::run::{RunError, RunOutcome};

#[derive(Parser)]
#[command(name = "bcslab", version, about = "BCS gap equation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (flat dotted-key text file).
    #[arg(long)]
    config: PathBuf,
    /// Force the deterministic single-threaded path.
    #[arg(long)]
    serial: bool,
    /// Output directory (overrides output.dir from the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-sector lowest eigenvalues of K + V and the instability verdict.
    Spectrum(RunArgs),
    /// Self-consistent solution of the gap equation at the configured T.
    Gap(RunArgs),
    /// Critical temperature by eigenvalue bisection and Birman-Schwinger norm.
    Tc(RunArgs),
    /// T_c across coupling multipliers with the exponential-smallness fit.
    Sweep(RunArgs),
    /// Run the invariant battery and report pass/fail per invariant.
    Selftest(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args): (&str, &RunArgs) = match &cli.command {
        Command::Spectrum(a) => ("spectrum", a),
        Command::Gap(a) => ("gap", a),
        Command::Tc(a) => ("tc", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Selftest(a) => ("selftest", a),
    };
    match dispatch(name, args) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.failed {
                eprintln!("{}", error_record("selftest", "one or more invariants failed"));
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(RunError::Config(msg)) => {
            eprintln!("{}", error_record("config", &msg));
            ExitCode::from(2)
        }
        Err(RunError::Numerical(msg)) => {
            eprintln!("{}", error_record("numerical", &msg));
            ExitCode::from(1)
        }
        Err(RunError::Io(msg)) => {
            eprintln!("{}", error_record("io", &msg));
            ExitCode::from(1)
        }
    }
}

fn dispatch(name: &str, args: &RunArgs) -> Result<RunOutcome, RunError> {
    let cfg = config::parse_config_file(&args.config).map_err(|e| RunError::Config(e.0))?;
    let out_dir = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    match name {
        "spectrum" => run::run_spectrum(&cfg, args.serial, &out_dir),
        "gap" => run::run_gap(&cfg, args.serial, &out_dir),
        "tc" => run::run_tc(&cfg, args.serial, &out_dir),
        "sweep" => run::run_sweep(&cfg, args.serial, &out_dir),
        "selftest" => run::run_selftest_cmd(&cfg, args.serial, &out_dir),
        _ => unreachable!(),
    }
}

/// Machine-readable single-line error record on stderr.
fn error_record(kind: &str, message: &str) -> String {
    #[derive(serde::Serialize)]
    struct Record<'a> {
        error: Inner<'a>,
    }
    #[derive(serde::Serialize)]
    struct Inner<'a> {
        kind: &'a str,
        message: &'a str,
    }
    serde_json::to_string(&Record {
        error: Inner { kind, message },
    })
    .expect("error record serialisation")
}
