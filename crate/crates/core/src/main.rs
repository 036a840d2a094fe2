//! Command-line driver: parse a problem file, dispatch, print a JSON report.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use sharpbounds::cli::{
    cmd_bound, cmd_exclusive, cmd_oracle, cmd_policy, cmd_sweep, cmd_verify, CliError, ProblemFile,
};
use sharpbounds::lp::DEFAULT_ATOM_LIMIT;

#[derive(Parser)]
#[command(
    name = "sharpbounds",
    version,
    about = "Sharp probability bounds for compound events from marginals, in exact arithmetic"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form sharp bound for the k-of-n query in a problem file.
    Bound {
        /// Problem file (JSON).
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        /// Also emit a distribution attaining the bound.
        #[arg(long)]
        distribution: bool,
    },
    /// Exact LP optimum for an arbitrary event, with optional constraints.
    Oracle {
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        /// Emit the optimizing atom masses and dominating indices.
        #[arg(long)]
        emit_optimizer: bool,
        /// Cap on the number of events (2^n LP columns).
        #[arg(long, default_value_t = DEFAULT_ATOM_LIMIT)]
        atom_limit: usize,
    },
    /// Bound for unions of mutually exclusive conjunctions (event sets).
    Exclusive {
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        /// Also compute the dual (intersection-form) value.
        #[arg(long)]
        dual: bool,
    },
    /// Randomized formula-vs-oracle verification campaign.
    Verify {
        /// Largest number of events per instance.
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        /// Number of random instances.
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Campaign seed; fully determines the run.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ATOM_LIMIT)]
        atom_limit: usize,
    },
    /// Decompose an exact optimizer into at most n+1 admissible moves.
    Policy {
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        /// Require every slice length to equal a leftover marginal mass.
        #[arg(long)]
        strict_delta: bool,
        #[arg(long, default_value_t = DEFAULT_ATOM_LIMIT)]
        atom_limit: usize,
    },
    /// Bounds for every valid k at once, with search-work instrumentation.
    Sweep {
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        /// Event kind: at_least, at_most, or exactly (defaults to the file's query).
        #[arg(long)]
        kind: Option<String>,
        /// Bound direction: upper or lower (defaults to the file's query).
        #[arg(long)]
        direction: Option<String>,
    },
}

fn load(path: &PathBuf) -> Result<ProblemFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    ProblemFile::from_json(&text)
}

fn emit<T: Serialize>(report: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(report).expect("reports serialize")
    );
}

fn run(args: Args) -> Result<i32, CliError> {
    match args.command {
        Command::Bound {
            input,
            distribution,
        } => {
            emit(&cmd_bound(&load(&input)?, distribution)?);
        }
        Command::Oracle {
            input,
            emit_optimizer,
            atom_limit,
        } => {
            emit(&cmd_oracle(&load(&input)?, emit_optimizer, atom_limit)?);
        }
        Command::Exclusive { input, dual } => {
            emit(&cmd_exclusive(&load(&input)?, dual)?);
        }
        Command::Verify {
            n_max,
            trials,
            seed,
            atom_limit,
        } => {
            let report = cmd_verify(n_max, trials, seed, atom_limit)?;
            let failed = report.mismatches_total > 0;
            emit(&report);
            if failed {
                return Ok(1);
            }
        }
        Command::Policy {
            input,
            strict_delta,
            atom_limit,
        } => {
            emit(&cmd_policy(&load(&input)?, strict_delta, atom_limit)?);
        }
        Command::Sweep {
            input,
            kind,
            direction,
        } => {
            emit(&cmd_sweep(
                &load(&input)?,
                kind.as_deref(),
                direction.as_deref(),
            )?);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
