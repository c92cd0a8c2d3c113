//! `qentropy`: solve Tsallis maxent/minxent problems, verify the
//! nonextensive triangle equality, and sweep over q.
//!
//! Exit codes: 0 success, 1 solver failure or failed verification,
//! 2 unreadable or invalid input, 3 degenerate expectation matching.

#![forbid(unsafe_code)]

mod commands;
mod error;
mod problem;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qentropy::ConstraintKind;

use commands::{Output, Overrides};
use error::{CliError, Result};

#[derive(Parser)]
#[command(name = "qentropy", version, about = "Tsallis maximum-entropy and minimum relative-entropy inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the constrained density and report thermodynamic residuals
    Solve(Common),
    /// Match expectations against a true density and check the triangle equality
    VerifyTriangle(Common),
    /// Solve (and verify, if a true density is given) for every q in q_list; CSV output
    SweepQ(Common),
}

#[derive(Args)]
struct Common {
    /// Problem file (JSON)
    #[arg(short, long)]
    input: PathBuf,
    /// Output file; stdout if omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Constraint kind, overriding the problem file
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Multiplier residual tolerance, overriding the problem file
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    /// q-expectations ∫ u p^q
    Q,
    /// normalized q-expectations ∫ u p^q / ∫ p^q
    Normalized,
}

impl From<KindArg> for ConstraintKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Q => ConstraintKind::QExpectation,
            KindArg::Normalized => ConstraintKind::NormalizedQExpectation,
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

type Handler = fn(&problem::ProblemFile, Overrides) -> Result<Output>;

fn run(cli: Cli) -> Result<bool> {
    let (args, f): (&Common, Handler) = match &cli.command {
        Command::Solve(a) => (a, commands::solve_cmd),
        Command::VerifyTriangle(a) => (a, commands::verify_cmd),
        Command::SweepQ(a) => (a, commands::sweep_cmd),
    };
    let problem = problem::load(&args.input)?;
    let overrides = Overrides {
        kind: args.kind.map(Into::into),
        tolerance: args.tolerance,
    };
    let out = f(&problem, overrides)?;
    write_output(args.output.as_deref(), &out.text)?;
    Ok(out.success)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
