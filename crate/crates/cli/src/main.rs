//! `attractor`: asymptotic structure of quantum channels from the command line.
//!
//! Every subcommand reads JSON and writes one JSON report to stdout.
//! Exit status is 0 on success, 1 when a check fails or the analysis breaks
//! down, and 2 when the input is malformed or violates an invariant.

mod commands;
mod error;
mod input;
mod json;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use attractor::structure::DEFAULT_SEED;
use attractor::Tolerances;
use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::Settings;
use error::{CliError, EXIT_CHECK};

/// Environment variable that overrides the default equality tolerance.
const TOL_EQ_ENV: &str = "ATTRACTOR_TOL_EQ";

#[derive(Debug, Parser)]
#[command(name = "attractor", version, about = "Peripheral spectrum, attractor decomposition and recovery maps of quantum channels")]
struct Cli {
    /// Radius around the unit circle within which eigenvalues count as peripheral.
    #[arg(long, global = true, value_name = "TOL", value_parser = positive, default_value_t = Tolerances::default().eig_peripheral)]
    tol_eig: f64,

    /// Equality tolerance used for ranks, spans and pass/fail decisions.
    #[arg(long, global = true, value_name = "TOL", value_parser = positive, env = TOL_EQ_ENV,
          default_value_t = Tolerances::default().equality)]
    tol_eq: f64,

    /// Seed for the randomized steps of the decomposition.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Indent the JSON output.
    #[arg(long, global = true)]
    pretty: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues of the channel, its determinant and the peripheral part.
    Spectrum { file: PathBuf },
    /// Attractor and fixed-point spaces with the associated projections.
    Attractor {
        file: PathBuf,
        /// Largest power searched for the recurrence time.
        #[arg(long, default_value_t = 10_000)]
        n_max: usize,
    },
    /// Block decomposition of the attractor with its consistency checks.
    Decompose {
        file: PathBuf,
        /// Unfold spec describing the expected structure.
        #[arg(long, value_name = "SPEC")]
        expect_spec: Option<PathBuf>,
    },
    /// Cyclic normal form and the coarse-grained unitary.
    Cycles { file: PathBuf },
    /// Petz recovery on the attractor and the eigenvector correspondence.
    Recover { file: PathBuf },
    /// Irreducibility, primitivity and related properties.
    Classify { file: PathBuf },
    /// Build a channel with a prescribed asymptotic structure.
    Unfold { spec: PathBuf },
    /// Recheck a channel, optionally against a saved decompose report; exits 1 on failure.
    Verify { file: PathBuf, report: Option<PathBuf> },
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        Ok(_) => Err("tolerance must be a positive finite number".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn emit<T: Serialize>(report: &T, pretty: bool) -> Result<(), CliError> {
    let text = if pretty { serde_json::to_string_pretty(report) } else { serde_json::to_string(report) };
    let text = text.map_err(|e| CliError::Analysis(format!("serialization: {e}")))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // A closed pipe means the reader has seen enough.
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Analysis(format!("writing output: {e}"))),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let tol = Tolerances { eig_peripheral: cli.tol_eig, equality: cli.tol_eq, ..Tolerances::default() };
    let s = Settings { tolerances: tol, seed: cli.seed };
    let channel = |path: &PathBuf| input::load_channel(&input::read_json(path)?, &tol);
    let pretty = cli.pretty;
    match &cli.command {
        Command::Spectrum { file } => emit(&commands::spectrum_cmd(&channel(file)?, s)?, pretty)?,
        Command::Attractor { file, n_max } => emit(&commands::attractor_cmd(&channel(file)?, s, *n_max)?, pretty)?,
        Command::Decompose { file, expect_spec } => {
            let ch = channel(file)?;
            let spec = match expect_spec {
                Some(p) => Some(input::load_spec(&input::read_json(p)?, &tol)?),
                None => None,
            };
            emit(&commands::decompose_cmd(&ch, s, spec.as_ref())?, pretty)?
        }
        Command::Cycles { file } => emit(&commands::cycles_cmd(&channel(file)?, s)?, pretty)?,
        Command::Recover { file } => emit(&commands::recover_cmd(&channel(file)?, s)?, pretty)?,
        Command::Classify { file } => emit(&commands::classify_cmd(&channel(file)?, s)?, pretty)?,
        Command::Unfold { spec } => {
            let spec = input::load_spec(&input::read_json(spec)?, &tol)?;
            emit(&commands::unfold_cmd(&spec, s)?, pretty)?
        }
        Command::Verify { file, report } => {
            let ch = channel(file)?;
            let saved = match report {
                Some(p) => Some(input::load_decomposition(&input::read_json(p)?, ch.dim())?),
                None => None,
            };
            let out = commands::verify_cmd(&ch, s, saved.as_ref())?;
            emit(&out, pretty)?;
            if !out.passed {
                return Ok(ExitCode::from(EXIT_CHECK));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("attractor: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
