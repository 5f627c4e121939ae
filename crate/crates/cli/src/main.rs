//! `dirac`: batch experiments on truncated Dirac operators.
//!
//! Exit status: 0 success, 2 configuration error, 3 numerical failure,
//! 4 violated constant-free inequality, 1 output I/O failure.

mod commands;
mod config;
mod error;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dirac_core::{BoundaryCondition, Complex64};

use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "dirac", version, about = "Spectral experiments on 1D Dirac operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Boundary condition: per+, per- or dir.
    #[arg(long, value_parser = parse_bc)]
    bc: Option<BoundaryCondition>,
    /// Truncation parameter.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Disc radius, in (0, 1/2].
    #[arg(long)]
    radius: Option<f64>,
    /// Trapezoid nodes per disc contour.
    #[arg(long)]
    nodes: Option<usize>,
    /// Cutoff index; chosen automatically when absent.
    #[arg(long = "N")]
    n: Option<i64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        Overrides {
            bc: self.bc,
            k: self.k,
            radius: self.radius,
            nodes: self.nodes,
            n: self.n,
            seed: self.seed,
            out: self.out.clone(),
        }
        .apply(&mut config);
        Ok(config)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues with disc assignment and localization counts.
    Spectrum {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the operator matrix as (row, col, re, im).
        #[arg(long)]
        export_matrix: bool,
    },
    /// Cutoff selection and Hilbert–Schmidt deviations of the disc projections.
    Deviations {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Reconstruction error over M and the reordering test.
    Reconstruct {
        #[command(flatten)]
        run: RunArgs,
        /// Random input supported in |n| <= this value.
        #[arg(long, conflicts_with = "eigenvector")]
        f_max_n: Option<i64>,
        /// Use the eigenvector whose eigenvalue is nearest to this index.
        #[arg(long)]
        eigenvector: Option<i64>,
        /// Number of random reorderings.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Estimate battery plus checks on the configured potential.
    VerifyBounds {
        #[command(flatten)]
        run: RunArgs,
        /// Self-test: corrupt one constant-free check so the run must fail.
        #[arg(long)]
        inject_violation: bool,
    },
    /// Regularity of boundary conditions given by (a, b, c, d) or a name.
    ClassifyBc {
        #[arg(long, value_parser = parse_bc)]
        bc: Option<BoundaryCondition>,
        #[arg(long, value_parser = commands::parse_complex, allow_hyphen_values = true)]
        a: Option<Complex64>,
        #[arg(long, value_parser = commands::parse_complex, allow_hyphen_values = true)]
        b: Option<Complex64>,
        #[arg(long, value_parser = commands::parse_complex, allow_hyphen_values = true)]
        c: Option<Complex64>,
        #[arg(long, value_parser = commands::parse_complex, allow_hyphen_values = true)]
        d: Option<Complex64>,
    },
    /// Resolvent threshold search and its stability under doubled sampling.
    Threshold {
        #[command(flatten)]
        run: RunArgs,
    },
}

fn parse_bc(text: &str) -> Result<BoundaryCondition, String> {
    text.parse().map_err(|e: dirac_core::SpectralError| e.to_string())
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Spectrum { run, export_matrix } => commands::spectrum(run.resolve()?, export_matrix),
        Command::Deviations { run } => commands::deviations(run.resolve()?),
        Command::Reconstruct {
            run,
            f_max_n,
            eigenvector,
            trials,
        } => {
            let mut config = run.resolve()?;
            if f_max_n.is_some() || eigenvector.is_some() {
                config.function = config::FunctionInput {
                    random_max_n: f_max_n,
                    eigenvector,
                    coefficients: None,
                };
            }
            if let Some(t) = trials {
                config.trials = t;
            }
            commands::reconstruct(config)
        }
        Command::VerifyBounds { run, inject_violation } => commands::verify_bounds(run.resolve()?, inject_violation),
        Command::ClassifyBc { bc, a, b, c, d } => {
            let k = commands::classify(bc, [a, b, c, d])?;
            let text = serde_json::to_string_pretty(&k).expect("classification serializes");
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            Ok(())
        }
        Command::Threshold { run } => commands::threshold(run.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dirac: {e}");
            if let CliError::Numerical(inner) = &e {
                eprintln!("dirac: diagnostic: {inner:?}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
