//! `scalflow`: command-line driver for the deformation toolkit.
//!
//! Subcommands: `kernel`, `deform`, `glue`, `volcmp`, `sweep`, `catalogue`.
//! Every run writes its primary output atomically plus a manifest with
//! config echo and result digests; exit code 0 means all invariants of the
//! invoked pipeline held, 1 is a numerical failure (diagnostic file
//! written), 2 a configuration error.

mod commands;
mod config;
mod csvout;
mod manifest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "scalflow", version, about)]
struct Cli {
    /// Flat JSON config file with dotted keys (flags override file values).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Primary output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trace CSV path (per-iteration or per-sweep-point records).
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// Seed for randomized inputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for data-parallel loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Near-kernel extraction and V-static verdict for a metric.
    Kernel(commands::KernelArgs),
    /// Prescribe scalar-curvature and volume changes by compactly
    /// supported deformation.
    Deform(commands::DeformArgs),
    /// Build and solve the conformal gluing neck across a T-sweep.
    Glue(commands::GlueArgs),
    /// Quermassintegrals, Minkowski slacks, and volume bounds of a convex
    /// body.
    Volcmp(commands::VolcmpArgs),
    /// Parameter sweeps with log-linear fits (grid refinement, remainder
    /// scaling, neck decay).
    Sweep(commands::SweepArgs),
    /// Evaluate the catalogue of exact kernel potentials on model charts.
    Catalogue(commands::CatalogueArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // ignore the error when a pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let common = commands::Common {
        config: cli.config.clone(),
        out: cli.out.clone(),
        trace: cli.trace.clone(),
        seed: cli.seed,
    };
    let result = match &cli.command {
        Command::Kernel(args) => commands::kernel(args, &common),
        Command::Deform(args) => commands::deform_cmd(args, &common),
        Command::Glue(args) => commands::glue(args, &common),
        Command::Volcmp(args) => commands::volcmp(args, &common),
        Command::Sweep(args) => commands::sweep(args, &common),
        Command::Catalogue(args) => commands::catalogue(args, &common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::AppError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::AppError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(1)
        }
    }
}
