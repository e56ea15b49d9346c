//! `lrlab`: configuration-driven runner for locality experiments.
//!
//! Every flag has an environment fallback with the `LRLAB_` prefix
//! (`LRLAB_CONFIG`, `LRLAB_OUT`, `LRLAB_THREADS`, `LRLAB_TOLERANCE`, `LRLAB_SEED`).
//! Exit codes: 0 when every check passes, 1 when a property check fails,
//! 2 on configuration, precondition or resource errors.

mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand as ClapSubcommand};
use lrlab::lab::config::Subcommand;

#[derive(Parser, Debug)]
#[command(name = "lrlab", version, about = "Finite-lattice locality experiments")]
struct Cli {
    /// JSON run configuration; the suites fall back to built-in defaults.
    #[arg(long, global = true, env = "LRLAB_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, env = "LRLAB_OUT", default_value = "lrlab-out")]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "LRLAB_THREADS")]
    threads: Option<usize>,
    /// Integrator tolerance, overriding the configuration.
    #[arg(long, global = true, env = "LRLAB_TOLERANCE")]
    tolerance: Option<f64>,
    /// Seed for random-operator suites, overriding the configuration.
    #[arg(long, global = true, env = "LRLAB_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand, Debug, Clone, Copy)]
enum Command {
    /// Conditional expectations, CAR relations, automorphism and generator checks.
    VerifyAlgebra,
    /// Summability, the double-sup lemma, the truncation contract and ν bounds.
    VerifyLemmas,
    /// Commutator light-cone scan.
    Cone,
    /// Convergence of truncated dynamics in k.
    Cauchy,
    /// Growth of the localized norm in time.
    Growth,
    /// Effective support radius in time.
    Radius,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::VerifyAlgebra => Subcommand::VerifyAlgebra,
            Command::VerifyLemmas => Subcommand::VerifyLemmas,
            Command::Cone => Subcommand::Cone,
            Command::Cauchy => Subcommand::Cauchy,
            Command::Growth => Subcommand::Growth,
            Command::Radius => Subcommand::Radius,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    lrlab::linalg::set_blas_threads(1);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let opts = run::Options {
        command: cli.command.into(),
        config: cli.config,
        out: cli.out,
        threads,
        tolerance: cli.tolerance,
        seed: cli.seed,
    };
    match run::execute(&opts) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("wrote {}", opts.out.display());
            if outcome.checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
