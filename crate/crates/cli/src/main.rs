//! `permanental`: command-line front end of the permanental library.
//!
//! Every subcommand reads its settings from flags, optionally merged over a JSON configuration
//! file (`--config`; flags win), writes its tables and plot data to `--out-dir` and finishes
//! with a `manifest.json` holding the resolved configuration and SHA-256 digests of the outputs.
//! Exit status: 0 on success, 2 on configuration errors, 1 on numerical aborts and failed
//! acceptance checks.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "permanental", version, about = "Permanental point processes and Monge-Ampère tools")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Run size of `verify` (other commands only record it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Acceptance sizes.
    Strict,
    /// Reduced sizes, same tolerances.
    Default,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalArgs {
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for outputs and the manifest.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub tolerance_profile: Option<Profile>,
    /// JSON configuration file; flags override its entries.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lattice points p ∈ P ∩ Z^n/k of a body.
    Lattice(commands::LatticeArgs),
    /// P-constrained convex envelope of a weight on a 1D window.
    Envelope(commands::EnvelopeArgs),
    /// Alexandrov Monge-Ampère measure of a convex function on a 1D window.
    Ma(commands::MaArgs),
    /// Log-permanent and marginal matrix of a log-matrix.
    Permanent(commands::PermanentArgs),
    /// Optimal assignment of a square cost matrix.
    Assign(commands::AssignArgs),
    /// Wasserstein-1 distance between two empirical measures.
    W1(commands::W1Args),
    /// Metropolis samples of the Gibbs measure.
    Sample(commands::SampleArgs),
    /// Monte-Carlo estimate of the finite-N potential.
    EstimatePotential(commands::PotentialArgs),
    /// Monte-Carlo estimate of the finite-N transport map.
    TransportMap(commands::MapArgs),
    /// Quenched estimates with random targets.
    Quenched(commands::QuenchedArgs),
    /// Balanced functions of the π_N operator on a finite space.
    Balanced(commands::BalancedArgs),
    /// 1D Monge-Ampère second boundary value problem.
    SolveMa(commands::SolveMaArgs),
    /// Euler-Maruyama run of the interacting diffusion.
    Langevin(commands::LangevinArgs),
    /// Runs acceptance criteria.
    Verify(commands::VerifyArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.global.config {
        Some(path) => Some(config::read_config(path)?),
        None => None,
    };
    let (global, global_value) = config::resolve_global(&cli.global, file.as_ref())?;
    if let Some(n) = global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    macro_rules! dispatch {
        ($name:literal, $args:expr, $f:path) => {{
            let (args, value) = config::resolve(&$args, file.as_ref())?;
            let mut ctx = commands::Context::new(&global);
            let status = $f(&args, &mut ctx)?;
            let mut resolved = value;
            resolved["global"] = global_value.clone();
            ctx.outputs.finish($name, resolved, ctx.seed)?;
            status
        }};
    }
    let failed = match cli.command {
        Command::Lattice(a) => dispatch!("lattice", a, commands::lattice),
        Command::Envelope(a) => dispatch!("envelope", a, commands::envelope),
        Command::Ma(a) => dispatch!("ma", a, commands::ma),
        Command::Permanent(a) => dispatch!("permanent", a, commands::permanent),
        Command::Assign(a) => dispatch!("assign", a, commands::assign),
        Command::W1(a) => dispatch!("w1", a, commands::w1),
        Command::Sample(a) => dispatch!("sample", a, commands::sample),
        Command::EstimatePotential(a) => dispatch!("estimate-potential", a, commands::estimate_potential),
        Command::TransportMap(a) => dispatch!("transport-map", a, commands::transport_map),
        Command::Quenched(a) => dispatch!("quenched", a, commands::quenched),
        Command::Balanced(a) => dispatch!("balanced", a, commands::balanced),
        Command::SolveMa(a) => dispatch!("solve-ma", a, commands::solve_ma),
        Command::Langevin(a) => dispatch!("langevin", a, commands::langevin),
        Command::Verify(a) => dispatch!("verify", a, commands::verify),
    };
    if failed > 0 {
        return Err(CliError::Failed(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
