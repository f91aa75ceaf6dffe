use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evolve_cli::{cmd_check, cmd_compare, cmd_convergence, cmd_solve, resolve_out_dir, CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "evolve",
    version,
    about = "Global-in-time variational solver for evolution equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides EVOLVE_OUT_DIR and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve with the configured method.
    Solve(Common),
    /// Cross-check the energy minimizer against implicit Euler.
    Compare(Common),
    /// Sample the growth, monotonicity and coercivity hypotheses.
    Check(Common),
    /// Refine the time step and report observed orders.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        refinements: usize,
    },
}

fn init_workers() -> Result<(), CliError> {
    let workers = match std::env::var("EVOLVE_WORKERS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&w| w > 0)
            .ok_or_else(|| CliError::Config(format!("EVOLVE_WORKERS must be a positive integer, got {v:?}")))?,
        Err(_) => 1,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<evolve_cli::ExitCode, CliError> {
    init_workers()?;
    let (common, refinements) = match &cli.command {
        Command::Solve(c) | Command::Compare(c) | Command::Check(c) => (c, 0),
        Command::Convergence { common, refinements } => (common, *refinements),
    };
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let env_out = std::env::var("EVOLVE_OUT_DIR").ok();
    let out = resolve_out_dir(common.out.as_deref(), env_out.as_deref(), &cfg);
    match cli.command {
        Command::Solve(_) => cmd_solve(&cfg, &out),
        Command::Compare(_) => cmd_compare(&cfg, &out),
        Command::Check(_) => cmd_check(&cfg, &out),
        Command::Convergence { .. } => cmd_convergence(&cfg, &out, refinements),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("evolve: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
