//! Command-line front end: emit the bound curves, sweep the decay rate,
//! drive seeded Monte-Carlo simulations and run the verification suite.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{CmdResult, Outcome};
use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Parser)]
#[command(
    name = "wse-di",
    about = "Security bounds and simulation for device-independent weak string erasure",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args)]
pub struct CommonArgs {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Master RNG seed (overrides the config key).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format (overrides the config key).
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Emit the min-entropy rate curve f(beta) (CSV: beta,f_beta).
    Bounds(CommonArgs),
    /// Emit the live/test trade-off curve (CSV: t,p_L,p_T).
    Tradeoff(CommonArgs),
    /// Sweep the sequential decay rate (CSV: q,gamma,alpha_min,k_star).
    AlphaMin(CommonArgs),
    /// Monte-Carlo failure probability against the closed-form bound.
    Simulate(CommonArgs),
    /// Run the named verification checks.
    Verify(CommonArgs),
}

fn resolve(mut config: RunConfig, args: &CommonArgs) -> Result<RunConfig, config::ConfigError> {
    if let Some(path) = &args.config {
        config.load_file(path)?;
    }
    for entry in &args.sets {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| config::ConfigError(format!("--set '{entry}': expected KEY=VALUE")))?;
        config.set(key.trim(), value.trim())?;
    }
    if let Some(seed) = args.seed {
        config.set("seed", &seed.to_string())?;
    }
    if let Some(format) = &args.format {
        config.set("format", format)?;
    }
    Ok(config)
}

fn init_thread_pool() -> Result<(), config::ConfigError> {
    #[cfg(feature = "parallel")]
    if let Ok(value) = std::env::var("WSE_DI_THREADS") {
        let threads: usize = value.parse().map_err(|_| {
            config::ConfigError(format!("WSE_DI_THREADS = '{value}' is not an integer"))
        })?;
        if threads == 0 {
            return Err(config::ConfigError("WSE_DI_THREADS must be >= 1".into()));
        }
        // Ignore "already initialized": harmless on repeated in-process runs.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(())
}

/// Run the parsed CLI and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e}");
        return EXIT_VALIDATION;
    }
    let (defaults, args, runner): (
        RunConfig,
        &CommonArgs,
        fn(&RunConfig, Option<&std::path::Path>) -> CmdResult,
    ) = match &cli.command {
        Command::Bounds(a) => (commands::bounds_defaults(), a, commands::cmd_bounds),
        Command::Tradeoff(a) => (commands::tradeoff_defaults(), a, commands::cmd_tradeoff),
        Command::AlphaMin(a) => (commands::alpha_min_defaults(), a, commands::cmd_alpha_min),
        Command::Simulate(a) => (commands::simulate_defaults(), a, commands::cmd_simulate),
        Command::Verify(a) => (commands::verify_defaults(), a, commands::cmd_verify),
    };
    let config = match resolve(defaults, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    match runner(&config, args.out.as_deref()) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::Failed(reason)) => {
            eprintln!("error: {reason}");
            EXIT_FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
    }
}
