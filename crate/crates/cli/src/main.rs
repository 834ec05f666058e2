//! `artscat`: pipeline runner for the inverse-scattering workbench.

use anyhow::{bail, Result};
use artscat_cli::{config, pipeline};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "artscat",
    about = "Farfield simulation, artificial backgrounds, GLSM indicator, and index recovery"
)]
struct Cli {
    /// Run configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir)
    #[arg(long, global = true)]
    out: Option<String>,
    /// Noise seed (overrides [noise] seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fixed regularization parameter (overrides [regularization])
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Worker thread count (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Stage name, as an alternative to the subcommand form
    #[arg(long, global = true)]
    stage: Option<String>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Compute and store the data farfields F
    Simulate,
    /// Compute and store the background farfields F~
    Background,
    /// Evaluate the indicator curve and detect peaks
    Indicator,
    /// Compute the n = 1 reference spectrum
    Spectrum,
    /// Match peaks to the reference and estimate the index
    Recover,
    /// Run the built-in oracle and invariant checks
    Verify,
    /// All stages in order, manifest last
    Pipeline,
}

fn command_from_stage(name: &str) -> Result<Command> {
    Ok(match name {
        "simulate" => Command::Simulate,
        "background" => Command::Background,
        "indicator" => Command::Indicator,
        "spectrum" => Command::Spectrum,
        "recover" => Command::Recover,
        "verify" => Command::Verify,
        "pipeline" => Command::Pipeline,
        other => bail!("unknown stage `{other}`"),
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    let command = match (cli.command, cli.stage.as_deref()) {
        (Some(c), None) => c,
        (None, Some(name)) => command_from_stage(name)?,
        (None, None) => Command::Pipeline,
        (Some(_), Some(_)) => bail!("give either a subcommand or --stage, not both"),
    };
    let config_path = cli
        .config
        .ok_or_else(|| anyhow::anyhow!("--config is required"))?;
    let mut cfg = config::load_config(&config_path)?;
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(alpha) = cli.alpha {
        cfg.alpha_rule = artscat_core::glsm::AlphaRule::Fixed { alpha };
    }
    match command {
        Command::Simulate => pipeline::stage_simulate(&cfg),
        Command::Background => pipeline::stage_background(&cfg),
        Command::Indicator => pipeline::stage_indicator(&cfg),
        Command::Spectrum => pipeline::stage_spectrum(&cfg),
        Command::Recover => pipeline::stage_recover(&cfg),
        Command::Verify => pipeline::stage_verify(&cfg),
        Command::Pipeline => pipeline::run_pipeline(&cfg),
    }
}
