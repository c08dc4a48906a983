use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hamiltonian_nn::experiment::{
    load_config_dir, resolve_output, run_all, Experiment, ExperimentConfig,
};
use hamiltonian_nn::{Error, Result};

#[derive(Parser)]
#[command(
    name = "hnn",
    version,
    about = "Train and evaluate Hamiltonian neural networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON). For run-all, a directory of configs
    /// (default `configs`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Output directory, overriding the config and HNN_OUTPUT_ROOT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing checkpoints and stale datasets.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the dataset.
    Generate(Common),
    /// Train every model for every seed.
    Train(Common),
    /// Write reports, per-time series and the roll-up table.
    Evaluate(Common),
    /// Roll trained models out from the first test trajectory.
    Rollout {
        #[command(flatten)]
        common: Common,
        /// Also integrate back from the end of the rollout.
        #[arg(long)]
        reverse: bool,
        /// Write decoded frames of pixel rollouts as PGM images.
        #[arg(long)]
        pgm: bool,
    },
    /// Energy bump of the trained HNN.
    Bump(Common),
    /// Generate, train and evaluate every config in a directory.
    RunAll(Common),
}

fn experiment(c: &Common) -> Result<Experiment> {
    let path = c
        .config
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seeds) = &c.seed {
        cfg.seeds = seeds.clone();
    }
    let out = resolve_output(&cfg, c.out.as_deref());
    Experiment::new(cfg, out, c.force)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => experiment(&c)?.generate(),
        Command::Train(c) => experiment(&c)?.train(),
        Command::Evaluate(c) => experiment(&c)?.evaluate().map(drop),
        Command::Rollout {
            common,
            reverse,
            pgm,
        } => experiment(&common)?.rollout(reverse, pgm),
        Command::Bump(c) => experiment(&c)?.bump(),
        Command::RunAll(c) => {
            let dir = c.config.clone().unwrap_or_else(|| PathBuf::from("configs"));
            let configs: Vec<_> = load_config_dir(&dir)?
                .into_iter()
                .map(|(_, cfg)| cfg)
                .collect();
            run_all(&configs, c.out.as_deref(), c.seed.as_deref(), c.force).map(drop)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
