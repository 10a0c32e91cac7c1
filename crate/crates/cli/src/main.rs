//! `sentinel`: simulate debates, build datasets, train the credit scorer,
//! evaluate defenses and benchmark their overhead.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use config::{DefenseMode, Overrides, RunConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "sentinel",
    version,
    about = "Multi-agent debate simulator with sentinel defenses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parallel grid cells.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Attack kind, or `none`.
    #[arg(long, global = true)]
    attack: Option<String>,
    #[arg(long, global = true, value_enum)]
    defense: Option<DefenseMode>,
    /// Blacklist slots per sentinel round.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Weight of the alignment loss term.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Remote scorer endpoint.
    #[arg(long, global = true, env = "SENTINEL_SCORER_URL")]
    scorer_url: Option<String>,
    /// Input file (gen-data) or dataset directory (train).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run debates and write labeled trajectories plus blacklist audits.
    Simulate,
    /// Build contrastive tuples from labeled trajectories.
    GenData,
    /// Train the linear credit scorer.
    Train,
    /// Run the evaluation grid.
    Eval,
    /// Measure defense overhead per attack kind.
    Bench,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::GenData => "gen-data",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Bench => "bench",
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let c = &cli.common;
    let mut cfg = RunConfig::load(c.config.as_deref())?;
    cfg.apply(&Overrides {
        seed: c.seed,
        out: c.out.clone(),
        attack: c.attack.clone(),
        defense: c.defense,
        k: c.k,
        alpha: c.alpha,
        scorer_url: c.scorer_url.clone(),
    })?;
    match cli.command {
        Command::GenData if c.input.is_some() => cfg.gen_data.input = c.input.clone(),
        Command::Train if c.input.is_some() => cfg.train.input = c.input.clone(),
        _ => {}
    }
    std::fs::create_dir_all(&cfg.out)?;
    commands::echo_config(&cfg, cli.command.name(), c.jobs)?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::GenData => commands::gen_data(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Eval => commands::eval(&cfg, c.jobs),
        Command::Bench => commands::bench(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level)))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
