//! Batch runner for the simplex-margin experiments.
//!
//! `simplex-margin run --config <path>` reads a flat `key=value` file, runs the
//! experiment named by its `experiment` key and writes versioned CSVs (and
//! optionally SVG plots) to the output directory.

pub mod config;
pub mod experiments;
pub mod output;
pub mod properties;
pub mod svg;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{ConfigError, RawConfig};
use experiments::RunContext;

pub const SEED_ENV: &str = "SIMPLEX_MARGIN_SEED";
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_OUT: &str = "results";

pub const EXPERIMENTS: [&str; 4] = ["hard-margin", "soft-margin", "hard-margin-rates", "properties"];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

/// How a run that did not error ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    PropertyFailure,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::PropertyFailure => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "simplex-margin", version, about = "Simplex-coded margin experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `out` key.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed; overrides the environment and the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
    /// Overrides the config's `repeats` key.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Worker threads. Output does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// Flag, then environment, then config, then [`DEFAULT_SEED`].
fn resolve_seed(flag: Option<u64>, env: Option<String>, cfg: &mut RawConfig) -> Result<u64, ConfigError> {
    let from_config: u64 = cfg.get("seed", DEFAULT_SEED)?;
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(v) = env {
        return v
            .trim()
            .parse()
            .map_err(|e| ConfigError::new(SEED_ENV, format!("cannot parse '{v}': {e}")));
    }
    Ok(from_config)
}

pub fn run(args: &RunArgs) -> Result<Outcome, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        ConfigError::new("config", format!("cannot read {}: {e}", args.config.display()))
    })?;
    let mut cfg = RawConfig::parse(&text)?;
    let experiment: String = cfg.get("experiment", String::new())?;
    if !EXPERIMENTS.contains(&experiment.as_str()) {
        return Err(ConfigError::new(
            "experiment",
            format!("'{experiment}' is not one of {}", EXPERIMENTS.join(", ")),
        )
        .into());
    }
    let seed = resolve_seed(args.seed, std::env::var(SEED_ENV).ok(), &mut cfg)?;
    let out_key: PathBuf = cfg.get("out", PathBuf::from(DEFAULT_OUT))?;
    let out_dir = args.out.clone().unwrap_or(out_key);
    if let Some(k) = args.repeats {
        config::ensure(k >= 1, "repeats", "--repeats must be at least 1")?;
        if experiment == "properties" {
            return Err(ConfigError::new("repeats", "the properties suite has no repeats").into());
        }
        cfg.set("repeats", k);
    }
    config::ensure(args.jobs >= 1, "jobs", "--jobs must be at least 1")?;
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let ctx = RunContext {
        out_dir,
        seed,
        jobs: args.jobs,
        svg: args.svg,
    };
    match experiment.as_str() {
        "hard-margin" => experiments::hard_margin::run(&mut cfg, &ctx),
        "soft-margin" => experiments::soft_margin::run(&mut cfg, &ctx),
        "hard-margin-rates" => experiments::rates::run(&mut cfg, &ctx),
        _ => properties::run(&mut cfg, &ctx),
    }
}
