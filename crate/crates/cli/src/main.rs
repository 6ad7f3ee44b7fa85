//! `qcmean`: gauge checks, continuity bounds, ring-mean sweeps and the
//! extremal construction, driven by a JSON config.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qcmean::quad::QuadConfig;

#[derive(Parser, Debug)]
#[command(name = "qcmean", version, about = "Mean-distortion bounds for ring Q-homeomorphisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for `<command>.<format>`; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Overrides `params.alpha_n`.
    #[arg(long = "alpha-n", global = true)]
    alpha_n: Option<f64>,
    /// Seed for sampled certificates.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Classify the gauge conditions and give the equicontinuity verdict.
    GaugeCheck,
    /// Tabulate the continuity bound over `sweep.x`.
    Bound,
    /// Both sides of the ring-mean inequality over `sweep.epsilon`.
    Lemma31,
    /// Build the extremal radial family.
    Extremal,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GaugeCheck => "gauge-check",
            Command::Bound => "bound",
            Command::Lemma31 => "lemma31",
            Command::Extremal => "extremal",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Svg => "svg",
        }
    }
}

/// Settings shared by every command.
pub struct Context {
    pub command: Command,
    pub format: Format,
    pub alpha_n: Option<f64>,
    pub seed: u64,
    pub quad: QuadConfig,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn quad_config() -> anyhow::Result<QuadConfig> {
    let mut cfg = QuadConfig::default();
    if let Ok(v) = std::env::var("QCMEAN_MAX_REFINE") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("QCMEAN_MAX_REFINE must be a positive integer, got {v:?}"))?;
        if n == 0 {
            anyhow::bail!("QCMEAN_MAX_REFINE must be positive");
        }
        cfg.max_subdivisions = n;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let prepared = (|| -> anyhow::Result<_> {
        let path = cli.config.clone().ok_or_else(|| anyhow::anyhow!("--config <path> is required"))?;
        let loaded = config::load(&path)?;
        let ctx = Context {
            command: cli.command,
            format: cli.format,
            alpha_n: cli.alpha_n,
            seed: cli.seed,
            quad: quad_config()?,
        };
        Ok((loaded, ctx))
    })();
    let (loaded, ctx) = match prepared {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = match commands::run(&loaded, &ctx) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Err(e) = output::emit(&outcome.text, cli.out.as_deref(), ctx.command, ctx.format) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match outcome.failure {
        None => ExitCode::SUCCESS,
        Some(msg) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}
