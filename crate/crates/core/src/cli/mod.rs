//! Batch runner: `mott-osc <command> --config <file>`.
//!
//! Every run writes its files into one output directory and finishes with
//! `manifest.json`, which echoes the resolved configuration. Feeding that echo
//! back as a config reproduces the run.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 sweep finished with some failed points, 1 I/O error.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{ExperimentConfig, UNITS_VERSION};
pub use output::{Manifest, OutputEntry, PointStatus, MANIFEST};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mott-osc", version, about = "Mott-oscillator neuron experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Single-node transients over a current/temperature grid.
    Simulate(RunArgs),
    /// Escape-time Monte-Carlo per holding margin.
    Montecarlo(RunArgs),
    /// Two resistively coupled nodes per coupling resistance.
    Couple(RunArgs),
    /// Gate-modulated runs per gate signal.
    Vco(RunArgs),
    /// Model parameters from a recorded waveform.
    Extract(ExtractArgs),
    /// Threshold current and power tables.
    Thermal(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces `noise.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Waveform to analyse (CSV, or JSON by extension).
    #[arg(long)]
    pub input: PathBuf,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Montecarlo(_) => "montecarlo",
            Command::Couple(_) => "couple",
            Command::Vco(_) => "vco",
            Command::Extract(_) => "extract",
            Command::Thermal(_) => "thermal",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a)
            | Command::Montecarlo(a)
            | Command::Couple(a)
            | Command::Vco(a)
            | Command::Thermal(a) => a,
            Command::Extract(e) => &e.run,
        }
    }
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

impl Outcome {
    pub fn failed_points(&self) -> usize {
        self.manifest.points.iter().filter(|p| !p.ok).count()
    }

    pub fn exit_code(&self) -> u8 {
        if self.failed_points() > 0 {
            4
        } else {
            0
        }
    }
}

/// Runs one command and writes its manifest.
pub fn run(command: &Command) -> Result<Outcome, CliError> {
    let args = command.args();
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let (Some(seed), Some(noise)) = (args.seed, cfg.noise.as_mut()) {
        noise.seed = seed;
    }
    let config_dir = args.config.parent().unwrap_or(Path::new("."));
    let out_dir = match (&args.out, cfg.outputs.as_ref().and_then(|o| o.dir.as_ref())) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => config_dir.join(d),
        (None, None) => return Err(CliError::Config("outputs.dir: missing and no --out given".into())),
    };
    let out_dir = output::prepare_dir(&out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    let report = pool.install(|| match command {
        Command::Simulate(_) => commands::simulate(&cfg, &out_dir),
        Command::Montecarlo(_) => commands::montecarlo(&cfg, &out_dir),
        Command::Couple(_) => commands::couple(&cfg, &out_dir),
        Command::Vco(_) => commands::vco(&cfg, &out_dir),
        Command::Extract(e) => commands::extract(&cfg, &e.input, &out_dir),
        Command::Thermal(_) => commands::thermal(&cfg, &out_dir),
    })?;

    let manifest = Manifest {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.noise.as_ref().map(|n| n.seed),
        config: cfg,
        points: report.points,
        outputs: report.outputs,
        summary: report.summary,
    };
    output::Sink::new(&out_dir, None).json(MANIFEST, "manifest", &manifest)?;

    let total = manifest.points.len();
    let failed = manifest.points.iter().filter(|p| !p.ok).count();
    if total > 0 && failed == total {
        let first = manifest.points.iter().find_map(|p| p.error.clone()).unwrap_or_default();
        return Err(CliError::Numerical(format!("all {total} points failed; first: {first}")));
    }
    Ok(Outcome { out_dir, manifest })
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(outcome) => {
            let failed = outcome.failed_points();
            println!(
                "{}: {} points, {} failed, outputs in {}",
                cli.command.name(),
                outcome.manifest.points.len(),
                failed,
                outcome.out_dir.display()
            );
            for p in outcome.manifest.points.iter().filter(|p| !p.ok) {
                eprintln!("point {} ({}): {}", p.index, p.label, p.error.as_deref().unwrap_or(""));
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("mott-osc: {e}");
            e.exit_code()
        }
    }
}
