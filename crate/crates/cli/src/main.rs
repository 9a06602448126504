//! `cei`: run trial batches, compute metrics, calibrate thresholds.

mod analyse;
mod calibrate;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use cei::config::{Manifest, ModeSetting, RunConfig};
use cei::error::CeiError;
use cei::params::ParameterSet;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "cei", version, about = "Two-vehicle merging simulator and calibration tools")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct GlobalArgs {
    /// Run configuration (TOML), or a run's manifest.json to repeat it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Noise mode; overrides the config.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModeArg {
    Stochastic,
    NoiseFree,
}

impl From<ModeArg> for ModeSetting {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Stochastic => ModeSetting::Stochastic,
            ModeArg::NoiseFree => ModeSetting::NoiseFree,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum GapArg {
    Clearance,
    FrontToFront,
}

impl From<GapArg> for cei::analysis::GapDefinition {
    fn from(g: GapArg) -> Self {
        match g {
            GapArg::Clearance => Self::Clearance,
            GapArg::FrontToFront => Self::FrontToFront,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate every pair, condition and repetition and write trial logs.
    Run,
    /// Trial-level and aggregate CSVs plus SVG panels for a log directory.
    Metrics {
        log_dir: PathBuf,
        /// Gap definition; defaults to the run's manifest, else clearance.
        #[arg(long, value_enum)]
        gap: Option<GapArg>,
        /// Directory of human trial files to compare against.
        #[arg(long, value_name = "DIR")]
        human: Option<PathBuf>,
        /// Layout of the human files; the export layout when absent.
        #[arg(long, value_name = "FILE", requires = "human")]
        schema: Option<PathBuf>,
    },
    /// Fit thresholds and incentives to human trial data.
    Calibrate {
        #[arg(long, value_name = "DIR")]
        human: PathBuf,
        #[arg(long, value_name = "FILE")]
        schema: PathBuf,
    },
    /// Build the calibration grids of the configured conditions into the cache.
    Grid,
    /// Convert trial logs to one CSV per trial.
    Export { log_dir: PathBuf },
}

/// Config from `--config` (a TOML file or a manifest) with flag overrides,
/// plus the inline parameters when it came from a manifest.
fn load_config(global: &GlobalArgs) -> Result<(RunConfig, Option<ParameterSet>)> {
    let (mut cfg, inline) = match &global.config {
        None => (RunConfig::default(), None),
        Some(path) if path.extension().is_some_and(|e| e == "json") => {
            let m = Manifest::read(path).with_context(|| format!("reading manifest {}", path.display()))?;
            (m.config, Some(m.parameters))
        }
        Some(path) => (RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?, None),
    };
    if let Some(seed) = global.seed {
        cfg.base_seed = seed;
    }
    if let Some(workers) = global.workers {
        cfg.workers = workers;
    }
    if let Some(mode) = global.mode {
        cfg.mode = mode.into();
    }
    if let Some(out) = &global.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok((cfg, inline))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<CeiError>()) {
        Some(CeiError::UnknownCondition(_) | CeiError::InvalidConfig { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run => run::run(&cli.global),
        Command::Metrics {
            log_dir,
            gap,
            human,
            schema,
        } => analyse::metrics(&cli.global, log_dir, gap.map(Into::into), human.as_deref(), schema.as_deref()),
        Command::Calibrate { human, schema } => calibrate::calibrate(&cli.global, human, schema),
        Command::Grid => calibrate::grid(&cli.global),
        Command::Export { log_dir } => analyse::export(&cli.global, log_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
