//! Command-line front end for the experiment harness.
//!
//! Each subcommand runs one sweep and writes a result table. Settings are
//! resolved in three layers: built-in defaults, then an optional TOML
//! config file, then command-line flags. Exit codes: 0 on success, 2 for
//! configuration problems, 3 when calibration fails on every point of the
//! sweep.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use gsk::harness::{
    emit, run_calibration, run_keyrate_experiment, run_leakage_experiment,
    run_reconciliation_experiment, run_selection_experiment,
};
use gsk::{Error, ExperimentConfig, GammaMode, OutputFormat, Table};

#[derive(Parser)]
#[command(
    name = "gsk-sim",
    about = "Group secret-key generation experiments over simulated fading channels",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Secret-key rate, fixed single-channel vs opportunistic.
    Keyrate(RunArgs),
    /// CSR selection mismatch on doubly-covered samples.
    Selection(RunArgs),
    /// Full pipeline with LDPC syndrome reconciliation.
    Reconcile(RunArgs),
    /// Broadcast leakage audit, exact and empirical.
    Leakage(RunArgs),
    /// Guard-band calibration summary per SNR point.
    Calibrate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Bits per quantized symbol (even).
    #[arg(long)]
    m: Option<u32>,
    /// SNR grid in dB, comma separated.
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    /// Target initial error rate for guard-band calibration.
    #[arg(long)]
    ier: Option<f64>,
    /// Coherence blocks per SNR point.
    #[arg(long)]
    blocks: Option<u64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Selection rule: likelihood, strength, or fixed_h12.
    #[arg(long)]
    mode: Option<String>,
    /// Parity-check matrix in alist format (defaults to the built-in code).
    #[arg(long)]
    ldpc_matrix: Option<PathBuf>,
    /// Output path (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Fixed estimation-error variance (default ties it to the SNR point).
    #[arg(long)]
    gamma: Option<f64>,
    /// Omit the timestamp so identical runs are byte-identical.
    #[arg(long)]
    reproducible: bool,
    /// TOML config file; command-line flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Optional settings loadable from a TOML file. Field names are the flag
/// names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    m: Option<u32>,
    snr: Option<Vec<f64>>,
    ier: Option<f64>,
    blocks: Option<u64>,
    calib_blocks: Option<u64>,
    seed: Option<u64>,
    mode: Option<String>,
    ldpc_matrix: Option<PathBuf>,
    out: Option<PathBuf>,
    format: Option<String>,
    gamma: Option<f64>,
    reproducible: Option<bool>,
}

struct Resolved {
    cfg: ExperimentConfig,
    format: OutputFormat,
    out: Option<PathBuf>,
}

fn resolve(args: &RunArgs) -> Result<Resolved, Error> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let mut cfg = ExperimentConfig::default();
    if let Some(m) = args.m.or(file.m) {
        cfg.m = m;
    }
    if let Some(snr) = args.snr.clone().or(file.snr) {
        cfg.snr_db = snr;
    }
    if let Some(ier) = args.ier.or(file.ier) {
        cfg.target_ier = ier;
    }
    if let Some(blocks) = args.blocks.or(file.blocks) {
        cfg.n_blocks = blocks;
    }
    if let Some(calib) = file.calib_blocks {
        cfg.calib_blocks = calib;
    }
    if let Some(seed) = args.seed.or(file.seed) {
        cfg.seed = seed;
    }
    if let Some(mode) = args.mode.as_deref().or(file.mode.as_deref()) {
        cfg.selection_mode = mode.parse()?;
    }
    if let Some(path) = args.ldpc_matrix.clone().or(file.ldpc_matrix) {
        cfg.ldpc_matrix = Some(path);
    }
    if let Some(gamma) = args.gamma.or(file.gamma) {
        cfg.gamma = GammaMode::Fixed(gamma);
    }
    cfg.reproducible = args.reproducible || file.reproducible.unwrap_or(false);
    cfg.validate()?;

    let format = match args.format.as_deref().or(file.format.as_deref()) {
        Some(f) => OutputFormat::from_str(f)?,
        None => OutputFormat::Csv,
    };
    Ok(Resolved {
        cfg,
        format,
        out: args.out.clone().or(file.out),
    })
}

fn run(command: &Command) -> Result<(), Error> {
    let args = match command {
        Command::Keyrate(a)
        | Command::Selection(a)
        | Command::Reconcile(a)
        | Command::Leakage(a)
        | Command::Calibrate(a) => a,
    };
    let resolved = resolve(args)?;
    let table: Table = match command {
        Command::Keyrate(_) => run_keyrate_experiment(&resolved.cfg)?,
        Command::Selection(_) => run_selection_experiment(&resolved.cfg)?,
        Command::Reconcile(_) => run_reconciliation_experiment(&resolved.cfg)?,
        Command::Leakage(_) => run_leakage_experiment(&resolved.cfg)?,
        Command::Calibrate(_) => run_calibration(&resolved.cfg)?,
    };
    emit(&table, resolved.format, resolved.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::CalibrationFailure { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
