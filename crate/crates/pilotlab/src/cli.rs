//! Batch command-line surface.
//!
//! Every command reads one JSON config, runs deterministically given that
//! config and `--seed`, and writes static result files for external
//! plotting. Exit codes: 0 on success, 2 for configuration and usage
//! errors, 3 for numerical breakdowns, 4 for IO failures.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::combining::Scheme;
use crate::engine::{
    asymptotic_diagnostics, sweep_antennas, sweep_sigma, two_user_limit, SECurve,
};
use crate::error::{Error, Result};
use crate::io::{
    read_file, spectrum_to_csv, sweep_points_to_csv, to_pretty_json, write_file, SpectrumRow,
};
use crate::scenario::{averaged_eigen_spectrum, build_scenario, ModelSpec, Scenario, ScenarioSpec};

/// Trials per (scheme, grid point) when neither the flag nor the config
/// says otherwise. Keeps full antenna sweeps at desk scale in minutes
/// while holding half-widths near a few hundredths of a bit.
pub const DEFAULT_TRIALS: usize = 500;

#[derive(Parser, Debug)]
#[command(
    name = "pilotlab",
    version,
    about = "Uplink massive MIMO laboratory: channel estimation from shared pilots, \
             combining schemes, and large-array contamination diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a covariance model's averaged eigenvalue spectrum as CSV
    Eigenspectrum(CommonArgs),
    /// Sweep SE over the number of BS antennas (writes CSV and JSON)
    SweepAntennas(CommonArgs),
    /// Sweep SE over the per-antenna gain spread σ (writes CSV and JSON)
    SweepSigma(CommonArgs),
    /// Classify two-user SINR growth across an antenna grid (writes JSON)
    CheckAsymptotics(CommonArgs),
    /// Track the two-user mean SINR against its predicted limit (writes JSON)
    TwoUserLimit(CommonArgs),
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Path to the JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Output file path
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed for every random draw of the run
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Monte Carlo trials per grid point (overrides the config value)
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads for trial parallelism (default: one per core)
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Run configuration as stored in the JSON file. Sections irrelevant to
/// the invoked command may be omitted; unknown keys are rejected.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Inline scenario description.
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
    /// Path to a scenario JSON file, relative to this config's directory.
    #[serde(default)]
    pub scenario_path: Option<String>,
    /// Antenna grid for antenna sweeps and two-user analyses.
    #[serde(default)]
    pub m_grid: Option<Vec<usize>>,
    /// Gain-spread grid for σ sweeps.
    #[serde(default)]
    pub sigma_grid: Option<Vec<f64>>,
    /// Fixed array size for σ sweeps.
    #[serde(default)]
    pub m: Option<usize>,
    /// Combining schemes to evaluate; defaults to M-MMSE, S-MMSE, MRC.
    #[serde(default)]
    pub schemes: Option<Vec<String>>,
    /// Default trial count, overridable by --trials.
    #[serde(default)]
    pub trials: Option<usize>,
    /// Eigenspectrum settings.
    #[serde(default)]
    pub spectrum: Option<SpectrumConfig>,
}

/// Settings for the eigenspectrum command.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub model: ModelSpec,
    /// Array size whose spectrum is computed.
    pub m: usize,
    /// Average gain scaling the whole spectrum.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Independent draws of the model's random parameters to average over.
    #[serde(default = "default_theta_draws")]
    pub theta_draws: usize,
}

fn default_beta() -> f64 {
    1.0
}

fn default_theta_draws() -> usize {
    100
}

/// Parses the command line and runs it. Usage errors exit with code 2
/// before this returns; everything else surfaces as a [`Result`].
pub fn run() -> Result<()> {
    let cli = Cli::parse();
    let (Command::Eigenspectrum(args)
    | Command::SweepAntennas(args)
    | Command::SweepSigma(args)
    | Command::CheckAsymptotics(args)
    | Command::TwoUserLimit(args)) = &cli.command;
    init_threads(args.threads)?;
    let config = load_config(&args.config)?;
    let config_dir = args.config.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();

    match &cli.command {
        Command::Eigenspectrum(args) => cmd_eigenspectrum(&config, args),
        Command::SweepAntennas(args) => cmd_sweep_antennas(&config, &config_dir, args),
        Command::SweepSigma(args) => cmd_sweep_sigma(&config, &config_dir, args),
        Command::CheckAsymptotics(args) => cmd_check_asymptotics(&config, &config_dir, args),
        Command::TwoUserLimit(args) => cmd_two_user_limit(&config, &config_dir, args),
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // The pool can only be installed once per process; a second
        // initialization attempt is harmless and ignored.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = read_file(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn resolve_scenario(config: &RunConfig, config_dir: &Path, default_seed: u64) -> Result<Scenario> {
    let spec: ScenarioSpec = match (&config.scenario, &config.scenario_path) {
        (Some(inline), None) => inline.clone(),
        (None, Some(rel)) => {
            let path = config_dir.join(rel);
            let text = read_file(&path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either an inline scenario or a scenario_path, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::Config("config needs a scenario or a scenario_path".into()))
        }
    };
    build_scenario(&spec, default_seed)
}

fn resolve_schemes(config: &RunConfig) -> Result<Vec<Scheme>> {
    match &config.schemes {
        None => Ok(Scheme::ALL.to_vec()),
        Some(names) => {
            if names.is_empty() {
                return Err(Error::Config("schemes list is empty".into()));
            }
            names.iter().map(|n| n.parse()).collect()
        }
    }
}

fn resolve_trials(config: &RunConfig, args: &CommonArgs) -> usize {
    args.trials.or(config.trials).unwrap_or(DEFAULT_TRIALS)
}

fn require_m_grid(config: &RunConfig) -> Result<&[usize]> {
    config
        .m_grid
        .as_deref()
        .ok_or_else(|| Error::Config("config needs an m_grid for this command".into()))
}

/// Writes the curve as CSV at `out` and as JSON next to it, with the
/// extension replaced by `.json`.
fn write_curve(curve: &SECurve, out: &Path) -> Result<()> {
    let json_path = out.with_extension("json");
    if json_path == *out {
        return Err(Error::Config(format!(
            "--out {} would collide with the JSON twin; use a non-.json extension for sweeps",
            out.display()
        )));
    }
    write_file(out, &sweep_points_to_csv(&curve.points))?;
    write_file(&json_path, &to_pretty_json(curve)?)
}

fn cmd_eigenspectrum(config: &RunConfig, args: &CommonArgs) -> Result<()> {
    let spectrum = config
        .spectrum
        .as_ref()
        .ok_or_else(|| Error::Config("config needs a spectrum section for eigenspectrum".into()))?;
    let values = averaged_eigen_spectrum(
        &spectrum.model,
        spectrum.m,
        spectrum.beta,
        spectrum.theta_draws,
        args.seed,
    )?;
    let rows: Vec<SpectrumRow> = values
        .iter()
        .enumerate()
        .map(|(index, &eigenvalue)| SpectrumRow {
            index,
            eigenvalue,
            model: spectrum.model.tag().to_string(),
        })
        .collect();
    write_file(&args.out, &spectrum_to_csv(&rows))
}

fn cmd_sweep_antennas(config: &RunConfig, config_dir: &Path, args: &CommonArgs) -> Result<()> {
    let scenario = resolve_scenario(config, config_dir, args.seed)?;
    let schemes = resolve_schemes(config)?;
    let trials = resolve_trials(config, args);
    let curve = sweep_antennas(&scenario, require_m_grid(config)?, &schemes, trials, args.seed)?;
    write_curve(&curve, &args.out)
}

fn cmd_sweep_sigma(config: &RunConfig, config_dir: &Path, args: &CommonArgs) -> Result<()> {
    let scenario = resolve_scenario(config, config_dir, args.seed)?;
    let schemes = resolve_schemes(config)?;
    let trials = resolve_trials(config, args);
    let sigma_grid = config
        .sigma_grid
        .as_deref()
        .ok_or_else(|| Error::Config("config needs a sigma_grid for sweep-sigma".into()))?;
    let m = config
        .m
        .ok_or_else(|| Error::Config("config needs a fixed m for sweep-sigma".into()))?;
    let curve = sweep_sigma(&scenario, sigma_grid, m, &schemes, trials, args.seed)?;
    write_curve(&curve, &args.out)
}

fn cmd_check_asymptotics(config: &RunConfig, config_dir: &Path, args: &CommonArgs) -> Result<()> {
    let scenario = resolve_scenario(config, config_dir, args.seed)?;
    let report = asymptotic_diagnostics(&scenario, require_m_grid(config)?)?;
    write_file(&args.out, &to_pretty_json(&report)?)
}

fn cmd_two_user_limit(config: &RunConfig, config_dir: &Path, args: &CommonArgs) -> Result<()> {
    let scenario = resolve_scenario(config, config_dir, args.seed)?;
    let trials = resolve_trials(config, args);
    let report = two_user_limit(&scenario, require_m_grid(config)?, trials, args.seed)?;
    write_file(&args.out, &to_pretty_json(&report)?)
}
