//! Command-line front end for the readout simulation crate.
//!
//! Subcommands map one-to-one onto scenarios: `charge-readout`,
//! `spin-readout`, `sweetspot`, `sme-compare`, and `leakage-experiment`, plus
//! `validate` for a dry run that checks a config and estimates resources.
//! Scenarios read a TOML config (JSON accepted by extension), apply any
//! command-line overrides, and write CSV tables, JSON reports, and a manifest
//! into the output directory. Identical (config, seed, version) triples give
//! byte-identical CSV output regardless of the thread count.

pub mod config;
pub mod output;
pub mod scenarios;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use qmq_core::engine::EngineError;
use qmq_core::models::ModelError;

use config::{Overrides, ScenarioConfig, ScenarioKind};

/// Errors mapped onto the documented process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or syntactically invalid input; exit code 2.
    #[error("parse error: {0}")]
    Parse(String),
    /// Well-formed but physically or structurally invalid input; exit code 3.
    #[error("validation error: {0}")]
    Validation(String),
    /// Run would exceed a resource cap; exit code 4.
    #[error("resource cap: {0}")]
    ResourceCap(String),
    /// Filesystem failure; exit code 1.
    #[error("io error: {0}")]
    Io(String),
    /// Internal numeric failure; exit code 1.
    #[error("computation error: {0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::ResourceCap(_) => 4,
            CliError::Io(_) | CliError::Compute(_) => 1,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::RoundCapExceeded { .. } => CliError::ResourceCap(e.to_string()),
            other => CliError::Compute(other.to_string()),
        }
    }
}

impl From<qmq_core::metrics::MetricsError> for CliError {
    fn from(e: qmq_core::metrics::MetricsError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<qmq_core::analytics::AnalyticsError> for CliError {
    fn from(e: qmq_core::analytics::AnalyticsError) -> Self {
        CliError::Compute(e.to_string())
    }
}

/// On/off switch for flag overrides of boolean config fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        s == Switch::On
    }
}

/// Options shared by every scenario subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Scenario configuration file (TOML; .json files are parsed as JSON).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory for artifacts; overrides the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 means the runtime default.
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Base seed for stochastic components.
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Largest round count of the benchmark series.
    #[arg(long = "max-n", value_name = "N")]
    pub max_n: Option<usize>,
    /// Evolve count vectors (on) or full channel matrices (off).
    #[arg(long, value_enum, value_name = "on|off")]
    pub streaming: Option<Switch>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out_dir: self.out.clone(),
            threads: self.threads,
            seed: self.seed,
            max_n: self.max_n,
            streaming: self.streaming.map(bool::from),
        }
    }

    /// Loads the config (defaults when no file is given) with overrides
    /// applied.
    fn resolve(&self) -> Result<ScenarioConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        self.overrides().apply(&mut config.run);
        Ok(config)
    }
}

/// Sweet-spot scenario options.
#[derive(Debug, Clone, Args)]
pub struct SweetspotArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// File with six rows of three numbers: the tensor g, then g'.
    #[arg(long = "g-file", value_name = "PATH")]
    pub g_file: Option<PathBuf>,
    /// Direction grid as THETAxPHI, e.g. 181x360.
    #[arg(long, value_name = "TxP")]
    pub grid: Option<String>,
}

/// Dry-run options.
#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scenario to validate against; defaults to the config's own tag.
    #[arg(long, value_enum, value_name = "SCENARIO")]
    pub scenario: Option<ScenarioKind>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Charge-qubit readout benchmark series.
    ChargeReadout(CommonArgs),
    /// Singlet-triplet spin readout benchmark series and coupling sweeps.
    SpinReadout(CommonArgs),
    /// Magnetic-field sweet-spot search for the g-tensor pair.
    Sweetspot(SweetspotArgs),
    /// Rate comparison against a matched continuous sensor model.
    SmeCompare(CommonArgs),
    /// Two-round leakage-detection experiment.
    LeakageExperiment(CommonArgs),
    /// Dry run: check a config and estimate resources without computing.
    Validate(ValidateArgs),
}

#[derive(Debug, Parser)]
#[command(
    name = "qmq",
    version,
    about = "Charge-sensor readout simulation for charge and spin qubits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

fn parse_grid_spec(spec: &str) -> Result<(usize, usize), CliError> {
    let (theta, phi) = spec.split_once(['x', 'X']).ok_or_else(|| {
        CliError::Parse(format!("grid spec {spec:?} is not of the form THETAxPHI"))
    })?;
    let parse = |s: &str, what: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|e| CliError::Parse(format!("bad {what} count {s:?} in grid spec: {e}")))
    };
    Ok((parse(theta, "theta")?, parse(phi, "phi")?))
}

/// Runs one parsed command inside a dedicated thread pool and returns the
/// paths of the artifacts written (empty for `validate`).
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    match &cli.command {
        Command::ChargeReadout(args) => run_scenario(ScenarioKind::ChargeReadout, args),
        Command::SpinReadout(args) => run_scenario(ScenarioKind::SpinReadout, args),
        Command::SmeCompare(args) => run_scenario(ScenarioKind::SmeCompare, args),
        Command::LeakageExperiment(args) => run_scenario(ScenarioKind::LeakageExperiment, args),
        Command::Sweetspot(args) => {
            let mut config = args.common.resolve()?;
            if let Some(spec) = &args.grid {
                let (n_theta, n_phi) = parse_grid_spec(spec)?;
                config.sweetspot.n_theta = n_theta;
                config.sweetspot.n_phi = n_phi;
            }
            let pair = args
                .g_file
                .as_deref()
                .map(scenarios::sweetspot::load_g_file)
                .transpose()?;
            if let Some(p) = &pair {
                config.sweetspot.g = p.g;
                config.sweetspot.g_prime = p.g_prime;
            }
            with_pool(config.run.threads, || {
                scenarios::run(ScenarioKind::Sweetspot, &config)
            })
        }
        Command::Validate(args) => {
            let config = args.common.resolve()?;
            let kind = args.scenario.or(config.scenario).ok_or_else(|| {
                CliError::Validation(
                    "no scenario to validate: pass --scenario or tag the config with one".into(),
                )
            })?;
            let report = scenarios::validate(kind, &config)?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Io(e.to_string()))?;
            println!("{text}");
            Ok(Vec::new())
        }
    }
}

fn run_scenario(kind: ScenarioKind, args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let config = args.resolve()?;
    with_pool(config.run.threads, || scenarios::run(kind, &config))
}

/// Runs `body` inside a rayon pool with the requested thread count, so the
/// thread override takes effect regardless of global state.
fn with_pool<T>(
    threads: usize,
    body: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Compute(format!("cannot build thread pool: {e}")))?;
    pool.install(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parses_both_cases() {
        assert_eq!(parse_grid_spec("181x360").unwrap(), (181, 360));
        assert_eq!(parse_grid_spec("91X180").unwrap(), (91, 180));
        assert!(parse_grid_spec("181").is_err());
        assert!(parse_grid_spec("ax360").is_err());
    }

    #[test]
    fn exit_codes_follow_the_error_kind() {
        assert_eq!(CliError::Parse("x".into()).exit_code(), 2);
        assert_eq!(CliError::Validation("x".into()).exit_code(), 3);
        assert_eq!(CliError::ResourceCap("x".into()).exit_code(), 4);
        assert_eq!(CliError::Io("x".into()).exit_code(), 1);
    }

    #[test]
    fn cli_parses_scenario_subcommands() {
        let cli = Cli::try_parse_from([
            "qmq",
            "charge-readout",
            "--max-n",
            "500",
            "--streaming",
            "on",
        ])
        .unwrap();
        match cli.command {
            Command::ChargeReadout(args) => {
                assert_eq!(args.max_n, Some(500));
                assert_eq!(args.streaming, Some(Switch::On));
            }
            other => panic!("unexpected command {other:?}"),
        }
    }
}
