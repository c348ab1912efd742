//! Scenario configuration: TOML (or JSON) files with one section per model,
//! plus run controls shared by every scenario.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qmq_core::models::{ChargeQubitParams, SpinQubitParams};

use crate::CliError;

/// Which simulation a config drives. Matches the CLI subcommand names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    ChargeReadout,
    SpinReadout,
    Sweetspot,
    SmeCompare,
    LeakageExperiment,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ChargeReadout => "charge-readout",
            ScenarioKind::SpinReadout => "spin-readout",
            ScenarioKind::Sweetspot => "sweetspot",
            ScenarioKind::SmeCompare => "sme-compare",
            ScenarioKind::LeakageExperiment => "leakage-experiment",
        }
    }
}

/// Run controls shared by all scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunControls {
    /// Largest round count of a benchmark series.
    pub max_n: usize,
    /// Number of grid points of the logarithmic round grid.
    pub grid_points: usize,
    /// Base seed for every stochastic component of a run.
    pub seed: u64,
    /// Worker threads; 0 lets the runtime pick.
    pub threads: usize,
    /// Evolve count vectors instead of full channel matrices.
    pub streaming: bool,
    /// Directory receiving artifacts.
    pub out_dir: PathBuf,
    /// Artifact file prefix; defaults to the config file stem.
    pub label: Option<String>,
}

impl Default for RunControls {
    fn default() -> Self {
        Self {
            max_n: 2000,
            grid_points: 40,
            seed: 7,
            threads: 0,
            streaming: true,
            out_dir: PathBuf::from("."),
            label: None,
        }
    }
}

/// Charge-qubit section; defaults follow the reference parameter set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChargeSection {
    pub epsilon: f64,
    pub t: f64,
    pub gamma: f64,
    pub delta_gamma: f64,
    /// When present, the readout scenario emits one curve per tunneling
    /// value instead of the single `t` above.
    pub t_values: Option<Vec<f64>>,
}

impl Default for ChargeSection {
    fn default() -> Self {
        let p = ChargeQubitParams::reference();
        Self {
            epsilon: p.epsilon,
            t: p.t,
            gamma: p.gamma,
            delta_gamma: p.delta_gamma,
            t_values: None,
        }
    }
}

impl ChargeSection {
    pub fn params_with_t(&self, t: f64) -> ChargeQubitParams {
        ChargeQubitParams {
            epsilon: self.epsilon,
            t,
            gamma: self.gamma,
            delta_gamma: self.delta_gamma,
        }
    }

    /// Tunneling values to sweep: the list when given, the scalar otherwise.
    pub fn tunneling_values(&self) -> Vec<f64> {
        self.t_values.clone().unwrap_or_else(|| vec![self.t])
    }
}

/// Spin-qubit section; defaults follow the reference parameter set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinSection {
    pub epsilon: f64,
    pub t: f64,
    pub u: f64,
    pub z_left: f64,
    pub z_right: f64,
    pub gamma: f64,
    pub delta_gamma: f64,
    /// Spin-charge coupling vector (x, y, z) in ueV.
    pub delta: [f64; 3],
    /// Longitudinal couplings for a measurement-rate sweep.
    pub delta_z_values: Option<Vec<f64>>,
    /// Transverse couplings for a leakage-law sweep.
    pub delta_x_values: Option<Vec<f64>>,
    /// Round cap for the sweeps; defaults to the series `max_n`.
    pub sweep_max_n: Option<usize>,
}

impl Default for SpinSection {
    fn default() -> Self {
        let p = SpinQubitParams::reference();
        Self {
            epsilon: p.epsilon,
            t: p.t,
            u: p.u,
            z_left: p.z_left,
            z_right: p.z_right,
            gamma: p.gamma,
            delta_gamma: p.delta_gamma,
            delta: p.delta_vec,
            delta_z_values: None,
            delta_x_values: None,
            sweep_max_n: None,
        }
    }
}

impl SpinSection {
    pub fn params(&self) -> SpinQubitParams {
        self.params_with_delta(self.delta)
    }

    pub fn params_with_delta(&self, delta: [f64; 3]) -> SpinQubitParams {
        SpinQubitParams {
            epsilon: self.epsilon,
            t: self.t,
            u: self.u,
            z_left: self.z_left,
            z_right: self.z_right,
            gamma: self.gamma,
            delta_gamma: self.delta_gamma,
            delta_vec: delta,
        }
    }
}

/// g-tensor pair and sweep grid of the sweet-spot scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweetSpotSection {
    pub g: [[f64; 3]; 3],
    pub g_prime: [[f64; 3]; 3],
    /// Field magnitude for the direction sweep, in Tesla.
    pub field_magnitude: f64,
    /// Polar grid points, poles inclusive.
    pub n_theta: usize,
    /// Azimuthal grid points.
    pub n_phi: usize,
}

impl Default for SweetSpotSection {
    fn default() -> Self {
        let pair = qmq_core::sweetspot::GTensorPair::demo();
        Self {
            g: pair.g,
            g_prime: pair.g_prime,
            field_magnitude: 1.0,
            n_theta: 181,
            n_phi: 360,
        }
    }
}

/// Jump-unraveled diffusion-model comparison controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmeSection {
    /// Integration step, ns.
    pub dt: f64,
    /// Trajectory duration, ns.
    pub duration: f64,
    /// Stored time samples of the ensemble average.
    pub n_samples: usize,
    /// Ensemble size.
    pub n_trajectories: usize,
}

impl Default for SmeSection {
    fn default() -> Self {
        Self {
            dt: 0.002,
            duration: 40.0,
            n_samples: 200,
            n_trajectories: 2000,
        }
    }
}

/// Two-round leakage-detection experiment controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeakageSection {
    pub n_steps_per_round: usize,
    pub shots: usize,
    /// Injected initialization-error weights.
    pub q1: f64,
    pub q2: f64,
}

impl Default for LeakageSection {
    fn default() -> Self {
        Self {
            n_steps_per_round: 600,
            shots: 10_000,
            q1: 0.0,
            q2: 0.0,
        }
    }
}

/// Full scenario configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Optional scenario tag; must match the subcommand when present.
    pub scenario: Option<ScenarioKind>,
    pub run: RunControls,
    pub charge: ChargeSection,
    pub spin: SpinSection,
    pub sweetspot: SweetSpotSection,
    pub sme: SmeSection,
    pub leakage: LeakageSection,
}

impl ScenarioConfig {
    /// Parses a TOML config, or JSON when the path ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Parse(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config: Self = if path.extension().is_some_and(|ext| ext == "json") {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Parse(format!("invalid JSON config: {e}")))?
        } else {
            toml::from_str(&text)
                .map_err(|e| CliError::Parse(format!("invalid TOML config: {e}")))?
        };
        if config.run.label.is_none() {
            config.run.label = path
                .file_stem()
                .map(|stem| stem.to_string_lossy().into_owned());
        }
        Ok(config)
    }

    /// Artifact prefix for emitted files.
    pub fn label(&self) -> &str {
        self.run.label.as_deref().unwrap_or("run")
    }

    /// Rejects a config whose `scenario` tag contradicts the subcommand.
    pub fn check_scenario(&self, expected: ScenarioKind) -> Result<(), CliError> {
        match self.scenario {
            Some(kind) if kind != expected => Err(CliError::Validation(format!(
                "config is tagged for scenario '{}' but '{}' was requested",
                kind.name(),
                expected.name()
            ))),
            _ => Ok(()),
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub max_n: Option<usize>,
    pub streaming: Option<bool>,
}

impl Overrides {
    pub fn apply(&self, run: &mut RunControls) {
        if let Some(dir) = &self.out_dir {
            run.out_dir = dir.clone();
        }
        if let Some(threads) = self.threads {
            run.threads = threads;
        }
        if let Some(seed) = self.seed {
            run.seed = seed;
        }
        if let Some(max_n) = self.max_n {
            run.max_n = max_n;
        }
        if let Some(streaming) = self.streaming {
            run.streaming = streaming;
        }
    }
}

/// Logarithmic round grid: `points` counts spread over [10, max_n],
/// deduplicated after rounding to integers.
pub fn log_round_grid(max_n: usize, points: usize) -> Result<Vec<usize>, CliError> {
    if max_n < 10 {
        return Err(CliError::Validation(format!(
            "max_n = {max_n} is below the smallest series round count 10"
        )));
    }
    if points < 2 {
        return Err(CliError::Validation(format!(
            "grid needs at least 2 points, got {points}"
        )));
    }
    let (lo, hi) = (10.0f64.ln(), (max_n as f64).ln());
    let mut grid: Vec<usize> = (0..points)
        .map(|i| {
            let f = i as f64 / (points - 1) as f64;
            (lo + f * (hi - lo)).exp().round() as usize
        })
        .collect();
    grid.dedup();
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let config = ScenarioConfig::default();
        let text = toml::to_string(&config).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.run.max_n, config.run.max_n);
        assert_eq!(back.charge.gamma, config.charge.gamma);
    }

    #[test]
    fn grid_spans_the_range_and_is_strictly_increasing() {
        let grid = log_round_grid(2000, 40).unwrap();
        assert_eq!(*grid.first().unwrap(), 10);
        assert_eq!(*grid.last().unwrap(), 2000);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert!(grid.len() <= 40);
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        assert!(log_round_grid(5, 40).is_err());
        assert!(log_round_grid(100, 1).is_err());
    }
}
