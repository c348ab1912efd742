//! Scenario runners behind the CLI subcommands.

pub mod charge_readout;
pub mod leakage_experiment;
pub mod series;
pub mod sme_compare;
pub mod spin_readout;
pub mod sweetspot;

use std::path::PathBuf;

use serde::Serialize;

use qmq_core::models;

use crate::config::{log_round_grid, ScenarioConfig, ScenarioKind};
use crate::CliError;
use series::{FULL_HISTORY_CAP, STREAMING_CAP};

/// Everything a scenario runner needs besides its own config section.
pub struct RunContext<'a> {
    pub config: &'a ScenarioConfig,
}

impl RunContext<'_> {
    pub fn label(&self) -> &str {
        self.config.label()
    }

    pub fn out_dir(&self) -> &std::path::Path {
        &self.config.run.out_dir
    }
}

/// Dispatches to the scenario runner; returns the artifact paths written.
pub fn run(kind: ScenarioKind, config: &ScenarioConfig) -> Result<Vec<PathBuf>, CliError> {
    config.check_scenario(kind)?;
    check_limits(kind, config)?;
    let ctx = RunContext { config };
    match kind {
        ScenarioKind::ChargeReadout => charge_readout::run(&ctx),
        ScenarioKind::SpinReadout => spin_readout::run(&ctx),
        ScenarioKind::Sweetspot => sweetspot::run(&ctx),
        ScenarioKind::SmeCompare => sme_compare::run(&ctx),
        ScenarioKind::LeakageExperiment => leakage_experiment::run(&ctx),
    }
}

/// Enforces the round-count caps for one requested series length.
fn check_round_cap(max_n: usize, streaming: bool, what: &str) -> Result<(), CliError> {
    if max_n > STREAMING_CAP {
        return Err(CliError::ResourceCap(format!(
            "{what} requests {max_n} rounds, above the hard cap {STREAMING_CAP}; \
             reduce max_n"
        )));
    }
    if !streaming && max_n > FULL_HISTORY_CAP {
        return Err(CliError::ResourceCap(format!(
            "{what} requests {max_n} rounds with full channel history, above the \
             cap {FULL_HISTORY_CAP}; enable streaming (--streaming on) or reduce max_n"
        )));
    }
    Ok(())
}

/// Validates parameters and resource limits without running anything.
fn check_limits(kind: ScenarioKind, config: &ScenarioConfig) -> Result<(), CliError> {
    let run = &config.run;
    match kind {
        ScenarioKind::ChargeReadout => {
            check_round_cap(run.max_n, run.streaming, "charge readout series")?;
            log_round_grid(run.max_n, run.grid_points)?;
            for t in config.charge.tunneling_values() {
                config.charge.params_with_t(t).validate()?;
            }
        }
        ScenarioKind::SpinReadout => {
            check_round_cap(run.max_n, run.streaming, "spin readout series")?;
            log_round_grid(run.max_n, run.grid_points)?;
            let spin = &config.spin;
            spin.params().validate()?;
            let sweep_max = spin.sweep_max_n.unwrap_or(run.max_n);
            if spin.delta_z_values.is_some() || spin.delta_x_values.is_some() {
                check_round_cap(sweep_max, run.streaming, "spin sweep series")?;
                log_round_grid(sweep_max, run.grid_points)?;
            }
            for &dz in spin.delta_z_values.iter().flatten() {
                let mut delta = spin.delta;
                delta[2] = dz;
                spin.params_with_delta(delta).validate()?;
                models::calibrate_timestep(spin.gamma, spin.delta_gamma, dz)?;
            }
            for &dx in spin.delta_x_values.iter().flatten() {
                if !(dx >= 0.0) {
                    return Err(CliError::Validation(format!(
                        "delta_x_values entries must be nonnegative, got {dx}"
                    )));
                }
            }
        }
        ScenarioKind::Sweetspot => {
            let s = &config.sweetspot;
            if s.n_theta < 2 || s.n_phi < 2 {
                return Err(CliError::Validation(format!(
                    "direction grid {}x{} is too coarse; need at least 2x2",
                    s.n_theta, s.n_phi
                )));
            }
            if !(s.field_magnitude > 0.0) {
                return Err(CliError::Validation(format!(
                    "field magnitude must be positive, got {}",
                    s.field_magnitude
                )));
            }
            const GRID_CAP: usize = 4_000_000;
            if s.n_theta.saturating_mul(s.n_phi) > GRID_CAP {
                return Err(CliError::ResourceCap(format!(
                    "direction grid {}x{} has more than {GRID_CAP} points; coarsen it",
                    s.n_theta, s.n_phi
                )));
            }
        }
        ScenarioKind::SmeCompare => {
            config.charge.params_with_t(config.charge.t).validate()?;
            let s = &config.sme;
            if !(s.dt > 0.0) || !(s.duration > s.dt) {
                return Err(CliError::Validation(format!(
                    "need 0 < dt < duration, got dt = {}, duration = {}",
                    s.dt, s.duration
                )));
            }
            if s.n_trajectories == 0 {
                return Err(CliError::Validation(
                    "n_trajectories must be at least 1".into(),
                ));
            }
            const TRAJECTORY_CAP: usize = 200_000;
            if s.n_trajectories > TRAJECTORY_CAP {
                return Err(CliError::ResourceCap(format!(
                    "{} trajectories exceed the cap {TRAJECTORY_CAP}",
                    s.n_trajectories
                )));
            }
        }
        ScenarioKind::LeakageExperiment => {
            config.spin.params().validate()?;
            let l = &config.leakage;
            if l.n_steps_per_round == 0 || l.shots == 0 {
                return Err(CliError::Validation(format!(
                    "need at least one step and one shot, got {} steps, {} shots",
                    l.n_steps_per_round, l.shots
                )));
            }
            check_round_cap(l.n_steps_per_round, true, "leakage experiment round")?;
            const SHOT_CAP: usize = 10_000_000;
            if l.shots > SHOT_CAP {
                return Err(CliError::ResourceCap(format!(
                    "{} shots exceed the cap {SHOT_CAP}",
                    l.shots
                )));
            }
        }
    }
    Ok(())
}

/// Dry-run report of the `validate` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub label: String,
    pub streaming: bool,
    /// Resolved round grid length, for the series scenarios.
    pub grid_points: Option<usize>,
    pub max_n: Option<usize>,
    /// Rough peak working-set of the evolution state, in MiB.
    pub estimated_memory_mib: f64,
    /// Rough single-thread compute time at a few Gflop/s, in seconds.
    pub estimated_seconds: f64,
    pub notes: Vec<String>,
}

/// Validates a config for a scenario and estimates its resource needs.
pub fn validate(kind: ScenarioKind, config: &ScenarioConfig) -> Result<ValidationReport, CliError> {
    config.check_scenario(kind)?;
    check_limits(kind, config)?;

    let run = &config.run;
    let mut notes = Vec::new();
    let mut grid_points = None;
    let mut max_n = None;
    let (memory_bytes, flops): (f64, f64) = match kind {
        ScenarioKind::ChargeReadout | ScenarioKind::SpinReadout => {
            let d = if kind == ScenarioKind::ChargeReadout { 2.0 } else { 6.0 };
            let d2 = d * d;
            let n = run.max_n as f64;
            let grid = log_round_grid(run.max_n, run.grid_points)?;
            grid_points = Some(grid.len());
            max_n = Some(run.max_n);
            let curves = match kind {
                ScenarioKind::ChargeReadout => config.charge.tunneling_values().len() as f64,
                _ => 1.0,
            };
            if run.streaming {
                // Three tracked preparations, one count vector per count.
                let memory = 3.0 * (n + 1.0) * d2 * 16.0 * 2.0;
                let flops = curves * 0.5 * n * n * 3.0 * 2.0 * 8.0 * d2 * d2;
                (memory, flops)
            } else {
                let memory = (n + 1.0) * d2 * d2 * 16.0 * 2.0;
                let flops = curves * 0.5 * n * n * 2.0 * 8.0 * d2 * d2 * d2;
                (memory, flops)
            }
        }
        ScenarioKind::Sweetspot => {
            let points = (config.sweetspot.n_theta * config.sweetspot.n_phi) as f64;
            (points * 64.0, points * 200.0)
        }
        ScenarioKind::SmeCompare => {
            let s = &config.sme;
            let steps = (s.duration / s.dt).ceil();
            (
                (s.n_samples as f64) * 6.0 * 8.0,
                (s.n_trajectories as f64) * steps * 60.0,
            )
        }
        ScenarioKind::LeakageExperiment => {
            let l = &config.leakage;
            let n = l.n_steps_per_round as f64;
            let d2 = 36.0;
            (
                6.0 * (n + 1.0) * d2 * 16.0 * 2.0,
                0.5 * n * n * 6.0 * 2.0 * 8.0 * d2 * d2 + (l.shots as f64) * n * 8.0,
            )
        }
    };

    if !run.streaming
        && matches!(
            kind,
            ScenarioKind::ChargeReadout | ScenarioKind::SpinReadout
        )
    {
        notes.push(format!(
            "full channel history mode; round counts above {FULL_HISTORY_CAP} \
             need streaming"
        ));
    }
    if let ScenarioKind::SpinReadout = kind {
        if config.spin.delta_z_values.is_some() {
            notes.push("includes a longitudinal-coupling rate sweep".into());
        }
        if config.spin.delta_x_values.is_some() {
            notes.push("includes a transverse-coupling leakage sweep".into());
        }
    }

    Ok(ValidationReport {
        scenario: kind.name().to_string(),
        label: config.label().to_string(),
        streaming: run.streaming,
        grid_points,
        max_n,
        estimated_memory_mib: memory_bytes / (1024.0 * 1024.0),
        estimated_seconds: flops / 5e9,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oversized_full_history_run_hits_the_resource_cap() {
        let mut config = ScenarioConfig::default();
        config.run.streaming = false;
        config.run.max_n = FULL_HISTORY_CAP + 1;
        let err = validate(ScenarioKind::ChargeReadout, &config).unwrap_err();
        match err {
            CliError::ResourceCap(msg) => assert!(msg.contains("streaming")),
            other => panic!("expected a resource cap error, got {other:?}"),
        }
    }

    #[test]
    fn excessive_coupling_reduction_is_a_validation_error() {
        let mut config = ScenarioConfig::default();
        config.charge.delta_gamma = 2.0 * config.charge.gamma;
        let err = validate(ScenarioKind::ChargeReadout, &config).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)), "got {err:?}");
    }

    #[test]
    fn valid_default_config_produces_estimates() {
        let config = ScenarioConfig::default();
        let report = validate(ScenarioKind::ChargeReadout, &config).unwrap();
        assert!(report.estimated_memory_mib > 0.0);
        assert!(report.estimated_seconds > 0.0);
        assert_eq!(report.max_n, Some(2000));
    }

    #[test]
    fn mismatched_scenario_tag_is_rejected() {
        let mut config = ScenarioConfig::default();
        config.scenario = Some(ScenarioKind::SpinReadout);
        let err = validate(ScenarioKind::ChargeReadout, &config).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)));
    }
}
