//! Singlet-triplet spin readout benchmarks: the series of infidelity,
//! mixedness, leakage, and relaxation against integration time, plus optional
//! coupling sweeps (measurement rate against the longitudinal coupling and
//! leakage saturation against the transverse coupling).

use std::path::PathBuf;

use serde::Serialize;

use qmq_core::analytics::{self, RatePrediction};
use qmq_core::engine::{self, UnconditionalEvolver};
use qmq_core::metrics::{self, RateFit};
use qmq_core::models::{
    self, build_spin_total_hamiltonian, spin_basis, spin_system_hamiltonian, SpinQubitParams,
};
use qmq_core::DensityMatrix;

use crate::config::log_round_grid;
use crate::output::{format_float, ArtifactSet, CsvTable};
use crate::CliError;

use super::series::{run_series, SeriesInputs};
use super::RunContext;

/// Serializable mirror of a closed-form rate prediction.
#[derive(Debug, Clone, Serialize)]
struct Prediction {
    value: f64,
    valid: bool,
    note: Option<String>,
}

impl From<RatePrediction> for Prediction {
    fn from(p: RatePrediction) -> Self {
        Self {
            value: p.value,
            valid: p.valid,
            note: p.note,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct RateSweepEntry {
    delta_z: f64,
    delta_tau_ns: f64,
    gamma_m_fit: Option<RateFit>,
    gamma_m_exact: f64,
    gamma_m_leading: f64,
}

#[derive(Debug, Clone, Serialize)]
struct LeakageSweepEntry {
    delta_x: f64,
    gamma_leak_law: Prediction,
    gamma_leak_fit: Option<RateFit>,
    /// Leakage at the last grid point, approaching 1/2 at saturation.
    final_leakage: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SpinRatesReport {
    delta_tau_ns: f64,
    k_critical: f64,
    threshold_count: i64,
    monotone: bool,
    gamma_m_exact: f64,
    gamma_m_leading: f64,
    gamma_d_exact: f64,
    gamma_d_quadratic: f64,
    /// Closed-form leakage rate for the configured transverse coupling.
    gamma_leak_closed_form: Option<Prediction>,
    /// Residual-tunneling escape rates when t is nonzero.
    residual_to_up_down: Option<Prediction>,
    residual_to_down_up: Option<Prediction>,
    gamma_m_fit: Option<RateFit>,
    gamma_leak_fit: Option<RateFit>,
    gamma_rel_fit: Option<RateFit>,
    rate_sweep: Option<Vec<RateSweepEntry>>,
    leakage_sweep: Option<Vec<LeakageSweepEntry>>,
}

fn spin_inputs(params: &SpinQubitParams, delta_tau: f64) -> Result<SeriesInputs, CliError> {
    let h_tot = build_spin_total_hamiltonian(params);
    let step = engine::step_operators(&h_tot, delta_tau)?;
    let h_sys = spin_system_hamiltonian(params);
    let proj_high = metrics::eigenstate_projector(&h_sys, spin_basis::DOWN_DOWN)?;
    let proj_low = metrics::eigenstate_projector(&h_sys, spin_basis::S02)?;
    Ok(SeriesInputs {
        step,
        delta_tau,
        rho_high: DensityMatrix::new(proj_high.clone())
            .map_err(|e| CliError::Compute(e.to_string()))?,
        rho_low: DensityMatrix::new(proj_low.clone())
            .map_err(|e| CliError::Compute(e.to_string()))?,
        proj_high,
        proj_low,
        leak_projector: Some(metrics::spin_leakage_projector()),
    })
}

/// Transverse coupling magnitude seen by the leakage channel.
fn transverse_magnitude(delta: [f64; 3]) -> f64 {
    delta[0].hypot(delta[1])
}

pub fn run(ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let config = ctx.config;
    let run = &config.run;
    let spin = &config.spin;
    let grid = log_round_grid(run.max_n, run.grid_points)?;

    let mut artifacts = ArtifactSet::new(ctx.out_dir(), ctx.label())?;
    let mut worst_drift = 0.0f64;

    // Main benchmark series at the configured operating point.
    let params = spin.params();
    params.validate()?;
    let delta_z = spin.delta[2];
    let delta_tau = models::calibrate_timestep(spin.gamma, spin.delta_gamma, delta_z)?;
    let inputs = spin_inputs(&params, delta_tau)?;
    let result = run_series(&inputs, &grid, run.streaming)?;
    worst_drift = worst_drift.max(result.trace_drift);

    let mut benchmarks = CsvTable::new(&[
        "n_steps",
        "tau_ns",
        "infidelity",
        "mixedness_low",
        "mixedness_high",
        "leakage",
        "population_difference",
    ]);
    let series = &result.series;
    for i in 0..series.len() {
        benchmarks.push_row(vec![
            series.n_steps[i].to_string(),
            format_float(series.integration_times[i]),
            format_float(series.infidelity[i]),
            format_float(series.mixedness_low[i]),
            format_float(series.mixedness_high[i]),
            format_float(series.leakage[i]),
            format_float(series.population_difference[i]),
        ]);
    }
    artifacts.write_csv("benchmarks.csv", &benchmarks)?;

    // Closed-form rates at the operating point.
    let rates = analytics::measurement_rate(spin.delta_gamma, delta_z, delta_tau)?;
    let dp2 = 2.0 * rates.exact * delta_tau / (1.0 + 2.0 * rates.exact * delta_tau);
    let dephasing = analytics::dephasing_rate(dp2.sqrt(), delta_tau)?;
    let delta_x = transverse_magnitude(spin.delta);
    let gamma_leak_closed_form = if delta_x > 0.0 {
        Some(Prediction::from(analytics::leakage_rate(
            delta_x,
            spin.z_right,
            delta_tau,
        )?))
    } else {
        None
    };
    let (residual_up, residual_down) = if params.t != 0.0 {
        let res = analytics::spin_residual_tunneling_rates(
            params.t,
            params.delta_gamma,
            params.epsilon,
            params.u,
            params.z_left,
            params.z_right,
            delta_tau,
        )?;
        (
            Some(Prediction::from(res.to_up_down)),
            Some(Prediction::from(res.to_down_up)),
        )
    } else {
        (None, None)
    };

    let gamma_m_fit =
        metrics::fit_measurement_rate(&series.integration_times, &series.infidelity).ok();
    let gamma_leak_fit =
        metrics::fit_leakage_rate(&series.integration_times, &series.leakage).ok();
    let gamma_rel_fit = metrics::fit_decay_rate_auto_window(
        &series.integration_times,
        &series.population_difference,
    )
    .ok();

    // Optional sweep of the measurement rate against the longitudinal
    // coupling, with the timestep recalibrated at every point.
    let sweep_max = spin.sweep_max_n.unwrap_or(run.max_n);
    let rate_sweep = match &spin.delta_z_values {
        Some(values) => {
            let sweep_grid = log_round_grid(sweep_max, run.grid_points)?;
            let mut entries = Vec::with_capacity(values.len());
            let mut table = CsvTable::new(&[
                "delta_z",
                "delta_tau_ns",
                "gamma_m_fit",
                "gamma_m_exact",
                "gamma_m_leading",
            ]);
            for &dz in values {
                let mut delta = spin.delta;
                delta[2] = dz;
                let sweep_params = spin.params_with_delta(delta);
                sweep_params.validate()?;
                let sweep_tau = models::calibrate_timestep(spin.gamma, spin.delta_gamma, dz)?;
                let sweep_inputs = spin_inputs(&sweep_params, sweep_tau)?;
                let sweep_result = run_series(&sweep_inputs, &sweep_grid, run.streaming)?;
                worst_drift = worst_drift.max(sweep_result.trace_drift);
                let fit = metrics::fit_measurement_rate(
                    &sweep_result.series.integration_times,
                    &sweep_result.series.infidelity,
                )
                .ok();
                let sweep_rates = analytics::measurement_rate(spin.delta_gamma, dz, sweep_tau)?;
                table.push_row(vec![
                    format_float(dz),
                    format_float(sweep_tau),
                    format_float(fit.map_or(f64::NAN, |f| f.rate)),
                    format_float(sweep_rates.exact),
                    format_float(sweep_rates.leading_order),
                ]);
                entries.push(RateSweepEntry {
                    delta_z: dz,
                    delta_tau_ns: sweep_tau,
                    gamma_m_fit: fit,
                    gamma_m_exact: sweep_rates.exact,
                    gamma_m_leading: sweep_rates.leading_order,
                });
            }
            artifacts.write_csv("rate_sweep.csv", &table)?;
            Some(entries)
        }
        None => None,
    };

    // Optional leakage-law sweep against the transverse coupling. Leakage is
    // inference-independent, so the cheap unconditional evolution suffices.
    let leakage_sweep = match &spin.delta_x_values {
        Some(values) => {
            let sweep_grid = log_round_grid(sweep_max, run.grid_points)?;
            let mut entries = Vec::with_capacity(values.len());
            let mut table = CsvTable::new(&[
                "delta_x",
                "n_steps",
                "tau_ns",
                "leakage",
                "predicted",
            ]);
            let leak_projector = metrics::spin_leakage_projector();
            for &dx in values {
                let sweep_params = spin.params_with_delta([dx, 0.0, spin.delta[2]]);
                sweep_params.validate()?;
                let h_tot = build_spin_total_hamiltonian(&sweep_params);
                let step = engine::step_operators(&h_tot, delta_tau)?;
                let h_sys = spin_system_hamiltonian(&sweep_params);
                let proj = metrics::eigenstate_projector(&h_sys, spin_basis::DOWN_DOWN)?;
                let rho0 = DensityMatrix::new(proj)
                    .map_err(|e| CliError::Compute(e.to_string()))?;
                let mut evolver = UnconditionalEvolver::new(&step, &rho0);
                let law = analytics::leakage_rate(dx, spin.z_right, delta_tau)?;
                let mut times = Vec::with_capacity(sweep_grid.len());
                let mut leaks = Vec::with_capacity(sweep_grid.len());
                for &n in &sweep_grid {
                    evolver.advance_to(n);
                    let tau = n as f64 * delta_tau;
                    let leak = metrics::expectation_from_vector(
                        &leak_projector,
                        evolver.state_vector(),
                    )
                    .re;
                    let predicted = 0.5 * (1.0 - (-law.value * tau).exp());
                    table.push_row(vec![
                        format_float(dx),
                        n.to_string(),
                        format_float(tau),
                        format_float(leak),
                        format_float(predicted),
                    ]);
                    times.push(tau);
                    leaks.push(leak);
                }
                let fit = metrics::fit_leakage_rate(&times, &leaks).ok();
                entries.push(LeakageSweepEntry {
                    delta_x: dx,
                    gamma_leak_law: Prediction::from(law),
                    gamma_leak_fit: fit,
                    final_leakage: *leaks.last().unwrap_or(&0.0),
                });
            }
            artifacts.write_csv("leakage_law.csv", &table)?;
            Some(entries)
        }
        None => None,
    };

    let report = SpinRatesReport {
        delta_tau_ns: delta_tau,
        k_critical: result.k_critical,
        threshold_count: result.threshold_count,
        monotone: result.monotone,
        gamma_m_exact: rates.exact,
        gamma_m_leading: rates.leading_order,
        gamma_d_exact: dephasing.exact,
        gamma_d_quadratic: dephasing.quadratic,
        gamma_leak_closed_form,
        residual_to_up_down: residual_up,
        residual_to_down_up: residual_down,
        gamma_m_fit,
        gamma_leak_fit,
        gamma_rel_fit,
        rate_sweep,
        leakage_sweep,
    };
    artifacts.write_json("rates.json", &report)?;
    artifacts.record("max_trace_drift", worst_drift);
    artifacts.finish("spin-readout", config)
}
