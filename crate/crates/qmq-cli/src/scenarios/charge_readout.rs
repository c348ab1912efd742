//! Charge-qubit readout benchmarks: infidelity, mixedness, and relaxation
//! against integration time, one curve per residual tunneling value, plus a
//! JSON report comparing fitted and closed-form rates.

use std::path::PathBuf;

use serde::Serialize;

use qmq_core::analytics;
use qmq_core::engine;
use qmq_core::metrics::{self, RateFit};
use qmq_core::models::{
    self, build_charge_total_hamiltonian, charge_basis, charge_system_hamiltonian,
};
use qmq_core::DensityMatrix;

use crate::config::log_round_grid;
use crate::output::{format_float, ArtifactSet, CsvTable};
use crate::CliError;

use super::series::{run_series, SeriesInputs};
use super::RunContext;

/// Rate bundle reported for one tunneling value.
#[derive(Debug, Clone, Serialize)]
struct CurveReport {
    t: f64,
    delta_tau_ns: f64,
    k_critical: f64,
    threshold_count: i64,
    monotone: bool,
    /// Closed-form measurement rate, exact and leading-order, 1/ns.
    gamma_m_exact: f64,
    gamma_m_leading: f64,
    /// Closed-form coherence decay rates, 1/ns.
    gamma_d_exact: f64,
    gamma_d_quadratic: f64,
    /// Closed-form relaxation rate with its validity flag.
    gamma_rel_closed_form: f64,
    gamma_rel_valid: bool,
    gamma_rel_note: Option<String>,
    /// Rates fitted from the numeric series.
    gamma_m_fit: Option<RateFit>,
    gamma_rel_fit: Option<RateFit>,
    /// Ideal integration time in ns, when relaxation makes one exist.
    ideal_time_closed_form: Option<f64>,
    ideal_time_refined: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct RatesReport {
    /// Mean sensor current and its readout contrast, in nA.
    mean_current_na: f64,
    contrast_current_na: f64,
    curves: Vec<CurveReport>,
}

pub fn run(ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let config = ctx.config;
    let run = &config.run;
    let charge = &config.charge;
    let grid = log_round_grid(run.max_n, run.grid_points)?;

    let mut artifacts = ArtifactSet::new(ctx.out_dir(), ctx.label())?;
    let mut infidelity = CsvTable::new(&["t", "n_steps", "tau_ns", "infidelity"]);
    let mut mixedness = CsvTable::new(&[
        "t",
        "n_steps",
        "tau_ns",
        "mixedness_low",
        "mixedness_high",
    ]);
    let mut relaxation = CsvTable::new(&["t", "n_steps", "tau_ns", "population_difference"]);
    let mut curves = Vec::new();
    let mut worst_drift = 0.0f64;

    let delta_tau = models::calibrate_timestep(charge.gamma, charge.delta_gamma, 0.0)?;
    let (mean_current, contrast_current) =
        models::model_currents(delta_tau, charge.gamma, charge.delta_gamma);

    for t in charge.tunneling_values() {
        let params = charge.params_with_t(t);
        params.validate()?;
        let h_tot = build_charge_total_hamiltonian(&params);
        let step = engine::step_operators(&h_tot, delta_tau)?;
        let h_sys = charge_system_hamiltonian(&params);
        let proj_high = metrics::eigenstate_projector(&h_sys, charge_basis::LEFT)?;
        let proj_low = metrics::eigenstate_projector(&h_sys, charge_basis::RIGHT)?;
        let inputs = SeriesInputs {
            step,
            delta_tau,
            rho_high: DensityMatrix::new(proj_high.clone())
                .map_err(|e| CliError::Compute(e.to_string()))?,
            rho_low: DensityMatrix::new(proj_low.clone())
                .map_err(|e| CliError::Compute(e.to_string()))?,
            proj_high,
            proj_low,
            leak_projector: None,
        };
        let result = run_series(&inputs, &grid, run.streaming)?;
        worst_drift = worst_drift.max(result.trace_drift);

        let series = &result.series;
        for i in 0..series.len() {
            let prefix = vec![
                format_float(t),
                series.n_steps[i].to_string(),
                format_float(series.integration_times[i]),
            ];
            let mut row = prefix.clone();
            row.push(format_float(series.infidelity[i]));
            infidelity.push_row(row);

            let mut row = prefix.clone();
            row.push(format_float(series.mixedness_low[i]));
            row.push(format_float(series.mixedness_high[i]));
            mixedness.push_row(row);

            let mut row = prefix;
            row.push(format_float(series.population_difference[i]));
            relaxation.push_row(row);
        }

        curves.push(curve_report(&params, delta_tau, &result)?);
    }

    let report = RatesReport {
        mean_current_na: mean_current * 1e9,
        contrast_current_na: contrast_current * 1e9,
        curves,
    };

    artifacts.write_csv("infidelity.csv", &infidelity)?;
    artifacts.write_csv("mixedness.csv", &mixedness)?;
    artifacts.write_csv("relaxation.csv", &relaxation)?;
    artifacts.write_json("rates.json", &report)?;
    artifacts.record("max_trace_drift", worst_drift);
    artifacts.finish("charge-readout", config)
}

fn curve_report(
    params: &qmq_core::ChargeQubitParams,
    delta_tau: f64,
    result: &super::series::SeriesResult,
) -> Result<CurveReport, CliError> {
    let rates = analytics::measurement_rate(params.delta_gamma, 0.0, delta_tau)?;
    // Invert the exact rate for the per-sample transmission contrast.
    let dp2 = 2.0 * rates.exact * delta_tau / (1.0 + 2.0 * rates.exact * delta_tau);
    let dephasing = analytics::dephasing_rate(dp2.sqrt(), delta_tau)?;
    let relaxation =
        analytics::relaxation_rate_charge(params.t, params.delta_gamma, params.epsilon, delta_tau)?;

    let series = &result.series;
    let gamma_m_fit =
        metrics::fit_measurement_rate(&series.integration_times, &series.infidelity).ok();
    let gamma_rel_fit = metrics::fit_decay_rate_auto_window(
        &series.integration_times,
        &series.population_difference,
    )
    .ok();

    let ideal = analytics::ideal_integration_time(rates.exact, relaxation.value).ok();

    Ok(CurveReport {
        t: params.t,
        delta_tau_ns: delta_tau,
        k_critical: result.k_critical,
        threshold_count: result.threshold_count,
        monotone: result.monotone,
        gamma_m_exact: rates.exact,
        gamma_m_leading: rates.leading_order,
        gamma_d_exact: dephasing.exact,
        gamma_d_quadratic: dephasing.quadratic,
        gamma_rel_closed_form: relaxation.value,
        gamma_rel_valid: relaxation.valid,
        gamma_rel_note: relaxation.note.clone(),
        gamma_m_fit,
        gamma_rel_fit,
        ideal_time_closed_form: ideal.map(|i| i.closed_form),
        ideal_time_refined: ideal.map(|i| i.refined),
    })
}
