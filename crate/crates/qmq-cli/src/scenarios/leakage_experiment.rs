//! Two-round leakage-detection experiment: simulates the interleaved readout
//! sequence shot by shot and reports the outcome-pair frequencies together
//! with the error budget recovered from them.

use std::path::PathBuf;

use serde::Serialize;

use qmq_core::protocols::{self, ProtocolError};

use crate::output::ArtifactSet;
use crate::CliError;

use super::RunContext;

#[derive(Debug, Clone, Serialize)]
struct BudgetOut {
    leakage: f64,
    eps_up: f64,
    eps_down: f64,
    q1: f64,
    q2: f64,
    /// Probabilities clipped to zero during inversion, by name.
    clipped: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct ExperimentReport {
    n_steps_per_round: usize,
    round_duration_ns: f64,
    shots: usize,
    /// Sampled frequencies of the outcome pairs.
    p00: f64,
    p01: f64,
    p10: f64,
    p11: f64,
    /// Exact probabilities of the simulated composition, same order.
    exact: [f64; 4],
    /// Population outside the readout subspace after the first round.
    true_leakage: f64,
    /// Error budget inverted from the sampled frequencies; its leakage
    /// estimate is `p01 - p10`.
    estimated_budget: BudgetOut,
    /// Initialization-error weights injected into the preparation.
    injected_q1: f64,
    injected_q2: f64,
    /// Set when the shot count is too small for stable frequencies.
    statistics_warning: Option<String>,
}

fn map_protocol_error(e: ProtocolError) -> CliError {
    match e {
        ProtocolError::InvalidProbability { .. } | ProtocolError::DegenerateRun(_) => {
            CliError::Validation(e.to_string())
        }
        other => CliError::Compute(other.to_string()),
    }
}

pub fn run(ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let config = ctx.config;
    let section = &config.leakage;
    let params = config.spin.params();

    let result = protocols::simulate_leakage_experiment_with_errors(
        &params,
        section.n_steps_per_round,
        section.shots,
        config.run.seed,
        section.q1,
        section.q2,
    )
    .map_err(map_protocol_error)?;

    let estimate = result.estimated_budget();
    let report = ExperimentReport {
        n_steps_per_round: result.n_steps,
        round_duration_ns: result.round_duration,
        shots: result.shots,
        p00: result.frequencies[0],
        p01: result.frequencies[1],
        p10: result.frequencies[2],
        p11: result.frequencies[3],
        exact: result.exact,
        true_leakage: result.true_leakage,
        estimated_budget: BudgetOut {
            leakage: estimate.budget.leakage,
            eps_up: estimate.budget.eps_up,
            eps_down: estimate.budget.eps_down,
            q1: estimate.budget.q1,
            q2: estimate.budget.q2,
            clipped: estimate.clipped.iter().map(|s| s.to_string()).collect(),
        },
        injected_q1: section.q1,
        injected_q2: section.q2,
        statistics_warning: result.statistics_warning.clone(),
    };

    let mut artifacts = ArtifactSet::new(ctx.out_dir(), ctx.label())?;
    artifacts.write_json("leakage_report.json", &report)?;
    artifacts.record("true_leakage", result.true_leakage);
    artifacts.record(
        "leakage_estimate_error",
        (report.estimated_budget.leakage - result.true_leakage).abs(),
    );
    artifacts.finish("leakage-experiment", config)
}
