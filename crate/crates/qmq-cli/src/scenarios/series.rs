//! Shared benchmark-series evaluation used by the charge and spin scenarios.
//!
//! Both readout scenarios tabulate the same quantities against integration
//! time: assignment infidelity, mixedness of the conditional post-measurement
//! states for a mixed computational preparation, leakage (when the model has
//! leakage states), and the energy-eigenbasis population difference whose
//! decay gives the relaxation rate.
//!
//! Two evaluation paths produce the same numbers. The full path keeps every
//! count-resolved channel matrix of the current round, the streaming path
//! propagates count-resolved state vectors for the three preparations of
//! interest. The streaming path scales to much larger round counts.

use num_complex::Complex64;

use qmq_core::engine::{
    self, ChannelEvolver, CountVectorEvolver, InferenceRule, StepOperators,
};
use qmq_core::linalg::{unvectorize, vectorize};
use qmq_core::metrics::{self, BenchmarkSeries};
use qmq_core::{ComplexMatrix, DensityMatrix};

use crate::CliError;

/// Largest round count the full-history path accepts before requiring
/// streaming; keeps the stored channel set in the tens of megabytes.
pub const FULL_HISTORY_CAP: usize = 4096;

/// Largest round count of the streaming path, matching the engine's own
/// recursion cap.
pub const STREAMING_CAP: usize = engine::DEFAULT_ROUND_CAP;

/// Preparations and observables of one benchmark series.
pub struct SeriesInputs {
    pub step: StepOperators,
    pub delta_tau: f64,
    /// Preparation read out as high transmission.
    pub rho_high: DensityMatrix,
    /// Preparation read out as low transmission.
    pub rho_low: DensityMatrix,
    /// Projector on the energy eigenstate behind `rho_high`.
    pub proj_high: ComplexMatrix,
    /// Projector on the energy eigenstate behind `rho_low`.
    pub proj_low: ComplexMatrix,
    /// Projector on the leakage states, when the model has any.
    pub leak_projector: Option<ComplexMatrix>,
}

/// Benchmark series plus the inference diagnostics of the last grid point.
pub struct SeriesResult {
    pub series: BenchmarkSeries,
    /// Critical transmission ratio of the final inference rule.
    pub k_critical: f64,
    /// Count threshold of the final inference rule.
    pub threshold_count: i64,
    /// Whether the final likelihood ratio was monotone in the count.
    pub monotone: bool,
    /// Largest deviation of any outcome distribution from unit mass.
    pub trace_drift: f64,
}

/// Evaluates the benchmark series on an ascending round grid.
pub fn run_series(
    inputs: &SeriesInputs,
    grid: &[usize],
    streaming: bool,
) -> Result<SeriesResult, CliError> {
    assert!(
        grid.windows(2).all(|w| w[0] < w[1]),
        "round grid must be strictly increasing"
    );
    let result = if streaming {
        run_streaming(inputs, grid)?
    } else {
        run_full(inputs, grid)?
    };
    result
        .series
        .validate(1e-9)
        .map_err(|e| CliError::Compute(format!("benchmark series failed validation: {e}")))?;
    Ok(result)
}

fn mixed_preparation_vector(inputs: &SeriesInputs) -> Vec<Complex64> {
    let high = vectorize(inputs.rho_high.mat());
    let low = vectorize(inputs.rho_low.mat());
    high.iter()
        .zip(&low)
        .map(|(h, l)| 0.5 * (h + l))
        .collect()
}

/// Mixedness `1 - tr(rho^2)` of an unnormalized aggregated state vector.
fn mixedness_from_aggregate(agg: &[Complex64]) -> f64 {
    let d = (agg.len() as f64).sqrt().round() as usize;
    let mut trace = 0.0f64;
    for i in 0..d {
        trace += agg[i * d + i].re;
    }
    if trace.abs() < 1e-300 {
        return 0.0;
    }
    // tr(M^2) = sum |M_ab|^2 for Hermitian M.
    let frob2: f64 = agg.iter().map(|z| z.norm_sqr()).sum();
    1.0 - frob2 / (trace * trace)
}

fn accumulate(vectors: &[Vec<Complex64>]) -> Vec<Complex64> {
    let mut total = vec![Complex64::ZERO; vectors[0].len()];
    for v in vectors {
        for (t, x) in total.iter_mut().zip(v) {
            *t += x;
        }
    }
    total
}

fn run_streaming(inputs: &SeriesInputs, grid: &[usize]) -> Result<SeriesResult, CliError> {
    let initial = vec![
        vectorize(inputs.rho_high.mat()),
        vectorize(inputs.rho_low.mat()),
        mixed_preparation_vector(inputs),
    ];
    let mut evolver = CountVectorEvolver::forward(&inputs.step, initial);
    let mut collector = Collector::new(inputs, grid.len());
    for &n in grid {
        evolver.advance_to(n)?;
        let p_high = evolver.distribution(0);
        let p_low = evolver.distribution(1);
        let rule = engine::critical_ratio(&p_high, &p_low);
        let (agg_low, agg_high) = evolver.aggregate(2, &rule);
        let unconditional = accumulate(evolver.vectors(0));
        collector.push(
            n,
            &p_high,
            &p_low,
            &rule,
            mixedness_from_aggregate(&agg_low),
            mixedness_from_aggregate(&agg_high),
            &unconditional,
        );
    }
    Ok(collector.finish())
}

fn run_full(inputs: &SeriesInputs, grid: &[usize]) -> Result<SeriesResult, CliError> {
    let rho_mix = DensityMatrix::new(
        unvectorize(&mixed_preparation_vector(inputs))
            .map_err(|e| CliError::Compute(e.to_string()))?,
    )
    .map_err(|e| CliError::Compute(format!("mixed preparation is not a state: {e}")))?;
    let mut evolver = ChannelEvolver::with_cap(&inputs.step, FULL_HISTORY_CAP);
    let mut collector = Collector::new(inputs, grid.len());
    let v_high = vectorize(inputs.rho_high.mat());
    for &n in grid {
        evolver.advance_to(n)?;
        let channels = evolver.current();
        let p_high = channels.distribution(&inputs.rho_high);
        let p_low = channels.distribution(&inputs.rho_low);
        let rule = engine::critical_ratio(&p_high, &p_low);
        let (op_low, op_high) = engine::aggregate_operations(channels, &rule);
        let mixedness_low = metrics::mixedness(&op_low, &rho_mix)?;
        let mixedness_high = metrics::mixedness(&op_high, &rho_mix)?;
        let mut unconditional = op_low.matvec(&v_high);
        for (u, h) in unconditional.iter_mut().zip(op_high.matvec(&v_high)) {
            *u += h;
        }
        collector.push(
            n,
            &p_high,
            &p_low,
            &rule,
            mixedness_low,
            mixedness_high,
            &unconditional,
        );
    }
    Ok(collector.finish())
}

/// Accumulates per-grid-point benchmark values in grid order.
struct Collector<'a> {
    inputs: &'a SeriesInputs,
    series: BenchmarkSeries,
    k_critical: f64,
    threshold_count: i64,
    monotone: bool,
    trace_drift: f64,
}

impl<'a> Collector<'a> {
    fn new(inputs: &'a SeriesInputs, capacity: usize) -> Self {
        let series = BenchmarkSeries {
            integration_times: Vec::with_capacity(capacity),
            n_steps: Vec::with_capacity(capacity),
            infidelity: Vec::with_capacity(capacity),
            mixedness_low: Vec::with_capacity(capacity),
            mixedness_high: Vec::with_capacity(capacity),
            leakage: Vec::with_capacity(capacity),
            population_difference: Vec::with_capacity(capacity),
        };
        Self {
            inputs,
            series,
            k_critical: f64::NAN,
            threshold_count: 0,
            monotone: true,
            trace_drift: 0.0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        n: usize,
        p_high: &[f64],
        p_low: &[f64],
        rule: &InferenceRule,
        mixedness_low: f64,
        mixedness_high: f64,
        unconditional_high: &[Complex64],
    ) {
        let drift_high = (p_high.iter().sum::<f64>() - 1.0).abs();
        let drift_low = (p_low.iter().sum::<f64>() - 1.0).abs();
        self.trace_drift = self.trace_drift.max(drift_high).max(drift_low);

        self.series.integration_times.push(n as f64 * self.inputs.delta_tau);
        self.series.n_steps.push(n);
        self.series
            .infidelity
            .push(metrics::infidelity_from_distributions(p_high, p_low, rule));
        self.series.mixedness_low.push(mixedness_low);
        self.series.mixedness_high.push(mixedness_high);
        let leak = self.inputs.leak_projector.as_ref().map_or(0.0, |p| {
            metrics::expectation_from_vector(p, unconditional_high).re
        });
        self.series.leakage.push(leak);
        self.series.population_difference.push(metrics::population_difference(
            &self.inputs.proj_high,
            &self.inputs.proj_low,
            unconditional_high,
        ));

        self.k_critical = rule.k_critical;
        self.threshold_count = rule.threshold_count;
        self.monotone = rule.monotone;
    }

    fn finish(self) -> SeriesResult {
        SeriesResult {
            series: self.series,
            k_critical: self.k_critical,
            threshold_count: self.threshold_count,
            monotone: self.monotone,
            trace_drift: self.trace_drift,
        }
    }
}
