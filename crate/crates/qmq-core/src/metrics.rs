//! Readout benchmarks computed from measurement operations.
//!
//! The quantities here quantify how well the sampled meter record identifies
//! the system state: assignment infidelity, conditional-state mixedness,
//! leakage out of the readout subspace, and exponential/error-function rate
//! fits of benchmark series. Everything operates on the vectorized channels
//! produced by [`crate::engine`] and stays agnostic of which qubit flavor
//! generated them.

use num_complex::Complex64;
use thiserror::Error;

use crate::analytics::normal_cdf;
use crate::engine::{InferenceRule, Outcome};
use crate::linalg::{unvectorize, vectorize, vectorized_trace, ComplexMatrix, DensityMatrix, LinalgError};
use crate::models::spin_basis;
use crate::tol::{PROJECTOR_TOL, VANISHING_PROBABILITY_TOL};

/// Errors from benchmark evaluation and rate fitting.
#[derive(Debug, Error)]
pub enum MetricsError {
    /// Conditioning on an outcome whose probability is numerically zero.
    #[error("outcome probability {0} is too small to condition on")]
    VanishingOutcomeProbability(f64),
    /// Channel and state dimensions disagree.
    #[error("operator acts on dimension {operator} but the state has dimension {state}")]
    DimensionMismatch { operator: usize, state: usize },
    /// The supplied leak projector is not an orthogonal projector.
    #[error("leak projector is not idempotent Hermitian (deviation {0:.2e})")]
    NotAProjector(f64),
    /// Fit input arrays disagree in length.
    #[error("fit inputs have mismatched lengths {times} and {values}")]
    MismatchedLengths { times: usize, values: usize },
    /// Too few samples for a meaningful fit.
    #[error("fit needs at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    /// Log-linearized fits need strictly positive data.
    #[error("fit value {value} at index {index} is not positive")]
    NonPositiveValue { index: usize, value: f64 },
    /// Fit values outside the range the model can produce.
    #[error("fit value {value} at index {index} is outside ({lo}, {hi}]")]
    ValueOutOfRange {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    /// A conditional state failed density-matrix validation.
    #[error("conditional state is not a valid density matrix: {0}")]
    InvalidConditionalState(#[from] LinalgError),
}

/// The two computational basis states a readout discriminates, identified by
/// their transmission branch.
///
/// For the charge qubit the high-transmission state is the excited (left-dot)
/// state; for the spin qubit it is the blockaded down-down triplet, whose
/// meter coupling is not reduced by the interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComputationalPair {
    /// Basis index of the high-transmission state.
    pub high_state: usize,
    /// Basis index of the low-transmission state.
    pub low_state: usize,
    /// Dimension of the system space the indices refer to.
    pub dim: usize,
}

impl ComputationalPair {
    /// Charge qubit: excited/left vs ground/right dot states.
    pub fn charge() -> Self {
        Self {
            high_state: crate::models::charge_basis::LEFT,
            low_state: crate::models::charge_basis::RIGHT,
            dim: 2,
        }
    }

    /// Spin qubit: blockaded down-down triplet vs the measured (0,2) singlet.
    pub fn spin() -> Self {
        Self {
            high_state: spin_basis::DOWN_DOWN,
            low_state: spin_basis::S02,
            dim: spin_basis::DIM,
        }
    }
}

/// Expectation value Tr(op * rho) evaluated directly on a vectorized state.
pub fn expectation_from_vector(op: &ComplexMatrix, rho_vec: &[Complex64]) -> Complex64 {
    let d = op.rows();
    debug_assert_eq!(rho_vec.len(), d * d);
    let mut sum = Complex64::ZERO;
    for a in 0..d {
        for b in 0..d {
            // vec(rho)[a*d + b] holds rho[b][a], so this contracts to
            // sum_{a,b} op[a][b] rho[b][a].
            sum += op[(a, b)] * rho_vec[a * d + b];
        }
    }
    sum
}

/// Assignment infidelity of a pair of outcome-resolved measurement
/// operations.
///
/// `upsilon_high` and `upsilon_low` are the aggregated (inference-resolved)
/// transfer matrices for the two reported outcomes. The infidelity is
/// 1 - (P(high | prepared high) + P(low | prepared low)) / 2, evaluated on
/// the pure computational preparations of `pair`.
pub fn infidelity(
    upsilon_high: &ComplexMatrix,
    upsilon_low: &ComplexMatrix,
    pair: &ComputationalPair,
) -> f64 {
    let p_hh = outcome_probability(upsilon_high, pair.dim, pair.high_state);
    let p_ll = outcome_probability(upsilon_low, pair.dim, pair.low_state);
    1.0 - 0.5 * (p_hh + p_ll)
}

fn outcome_probability(upsilon: &ComplexMatrix, dim: usize, basis_state: usize) -> f64 {
    let rho = DensityMatrix::basis_state(dim, basis_state);
    let out = upsilon.matvec(&vectorize(rho.mat()));
    vectorized_trace(&out).re
}

/// Assignment error probabilities `(miss_high, miss_low)` of a threshold
/// rule: the chance of reporting low for the high preparation and vice
/// versa, computed from the two count distributions.
pub fn assignment_errors(p_high: &[f64], p_low: &[f64], rule: &InferenceRule) -> (f64, f64) {
    let mut miss_high = 0.0;
    let mut miss_low = 0.0;
    for (count, (&ph, &pl)) in p_high.iter().zip(p_low).enumerate() {
        match rule.assign(count) {
            Outcome::LowTransmission => miss_high += ph,
            Outcome::HighTransmission => miss_low += pl,
        }
    }
    (miss_high, miss_low)
}

/// Assignment infidelity straight from the two count distributions, without
/// materializing aggregated channels. Equals [`infidelity`] on the channels
/// aggregated with the same rule.
pub fn infidelity_from_distributions(
    p_high: &[f64],
    p_low: &[f64],
    rule: &InferenceRule,
) -> f64 {
    let (miss_high, miss_low) = assignment_errors(p_high, p_low, rule);
    0.5 * (miss_high + miss_low)
}

/// Normalized conditional state after observing a particular outcome.
///
/// Applies the outcome's transfer matrix to `rho_pre` and renormalizes.
/// Fails when the outcome probability is below
/// [`VANISHING_PROBABILITY_TOL`], where conditioning is undefined.
pub fn post_measurement_state(
    upsilon_r: &ComplexMatrix,
    rho_pre: &DensityMatrix,
) -> Result<DensityMatrix, MetricsError> {
    let d = rho_pre.dim();
    if upsilon_r.rows() != d * d {
        return Err(MetricsError::DimensionMismatch {
            operator: upsilon_r.rows(),
            state: d * d,
        });
    }
    let out = upsilon_r.matvec(&vectorize(rho_pre.mat()));
    let probability = vectorized_trace(&out).re;
    if probability <= VANISHING_PROBABILITY_TOL {
        return Err(MetricsError::VanishingOutcomeProbability(probability));
    }
    let scale = Complex64::new(1.0 / probability, 0.0);
    let normalized: Vec<Complex64> = out.iter().map(|z| z * scale).collect();
    let mat = unvectorize(&normalized)?;
    Ok(DensityMatrix::new(mat)?)
}

/// Mixedness 1 - Tr(rho_post^2) of the conditional state after outcome `r`.
pub fn mixedness(
    upsilon_r: &ComplexMatrix,
    rho_pre: &DensityMatrix,
) -> Result<f64, MetricsError> {
    let post = post_measurement_state(upsilon_r, rho_pre)?;
    Ok(1.0 - post.purity())
}

/// Population left outside the readout subspace after the (unconditional)
/// measurement: Tr(P_leak (M_low + M_high)[rho_pre]).
///
/// Only the sum of the two outcome channels enters, so the value does not
/// depend on the inference rule used to split them.
pub fn leakage(
    upsilon_low: &ComplexMatrix,
    upsilon_high: &ComplexMatrix,
    rho_pre: &DensityMatrix,
    leak_projector: &ComplexMatrix,
) -> Result<f64, MetricsError> {
    validate_projector(leak_projector)?;
    let d = rho_pre.dim();
    if upsilon_low.rows() != d * d || leak_projector.rows() != d {
        return Err(MetricsError::DimensionMismatch {
            operator: upsilon_low.rows(),
            state: d * d,
        });
    }
    let vec_pre = vectorize(rho_pre.mat());
    let mut out = upsilon_low.matvec(&vec_pre);
    let high = upsilon_high.matvec(&vec_pre);
    for (o, h) in out.iter_mut().zip(&high) {
        *o += h;
    }
    Ok(expectation_from_vector(leak_projector, &out).re)
}

fn validate_projector(p: &ComplexMatrix) -> Result<(), MetricsError> {
    let hermiticity = p.hermiticity_deviation();
    let idempotency = p.matmul(p).max_abs_diff(p);
    let deviation = hermiticity.max(idempotency);
    if deviation > PROJECTOR_TOL {
        return Err(MetricsError::NotAProjector(deviation));
    }
    Ok(())
}

/// Projector onto the states outside the spin readout subspace, i.e. onto
/// everything but the measured (0,2) singlet and the blockaded down-down
/// triplet.
pub fn spin_leakage_projector() -> ComplexMatrix {
    let mut p = ComplexMatrix::identity(spin_basis::DIM);
    p[(spin_basis::S02, spin_basis::S02)] = Complex64::ZERO;
    p[(spin_basis::DOWN_DOWN, spin_basis::DOWN_DOWN)] = Complex64::ZERO;
    p
}

/// Projector onto the eigenstate of `h_sys` with the largest overlap with
/// the given basis state.
///
/// Used to follow states adiabatically connected to a computational basis
/// state once finite tunneling hybridizes them, e.g. the excited charge
/// state at t > 0 or the measured singlet branch of the spin system.
pub fn eigenstate_projector(
    h_sys: &ComplexMatrix,
    basis_index: usize,
) -> Result<ComplexMatrix, MetricsError> {
    let (_, vectors) = h_sys.hermitian_eigen()?;
    let d = h_sys.rows();
    let mut best_col = 0;
    let mut best_overlap = -1.0;
    for j in 0..d {
        let overlap = vectors[(basis_index, j)].norm_sqr();
        if overlap > best_overlap {
            best_overlap = overlap;
            best_col = j;
        }
    }
    Ok(ComplexMatrix::from_fn(d, d, |a, b| {
        vectors[(a, best_col)] * vectors[(b, best_col)].conj()
    }))
}

/// Difference of the populations in two projectors, evaluated on a
/// vectorized state. With eigenstate projectors this is the
/// excited-minus-ground population difference whose decay gives the
/// relaxation rate.
pub fn population_difference(
    projector_high: &ComplexMatrix,
    projector_low: &ComplexMatrix,
    rho_vec: &[Complex64],
) -> f64 {
    expectation_from_vector(projector_high, rho_vec).re
        - expectation_from_vector(projector_low, rho_vec).re
}

/// One fitted rate with its goodness-of-fit information.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateFit {
    /// Fitted rate in 1/ns.
    pub rate: f64,
    /// Root-mean-square residual of the fit in its working coordinates.
    pub residual_rms: f64,
    /// Number of samples inside the fit window.
    pub n_used: usize,
    /// Time window (ns) the fit was evaluated on.
    pub window: (f64, f64),
}

/// The three benchmark rates extracted from a series, where applicable.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FittedRates {
    /// Measurement rate from the infidelity decay.
    pub gamma_m: Option<RateFit>,
    /// Relaxation rate from the population-difference decay.
    pub gamma_rel: Option<RateFit>,
    /// Leakage rate from the leakage saturation curve.
    pub gamma_leak: Option<RateFit>,
}

impl FittedRates {
    /// All present rates are nonnegative.
    pub fn is_physical(&self) -> bool {
        [self.gamma_m, self.gamma_rel, self.gamma_leak]
            .iter()
            .flatten()
            .all(|fit| fit.rate >= 0.0)
    }
}

/// Benchmark quantities tabulated against integration time.
///
/// All arrays share their length; entries at the same index belong to the
/// same number of measurement repetitions.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BenchmarkSeries {
    /// Integration times N * dtau in ns.
    pub integration_times: Vec<f64>,
    /// Repetition counts the rows were evaluated at.
    pub n_steps: Vec<usize>,
    /// Assignment infidelity per row.
    pub infidelity: Vec<f64>,
    /// Mixedness of the conditional state reported as low transmission.
    pub mixedness_low: Vec<f64>,
    /// Mixedness of the conditional state reported as high transmission.
    pub mixedness_high: Vec<f64>,
    /// Population outside the readout subspace (zero-filled when the model
    /// has no leakage states).
    pub leakage: Vec<f64>,
    /// Energy-eigenbasis population difference used for relaxation fits.
    pub population_difference: Vec<f64>,
}

impl BenchmarkSeries {
    pub fn len(&self) -> usize {
        self.integration_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.integration_times.is_empty()
    }

    /// Checks the structural invariants: equal lengths and benchmark values
    /// inside [0, 1] (population differences inside [-1, 1]) within `slack`.
    pub fn validate(&self, slack: f64) -> Result<(), String> {
        let n = self.len();
        let lengths = [
            self.n_steps.len(),
            self.infidelity.len(),
            self.mixedness_low.len(),
            self.mixedness_high.len(),
            self.leakage.len(),
            self.population_difference.len(),
        ];
        if lengths.iter().any(|&l| l != n) {
            return Err(format!("array lengths {lengths:?} do not all equal {n}"));
        }
        let in_unit = |name: &str, values: &[f64]| -> Result<(), String> {
            for (i, &v) in values.iter().enumerate() {
                if !(-slack..=1.0 + slack).contains(&v) {
                    return Err(format!("{name}[{i}] = {v} is outside [0, 1]"));
                }
            }
            Ok(())
        };
        in_unit("infidelity", &self.infidelity)?;
        in_unit("mixedness_low", &self.mixedness_low)?;
        in_unit("mixedness_high", &self.mixedness_high)?;
        in_unit("leakage", &self.leakage)?;
        for (i, &v) in self.population_difference.iter().enumerate() {
            if !(-1.0 - slack..=1.0 + slack).contains(&v) {
                return Err(format!(
                    "population_difference[{i}] = {v} is outside [-1, 1]"
                ));
            }
        }
        Ok(())
    }
}

/// Minimum number of samples any fit requires.
const MIN_FIT_SAMPLES: usize = 5;

/// Least-squares fit of `values ~ A exp(-rate * times)` by log-linearization.
///
/// Requires at least five samples and strictly positive values. A constant
/// series fits rate zero exactly.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Result<RateFit, MetricsError> {
    if times.len() != values.len() {
        return Err(MetricsError::MismatchedLengths {
            times: times.len(),
            values: values.len(),
        });
    }
    if times.len() < MIN_FIT_SAMPLES {
        return Err(MetricsError::TooFewSamples {
            got: times.len(),
            need: MIN_FIT_SAMPLES,
        });
    }
    for (index, &value) in values.iter().enumerate() {
        if value <= 0.0 {
            return Err(MetricsError::NonPositiveValue { index, value });
        }
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = times.len() as f64;
    let mean_t = times.iter().sum::<f64>() / n;
    let mean_y = logs.iter().sum::<f64>() / n;
    let mut cov_ty = 0.0;
    let mut var_t = 0.0;
    for (&t, &y) in times.iter().zip(&logs) {
        cov_ty += (t - mean_t) * (y - mean_y);
        var_t += (t - mean_t) * (t - mean_t);
    }
    if var_t == 0.0 {
        return Err(MetricsError::TooFewSamples {
            got: 1,
            need: MIN_FIT_SAMPLES,
        });
    }
    let slope = cov_ty / var_t;
    let intercept = mean_y - slope * mean_t;
    let mut residual_sq = 0.0;
    for (&t, &y) in times.iter().zip(&logs) {
        let r = y - (intercept + slope * t);
        residual_sq += r * r;
    }
    Ok(RateFit {
        rate: -slope,
        residual_rms: (residual_sq / n).sqrt(),
        n_used: times.len(),
        window: (times[0], times[times.len() - 1]),
    })
}

/// Exponential fit restricted to the window `tau in [0.2/rate, 2/rate]`,
/// with the rate estimated iteratively.
///
/// The window clips both the startup transient and the saturated tail, which
/// is where the exponential rate laws hold. Iteration stops once the window
/// is stable; if the window would contain fewer than five samples the fit
/// falls back to the full series.
pub fn fit_decay_rate_auto_window(
    times: &[f64],
    values: &[f64],
) -> Result<RateFit, MetricsError> {
    let mut fit = fit_decay_rate(times, values)?;
    if fit.rate <= 0.0 {
        return Ok(fit);
    }
    for _ in 0..20 {
        let (lo, hi) = (0.2 / fit.rate, 2.0 / fit.rate);
        let mut window_t = Vec::new();
        let mut window_v = Vec::new();
        for (&t, &v) in times.iter().zip(values) {
            if (lo..=hi).contains(&t) {
                window_t.push(t);
                window_v.push(v);
            }
        }
        if window_t.len() < MIN_FIT_SAMPLES {
            break;
        }
        let refined = fit_decay_rate(&window_t, &window_v)?;
        let converged = (refined.rate - fit.rate).abs() <= 1e-6 * refined.rate.abs();
        fit = refined;
        if converged || fit.rate <= 0.0 {
            break;
        }
    }
    Ok(fit)
}

/// One-parameter least-squares fit of the measurement rate through
/// `infidelity(tau) = 1 - Phi(sqrt(2 gamma_m tau))`.
///
/// Scans a logarithmic rate grid and refines the best cell by golden-section
/// search. Infidelities must lie in (0, 1/2] up to roundoff slack.
pub fn fit_measurement_rate(
    times: &[f64],
    infidelities: &[f64],
) -> Result<RateFit, MetricsError> {
    if times.len() != infidelities.len() {
        return Err(MetricsError::MismatchedLengths {
            times: times.len(),
            values: infidelities.len(),
        });
    }
    if times.len() < MIN_FIT_SAMPLES {
        return Err(MetricsError::TooFewSamples {
            got: times.len(),
            need: MIN_FIT_SAMPLES,
        });
    }
    for (index, &value) in infidelities.iter().enumerate() {
        if value <= 0.0 || value > 0.5 + 1e-9 {
            return Err(MetricsError::ValueOutOfRange {
                index,
                value,
                lo: 0.0,
                hi: 0.5,
            });
        }
    }
    let objective = |rate: f64| -> f64 {
        times
            .iter()
            .zip(infidelities)
            .map(|(&t, &inf)| {
                let model = 1.0 - normal_cdf((2.0 * rate * t).sqrt());
                (inf - model) * (inf - model)
            })
            .sum()
    };
    // Coarse logarithmic scan over all plausible rates, then refine.
    let (grid_lo, grid_hi) = (1e-8f64, 1e3f64);
    let grid_points: usize = 300;
    let log_step = (grid_hi / grid_lo).ln() / (grid_points - 1) as f64;
    let mut best_idx = 0;
    let mut best_val = f64::INFINITY;
    for i in 0..grid_points {
        let rate = grid_lo * ((i as f64) * log_step).exp();
        let val = objective(rate);
        if val < best_val {
            best_val = val;
            best_idx = i;
        }
    }
    let mut a = grid_lo * ((best_idx.saturating_sub(1) as f64) * log_step).exp();
    let mut b = grid_lo * (((best_idx + 1).min(grid_points - 1) as f64) * log_step).exp();
    // Golden-section search on the bracketing interval.
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    for _ in 0..120 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = objective(d);
        }
        if (b - a) < 1e-9 * b {
            break;
        }
    }
    let rate = 0.5 * (a + b);
    Ok(RateFit {
        rate,
        residual_rms: (objective(rate) / times.len() as f64).sqrt(),
        n_used: times.len(),
        window: (times[0], times[times.len() - 1]),
    })
}

/// Leakage rate fit through `L(tau) = (1 - exp(-rate * tau)) / 2`.
///
/// Transforms to `1 - 2 L`, which decays exponentially, and reuses the
/// log-linear fit. Leakage values must stay below the saturation value 1/2.
pub fn fit_leakage_rate(times: &[f64], leakages: &[f64]) -> Result<RateFit, MetricsError> {
    let transformed: Vec<f64> = leakages.iter().map(|l| 1.0 - 2.0 * l).collect();
    for (index, &value) in transformed.iter().enumerate() {
        if value <= 0.0 {
            return Err(MetricsError::ValueOutOfRange {
                index,
                value: leakages[index],
                lo: 0.0,
                hi: 0.5,
            });
        }
    }
    fit_decay_rate(times, &transformed)
}
