//! Two-round leakage-detection protocol for the spin readout.
//!
//! Readout backaction can silently move the blockaded qubit state into other
//! (1,1) spin states. This module implements an experiment that exposes that
//! leakage as a count statistic: prepare the blockaded state, read once,
//! flip both spins, read again. Leakage during the first round surfaces as
//! the outcome pair (0, 1), and subtracting the (1, 0) rate cancels the
//! plain inference errors to first order.
//!
//! Three layers are provided: the first-order forward probability model, its
//! exact linear inversion into an error budget, and a full simulation that
//! composes the measurement engine with the ideal state-transfer
//! permutations.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{critical_ratio, step_operators, CountVectorEvolver, EngineError, Outcome};
use crate::linalg::{c64, vectorize, ComplexMatrix, DensityMatrix};
use crate::metrics::{expectation_from_vector, spin_leakage_projector};
use crate::models::{
    build_spin_total_hamiltonian, calibrate_timestep, spin_basis, ModelError, SpinQubitParams,
};

/// Errors from protocol evaluation.
#[derive(Debug, Error)]
pub enum ProtocolError {
    /// Budget entries are probabilities.
    #[error("error-budget entry {name} = {value} is outside [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    /// Underlying model parameters failed validation.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// Channel evolution failed.
    #[error(transparent)]
    Engine(#[from] EngineError),
    /// The protocol needs at least one shot and one step per round.
    #[error("{0}")]
    DegenerateRun(String),
}

/// First-order error budget of the readout protocol.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorBudget {
    /// Probability that the first readout round moves the blockaded state
    /// into another (1,1) state.
    pub leakage: f64,
    /// Probability of inferring the (0,2) configuration when the system is
    /// in (1,1).
    pub eps_up: f64,
    /// Probability of inferring (1,1) when the system is in (0,2).
    pub eps_down: f64,
    /// Initialization error weights of the standard preparation.
    pub q1: f64,
    pub q2: f64,
}

impl ErrorBudget {
    /// All entries are probabilities in [0, 1].
    pub fn validate(&self) -> Result<(), ProtocolError> {
        for (name, value) in [
            ("leakage", self.leakage),
            ("eps_up", self.eps_up),
            ("eps_down", self.eps_down),
            ("q1", self.q1),
            ("q2", self.q2),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ProtocolError::InvalidProbability { name, value });
            }
        }
        Ok(())
    }

    /// The forward model keeps only first-order terms; entries this large
    /// make it quantitatively unreliable.
    pub fn first_order_warning(&self) -> Option<String> {
        let worst = [self.leakage, self.eps_up, self.eps_down, self.q1, self.q2]
            .into_iter()
            .fold(0.0f64, f64::max);
        if worst > 0.2 {
            Some(format!(
                "largest error parameter {worst:.3} exceeds 0.2; first-order \
                 probabilities are unreliable"
            ))
        } else {
            None
        }
    }
}

/// Outcome probabilities of the protocol and its two companion
/// single-measurement calibration runs, to first order in the budget.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentProbabilities {
    /// Two-round outcome pairs (first bit, second bit).
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    /// Probability of reading 0 after preparing the standard down-up state.
    pub p0_down_up: f64,
    /// Probability of reading 0 after preparing the rotated up-down state.
    pub p0_up_down: f64,
}

/// First-order forward model of the experiment.
///
/// Leakage only ever produces the pair (0, 1); a first-round inference error
/// produces (1, 0); an initialization error in the first weight produces
/// (1, 1). The two companion runs expose the remaining parameters.
pub fn experiment_probabilities(budget: &ErrorBudget) -> ExperimentProbabilities {
    let p01 = budget.leakage + budget.eps_up;
    let p10 = budget.eps_up;
    let p11 = budget.q1;
    ExperimentProbabilities {
        p00: 1.0 - p01 - p10 - p11,
        p01,
        p10,
        p11,
        p0_down_up: budget.eps_down + budget.q1 + budget.q2,
        p0_up_down: budget.eps_up + budget.q2,
    }
}

/// Error budget recovered from observed frequencies.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BudgetEstimate {
    pub budget: ErrorBudget,
    /// Names of parameters whose raw estimate was negative and got clipped
    /// to zero (noise can push small differences below zero).
    pub clipped: Vec<&'static str>,
}

/// Inverts the first-order model; an exact linear inverse of
/// [`experiment_probabilities`].
///
/// Sampling noise can make the subtracted estimates negative; those are
/// clipped to zero and reported in `clipped` rather than treated as errors.
pub fn estimate_error_budget(observed: &ExperimentProbabilities) -> BudgetEstimate {
    let mut clipped = Vec::new();
    let mut clip = |name: &'static str, value: f64| -> f64 {
        if value < 0.0 {
            clipped.push(name);
            0.0
        } else {
            value
        }
    };
    let eps_up = clip("eps_up", observed.p10);
    let leakage = clip("leakage", observed.p01 - observed.p10);
    let q1 = clip("q1", observed.p11);
    let q2 = clip("q2", observed.p0_up_down - eps_up);
    let eps_down = clip("eps_down", observed.p0_down_up - q1 - q2);
    BudgetEstimate {
        budget: ErrorBudget {
            leakage,
            eps_up,
            eps_down,
            q1,
            q2,
        },
        clipped,
    }
}

fn permutation_matrix(images: [usize; spin_basis::DIM]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(spin_basis::DIM, spin_basis::DIM);
    for (from, &to) in images.iter().enumerate() {
        m[(to, from)] = c64(1.0, 0.0);
    }
    m
}

/// Ideal spin-to-charge conversion as a basis permutation.
///
/// Adiabatic transfers at the readout ramp: the parallel states and the
/// (2,0) singlet stay put, the standard down-up state rides into the (0,2)
/// singlet, and up-down takes its place (the inverse image of the singlet
/// closes the cycle).
pub fn spin_to_charge_permutation() -> ComplexMatrix {
    let mut images = [0, 1, 2, 3, 4, 5];
    images[spin_basis::DOWN_UP] = spin_basis::S02;
    images[spin_basis::UP_DOWN] = spin_basis::DOWN_UP;
    images[spin_basis::S02] = spin_basis::UP_DOWN;
    permutation_matrix(images)
}

/// Ideal charge-to-spin conversion: inverse of
/// [`spin_to_charge_permutation`].
pub fn charge_to_spin_permutation() -> ComplexMatrix {
    spin_to_charge_permutation().dagger()
}

/// Simultaneous X gates on both spins of the (1,1) sector.
///
/// Swaps up-up with down-down and up-down with down-up; the doubly occupied
/// singlets carry no (1,1) spin content and are left alone.
pub fn double_x_gate() -> ComplexMatrix {
    let mut images = [0, 1, 2, 3, 4, 5];
    images[spin_basis::UP_UP] = spin_basis::DOWN_DOWN;
    images[spin_basis::DOWN_DOWN] = spin_basis::UP_UP;
    images[spin_basis::UP_DOWN] = spin_basis::DOWN_UP;
    images[spin_basis::DOWN_UP] = spin_basis::UP_DOWN;
    permutation_matrix(images)
}

/// Result of the engine-level protocol simulation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LeakageExperimentResult {
    /// Empirical frequencies of the four outcome pairs over the shots,
    /// ordered (p00, p01, p10, p11).
    pub frequencies: [f64; 4],
    /// Exact outcome-pair probabilities of the simulated composition.
    pub exact: [f64; 4],
    /// Number of shots sampled.
    pub shots: usize,
    /// Steps per readout round.
    pub n_steps: usize,
    /// Round duration in ns.
    pub round_duration: f64,
    /// Population outside the readout subspace after the first round,
    /// computed channel-side for cross-checking the estimate.
    pub true_leakage: f64,
    /// Present when the shot count is too low for meaningful statistics.
    pub statistics_warning: Option<String>,
}

impl LeakageExperimentResult {
    /// Budget estimate from the empirical frequencies (companion-run
    /// probabilities are not simulated and enter as zero).
    pub fn estimated_budget(&self) -> BudgetEstimate {
        estimate_error_budget(&ExperimentProbabilities {
            p00: self.frequencies[0],
            p01: self.frequencies[1],
            p10: self.frequencies[2],
            p11: self.frequencies[3],
            p0_down_up: 0.0,
            p0_up_down: 0.0,
        })
    }
}

/// Simulates the two-round protocol with an ideal preparation.
pub fn simulate_leakage_experiment(
    params: &SpinQubitParams,
    n_steps_per_round: usize,
    shots: usize,
    seed: u64,
) -> Result<LeakageExperimentResult, ProtocolError> {
    simulate_leakage_experiment_with_errors(params, n_steps_per_round, shots, seed, 0.0, 0.0)
}

/// Simulates the two-round protocol with initialization errors injected.
///
/// The preparation aims for the blockaded down-down state; with weights
/// `q1` and `q2` it instead lands in the states reached by carrying the
/// standard initialization errors through the preparing spin rotation
/// (down-up and up-up respectively).
///
/// Each shot samples a transmitted count for round one, conditions the
/// state on that count (not merely on the inferred bit), applies the ideal
/// conversion-flip-conversion sequence, and samples the second-round bit.
/// Shots draw from independent streams of a counter-based generator, so
/// results are identical for any thread count.
pub fn simulate_leakage_experiment_with_errors(
    params: &SpinQubitParams,
    n_steps_per_round: usize,
    shots: usize,
    seed: u64,
    q1: f64,
    q2: f64,
) -> Result<LeakageExperimentResult, ProtocolError> {
    params.validate()?;
    if n_steps_per_round == 0 || shots == 0 {
        return Err(ProtocolError::DegenerateRun(format!(
            "need at least one step and one shot, got {n_steps_per_round} steps, {shots} shots"
        )));
    }
    for (name, value) in [("q1", q1), ("q2", q2)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(ProtocolError::InvalidProbability { name, value });
        }
    }

    let delta_tau = calibrate_timestep(params.gamma, params.delta_gamma, params.delta_vec[2])?;
    let h = build_spin_total_hamiltonian(params);
    let step = step_operators(&h, delta_tau)?;
    let n = n_steps_per_round;

    // Preparation mixture at the operation point: nominal blockaded state
    // plus the two injected error components, each carried to the readout
    // point by the ideal spin-to-charge conversion (a basis permutation, so
    // mapping indices suffices).
    let s2c_image = |state: usize| -> usize {
        match state {
            spin_basis::DOWN_UP => spin_basis::S02,
            spin_basis::UP_DOWN => spin_basis::DOWN_UP,
            spin_basis::S02 => spin_basis::UP_DOWN,
            other => other,
        }
    };
    let components: Vec<(f64, usize)> = vec![
        (1.0 - q1 - q2, s2c_image(spin_basis::DOWN_DOWN)),
        (q1, s2c_image(spin_basis::DOWN_UP)),
        (q2, s2c_image(spin_basis::UP_UP)),
    ];

    // Forward count-resolved vectors for every preparation component plus
    // the two calibration states that define the inference threshold.
    let mut initial: Vec<Vec<Complex64>> = components
        .iter()
        .map(|&(_, state)| vectorize(DensityMatrix::basis_state(spin_basis::DIM, state).mat()))
        .collect();
    initial.push(vectorize(
        DensityMatrix::basis_state(spin_basis::DIM, spin_basis::DOWN_DOWN).mat(),
    ));
    initial.push(vectorize(
        DensityMatrix::basis_state(spin_basis::DIM, spin_basis::S02).mat(),
    ));
    let mut forward = CountVectorEvolver::forward(&step, initial);
    forward.advance_to(n)?;

    // Dual (effect) vectors of one round, aggregated into the detected-low
    // effect below.
    let identity_vec = vectorize(&ComplexMatrix::identity(spin_basis::DIM));
    let mut dual = CountVectorEvolver::dual(&step, vec![identity_vec]);
    dual.advance_to(n)?;

    let rule = critical_ratio(&forward.distribution(3), &forward.distribution(4));

    // Effect operator for reading bit 1 (the low-transmission outcome) in
    // round two, pulled back through the conversion-flip-conversion
    // unitary so it applies directly to post-round-one states.
    let (low_effect_vec, _) = dual.aggregate(0, &rule);
    let d = spin_basis::DIM;
    let low_effect = ComplexMatrix::from_fn(d, d, |a, b| low_effect_vec[a * d + b].conj());
    let interlude = spin_to_charge_permutation()
        .matmul(&double_x_gate())
        .matmul(&charge_to_spin_permutation());
    let pulled_back = interlude.dagger().matmul(&low_effect).matmul(&interlude);

    // Per component and per count: round-one probability and conditional
    // round-two bit-1 probability, plus the exact joint distribution.
    let mut p1_by_component: Vec<Vec<f64>> = Vec::with_capacity(components.len());
    let mut p_bit2_by_component: Vec<Vec<f64>> = Vec::with_capacity(components.len());
    let mut exact = [0.0f64; 4];
    for (slot, &(weight, _)) in components.iter().enumerate() {
        let vectors = forward.vectors(slot);
        let mut p1 = Vec::with_capacity(n + 1);
        let mut p_bit2 = Vec::with_capacity(n + 1);
        for (count, v) in vectors.iter().enumerate() {
            let prob1 = crate::linalg::vectorized_trace(v).re.max(0.0);
            let joint_low = expectation_from_vector(&pulled_back, v).re.clamp(0.0, prob1);
            let bit1 = match rule.assign(count) {
                Outcome::HighTransmission => 0,
                Outcome::LowTransmission => 1,
            };
            exact[2 * bit1 + 1] += weight * joint_low;
            exact[2 * bit1] += weight * (prob1 - joint_low);
            p1.push(prob1);
            p_bit2.push(if prob1 > 0.0 { joint_low / prob1 } else { 0.0 });
        }
        p1_by_component.push(p1);
        p_bit2_by_component.push(p_bit2);
    }

    // Channel-side reference: population outside the readout subspace after
    // the unconditional first round, for the ideal (unit-trace) preparation
    // component.
    let true_leakage = {
        let nominal = forward.vectors(0);
        let projector = spin_leakage_projector();
        nominal
            .iter()
            .map(|v| expectation_from_vector(&projector, v).re)
            .sum()
    };

    // Cumulative tables for categorical sampling.
    let component_cdf: Vec<f64> = components
        .iter()
        .scan(0.0, |acc, &(w, _)| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let count_cdfs: Vec<Vec<f64>> = p1_by_component
        .iter()
        .map(|p1| {
            p1.iter()
                .scan(0.0, |acc, &p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        })
        .collect();

    let tallies: Vec<[u64; 4]> = (0..shots)
        .into_par_iter()
        .map(|shot| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shot as u64);
            let mut tally = [0u64; 4];
            let u_component: f64 = rng.random();
            let component = component_cdf
                .iter()
                .position(|&c| u_component < c)
                .unwrap_or(components.len() - 1);
            let u_count: f64 = rng.random();
            let cdf = &count_cdfs[component];
            let total = *cdf.last().unwrap();
            let count = cdf
                .iter()
                .position(|&c| u_count * total < c)
                .unwrap_or(n);
            let bit1 = match rule.assign(count) {
                Outcome::HighTransmission => 0usize,
                Outcome::LowTransmission => 1,
            };
            let u_bit2: f64 = rng.random();
            let bit2 = usize::from(u_bit2 < p_bit2_by_component[component][count]);
            tally[2 * bit1 + bit2] = 1;
            tally
        })
        .collect();
    let mut counts = [0u64; 4];
    for t in &tallies {
        for i in 0..4 {
            counts[i] += t[i];
        }
    }

    Ok(LeakageExperimentResult {
        frequencies: counts.map(|c| c as f64 / shots as f64),
        exact,
        shots,
        n_steps: n,
        round_duration: n as f64 * delta_tau,
        true_leakage,
        statistics_warning: (shots < 100).then(|| {
            format!("{shots} shots give binomial noise of order {:.2}; use more", 1.0 / (shots as f64).sqrt())
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_model_reference_values() {
        let ideal = experiment_probabilities(&ErrorBudget::default());
        assert_eq!(
            (ideal.p00, ideal.p01, ideal.p10, ideal.p11),
            (1.0, 0.0, 0.0, 0.0)
        );
        assert_eq!(ideal.p0_down_up, 0.0);

        let budget = ErrorBudget {
            leakage: 0.02,
            eps_up: 0.01,
            q1: 0.005,
            ..Default::default()
        };
        let p = experiment_probabilities(&budget);
        assert!((p.p01 - 0.03).abs() < 1e-15);
        assert!((p.p10 - 0.01).abs() < 1e-15);
        assert!((p.p11 - 0.005).abs() < 1e-15);
        assert!((p.p00 - 0.955).abs() < 1e-15);
        assert!((p.p00 + p.p01 + p.p10 + p.p11 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn budget_round_trip_is_exact() {
        let budget = ErrorBudget {
            leakage: 0.013,
            eps_up: 0.004,
            eps_down: 0.009,
            q1: 0.002,
            q2: 0.006,
        };
        budget.validate().unwrap();
        let estimate = estimate_error_budget(&experiment_probabilities(&budget));
        assert!(estimate.clipped.is_empty());
        let r = estimate.budget;
        assert!((r.leakage - budget.leakage).abs() < 1e-12);
        assert!((r.eps_up - budget.eps_up).abs() < 1e-12);
        assert!((r.eps_down - budget.eps_down).abs() < 1e-12);
        assert!((r.q1 - budget.q1).abs() < 1e-12);
        assert!((r.q2 - budget.q2).abs() < 1e-12);
    }

    #[test]
    fn negative_raw_estimates_are_clipped_and_flagged() {
        let observed = ExperimentProbabilities {
            p00: 0.97,
            p01: 0.01,
            p10: 0.02,
            p11: 0.0,
            p0_down_up: 0.0,
            p0_up_down: 0.0,
        };
        let estimate = estimate_error_budget(&observed);
        assert_eq!(estimate.budget.leakage, 0.0);
        assert!(estimate.clipped.contains(&"leakage"));
    }

    #[test]
    fn budget_validation_and_warning() {
        let bad = ErrorBudget {
            leakage: -0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let large = ErrorBudget {
            eps_down: 0.4,
            ..Default::default()
        };
        assert!(large.first_order_warning().is_some());
        assert!(ErrorBudget::default().first_order_warning().is_none());
    }

    #[test]
    fn conversions_are_inverse_permutations() {
        let s2c = spin_to_charge_permutation();
        let c2s = charge_to_spin_permutation();
        let product = s2c.matmul(&c2s);
        assert!(product.max_abs_diff(&ComplexMatrix::identity(6)) < 1e-15);
        // The standard down-up state rides into the measured singlet.
        assert_eq!(s2c[(spin_basis::S02, spin_basis::DOWN_UP)].re, 1.0);
        // Parallel states are untouched.
        assert_eq!(s2c[(spin_basis::DOWN_DOWN, spin_basis::DOWN_DOWN)].re, 1.0);
        assert_eq!(s2c[(spin_basis::UP_UP, spin_basis::UP_UP)].re, 1.0);
    }

    #[test]
    fn double_x_swaps_the_one_one_sector() {
        let xx = double_x_gate();
        assert_eq!(xx[(spin_basis::UP_UP, spin_basis::DOWN_DOWN)].re, 1.0);
        assert_eq!(xx[(spin_basis::DOWN_DOWN, spin_basis::UP_UP)].re, 1.0);
        assert_eq!(xx[(spin_basis::UP_DOWN, spin_basis::DOWN_UP)].re, 1.0);
        assert_eq!(xx[(spin_basis::DOWN_UP, spin_basis::UP_DOWN)].re, 1.0);
        // Involution.
        assert!(xx.matmul(&xx).max_abs_diff(&ComplexMatrix::identity(6)) < 1e-15);
    }

    /// Single-round misassignment probabilities implied by the engine's own
    /// count distributions and threshold rule at the given round length.
    fn round_inference_errors(params: &SpinQubitParams, n: usize) -> (f64, f64) {
        let delta_tau =
            calibrate_timestep(params.gamma, params.delta_gamma, params.delta_vec[2]).unwrap();
        let step = step_operators(&build_spin_total_hamiltonian(params), delta_tau).unwrap();
        let high =
            vectorize(DensityMatrix::basis_state(spin_basis::DIM, spin_basis::DOWN_DOWN).mat());
        let low = vectorize(DensityMatrix::basis_state(spin_basis::DIM, spin_basis::S02).mat());
        let mut forward = CountVectorEvolver::forward(&step, vec![high, low]);
        forward.advance_to(n).unwrap();
        let p_high = forward.distribution(0);
        let p_low = forward.distribution(1);
        let rule = critical_ratio(&p_high, &p_low);
        let mut eps_up = 0.0;
        let mut eps_down = 0.0;
        for k in 0..=n {
            match rule.assign(k) {
                Outcome::LowTransmission => eps_up += p_high[k],
                Outcome::HighTransmission => eps_down += p_low[k],
            }
        }
        (eps_up, eps_down)
    }

    #[test]
    fn no_gradient_joint_distribution_factorizes_into_round_errors() {
        // Without a transverse gradient everything is diagonal: conditional
        // states stay basis states and the two rounds are independent
        // Bernoulli trials with the single-round misassignment rates.
        let params = SpinQubitParams::reference();
        let n = 20;
        let (eps_up, _) = round_inference_errors(&params, n);
        let result = simulate_leakage_experiment(&params, n, 200, 5).unwrap();
        assert!(result.true_leakage < 1e-10);
        let expected = [
            (1.0 - eps_up) * (1.0 - eps_up),
            (1.0 - eps_up) * eps_up,
            eps_up * (1.0 - eps_up),
            eps_up * eps_up,
        ];
        for i in 0..4 {
            assert!(
                (result.exact[i] - expected[i]).abs() < 1e-12,
                "outcome {i}: exact {} vs factorized {}",
                result.exact[i],
                expected[i]
            );
        }
        let total: f64 = result.exact.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn transverse_gradient_shows_up_as_outcome_asymmetry() {
        let params = SpinQubitParams::reference().with_delta(0.05, 0.0, 0.0);
        let n = 40;
        let (eps_up, eps_down) = round_inference_errors(&params, n);
        let result = simulate_leakage_experiment(&params, n, 200, 5).unwrap();
        // The channel-side leakage follows the analytic exponential law.
        let rate =
            crate::analytics::leakage_rate(0.05, params.z_right, result.round_duration / n as f64)
                .unwrap();
        let law = 0.5 * (1.0 - (-rate.value * result.round_duration).exp());
        assert!(
            (result.true_leakage - law).abs() < 0.01 * law,
            "leakage {} vs law {law}",
            result.true_leakage
        );
        // The outcome asymmetry sees that leakage attenuated by the
        // misassignment rates of the two rounds.
        let asymmetry = result.exact[1] - result.exact[2];
        let predicted = result.true_leakage * (1.0 - eps_up - eps_down);
        assert!(
            (asymmetry - predicted).abs() < 0.05 * result.true_leakage,
            "asymmetry {asymmetry} vs attenuated leakage {predicted}"
        );
    }

    #[test]
    fn injected_initialization_errors_appear_in_the_tallies() {
        let params = SpinQubitParams::reference();
        let n = 20;
        let (q1, q2) = (0.05, 0.03);
        let (eps_up, eps_down) = round_inference_errors(&params, n);
        let result =
            simulate_leakage_experiment_with_errors(&params, n, 400, 11, q1, q2).unwrap();
        // The q1 component is converted into the measured singlet and reads
        // 1 in round one; the nominal and q2 components are blockaded and
        // read 1 only through misassignment. Diagonal dynamics make this
        // exact.
        let first_bit_one = result.exact[2] + result.exact[3];
        let expected = (1.0 - q1 - q2) * eps_up + q1 * (1.0 - eps_down) + q2 * eps_up;
        assert!(
            (first_bit_one - expected).abs() < 1e-12,
            "first-round 1-rate {first_bit_one} vs {expected}"
        );
        assert!(result.statistics_warning.is_none());
    }

    #[test]
    fn sampled_frequencies_track_exact_probabilities() {
        let params = SpinQubitParams::reference().with_delta(0.25, 0.0, 0.0);
        let shots = 20_000;
        let result = simulate_leakage_experiment(&params, 30, shots, 17).unwrap();
        for i in 0..4 {
            let p = result.exact[i];
            let sigma = (p * (1.0 - p) / shots as f64).sqrt();
            assert!(
                (result.frequencies[i] - p).abs() <= 4.0 * sigma + 1e-9,
                "outcome {i}: frequency {} vs exact {p} (sigma {sigma:.2e})",
                result.frequencies[i]
            );
        }
    }

    #[test]
    fn shot_sampling_is_deterministic_and_thread_independent() {
        let params = SpinQubitParams::reference().with_delta(0.1, 0.0, 0.0);
        let a = simulate_leakage_experiment(&params, 15, 500, 99).unwrap();
        let b = simulate_leakage_experiment(&params, 15, 500, 99).unwrap();
        assert_eq!(a.frequencies, b.frequencies);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let serial = pool
            .install(|| simulate_leakage_experiment(&params, 15, 500, 99))
            .unwrap();
        assert_eq!(a.frequencies, serial.frequencies);
        let other_seed = simulate_leakage_experiment(&params, 15, 500, 100).unwrap();
        assert_ne!(a.frequencies, other_seed.frequencies);
    }

    #[test]
    fn degenerate_runs_are_rejected() {
        let params = SpinQubitParams::reference();
        assert!(simulate_leakage_experiment(&params, 0, 100, 1).is_err());
        assert!(simulate_leakage_experiment(&params, 10, 0, 1).is_err());
        assert!(
            simulate_leakage_experiment_with_errors(&params, 10, 10, 1, 1.5, 0.0).is_err()
        );
        let warned = simulate_leakage_experiment(&params, 5, 50, 1).unwrap();
        assert!(warned.statistics_warning.is_some());
    }
}
