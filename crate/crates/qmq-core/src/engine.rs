//! Count-resolved measurement engine.
//!
//! One sensing step entangles the system with a freshly initialized meter
//! qubit for a time `delta_tau` and projectively reads the meter, yielding
//! the step operators `(M0, M1)`. A readout of `N` steps is summarized by
//! the transmitted-electron count `N_t`, and the conditional evolution is
//! carried by transfer matrices `Upsilon_k` indexed by that count. The
//! recursion over rounds costs `N (N + 3) / 2` elementary channel updates
//! instead of the naive `2^N` enumeration, which is retained here only as a
//! test oracle.
//!
//! Within a round every count index is updated independently; updates run in
//! parallel over `k` and never reduce across threads, so results are
//! bit-identical for any worker count.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{
    transfer_matrix, vectorize, vectorized_trace, ComplexMatrix, DensityMatrix, LinalgError,
};

/// Largest supported round count for count-resolved evolution; one round of
/// spin channels at this cap is about 420 MB, so the cap guards memory, not
/// correctness.
pub const DEFAULT_ROUND_CAP: usize = 20_000;

/// Largest exponent for the brute-force `2^N` oracle.
pub const BRUTE_FORCE_CAP: usize = 14;

/// Outcome mass below this threshold is treated as numerically absent when
/// locating the likelihood threshold.
const SIGNIFICANT_MASS: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("meter completeness violated by {deviation:.3e}; check basis ordering of the total Hamiltonian")]
    CompletenessViolation { deviation: f64 },
    #[error("total Hamiltonian dimension {dim} is not an even system*meter product")]
    OddDimension { dim: usize },
    #[error("round count {requested} exceeds the configured cap {cap}")]
    RoundCapExceeded { requested: usize, cap: usize },
    #[error("round count {requested} exceeds the brute-force enumeration cap {cap}")]
    BruteForceCapExceeded { requested: usize, cap: usize },
    #[error("dimension mismatch: channel dim {channel_dim}, state dim {state_dim}")]
    DimensionMismatch { channel_dim: usize, state_dim: usize },
    #[error("round count must be at least 1")]
    EmptyRun,
}

/// Single-step measurement operators and their transfer-matrix forms.
#[derive(Debug, Clone)]
pub struct StepOperators {
    /// System-space operator for a reflected meter electron.
    pub m0: ComplexMatrix,
    /// System-space operator for a transmitted meter electron.
    pub m1: ComplexMatrix,
    /// `conj(m0) (x) m0`.
    pub upsilon0: ComplexMatrix,
    /// `conj(m1) (x) m1`.
    pub upsilon1: ComplexMatrix,
    /// System dimension.
    pub dim: usize,
}

impl StepOperators {
    /// Transfer matrix of the count-blind step, `upsilon0 + upsilon1`.
    pub fn unconditional_transfer(&self) -> ComplexMatrix {
        self.upsilon0.add(&self.upsilon1)
    }

    /// Deviation of `m0^dag m0 + m1^dag m1` from the identity.
    pub fn completeness_deviation(&self) -> f64 {
        let sum = self
            .m0
            .dagger()
            .matmul(&self.m0)
            .add(&self.m1.dagger().matmul(&self.m1));
        sum.max_abs_diff(&ComplexMatrix::identity(self.dim))
    }
}

/// Extracts the step operators from a total system-plus-meter Hamiltonian.
///
/// The meter must be ordered last (`index = 2 * system + meter`) and starts
/// each step in its bottom state, so `M0[i][j] = <i,B| U |j,B>` and
/// `M1[i][j] = <i,T| U |j,B>` with `U = exp(-i H delta_tau / hbar)`.
///
/// # Errors
///
/// Fails when the Hamiltonian is not Hermitian, has odd dimension, or when
/// the extracted operators miss completeness by more than 1e-8, which
/// signals a basis-ordering bug in the caller.
pub fn step_operators(
    h_tot: &ComplexMatrix,
    delta_tau: f64,
) -> Result<StepOperators, EngineError> {
    let full_dim = h_tot.rows();
    if full_dim % 2 != 0 {
        return Err(EngineError::OddDimension { dim: full_dim });
    }
    let dim = full_dim / 2;
    let u = crate::linalg::hermitian_propagator(h_tot, delta_tau)?;
    let m0 = ComplexMatrix::from_fn(dim, dim, |i, j| u[(2 * i, 2 * j)]);
    let m1 = ComplexMatrix::from_fn(dim, dim, |i, j| u[(2 * i + 1, 2 * j)]);
    let step = StepOperators {
        upsilon0: transfer_matrix(&m0),
        upsilon1: transfer_matrix(&m1),
        m0,
        m1,
        dim,
    };
    let deviation = step.completeness_deviation();
    if deviation > 1e-8 {
        return Err(EngineError::CompletenessViolation { deviation });
    }
    Ok(step)
}

/// The family `{Upsilon_k}` of count-resolved transfer matrices after a
/// fixed number of rounds.
#[derive(Debug, Clone)]
pub struct CountResolvedChannels {
    n_steps: usize,
    dim: usize,
    channels: Vec<ComplexMatrix>,
}

impl CountResolvedChannels {
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// System dimension `d` (channels are `d^2 x d^2`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Transfer matrix for exactly `count` transmitted electrons.
    pub fn channel(&self, count: usize) -> &ComplexMatrix {
        &self.channels[count]
    }

    pub fn channels(&self) -> &[ComplexMatrix] {
        &self.channels
    }

    /// How far the count-summed channel drifts from trace preservation,
    /// probed on the maximally mixed state.
    pub fn trace_preservation_error(&self) -> f64 {
        let rho = DensityMatrix::maximally_mixed(self.dim);
        let p: f64 = self.distribution(&rho).iter().sum();
        (p - 1.0).abs()
    }

    /// Outcome distribution `P(count) = Tr Upsilon_count[rho]`.
    pub fn distribution(&self, rho: &DensityMatrix) -> Vec<f64> {
        let v = vectorize(rho.mat());
        self.channels
            .iter()
            .map(|ch| vectorized_trace(&ch.matvec(&v)).re)
            .collect()
    }
}

/// Incremental count-resolved evolution holding the full channel matrices of
/// the current round.
#[derive(Debug)]
pub struct ChannelEvolver {
    upsilon0: ComplexMatrix,
    upsilon1: ComplexMatrix,
    state: CountResolvedChannels,
    cap: usize,
}

impl ChannelEvolver {
    pub fn new(step: &StepOperators) -> Self {
        Self::with_cap(step, DEFAULT_ROUND_CAP)
    }

    pub fn with_cap(step: &StepOperators, cap: usize) -> Self {
        let d2 = step.dim * step.dim;
        Self {
            upsilon0: step.upsilon0.clone(),
            upsilon1: step.upsilon1.clone(),
            state: CountResolvedChannels {
                n_steps: 0,
                dim: step.dim,
                // Round zero: the identity channel concentrated at count 0.
                channels: vec![ComplexMatrix::identity(d2)],
            },
            cap,
        }
    }

    pub fn round(&self) -> usize {
        self.state.n_steps
    }

    pub fn current(&self) -> &CountResolvedChannels {
        &self.state
    }

    pub fn into_current(self) -> CountResolvedChannels {
        self.state
    }

    /// Advances one round: `new[k] = Upsilon_0 old[k] + Upsilon_1 old[k-1]`
    /// with pure boundary terms at `k = 0` and `k = round`.
    pub fn advance(&mut self) -> Result<(), EngineError> {
        let next_round = self.state.n_steps + 1;
        if next_round > self.cap {
            return Err(EngineError::RoundCapExceeded {
                requested: next_round,
                cap: self.cap,
            });
        }
        let old = &self.state.channels;
        let channels: Vec<ComplexMatrix> = (0..=next_round)
            .into_par_iter()
            .map(|k| {
                if k == 0 {
                    self.upsilon0.matmul(&old[0])
                } else if k == next_round {
                    self.upsilon1.matmul(&old[k - 1])
                } else {
                    self.upsilon0
                        .matmul(&old[k])
                        .add(&self.upsilon1.matmul(&old[k - 1]))
                }
            })
            .collect();
        self.state.channels = channels;
        self.state.n_steps = next_round;
        Ok(())
    }

    pub fn advance_to(&mut self, round: usize) -> Result<(), EngineError> {
        while self.state.n_steps < round {
            self.advance()?;
        }
        Ok(())
    }
}

/// Runs the count-resolved recursion for `n` rounds.
pub fn evolve_count_resolved(
    step: &StepOperators,
    n: usize,
) -> Result<CountResolvedChannels, EngineError> {
    evolve_count_resolved_with_cap(step, n, DEFAULT_ROUND_CAP)
}

pub fn evolve_count_resolved_with_cap(
    step: &StepOperators,
    n: usize,
    cap: usize,
) -> Result<CountResolvedChannels, EngineError> {
    if n == 0 {
        return Err(EngineError::EmptyRun);
    }
    let mut evolver = ChannelEvolver::with_cap(step, cap);
    evolver.advance_to(n)?;
    Ok(evolver.into_current())
}

/// Exact `2^N` enumeration oracle: products of step operators grouped by the
/// number of transmitted electrons in the bitstring.
pub fn brute_force_channels(
    step: &StepOperators,
    n: usize,
) -> Result<CountResolvedChannels, EngineError> {
    if n == 0 {
        return Err(EngineError::EmptyRun);
    }
    if n > BRUTE_FORCE_CAP {
        return Err(EngineError::BruteForceCapExceeded {
            requested: n,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let d = step.dim;
    let mut channels = vec![ComplexMatrix::zeros(d * d, d * d); n + 1];
    for bits in 0u64..(1u64 << n) {
        let mut product = ComplexMatrix::identity(d);
        // The first step acts first, so it sits rightmost in the product.
        for step_index in 0..n {
            let operator = if (bits >> step_index) & 1 == 1 {
                &step.m1
            } else {
                &step.m0
            };
            product = operator.matmul(&product);
        }
        let weight = bits.count_ones() as usize;
        let contribution = transfer_matrix(&product);
        channels[weight] = channels[weight].add(&contribution);
    }
    Ok(CountResolvedChannels {
        n_steps: n,
        dim: d,
        channels,
    })
}

/// Outcome distribution over transmitted counts for a pre-measurement state.
pub fn outcome_distribution(
    channels: &CountResolvedChannels,
    rho: &DensityMatrix,
) -> Result<Vec<f64>, EngineError> {
    if channels.dim != rho.dim() {
        return Err(EngineError::DimensionMismatch {
            channel_dim: channels.dim,
            state_dim: rho.dim(),
        });
    }
    Ok(channels.distribution(rho))
}

/// Binary outcome of the count-threshold inference rule, labeled by which
/// transmission branch the count favors. For the charge qubit the
/// high-transmission state is `|e>` (left dot); for the spin qubit it is the
/// blockaded `|down,down>` state, whose meter amplitude is not reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    HighTransmission,
    LowTransmission,
}

/// Maximum-likelihood threshold on the transmitted count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceRule {
    /// Largest count assigned to the low-transmission outcome; `-1` would
    /// mean every count maps to the high outcome (cannot occur for
    /// normalized distributions).
    pub threshold_count: i64,
    /// Threshold as a transmission ratio in `[0, 1]`; outcome is
    /// high-transmission iff `count / n > k_critical`, ties going low.
    pub k_critical: f64,
    /// False when the likelihood ratio is not monotone in the count and the
    /// rule fell back to the best single threshold.
    pub monotone: bool,
    /// Round count the rule was derived for.
    pub n_steps: usize,
}

impl InferenceRule {
    pub fn assign(&self, count: usize) -> Outcome {
        if (count as i64) > self.threshold_count {
            Outcome::HighTransmission
        } else {
            Outcome::LowTransmission
        }
    }
}

/// True when `a` exceeds `b` by more than roundoff; exact ties computed
/// through different channel evolutions land in the `false` branch.
fn effectively_greater(a: f64, b: f64) -> bool {
    a > b + crate::tol::TIE_BREAK_REL_TOL * (a + b)
}

/// Derives the maximum-likelihood count threshold separating the
/// high-transmission distribution `p_high` from `p_low`.
///
/// Ties and the boundary count are assigned to the low outcome. When the
/// sign pattern of `p_high - p_low` is not a single crossing over the
/// numerically significant support, the rule is the best single threshold by
/// exhaustive scan and `monotone` is false.
pub fn critical_ratio(p_high: &[f64], p_low: &[f64]) -> InferenceRule {
    assert_eq!(p_high.len(), p_low.len(), "distributions must share length");
    let n = p_high.len() - 1;
    let significant: Vec<usize> = (0..=n)
        .filter(|&k| p_high[k].max(p_low[k]) > SIGNIFICANT_MASS)
        .collect();

    let mut last_low: i64 = -1;
    let mut first_high: i64 = i64::MAX;
    for &k in &significant {
        if effectively_greater(p_high[k], p_low[k]) {
            first_high = first_high.min(k as i64);
        } else {
            last_low = last_low.max(k as i64);
        }
    }

    let (threshold, monotone) = if first_high == i64::MAX {
        // No count favors the high outcome; everything is assigned low.
        (n as i64, true)
    } else if last_low < first_high {
        (last_low.max(first_high - 1), true)
    } else {
        (best_threshold(p_high, p_low), false)
    };

    InferenceRule {
        threshold_count: threshold,
        k_critical: (threshold.max(0) as f64 / n.max(1) as f64).clamp(0.0, 1.0),
        monotone,
        n_steps: n,
    }
}

/// Exhaustive single-threshold scan maximizing the assignment fidelity
/// `(sum_{k <= T} p_low + sum_{k > T} p_high) / 2`; ties prefer the larger
/// threshold so boundary counts go to the low outcome.
pub fn best_threshold(p_high: &[f64], p_low: &[f64]) -> i64 {
    let n = p_high.len() as i64 - 1;
    let mut best_t = -1i64;
    // T = -1: everything assigned high.
    let mut score: f64 = p_high.iter().sum();
    let mut best_score = score;
    for t in 0..=n {
        let (h, l) = (p_high[t as usize], p_low[t as usize]);
        // Exact ties contribute nothing, so the threshold keeps moving up and
        // the tied count lands on the low side.
        if effectively_greater(h, l) || effectively_greater(l, h) {
            score += l - h;
        }
        if score >= best_score {
            best_score = score;
            best_t = t;
        }
    }
    best_t
}

/// Sums the count-resolved channels on either side of the threshold into the
/// two aggregated measurement operations, returned as
/// `(low_transmission, high_transmission)`.
pub fn aggregate_operations(
    channels: &CountResolvedChannels,
    rule: &InferenceRule,
) -> (ComplexMatrix, ComplexMatrix) {
    let d2 = channels.dim * channels.dim;
    let mut low = ComplexMatrix::zeros(d2, d2);
    let mut high = ComplexMatrix::zeros(d2, d2);
    for (count, channel) in channels.channels.iter().enumerate() {
        match rule.assign(count) {
            Outcome::LowTransmission => low = low.add(channel),
            Outcome::HighTransmission => high = high.add(channel),
        }
    }
    (low, high)
}

/// Which recursion a [`CountVectorEvolver`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VectorMode {
    /// Evolves `v_k = Upsilon_k vec(rho0)` for fixed initial states.
    Forward,
    /// Evolves `e_k = Upsilon_k^dag vec(I)`-style dual vectors, yielding
    /// vectorized POVM effects: `P(k | rho) = <e_k, vec(rho)>`.
    Dual,
}

/// Streaming count-resolved evolution tracking only the action of the
/// channels on a fixed list of vectors, at cost `d^4` per update instead of
/// `d^6`. Enough for outcome distributions, aggregated conditional states,
/// and effect operators; the full channel matrices are never materialized.
#[derive(Debug)]
pub struct CountVectorEvolver {
    op0: ComplexMatrix,
    op1: ComplexMatrix,
    round: usize,
    cap: usize,
    /// `vectors[s][k]` is the count-`k` vector for tracked slot `s`.
    vectors: Vec<Vec<Vec<Complex64>>>,
}

impl CountVectorEvolver {
    /// Tracks forward evolution of vectorized initial states.
    pub fn forward(step: &StepOperators, initial: Vec<Vec<Complex64>>) -> Self {
        Self::with_mode(step, initial, VectorMode::Forward, DEFAULT_ROUND_CAP)
    }

    /// Tracks dual evolution of vectorized observables; seeding with
    /// `vec(identity)` yields the count-resolved POVM effects.
    pub fn dual(step: &StepOperators, initial: Vec<Vec<Complex64>>) -> Self {
        Self::with_mode(step, initial, VectorMode::Dual, DEFAULT_ROUND_CAP)
    }

    fn with_mode(
        step: &StepOperators,
        initial: Vec<Vec<Complex64>>,
        mode: VectorMode,
        cap: usize,
    ) -> Self {
        let (op0, op1) = match mode {
            VectorMode::Forward => (step.upsilon0.clone(), step.upsilon1.clone()),
            VectorMode::Dual => (step.upsilon0.dagger(), step.upsilon1.dagger()),
        };
        Self {
            op0,
            op1,
            round: 0,
            cap,
            vectors: initial.into_iter().map(|v| vec![v]).collect(),
        }
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn advance(&mut self) -> Result<(), EngineError> {
        let next_round = self.round + 1;
        if next_round > self.cap {
            return Err(EngineError::RoundCapExceeded {
                requested: next_round,
                cap: self.cap,
            });
        }
        for slot in &mut self.vectors {
            let old = &*slot;
            let new: Vec<Vec<Complex64>> = (0..=next_round)
                .into_par_iter()
                .map(|k| {
                    if k == 0 {
                        self.op0.matvec(&old[0])
                    } else if k == next_round {
                        self.op1.matvec(&old[k - 1])
                    } else {
                        let mut v = self.op0.matvec(&old[k]);
                        let w = self.op1.matvec(&old[k - 1]);
                        for (a, b) in v.iter_mut().zip(&w) {
                            *a += b;
                        }
                        v
                    }
                })
                .collect();
            *slot = new;
        }
        self.round = next_round;
        Ok(())
    }

    pub fn advance_to(&mut self, round: usize) -> Result<(), EngineError> {
        while self.round < round {
            self.advance()?;
        }
        Ok(())
    }

    /// Count-resolved vectors for tracked slot `s` at the current round.
    pub fn vectors(&self, s: usize) -> &[Vec<Complex64>] {
        &self.vectors[s]
    }

    /// Outcome distribution for a forward-tracked state slot.
    pub fn distribution(&self, s: usize) -> Vec<f64> {
        self.vectors[s]
            .iter()
            .map(|v| vectorized_trace(v).re)
            .collect()
    }

    /// Sums the tracked vectors of slot `s` on the two sides of the
    /// threshold, returned as `(low, high)`.
    pub fn aggregate(&self, s: usize, rule: &InferenceRule) -> (Vec<Complex64>, Vec<Complex64>) {
        let len = self.vectors[s][0].len();
        let mut low = vec![Complex64::ZERO; len];
        let mut high = vec![Complex64::ZERO; len];
        for (count, v) in self.vectors[s].iter().enumerate() {
            let target = match rule.assign(count) {
                Outcome::LowTransmission => &mut low,
                Outcome::HighTransmission => &mut high,
            };
            for (t, x) in target.iter_mut().zip(v) {
                *t += x;
            }
        }
        (low, high)
    }
}

/// Count-blind evolution of a single vectorized state under
/// `Upsilon_0 + Upsilon_1`; cheap enough for very long runs.
#[derive(Debug)]
pub struct UnconditionalEvolver {
    transfer: ComplexMatrix,
    state: Vec<Complex64>,
    round: usize,
}

impl UnconditionalEvolver {
    pub fn new(step: &StepOperators, rho0: &DensityMatrix) -> Self {
        Self {
            transfer: step.unconditional_transfer(),
            state: vectorize(rho0.mat()),
            round: 0,
        }
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn advance(&mut self) {
        self.state = self.transfer.matvec(&self.state);
        self.round += 1;
    }

    pub fn advance_to(&mut self, round: usize) {
        while self.round < round {
            self.advance();
        }
    }

    pub fn state_vector(&self) -> &[Complex64] {
        &self.state
    }

    /// Diagonal occupation of basis state `i` of the current state.
    pub fn population(&self, i: usize) -> f64 {
        let d = (self.state.len() as f64).sqrt().round() as usize;
        self.state[i * d + i].re
    }

    pub fn trace(&self) -> f64 {
        vectorized_trace(&self.state).re
    }
}

/// Choi matrix of a channel given as a transfer matrix; positive
/// semidefinite iff the channel is completely positive.
pub fn choi_matrix(transfer: &ComplexMatrix) -> ComplexMatrix {
    let d = (transfer.rows() as f64).sqrt().round() as usize;
    assert_eq!(d * d, transfer.rows(), "transfer matrix must be d^2 x d^2");
    ComplexMatrix::from_fn(d * d, d * d, |row, col| {
        let (a, b) = (row / d, row % d);
        let (c, e) = (col / d, col % d);
        transfer[(e * d + b, c * d + a)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::HBAR;
    use crate::linalg::c64;
    use crate::models::{
        build_charge_total_hamiltonian, calibrate_timestep, charge_system_hamiltonian,
        ChargeQubitParams,
    };
    use crate::tol;

    fn reference_step(t: f64) -> (ChargeQubitParams, f64, StepOperators) {
        let p = ChargeQubitParams::reference().with_tunneling(t);
        let dt = calibrate_timestep(p.gamma, p.delta_gamma, 0.0).unwrap();
        let step = step_operators(&build_charge_total_hamiltonian(&p), dt).unwrap();
        (p, dt, step)
    }

    #[test]
    fn step_operators_match_closed_form_without_tunneling() {
        let (p, dt, step) = reference_step(0.0);
        assert!(step.completeness_deviation() < tol::UNITARITY_TOL);

        let phase_e = c64(0.0, -p.epsilon * dt / HBAR).exp();
        let phase_g = c64(0.0, p.epsilon * dt / HBAR).exp();
        let angle_e = p.gamma * dt / HBAR;
        let angle_g = (p.gamma - p.delta_gamma) * dt / HBAR;
        assert!((step.m0[(0, 0)] - phase_e * angle_e.cos()).norm() < 1e-10);
        assert!((step.m0[(1, 1)] - phase_g * angle_g.cos()).norm() < 1e-10);
        assert!((step.m1[(0, 0)] - c64(0.0, -1.0) * phase_e * angle_e.sin()).norm() < 1e-10);
        assert!((step.m1[(1, 1)] - c64(0.0, -1.0) * phase_g * angle_g.sin()).norm() < 1e-10);
        assert!(step.m0[(0, 1)].norm() < 1e-12);
        assert!(step.m1[(1, 0)].norm() < 1e-12);

        // Transmission probabilities per computational state.
        let p_e = step.m1[(0, 0)].norm_sqr();
        let p_g = step.m1[(1, 1)].norm_sqr();
        assert!((p_e - angle_e.sin().powi(2)).abs() < 1e-12);
        assert!((p_g - angle_g.sin().powi(2)).abs() < 1e-12);
        assert!(p_e > 0.5 && p_g < 0.5);

        // Without tunneling the two step operators commute.
        let comm = step.m0.matmul(&step.m1).sub(&step.m1.matmul(&step.m0));
        assert!(comm.max_abs() < 1e-12);
    }

    #[test]
    fn decoupled_meter_factorizes() {
        let p = ChargeQubitParams {
            delta_gamma: 0.0,
            ..ChargeQubitParams::reference().with_tunneling(2.0)
        };
        let dt = 0.1;
        let step = step_operators(&build_charge_total_hamiltonian(&p), dt).unwrap();
        let u_sys = crate::linalg::hermitian_propagator(&charge_system_hamiltonian(&p), dt).unwrap();
        let angle = p.gamma * dt / HBAR;
        let expected_m1 = u_sys.scale(c64(0.0, -angle.sin()));
        assert!(step.m1.max_abs_diff(&expected_m1) < 1e-10);
        let expected_m0 = u_sys.scale(c64(angle.cos(), 0.0));
        assert!(step.m0.max_abs_diff(&expected_m0) < 1e-10);
    }

    #[test]
    fn single_round_channels_are_the_step_transfers() {
        let (_, _, step) = reference_step(0.5);
        let channels = evolve_count_resolved(&step, 1).unwrap();
        assert_eq!(channels.n_steps(), 1);
        assert!(channels.channel(0).max_abs_diff(&step.upsilon0) < 1e-14);
        assert!(channels.channel(1).max_abs_diff(&step.upsilon1) < 1e-14);
    }

    #[test]
    fn two_round_channels_expand_by_hand() {
        let (_, _, step) = reference_step(0.5);
        let channels = evolve_count_resolved(&step, 2).unwrap();
        let u0 = &step.upsilon0;
        let u1 = &step.upsilon1;
        assert!(channels.channel(0).max_abs_diff(&u0.matmul(u0)) < 1e-13);
        let mixed = u0.matmul(u1).add(&u1.matmul(u0));
        assert!(channels.channel(1).max_abs_diff(&mixed) < 1e-13);
        assert!(channels.channel(2).max_abs_diff(&u1.matmul(u1)) < 1e-13);
    }

    #[test]
    fn recursion_matches_brute_force_for_small_rounds() {
        let (_, _, step) = reference_step(2.0);
        for n in [1usize, 3, 6] {
            let fast = evolve_count_resolved(&step, n).unwrap();
            let slow = brute_force_channels(&step, n).unwrap();
            for k in 0..=n {
                assert!(
                    fast.channel(k).max_abs_diff(slow.channel(k)) < tol::ORACLE_TOL,
                    "mismatch at n = {n}, k = {k}"
                );
            }
        }
    }

    #[test]
    fn distribution_is_binomial_without_tunneling() {
        let (p, dt, step) = reference_step(0.0);
        let n = 40;
        let channels = evolve_count_resolved(&step, n).unwrap();
        let rho_e = DensityMatrix::basis_state(2, 0);
        let dist = outcome_distribution(&channels, &rho_e).unwrap();
        let p_e = (p.gamma * dt / HBAR).sin().powi(2);
        let mut binom = vec![0.0f64; n + 1];
        for (k, b) in binom.iter_mut().enumerate() {
            let mut log_p = 0.0f64;
            for i in 0..k {
                log_p += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
            }
            log_p += k as f64 * p_e.ln() + (n - k) as f64 * (1.0 - p_e).ln();
            *b = log_p.exp();
        }
        let total: f64 = dist.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        for k in 0..=n {
            assert!((dist[k] - binom[k]).abs() < 1e-9, "count {k}");
        }
    }

    #[test]
    fn unconditional_channel_consistent_with_count_sum() {
        let (_, _, step) = reference_step(2.0);
        let n = 12;
        let channels = evolve_count_resolved(&step, n).unwrap();
        let mut total = ComplexMatrix::zeros(4, 4);
        for k in 0..=n {
            total = total.add(channels.channel(k));
        }
        let mut direct = ComplexMatrix::identity(4);
        let one_step = step.unconditional_transfer();
        for _ in 0..n {
            direct = one_step.matmul(&direct);
        }
        assert!(total.max_abs_diff(&direct) < 1e-9);
        assert!(channels.trace_preservation_error() < 1e-10 * n as f64);
    }

    #[test]
    fn threshold_is_half_for_symmetric_calibration() {
        let (_, _, step) = reference_step(0.0);
        let n = 100;
        let channels = evolve_count_resolved(&step, n).unwrap();
        let p_high = outcome_distribution(&channels, &DensityMatrix::basis_state(2, 0)).unwrap();
        let p_low = outcome_distribution(&channels, &DensityMatrix::basis_state(2, 1)).unwrap();
        let rule = critical_ratio(&p_high, &p_low);
        assert!(rule.monotone);
        assert_eq!(rule.threshold_count, n as i64 / 2);
        assert!((rule.k_critical - 0.5).abs() < 1e-12);
        assert_eq!(rule.assign(n / 2), Outcome::LowTransmission);
        assert_eq!(rule.assign(n / 2 + 1), Outcome::HighTransmission);
        assert_eq!(rule.threshold_count, best_threshold(&p_high, &p_low));
    }

    #[test]
    fn identical_distributions_assign_everything_low() {
        let p = vec![0.25, 0.5, 0.25];
        let rule = critical_ratio(&p, &p);
        assert_eq!(rule.threshold_count, 2);
        assert!((rule.k_critical - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_round_aggregation_returns_step_transfers() {
        let (_, _, step) = reference_step(0.0);
        let channels = evolve_count_resolved(&step, 1).unwrap();
        let rule = InferenceRule {
            threshold_count: 0,
            k_critical: 0.5,
            monotone: true,
            n_steps: 1,
        };
        let (low, high) = aggregate_operations(&channels, &rule);
        assert!(low.max_abs_diff(&step.upsilon0) < 1e-14);
        assert!(high.max_abs_diff(&step.upsilon1) < 1e-14);
    }

    #[test]
    fn streaming_vectors_match_full_channels() {
        let (_, _, step) = reference_step(2.0);
        let n = 15;
        let rho = DensityMatrix::basis_state(2, 0);
        let v0 = vectorize(rho.mat());
        let mut streaming = CountVectorEvolver::forward(&step, vec![v0.clone()]);
        streaming.advance_to(n).unwrap();
        let channels = evolve_count_resolved(&step, n).unwrap();
        for k in 0..=n {
            let expected = channels.channel(k).matvec(&v0);
            let got = &streaming.vectors(0)[k];
            let diff: f64 = expected
                .iter()
                .zip(got)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12, "count {k}");
        }
    }

    #[test]
    fn dual_vectors_reproduce_distributions() {
        let (_, _, step) = reference_step(0.5);
        let n = 12;
        let identity_vec = vectorize(&ComplexMatrix::identity(2));
        let mut dual = CountVectorEvolver::dual(&step, vec![identity_vec]);
        dual.advance_to(n).unwrap();
        let channels = evolve_count_resolved(&step, n).unwrap();
        let rho = DensityMatrix::pure(&[c64(0.6, 0.0), c64(0.0, 0.8)]);
        let dist = outcome_distribution(&channels, &rho).unwrap();
        let v_rho = vectorize(rho.mat());
        for k in 0..=n {
            let effect = &dual.vectors(0)[k];
            let p: Complex64 = effect
                .iter()
                .zip(&v_rho)
                .map(|(e, r)| e.conj() * r)
                .sum();
            assert!((p.re - dist[k]).abs() < 1e-12, "count {k}");
            assert!(p.im.abs() < 1e-12);
        }
    }

    #[test]
    fn unconditional_evolver_preserves_trace() {
        let (_, _, step) = reference_step(2.0);
        let mut evolver = UnconditionalEvolver::new(&step, &DensityMatrix::basis_state(2, 0));
        evolver.advance_to(500);
        assert!((evolver.trace() - 1.0).abs() < 1e-10);
        assert!(evolver.population(0) + evolver.population(1) > 1.0 - 1e-10);
    }

    #[test]
    fn choi_matrices_of_channels_are_positive() {
        let (_, _, step) = reference_step(2.0);
        let channels = evolve_count_resolved(&step, 5).unwrap();
        for k in 0..=5 {
            let choi = choi_matrix(channels.channel(k));
            assert!(choi.is_hermitian(1e-10));
            let (vals, _) = choi.hermitian_eigen().unwrap();
            assert!(
                vals.last().copied().unwrap() > -1e-9,
                "negative Choi eigenvalue at count {k}"
            );
        }
    }

    #[test]
    fn round_cap_is_enforced() {
        let (_, _, step) = reference_step(0.0);
        let result = evolve_count_resolved_with_cap(&step, 50, 10);
        assert!(matches!(result, Err(EngineError::RoundCapExceeded { .. })));
        assert!(matches!(
            brute_force_channels(&step, 20),
            Err(EngineError::BruteForceCapExceeded { .. })
        ));
    }
}
