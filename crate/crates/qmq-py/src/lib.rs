//! Python bindings for the charge-sensor readout simulation.
//!
//! The module mirrors the core crate: qubit parameter sets, single-step
//! measurement operators, count-resolved channel evolution, inference rules
//! and readout benchmarks, the closed-form rate laws, sweet-spot searches,
//! the jump-unraveling rate comparison, and the two-round leakage protocol.
//! Density matrices and operators cross the boundary as nested lists of
//! Python complex numbers; structured results come back as dicts.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qmq_core::engine::{self, Outcome};
use qmq_core::linalg::vectorize;
use qmq_core::models::{charge_basis, spin_basis};
use qmq_core::{
    analytics, metrics, models, protocols, sme, sweetspot, ChargeQubitParams, ComplexMatrix,
    DensityMatrix, SpinQubitParams,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<ComplexMatrix> {
    let nr = rows.len();
    if nr == 0 {
        return Err(PyValueError::new_err("matrix needs at least one row"));
    }
    let nc = rows[0].len();
    if rows.iter().any(|r| r.len() != nc) {
        return Err(PyValueError::new_err("matrix rows have unequal lengths"));
    }
    Ok(ComplexMatrix::from_fn(nr, nc, |r, c| rows[r][c]))
}

fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn density_from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<DensityMatrix> {
    DensityMatrix::new(matrix_from_rows(rows)?).map_err(value_err)
}

/// Charge qubit in a double quantum dot next to the sensor constriction.
#[pyclass(name = "ChargeQubitParams", from_py_object)]
#[derive(Clone)]
struct PyChargeQubitParams {
    inner: ChargeQubitParams,
}

#[pymethods]
impl PyChargeQubitParams {
    /// Detuning, tunneling, mean coupling, and coupling contrast in ueV.
    #[new]
    #[pyo3(signature = (epsilon=10.0, t=0.0, gamma=5.0, delta_gamma=0.5))]
    fn new(epsilon: f64, t: f64, gamma: f64, delta_gamma: f64) -> PyResult<Self> {
        let inner = ChargeQubitParams {
            epsilon,
            t,
            gamma,
            delta_gamma,
        };
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    /// The parameter point used throughout the benchmark scenarios.
    #[staticmethod]
    fn reference() -> Self {
        Self {
            inner: ChargeQubitParams::reference(),
        }
    }

    fn with_tunneling(&self, t: f64) -> Self {
        Self {
            inner: self.inner.with_tunneling(t),
        }
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn delta_gamma(&self) -> f64 {
        self.inner.delta_gamma
    }

    fn __repr__(&self) -> String {
        format!(
            "ChargeQubitParams(epsilon={}, t={}, gamma={}, delta_gamma={})",
            self.inner.epsilon, self.inner.t, self.inner.gamma, self.inner.delta_gamma
        )
    }
}

/// Singlet-triplet spin qubit in the (1,1)/(0,2) charge configuration.
#[pyclass(name = "SpinQubitParams", from_py_object)]
#[derive(Clone)]
struct PySpinQubitParams {
    inner: SpinQubitParams,
}

#[pymethods]
impl PySpinQubitParams {
    #[new]
    #[pyo3(signature = (epsilon=1040.0, t=0.0, u=1000.0, z_left=11.0, z_right=9.0, gamma=5.0, delta_gamma=0.5, delta=(0.0, 0.0, 0.0)))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        epsilon: f64,
        t: f64,
        u: f64,
        z_left: f64,
        z_right: f64,
        gamma: f64,
        delta_gamma: f64,
        delta: (f64, f64, f64),
    ) -> PyResult<Self> {
        let inner = SpinQubitParams {
            epsilon,
            t,
            u,
            z_left,
            z_right,
            gamma,
            delta_gamma,
            delta_vec: [delta.0, delta.1, delta.2],
        };
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    /// The parameter point used throughout the benchmark scenarios.
    #[staticmethod]
    fn reference() -> Self {
        Self {
            inner: SpinQubitParams::reference(),
        }
    }

    fn with_tunneling(&self, t: f64) -> Self {
        Self {
            inner: self.inner.with_tunneling(t),
        }
    }

    fn with_delta(&self, delta_x: f64, delta_y: f64, delta_z: f64) -> Self {
        Self {
            inner: self.inner.with_delta(delta_x, delta_y, delta_z),
        }
    }

    /// Difference of the left and right Zeeman splittings in ueV.
    fn zeeman_difference(&self) -> f64 {
        self.inner.zeeman_difference()
    }

    fn delta_norm(&self) -> f64 {
        self.inner.delta_norm()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn u(&self) -> f64 {
        self.inner.u
    }

    #[getter]
    fn z_left(&self) -> f64 {
        self.inner.z_left
    }

    #[getter]
    fn z_right(&self) -> f64 {
        self.inner.z_right
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn delta_gamma(&self) -> f64 {
        self.inner.delta_gamma
    }

    #[getter]
    fn delta(&self) -> (f64, f64, f64) {
        let [x, y, z] = self.inner.delta_vec;
        (x, y, z)
    }

    fn __repr__(&self) -> String {
        format!(
            "SpinQubitParams(epsilon={}, t={}, u={}, z_left={}, z_right={}, gamma={}, \
             delta_gamma={}, delta={:?})",
            self.inner.epsilon,
            self.inner.t,
            self.inner.u,
            self.inner.z_left,
            self.inner.z_right,
            self.inner.gamma,
            self.inner.delta_gamma,
            self.inner.delta_vec
        )
    }
}

/// Measurement operators for one meter electron and their transfer forms.
#[pyclass(name = "StepOperators")]
struct PyStepOperators {
    inner: engine::StepOperators,
}

#[pymethods]
impl PyStepOperators {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    /// System-space operator for a reflected meter electron.
    fn m0(&self) -> Vec<Vec<Complex64>> {
        matrix_to_rows(&self.inner.m0)
    }

    /// System-space operator for a transmitted meter electron.
    fn m1(&self) -> Vec<Vec<Complex64>> {
        matrix_to_rows(&self.inner.m1)
    }

    fn completeness_deviation(&self) -> f64 {
        self.inner.completeness_deviation()
    }
}

/// Count-resolved channels after a fixed number of rounds.
#[pyclass(name = "CountResolvedChannels")]
struct PyCountResolvedChannels {
    inner: engine::CountResolvedChannels,
}

#[pymethods]
impl PyCountResolvedChannels {
    fn n_steps(&self) -> usize {
        self.inner.n_steps()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Transfer matrix of the channel with the given transmitted count.
    fn channel(&self, count: usize) -> PyResult<Vec<Vec<Complex64>>> {
        if count > self.inner.n_steps() {
            return Err(PyValueError::new_err(format!(
                "count {count} exceeds the {} rounds evolved",
                self.inner.n_steps()
            )));
        }
        Ok(matrix_to_rows(self.inner.channel(count)))
    }

    /// Probability of each transmitted count for the given initial state.
    fn distribution(&self, rho: Vec<Vec<Complex64>>) -> PyResult<Vec<f64>> {
        let rho = density_from_rows(rho)?;
        if rho.mat().rows() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "state dimension {} does not match channel dimension {}",
                rho.mat().rows(),
                self.inner.dim()
            )));
        }
        Ok(self.inner.distribution(&rho))
    }

    fn trace_preservation_error(&self) -> f64 {
        self.inner.trace_preservation_error()
    }
}

/// Maximum-likelihood threshold on the transmitted count.
#[pyclass(name = "InferenceRule", from_py_object)]
#[derive(Clone)]
struct PyInferenceRule {
    inner: engine::InferenceRule,
}

#[pymethods]
impl PyInferenceRule {
    #[getter]
    fn threshold_count(&self) -> i64 {
        self.inner.threshold_count
    }

    #[getter]
    fn k_critical(&self) -> f64 {
        self.inner.k_critical
    }

    #[getter]
    fn monotone(&self) -> bool {
        self.inner.monotone
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.n_steps
    }

    /// Assigns a transmitted count to `"high"` or `"low"`.
    fn assign(&self, count: usize) -> &'static str {
        match self.inner.assign(count) {
            Outcome::HighTransmission => "high",
            Outcome::LowTransmission => "low",
        }
    }
}

/// Unconditional (count-summed) evolution of one initial state.
#[pyclass(name = "UnconditionalEvolver")]
struct PyUnconditionalEvolver {
    inner: engine::UnconditionalEvolver,
}

#[pymethods]
impl PyUnconditionalEvolver {
    #[new]
    fn new(step: &PyStepOperators, rho: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let rho = density_from_rows(rho)?;
        if rho.mat().rows() != step.inner.dim {
            return Err(PyValueError::new_err(format!(
                "state dimension {} does not match step dimension {}",
                rho.mat().rows(),
                step.inner.dim
            )));
        }
        Ok(Self {
            inner: engine::UnconditionalEvolver::new(&step.inner, &rho),
        })
    }

    #[getter]
    fn round(&self) -> usize {
        self.inner.round()
    }

    /// Advances forward to the given round (no-op when already past it).
    fn advance_to(&mut self, round: usize) {
        self.inner.advance_to(round);
    }

    /// Diagonal occupation of a basis state of the current state.
    fn population(&self, index: usize) -> f64 {
        self.inner.population(index)
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// Expectation value of an operator in the current state.
    fn expectation(&self, operator: Vec<Vec<Complex64>>) -> PyResult<Complex64> {
        let op = matrix_from_rows(operator)?;
        Ok(metrics::expectation_from_vector(
            &op,
            self.inner.state_vector(),
        ))
    }
}

#[pyfunction]
fn charge_step(params: PyChargeQubitParams, delta_tau: f64) -> PyResult<PyStepOperators> {
    let h = models::build_charge_total_hamiltonian(&params.inner);
    Ok(PyStepOperators {
        inner: engine::step_operators(&h, delta_tau).map_err(value_err)?,
    })
}

#[pyfunction]
fn spin_step(params: PySpinQubitParams, delta_tau: f64) -> PyResult<PyStepOperators> {
    let h = models::build_spin_total_hamiltonian(&params.inner);
    Ok(PyStepOperators {
        inner: engine::step_operators(&h, delta_tau).map_err(value_err)?,
    })
}

/// Count-resolved channels after `n` rounds via the quadratic recursion.
#[pyfunction]
fn evolve_count_resolved(step: &PyStepOperators, n: usize) -> PyResult<PyCountResolvedChannels> {
    Ok(PyCountResolvedChannels {
        inner: engine::evolve_count_resolved(&step.inner, n).map_err(value_err)?,
    })
}

/// Density matrix of a computational basis state as nested lists.
#[pyfunction]
fn basis_density(dim: usize, index: usize) -> PyResult<Vec<Vec<Complex64>>> {
    if index >= dim {
        return Err(PyValueError::new_err(format!(
            "basis index {index} out of range for dimension {dim}"
        )));
    }
    Ok(matrix_to_rows(DensityMatrix::basis_state(dim, index).mat()))
}

/// Projector onto the charge-system eigenstate adiabatically connected to a
/// basis state, as a density matrix.
#[pyfunction]
fn charge_eigenstate(params: PyChargeQubitParams, index: usize) -> PyResult<Vec<Vec<Complex64>>> {
    let h = models::charge_system_hamiltonian(&params.inner);
    let projector = metrics::eigenstate_projector(&h, index).map_err(value_err)?;
    Ok(matrix_to_rows(&projector))
}

/// Projector onto the spin-system eigenstate adiabatically connected to a
/// basis state, as a density matrix.
#[pyfunction]
fn spin_eigenstate(params: PySpinQubitParams, index: usize) -> PyResult<Vec<Vec<Complex64>>> {
    let h = models::spin_system_hamiltonian(&params.inner);
    let projector = metrics::eigenstate_projector(&h, index).map_err(value_err)?;
    Ok(matrix_to_rows(&projector))
}

/// Projector onto the leaked triplet states of the spin model.
#[pyfunction]
fn spin_leakage_projector() -> Vec<Vec<Complex64>> {
    matrix_to_rows(&metrics::spin_leakage_projector())
}

/// Maximum-likelihood count threshold for two outcome distributions.
#[pyfunction]
fn critical_ratio(p_high: Vec<f64>, p_low: Vec<f64>) -> PyResult<PyInferenceRule> {
    if p_high.len() != p_low.len() || p_high.is_empty() {
        return Err(PyValueError::new_err(
            "distributions must be nonempty and equally long",
        ));
    }
    Ok(PyInferenceRule {
        inner: engine::critical_ratio(&p_high, &p_low),
    })
}

/// Misassignment probabilities (miss_high, miss_low) under a rule.
#[pyfunction]
fn assignment_errors(
    p_high: Vec<f64>,
    p_low: Vec<f64>,
    rule: PyInferenceRule,
) -> PyResult<(f64, f64)> {
    Ok(metrics::assignment_errors(&p_high, &p_low, &rule.inner))
}

/// Readout infidelity, the mean of the two misassignment probabilities.
#[pyfunction]
fn infidelity_from_distributions(
    p_high: Vec<f64>,
    p_low: Vec<f64>,
    rule: PyInferenceRule,
) -> PyResult<f64> {
    Ok(metrics::infidelity_from_distributions(
        &p_high, &p_low, &rule.inner,
    ))
}

/// Sampling interval in ns with one-electrode phases matched to pi/2.
#[pyfunction]
fn calibrate_timestep(gamma: f64, delta_gamma: f64, delta_z: f64) -> PyResult<f64> {
    models::calibrate_timestep(gamma, delta_gamma, delta_z).map_err(value_err)
}

/// Mean sensor current and current contrast in amperes.
#[pyfunction]
fn model_currents(delta_tau: f64, gamma: f64, delta_gamma: f64) -> (f64, f64) {
    models::model_currents(delta_tau, gamma, delta_gamma)
}

/// Single-step transmission-amplitude contrast between the two outcomes.
#[pyfunction]
fn transmission_contrast(delta_gamma: f64, delta_z: f64, delta_tau: f64) -> f64 {
    analytics::transmission_contrast(delta_gamma, delta_z, delta_tau)
}

/// Measurement rate in 1/ns as (exact, leading_order).
#[pyfunction]
fn measurement_rate(delta_gamma: f64, delta_z: f64, delta_tau: f64) -> PyResult<(f64, f64)> {
    let rates = analytics::measurement_rate(delta_gamma, delta_z, delta_tau).map_err(value_err)?;
    Ok((rates.exact, rates.leading_order))
}

/// Measurement-induced dephasing rate in 1/ns as (exact, quadratic).
#[pyfunction]
fn dephasing_rate(delta_p: f64, delta_tau: f64) -> PyResult<(f64, f64)> {
    let rates = analytics::dephasing_rate(delta_p, delta_tau).map_err(value_err)?;
    Ok((rates.exact, rates.quadratic))
}

/// Backaction-induced relaxation rate of the charge qubit as (value, valid).
///
/// `valid` is false inside the sampled-phase resonance windows where the
/// second-order formula breaks down.
#[pyfunction]
fn relaxation_rate_charge(
    t: f64,
    delta_gamma: f64,
    epsilon: f64,
    delta_tau: f64,
) -> PyResult<(f64, bool)> {
    let p = analytics::relaxation_rate_charge(t, delta_gamma, epsilon, delta_tau)
        .map_err(value_err)?;
    Ok((p.value, p.valid))
}

/// Leakage rate out of the readout subspace as (value, valid).
#[pyfunction]
fn leakage_rate(delta_x: f64, z_right: f64, delta_tau: f64) -> PyResult<(f64, bool)> {
    let p = analytics::leakage_rate(delta_x, z_right, delta_tau).map_err(value_err)?;
    Ok((p.value, p.valid))
}

/// Error-minimizing integration time in ns as (closed_form, refined).
#[pyfunction]
fn ideal_integration_time(gamma_m: f64, gamma_rel: f64) -> PyResult<(f64, f64)> {
    let t = analytics::ideal_integration_time(gamma_m, gamma_rel).map_err(value_err)?;
    Ok((t.closed_form, t.refined))
}

/// Gaussian tail estimate of the count-threshold inference error.
#[pyfunction]
fn gaussian_inference_error(delta_p: f64, n: usize) -> f64 {
    analytics::gaussian_inference_error(delta_p, n)
}

/// Model infidelity after integrating for `tau` ns.
#[pyfunction]
fn infidelity_estimate(gamma_m: f64, gamma_rel: f64, tau: f64) -> f64 {
    analytics::infidelity_estimate(gamma_m, gamma_rel, tau)
}

/// Field directions along which the sensor modulates only the magnitude of
/// the Zeeman field; returns a dict with `spots`, `degenerate`, `defective`,
/// and `note`.
#[pyfunction]
fn sweet_spot_directions<'py>(
    py: Python<'py>,
    g: [[f64; 3]; 3],
    g_prime: [[f64; 3]; 3],
) -> PyResult<Bound<'py, PyDict>> {
    let pair = sweetspot::GTensorPair::new(g, g_prime).map_err(value_err)?;
    let report = sweetspot::sweet_spot_directions(&pair).map_err(value_err)?;
    let out = PyDict::new(py);
    let spots: Vec<Bound<'py, PyDict>> = report
        .spots
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("direction", (s.direction[0], s.direction[1], s.direction[2]))?;
            d.set_item("eigenvalue", s.eigenvalue)?;
            Ok(d)
        })
        .collect::<PyResult<_>>()?;
    out.set_item("spots", spots)?;
    out.set_item("degenerate", report.degenerate)?;
    out.set_item("defective", report.defective)?;
    out.set_item("note", report.note)?;
    Ok(out)
}

/// Longitudinal/transverse split of the gradient for a field direction;
/// returns (delta_z, delta_x, zeeman_energy) in ueV.
#[pyfunction]
fn decompose_delta(
    g: [[f64; 3]; 3],
    g_prime: [[f64; 3]; 3],
    direction: [f64; 3],
    magnitude: f64,
) -> PyResult<(f64, f64, f64)> {
    let pair = sweetspot::GTensorPair::new(g, g_prime).map_err(value_err)?;
    let field = sweetspot::FieldConfig::new(direction, magnitude).map_err(value_err)?;
    let dec = sweetspot::decompose_delta(&pair, &field).map_err(value_err)?;
    Ok((dec.delta_z, dec.delta_x, dec.zeeman_energy))
}

/// Rate laws of this model against the diffusive-meter equation with
/// matched parameters, as a dict of rates and ratios.
#[pyfunction]
fn compare_rates<'py>(
    py: Python<'py>,
    gamma: f64,
    delta_gamma: f64,
    epsilon: f64,
    t: f64,
    delta_tau: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let c = sme::compare_rates(gamma, delta_gamma, epsilon, t, delta_tau);
    let out = PyDict::new(py);
    out.set_item("qmq_gamma_m", c.qmq_gamma_m)?;
    out.set_item("qmq_gamma_d", c.qmq_gamma_d)?;
    out.set_item("qmq_gamma_rel", c.qmq_gamma_rel)?;
    out.set_item("qmq_rel_valid", c.qmq_rel_valid)?;
    out.set_item("sme_gamma_m", c.sme_gamma_m)?;
    out.set_item("sme_gamma_d", c.sme_gamma_d)?;
    out.set_item("sme_gamma_rel", c.sme_gamma_rel)?;
    out.set_item("ratio_m", c.ratio_m)?;
    out.set_item("ratio_d", c.ratio_d)?;
    out.set_item("ratio_rel", c.ratio_rel)?;
    Ok(out)
}

/// Outcome-pair probabilities of the two-round protocol for a given error
/// budget, as a dict.
#[pyfunction]
#[pyo3(signature = (leakage, eps_up, eps_down, q1=0.0, q2=0.0))]
fn experiment_probabilities<'py>(
    py: Python<'py>,
    leakage: f64,
    eps_up: f64,
    eps_down: f64,
    q1: f64,
    q2: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let budget = protocols::ErrorBudget {
        leakage,
        eps_up,
        eps_down,
        q1,
        q2,
    };
    budget.validate().map_err(value_err)?;
    let p = protocols::experiment_probabilities(&budget);
    let out = PyDict::new(py);
    out.set_item("p00", p.p00)?;
    out.set_item("p01", p.p01)?;
    out.set_item("p10", p.p10)?;
    out.set_item("p11", p.p11)?;
    out.set_item("p0_down_up", p.p0_down_up)?;
    out.set_item("p0_up_down", p.p0_up_down)?;
    Ok(out)
}

/// Inverts measured outcome probabilities to an error budget; returns a
/// dict with the budget fields and the list of clipped entries.
#[pyfunction]
#[pyo3(signature = (p00, p01, p10, p11, p0_down_up=0.0, p0_up_down=0.0))]
fn estimate_error_budget<'py>(
    py: Python<'py>,
    p00: f64,
    p01: f64,
    p10: f64,
    p11: f64,
    p0_down_up: f64,
    p0_up_down: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let estimate = protocols::estimate_error_budget(&protocols::ExperimentProbabilities {
        p00,
        p01,
        p10,
        p11,
        p0_down_up,
        p0_up_down,
    });
    let out = PyDict::new(py);
    out.set_item("leakage", estimate.budget.leakage)?;
    out.set_item("eps_up", estimate.budget.eps_up)?;
    out.set_item("eps_down", estimate.budget.eps_down)?;
    out.set_item("q1", estimate.budget.q1)?;
    out.set_item("q2", estimate.budget.q2)?;
    out.set_item("clipped", estimate.clipped)?;
    Ok(out)
}

/// Runs the two-round leakage experiment on the full engine and returns a
/// dict with sampled frequencies, exact probabilities, the channel-side
/// true leakage, and the estimated budget.
#[pyfunction]
#[pyo3(signature = (params, n_steps_per_round, shots, seed, q1=0.0, q2=0.0))]
fn simulate_leakage_experiment<'py>(
    py: Python<'py>,
    params: PySpinQubitParams,
    n_steps_per_round: usize,
    shots: usize,
    seed: u64,
    q1: f64,
    q2: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let result = protocols::simulate_leakage_experiment_with_errors(
        &params.inner,
        n_steps_per_round,
        shots,
        seed,
        q1,
        q2,
    )
    .map_err(value_err)?;
    let estimate = result.estimated_budget();
    let out = PyDict::new(py);
    out.set_item("frequencies", result.frequencies)?;
    out.set_item("exact", result.exact)?;
    out.set_item("shots", result.shots)?;
    out.set_item("n_steps", result.n_steps)?;
    out.set_item("round_duration", result.round_duration)?;
    out.set_item("true_leakage", result.true_leakage)?;
    out.set_item("estimated_leakage", estimate.budget.leakage)?;
    out.set_item("statistics_warning", result.statistics_warning)?;
    Ok(out)
}

/// Population outside the readout subspace of a spin-model state.
#[pyfunction]
fn leakage_population(rho: Vec<Vec<Complex64>>) -> PyResult<f64> {
    let rho = density_from_rows(rho)?;
    let projector = metrics::spin_leakage_projector();
    if rho.mat().rows() != projector.rows() {
        return Err(PyValueError::new_err(format!(
            "leakage is defined on the {}-dimensional spin model, got dimension {}",
            projector.rows(),
            rho.mat().rows()
        )));
    }
    Ok(metrics::expectation_from_vector(&projector, &vectorize(rho.mat())).re)
}

#[pymodule]
fn qmq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("HBAR", qmq_core::constants::HBAR)?;
    m.add("CHARGE_LEFT", charge_basis::LEFT)?;
    m.add("CHARGE_RIGHT", charge_basis::RIGHT)?;
    m.add("SPIN_S20", spin_basis::S20)?;
    m.add("SPIN_S02", spin_basis::S02)?;
    m.add("SPIN_UP_DOWN", spin_basis::UP_DOWN)?;
    m.add("SPIN_UP_UP", spin_basis::UP_UP)?;
    m.add("SPIN_DOWN_DOWN", spin_basis::DOWN_DOWN)?;
    m.add("SPIN_DOWN_UP", spin_basis::DOWN_UP)?;
    m.add_class::<PyChargeQubitParams>()?;
    m.add_class::<PySpinQubitParams>()?;
    m.add_class::<PyStepOperators>()?;
    m.add_class::<PyCountResolvedChannels>()?;
    m.add_class::<PyInferenceRule>()?;
    m.add_class::<PyUnconditionalEvolver>()?;
    m.add_function(wrap_pyfunction!(charge_step, m)?)?;
    m.add_function(wrap_pyfunction!(spin_step, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_count_resolved, m)?)?;
    m.add_function(wrap_pyfunction!(basis_density, m)?)?;
    m.add_function(wrap_pyfunction!(charge_eigenstate, m)?)?;
    m.add_function(wrap_pyfunction!(spin_eigenstate, m)?)?;
    m.add_function(wrap_pyfunction!(spin_leakage_projector, m)?)?;
    m.add_function(wrap_pyfunction!(critical_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(assignment_errors, m)?)?;
    m.add_function(wrap_pyfunction!(infidelity_from_distributions, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_timestep, m)?)?;
    m.add_function(wrap_pyfunction!(model_currents, m)?)?;
    m.add_function(wrap_pyfunction!(transmission_contrast, m)?)?;
    m.add_function(wrap_pyfunction!(measurement_rate, m)?)?;
    m.add_function(wrap_pyfunction!(dephasing_rate, m)?)?;
    m.add_function(wrap_pyfunction!(relaxation_rate_charge, m)?)?;
    m.add_function(wrap_pyfunction!(leakage_rate, m)?)?;
    m.add_function(wrap_pyfunction!(ideal_integration_time, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_inference_error, m)?)?;
    m.add_function(wrap_pyfunction!(infidelity_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(sweet_spot_directions, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_delta, m)?)?;
    m.add_function(wrap_pyfunction!(compare_rates, m)?)?;
    m.add_function(wrap_pyfunction!(experiment_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_error_budget, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_leakage_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(leakage_population, m)?)?;
    Ok(())
}
