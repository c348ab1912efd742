//! Hamiltonian builders and parameter records for the charge-qubit and
//! spin-qubit sensor models.
//!
//! Both models share the same structure: a system Hamiltonian, a meter qubit
//! with tunneling amplitude `gamma`, and a system-dependent modulation of that
//! amplitude which is what the sensor actually measures. The product basis
//! always orders the meter fastest, `index = 2 * system_index + meter_index`
//! with meter basis `{B, T}` (bottom, top).
//!
//! Units are ueV for energies, ns for times, and Tesla for magnetic fields.

use num_complex::Complex64;
use thiserror::Error;

use crate::constants;
use crate::linalg::{c64, ComplexMatrix};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter `{name}` = {value} is invalid: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("timestep calibration denominator {denominator:.6} ueV is not positive")]
    NonPositiveDenominator { denominator: f64 },
}

/// Fixed CODATA constants in the unit system of this crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, ueV ns.
    pub hbar: f64,
    /// Elementary charge, Coulomb.
    pub elementary_charge: f64,
    /// Bohr magneton, ueV / T.
    pub mu_b: f64,
}

impl PhysicalConstants {
    pub const fn standard() -> Self {
        Self {
            hbar: constants::HBAR,
            elementary_charge: constants::ELEMENTARY_CHARGE,
            mu_b: constants::BOHR_MAGNETON,
        }
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::standard()
    }
}

/// Basis indices for the charge-qubit system space `{L, R}`.
pub mod charge_basis {
    pub const LEFT: usize = 0;
    pub const RIGHT: usize = 1;
}

/// Basis indices for the two-electron spin system space, fixed order
/// `{S(2,0), S(0,2), up-down, up-up, down-down, down-up}` where the first
/// arrow is the left-dot spin and the second the right-dot spin.
pub mod spin_basis {
    pub const S20: usize = 0;
    pub const S02: usize = 1;
    pub const UP_DOWN: usize = 2;
    pub const UP_UP: usize = 3;
    pub const DOWN_DOWN: usize = 4;
    pub const DOWN_UP: usize = 5;
    pub const DIM: usize = 6;
}

/// Meter basis indices within each system block.
pub mod meter_basis {
    pub const BOTTOM: usize = 0;
    pub const TOP: usize = 1;
}

/// Charge qubit in a double dot monitored by a QPC.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChargeQubitParams {
    /// Half the on-site energy detuning, ueV.
    pub epsilon: f64,
    /// Interdot tunneling amplitude, ueV.
    pub t: f64,
    /// Meter tunneling amplitude, ueV.
    pub gamma: f64,
    /// Reduction of the meter tunneling amplitude when the charge sits on the
    /// right dot, ueV.
    pub delta_gamma: f64,
}

impl ChargeQubitParams {
    /// Reference parameter set used throughout the benchmark scenarios.
    pub fn reference() -> Self {
        Self {
            epsilon: 10.0,
            t: 0.0,
            gamma: 5.0,
            delta_gamma: 0.5,
        }
    }

    pub fn with_tunneling(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.gamma > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "gamma",
                value: self.gamma,
                reason: "meter tunneling amplitude must be positive",
            });
        }
        if self.delta_gamma < 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "delta_gamma",
                value: self.delta_gamma,
                reason: "interaction strength must be nonnegative",
            });
        }
        if self.delta_gamma >= self.gamma {
            return Err(ModelError::InvalidParameter {
                name: "delta_gamma",
                value: self.delta_gamma,
                reason: "weak-measurement regime requires delta_gamma < gamma",
            });
        }
        Ok(())
    }
}

/// Two-electron double dot with Zeeman fields and a spin-charge coupling
/// vector, monitored by the same QPC meter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpinQubitParams {
    /// Half the detuning between the dots, ueV.
    pub epsilon: f64,
    /// Residual interdot tunneling during readout, ueV.
    pub t: f64,
    /// On-site Coulomb repulsion, ueV.
    pub u: f64,
    /// Zeeman energy of the left dot, ueV.
    pub z_left: f64,
    /// Zeeman energy of the right dot, ueV.
    pub z_right: f64,
    /// Meter tunneling amplitude, ueV.
    pub gamma: f64,
    /// Meter amplitude reduction for the doubly occupied right dot, ueV.
    pub delta_gamma: f64,
    /// Spin-charge coupling vector `(delta_x, delta_y, delta_z)` acting on
    /// the right-dot spin, ueV.
    pub delta_vec: [f64; 3],
}

impl SpinQubitParams {
    /// Reference parameter set used throughout the benchmark scenarios.
    pub fn reference() -> Self {
        Self {
            epsilon: 1040.0,
            t: 0.0,
            u: 1000.0,
            z_left: 11.0,
            z_right: 9.0,
            gamma: 5.0,
            delta_gamma: 0.5,
            delta_vec: [0.0, 0.0, 0.0],
        }
    }

    pub fn with_tunneling(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_delta(mut self, delta_x: f64, delta_y: f64, delta_z: f64) -> Self {
        self.delta_vec = [delta_x, delta_y, delta_z];
        self
    }

    /// Zeeman-energy difference between the dots.
    pub fn zeeman_difference(&self) -> f64 {
        self.z_left - self.z_right
    }

    pub fn delta_norm(&self) -> f64 {
        self.delta_vec.iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.u > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "u",
                value: self.u,
                reason: "on-site Coulomb energy must be positive",
            });
        }
        if !(self.gamma > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "gamma",
                value: self.gamma,
                reason: "meter tunneling amplitude must be positive",
            });
        }
        if self.delta_gamma < 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "delta_gamma",
                value: self.delta_gamma,
                reason: "interaction strength must be nonnegative",
            });
        }
        if self.delta_gamma >= self.gamma {
            return Err(ModelError::InvalidParameter {
                name: "delta_gamma",
                value: self.delta_gamma,
                reason: "weak-measurement regime requires delta_gamma < gamma",
            });
        }
        if self.t != 0.0 && self.z_left == self.z_right {
            return Err(ModelError::InvalidParameter {
                name: "z_left",
                value: self.z_left,
                reason: "blockade hybridization analysis needs z_left != z_right when t != 0",
            });
        }
        Ok(())
    }

    /// Soft diagnostics that do not invalidate a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let norm = self.delta_norm();
        if norm > 0.1 * self.gamma {
            out.push(format!(
                "spin-charge coupling |delta| = {norm:.4} ueV is not small against gamma = {:.4} ueV; \
                 perturbative rate formulas may be inaccurate",
                self.gamma
            ));
        }
        out
    }
}

fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
}

/// Charge-qubit system Hamiltonian `epsilon sigma_z + t sigma_x` over `{L, R}`.
pub fn charge_system_hamiltonian(p: &ChargeQubitParams) -> ComplexMatrix {
    pauli_z().scale(c64(p.epsilon, 0.0)).add(&pauli_x().scale(c64(p.t, 0.0)))
}

/// System part of the charge-meter interaction, `-delta_gamma |R><R|`; the
/// full interaction is this matrix tensored with the meter tau_x.
pub fn charge_interaction_system_part(p: &ChargeQubitParams) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(charge_basis::RIGHT, charge_basis::RIGHT)] = c64(-p.delta_gamma, 0.0);
    m
}

/// Full 4x4 charge-plus-meter Hamiltonian in the ordered product basis
/// `{|L,B>, |L,T>, |R,B>, |R,T>}`.
pub fn build_charge_total_hamiltonian(p: &ChargeQubitParams) -> ComplexMatrix {
    let identity2 = ComplexMatrix::identity(2);
    let system = charge_system_hamiltonian(p).kron(&identity2);
    let meter = identity2.kron(&pauli_x().scale(c64(p.gamma, 0.0)));
    let interaction = charge_interaction_system_part(p).kron(&pauli_x());
    system.add(&meter).add(&interaction)
}

/// Right-dot spin operator s_x on the 6-dim two-electron basis. It flips the
/// right-dot spin within the (1,1) sector and annihilates the doubly
/// occupied singlets, which carry no right-dot spin vector.
pub fn right_spin_x() -> ComplexMatrix {
    use spin_basis::*;
    let mut m = ComplexMatrix::zeros(DIM, DIM);
    m[(UP_UP, UP_DOWN)] = Complex64::ONE;
    m[(UP_DOWN, UP_UP)] = Complex64::ONE;
    m[(DOWN_UP, DOWN_DOWN)] = Complex64::ONE;
    m[(DOWN_DOWN, DOWN_UP)] = Complex64::ONE;
    m
}

/// Right-dot spin operator s_y; same support as [`right_spin_x`] with the
/// standard Pauli phases (`s_y |.., up> = i |.., down>`).
pub fn right_spin_y() -> ComplexMatrix {
    use spin_basis::*;
    let mut m = ComplexMatrix::zeros(DIM, DIM);
    m[(UP_DOWN, UP_UP)] = c64(0.0, 1.0);
    m[(UP_UP, UP_DOWN)] = c64(0.0, -1.0);
    m[(DOWN_DOWN, DOWN_UP)] = c64(0.0, 1.0);
    m[(DOWN_UP, DOWN_DOWN)] = c64(0.0, -1.0);
    m
}

/// Right-dot spin operator s_z: +1 on right-spin-up (1,1) states, -1 on
/// right-spin-down ones, 0 on the doubly occupied singlets.
pub fn right_spin_z() -> ComplexMatrix {
    use spin_basis::*;
    let mut m = ComplexMatrix::zeros(DIM, DIM);
    m[(UP_DOWN, UP_DOWN)] = -Complex64::ONE;
    m[(UP_UP, UP_UP)] = Complex64::ONE;
    m[(DOWN_DOWN, DOWN_DOWN)] = -Complex64::ONE;
    m[(DOWN_UP, DOWN_UP)] = Complex64::ONE;
    m
}

/// Two-electron Hubbard Hamiltonian (on-site + tunneling + Zeeman + Coulomb)
/// on the fixed 6-dim basis.
///
/// Matrix elements of the tunneling term carry the fermionic signs that
/// follow from `|s_L s_R> = a_dag_{L s_L} a_dag_{R s_R} |0>` and the singlet
/// conventions `S(2,0) = a_dag_{L up} a_dag_{L down} |0>`,
/// `S(0,2) = a_dag_{R up} a_dag_{R down} |0>`: both singlets couple to
/// `up-down` with `+t` and to `down-up` with `-t`.
pub fn spin_system_hamiltonian(p: &SpinQubitParams) -> ComplexMatrix {
    use spin_basis::*;
    let z_sum = (p.z_left + p.z_right) / 2.0;
    let z_diff = p.zeeman_difference() / 2.0;
    let mut m = ComplexMatrix::zeros(DIM, DIM);
    m[(S20, S20)] = c64(p.epsilon + p.u, 0.0);
    m[(S02, S02)] = c64(-p.epsilon + p.u, 0.0);
    m[(UP_DOWN, UP_DOWN)] = c64(z_diff, 0.0);
    m[(UP_UP, UP_UP)] = c64(z_sum, 0.0);
    m[(DOWN_DOWN, DOWN_DOWN)] = c64(-z_sum, 0.0);
    m[(DOWN_UP, DOWN_UP)] = c64(-z_diff, 0.0);

    let t = c64(p.t, 0.0);
    for singlet in [S20, S02] {
        m[(singlet, UP_DOWN)] = t;
        m[(UP_DOWN, singlet)] = t;
        m[(singlet, DOWN_UP)] = -t;
        m[(DOWN_UP, singlet)] = -t;
    }
    m
}

/// System part of the spin-meter interaction,
/// `-(delta_gamma |S(0,2)><S(0,2)| + delta_vec . s_R)`; the full interaction
/// is this matrix tensored with the meter tau_x.
pub fn spin_interaction_system_part(p: &SpinQubitParams) -> ComplexMatrix {
    use spin_basis::*;
    let mut m = ComplexMatrix::zeros(DIM, DIM);
    m[(S02, S02)] = c64(p.delta_gamma, 0.0);
    let [dx, dy, dz] = p.delta_vec;
    m.axpy(c64(dx, 0.0), &right_spin_x());
    m.axpy(c64(dy, 0.0), &right_spin_y());
    m.axpy(c64(dz, 0.0), &right_spin_z());
    m.scale(c64(-1.0, 0.0))
}

/// Full 12x12 spin-plus-meter Hamiltonian with the meter ordered last.
pub fn build_spin_total_hamiltonian(p: &SpinQubitParams) -> ComplexMatrix {
    let identity2 = ComplexMatrix::identity(2);
    let system = spin_system_hamiltonian(p).kron(&identity2);
    let meter = ComplexMatrix::identity(spin_basis::DIM).kron(&pauli_x().scale(c64(p.gamma, 0.0)));
    let interaction = spin_interaction_system_part(p).kron(&pauli_x());
    system.add(&meter).add(&interaction)
}

/// Timestep between meter resets chosen so that an equal mixture of the two
/// computational states transmits with probability one half:
/// `delta_tau = hbar pi / (4 (gamma - (delta_gamma - delta_z) / 2))`.
///
/// The charge qubit is the `delta_z = 0` special case.
pub fn calibrate_timestep(gamma: f64, delta_gamma: f64, delta_z: f64) -> Result<f64, ModelError> {
    let denominator = gamma - (delta_gamma - delta_z) / 2.0;
    if !(denominator > 0.0) {
        return Err(ModelError::NonPositiveDenominator { denominator });
    }
    Ok(constants::HBAR * std::f64::consts::PI / (4.0 * denominator))
}

/// QPC currents implied by the model: the mean current `e / (2 delta_tau)`
/// and the current contrast between the computational states,
/// `(e / delta_tau) (sin^2(gamma delta_tau / hbar)
///   - sin^2((gamma - delta_gamma) delta_tau / hbar))`.
///
/// Returns `(mean_current, current_contrast)` in Amperes.
pub fn model_currents(delta_tau: f64, gamma: f64, delta_gamma: f64) -> (f64, f64) {
    assert!(delta_tau > 0.0, "delta_tau must be positive");
    let delta_tau_seconds = delta_tau * 1e-9;
    let mean = constants::ELEMENTARY_CHARGE / (2.0 * delta_tau_seconds);
    let p_high = (gamma * delta_tau / constants::HBAR).sin().powi(2);
    let p_low = ((gamma - delta_gamma) * delta_tau / constants::HBAR).sin().powi(2);
    let contrast = constants::ELEMENTARY_CHARGE / delta_tau_seconds * (p_high - p_low);
    (mean, contrast)
}
