//! Simulation of charge-sensor-based readout for charge and spin qubits.
//!
//! The sensor (a quantum point contact) is modeled as a meter qubit with basis
//! `{|B>, |T>}` that is repeatedly initialized in `|B>`, entangled with the
//! data system for a short timestep, and projectively read out. Each
//! repetition transmits (`|T>`, outcome 1) or blocks (`|B>`, outcome 0) one
//! probe electron; after `N` repetitions the record is a bitstring whose
//! transmitted count `N_t` carries the readout information.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: small dense complex matrices, Hermitian propagators,
//!   density matrices, and channel transfer matrices.
//! * [`models`]: double-dot charge and two-electron spin Hamiltonians, the
//!   sensor coupling, timestep calibration, and sensor currents.
//! * [`engine`]: per-step measurement operators, count-resolved channel
//!   evolution (quadratic-cost recursion plus a brute-force oracle), outcome
//!   distributions, and maximum-likelihood inference.
//! * [`metrics`]: readout benchmarks (infidelity, mixedness, leakage) and
//!   rate extraction by fitting.
//! * [`analytics`]: closed-form rate and infidelity predictions used to
//!   cross-validate the numerics.
//! * [`sweetspot`]: g-tensor algebra locating magnetic-field directions that
//!   suppress measurement-induced leakage.
//! * [`sme`]: a jump-unraveled stochastic-master-equation description of the
//!   same sensor, for comparing rate conventions.
//! * [`protocols`]: a two-round leakage-detection experiment and its error
//!   budget estimator.
//!
//! # Units
//!
//! Energies are in micro-electronvolts (ueV), times in nanoseconds (ns),
//! rates in 1/ns, magnetic fields in tesla. The reduced Planck constant in
//! these units is [`constants::HBAR`] ueV ns.
//!
//! # Vectorization convention
//!
//! Density matrices are vectorized by stacking columns: for a `d x d` matrix
//! `rho`, entry `vec(rho)[i*d + k] = rho[k][i]`. A map `rho -> M rho M^dag`
//! then acts as the transfer matrix `conj(M) (x) M` with the Kronecker index
//! rule `T[i*d+k, j*d+l] = conj(M[i][j]) * M[k][l]`. For a qubit ordered
//! `{e, g}` this stacks `(rho_ee, rho_ge, rho_eg, rho_gg)`. All transfer
//! matrices in this crate use this convention.

pub mod analytics;
pub mod constants;
pub mod engine;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod protocols;
pub mod sme;
pub mod sweetspot;
pub mod tol;

pub use linalg::{ComplexMatrix, DensityMatrix};
pub use models::{ChargeQubitParams, PhysicalConstants, SpinQubitParams};
