//! Physical constants in the crate's unit system (ueV, ns, tesla).

/// Reduced Planck constant, ueV ns.
pub const HBAR: f64 = 0.6582119569;

/// Elementary charge, coulomb. Used only to convert transmission
/// probabilities per timestep into sensor currents in ampere.
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;

/// Bohr magneton, ueV per tesla.
pub const BOHR_MAGNETON: f64 = 57.88381806;
