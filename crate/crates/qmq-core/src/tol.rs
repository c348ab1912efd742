//! Centralized numerical tolerances.
//!
//! Every validation threshold used across the crate lives here so that the
//! accepted error budget is visible in one place and consistent between
//! construction-time checks and tests.

/// Largest acceptable deviation from Hermiticity, `max |A - A^dag|`.
///
/// Hamiltonians and density matrices are built from real parameters by
/// explicit symmetrization-free formulas, so any asymmetry is pure rounding;
/// a handful of additions stay far below 1e-12 for entries of order 1e3 ueV.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Largest acceptable deviation from unitarity or completeness.
///
/// Propagators come from an iterative Hermitian eigendecomposition, so the
/// residual of `U^dag U = I` (equivalently `M0^dag M0 + M1^dag M1 = I` for
/// the per-step measurement operators) accumulates O(n) rotations of
/// rounding each; 1e-10 leaves two orders of headroom at dimension 12.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Tolerance for cross-validation of two independent computation routes of
/// the same quantity (for example recursive versus brute-force channels).
pub const ORACLE_TOL: f64 = 1e-9;

/// Density-matrix trace must equal one within this bound at construction.
pub const TRACE_TOL: f64 = 1e-12;

/// Most negative eigenvalue a matrix may have and still count as positive
/// semidefinite (density operators, Choi matrices).
pub const PSD_TOL: f64 = 1e-10;

/// Relative off-diagonal norm at which the Jacobi eigensolver stops.
pub const EIGEN_CONVERGENCE_TOL: f64 = 1e-14;

/// An eigenvalue of a real 3x3 matrix counts as real when its imaginary
/// part is below this fraction of the largest eigenvalue magnitude.
pub const REAL_EIGENVALUE_TOL: f64 = 1e-9;

/// Relative convergence target for scalar root finding and 1-parameter fits.
pub const ROOT_FIND_TOL: f64 = 1e-6;

/// Relative tolerance for calling two outcome probabilities tied when
/// locating the likelihood threshold.
///
/// The two outcome distributions are computed through independent channel
/// evolutions, so mathematically equal masses differ by accumulated roundoff
/// of order `N * 1e-16`; genuine likelihood gaps adjacent to the threshold
/// are larger by many orders of magnitude, so 1e-9 only absorbs exact ties.
pub const TIE_BREAK_REL_TOL: f64 = 1e-9;

/// Half-width, in radians, of the window around a phase resonance inside
/// which the perturbative rate formulas are flagged as invalid.
pub const RESONANCE_GUARD_HALFWIDTH: f64 = 0.2;

/// Smallest outcome probability a conditional state may be normalized by.
pub const VANISHING_PROBABILITY_TOL: f64 = 1e-15;

/// Maximum Hermiticity or idempotency deviation for a matrix passed as an
/// orthogonal projector.
pub const PROJECTOR_TOL: f64 = 1e-10;
