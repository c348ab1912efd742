//! g-tensor machinery for magnetic-field readout sweet spots.
//!
//! A hole spin couples to the sensor through a field-dependent modulation of
//! its g-tensor. For a static field `B` the Zeeman axis is `g B` while the
//! sensor modulates the spin along `g' B`; readout is cleanest when the two
//! are parallel, leaving no transverse coupling to drive leakage. Those
//! directions are the real right eigenvectors of `g^-1 g'`, and this module
//! finds them, decomposes the coupling for arbitrary directions, and
//! generates spherical maps of the normalized components.
//!
//! All vectors live in the lab frame; energies are in ueV and fields in
//! Tesla.

use rayon::prelude::*;
use thiserror::Error;

use crate::constants::BOHR_MAGNETON;
use crate::tol::REAL_EIGENVALUE_TOL;

/// Errors from g-tensor computations.
#[derive(Debug, Error)]
pub enum SweetSpotError {
    /// The static g-tensor must be invertible to pose the eigenproblem.
    #[error("g-tensor is singular (|det g| = {0:.2e} <= 1e-9)")]
    SingularGTensor(f64),
    /// Field direction must be a unit vector.
    #[error("field direction has norm {0}, expected 1 within 1e-12")]
    NotAUnitVector(f64),
    /// The Zeeman axis g B vanished, so there is no frame to decompose in.
    #[error("g B = 0 for this direction; the Zeeman axis is undefined")]
    DegenerateZeemanAxis,
    /// The direction grid must resolve both angles.
    #[error("direction grid {0}x{1} is too coarse, need at least 2x2")]
    GridTooCoarse(usize, usize),
}

type Vec3 = [f64; 3];
type Mat3 = [[f64; 3]; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn matvec(m: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in a.iter().enumerate() {
        for j in 0..3 {
            out[i][j] = row[0] * b[0][j] + row[1] * b[1][j] + row[2] * b[2][j];
        }
    }
    out
}

fn det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse(m: &Mat3, determinant: f64) -> Mat3 {
    let inv_det = 1.0 / determinant;
    let mut adj = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            // Cofactor of entry (j, i), assembled without index gymnastics.
            let r = [(j + 1) % 3, (j + 2) % 3];
            let c = [(i + 1) % 3, (i + 2) % 3];
            adj[i][j] = (m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]]) * inv_det;
        }
    }
    adj
}

/// Static g-tensor together with its sensor-induced modulation.
///
/// `g` maps the magnetic field to the Zeeman axis of the right dot; `g_prime`
/// is the derivative of that map with respect to the sensor excitation, so
/// `g' B` gives the spin-charge coupling axis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GTensorPair {
    pub g: Mat3,
    pub g_prime: Mat3,
}

impl GTensorPair {
    pub fn new(g: Mat3, g_prime: Mat3) -> Result<Self, SweetSpotError> {
        let d = det(&g);
        if d.abs() <= 1e-9 {
            return Err(SweetSpotError::SingularGTensor(d.abs()));
        }
        Ok(Self { g, g_prime })
    }

    /// A synthetic demonstration pair with exactly one real eigenpair.
    ///
    /// Not fitted to any device: the g-factors are typical hole values and
    /// the modulation mixes the in-plane axes so the other two eigenvalues
    /// form a complex-conjugate pair.
    pub fn demo() -> Self {
        Self {
            g: [[2.0, 0.0, 0.0], [0.0, 2.5, 0.0], [0.0, 0.0, 9.0]],
            g_prime: [[0.1, 0.8, 0.0], [-0.8, 0.1, 0.0], [0.0, 0.0, 0.9]],
        }
    }
}

/// A static magnetic field given as unit direction and magnitude in Tesla.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FieldConfig {
    pub direction: Vec3,
    pub magnitude: f64,
}

impl FieldConfig {
    pub fn new(direction: Vec3, magnitude: f64) -> Result<Self, SweetSpotError> {
        let n = norm(&direction);
        if (n - 1.0).abs() > 1e-12 {
            return Err(SweetSpotError::NotAUnitVector(n));
        }
        Ok(Self {
            direction,
            magnitude,
        })
    }

    /// Unit direction from polar angles in radians (theta from +z).
    pub fn from_angles(theta: f64, phi: f64, magnitude: f64) -> Self {
        Self {
            direction: [
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ],
            magnitude,
        }
    }

    fn vector(&self) -> Vec3 {
        scale(&self.direction, self.magnitude)
    }
}

/// Spin-charge coupling vector Delta = mu_B (g' B) / 2 in ueV.
pub fn coupling_vector(pair: &GTensorPair, field: &FieldConfig) -> Vec3 {
    scale(&matvec(&pair.g_prime, &field.vector()), 0.5 * BOHR_MAGNETON)
}

/// Coupling components resolved along and across the Zeeman axis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeltaDecomposition {
    /// Longitudinal coupling Delta . z' in ueV, signed.
    pub delta_z: f64,
    /// Transverse coupling magnitude |Delta - delta_z z'| in ueV.
    pub delta_x: f64,
    /// Zeeman energy mu_B |g B| in ueV.
    pub zeeman_energy: f64,
}

/// Resolves the coupling vector in the frame set by the Zeeman axis
/// `z' = g B / |g B|`.
///
/// The azimuthal freedom around `z'` lets any transverse component be rotated
/// onto a single axis, so only its magnitude `delta_x` is physical. These are
/// exactly the quantities the spin-readout Hamiltonian consumes.
pub fn decompose_delta(
    pair: &GTensorPair,
    field: &FieldConfig,
) -> Result<DeltaDecomposition, SweetSpotError> {
    let zeeman_vec = matvec(&pair.g, &field.vector());
    let zeeman_norm = norm(&zeeman_vec);
    if zeeman_norm == 0.0 {
        return Err(SweetSpotError::DegenerateZeemanAxis);
    }
    let axis = scale(&zeeman_vec, 1.0 / zeeman_norm);
    let delta = coupling_vector(pair, field);
    let delta_z = dot(&delta, &axis);
    let transverse = sub(&delta, &scale(&axis, delta_z));
    Ok(DeltaDecomposition {
        delta_z,
        delta_x: norm(&transverse),
        zeeman_energy: BOHR_MAGNETON * zeeman_norm,
    })
}

/// One sweet-spot direction with its eigenvalue of `g^-1 g'`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweetSpot {
    /// Unit field direction; sign fixed so the largest-magnitude component
    /// is positive (both signs are physically equivalent).
    pub direction: Vec3,
    /// Eigenvalue, i.e. the ratio of modulation to static Zeeman response
    /// along this direction.
    pub eigenvalue: f64,
}

/// Result of the sweet-spot eigenproblem.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweetSpotReport {
    /// Real eigenpairs sorted by descending eigenvalue; the first maximizes
    /// the longitudinal coupling and with it the measurement rate.
    pub spots: Vec<SweetSpot>,
    /// True when the spectrum is fully degenerate (g' proportional to g), in
    /// which case every direction is a sweet spot and `spots` lists the
    /// coordinate axes as representatives.
    pub degenerate: bool,
    /// True when a repeated eigenvalue has a deficient eigenspace, so fewer
    /// independent directions exist than the multiplicity suggests.
    pub defective: bool,
    /// Explanation attached to the degenerate or defective cases.
    pub note: Option<String>,
}

impl SweetSpotReport {
    /// The direction maximizing the measurement rate, when any exists.
    pub fn recommended(&self) -> Option<&SweetSpot> {
        self.spots.first()
    }
}

/// Tolerance for treating two eigenvalues of the 3x3 problem as a repeated
/// root, relative to the spectral scale.
const REPEATED_ROOT_REL_TOL: f64 = 1e-7;

/// Relative deviation below which g^-1 g' counts as a multiple of the
/// identity. Cubic root finding smears a triple root by the cube root of
/// machine epsilon, far too much to recover the multiplicity afterwards, so
/// proportional tensors are recognized structurally before the cubic runs.
const PROPORTIONAL_REL_TOL: f64 = 1e-9;

/// Real roots of x^3 + p x + q (depressed cubic), with a flag for the
/// repeated-root boundary.
fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    let discriminant = -4.0 * p * p * p - 27.0 * q * q;
    let scale_cube = (p.abs().powi(3)).max(q * q).max(f64::MIN_POSITIVE);
    if discriminant > REAL_EIGENVALUE_TOL * scale_cube {
        // Three distinct real roots, trigonometric form.
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect()
    } else if discriminant < -REAL_EIGENVALUE_TOL * scale_cube {
        // One real root, Cardano form.
        let half_q = 0.5 * q;
        let root = (half_q * half_q + p * p * p / 27.0).sqrt();
        let u = (-half_q + root).cbrt();
        let v = (-half_q - root).cbrt();
        vec![u + v]
    } else {
        // Boundary: at least two equal real roots.
        if p.abs() < REAL_EIGENVALUE_TOL * scale_cube.cbrt().max(1e-300) {
            vec![0.0, 0.0, 0.0]
        } else {
            let double = -3.0 * q / (2.0 * p);
            let single = 3.0 * q / p;
            vec![single, double, double]
        }
    }
}

/// Real eigenvalues of a real 3x3 matrix by the analytic characteristic
/// polynomial, polished by Newton iterations on the original cubic.
fn real_eigenvalues(a: &Mat3) -> Vec<f64> {
    let tr = a[0][0] + a[1][1] + a[2][2];
    let a2 = matmul(a, a);
    let tr2 = a2[0][0] + a2[1][1] + a2[2][2];
    let c2 = tr;
    let c1 = 0.5 * (tr * tr - tr2);
    let c0 = det(a);
    // lambda^3 - c2 lambda^2 + c1 lambda - c0 = 0; depress with
    // lambda = x + c2/3.
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = -2.0 * c2 * c2 * c2 / 27.0 + c2 * c1 / 3.0 - c0;
    let mut roots = depressed_cubic_roots(p, q);
    for x in roots.iter_mut() {
        let mut lambda = *x + shift;
        for _ in 0..5 {
            let f = ((lambda - c2) * lambda + c1) * lambda - c0;
            let df = (3.0 * lambda - 2.0 * c2) * lambda + c1;
            if df.abs() < f64::MIN_POSITIVE.sqrt() {
                break;
            }
            let step = f / df;
            lambda -= step;
            if step.abs() < 1e-15 * lambda.abs().max(1.0) {
                break;
            }
        }
        *x = lambda;
    }
    roots
}

/// Null-space vectors of (a - lambda I): one vector for rank 2, two
/// orthonormal vectors for rank 1, empty for (numerical) rank 3.
fn eigenvectors_for(a: &Mat3, lambda: f64, scale_hint: f64) -> Vec<Vec3> {
    let mut shifted = *a;
    for i in 0..3 {
        shifted[i][i] -= lambda;
    }
    let rows = [shifted[0], shifted[1], shifted[2]];
    // The eigenvector is orthogonal to every row; cross products of row
    // pairs find it without elimination.
    let candidates = [
        cross(&rows[0], &rows[1]),
        cross(&rows[1], &rows[2]),
        cross(&rows[2], &rows[0]),
    ];
    let tol = 1e-9 * scale_hint.max(1e-300);
    let best = candidates
        .iter()
        .map(|c| (norm(c), *c))
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .unwrap();
    if best.0 > tol * tol {
        return vec![scale(&best.1, 1.0 / best.0)];
    }
    // All cross products vanished: the rows are collinear (rank <= 1). The
    // null space is the plane orthogonal to the largest row.
    let big_row = rows
        .iter()
        .map(|r| (norm(r), *r))
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .unwrap();
    if big_row.0 <= tol {
        // rank 0: every vector is an eigenvector; represented by the axes.
        return vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    let n = scale(&big_row.1, 1.0 / big_row.0);
    // Build an orthonormal basis of the orthogonal plane.
    let seed = if n[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let u = {
        let raw = cross(&n, &seed);
        scale(&raw, 1.0 / norm(&raw))
    };
    let v = cross(&n, &u);
    vec![u, v]
}

fn canonical_sign(v: &Vec3) -> Vec3 {
    let mut idx = 0;
    for i in 1..3 {
        if v[i].abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        scale(v, -1.0)
    } else {
        *v
    }
}

/// Field directions along which the sensor modulates only the magnitude of
/// the Zeeman field, not its direction.
///
/// These are the real right eigenpairs of `g^-1 g'`, sorted by descending
/// eigenvalue; orienting the field along the first maximizes the
/// longitudinal coupling and hence the measurement rate. A real 3x3 matrix
/// generically has one or three real eigenpairs.
pub fn sweet_spot_directions(pair: &GTensorPair) -> Result<SweetSpotReport, SweetSpotError> {
    let d = det(&pair.g);
    if d.abs() <= 1e-9 {
        return Err(SweetSpotError::SingularGTensor(d.abs()));
    }
    let a = matmul(&inverse(&pair.g, d), &pair.g_prime);

    // Proportional tensors make `a` a multiple of the identity; catch that
    // exactly here because the characteristic cubic cannot resolve a triple
    // root to better than ~1e-5 relative.
    let trace_third = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let a_scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1e-300);
    let identity_deviation = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .fold(0.0f64, |acc, (i, j)| {
            let target = if i == j { trace_third } else { 0.0 };
            acc.max((a[i][j] - target).abs())
        });
    if identity_deviation <= PROPORTIONAL_REL_TOL * a_scale {
        let spots = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            .iter()
            .map(|axis| SweetSpot {
                direction: *axis,
                eigenvalue: trace_third,
            })
            .collect();
        return Ok(SweetSpotReport {
            spots,
            degenerate: true,
            defective: false,
            note: Some(format!(
                "spectrum is fully degenerate at eigenvalue {trace_third:.6}; every field \
                 direction is a sweet spot (coordinate axes listed as representatives)"
            )),
        });
    }

    let eigenvalues = real_eigenvalues(&a);
    let spectral_scale = eigenvalues
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(l.abs()))
        .max(1e-300);

    // Group repeated eigenvalues so each distinct root is solved once.
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &l in &eigenvalues {
        match distinct
            .iter_mut()
            .find(|(v, _)| (*v - l).abs() <= REPEATED_ROOT_REL_TOL * spectral_scale)
        {
            Some(entry) => entry.1 += 1,
            None => distinct.push((l, 1)),
        }
    }

    let mut spots = Vec::new();
    let mut degenerate = false;
    let mut defective = false;
    let mut notes = Vec::new();
    for &(lambda, multiplicity) in &distinct {
        let vectors = eigenvectors_for(&a, lambda, spectral_scale);
        if vectors.len() == 3 {
            degenerate = true;
            notes.push(format!(
                "spectrum is fully degenerate at eigenvalue {lambda:.6}; every field \
                 direction is a sweet spot (coordinate axes listed as representatives)"
            ));
        } else if vectors.len() < multiplicity {
            defective = true;
            notes.push(format!(
                "eigenvalue {lambda:.6} has multiplicity {multiplicity} but only \
                 {} independent direction(s)",
                vectors.len()
            ));
        }
        for v in vectors {
            spots.push(SweetSpot {
                direction: canonical_sign(&v),
                eigenvalue: lambda,
            });
        }
    }
    spots.sort_by(|a, b| b.eigenvalue.total_cmp(&a.eigenvalue));
    Ok(SweetSpotReport {
        spots,
        degenerate,
        defective,
        note: if notes.is_empty() {
            None
        } else {
            Some(notes.join("; "))
        },
    })
}

/// One grid point of a spherical direction sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    pub theta_deg: f64,
    pub phi_deg: f64,
    /// Transverse coupling over |Delta|, in [0, 1]; zero at sweet spots.
    pub delta_x_norm: f64,
    /// Longitudinal coupling over |Delta|, in [-1, 1].
    pub delta_z_norm: f64,
    pub delta_x_uev: f64,
    pub delta_z_uev: f64,
    pub zeeman_uev: f64,
}

/// Spherical map of the coupling decomposition over field directions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirectionSweep {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Row-major over (theta, phi): index = i_theta * n_phi + i_phi.
    pub points: Vec<SweepPoint>,
}

/// Evaluates [`decompose_delta`] on a (theta, phi) grid covering the sphere.
///
/// Theta spans [0, pi] inclusive of both poles with `n_theta` points; phi
/// spans [0, 2 pi) with `n_phi` points. Normalized components divide by
/// |Delta| at each direction so the maps are field-magnitude independent;
/// directions where Delta vanishes entirely report zero for both.
pub fn direction_sweep(
    pair: &GTensorPair,
    n_theta: usize,
    n_phi: usize,
    magnitude: f64,
) -> Result<DirectionSweep, SweetSpotError> {
    if n_theta < 2 || n_phi < 2 {
        return Err(SweetSpotError::GridTooCoarse(n_theta, n_phi));
    }
    let points: Result<Vec<Vec<SweepPoint>>, SweetSpotError> = (0..n_theta)
        .into_par_iter()
        .map(|i| {
            let theta = std::f64::consts::PI * i as f64 / (n_theta - 1) as f64;
            let mut row = Vec::with_capacity(n_phi);
            for j in 0..n_phi {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
                let field = FieldConfig::from_angles(theta, phi, magnitude);
                let dec = decompose_delta(pair, &field)?;
                let total = (dec.delta_x * dec.delta_x + dec.delta_z * dec.delta_z).sqrt();
                let (x_norm, z_norm) = if total > 0.0 {
                    (dec.delta_x / total, dec.delta_z / total)
                } else {
                    (0.0, 0.0)
                };
                row.push(SweepPoint {
                    theta_deg: theta.to_degrees(),
                    phi_deg: phi.to_degrees(),
                    delta_x_norm: x_norm,
                    delta_z_norm: z_norm,
                    delta_x_uev: dec.delta_x,
                    delta_z_uev: dec.delta_z,
                    zeeman_uev: dec.zeeman_energy,
                });
            }
            Ok(row)
        })
        .collect();
    Ok(DirectionSweep {
        n_theta,
        n_phi,
        points: points?.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity() -> Mat3 {
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    }

    fn random_pair(rng: &mut ChaCha8Rng) -> GTensorPair {
        loop {
            let mut g = [[0.0; 3]; 3];
            let mut gp = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let diag = if i == j { 3.0 } else { 0.0 };
                    g[i][j] = diag + rng.random_range(-1.0..1.0);
                    gp[i][j] = rng.random_range(-0.5..0.5);
                }
            }
            if let Ok(pair) = GTensorPair::new(g, gp) {
                return pair;
            }
        }
    }

    #[test]
    fn coupling_vector_basics() {
        let zero_mod = GTensorPair::new(identity(), [[0.0; 3]; 3]).unwrap();
        let field = FieldConfig::new([0.0, 0.0, 1.0], 1.0).unwrap();
        assert_eq!(coupling_vector(&zero_mod, &field), [0.0, 0.0, 0.0]);

        let unit_mod = GTensorPair::new(identity(), identity()).unwrap();
        let delta = coupling_vector(&unit_mod, &field);
        assert!((delta[2] - 28.941_909_03).abs() < 1e-6);
        assert_eq!(delta[0], 0.0);

        let double = FieldConfig::new([0.0, 0.0, 1.0], 2.0).unwrap();
        let delta2 = coupling_vector(&unit_mod, &double);
        assert!((delta2[2] - 2.0 * delta[2]).abs() < 1e-12);
    }

    #[test]
    fn field_config_rejects_non_unit_directions() {
        assert!(FieldConfig::new([0.0, 0.0, 2.0], 1.0).is_err());
        assert!(FieldConfig::new([0.6, 0.0, 0.8], 1.0).is_ok());
        let from_angles = FieldConfig::from_angles(0.7, 2.1, 1.0);
        assert!((norm(&from_angles.direction) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn parallel_modulation_has_no_transverse_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = [[2.1, 0.3, 0.0], [0.1, 3.0, -0.2], [0.0, 0.4, 8.8]];
        let alpha = 0.37;
        let mut gp = g;
        for row in gp.iter_mut() {
            for v in row.iter_mut() {
                *v *= alpha;
            }
        }
        let pair = GTensorPair::new(g, gp).unwrap();
        for _ in 0..10 {
            let theta = rng.random_range(0.0..std::f64::consts::PI);
            let phi = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            let field = FieldConfig::from_angles(theta, phi, 0.5);
            let dec = decompose_delta(&pair, &field).unwrap();
            assert!(dec.delta_x.abs() < 1e-10, "delta_x = {}", dec.delta_x);
        }
    }

    #[test]
    fn antisymmetric_modulation_is_fully_transverse() {
        let g = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 10.0]];
        let gp = [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]];
        let pair = GTensorPair::new(g, gp).unwrap();
        let field = FieldConfig::new([0.0, 0.0, 1.0], 1.0).unwrap();
        let dec = decompose_delta(&pair, &field).unwrap();
        let expected = 0.5 * BOHR_MAGNETON;
        assert!(dec.delta_z.abs() < 1e-12);
        assert!((dec.delta_x - expected).abs() < 1e-9);
    }

    #[test]
    fn decomposition_satisfies_pythagoras() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let pair = random_pair(&mut rng);
            let theta = rng.random_range(0.0..std::f64::consts::PI);
            let phi = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            let field = FieldConfig::from_angles(theta, phi, 1.0);
            let delta = coupling_vector(&pair, &field);
            let dec = decompose_delta(&pair, &field).unwrap();
            let total_sq = dot(&delta, &delta);
            let recon = dec.delta_x * dec.delta_x + dec.delta_z * dec.delta_z;
            assert!((total_sq - recon).abs() < 1e-12 * total_sq.max(1.0));
        }
    }

    #[test]
    fn diagonal_eigenproblem_by_hand() {
        let pair = GTensorPair::new(
            [[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 9.0]],
            [[0.1, 0.0, 0.0], [0.0, 0.4, 0.0], [0.0, 0.0, 0.9]],
        )
        .unwrap();
        let report = sweet_spot_directions(&pair).unwrap();
        assert_eq!(report.spots.len(), 3);
        assert!(!report.degenerate && !report.defective);
        let eigenvalues: Vec<f64> = report.spots.iter().map(|s| s.eigenvalue).collect();
        assert!((eigenvalues[0] - 0.4 / 3.0).abs() < 1e-12);
        assert!((eigenvalues[1] - 0.1).abs() < 1e-12);
        assert!((eigenvalues[2] - 0.05).abs() < 1e-12);
        let recommended = report.recommended().unwrap();
        assert!((recommended.direction[1] - 1.0).abs() < 1e-10);
        assert!(recommended.direction[0].abs() < 1e-10);
    }

    #[test]
    fn proportional_tensors_are_fully_degenerate() {
        let g = [[2.0, 0.5, 0.0], [0.5, 3.0, 0.1], [0.0, 0.1, 7.0]];
        let alpha = 0.25;
        let mut gp = g;
        for row in gp.iter_mut() {
            for v in row.iter_mut() {
                *v *= alpha;
            }
        }
        let pair = GTensorPair::new(g, gp).unwrap();
        let report = sweet_spot_directions(&pair).unwrap();
        assert!(report.degenerate);
        assert!(report.note.is_some());
        for spot in &report.spots {
            assert!((spot.eigenvalue - alpha).abs() < 1e-9);
        }
    }

    #[test]
    fn diagonal_proportional_tensors_are_fully_degenerate() {
        // Diagonal entries whose ratios agree only up to rounding used to
        // slip past the cubic solver as three scattered simple roots.
        let pair = GTensorPair::new(
            [[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 5.0]],
            [[0.8, 0.0, 0.0], [0.0, 1.2, 0.0], [0.0, 0.0, 2.0]],
        )
        .unwrap();
        let report = sweet_spot_directions(&pair).unwrap();
        assert!(report.degenerate);
        assert_eq!(report.spots.len(), 3);
        for spot in &report.spots {
            assert!((spot.eigenvalue - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn defective_matrix_is_flagged() {
        // g = I makes the eigenproblem matrix equal g', a Jordan block at 1.
        let pair = GTensorPair::new(
            identity(),
            [[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]],
        )
        .unwrap();
        let report = sweet_spot_directions(&pair).unwrap();
        assert!(report.defective);
        assert_eq!(report.spots.len(), 2);
        assert!((report.spots[0].eigenvalue - 2.0).abs() < 1e-9);
        assert!((report.spots[1].eigenvalue - 1.0).abs() < 1e-9);
        // The lone eigenvector of the Jordan block is the x axis.
        assert!((report.spots[1].direction[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sweet_spots_null_the_transverse_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let pair = random_pair(&mut rng);
            let report = sweet_spot_directions(&pair).unwrap();
            assert!(!report.spots.is_empty());
            for spot in &report.spots {
                let field = FieldConfig::new(spot.direction, 1.0).unwrap();
                let dec = decompose_delta(&pair, &field).unwrap();
                let total = (dec.delta_x * dec.delta_x + dec.delta_z * dec.delta_z).sqrt();
                if total > 1e-12 {
                    assert!(
                        dec.delta_x / total < 1e-8,
                        "residual transverse fraction {}",
                        dec.delta_x / total
                    );
                }
            }
        }
    }

    #[test]
    fn real_eigenpair_count_is_one_or_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..30 {
            let pair = random_pair(&mut rng);
            let report = sweet_spot_directions(&pair).unwrap();
            if !report.degenerate && !report.defective {
                assert!(
                    report.spots.len() == 1 || report.spots.len() == 3,
                    "unexpected count {}",
                    report.spots.len()
                );
            }
        }
    }

    #[test]
    fn rescaling_modulation_scales_eigenvalues_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pair = random_pair(&mut rng);
        let report = sweet_spot_directions(&pair).unwrap();
        let c = 4.5;
        let mut scaled = pair;
        for row in scaled.g_prime.iter_mut() {
            for v in row.iter_mut() {
                *v *= c;
            }
        }
        let scaled_report = sweet_spot_directions(&scaled).unwrap();
        assert_eq!(report.spots.len(), scaled_report.spots.len());
        for (a, b) in report.spots.iter().zip(&scaled_report.spots) {
            assert!((a.eigenvalue * c - b.eigenvalue).abs() < 1e-10 * c);
            for k in 0..3 {
                assert!((a.direction[k] - b.direction[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn demo_pair_has_exactly_one_real_eigenpair() {
        let report = sweet_spot_directions(&GTensorPair::demo()).unwrap();
        assert_eq!(report.spots.len(), 1);
        assert!(!report.degenerate && !report.defective);
        // The lone sweet spot of the demo tensors is the z axis.
        assert!((report.spots[0].direction[2] - 1.0).abs() < 1e-9);
        assert!((report.spots[0].eigenvalue - 0.1).abs() < 1e-9);
    }

    #[test]
    fn sweep_of_proportional_tensors_is_purely_longitudinal() {
        let g = [[2.0, 0.0, 0.3], [0.0, 3.0, 0.0], [0.3, 0.0, 7.0]];
        let mut gp = g;
        for row in gp.iter_mut() {
            for v in row.iter_mut() {
                *v *= 0.1;
            }
        }
        let pair = GTensorPair::new(g, gp).unwrap();
        let sweep = direction_sweep(&pair, 7, 8, 1.0).unwrap();
        assert_eq!(sweep.points.len(), 7 * 8);
        for p in &sweep.points {
            assert!(p.delta_x_norm.abs() < 1e-9);
            assert!((p.delta_z_norm.abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sweep_zeros_coincide_with_axis_sweet_spots() {
        let pair = GTensorPair::new(
            [[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 9.0]],
            [[0.1, 0.0, 0.0], [0.0, 0.4, 0.0], [0.0, 0.0, 0.9]],
        )
        .unwrap();
        // theta in {0, 45, 90, 135, 180} deg, phi in {0, 90, 180, 270} deg
        // puts all six coordinate-axis points on the grid.
        let sweep = direction_sweep(&pair, 5, 4, 1.0).unwrap();
        let mut axis_points = 0;
        for p in &sweep.points {
            let on_pole = p.theta_deg == 0.0 || p.theta_deg == 180.0;
            let on_equator_axis = (p.theta_deg - 90.0).abs() < 1e-9
                && (p.phi_deg / 90.0 - (p.phi_deg / 90.0).round()).abs() < 1e-9;
            if on_pole || on_equator_axis {
                axis_points += 1;
                assert!(
                    p.delta_x_norm < 1e-10,
                    "axis point ({}, {}) has delta_x_norm {}",
                    p.theta_deg,
                    p.phi_deg,
                    p.delta_x_norm
                );
            }
            assert!((0.0..=1.0 + 1e-12).contains(&p.delta_x_norm));
            assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&p.delta_z_norm));
        }
        // 2 poles x 4 phi values + 4 equatorial axis directions.
        assert_eq!(axis_points, 12);
    }

    #[test]
    fn sweep_rejects_degenerate_grids() {
        let pair = GTensorPair::demo();
        assert!(matches!(
            direction_sweep(&pair, 1, 8, 1.0),
            Err(SweetSpotError::GridTooCoarse(1, 8))
        ));
    }

    #[test]
    fn singular_g_is_rejected() {
        let singular = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert!(matches!(
            GTensorPair::new(singular, identity()),
            Err(SweetSpotError::SingularGTensor(_))
        ));
    }
}
