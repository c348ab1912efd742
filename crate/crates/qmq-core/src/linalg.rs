//! Small dense complex linear algebra tuned for dimensions up to 36.
//!
//! Everything here is hand-rolled on purpose: the matrices are tiny (system
//! dimensions 2 and 6, transfer matrices 4x4 and 36x36), exact control over
//! evaluation order keeps results bit-reproducible across thread counts, and
//! propagators are required to be unitary to near machine precision, which an
//! eigendecomposition of the Hermitian generator guarantees by construction.

use num_complex::Complex64;
use thiserror::Error;

use crate::constants::HBAR;
use crate::tol;

/// Shorthand constructor for a complex number.
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("shape mismatch: {lhs_rows}x{lhs_cols} vs {rhs_rows}x{rhs_cols}")]
    ShapeMismatch {
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },
    #[error("matrix deviates from Hermitian by {deviation:.3e} (tolerance {tolerance:.3e})")]
    NotHermitian { deviation: f64, tolerance: f64 },
    #[error("eigensolver did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },
    #[error("trace is {trace:.12} instead of 1 (tolerance {tolerance:.3e})")]
    TraceNotOne { trace: f64, tolerance: f64 },
    #[error("matrix has eigenvalue {eigenvalue:.3e} below the positivity tolerance -{tolerance:.3e}")]
    NotPositive { eigenvalue: f64, tolerance: f64 },
    #[error("vector length {len} is not a perfect square")]
    NotSquareLength { len: usize },
}

/// Dense complex matrix with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    /// Builds a matrix from nested row slices of real entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let nr = rows.len();
        let nc = if nr == 0 { 0 } else { rows[0].len() };
        Self::from_fn(nr, nc, |r, c| c64(rows[r][c], 0.0))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }

    /// Adds `factor * other` into `self` in place.
    pub fn axpy(&mut self, factor: Complex64, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a_ik) in a_row.iter().enumerate() {
                if a_ik == Complex64::ZERO {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, &b_kj) in out_row.iter_mut().zip(b_row) {
                    *o += a_ik * b_kj;
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Complex64::ZERO, |acc, (a, x)| acc + a * x)
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a.conj()).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn trace(&self) -> Complex64 {
        debug_assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry-wise deviation from `A = A^dag`.
    pub fn hermiticity_deviation(&self) -> f64 {
        debug_assert!(self.is_square());
        let mut dev: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                dev = dev.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tolerance: f64) -> bool {
        self.is_square() && self.hermiticity_deviation() <= tolerance
    }

    /// Kronecker product; `(A (x) B)[i*p+k, j*q+l] = A[i,j] B[k,l]` for `B`
    /// of shape `p x q`.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = (other.rows, other.cols);
        let mut out = Self::zeros(self.rows * p, self.cols * q);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a_ij = self[(i, j)];
                if a_ij == Complex64::ZERO {
                    continue;
                }
                for k in 0..p {
                    for l in 0..q {
                        out[(i * p + k, j * q + l)] = a_ij * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Returns eigenvalues in descending order and the unitary of
    /// eigenvectors as columns, with each column's largest-magnitude entry
    /// rotated to the positive real axis so the output is deterministic.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let dev = self.hermiticity_deviation();
        if dev > tol::HERMITICITY_TOL * (1.0 + self.max_abs()) {
            return Err(LinalgError::NotHermitian {
                deviation: dev,
                tolerance: tol::HERMITICITY_TOL,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        let total_norm = a.frobenius_norm().max(f64::MIN_POSITIVE);

        let off_norm = |m: &ComplexMatrix| -> f64 {
            let mut s = 0.0;
            for r in 0..n {
                for c in 0..n {
                    if r != c {
                        s += m[(r, c)].norm_sqr();
                    }
                }
            }
            s.sqrt()
        };

        const MAX_SWEEPS: usize = 60;
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            if off_norm(&a) <= tol::EIGEN_CONVERGENCE_TOL * total_norm {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let abs_apq = apq.norm();
                    if abs_apq <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let phase = apq / abs_apq;
                    // tan(2 theta) = 2|apq| / (app - aqq), smaller-angle root.
                    let tau = (app - aqq) / (2.0 * abs_apq);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    // Columns: col_p <- c col_p + conj(phase) s col_q,
                    //          col_q <- -phase s col_p + c col_q.
                    for r in 0..n {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        a[(r, p)] = c * arp + phase.conj() * s * arq;
                        a[(r, q)] = -phase * s * arp + c * arq;
                    }
                    // Rows: row_p <- c row_p + phase s row_q,
                    //       row_q <- -conj(phase) s row_p + c row_q.
                    for col in 0..n {
                        let apc = a[(p, col)];
                        let aqc = a[(q, col)];
                        a[(p, col)] = c * apc + phase * s * aqc;
                        a[(q, col)] = -phase.conj() * s * apc + c * aqc;
                    }
                    for r in 0..n {
                        let vrp = v[(r, p)];
                        let vrq = v[(r, q)];
                        v[(r, p)] = c * vrp + phase.conj() * s * vrq;
                        v[(r, q)] = -phase * s * vrp + c * vrq;
                    }
                }
            }
        }
        if !converged && off_norm(&a) > tol::EIGEN_CONVERGENCE_TOL * total_norm {
            return Err(LinalgError::EigenNoConvergence { sweeps: MAX_SWEEPS });
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(j, j)].re.partial_cmp(&a[(i, i)].re).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
        let mut vectors = Self::zeros(n, n);
        for (new_col, &old_col) in order.iter().enumerate() {
            // Deterministic phase: largest-magnitude component real positive.
            let mut best = 0usize;
            let mut best_norm = 0.0;
            for r in 0..n {
                let nrm = v[(r, old_col)].norm();
                if nrm > best_norm {
                    best_norm = nrm;
                    best = r;
                }
            }
            let pivot = v[(best, old_col)];
            let phase = if pivot.norm() > 0.0 {
                pivot.conj() / pivot.norm()
            } else {
                Complex64::ONE
            };
            for r in 0..n {
                vectors[(r, new_col)] = v[(r, old_col)] * phase;
            }
        }
        Ok((eigenvalues, vectors))
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Propagator `U = exp(-i H delta_tau / hbar)` of a Hermitian generator,
/// computed by eigendecomposition so that `U` is unitary to the tolerance of
/// the eigensolver rather than to the truncation error of a series.
///
/// `h` is in ueV, `delta_tau` in ns.
pub fn hermitian_propagator(h: &ComplexMatrix, delta_tau: f64) -> Result<ComplexMatrix, LinalgError> {
    let (eigenvalues, v) = h.hermitian_eigen()?;
    let n = h.rows();
    let mut phases = ComplexMatrix::zeros(n, n);
    for (i, lambda) in eigenvalues.iter().enumerate() {
        let angle = -lambda * delta_tau / HBAR;
        phases[(i, i)] = c64(angle.cos(), angle.sin());
    }
    let u = v.matmul(&phases).matmul(&v.dagger());
    let residual = u.dagger().matmul(&u).max_abs_diff(&ComplexMatrix::identity(n));
    if residual > tol::UNITARITY_TOL {
        return Err(LinalgError::EigenNoConvergence { sweeps: 0 });
    }
    Ok(u)
}

/// Column-stacking vectorization: `vec(rho)[i*d + k] = rho[k][i]`.
///
/// For a qubit in the ordered basis `{e, g}` this produces
/// `(rho_ee, rho_ge, rho_eg, rho_gg)`.
pub fn vectorize(rho: &ComplexMatrix) -> Vec<Complex64> {
    debug_assert!(rho.is_square());
    let d = rho.rows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        for k in 0..d {
            v.push(rho[(k, i)]);
        }
    }
    v
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &[Complex64]) -> Result<ComplexMatrix, LinalgError> {
    let d2 = v.len();
    let d = (d2 as f64).sqrt().round() as usize;
    if d * d != d2 {
        return Err(LinalgError::NotSquareLength { len: d2 });
    }
    Ok(ComplexMatrix::from_fn(d, d, |k, i| v[i * d + k]))
}

/// Transfer matrix of the conjugation map `rho -> M rho M^dag` in the
/// column-stacking convention: `conj(M) (x) M`, so that
/// `T[i*d+k, j*d+l] = conj(M[i][j]) M[k][l]`.
pub fn transfer_matrix(m: &ComplexMatrix) -> ComplexMatrix {
    m.conj().kron(m)
}

/// Trace of the matrix represented by a vectorized density operator.
pub fn vectorized_trace(v: &[Complex64]) -> Complex64 {
    let d = (v.len() as f64).sqrt().round() as usize;
    debug_assert_eq!(d * d, v.len());
    (0..d).map(|i| v[i * d + i]).sum()
}

/// Density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace, and positivity at construction.
    pub fn new(mat: ComplexMatrix) -> Result<Self, LinalgError> {
        if !mat.is_square() {
            return Err(LinalgError::NotSquare {
                rows: mat.rows(),
                cols: mat.cols(),
            });
        }
        let dev = mat.hermiticity_deviation();
        if dev > tol::HERMITICITY_TOL {
            return Err(LinalgError::NotHermitian {
                deviation: dev,
                tolerance: tol::HERMITICITY_TOL,
            });
        }
        let trace = mat.trace();
        if (trace.re - 1.0).abs() > tol::TRACE_TOL || trace.im.abs() > tol::TRACE_TOL {
            return Err(LinalgError::TraceNotOne {
                trace: trace.re,
                tolerance: tol::TRACE_TOL,
            });
        }
        let (eigenvalues, _) = mat.hermitian_eigen()?;
        if let Some(&smallest) = eigenvalues.last() {
            if smallest < -tol::PSD_TOL {
                return Err(LinalgError::NotPositive {
                    eigenvalue: smallest,
                    tolerance: tol::PSD_TOL,
                });
            }
        }
        Ok(Self { mat })
    }

    /// Wraps a matrix that is trusted to be a density operator already
    /// (internal fast path for states produced by trace-preserving maps).
    pub fn new_unchecked(mat: ComplexMatrix) -> Self {
        Self { mat }
    }

    /// Pure state `|psi><psi|` from an unnormalized ket.
    pub fn pure(ket: &[Complex64]) -> Self {
        let norm_sqr: f64 = ket.iter().map(|a| a.norm_sqr()).sum();
        let d = ket.len();
        let mat = ComplexMatrix::from_fn(d, d, |r, c| ket[r] * ket[c].conj() / norm_sqr);
        Self { mat }
    }

    /// Computational basis state `|index><index|`.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        assert!(index < dim);
        let mut ket = vec![Complex64::ZERO; dim];
        ket[index] = Complex64::ONE;
        Self::pure(&ket)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut mat = ComplexMatrix::zeros(dim, dim);
        for i in 0..dim {
            mat[(i, i)] = c64(1.0 / dim as f64, 0.0);
        }
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn mat(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    /// `Tr rho^2`, equal to 1 exactly for pure states.
    pub fn purity(&self) -> f64 {
        self.mat.matmul(&self.mat).trace().re
    }

    pub fn population(&self, index: usize) -> f64 {
        self.mat[(index, index)].re
    }
}
