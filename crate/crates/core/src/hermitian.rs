//! Self-adjoint complex matrices and the spectral functions built on them.
//!
//! Everything here works on dense `N x N` matrices with `N` small (the state
//! spaces of interest live in `Mat(N, C)` with `N <= 16`), so spectral
//! decompositions are the workhorse: the entropy, the matrix exponential of
//! the Gibbsian family, and every divided-difference Hessian are evaluated in
//! an eigenbasis.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Maximum allowed `|a_ij - conj(a_ji)|` for a matrix to count as self-adjoint.
pub const SELF_ADJOINT_TOL: f64 = 1e-12;

/// Eigenvalues above `-ENTROPY_CLAMP` count as non-negative and those below
/// `ENTROPY_CLAMP` contribute nothing to the entropy.
pub const ENTROPY_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: CMat,
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityCheck {
    pub is_density: bool,
    pub min_eigenvalue: f64,
    pub trace_error: f64,
}

impl HermitianMatrix {
    /// Validates self-adjointness and stores the exactly symmetrized matrix.
    pub fn new(mat: CMat) -> Result<Self> {
        let n = mat.nrows();
        if n == 0 {
            return Err(Error::EmptyInput("matrix"));
        }
        if mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: mat.ncols(),
            });
        }
        for i in 0..n {
            for j in i..n {
                let dev = (mat[(i, j)] - mat[(j, i)].conj()).norm();
                if dev > SELF_ADJOINT_TOL {
                    return Err(Error::NotSelfAdjoint {
                        row: i,
                        col: j,
                        deviation: dev,
                    });
                }
            }
        }
        Ok(Self::symmetrized(mat))
    }

    /// Takes the Hermitian part `(M + M^dagger) / 2` without validation.
    pub fn symmetrized(mat: CMat) -> Self {
        let adj = mat.adjoint();
        Self {
            mat: (mat + adj) * Complex64::new(0.5, 0.0),
        }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput("matrix rows"));
        }
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
        }
        Self::new(CMat::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_real(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        Self::new(CMat::from_fn(n, n, |i, j| {
            Complex64::new(entries[i * n + j], 0.0)
        }))
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            mat: CMat::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: CMat::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            mat: CMat::zeros(n, n),
        }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self::identity(n).scale(1.0 / n as f64)
    }

    pub fn pauli_x() -> Self {
        Self::from_real(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    pub fn pauli_y() -> Self {
        let i = Complex64::new(0.0, 1.0);
        let z = Complex64::new(0.0, 0.0);
        Self {
            mat: CMat::from_row_slice(2, 2, &[z, -i, i, z]),
        }
    }

    pub fn pauli_z() -> Self {
        Self::from_real(2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    /// Block-diagonal embedding `a (+) b`.
    pub fn direct_sum(a: &Self, b: &Self) -> Self {
        let (n, m) = (a.dim(), b.dim());
        let mut mat = CMat::zeros(n + m, n + m);
        mat.view_mut((0, 0), (n, n)).copy_from(&a.mat);
        mat.view_mut((n, n), (m, m)).copy_from(&b.mat);
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.mat[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    /// Hilbert-Schmidt norm.
    pub fn norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mat: &self.mat * Complex64::new(s, 0.0),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        Ok(Self {
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        Ok(Self {
            mat: &self.mat - &other.mat,
        })
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        Ok(Self {
            mat: &self.mat + &other.mat * Complex64::new(s, 0.0),
        })
    }

    /// `V^dagger A V` for an isometry `V` with `N` rows.
    pub fn compress(&self, v: &CMat) -> Self {
        Self::symmetrized(v.adjoint() * &self.mat * v)
    }

    /// `V A V^dagger`, the inverse of [`compress`](Self::compress) on the range of `V`.
    pub fn expand(&self, v: &CMat) -> Self {
        Self::symmetrized(v * &self.mat * v.adjoint())
    }

    pub fn spectrum(&self) -> Spectrum {
        let eig = SymmetricEigen::new(self.mat.clone());
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Spectrum {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum().eigenvalues[0]
    }

    pub fn to_pairs(&self) -> Vec<Vec<[f64; 2]>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| [self.mat[(i, j)].re, self.mat[(i, j)].im]).collect())
            .collect()
    }
}

impl Spectrum {
    /// `V diag(f(lambda)) V^dagger`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let v = &self.eigenvectors;
        let n = v.nrows();
        let mut scaled = v.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let s = Complex64::new(f(l), 0.0);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        HermitianMatrix::symmetrized(scaled * v.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.map(|l| l)
    }

    /// Expresses a matrix in this eigenbasis: `V^dagger A V`.
    pub fn rotate(&self, a: &HermitianMatrix) -> CMat {
        self.eigenvectors.adjoint() * a.as_matrix() * &self.eigenvectors
    }
}

fn check_dims(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Hilbert-Schmidt scalar product `tr(ab)`.
pub fn hs_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    check_dims(a, b)?;
    Ok(hs_inner_unchecked(a.as_matrix(), b.as_matrix()))
}

/// `Re tr(ab)` for square matrices of equal size.
pub(crate) fn hs_inner_unchecked(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

pub fn is_density(rho: &HermitianMatrix, tol: f64) -> DensityCheck {
    let min_eigenvalue = rho.min_eigenvalue();
    let trace_error = (rho.trace() - 1.0).abs();
    DensityCheck {
        is_density: min_eigenvalue >= -tol && trace_error <= tol,
        min_eigenvalue,
        trace_error,
    }
}

/// `-sum lambda log lambda` with `0 log 0 = 0`; eigenvalues below
/// [`ENTROPY_CLAMP`] are dropped.
pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l > ENTROPY_CLAMP)
        .map(|&l| -l * l.ln())
        .sum()
}

pub fn von_neumann_entropy(rho: &HermitianMatrix) -> Result<f64> {
    let spec = rho.spectrum();
    let min_eigenvalue = spec.eigenvalues[0];
    let trace_error = (spec.eigenvalues.iter().sum::<f64>() - 1.0).abs();
    if min_eigenvalue < -ENTROPY_CLAMP || trace_error > ENTROPY_CLAMP {
        return Err(Error::NotDensity {
            min_eigenvalue,
            trace_error,
        });
    }
    Ok(entropy_of_spectrum(&spec.eigenvalues))
}

/// `sum theta_i u_i`.
pub fn linear_combination(basis: &[HermitianMatrix], theta: &[f64]) -> Result<HermitianMatrix> {
    let first = basis.first().ok_or(Error::EmptyInput("basis"))?;
    if theta.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: theta.len(),
        });
    }
    let n = first.dim();
    let mut mat = CMat::zeros(n, n);
    for (u, &t) in basis.iter().zip(theta) {
        if u.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: u.dim(),
            });
        }
        mat += u.as_matrix() * Complex64::new(t, 0.0);
    }
    Ok(HermitianMatrix::symmetrized(mat))
}

/// Normalized exponential `exp(H) / tr exp(H)` evaluated spectrally with the
/// largest eigenvalue shifted to zero.
pub fn normalized_exp(h: &HermitianMatrix) -> HermitianMatrix {
    let spec = h.spectrum();
    let top = *spec.eigenvalues.last().unwrap();
    let z: f64 = spec.eigenvalues.iter().map(|&l| (l - top).exp()).sum();
    spec.map(|l| (l - top).exp() / z)
}

/// Member of the Gibbsian family, `exp(sum theta_i u_i) / Z`.
pub fn gibbs_state(basis: &[HermitianMatrix], theta: &[f64]) -> Result<HermitianMatrix> {
    Ok(normalized_exp(&linear_combination(basis, theta)?))
}

/// First divided difference of `exp` at `(a, b)`, scaled by `exp(-shift)`.
pub(crate) fn exp_divided_difference(a: f64, b: f64, shift: f64) -> f64 {
    let d = a - b;
    if d.abs() < 1e-10 {
        ((a + b) / 2.0 - shift).exp() * (1.0 + d * d / 24.0)
    } else {
        // (e^a - e^b) / (a - b) = e^b * expm1(d) / d
        (b - shift).exp() * d.exp_m1() / d
    }
}

/// First divided difference of `ln` at `(a, b)` for positive arguments.
pub(crate) fn log_divided_difference(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d.abs() <= 1e-12 * a.max(b) {
        2.0 / (a + b)
    } else {
        // ln(a/b) / (a - b), using ln_1p for accuracy when a ~ b
        (d / b).ln_1p() / d
    }
}
