//! Affine parametrization of matrix fibers.
//!
//! With an orthonormal basis `B_j` of the algebra, a state is a coordinate
//! vector `x` with `X = sum x_j B_j`. The fiber over `m` is the set of `x`
//! with `U x = m`, `<1, X> = 1` and `X >= 0`; writing `x = x0 + N y` with an
//! orthonormal null-space basis `N` turns it into a spectrahedral pencil in
//! `y` whose directions are Hilbert-Schmidt orthonormal.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::linalg::least_squares;
use super::spectrahedron::{find_face, Face, Pencil, SdpSettings};
use crate::error::{Error, Result};
use crate::hermitian::CMat;

/// Residual above which the affine constraints count as inconsistent.
const AFFINE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct MatrixFrame {
    basis: Vec<CMat>,
    constraint: DMatrix<f64>,
    null: DMatrix<f64>,
    null_dirs: Vec<CMat>,
}

/// A fiber together with its minimal face.
#[derive(Debug, Clone)]
pub(crate) struct MatrixFiber {
    pub pencil: Pencil,
    pub x0: DVector<f64>,
    pub face: Face,
}

impl MatrixFrame {
    /// `rows` holds the observables in basis coordinates; `identity` the
    /// coordinates of the unit matrix.
    pub fn new(basis: Vec<CMat>, rows: &DMatrix<f64>, identity: &DVector<f64>) -> Self {
        let d = basis.len();
        let k = rows.nrows();
        let mut constraint = DMatrix::zeros(k + 1, d);
        constraint.view_mut((0, 0), (k, d)).copy_from(rows);
        constraint.set_row(k, &identity.transpose());
        let ls = least_squares(&constraint, &DVector::zeros(k + 1), 1e-10);
        let null = ls.null_space;
        let null_dirs = (0..null.ncols())
            .map(|l| combine(&basis, null.column(l).iter().copied()))
            .collect();
        Self {
            basis,
            constraint,
            null,
            null_dirs,
        }
    }

    pub fn element(&self, x: &DVector<f64>) -> CMat {
        combine(&self.basis, x.iter().copied())
    }

    pub fn lift(&self, x0: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        x0 + &self.null * y
    }

    /// Pencil coordinates of the ambient point closest to `x` in the fiber's affine hull.
    pub fn local(&self, x0: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        self.null.transpose() * (x - x0)
    }

    /// Minimum-norm solution of the affine constraints, or an infeasibility
    /// error when they are inconsistent.
    pub fn offset(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        let k = m.len();
        let mut rhs = DVector::zeros(k + 1);
        rhs.rows_mut(0, k).copy_from(m);
        rhs[k] = 1.0;
        let ls = least_squares(&self.constraint, &rhs, 1e-10);
        if ls.residual > AFFINE_TOL {
            return Err(Error::Infeasible { slack: -ls.residual });
        }
        Ok(ls.solution)
    }

    pub fn pencil(&self, m: &DVector<f64>) -> Result<(Pencil, DVector<f64>)> {
        let x0 = self.offset(m)?;
        let pencil = Pencil {
            a0: self.element(&x0),
            dirs: self.null_dirs.clone(),
        };
        Ok((pencil, x0))
    }

    pub fn fiber(&self, m: &DVector<f64>, settings: &SdpSettings) -> Result<MatrixFiber> {
        let (pencil, x0) = self.pencil(m)?;
        let face = find_face(&pencil, settings)?;
        Ok(MatrixFiber { pencil, x0, face })
    }
}

fn combine(basis: &[CMat], coeffs: impl Iterator<Item = f64>) -> CMat {
    let n = basis[0].nrows();
    let mut m = CMat::zeros(n, n);
    for (b, c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            m += b * Complex64::new(c, 0.0);
        }
    }
    m
}
