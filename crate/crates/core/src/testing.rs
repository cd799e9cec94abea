//! Fixtures shared by unit tests.

use crate::geometry::{orthonormalize, Element, MeanValue, Model, StateSpace};
use crate::hermitian::HermitianMatrix;

pub fn embed2(a: &HermitianMatrix, corner: f64) -> HermitianMatrix {
    HermitianMatrix::direct_sum(a, &HermitianMatrix::diagonal(&[corner]))
}

/// Pure state on the base circle of the cone.
pub fn rho(alpha: f64) -> HermitianMatrix {
    let two = HermitianMatrix::identity(2)
        .axpy(alpha.sin(), &HermitianMatrix::pauli_x())
        .unwrap()
        .axpy(alpha.cos(), &HermitianMatrix::pauli_y())
        .unwrap()
        .scale(0.5);
    embed2(&two, 0.0)
}

pub fn apex() -> HermitianMatrix {
    HermitianMatrix::diagonal(&[0.0, 0.0, 1.0])
}

/// Midpoint of the segment `[rho(0), apex]`.
pub fn centre() -> HermitianMatrix {
    rho(0.0).scale(0.5).add(&apex().scale(0.5)).unwrap()
}

pub fn u1() -> HermitianMatrix {
    embed2(&HermitianMatrix::pauli_x(), 0.0)
}

pub fn u2() -> HermitianMatrix {
    embed2(&HermitianMatrix::pauli_y(), 1.0).sub(&HermitianMatrix::maximally_mixed(3)).unwrap()
}

pub fn cone() -> Model {
    let space = StateSpace::matrix(vec![
        embed2(&HermitianMatrix::identity(2), 0.0),
        u1(),
        embed2(&HermitianMatrix::pauli_y(), 0.0),
        apex(),
    ])
    .unwrap();
    let obs = orthonormalize(&space, &[Element::Matrix(u1()), Element::Matrix(u2())]).unwrap();
    Model::new(space, obs).unwrap()
}

/// Full `Mat(2, C)` observed through `sigma_x`.
pub fn bloch() -> Model {
    let space = StateSpace::full_matrix_algebra(2);
    let obs = orthonormalize(&space, &[Element::Matrix(HermitianMatrix::pauli_x())]).unwrap();
    Model::new(space, obs).unwrap()
}

/// `(1 + t sigma_x) / 2`.
pub fn bloch_state(t: f64) -> HermitianMatrix {
    HermitianMatrix::identity(2).axpy(t, &HermitianMatrix::pauli_x()).unwrap().scale(0.5)
}

pub fn mean(model: &Model, x: &HermitianMatrix) -> MeanValue {
    model.project_mean(&Element::Matrix(x.clone())).unwrap()
}
