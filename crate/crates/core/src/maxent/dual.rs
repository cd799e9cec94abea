//! The convex dual of entropy maximization on the interior of the mean value
//! set: `f(theta) = log tr exp(sum theta_i u_i) - <theta, m>`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::spectrahedron::kernel_pair;
use crate::geometry::{Element, MeanValue, Model};
use crate::hermitian::{exp_divided_difference, hs_inner_unchecked, CMat, HermitianMatrix, Spectrum};

const ARMIJO: f64 = 1e-4;
const RIDGE: f64 = 1e-12;

/// Dual objective over the observable basis of a matrix model.
#[derive(Debug, Clone)]
pub struct DualObjective {
    basis: Vec<CMat>,
    target: DVector<f64>,
}

struct Eval {
    value: f64,
    means: DVector<f64>,
    spec: Spectrum,
    top: f64,
    z: f64,
}

impl DualObjective {
    /// The objective in the orthonormal observable basis of `model`.
    pub fn new(model: &Model, m: &MeanValue) -> Result<Self> {
        if m.len() != model.k() {
            return Err(Error::DimensionMismatch {
                expected: model.k(),
                found: m.len(),
            });
        }
        let basis = model
            .observables()
            .basis_elements(model.space())
            .into_iter()
            .map(|e| match e {
                Element::Matrix(h) => Ok(h.into_matrix()),
                Element::Point(_) => Err(Error::InvalidConfig("the dual solver needs a matrix backend".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            basis,
            target: m.coords().clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    fn hamiltonian(&self, theta: &[f64]) -> HermitianMatrix {
        let n = self.basis[0].nrows();
        let mut h = CMat::zeros(n, n);
        for (u, &t) in self.basis.iter().zip(theta) {
            h += u * Complex64::new(t, 0.0);
        }
        HermitianMatrix::symmetrized(h)
    }

    fn eval(&self, theta: &[f64]) -> Eval {
        let spec = self.hamiltonian(theta).spectrum();
        let top = *spec.eigenvalues.last().expect("non-empty spectrum");
        let z: f64 = spec.eigenvalues.iter().map(|&l| (l - top).exp()).sum();
        let rho = spec.map(|l| (l - top).exp() / z);
        let means = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|u| hs_inner_unchecked(u, rho.as_matrix())));
        let dot: f64 = theta.iter().zip(self.target.iter()).map(|(t, m)| t * m).sum();
        Eval {
            value: top + z.ln() - dot,
            means,
            spec,
            top,
            z,
        }
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.eval(theta).value
    }

    /// Mean values of the Gibbs state minus the target.
    pub fn gradient(&self, theta: &[f64]) -> DVector<f64> {
        self.eval(theta).means - &self.target
    }

    /// Kubo-Mori covariance of the observables in the Gibbs state.
    pub fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        self.hessian_of(&self.eval(theta))
    }

    pub fn state(&self, theta: &[f64]) -> HermitianMatrix {
        let e = self.eval(theta);
        e.spec.map(|l| (l - e.top).exp() / e.z)
    }

    fn hessian_of(&self, e: &Eval) -> DMatrix<f64> {
        let lam = &e.spec.eigenvalues;
        let n = lam.len();
        let kern = DMatrix::from_fn(n, n, |a, b| exp_divided_difference(lam[a], lam[b], e.top) / e.z);
        let q = &e.spec.eigenvectors;
        let rotated: Vec<CMat> = self.basis.iter().map(|u| q.adjoint() * u * q).collect();
        let k = self.basis.len();
        let mut h = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = kernel_pair(&rotated[i], &rotated[j], &kern) - e.means[i] * e.means[j];
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }

    /// Same problem over a traceless orthonormal basis. Directions along the
    /// identity only shift `log Z` and make the Hessian singular, so they are
    /// removed. Returns the reduced objective and the map from reduced to
    /// original parameters.
    fn reduced(&self) -> (DualObjective, DMatrix<f64>) {
        let n = self.basis[0].nrows();
        let k = self.basis.len();
        let traces: Vec<f64> = self.basis.iter().map(|u| u.trace().re / n as f64).collect();
        let id = CMat::identity(n, n);
        let centred: Vec<CMat> = self
            .basis
            .iter()
            .zip(&traces)
            .map(|(u, &t)| u - &id * Complex64::new(t, 0.0))
            .collect();
        let gram = DMatrix::from_fn(k, k, |i, j| hs_inner_unchecked(&centred[i], &centred[j]));
        let eig = SymmetricEigen::new(gram);
        let largest = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..k).filter(|&j| eig.eigenvalues[j] > 1e-20 * largest.max(1e-300)).collect();
        // theta = map * phi
        let map = DMatrix::from_fn(k, keep.len(), |i, c| eig.eigenvectors[(i, keep[c])] / eig.eigenvalues[keep[c]].sqrt());
        let basis = (0..keep.len())
            .map(|c| {
                let mut w = CMat::zeros(n, n);
                for i in 0..k {
                    w += &centred[i] * Complex64::new(map[(i, c)], 0.0);
                }
                w
            })
            .collect();
        let shifted = DVector::from_iterator(k, self.target.iter().zip(&traces).map(|(m, t)| m - t));
        let target = map.transpose() * shifted;
        (DualObjective { basis, target }, map)
    }
}

/// Outcome of the dual Newton iteration.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub theta: DVector<f64>,
    pub state: HermitianMatrix,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn newton_step(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let trace = h.trace().abs().max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..30 {
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            return -ch.solve(g);
        }
        ridge = if ridge == 0.0 { RIDGE * trace } else { ridge * 10.0 };
    }
    -g.clone()
}

/// Newton's method with Armijo backtracking on the reduced dual.
pub fn solve_dual(objective: &DualObjective, tol: f64, max_iter: usize) -> Result<DualSolution> {
    let (reduced, map) = objective.reduced();
    let r = reduced.dim();
    let mut phi = DVector::zeros(r);
    let mut e = reduced.eval(phi.as_slice());
    let mut gnorm = f64::INFINITY;
    for it in 0..=max_iter {
        let g = &e.means - &reduced.target;
        gnorm = g.norm();
        if gnorm <= tol {
            let theta = &map * &phi;
            return Ok(DualSolution {
                state: e.spec.map(|l| (l - e.top).exp() / e.z),
                theta,
                iterations: it,
                gradient_norm: gnorm,
            });
        }
        if it == max_iter {
            break;
        }
        let dir = newton_step(&reduced.hessian_of(&e), &g);
        let slope = g.dot(&dir);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &phi + &dir * step;
            let ce = reduced.eval(cand.as_slice());
            // Close to the optimum the decrease drops below the resolution of
            // the objective; a full step that halves the gradient is taken then.
            let sharp = step == 1.0 && (&ce.means - &reduced.target).norm() <= 0.5 * gnorm;
            if ce.value <= e.value + ARMIJO * step * slope || sharp {
                phi = cand;
                e = ce;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence {
        solver: "dual Newton",
        iterations: max_iter,
        residual: gnorm,
    })
}
