//! State spaces, observables, mean values and fibers.
//!
//! Both backends are handled through real coordinates: a matrix state is
//! described by its coordinates in a Hilbert-Schmidt orthonormal basis of the
//! algebra's self-adjoint part, a polytope state by its position in `E^n`.
//! Euclidean distances of coordinates are therefore the distances of states.

pub(crate) mod fiber;
pub(crate) mod linalg;
pub(crate) mod polytope;
pub(crate) mod spectrahedron;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{hs_inner_unchecked, CMat, HermitianMatrix};
use fiber::{MatrixFiber, MatrixFrame};
use linalg::{gram_schmidt, orthogonal_complement};
use polytope::Factors;
pub use spectrahedron::SdpSettings;
use spectrahedron::{feasibility, maximize_min_eigenvalue, project_onto_face, Feasibility};

/// An element of the ambient space: a self-adjoint matrix or a point of `E^n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Matrix(HermitianMatrix),
    Point(DVector<f64>),
}

/// States are elements of the state space.
pub type State = Element;

impl Element {
    pub fn as_matrix(&self) -> Option<&HermitianMatrix> {
        match self {
            Element::Matrix(m) => Some(m),
            Element::Point(_) => None,
        }
    }

    pub fn as_point(&self) -> Option<&DVector<f64>> {
        match self {
            Element::Point(p) => Some(p),
            Element::Matrix(_) => None,
        }
    }

    /// Hilbert-Schmidt or Euclidean distance.
    pub fn distance(&self, other: &Element) -> Result<f64> {
        match (self, other) {
            (Element::Matrix(a), Element::Matrix(b)) => Ok(a.sub(b)?.norm()),
            (Element::Point(a), Element::Point(b)) => {
                if a.len() != b.len() {
                    return Err(Error::DimensionMismatch {
                        expected: a.len(),
                        found: b.len(),
                    });
                }
                Ok((a - b).norm())
            }
            _ => Err(Error::InvalidConfig("cannot compare a matrix with a point".into())),
        }
    }

    /// `(1 - t) self + t other`.
    pub fn lerp(&self, other: &Element, t: f64) -> Result<Element> {
        match (self, other) {
            (Element::Matrix(a), Element::Matrix(b)) => Ok(Element::Matrix(a.scale(1.0 - t).axpy(t, b)?)),
            (Element::Point(a), Element::Point(b)) if a.len() == b.len() => Ok(Element::Point(a * (1.0 - t) + b * t)),
            (Element::Point(a), Element::Point(b)) => Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            }),
            _ => Err(Error::InvalidConfig("cannot mix a matrix with a point".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Matrix,
    Polytope,
}

/// Density matrices of a *-subalgebra of `Mat(N, C)`.
#[derive(Debug, Clone)]
pub struct MatrixAlgebra {
    dim: usize,
    basis: Vec<HermitianMatrix>,
    ortho: Vec<HermitianMatrix>,
    gram_condition: f64,
    identity_coords: DVector<f64>,
}

impl MatrixAlgebra {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[HermitianMatrix] {
        &self.basis
    }

    /// Hilbert-Schmidt orthonormal basis of the same span.
    pub fn orthonormal_basis(&self) -> &[HermitianMatrix] {
        &self.ortho
    }

    /// Condition number of the Gram matrix of the given basis.
    pub fn gram_condition(&self) -> f64 {
        self.gram_condition
    }
}

/// Convex hull of a vertex list, or a product of such hulls.
#[derive(Debug, Clone)]
pub struct VPolytope {
    factors: Factors,
}

impl VPolytope {
    pub fn vertex_count(&self) -> usize {
        self.factors.sets.iter().map(Vec::len).product()
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.factors.sets[0]
    }
}

#[derive(Debug, Clone)]
pub enum StateSpace {
    Matrix(MatrixAlgebra),
    Polytope(VPolytope),
}

/// Orthonormal basis of the column space, singular values below `1e-10`
/// relative dropped.
pub(crate) fn range_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if cols == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax.max(1e-300))
        .collect();
    DMatrix::from_fn(rows, keep.len(), |i, j| u[(i, keep[j])])
}

fn flatten(m: &CMat) -> DVector<f64> {
    let n = m.nrows();
    let mut v = DVector::zeros(2 * n * n);
    for (i, z) in m.iter().enumerate() {
        v[2 * i] = z.re;
        v[2 * i + 1] = z.im;
    }
    v
}

fn unflatten(v: &DVector<f64>, n: usize) -> CMat {
    CMat::from_iterator(n, n, (0..n * n).map(|i| Complex64::new(v[2 * i], v[2 * i + 1])))
}

impl StateSpace {
    /// Algebra given by a basis of its self-adjoint part.
    pub fn matrix(basis: Vec<HermitianMatrix>) -> Result<Self> {
        let first = basis.first().ok_or(Error::EmptyInput("algebra basis"))?;
        let n = first.dim();
        for b in &basis {
            if b.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: b.dim(),
                });
            }
        }
        let d = basis.len();
        let gram = DMatrix::from_fn(d, d, |i, j| hs_inner_unchecked(basis[i].as_matrix(), basis[j].as_matrix()));
        let eig = SymmetricEigen::new(gram);
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.min();
        if lmin <= 1e-12 * lmax {
            return Err(Error::InvalidConfig(format!(
                "algebra basis is linearly dependent (Gram eigenvalues {lmin:e} .. {lmax:e})"
            )));
        }
        let flat: Vec<DVector<f64>> = basis.iter().map(|b| flatten(b.as_matrix())).collect();
        let (q, _) = gram_schmidt(&flat, 1e-10);
        let ortho: Vec<HermitianMatrix> = q.iter().map(|v| HermitianMatrix::symmetrized(unflatten(v, n))).collect();
        let ident = flatten(HermitianMatrix::identity(n).as_matrix());
        let identity_coords = DVector::from_iterator(d, q.iter().map(|v| v.dot(&ident)));
        let mut residual = ident.clone();
        for (v, &c) in q.iter().zip(identity_coords.iter()) {
            residual.axpy(-c, v, 1.0);
        }
        let missing = residual.norm();
        if missing > 1e-10 {
            return Err(Error::InvalidConfig(format!(
                "identity matrix is not in the algebra span (residual {missing:e})"
            )));
        }
        Ok(StateSpace::Matrix(MatrixAlgebra {
            dim: n,
            basis,
            ortho,
            gram_condition: lmax / lmin,
            identity_coords,
        }))
    }

    /// All density matrices of size `n`.
    pub fn full_matrix_algebra(n: usize) -> Self {
        let mut basis = Vec::with_capacity(n * n);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..n {
            let mut diag = vec![0.0; n];
            diag[i] = 1.0;
            basis.push(HermitianMatrix::diagonal(&diag));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let mut re = CMat::zeros(n, n);
                re[(i, j)] = Complex64::new(s, 0.0);
                re[(j, i)] = Complex64::new(s, 0.0);
                basis.push(HermitianMatrix::symmetrized(re));
                let mut im = CMat::zeros(n, n);
                im[(i, j)] = Complex64::new(0.0, s);
                im[(j, i)] = Complex64::new(0.0, -s);
                basis.push(HermitianMatrix::symmetrized(im));
            }
        }
        Self::matrix(basis).expect("standard basis is orthonormal")
    }

    /// Convex hull of `vertices`, deduplicated within `1e-12`.
    pub fn polytope(vertices: Vec<DVector<f64>>) -> Result<Self> {
        let first = vertices.first().ok_or(Error::EmptyInput("vertex list"))?;
        let n = first.len();
        if n == 0 {
            return Err(Error::EmptyInput("vertex coordinates"));
        }
        let mut unique: Vec<DVector<f64>> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig("vertex has a non-finite coordinate".into()));
            }
            if !unique.iter().any(|u| (u - &v).amax() <= 1e-12) {
                unique.push(v);
            }
        }
        Ok(StateSpace::Polytope(VPolytope {
            factors: Factors::new(vec![unique]),
        }))
    }

    pub fn backend(&self) -> Backend {
        match self {
            StateSpace::Matrix(_) => Backend::Matrix,
            StateSpace::Polytope(_) => Backend::Polytope,
        }
    }

    /// Real dimension of the ambient space.
    pub fn dim(&self) -> usize {
        match self {
            StateSpace::Matrix(a) => a.ortho.len(),
            StateSpace::Polytope(p) => p.factors.dim(),
        }
    }

    /// Coordinates of the orthogonal projection of `x` onto the ambient space.
    pub fn coords(&self, x: &Element) -> Result<DVector<f64>> {
        match (self, x) {
            (StateSpace::Matrix(a), Element::Matrix(m)) => {
                if m.dim() != a.dim {
                    return Err(Error::DimensionMismatch {
                        expected: a.dim,
                        found: m.dim(),
                    });
                }
                Ok(DVector::from_iterator(
                    a.ortho.len(),
                    a.ortho.iter().map(|b| hs_inner_unchecked(b.as_matrix(), m.as_matrix())),
                ))
            }
            (StateSpace::Polytope(p), Element::Point(v)) => {
                if v.len() != p.factors.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: p.factors.dim(),
                        found: v.len(),
                    });
                }
                Ok(v.clone())
            }
            _ => Err(Error::InvalidConfig("element does not match the state space backend".into())),
        }
    }

    /// Distance from `x` to the ambient space (non-zero only for matrices
    /// outside the algebra).
    pub(crate) fn outside_norm(&self, x: &Element) -> Result<f64> {
        match (self, x) {
            (StateSpace::Matrix(_), Element::Matrix(m)) => {
                let c = self.coords(x)?;
                let inside = self.element(&c);
                Ok(m.sub(inside.as_matrix().expect("matrix backend"))?.norm())
            }
            _ => Ok(0.0),
        }
    }

    pub fn element(&self, coords: &DVector<f64>) -> Element {
        match self {
            StateSpace::Matrix(a) => {
                let n = a.dim;
                let mut m = CMat::zeros(n, n);
                for (b, &c) in a.ortho.iter().zip(coords.iter()) {
                    m += b.as_matrix() * Complex64::new(c, 0.0);
                }
                Element::Matrix(HermitianMatrix::symmetrized(m))
            }
            StateSpace::Polytope(_) => Element::Point(coords.clone()),
        }
    }

    /// The maximally mixed state, or the vertex centroid.
    pub fn center(&self) -> Element {
        match self {
            StateSpace::Matrix(a) => Element::Matrix(HermitianMatrix::maximally_mixed(a.dim)),
            StateSpace::Polytope(p) => Element::Point(p.factors.centroid()),
        }
    }

    pub fn contains(&self, x: &Element, tol: f64) -> Result<bool> {
        let c = self.coords(x)?;
        match self {
            StateSpace::Matrix(_) => {
                let m = x.as_matrix().expect("checked by coords");
                let check = crate::hermitian::is_density(m, tol);
                Ok(check.is_density && self.outside_norm(x)? <= tol)
            }
            StateSpace::Polytope(p) => {
                let gap = polytope::mean_gap(&p.factors, &DMatrix::identity(c.len(), c.len()), &c, 10_000)?;
                Ok(gap.image.norm() <= tol)
            }
        }
    }

    /// A random state, not uniformly distributed.
    pub fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Element {
        match self {
            StateSpace::Matrix(a) => {
                let scale = rng.random_range(0.0..4.0);
                let theta: Vec<f64> = (0..a.ortho.len()).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
                let h = crate::hermitian::linear_combination(&a.ortho, &theta).expect("matching lengths");
                Element::Matrix(crate::hermitian::normalized_exp(&h))
            }
            StateSpace::Polytope(p) => {
                let picks = rng.random_range(1..=4usize);
                let mut x = DVector::zeros(p.factors.dim());
                let mut total = 0.0;
                for _ in 0..picks {
                    let id: Vec<usize> = p.factors.sets.iter().map(|s| rng.random_range(0..s.len())).collect();
                    let w: f64 = rng.random_range(0.05..1.0);
                    x.axpy(w, &p.factors.vertex(&id), 1.0);
                    total += w;
                }
                Element::Point(x / total)
            }
        }
    }

    /// `S x S`, embedded so that the mid-point map becomes a projection.
    /// Matrix states are stored as `x/2 (+) y/2`; polytope states as `(x, y)`.
    pub(crate) fn doubled(&self) -> Self {
        match self {
            StateSpace::Matrix(a) => {
                let n = a.dim;
                let zero = HermitianMatrix::zeros(n);
                let mut basis = Vec::with_capacity(2 * a.ortho.len());
                for b in &a.ortho {
                    basis.push(HermitianMatrix::direct_sum(b, &zero));
                }
                for b in &a.ortho {
                    basis.push(HermitianMatrix::direct_sum(&zero, b));
                }
                Self::matrix(basis).expect("direct sum of an algebra with itself")
            }
            StateSpace::Polytope(p) => {
                let mut sets = p.factors.sets.clone();
                sets.extend(p.factors.sets.iter().cloned());
                StateSpace::Polytope(VPolytope {
                    factors: Factors::new(sets),
                })
            }
        }
    }

    /// Orthonormal basis (columns) of the directions of the affine hull.
    pub(crate) fn affine_directions(&self) -> DMatrix<f64> {
        match self {
            StateSpace::Matrix(a) => {
                let e = a.identity_coords.normalize();
                linalg::columns(&orthogonal_complement(&[e], a.ortho.len()), a.ortho.len())
            }
            StateSpace::Polytope(p) => {
                let n = p.factors.dim();
                let mut diffs = Vec::new();
                let mut offset = 0;
                for set in &p.factors.sets {
                    let nf = set[0].len();
                    for v in &set[1..] {
                        let mut d = DVector::zeros(n);
                        d.rows_mut(offset, nf).copy_from(&(v - &set[0]));
                        diffs.push(d);
                    }
                    offset += nf;
                }
                range_basis(&linalg::columns(&diffs, n))
            }
        }
    }
}

/// The observable subspace `U` with an orthonormal basis.
#[derive(Debug, Clone)]
pub struct ObservableSubspace {
    rows: DMatrix<f64>,
    raw_len: usize,
    dropped: Vec<usize>,
}

/// Orthonormalizes the observables inside the ambient space of `space`;
/// matrix observables are first projected onto the algebra. Elements whose
/// residual falls below `1e-10` are dropped.
pub fn orthonormalize(space: &StateSpace, raw: &[Element]) -> Result<ObservableSubspace> {
    if raw.is_empty() {
        return Err(Error::EmptyInput("observables"));
    }
    let coords = raw.iter().map(|u| space.coords(u)).collect::<Result<Vec<_>>>()?;
    let (q, kept) = gram_schmidt(&coords, 1e-10);
    if q.is_empty() {
        return Err(Error::EmptyInput("observables (all numerically zero)"));
    }
    let dropped = (0..raw.len()).filter(|i| !kept.contains(i)).collect();
    Ok(ObservableSubspace {
        rows: linalg::rows(&q, space.dim()),
        raw_len: raw.len(),
        dropped,
    })
}

impl ObservableSubspace {
    /// No observables at all: the only constraint left is the normalization.
    pub(crate) fn trivial(space: &StateSpace) -> Self {
        Self {
            rows: DMatrix::zeros(0, space.dim()),
            raw_len: 0,
            dropped: Vec::new(),
        }
    }

    pub(crate) fn from_rows(rows: DMatrix<f64>) -> Self {
        let raw_len = rows.nrows();
        Self {
            rows,
            raw_len,
            dropped: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.nrows()
    }

    /// Orthonormal basis as rows of ambient coordinates.
    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn raw_len(&self) -> usize {
        self.raw_len
    }

    /// Indices of input observables removed as linearly dependent.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn basis_elements(&self, space: &StateSpace) -> Vec<Element> {
        (0..self.dim()).map(|i| space.element(&self.rows.row(i).transpose())).collect()
    }

    /// `sum m_i u_i`.
    pub fn embed(&self, space: &StateSpace, m: &MeanValue) -> Element {
        space.element(&(self.rows.transpose() * &m.0))
    }


}

/// Coordinates of a mean value in the orthonormal basis of `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanValue(DVector<f64>);

impl MeanValue {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("mean value has a non-finite coordinate".into()));
        }
        Ok(Self(DVector::from_vec(coords)))
    }

    pub fn from_vector(v: DVector<f64>) -> Self {
        Self(v)
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn distance(&self, other: &MeanValue) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberPoint {
    pub state: Element,
    /// `|pi_U(state) - m|`.
    pub projection_residual: f64,
    /// Smallest eigenvalue for matrices; zero for polytope points, which are
    /// built as convex combinations of vertices.
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub feasible: bool,
    pub interior: bool,
    /// Largest smallest-eigenvalue over the fiber, or minus the distance of
    /// `m` from the mean value set for polytopes.
    pub slack: f64,
}

#[derive(Debug, Clone)]
pub struct InteriorPoint {
    pub point: FiberPoint,
    /// Projector onto the range of the point (matrix backend only).
    pub support: Option<HermitianMatrix>,
    pub rank: usize,
    /// Number of facial reduction steps needed to reach the point.
    pub reductions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub fiber_tol: f64,
    pub max_iter: usize,
    pub interior_delta: f64,
    pub dual_tol: f64,
    pub dual_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            fiber_tol: 1e-7,
            max_iter: 20_000,
            interior_delta: 1e-4,
            dual_tol: 1e-9,
            dual_max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
enum Frame {
    Matrix(MatrixFrame),
    Polytope,
}

/// A state space with an observable subspace: the data of an inference problem.
#[derive(Debug, Clone)]
pub struct Model {
    space: StateSpace,
    observables: ObservableSubspace,
    tol: Tolerances,
    sdp: SdpSettings,
    frame: Frame,
}

/// Feasibility cut used when deciding membership of polytope mean values.
const POLYTOPE_FEASIBLE_TOL: f64 = 1e-9;

impl Model {
    pub fn new(space: StateSpace, observables: ObservableSubspace) -> Result<Self> {
        if observables.rows.ncols() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: observables.rows.ncols(),
            });
        }
        let frame = match &space {
            StateSpace::Matrix(a) => Frame::Matrix(MatrixFrame::new(
                a.ortho.iter().map(|b| b.as_matrix().clone()).collect(),
                &observables.rows,
                &a.identity_coords,
            )),
            StateSpace::Polytope(_) => Frame::Polytope,
        };
        Ok(Self {
            space,
            observables,
            tol: Tolerances::default(),
            sdp: SdpSettings::default(),
            frame,
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.sdp.max_iter = tol.max_iter;
        self.tol = tol;
        self
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn observables(&self) -> &ObservableSubspace {
        &self.observables
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub(crate) fn sdp(&self) -> &SdpSettings {
        &self.sdp
    }

    pub fn k(&self) -> usize {
        self.observables.dim()
    }

    fn check_mean(&self, m: &MeanValue) -> Result<()> {
        if m.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                found: m.len(),
            });
        }
        Ok(())
    }

    pub fn project_mean(&self, x: &Element) -> Result<MeanValue> {
        let c = self.space.coords(x)?;
        Ok(MeanValue(&self.observables.rows * c))
    }

    pub(crate) fn matrix_frame(&self) -> Option<&MatrixFrame> {
        match &self.frame {
            Frame::Matrix(f) => Some(f),
            Frame::Polytope => None,
        }
    }

    pub(crate) fn factors(&self) -> Option<&Factors> {
        match &self.space {
            StateSpace::Polytope(p) => Some(&p.factors),
            StateSpace::Matrix(_) => None,
        }
    }

    pub(crate) fn matrix_fiber(&self, m: &MeanValue) -> Result<MatrixFiber> {
        self.check_mean(m)?;
        let frame = self.matrix_frame().ok_or(Error::InvalidConfig("matrix backend required".into()))?;
        frame.fiber(&m.0, &self.sdp)
    }

    pub(crate) fn fiber_point_from_coords(&self, m: &MeanValue, x: &DVector<f64>) -> FiberPoint {
        let state = self.space.element(x);
        let slack = match &state {
            Element::Matrix(h) => h.min_eigenvalue(),
            Element::Point(_) => 0.0,
        };
        FiberPoint {
            state,
            projection_residual: (&self.observables.rows * x - &m.0).norm(),
            slack,
        }
    }

    /// Nearest fiber point to `target` (ambient coordinates).
    pub(crate) fn nearest_coords(&self, m: &MeanValue, target: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_mean(m)?;
        match &self.frame {
            Frame::Matrix(frame) => {
                let fib = frame.fiber(&m.0, &self.sdp)?;
                let local = frame.local(&fib.x0, target);
                let y = project_onto_face(&fib.pencil, &fib.face, &local, &self.sdp)?;
                Ok(frame.lift(&fib.x0, &y))
            }
            Frame::Polytope => {
                let factors = self.factors().expect("polytope frame");
                let gap = polytope::mean_gap(factors, &self.observables.rows, &m.0, self.tol.max_iter)?;
                if gap.image.norm() > POLYTOPE_FEASIBLE_TOL {
                    return Err(Error::Infeasible {
                        slack: -gap.image.norm(),
                    });
                }
                polytope::nearest_in_slice(
                    factors,
                    &self.observables.rows,
                    &m.0,
                    target,
                    (self.tol.fiber_tol * 1e-4).max(1e-12),
                    self.tol.max_iter,
                )
            }
        }
    }

    /// Orthonormal basis (in mean value coordinates) of the directions along
    /// which the mean value set extends.
    pub(crate) fn mean_directions(&self) -> Vec<DVector<f64>> {
        let img = &self.observables.rows * self.space.affine_directions();
        let b = range_basis(&img);
        (0..b.ncols()).map(|j| b.column(j).into_owned()).collect()
    }

    /// `min { |sigma - rho| : sigma in F(m) }` and the minimizer.
    pub fn fiber_distance(&self, m: &MeanValue, rho: &Element) -> Result<(f64, FiberPoint)> {
        let target = self.space.coords(rho)?;
        let outside = self.space.outside_norm(rho)?;
        let x = self.nearest_coords(m, &target)?;
        let d = ((&x - &target).norm_squared() + outside * outside).sqrt();
        Ok((d, self.fiber_point_from_coords(m, &x)))
    }

    /// Whether some state has mean value within `tol` of `m` (matrix: a fiber
    /// point with smallest eigenvalue at least `-tol`).
    pub fn is_feasible(&self, m: &MeanValue, tol: f64) -> Result<bool> {
        self.check_mean(m)?;
        match &self.frame {
            Frame::Matrix(frame) => {
                let (pencil, _) = match frame.pencil(&m.0) {
                    Ok(p) => p,
                    Err(Error::Infeasible { .. }) => return Ok(false),
                    Err(e) => return Err(e),
                };
                Ok(matches!(feasibility(&pencil, tol, &self.sdp)?, Feasibility::Feasible(_)))
            }
            Frame::Polytope => {
                let gap = polytope::mean_gap(self.factors().expect("polytope"), &self.observables.rows, &m.0, self.tol.max_iter)?;
                Ok(gap.image.norm() <= tol.max(1e-12))
            }
        }
    }

    fn slack(&self, m: &MeanValue) -> Result<f64> {
        match &self.frame {
            Frame::Matrix(frame) => match frame.pencil(&m.0) {
                Ok((pencil, _)) => Ok(maximize_min_eigenvalue(&pencil, &self.sdp)?.value),
                Err(Error::Infeasible { slack }) => Ok(slack),
                Err(e) => Err(e),
            },
            Frame::Polytope => {
                let gap = polytope::mean_gap(self.factors().expect("polytope"), &self.observables.rows, &m.0, self.tol.max_iter)?;
                Ok(-gap.image.norm())
            }
        }
    }

    fn feasible_tol(&self) -> f64 {
        match self.frame {
            Frame::Matrix(_) => self.sdp.infeasible_tol,
            Frame::Polytope => POLYTOPE_FEASIBLE_TOL,
        }
    }

    /// Membership of `m` in the mean value set, with an interior test that
    /// checks `m +- delta e_j` for every coordinate direction.
    pub fn mean_in_m(&self, m: &MeanValue) -> Result<Membership> {
        self.check_mean(m)?;
        let slack = self.slack(m)?;
        let tol = self.feasible_tol();
        let feasible = slack >= -tol;
        let mut interior = feasible;
        if feasible {
            'dirs: for j in 0..self.k() {
                for sign in [-1.0, 1.0] {
                    let mut shifted = m.0.clone();
                    shifted[j] += sign * self.tol.interior_delta;
                    if !self.is_feasible(&MeanValue(shifted), tol)? {
                        interior = false;
                        break 'dirs;
                    }
                }
            }
        }
        Ok(Membership {
            feasible,
            interior,
            slack,
        })
    }

    /// A fiber point of maximal support: the max-slack point of the minimal
    /// face for matrices, the point nearest the vertex centroid for polytopes.
    pub fn fiber_interior_point(&self, m: &MeanValue) -> Result<InteriorPoint> {
        self.check_mean(m)?;
        match &self.frame {
            Frame::Matrix(frame) => {
                let fib = frame.fiber(&m.0, &self.sdp)?;
                let x = frame.lift(&fib.x0, &fib.face.point);
                let v = &fib.face.v;
                let support = HermitianMatrix::symmetrized(v * v.adjoint());
                Ok(InteriorPoint {
                    point: self.fiber_point_from_coords(m, &x),
                    support: Some(support),
                    rank: fib.face.rank(),
                    reductions: fib.face.reductions,
                })
            }
            Frame::Polytope => {
                let c = self.space.coords(&self.space.center())?;
                let x = self.nearest_coords(m, &c)?;
                Ok(InteriorPoint {
                    point: self.fiber_point_from_coords(m, &x),
                    support: None,
                    rank: 0,
                    reductions: 0,
                })
            }
        }
    }

    /// A random fiber point: a random state projected onto the fiber, mixed
    /// with the fiber's interior point.
    pub fn fiber_sample<R: Rng + ?Sized>(&self, m: &MeanValue, interior: &InteriorPoint, rng: &mut R) -> Result<FiberPoint> {
        let target = self.space.coords(&self.space.random_state(rng))?;
        let x = self.nearest_coords(m, &target)?;
        let xi = self.space.coords(&interior.point.state)?;
        let w: f64 = rng.random_range(0.0..1.0);
        let w = if rng.random_bool(0.25) { 0.0 } else { w };
        Ok(self.fiber_point_from_coords(m, &(x * (1.0 - w) + xi * w)))
    }

    /// Nearest state to `x` (the metric projection onto the state space).
    pub fn project_to_space(&self, x: &Element) -> Result<Element> {
        let unconstrained = Model::new(self.space.clone(), ObservableSubspace::trivial(&self.space))?.with_tolerances(self.tol);
        let (_, p) = unconstrained.fiber_distance(&MeanValue(DVector::zeros(0)), x)?;
        Ok(p.state)
    }
}
