//! Affine slices of the positive semidefinite cone.
//!
//! A fiber of a matrix state space is `{ X(y) = A0 + sum y_j A_j : X(y) >= 0 }`
//! with Hilbert-Schmidt orthonormal directions `A_j`. Boundary mean values
//! produce fibers without positive definite points, so every solver here
//! first locates the minimal face of the PSD cone containing the fiber
//! (facial reduction) and then works on the compressed, strictly feasible
//! problem with log-det barriers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::linalg::{least_squares, spd_solve};
use crate::error::{Error, Result};
use crate::hermitian::{log_divided_difference, CMat, HermitianMatrix, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSettings {
    /// Max-min-eigenvalue below `-infeasible_tol` means the slice is empty.
    pub infeasible_tol: f64,
    /// Max-min-eigenvalue above `interior_tol` means a positive definite point exists.
    pub interior_tol: f64,
    /// Eigenvalues above this cut span the support of a face point.
    pub support_cut: f64,
    /// Barrier path-following stops once `mu * size` falls below this.
    pub gap_tol: f64,
    /// Relative singular value cut for the face's linear constraints.
    pub linear_tol: f64,
    /// Cap on Newton steps per solve.
    pub max_iter: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            infeasible_tol: 1e-10,
            interior_tol: 1e-9,
            support_cut: 1e-8,
            gap_tol: 1e-13,
            linear_tol: 1e-13,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Pencil {
    pub a0: CMat,
    pub dirs: Vec<CMat>,
}

impl Pencil {
    pub fn size(&self) -> usize {
        self.a0.nrows()
    }

    pub fn eval(&self, z: &DVector<f64>) -> CMat {
        let mut m = self.a0.clone();
        for (d, &c) in self.dirs.iter().zip(z.iter()) {
            if c != 0.0 {
                m += d * Complex64::new(c, 0.0);
            }
        }
        m
    }

    fn linear(&self, w: &[f64]) -> CMat {
        let n = self.size();
        let mut m = CMat::zeros(n, n);
        for (d, &c) in self.dirs.iter().zip(w) {
            m += d * Complex64::new(c, 0.0);
        }
        m
    }

    /// Restriction to `point + basis * z` compressed by the isometry `v`.
    pub fn restrict(&self, v: &CMat, point: &DVector<f64>, basis: &DMatrix<f64>) -> Pencil {
        let a0 = v.adjoint() * self.eval(point) * v;
        let dirs = (0..basis.ncols())
            .map(|l| {
                let w: Vec<f64> = basis.column(l).iter().copied().collect();
                v.adjoint() * self.linear(&w) * v
            })
            .collect();
        Pencil { a0, dirs }
    }
}

fn spectrum(m: &CMat) -> Spectrum {
    HermitianMatrix::symmetrized(m.clone()).spectrum()
}

fn min_eig(m: &CMat) -> f64 {
    spectrum(m).eigenvalues[0]
}

/// Directions rotated into the eigenbasis of the current iterate.
pub(crate) fn rotate_all(spec: &Spectrum, dirs: &[CMat]) -> Vec<CMat> {
    let q = &spec.eigenvectors;
    dirs.iter().map(|d| q.adjoint() * d * q).collect()
}

/// `sum_ab Re(G_u[a,b] G_v[b,a]) * k(a, b)`.
pub(crate) fn kernel_pair(gu: &CMat, gv: &CMat, k: &DMatrix<f64>) -> f64 {
    let n = gu.nrows();
    let mut acc = 0.0;
    for a in 0..n {
        for b in 0..n {
            acc += (gu[(a, b)] * gv[(b, a)]).re * k[(a, b)];
        }
    }
    acc
}

#[derive(Debug, Clone)]
pub(crate) struct MaxMinEig {
    pub z: DVector<f64>,
    /// `lambda_min(C(z))` at the returned point.
    pub value: f64,
    /// Central path points `(z, t)` of the last stages, oldest first.
    pub trail: Vec<(DVector<f64>, f64)>,
}

/// Outcome of a feasibility-only run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Feasibility {
    Feasible(f64),
    Infeasible(f64),
}

enum Stop {
    Done(MaxMinEig),
    Early(Feasibility),
}

/// Maximizes `lambda_min(C(z))` by following the central path of
/// `t + mu log det(C(z) - t I)` as `mu -> 0`.
pub(crate) fn maximize_min_eigenvalue(p: &Pencil, settings: &SdpSettings) -> Result<MaxMinEig> {
    match max_min_eig_inner(p, settings, None)? {
        Stop::Done(r) => Ok(r),
        Stop::Early(_) => unreachable!("no early exit requested"),
    }
}

/// Decides whether the slice contains a point with `lambda_min >= -tol`.
pub(crate) fn feasibility(p: &Pencil, tol: f64, settings: &SdpSettings) -> Result<Feasibility> {
    match max_min_eig_inner(p, settings, Some(tol))? {
        Stop::Done(r) => Ok(if r.value >= -tol {
            Feasibility::Feasible(r.value)
        } else {
            Feasibility::Infeasible(r.value)
        }),
        Stop::Early(f) => Ok(f),
    }
}

fn max_min_eig_inner(p: &Pencil, settings: &SdpSettings, early: Option<f64>) -> Result<Stop> {
    let q = p.dirs.len();
    let r = p.size();
    let mut z = DVector::zeros(q);
    let c = p.eval(&z);
    let lam0 = min_eig(&c);
    if q == 0 {
        return Ok(Stop::Done(MaxMinEig {
            z,
            value: lam0,
            trail: Vec::new(),
        }));
    }
    if let Some(tol) = early {
        if lam0 >= -tol {
            return Ok(Stop::Early(Feasibility::Feasible(lam0)));
        }
    }
    let mut t = lam0 - 1.0;
    let mut mu = 0.1;
    let mut steps = 0usize;
    let n = q + 1;
    let ident = CMat::identity(r, r);
    let mut trail: Vec<(DVector<f64>, f64)> = Vec::new();

    let objective = |z: &DVector<f64>, t: f64, mu: f64| -> Option<(f64, Spectrum)> {
        let s = p.eval(z) - &ident * Complex64::new(t, 0.0);
        let spec = spectrum(&s);
        if spec.eigenvalues[0] <= 0.0 {
            return None;
        }
        let f = t + mu * spec.eigenvalues.iter().map(|l| l.ln()).sum::<f64>();
        Some((f, spec))
    };

    loop {
        for _ in 0..60 {
            let (f, spec) = match objective(&z, t, mu) {
                Some(v) => v,
                None => break,
            };
            let lam = &spec.eigenvalues;
            let g = rotate_all(&spec, &p.dirs);
            let mut grad = DVector::zeros(n);
            let mut neg_h = DMatrix::zeros(n, n);
            let kern = DMatrix::from_fn(r, r, |a, b| 1.0 / (lam[a] * lam[b]));
            for u in 0..q {
                grad[u] = mu * (0..r).map(|a| g[u][(a, a)].re / lam[a]).sum::<f64>();
                for v in u..q {
                    let h = mu * kernel_pair(&g[u], &g[v], &kern);
                    neg_h[(u, v)] = h;
                    neg_h[(v, u)] = h;
                }
                let ht = -mu * (0..r).map(|a| g[u][(a, a)].re / (lam[a] * lam[a])).sum::<f64>();
                neg_h[(u, q)] = ht;
                neg_h[(q, u)] = ht;
            }
            grad[q] = 1.0 - mu * lam.iter().map(|l| 1.0 / l).sum::<f64>();
            neg_h[(q, q)] = mu * lam.iter().map(|l| 1.0 / (l * l)).sum::<f64>();

            let delta = spd_solve(&neg_h, &grad);
            let dec2 = grad.dot(&delta);
            if dec2.is_nan() || dec2 / mu <= 1e-12 {
                break;
            }
            let nd = (dec2 / mu).sqrt();
            let mut step = if nd > 0.25 { 1.0 / (1.0 + nd) } else { 1.0 };
            let mut accepted = false;
            for _ in 0..60 {
                let zn = &z + delta.rows(0, q) * step;
                let tn = t + delta[q] * step;
                if let Some((fn_, _)) = objective(&zn, tn, mu) {
                    if fn_ >= f - 1e-15 * f.abs().max(1.0) {
                        z = zn;
                        t = tn;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            steps += 1;
            if steps > settings.max_iter {
                return Err(Error::NonConvergence {
                    solver: "max-min-eigenvalue barrier",
                    iterations: steps,
                    residual: dec2,
                });
            }
            if !accepted {
                break;
            }
        }
        let value = min_eig(&p.eval(&z));
        trail.push((z.clone(), t));
        if trail.len() > 3 {
            trail.remove(0);
        }
        if let Some(tol) = early {
            if value >= -tol {
                return Ok(Stop::Early(Feasibility::Feasible(value)));
            }
            // On the central path the optimum exceeds t by at most mu * r.
            if t + 2.0 * mu * (r as f64) < -tol {
                return Ok(Stop::Early(Feasibility::Infeasible(t)));
            }
        }
        if mu * r as f64 <= settings.gap_tol {
            return Ok(Stop::Done(MaxMinEig { z, value, trail }));
        }
        mu *= 0.1;
    }
}

/// Minimal face of the PSD cone containing a slice, with a point of maximal
/// slack on it.
#[derive(Debug, Clone)]
pub(crate) struct Face {
    /// Isometry `N x r` onto the common support of the slice.
    pub v: CMat,
    /// Max-slack point in the original pencil coordinates.
    pub point: DVector<f64>,
    /// Orthonormal columns spanning the directions that stay inside the face.
    pub basis: DMatrix<f64>,
    pub reductions: usize,
}

impl Face {
    pub fn rank(&self) -> usize {
        self.v.ncols()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn compressed(&self, p: &Pencil) -> Pencil {
        p.restrict(&self.v, &self.point, &self.basis)
    }

    pub fn lift(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.point + &self.basis * z
    }
}

pub(crate) fn find_face(p: &Pencil, settings: &SdpSettings) -> Result<Face> {
    let n = p.size();
    let dim = p.dirs.len();
    let mut v = CMat::identity(n, n);
    let mut point = DVector::zeros(dim);
    let mut basis = DMatrix::identity(dim, dim);
    let mut reductions = 0;

    for _ in 0..=n {
        let cp = p.restrict(&v, &point, &basis);
        let best = maximize_min_eigenvalue(&cp, settings)?;
        if best.value < -settings.infeasible_tol {
            return Err(Error::Infeasible { slack: best.value });
        }
        let y = &point + &basis * &best.z;
        if best.value > settings.interior_tol {
            return Ok(Face {
                v,
                point: y,
                basis,
                reductions,
            });
        }
        let spec = spectrum(&cp.eval(&best.z));
        let r = v.ncols();
        // A direction belongs to the face when its eigenvalue stays put along
        // the central path; directions exposed by the dual shrink with mu.
        // Near-tangent slices park the path far off the face (at distance
        // ~mu / curvature), so a plain eigenvalue cut misses them.
        let shrinking: Vec<bool> = match best.trail.first() {
            Some((z_old, t_old)) if best.trail.len() >= 3 => {
                let (_, t_new) = best.trail.last().expect("non-empty");
                let old = cp.eval(z_old);
                (0..r)
                    .map(|a| {
                        let e = spec.eigenvectors.column(a);
                        let g_old = (e.adjoint() * &old * e)[(0, 0)].re - t_old;
                        let g_new = spec.eigenvalues[a] - t_new;
                        g_old > 0.0 && g_new <= 0.2 * g_old
                    })
                    .collect()
            }
            _ => vec![false; r],
        };
        let dropped = |a: usize| spec.eigenvalues[a] <= settings.support_cut || shrinking[a];
        let keep: Vec<usize> = (0..r).filter(|&a| !dropped(a)).collect();
        let drop: Vec<usize> = (0..r).filter(|&a| dropped(a)).collect();
        if keep.is_empty() {
            return Err(Error::Infeasible { slack: best.value });
        }
        let e_keep = CMat::from_fn(r, keep.len(), |i, j| spec.eigenvectors[(i, keep[j])]);
        let e_drop = CMat::from_fn(r, drop.len(), |i, j| spec.eigenvectors[(i, drop[j])]);

        // Points of the face have no weight on the dropped eigenvectors:
        // E_drop^dagger C(z) [E_drop, E_keep] = 0, linear in z.
        let c_at = |m: &CMat| -> Vec<f64> {
            let dd = e_drop.adjoint() * m * &e_drop;
            let dk = e_drop.adjoint() * m * &e_keep;
            let mut out = Vec::new();
            for i in 0..dd.nrows() {
                out.push(dd[(i, i)].re);
                for j in (i + 1)..dd.ncols() {
                    out.push(dd[(i, j)].re);
                    out.push(dd[(i, j)].im);
                }
            }
            for z in dk.iter() {
                out.push(z.re);
                out.push(z.im);
            }
            out
        };
        let rhs: Vec<f64> = c_at(&cp.eval(&best.z)).into_iter().map(|x| -x).collect();
        let q = cp.dirs.len();
        let cols: Vec<Vec<f64>> = cp.dirs.iter().map(c_at).collect();
        let mrows = rhs.len();
        let a = DMatrix::from_fn(mrows, q, |i, j| cols[j][i]);
        let ls = least_squares(&a, &DVector::from_vec(rhs), settings.linear_tol);

        let z_new = &best.z + &ls.solution;
        point = &point + &basis * z_new;
        basis = if q == 0 { basis } else { &basis * &ls.null_space };
        if basis.ncols() == 0 {
            basis = DMatrix::zeros(dim, 0);
        }
        v = &v * &e_keep;
        reductions += 1;
    }
    Err(Error::NonConvergence {
        solver: "facial reduction",
        iterations: reductions,
        residual: f64::NAN,
    })
}

/// Euclidean projection (in pencil coordinates) of `target` onto the face.
pub(crate) fn project_onto_face(p: &Pencil, face: &Face, target: &DVector<f64>, settings: &SdpSettings) -> Result<DVector<f64>> {
    let cp = face.compressed(p);
    let q = cp.dirs.len();
    if q == 0 {
        return Ok(face.point.clone());
    }
    let r_vec = face.basis.transpose() * (target - &face.point);
    if min_eig(&cp.eval(&r_vec)) > 0.0 {
        return Ok(face.lift(&r_vec));
    }
    let size = cp.size();
    let barrier = |z: &DVector<f64>, mu: f64| -> Option<(f64, Spectrum)> {
        let spec = spectrum(&cp.eval(z));
        if spec.eigenvalues[0] <= 0.0 {
            return None;
        }
        let f = 0.5 * (z - &r_vec).norm_squared() - mu * spec.eigenvalues.iter().map(|l| l.ln()).sum::<f64>();
        Some((f, spec))
    };
    let mut z = DVector::zeros(q);
    let mut mu = 1e-1;
    let mut steps = 0;
    loop {
        for _ in 0..80 {
            let (f, spec) = match barrier(&z, mu) {
                Some(v) => v,
                None => break,
            };
            let lam = &spec.eigenvalues;
            let g = rotate_all(&spec, &cp.dirs);
            let kern = DMatrix::from_fn(size, size, |a, b| 1.0 / (lam[a] * lam[b]));
            let mut grad = &z - &r_vec;
            let mut hess = DMatrix::identity(q, q);
            for u in 0..q {
                grad[u] -= mu * (0..size).map(|a| g[u][(a, a)].re / lam[a]).sum::<f64>();
                for w in u..q {
                    let h = mu * kernel_pair(&g[u], &g[w], &kern);
                    hess[(u, w)] += h;
                    if w != u {
                        hess[(w, u)] += h;
                    }
                }
            }
            let delta = -spd_solve(&hess, &grad);
            let dec = -grad.dot(&delta);
            if dec.is_nan() || dec <= 1e-30 {
                break;
            }
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let zn = &z + &delta * step;
                if let Some((fn_, _)) = barrier(&zn, mu) {
                    if fn_ <= f - 1e-4 * step * dec {
                        z = zn;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            steps += 1;
            if steps > settings.max_iter {
                return Err(Error::NonConvergence {
                    solver: "face projection barrier",
                    iterations: steps,
                    residual: dec,
                });
            }
            if !accepted || dec < 1e-26 {
                break;
            }
        }
        if mu <= settings.gap_tol * 1e-3 {
            break;
        }
        mu *= 0.1;
    }
    Ok(face.lift(&z))
}

#[derive(Debug, Clone)]
pub(crate) struct EntropyAscent {
    pub y: DVector<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Maximizes the von Neumann entropy over the face by Newton's method in the
/// face coordinates, with the divided-difference Hessian of `-tr C log C`.
pub(crate) fn maximize_entropy_on_face(
    p: &Pencil,
    face: &Face,
    start: Option<&DVector<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<EntropyAscent> {
    let cp = face.compressed(p);
    let q = cp.dirs.len();
    if q == 0 {
        return Ok(EntropyAscent {
            y: face.point.clone(),
            iterations: 0,
            gradient_norm: 0.0,
        });
    }
    let size = cp.size();
    let entropy = |z: &DVector<f64>| -> Option<(f64, Spectrum)> {
        let spec = spectrum(&cp.eval(z));
        if spec.eigenvalues[0] <= 0.0 {
            return None;
        }
        let e = -spec.eigenvalues.iter().map(|&l| l * l.ln()).sum::<f64>();
        Some((e, spec))
    };
    let mut z = match start {
        Some(s) if s.len() == q => s.clone(),
        _ => DVector::zeros(q),
    };
    for _ in 0..60 {
        if entropy(&z).is_some() {
            break;
        }
        z *= 0.5;
    }
    if entropy(&z).is_none() {
        z = DVector::zeros(q);
    }
    let mut gnorm = f64::INFINITY;
    let mut stalled = 0;
    for it in 0..max_iter {
        let (e, spec) = entropy(&z).ok_or(Error::NonConvergence {
            solver: "face entropy ascent",
            iterations: it,
            residual: gnorm,
        })?;
        let lam = &spec.eigenvalues;
        let g = rotate_all(&spec, &cp.dirs);
        let kern = DMatrix::from_fn(size, size, |a, b| log_divided_difference(lam[a], lam[b]));
        let mut grad = DVector::zeros(q);
        let mut neg_h = DMatrix::zeros(q, q);
        for u in 0..q {
            grad[u] = -(0..size).map(|a| g[u][(a, a)].re * (lam[a].ln() + 1.0)).sum::<f64>();
            for w in u..q {
                let h = kernel_pair(&g[u], &g[w], &kern);
                neg_h[(u, w)] = h;
                neg_h[(w, u)] = h;
            }
        }
        gnorm = grad.norm();
        if gnorm <= tol {
            return Ok(EntropyAscent {
                y: face.lift(&z),
                iterations: it,
                gradient_norm: gnorm,
            });
        }
        let delta = spd_solve(&neg_h, &grad);
        let slope = grad.dot(&delta);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..80 {
            let zn = &z + &delta * step;
            if let Some((en, _)) = entropy(&zn) {
                if en >= e + 1e-4 * step * slope {
                    z = zn;
                    accepted = true;
                    // Gains below rounding: the line search accepts steps
                    // that make no measurable progress.
                    stalled = if en - e <= 4.0 * f64::EPSILON * e.abs().max(1.0) { stalled + 1 } else { 0 };
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted || stalled >= 3 {
            // Entropy is flat to machine precision along the Newton direction.
            if gnorm <= tol * 1e3 {
                return Ok(EntropyAscent {
                    y: face.lift(&z),
                    iterations: it,
                    gradient_norm: gnorm,
                });
            }
            return Err(Error::NonConvergence {
                solver: "face entropy ascent",
                iterations: it,
                residual: gnorm,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "face entropy ascent",
        iterations: max_iter,
        residual: gnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entropy_at(p: &Pencil, y: &DVector<f64>) -> f64 {
        crate::hermitian::entropy_of_spectrum(&spectrum(&p.eval(y)).eigenvalues)
    }

    fn real(n: usize, v: &[f64]) -> CMat {
        CMat::from_fn(n, n, |i, j| Complex64::new(v[i * n + j], 0.0))
    }

    // Diagonal slice {diag(1 - y, y) : 0 <= y <= 1} written with an
    // orthonormal direction (-1, 1)/sqrt(2).
    fn segment() -> Pencil {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Pencil {
            a0: real(2, &[0.5, 0.0, 0.0, 0.5]),
            dirs: vec![real(2, &[-s, 0.0, 0.0, s])],
        }
    }

    #[test]
    fn max_min_eigenvalue_of_segment() {
        let r = maximize_min_eigenvalue(&segment(), &SdpSettings::default()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-10);
        assert!(r.z[0].abs() < 1e-8);
    }

    #[test]
    fn face_of_rank_deficient_slice() {
        // diag(1 - y, y, 0): the third eigenvalue is zero on the whole slice.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = Pencil {
            a0: real(3, &[0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]),
            dirs: vec![real(3, &[-s, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, 0.0])],
        };
        let face = find_face(&p, &SdpSettings::default()).unwrap();
        assert_eq!(face.rank(), 2);
        assert_eq!(face.dim(), 1);
        assert!(min_eig(&face.compressed(&p).eval(&DVector::zeros(face.dim()))) > 0.4);
    }

    #[test]
    fn infeasible_slice_is_reported() {
        let p = Pencil {
            a0: real(2, &[1.5, 0.0, 0.0, -0.5]),
            dirs: vec![],
        };
        let err = find_face(&p, &SdpSettings::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
        let f = feasibility(&segment(), 1e-12, &SdpSettings::default()).unwrap();
        assert!(matches!(f, Feasibility::Feasible(_)));
    }

    #[test]
    fn projection_onto_segment_clips() {
        let p = segment();
        let face = find_face(&p, &SdpSettings::default()).unwrap();
        // y ranges over [-1/sqrt2, 1/sqrt2] in pencil coordinates.
        let y = project_onto_face(&p, &face, &DVector::from_vec(vec![3.0]), &SdpSettings::default()).unwrap();
        assert!((y[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8, "{}", y[0]);
        let inside = project_onto_face(&p, &face, &DVector::from_vec(vec![0.2]), &SdpSettings::default()).unwrap();
        assert!((inside[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn entropy_on_segment_peaks_at_midpoint() {
        let p = segment();
        let face = find_face(&p, &SdpSettings::default()).unwrap();
        let start = DVector::from_vec(vec![0.5]);
        let r = maximize_entropy_on_face(&p, &face, Some(&start), 1e-12, 100).unwrap();
        assert!(r.y[0].abs() < 1e-10);
        assert!((entropy_at(&p, &r.y) - 2f64.ln()).abs() < 1e-14);
    }
}
