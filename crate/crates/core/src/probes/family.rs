//! Families of mean values approaching a target `m` at prescribed distances.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{Backend, Element, MeanValue, Model};
use crate::hermitian::{CMat, HermitianMatrix};

/// How the sampled mean values approach the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ApproachFamily {
    /// Straight towards the image of the state space's center.
    InteriorRadial,
    /// Along a fixed random unit direction.
    RandomDirection { seed: u64 },
    /// Along the boundary of the mean value set, turning towards tangent
    /// direction `tangent` (with the given orientation).
    BoundaryArc { tangent: usize, positive: bool },
    /// Mean values of `(1 - t) Phi(m) + t * center` for `t` on the ladder;
    /// generated by the closure probe, which knows `Phi(m)`.
    CentreMixture,
}

impl ApproachFamily {
    pub fn label(&self) -> String {
        match self {
            ApproachFamily::InteriorRadial => "interior_radial".into(),
            ApproachFamily::RandomDirection { seed } => format!("random_direction[{seed}]"),
            ApproachFamily::BoundaryArc { tangent, positive } => {
                format!("boundary_arc[{tangent}{}]", if *positive { "+" } else { "-" })
            }
            ApproachFamily::CentreMixture => "centre_mixture".into(),
        }
    }
}

/// Radial, `random` random directions seeded from `seed`, and both
/// orientations of every boundary tangent of a `dims`-dimensional mean value set.
pub fn default_families(dims: usize, random: usize, seed: u64) -> Vec<ApproachFamily> {
    let mut out = vec![ApproachFamily::InteriorRadial];
    out.extend((0..random as u64).map(|i| ApproachFamily::RandomDirection { seed: seed.wrapping_add(i) }));
    for tangent in 0..dims.saturating_sub(1) {
        for positive in [true, false] {
            out.push(ApproachFamily::BoundaryArc { tangent, positive });
        }
    }
    out
}

/// `n` geometric scales from `hi` down to `lo`.
pub fn geometric_ladder(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let step = (lo / hi).ln() / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { lo } else { hi * (step * i as f64).exp() }).collect()
}

#[derive(Debug, Clone)]
pub(crate) enum Candidate {
    Mean(MeanValue),
    Infeasible(MeanValue),
    NotApplicable,
}

/// Outward direction at a boundary target and the tangents orthogonal to it.
#[derive(Debug, Clone)]
struct BoundaryFrame {
    outward: DVector<f64>,
    tangents: Vec<DVector<f64>>,
}

/// Geometry around the target needed to generate every family.
pub(crate) struct Approach<'a> {
    model: &'a Model,
    m: DVector<f64>,
    centre: DVector<f64>,
    dirs: Vec<DVector<f64>>,
    observables: Vec<CMat>,
    frame: Option<BoundaryFrame>,
}

/// Support gap below which the target counts as a boundary point.
const BOUNDARY_GAP: f64 = 1e-9;
/// Membership cut for boundary walks and samples of polytope models.
const STRICT_GAP: f64 = 1e-13;

impl<'a> Approach<'a> {
    pub fn new(model: &'a Model, m: &MeanValue) -> Result<Self> {
        let centre = model.project_mean(&model.space().center())?.coords().clone();
        let dirs = model.mean_directions();
        let observables = match model.space().backend() {
            Backend::Matrix => model
                .observables()
                .basis_elements(model.space())
                .into_iter()
                .map(|e| match e {
                    Element::Matrix(h) => h.into_matrix(),
                    Element::Point(_) => unreachable!("matrix backend"),
                })
                .collect(),
            Backend::Polytope => Vec::new(),
        };
        let mut a = Approach {
            model,
            m: m.coords().clone(),
            centre,
            dirs,
            observables,
            frame: None,
        };
        a.frame = a.boundary_frame()?;
        Ok(a)
    }

    fn in_span(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for d in &self.dirs {
            out.axpy(d.dot(v), d, 1.0);
        }
        out
    }

    fn complement(&self, first: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut basis = vec![first.clone()];
        let mut out = Vec::new();
        for d in &self.dirs {
            let mut v = d.clone();
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&v);
                    v.axpy(-c, b, 1.0);
                }
            }
            if v.norm() > 1e-8 {
                let v = v.normalize();
                basis.push(v.clone());
                out.push(v);
            }
        }
        out
    }

    fn start_direction(&self) -> Option<DVector<f64>> {
        let d = self.in_span(&(&self.m - &self.centre));
        if d.norm() > 1e-12 {
            Some(d.normalize())
        } else {
            self.dirs.first().cloned()
        }
    }

    /// Mean value of the maximally mixed state on the top eigenspace of
    /// `sum n_i u_i`, i.e. of the face of states exposed by `n`, and the
    /// top eigenvalue.
    fn exposed(&self, n: &DVector<f64>) -> (DVector<f64>, f64) {
        let size = self.observables[0].nrows();
        let mut h = CMat::zeros(size, size);
        for (u, &c) in self.observables.iter().zip(n.iter()) {
            h += u * num_complex::Complex64::new(c, 0.0);
        }
        let spec = HermitianMatrix::symmetrized(h).spectrum();
        let top = *spec.eigenvalues.last().expect("non-empty");
        let cut = top - 1e-13 * top.abs().max(1.0);
        let group: Vec<usize> = (0..size).filter(|&a| spec.eigenvalues[a] >= cut).collect();
        let mut p = CMat::zeros(size, size);
        for &a in &group {
            let v = spec.eigenvectors.column(a);
            p += v * v.adjoint();
        }
        p /= num_complex::Complex64::new(group.len() as f64, 0.0);
        let state = Element::Matrix(HermitianMatrix::symmetrized(p));
        let mean = self.model.project_mean(&state).expect("matching dimensions");
        (mean.coords().clone(), top)
    }

    /// Outward unit normal minimizing the support gap `h(n) - <n, m>` over
    /// the unit sphere, by projected gradient descent.
    fn outward_normal(&self) -> Option<(DVector<f64>, f64)> {
        let mut n = self.start_direction()?;
        let gap = |n: &DVector<f64>| {
            let (mp, top) = self.exposed(n);
            (top - n.dot(&self.m), self.in_span(&(mp - &self.m)))
        };
        let (mut g, mut grad) = gap(&n);
        let mut step = 1.0;
        for _ in 0..2000 {
            let rg = &grad - &n * grad.dot(&n);
            if rg.norm() <= 1e-15 || g <= 0.0 {
                break;
            }
            let mut moved = false;
            while step > 1e-18 {
                let cand = (&n - &rg * step).normalize();
                let (gc, gradc) = gap(&cand);
                if gc < g {
                    n = cand;
                    g = gc;
                    grad = gradc;
                    step *= 2.0;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        Some((n, g))
    }

    fn boundary_frame(&self) -> Result<Option<BoundaryFrame>> {
        let outward = match self.model.space().backend() {
            Backend::Matrix => match self.outward_normal() {
                Some((n, g)) if g <= BOUNDARY_GAP => n,
                _ => return Ok(None),
            },
            Backend::Polytope => {
                let e0 = match self.start_direction() {
                    Some(e) if (&self.m - &self.centre).norm() > 1e-12 => e,
                    _ => return Ok(None),
                };
                let r = self.ray_exit(&e0)?;
                let radius = (&self.m - &self.centre).norm();
                if r - radius > BOUNDARY_GAP * radius.max(1.0) {
                    return Ok(None);
                }
                e0
            }
        };
        let tangents = self.complement(&outward);
        Ok(Some(BoundaryFrame { outward, tangents }))
    }

    fn strictly_feasible(&self, m: &DVector<f64>) -> Result<bool> {
        self.model.is_feasible(&MeanValue::from_vector(m.clone()), STRICT_GAP)
    }

    /// Largest `r` with `centre + r dir` in the mean value set (polytopes).
    fn ray_exit(&self, dir: &DVector<f64>) -> Result<f64> {
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.strictly_feasible(&(&self.centre + dir * hi))? {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Ok(lo);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.strictly_feasible(&(&self.centre + dir * mid))? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    fn arc_point(&self, frame: &BoundaryFrame, t: &DVector<f64>, psi: f64) -> Result<DVector<f64>> {
        let dir = &frame.outward * psi.cos() + t * psi.sin();
        match self.model.space().backend() {
            Backend::Matrix => Ok(self.exposed(&dir).0),
            Backend::Polytope => {
                let r = self.ray_exit(&dir)?;
                Ok(&self.centre + dir * r)
            }
        }
    }

    /// Boundary point at distance `delta` from the target, turning towards `t`.
    fn arc_at(&self, frame: &BoundaryFrame, t: &DVector<f64>, delta: f64) -> Result<Option<DVector<f64>>> {
        let dist = |p: &DVector<f64>| (p - &self.m).norm();
        let mut lo = 0.0;
        let mut hi = delta;
        let mut p_hi = self.arc_point(frame, t, hi)?;
        while dist(&p_hi) < delta {
            lo = hi;
            hi *= 2.0;
            if hi > std::f64::consts::FRAC_PI_2 {
                return Ok(None);
            }
            p_hi = self.arc_point(frame, t, hi)?;
        }
        if dist(&self.arc_point(frame, t, lo)?) > delta {
            return Ok(None);
        }
        let mut best = p_hi;
        for _ in 0..100 {
            if (dist(&best) - delta).abs() <= 1e-4 * delta {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let p = self.arc_point(frame, t, mid)?;
            if dist(&p) < delta {
                lo = mid;
            } else {
                hi = mid;
            }
            best = p;
        }
        Ok(Some(best))
    }

    fn checked(&self, m: DVector<f64>) -> Result<Candidate> {
        let mv = MeanValue::from_vector(m);
        let ok = match self.model.space().backend() {
            Backend::Matrix => self.model.is_feasible(&mv, self.model.sdp().infeasible_tol)?,
            Backend::Polytope => self.model.is_feasible(&mv, STRICT_GAP)?,
        };
        Ok(if ok { Candidate::Mean(mv) } else { Candidate::Infeasible(mv) })
    }

    fn along(&self, u: &DVector<f64>, ladder: &[f64]) -> Result<Vec<Candidate>> {
        ladder.iter().map(|&d| self.checked(&self.m + u * d)).collect()
    }

    pub fn candidates(&self, family: &ApproachFamily, ladder: &[f64]) -> Result<Vec<Candidate>> {
        match family {
            ApproachFamily::InteriorRadial => {
                let to_centre = self.in_span(&(&self.centre - &self.m));
                let u = if to_centre.norm() > 1e-12 {
                    to_centre.normalize()
                } else {
                    match self.dirs.first() {
                        Some(d) => d.clone(),
                        None => return Ok(vec![Candidate::NotApplicable; ladder.len()]),
                    }
                };
                self.along(&u, ladder)
            }
            ApproachFamily::RandomDirection { seed } => {
                if self.dirs.is_empty() {
                    return Ok(vec![Candidate::NotApplicable; ladder.len()]);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut u = DVector::zeros(self.m.len());
                while u.norm() < 1e-3 {
                    u = DVector::zeros(self.m.len());
                    for d in &self.dirs {
                        u.axpy(rng.random_range(-1.0..1.0), d, 1.0);
                    }
                }
                self.along(&u.normalize(), ladder)
            }
            ApproachFamily::CentreMixture => Ok(vec![Candidate::NotApplicable; ladder.len()]),
            ApproachFamily::BoundaryArc { tangent, positive } => {
                let (frame, t) = match &self.frame {
                    Some(f) if *tangent < f.tangents.len() => {
                        let t = &f.tangents[*tangent];
                        (f, if *positive { t.clone() } else { -t })
                    }
                    _ => return Ok(vec![Candidate::NotApplicable; ladder.len()]),
                };
                ladder
                    .iter()
                    .map(|&d| {
                        Ok(match self.arc_at(frame, &t, d)? {
                            Some(p) => Candidate::Mean(MeanValue::from_vector(p)),
                            None => Candidate::NotApplicable,
                        })
                    })
                    .collect()
            }
        }
    }
}
