//! Numerical certificates for openness of the projection and continuity of
//! the inference.
//!
//! Every probe samples mean values along approach families at decreasing
//! distances `delta`, measures a quantity at each sample and extrapolates the
//! per-family sequences. Samples run in parallel; records are collected in a
//! fixed order, so reports do not depend on the thread count.

mod family;
mod report;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use family::{default_families, geometric_ladder, ApproachFamily};
pub use report::{trend_limit, FamilyEstimate, ProbeKind, ProbeReport, SampleRecord, SampleStatus, Thresholds, Verdict};

use crate::error::{Error, Result};
use crate::geometry::{orthonormalize, range_basis, Backend, Element, MeanValue, Model, ObservableSubspace, StateSpace};
use crate::hermitian::{HermitianMatrix, CMat};
use crate::maxent::{infer, DisorderlinessMeasure};
use family::{Approach, Candidate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSettings {
    /// Decreasing sample distances.
    pub ladder: Vec<f64>,
    /// Openness and continuity: values at most `lower` are open/continuous,
    /// at least `upper` not open/discontinuous.
    pub lower: f64,
    pub upper: f64,
    pub usc_tol: f64,
    pub closure_tol: f64,
    pub closure_rungs: usize,
    pub midpoint_tol: f64,
    pub random_directions: usize,
    /// Largest tolerated fraction of failed samples.
    pub failure_budget: f64,
    /// Seed of the random families; set from the scenario, not serialized.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            ladder: geometric_ladder(1e-1, 1e-5, 9),
            lower: 1e-3,
            upper: 1e-2,
            usc_tol: 1e-6,
            closure_tol: 1e-4,
            closure_rungs: 12,
            midpoint_tol: 1e-2,
            random_directions: 4,
            failure_budget: 0.1,
            seed: 0,
        }
    }
}

impl ProbeSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.ladder.is_empty() || self.ladder.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return bad("ladder entries must be positive and finite");
        }
        if self.ladder.windows(2).any(|w| w[1] >= w[0]) {
            return bad("ladder must be strictly decreasing");
        }
        if !(self.lower > 0.0 && self.lower <= self.upper) {
            return bad("thresholds must satisfy 0 < lower <= upper");
        }
        if !(0.0..=1.0).contains(&self.failure_budget) {
            return bad("failure_budget must lie in [0, 1]");
        }
        if self.closure_rungs == 0 {
            return bad("closure_rungs must be positive");
        }
        Ok(())
    }

    fn two_sided(&self) -> Thresholds {
        Thresholds {
            lower: self.lower,
            upper: self.upper,
        }
    }

    fn one_sided(tol: f64) -> Thresholds {
        Thresholds { lower: tol, upper: tol }
    }
}

/// The default family set for a model: radial, random and boundary walks.
pub fn families_for(model: &Model, settings: &ProbeSettings) -> Vec<ApproachFamily> {
    default_families(model.mean_directions().len(), settings.random_directions, settings.seed)
}

fn record(family: usize, rung: usize, delta: f64, mean: Vec<f64>, status: SampleStatus, value: Option<f64>) -> SampleRecord {
    SampleRecord {
        family,
        rung,
        delta,
        mean,
        status,
        value,
    }
}

/// Generates every family's mean values and measures them in parallel.
fn sample<F>(model: &Model, m: &MeanValue, families: &[ApproachFamily], settings: &ProbeSettings, measure: F) -> Result<Vec<SampleRecord>>
where
    F: Fn(&MeanValue) -> Result<f64> + Sync,
{
    let approach = Approach::new(model, m)?;
    let ladder = &settings.ladder;
    let generated: Vec<Option<Vec<Candidate>>> = families.par_iter().map(|f| approach.candidates(f, ladder).ok()).collect();
    let tasks: Vec<(usize, usize, Option<Candidate>)> = generated
        .into_iter()
        .enumerate()
        .flat_map(|(f, c)| match c {
            Some(c) => c.into_iter().enumerate().map(|(k, c)| (f, k, Some(c))).collect::<Vec<_>>(),
            None => (0..ladder.len()).map(|k| (f, k, None)).collect(),
        })
        .collect();
    let records: Vec<SampleRecord> = tasks
        .into_par_iter()
        .map(|(f, k, c)| {
            let delta = ladder[k];
            match c {
                None => record(f, k, delta, Vec::new(), SampleStatus::Failed, None),
                Some(Candidate::NotApplicable) => record(f, k, delta, Vec::new(), SampleStatus::NotApplicable, None),
                Some(Candidate::Infeasible(mv)) => record(f, k, delta, mv.as_slice().to_vec(), SampleStatus::Infeasible, None),
                Some(Candidate::Mean(mv)) => match measure(&mv) {
                    Ok(v) if v.is_finite() => record(f, k, delta, mv.as_slice().to_vec(), SampleStatus::Ok, Some(v)),
                    _ => record(f, k, delta, mv.as_slice().to_vec(), SampleStatus::Failed, None),
                },
            }
        })
        .collect();
    check_budget(&records, settings.failure_budget)?;
    Ok(records)
}

fn check_budget(records: &[SampleRecord], budget: f64) -> Result<()> {
    let failed = records.iter().filter(|r| r.status == SampleStatus::Failed).count();
    let ok = records.iter().filter(|r| r.status == SampleStatus::Ok).count();
    let total = failed + ok;
    if ok == 0 && failed == 0 {
        return Err(Error::EmptyInput("feasible probe samples"));
    }
    if failed as f64 > budget * total as f64 {
        return Err(Error::ProbeBudget { failed, total });
    }
    Ok(())
}

/// Openness of the projection at `rho`: the limiting distance from `rho` to
/// fibers over nearby mean values.
pub fn openness_probe(model: &Model, rho: &Element, families: &[ApproachFamily], settings: &ProbeSettings) -> Result<ProbeReport> {
    settings.validate()?;
    if !model.space().contains(rho, 1e-8)? {
        return Err(Error::InvalidConfig("openness probe target is not a state".into()));
    }
    let m = model.project_mean(rho)?;
    let records = sample(model, &m, families, settings, |mp| Ok(model.fiber_distance(mp, rho)?.0))?;
    Ok(ProbeReport::assemble(
        ProbeKind::Openness,
        m.as_slice().to_vec(),
        families.to_vec(),
        records,
        settings.two_sided(),
        0.0,
        settings.seed,
    ))
}

/// Continuity of the inference at `m`: the limiting distance between
/// `Phi(m')` and `Phi(m)`.
pub fn continuity_probe(
    model: &Model,
    measure: &DisorderlinessMeasure,
    m: &MeanValue,
    families: &[ApproachFamily],
    settings: &ProbeSettings,
) -> Result<ProbeReport> {
    settings.validate()?;
    let phi = infer(model, m, measure).map_err(|e| e.at_stage("inference at the target"))?.state;
    let records = sample(model, m, families, settings, |mp| infer(model, mp, measure)?.state.distance(&phi))?;
    Ok(ProbeReport::assemble(
        ProbeKind::Continuity,
        m.as_slice().to_vec(),
        families.to_vec(),
        records,
        settings.two_sided(),
        0.0,
        settings.seed,
    ))
}

/// Upper semicontinuity of the fiberwise maximum at `m`: records
/// `max phi over F(m') - max phi over F(m)`.
pub fn usc_probe(
    model: &Model,
    measure: &DisorderlinessMeasure,
    m: &MeanValue,
    families: &[ApproachFamily],
    settings: &ProbeSettings,
) -> Result<ProbeReport> {
    settings.validate()?;
    let base = infer(model, m, measure).map_err(|e| e.at_stage("inference at the target"))?.entropy_value;
    let records = sample(model, m, families, settings, |mp| Ok(infer(model, mp, measure)?.entropy_value - base))?;
    Ok(ProbeReport::assemble(
        ProbeKind::Usc,
        m.as_slice().to_vec(),
        families.to_vec(),
        records,
        ProbeSettings::one_sided(settings.usc_tol),
        base,
        settings.seed,
    ))
}

/// Approaches `Phi(m)` through relative-interior states
/// `(1 - t) Phi(m) + t * center`, `t = 2^-i`, and records how far the
/// inferences at their mean values are from `Phi(m)`.
pub fn closure_probe(model: &Model, measure: &DisorderlinessMeasure, m: &MeanValue, settings: &ProbeSettings) -> Result<ProbeReport> {
    settings.validate()?;
    if *measure != DisorderlinessMeasure::VonNeumann {
        return Err(Error::InvalidConfig("the closure probe needs the von Neumann entropy".into()));
    }
    let phi = infer(model, m, measure).map_err(|e| e.at_stage("inference at the target"))?.state;
    let centre = model.space().center();
    let ts: Vec<f64> = (1..=settings.closure_rungs).map(|i| 0.5f64.powi(i as i32)).collect();
    let records: Vec<SampleRecord> = ts
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let run = || -> Result<(MeanValue, f64)> {
                let mi = model.project_mean(&phi.lerp(&centre, t)?)?;
                let d = infer(model, &mi, measure)?.state.distance(&phi)?;
                Ok((mi, d))
            };
            match run() {
                Ok((mi, d)) => record(0, k, t, mi.as_slice().to_vec(), SampleStatus::Ok, Some(d)),
                Err(_) => record(0, k, t, Vec::new(), SampleStatus::Failed, None),
            }
        })
        .collect();
    check_budget(&records, settings.failure_budget)?;
    Ok(ProbeReport::assemble(
        ProbeKind::Closure,
        m.as_slice().to_vec(),
        vec![ApproachFamily::CentreMixture],
        records,
        ProbeSettings::one_sided(settings.closure_tol),
        0.0,
        settings.seed,
    ))
}

/// Agreement of a continuity verdict at `m` with an openness verdict at `Phi(m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Agree,
    Disagree,
    Inconclusive,
}

pub fn equivalence(continuity: &ProbeReport, openness: &ProbeReport) -> Agreement {
    match (continuity.verdict, openness.verdict) {
        (Verdict::Continuous, Verdict::Open) | (Verdict::Discontinuous, Verdict::NotOpen) => Agreement::Agree,
        (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Agreement::Inconclusive,
        _ => Agreement::Disagree,
    }
}

/// The pieces of the mid-point map as a projection: the state space seen
/// through all of its affine coordinates, and `S x S` observed through the
/// mid-point.
struct MidpointFrame {
    single: Model,
    pair: Model,
    /// Fiber distances in `pair` times this factor are product-norm distances.
    scale: f64,
}

impl MidpointFrame {
    fn new(space: &StateSpace, model_tol: &Model) -> Result<Self> {
        let dirs = space.affine_directions();
        let single = Model::new(space.clone(), ObservableSubspace::from_rows(dirs.transpose()))?.with_tolerances(*model_tol.tolerances());
        let doubled = space.doubled();
        let d = space.dim();
        let mut raw: Vec<Element> = (0..dirs.ncols())
            .map(|j| {
                let mut c = DVector::zeros(2 * d);
                c.rows_mut(0, d).copy_from(&dirs.column(j));
                c.rows_mut(d, d).copy_from(&dirs.column(j));
                doubled.element(&c)
            })
            .collect();
        let scale = match space {
            StateSpace::Matrix(_) => {
                // Both halves carry weight 1/2.
                let n = space.center().as_matrix().expect("matrix backend").dim();
                raw.push(Element::Matrix(HermitianMatrix::direct_sum(&HermitianMatrix::identity(n), &HermitianMatrix::zeros(n))));
                2.0
            }
            StateSpace::Polytope(_) => 1.0,
        };
        let pair = Model::new(doubled.clone(), orthonormalize(&doubled, &raw)?)?.with_tolerances(*model_tol.tolerances());
        Ok(Self { single, pair, scale })
    }

    fn pair_point(&self, x: &Element, y: &Element) -> Result<Element> {
        Ok(match (x, y) {
            (Element::Matrix(a), Element::Matrix(b)) => Element::Matrix(HermitianMatrix::direct_sum(&a.scale(0.5), &b.scale(0.5))),
            (Element::Point(a), Element::Point(b)) => {
                let mut v = DVector::zeros(a.len() + b.len());
                v.rows_mut(0, a.len()).copy_from(a);
                v.rows_mut(a.len(), b.len()).copy_from(b);
                Element::Point(v)
            }
            _ => return Err(Error::InvalidConfig("mixed backends".into())),
        })
    }

    /// Mean value of the pair model whose fiber is `{(x, y) : (x + y)/2 = z}`.
    fn pair_mean(&self, z_mean: &MeanValue, anchor: &DVector<f64>) -> Result<MeanValue> {
        let rows = self.single.observables().rows();
        let zc = anchor + rows.transpose() * (z_mean.coords() - rows * anchor);
        let z = self.single.space().element(&zc);
        self.pair.project_mean(&self.pair_point(&z, &z)?)
    }
}

/// Openness of the mid-point map `(x, y) -> (x + y)/2` at `(x, y)`: the
/// limiting product-norm distance `sqrt(|x' - x|^2 + |y' - y|^2)` needed to
/// reach mid-points `z'` near `z`. `model` supplies tolerances.
pub fn midpoint_stability_probe(model: &Model, x: &Element, y: &Element, settings: &ProbeSettings) -> Result<ProbeReport> {
    settings.validate()?;
    let space = model.space();
    for p in [x, y] {
        if !space.contains(p, 1e-8)? {
            return Err(Error::InvalidConfig("mid-point probe endpoints must be states".into()));
        }
    }
    let frame = MidpointFrame::new(space, model)?;
    let z = x.lerp(y, 0.5)?;
    let mz = frame.single.project_mean(&z)?;
    let anchor = space.coords(&z)?;
    let origin = frame.pair_point(x, y)?;
    let families = families_for(&frame.single, settings);
    let records = sample(&frame.single, &mz, &families, settings, |zp| {
        let pm = frame.pair_mean(zp, &anchor)?;
        Ok(frame.pair.fiber_distance(&pm, &origin)?.0 * frame.scale)
    })?;
    Ok(ProbeReport::assemble(
        ProbeKind::Midpoint,
        mz.as_slice().to_vec(),
        families,
        records,
        ProbeSettings::one_sided(settings.midpoint_tol),
        0.0,
        settings.seed,
    ))
}

/// A state written for reports: matrix entries as `[re, im]` rows, or a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateRecord {
    Matrix(Vec<Vec<[f64; 2]>>),
    Point(Vec<f64>),
}

impl From<&Element> for StateRecord {
    fn from(e: &Element) -> Self {
        match e {
            Element::Matrix(h) => StateRecord::Matrix(h.to_pairs()),
            Element::Point(p) => StateRecord::Point(p.iter().copied().collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberMapPoint {
    /// Position along the sampled chord, from 0 to 1.
    pub parameter: f64,
    pub state: StateRecord,
    pub report: ProbeReport,
}

/// Openness deficits at `grid_size` equispaced points of a chord of `F(m)`
/// through its maximal-support point.
pub fn fiber_openness_map(
    model: &Model,
    m: &MeanValue,
    grid_size: usize,
    families: &[ApproachFamily],
    settings: &ProbeSettings,
) -> Result<Vec<FiberMapPoint>> {
    settings.validate()?;
    let ip = model.fiber_interior_point(m)?;
    let space = model.space();
    let x0 = space.coords(&ip.point.state)?;
    let chord = fiber_direction(model, m)?.map(|d| -> Result<_> { Ok((chord_extent(space, &x0, &d, ip.support.as_ref())?, d)) });
    let points: Vec<(f64, Element)> = match chord {
        Some(c) if grid_size > 1 => {
            let ((lo, hi), d) = c?;
            (0..grid_size)
                .map(|i| {
                    let s = i as f64 / (grid_size - 1) as f64;
                    (s, space.element(&(&x0 + &d * (lo + s * (hi - lo)))))
                })
                .collect()
        }
        _ => vec![(0.0, ip.point.state.clone())],
    };
    points
        .into_iter()
        .map(|(parameter, state)| {
            let report = openness_probe(model, &state, families, settings)?;
            Ok(FiberMapPoint {
                parameter,
                state: StateRecord::from(&state),
                report,
            })
        })
        .collect()
}

/// A unit direction (ambient coordinates) inside the fiber, if it has one.
fn fiber_direction(model: &Model, m: &MeanValue) -> Result<Option<DVector<f64>>> {
    match model.space().backend() {
        Backend::Matrix => {
            let frame = model.matrix_frame().expect("matrix backend");
            let fib = model.matrix_fiber(m)?;
            if fib.face.dim() == 0 {
                return Ok(None);
            }
            let zero = DVector::zeros(fib.x0.len());
            let d = frame.lift(&zero, &fib.face.basis.column(0).into_owned());
            Ok(Some(d.normalize()))
        }
        Backend::Polytope => {
            let dirs = model.space().affine_directions();
            let rows = model.observables().rows();
            let inside = &dirs - rows.transpose() * (rows * &dirs);
            let b = range_basis(&inside);
            Ok(if b.ncols() == 0 { None } else { Some(b.column(0).into_owned()) })
        }
    }
}

/// `[lo, hi]` with `x0 + t d` a state for `t` in it.
fn chord_extent(space: &StateSpace, x0: &DVector<f64>, d: &DVector<f64>, support: Option<&HermitianMatrix>) -> Result<(f64, f64)> {
    match (space, support) {
        (StateSpace::Matrix(_), Some(p)) => {
            // On the support, x0 is positive definite; the extent follows from
            // the eigenvalues of x0^{-1/2} d x0^{-1/2}.
            let spec = p.spectrum();
            let cols: Vec<usize> = (0..spec.eigenvalues.len()).filter(|&a| spec.eigenvalues[a] > 0.5).collect();
            let v = CMat::from_fn(p.dim(), cols.len(), |i, j| spec.eigenvectors[(i, cols[j])]);
            let x = space.element(x0).as_matrix().expect("matrix").compress(&v);
            let dm = space.element(d).as_matrix().expect("matrix").compress(&v);
            let xs = x.spectrum();
            let inv_sqrt = xs.map(|l| 1.0 / l.sqrt());
            let w = HermitianMatrix::symmetrized(inv_sqrt.as_matrix() * dm.as_matrix() * inv_sqrt.as_matrix());
            let mu = w.spectrum().eigenvalues;
            let (lo_mu, hi_mu) = (mu[0], *mu.last().expect("non-empty"));
            let hi = if lo_mu < 0.0 { -1.0 / lo_mu } else { f64::INFINITY };
            let lo = if hi_mu > 0.0 { -1.0 / hi_mu } else { f64::NEG_INFINITY };
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidConfig("unbounded fiber chord".into()));
            }
            Ok((lo, hi))
        }
        _ => {
            let inside = |t: f64| space.contains(&space.element(&(x0 + d * t)), 1e-12);
            let mut ends = [0.0; 2];
            for (slot, sign) in ends.iter_mut().zip([-1.0, 1.0]) {
                let (mut lo, mut hi) = (0.0, 1.0);
                while inside(sign * hi)? {
                    lo = hi;
                    hi *= 2.0;
                    if hi > 1e9 {
                        return Err(Error::InvalidConfig("unbounded fiber chord".into()));
                    }
                }
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if inside(sign * mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                *slot = sign * lo;
            }
            Ok((ends[0], ends[1]))
        }
    }
}

#[cfg(test)]
mod tests;
