//! The inference `m -> argmax { phi(x) : x in F(m) }`.
//!
//! Interior mean values of a matrix model go through the Gibbsian dual;
//! everything else is solved in the primal: entropy ascent on the minimal
//! face of the fiber, or a metric projection for the squared-distance measure.

mod dual;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use dual::{solve_dual, DualObjective, DualSolution};

use crate::error::{Error, Result};
use crate::geometry::spectrahedron::maximize_entropy_on_face;
use crate::geometry::{Backend, Element, MeanValue, Model, StateSpace};
use crate::hermitian::entropy_of_spectrum;

/// Eigenvalues above this count towards the support of an inferred state.
pub const SUPPORT_CUT: f64 = 1e-8;

/// The function maximized over each fiber.
#[derive(Debug, Clone, PartialEq)]
pub enum DisorderlinessMeasure {
    VonNeumann,
    /// `phi(x) = -|x - center|^2`.
    NegSqNorm { center: Element },
}

impl DisorderlinessMeasure {
    pub fn tag(&self) -> &'static str {
        match self {
            DisorderlinessMeasure::VonNeumann => "von_neumann",
            DisorderlinessMeasure::NegSqNorm { .. } => "neg_sq_norm",
        }
    }

    /// Rejects measures that do not apply to the backend.
    pub fn validate(&self, space: &StateSpace) -> Result<()> {
        match self {
            DisorderlinessMeasure::VonNeumann if space.backend() == Backend::Polytope => Err(Error::InvalidConfig(
                "von Neumann entropy needs a matrix backend; use neg_sq_norm for polytopes".into(),
            )),
            DisorderlinessMeasure::NegSqNorm { center } => space.coords(center).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn value(&self, space: &StateSpace, x: &Element) -> Result<f64> {
        match self {
            DisorderlinessMeasure::VonNeumann => {
                let m = x
                    .as_matrix()
                    .ok_or_else(|| Error::InvalidConfig("von Neumann entropy of a polytope point".into()))?;
                Ok(entropy_of_spectrum(&m.spectrum().eigenvalues))
            }
            DisorderlinessMeasure::NegSqNorm { center } => {
                space.coords(x)?;
                let d = x.distance(center)?;
                Ok(-d * d)
            }
        }
    }

    /// Smallest observed `phi(mid) - (phi(a) + phi(b)) / 2` over random
    /// chords whose endpoints are at least `1e-6` apart. Positive for a
    /// strictly concave measure.
    pub fn concavity_margin<R: Rng + ?Sized>(&self, space: &StateSpace, chords: usize, rng: &mut R) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for _ in 0..chords {
            let a = space.random_state(rng);
            let b = space.random_state(rng);
            if a.distance(&b)? <= 1e-6 {
                continue;
            }
            let mid = a.lerp(&b, 0.5)?;
            let gap = self.value(space, &mid)? - 0.5 * (self.value(space, &a)? + self.value(space, &b)?);
            worst = worst.min(gap);
        }
        Ok(worst)
    }
}

/// Which solver produced an inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    Dual,
    FaceAscent,
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub solver: SolverPath,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// `|pi_U(state) - m|`.
    pub projection_residual: f64,
    /// Smallest eigenvalue of the state; zero for polytope points, which are
    /// convex combinations of vertices by construction.
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub state: Element,
    pub entropy_value: f64,
    pub dual_theta: Option<DVector<f64>>,
    /// Number of eigenvalues above [`SUPPORT_CUT`]; the ambient dimension for
    /// polytope points.
    pub support_rank: usize,
    /// True when `m` is not in the relative interior of the mean value set.
    pub boundary_flag: bool,
    pub diagnostics: Diagnostics,
}

fn support_rank(space: &StateSpace, state: &Element) -> usize {
    match state {
        Element::Matrix(h) => h.spectrum().eigenvalues.iter().filter(|&&l| l > SUPPORT_CUT).count(),
        Element::Point(_) => space.dim(),
    }
}

struct Run {
    dual_theta: Option<DVector<f64>>,
    boundary_flag: bool,
    solver: SolverPath,
    iterations: usize,
    gradient_norm: f64,
}

fn finish(model: &Model, m: &MeanValue, measure: &DisorderlinessMeasure, state: Element, run: Run) -> Result<InferenceResult> {
    let projection_residual = model.project_mean(&state)?.distance(m);
    let min_eigenvalue = match &state {
        Element::Matrix(h) => h.min_eigenvalue(),
        Element::Point(_) => 0.0,
    };
    Ok(InferenceResult {
        entropy_value: measure.value(model.space(), &state)?,
        support_rank: support_rank(model.space(), &state),
        state,
        dual_theta: run.dual_theta,
        boundary_flag: run.boundary_flag,
        diagnostics: Diagnostics {
            solver: run.solver,
            iterations: run.iterations,
            gradient_norm: run.gradient_norm,
            projection_residual,
            min_eigenvalue,
        },
    })
}

fn von_neumann_only(measure: &DisorderlinessMeasure, model: &Model) -> Result<()> {
    measure.validate(model.space())?;
    if *measure != DisorderlinessMeasure::VonNeumann {
        return Err(Error::InvalidConfig("the dual solver maximizes the von Neumann entropy only".into()));
    }
    Ok(())
}

/// Gibbs state matching `m`, for `m` in the relative interior of the mean
/// value set of a matrix model.
pub fn dual_fit_interior(model: &Model, m: &MeanValue, tol: f64) -> Result<InferenceResult> {
    let measure = DisorderlinessMeasure::VonNeumann;
    von_neumann_only(&measure, model)?;
    let objective = DualObjective::new(model, m)?;
    let sol = solve_dual(&objective, tol, model.tolerances().dual_max_iter)?;
    finish(
        model,
        m,
        &measure,
        Element::Matrix(sol.state),
        Run {
            dual_theta: Some(sol.theta),
            boundary_flag: false,
            solver: SolverPath::Dual,
            iterations: sol.iterations,
            gradient_norm: sol.gradient_norm,
        },
    )
}

/// Primal maximization over the fiber: entropy ascent on the minimal face,
/// or the nearest fiber point to the center for the squared-distance measure.
pub fn primal_maxent(model: &Model, m: &MeanValue, measure: &DisorderlinessMeasure, tol: f64) -> Result<InferenceResult> {
    measure.validate(model.space())?;
    match measure {
        DisorderlinessMeasure::VonNeumann => {
            let frame = model.matrix_frame().expect("validated matrix backend");
            let fib = model.matrix_fiber(m).map_err(|e| e.at_stage("minimal face"))?;
            let ascent = maximize_entropy_on_face(&fib.pencil, &fib.face, None, tol, model.tolerances().max_iter)
                .map_err(|e| e.at_stage("face entropy ascent"))?;
            let x = frame.lift(&fib.x0, &ascent.y);
            finish(
                model,
                m,
                measure,
                model.space().element(&x),
                Run {
                    dual_theta: None,
                    boundary_flag: fib.face.reductions > 0,
                    solver: SolverPath::FaceAscent,
                    iterations: ascent.iterations,
                    gradient_norm: ascent.gradient_norm,
                },
            )
        }
        DisorderlinessMeasure::NegSqNorm { center } => {
            let target = model.space().coords(center)?;
            let x = model.nearest_coords(m, &target).map_err(|e| e.at_stage("fiber projection"))?;
            let boundary = match model.space().backend() {
                Backend::Matrix => model.matrix_fiber(m)?.face.reductions > 0,
                Backend::Polytope => !model.mean_in_m(m)?.interior,
            };
            let run = Run {
                dual_theta: None,
                boundary_flag: boundary,
                solver: SolverPath::Projection,
                iterations: 0,
                gradient_norm: 0.0,
            };
            finish(model, m, measure, model.space().element(&x), run)
        }
    }
}

/// The inference `Phi(m)`: the dual for relative-interior mean values of a
/// matrix model with the von Neumann entropy, the primal otherwise (and as a
/// fallback when the dual fails).
pub fn infer(model: &Model, m: &MeanValue, measure: &DisorderlinessMeasure) -> Result<InferenceResult> {
    measure.validate(model.space())?;
    let tol = model.tolerances().dual_tol;
    if *measure == DisorderlinessMeasure::VonNeumann {
        let fib = model.matrix_fiber(m).map_err(|e| e.at_stage("minimal face"))?;
        if fib.face.reductions == 0 {
            if let Ok(r) = dual_fit_interior(model, m, tol) {
                if r.diagnostics.projection_residual <= model.tolerances().fiber_tol {
                    return Ok(r);
                }
            }
        }
    }
    primal_maxent(model, m, measure, tol)
}

/// `max { phi(x) : x in F(m) }`.
pub fn max_disorderliness_value(model: &Model, m: &MeanValue, measure: &DisorderlinessMeasure) -> Result<f64> {
    Ok(infer(model, m, measure)?.entropy_value)
}
