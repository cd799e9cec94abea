//! Declarative scenarios: a state space, observables, a disorderliness
//! measure and a list of probe requests, read from and written to strict JSON.

mod builtin;
mod run;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use builtin::{builtin_scenario, BUILTIN_NAMES};
#[cfg(test)]
pub(crate) use builtin::standard_body_vertices as standard_body_vertices_for_tests;
pub use run::{infer_mean, run, to_json, InferenceRow, ProbeOutcome, RunReport};

use crate::error::{Error, Result};
use crate::geometry::{orthonormalize, Element, MeanValue, Model, StateSpace, Tolerances};
use crate::hermitian::HermitianMatrix;
use crate::maxent::DisorderlinessMeasure;
use crate::probes::{ApproachFamily, ProbeSettings, StateRecord};

/// Version of the scenario and report documents.
pub const FORMAT: u32 = 1;

/// A matrix as rows of `[re, im]` entries.
pub type MatrixLiteral = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format: u32,
    pub name: String,
    pub backend: BackendSpec,
    pub disorderliness: MeasureSpec,
    pub probes: Vec<ProbeRequest>,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// Density matrices of the real span of `algebra` (which must be a
    /// *-subalgebra of `dim x dim` matrices containing the identity).
    Matrix {
        dim: usize,
        algebra: Vec<MatrixLiteral>,
        observables: Vec<MatrixLiteral>,
    },
    /// Convex hull of `vertices`, observed through the given coordinate vectors.
    Polytope {
        vertices: Vec<Vec<f64>>,
        observables: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    VonNeumann,
    NegSqNorm { center: StateRecord },
}

/// A mean value, either in orthonormal observable coordinates or as the
/// projection of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanSpec {
    Coords(Vec<f64>),
    OfState(StateRecord),
}

/// `families: null` selects the default families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeRequest {
    Inference {
        mean: MeanSpec,
    },
    Openness {
        state: StateRecord,
        #[serde(default)]
        families: Option<Vec<ApproachFamily>>,
    },
    Continuity {
        mean: MeanSpec,
        #[serde(default)]
        families: Option<Vec<ApproachFamily>>,
    },
    Usc {
        mean: MeanSpec,
        #[serde(default)]
        families: Option<Vec<ApproachFamily>>,
    },
    Closure {
        mean: MeanSpec,
    },
    /// Continuity at `mean` against openness at its inference.
    Equivalence {
        mean: MeanSpec,
        #[serde(default)]
        families: Option<Vec<ApproachFamily>>,
    },
    FiberMap {
        mean: MeanSpec,
        grid: usize,
        #[serde(default)]
        families: Option<Vec<ApproachFamily>>,
    },
    Midpoint {
        x: StateRecord,
        y: StateRecord,
    },
}

impl ProbeRequest {
    pub fn kind(&self) -> &'static str {
        match self {
            ProbeRequest::Inference { .. } => "inference",
            ProbeRequest::Openness { .. } => "openness",
            ProbeRequest::Continuity { .. } => "continuity",
            ProbeRequest::Usc { .. } => "usc",
            ProbeRequest::Closure { .. } => "closure",
            ProbeRequest::Equivalence { .. } => "equivalence",
            ProbeRequest::FiberMap { .. } => "fiber_map",
            ProbeRequest::Midpoint { .. } => "midpoint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSpec {
    pub solver: Tolerances,
    pub probes: ProbeSettings,
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: Model,
    pub measure: DisorderlinessMeasure,
    pub settings: ProbeSettings,
    /// Human-readable notes about reductions made to the input.
    pub warnings: Vec<String>,
    pub probes: Vec<ResolvedProbe>,
}

/// A probe request with its targets turned into model objects.
#[derive(Debug, Clone)]
pub enum ResolvedProbe {
    Inference(MeanValue),
    Openness(Element, Vec<ApproachFamily>),
    Continuity(MeanValue, Vec<ApproachFamily>),
    Usc(MeanValue, Vec<ApproachFamily>),
    Closure(MeanValue),
    Equivalence(MeanValue, Vec<ApproachFamily>),
    FiberMap(MeanValue, usize, Vec<ApproachFamily>),
    Midpoint(Element, Element),
}

fn schema(path: impl Into<String>, message: impl ToString) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.to_string(),
    }
}

/// Parses a JSON document with paths in error messages.
pub(crate) fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner())
    })
}

/// Reads and fully validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = from_json(text)?;
    scenario.setup()?;
    Ok(scenario)
}

pub(crate) fn matrix_literal(lit: &MatrixLiteral, path: &str) -> Result<HermitianMatrix> {
    let rows: Vec<Vec<Complex64>> = lit.iter().map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect()).collect();
    HermitianMatrix::from_rows(&rows).map_err(|e| match e {
        Error::NotSelfAdjoint { row, col, deviation } => schema(
            path,
            format!("matrix is not self-adjoint: entries[{row}][{col}] differs from conj(entries[{col}][{row}]) by {deviation:e}"),
        ),
        other => schema(path, other),
    })
}

pub(crate) fn literal(m: &HermitianMatrix) -> MatrixLiteral {
    m.to_pairs()
}

fn state_element(space: &StateSpace, rec: &StateRecord, path: &str) -> Result<Element> {
    let e = match rec {
        StateRecord::Matrix(lit) => Element::Matrix(matrix_literal(lit, path)?),
        StateRecord::Point(p) => Element::Point(DVector::from_column_slice(p)),
    };
    space.coords(&e).map_err(|err| schema(path, err))?;
    Ok(e)
}

impl Scenario {
    /// The JSON document.
    pub fn to_json(&self) -> String {
        run::to_json(self)
    }

    /// Builds the model and resolves every probe target, rejecting anything
    /// invalid before a single probe runs.
    pub fn setup(&self) -> Result<Setup> {
        if self.format != FORMAT {
            return Err(schema("format", format!("unsupported format {}; expected {FORMAT}", self.format)));
        }
        let mut warnings = Vec::new();
        let (space, raw) = match &self.backend {
            BackendSpec::Matrix { dim, algebra, observables } => {
                let basis = algebra
                    .iter()
                    .enumerate()
                    .map(|(i, lit)| {
                        let path = format!("backend.algebra[{i}]");
                        let m = matrix_literal(lit, &path)?;
                        if m.dim() != *dim {
                            return Err(schema(path, format!("expected a {dim}x{dim} matrix, found {}x{}", m.dim(), m.dim())));
                        }
                        Ok(m)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let space = StateSpace::matrix(basis).map_err(|e| schema("backend.algebra", e))?;
                let raw = observables
                    .iter()
                    .enumerate()
                    .map(|(i, lit)| state_element(&space, &StateRecord::Matrix(lit.clone()), &format!("backend.observables[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                (space, raw)
            }
            BackendSpec::Polytope { vertices, observables } => {
                let space = StateSpace::polytope(vertices.iter().map(|v| DVector::from_column_slice(v)).collect())
                    .map_err(|e| schema("backend.vertices", e))?;
                let raw = observables
                    .iter()
                    .enumerate()
                    .map(|(i, v)| state_element(&space, &StateRecord::Point(v.clone()), &format!("backend.observables[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                (space, raw)
            }
        };
        let obs = orthonormalize(&space, &raw).map_err(|e| schema("backend.observables", e))?;
        for i in obs.dropped() {
            warnings.push(format!("backend.observables[{i}] depends linearly on the others and was dropped"));
        }
        let model = Model::new(space, obs)?.with_tolerances(self.tolerances.solver);
        let measure = match &self.disorderliness {
            MeasureSpec::VonNeumann => DisorderlinessMeasure::VonNeumann,
            MeasureSpec::NegSqNorm { center } => DisorderlinessMeasure::NegSqNorm {
                center: state_element(model.space(), center, "disorderliness.center")?,
            },
        };
        measure.validate(model.space()).map_err(|e| schema("disorderliness", e))?;
        let settings = ProbeSettings {
            seed: self.seed,
            ..self.tolerances.probes.clone()
        };
        settings.validate().map_err(|e| schema("tolerances.probes", e))?;

        let mut resolver = Resolver {
            model: &model,
            settings: &settings,
        };
        let probes = self
            .probes
            .iter()
            .enumerate()
            .map(|(i, p)| resolver.resolve(i, p, &measure))
            .collect::<Result<Vec<_>>>()?;
        Ok(Setup {
            model,
            measure,
            settings,
            warnings,
            probes,
        })
    }
}

struct Resolver<'a> {
    model: &'a Model,
    settings: &'a ProbeSettings,
}

impl Resolver<'_> {
    fn state(&self, rec: &StateRecord, path: &str) -> Result<Element> {
        let e = state_element(self.model.space(), rec, path)?;
        if !self.model.space().contains(&e, 1e-8)? {
            return Err(schema(path, "not a state of the state space"));
        }
        Ok(e)
    }

    fn mean(&self, spec: &MeanSpec, path: &str) -> Result<MeanValue> {
        let m = match spec {
            MeanSpec::Coords(c) => {
                if c.len() != self.model.k() {
                    return Err(schema(path, format!("expected {} coordinates, found {}", self.model.k(), c.len())));
                }
                MeanValue::new(c.clone()).map_err(|e| schema(path, e))?
            }
            MeanSpec::OfState(rec) => {
                let x = self.state(rec, &format!("{path}.of_state"))?;
                self.model.project_mean(&x)?
            }
        };
        if !self.model.is_feasible(&m, 1e-9)? {
            return Err(schema(path, "not a feasible mean value"));
        }
        Ok(m)
    }

    fn families(&self, f: &Option<Vec<ApproachFamily>>, path: &str) -> Result<Vec<ApproachFamily>> {
        match f {
            Some(f) if f.is_empty() => Err(schema(path, "at least one family is needed")),
            Some(f) => Ok(f.clone()),
            None => Ok(crate::probes::families_for(self.model, self.settings)),
        }
    }

    fn resolve(&mut self, i: usize, p: &ProbeRequest, measure: &DisorderlinessMeasure) -> Result<ResolvedProbe> {
        let at = |field: &str| format!("probes[{i}].{field}");
        Ok(match p {
            ProbeRequest::Inference { mean } => ResolvedProbe::Inference(self.mean(mean, &at("mean"))?),
            ProbeRequest::Openness { state, families } => {
                ResolvedProbe::Openness(self.state(state, &at("state"))?, self.families(families, &at("families"))?)
            }
            ProbeRequest::Continuity { mean, families } => {
                ResolvedProbe::Continuity(self.mean(mean, &at("mean"))?, self.families(families, &at("families"))?)
            }
            ProbeRequest::Usc { mean, families } => ResolvedProbe::Usc(self.mean(mean, &at("mean"))?, self.families(families, &at("families"))?),
            ProbeRequest::Closure { mean } => {
                if *measure != DisorderlinessMeasure::VonNeumann {
                    return Err(schema(at("kind"), "the closure probe needs the von Neumann entropy"));
                }
                ResolvedProbe::Closure(self.mean(mean, &at("mean"))?)
            }
            ProbeRequest::Equivalence { mean, families } => {
                ResolvedProbe::Equivalence(self.mean(mean, &at("mean"))?, self.families(families, &at("families"))?)
            }
            ProbeRequest::FiberMap { mean, grid, families } => {
                if *grid == 0 {
                    return Err(schema(at("grid"), "grid must be positive"));
                }
                ResolvedProbe::FiberMap(self.mean(mean, &at("mean"))?, *grid, self.families(families, &at("families"))?)
            }
            ProbeRequest::Midpoint { x, y } => ResolvedProbe::Midpoint(self.state(x, &at("x"))?, self.state(y, &at("y"))?),
        })
    }
}

#[cfg(test)]
mod tests;
