use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{literal, BackendSpec, MeanSpec, MeasureSpec, ProbeRequest, Scenario, ToleranceSpec, FORMAT};
use crate::error::{Error, Result};
use crate::geometry::{orthonormalize, Element, Model, StateSpace};
use crate::hermitian::HermitianMatrix;
use crate::probes::{geometric_ladder, ProbeSettings, StateRecord};

pub const BUILTIN_NAMES: [&str; 3] = ["cone", "bloch", "standard-body"];

/// Polygon resolution of the disk in the standard body.
const DISK_VERTICES: usize = 720;

const SEED: u64 = 1;

pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    match name {
        "cone" => Ok(cone()),
        "bloch" => Ok(bloch()),
        "standard-body" => Ok(standard_body()),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

fn embed2(m: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix::direct_sum(m, &HermitianMatrix::zeros(1))
}

/// `(1 + sin a X + cos a Y) / 2` in the upper block.
fn rim_state(alpha: f64) -> HermitianMatrix {
    let q = HermitianMatrix::identity(2)
        .add(&HermitianMatrix::pauli_x().scale(alpha.sin()))
        .and_then(|m| m.add(&HermitianMatrix::pauli_y().scale(alpha.cos())))
        .expect("2x2 operands");
    embed2(&q.scale(0.5))
}

fn mean_of(m: &HermitianMatrix) -> MeanSpec {
    MeanSpec::OfState(StateRecord::Matrix(literal(m)))
}

fn coords(model: &Model, x: &Element) -> MeanSpec {
    MeanSpec::Coords(model.project_mean(x).expect("state of the model").as_slice().to_vec())
}

fn matrix_model(algebra: &[HermitianMatrix], observables: &[HermitianMatrix]) -> Model {
    let space = StateSpace::matrix(algebra.to_vec()).expect("builtin algebra");
    let raw: Vec<Element> = observables.iter().cloned().map(Element::Matrix).collect();
    let obs = orthonormalize(&space, &raw).expect("builtin observables");
    Model::new(space, obs).expect("builtin model")
}

/// Equivalence and u.s.c. probes at each mean value.
fn point_suite(means: impl IntoIterator<Item = MeanSpec>) -> Vec<ProbeRequest> {
    means
        .into_iter()
        .flat_map(|mean| {
            [
                ProbeRequest::Equivalence {
                    mean: mean.clone(),
                    families: None,
                },
                ProbeRequest::Usc { mean, families: None },
            ]
        })
        .collect()
}

fn cone() -> Scenario {
    let upper = |m: HermitianMatrix| embed2(&m);
    let lower = HermitianMatrix::direct_sum(&HermitianMatrix::zeros(2), &HermitianMatrix::identity(1));
    let algebra = vec![
        upper(HermitianMatrix::identity(2)),
        upper(HermitianMatrix::pauli_x()),
        upper(HermitianMatrix::pauli_y()),
        lower.clone(),
    ];
    let y_plus = HermitianMatrix::direct_sum(&HermitianMatrix::pauli_y(), &HermitianMatrix::identity(1));
    let observables = vec![
        upper(HermitianMatrix::pauli_x()),
        y_plus.sub(&HermitianMatrix::identity(3).scale(1.0 / 3.0)).expect("3x3 operands"),
    ];
    let model = matrix_model(&algebra, &observables);

    let vertex = rim_state(0.0);
    let centre = vertex.add(&lower).expect("3x3 operands").scale(0.5);
    let mut probes = vec![
        ProbeRequest::Inference { mean: mean_of(&vertex) },
        ProbeRequest::Equivalence {
            mean: mean_of(&vertex),
            families: None,
        },
        ProbeRequest::Openness {
            state: StateRecord::Matrix(literal(&centre)),
            families: None,
        },
        ProbeRequest::Openness {
            state: StateRecord::Matrix(literal(&vertex)),
            families: None,
        },
        ProbeRequest::Usc {
            mean: mean_of(&vertex),
            families: None,
        },
        ProbeRequest::Closure { mean: mean_of(&vertex) },
        ProbeRequest::FiberMap {
            mean: mean_of(&vertex),
            grid: 11,
            families: None,
        },
        ProbeRequest::Closure {
            mean: mean_of(&rim_state(PI)),
        },
    ];
    probes.extend(point_suite([mean_of(&rim_state(PI)), mean_of(&rim_state(PI / 2.0))]));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let interior: Vec<MeanSpec> = (0..20).map(|_| coords(&model, &model.space().random_state(&mut rng))).collect();
    probes.extend(point_suite(interior));

    Scenario {
        format: FORMAT,
        name: "cone".into(),
        backend: BackendSpec::Matrix {
            dim: 3,
            algebra: algebra.iter().map(literal).collect(),
            observables: observables.iter().map(literal).collect(),
        },
        disorderliness: MeasureSpec::VonNeumann,
        probes,
        tolerances: ToleranceSpec::default(),
        seed: SEED,
    }
}

fn bloch() -> Scenario {
    let half = |m: HermitianMatrix| HermitianMatrix::identity(2).add(&m).expect("2x2 operands").scale(0.5);
    let algebra = [
        HermitianMatrix::identity(2),
        HermitianMatrix::pauli_x(),
        HermitianMatrix::pauli_y(),
        HermitianMatrix::pauli_z(),
    ];
    let observables = [HermitianMatrix::pauli_x()];
    // The orthonormal coordinate of <X> = t is t / sqrt(2).
    let means = (0..10).map(|i| MeanSpec::Coords(vec![(-0.9 + 0.2 * i as f64) * FRAC_1_SQRT_2]));
    let mut probes = point_suite(means);
    probes.push(ProbeRequest::FiberMap {
        mean: MeanSpec::Coords(vec![0.0]),
        grid: 11,
        families: None,
    });
    probes.push(ProbeRequest::Midpoint {
        x: StateRecord::Matrix(literal(&half(HermitianMatrix::pauli_z()))),
        y: StateRecord::Matrix(literal(&half(HermitianMatrix::pauli_x()))),
    });
    Scenario {
        format: FORMAT,
        name: "bloch".into(),
        backend: BackendSpec::Matrix {
            dim: 2,
            algebra: algebra.iter().map(literal).collect(),
            observables: observables.iter().map(literal).collect(),
        },
        disorderliness: MeasureSpec::VonNeumann,
        probes,
        tolerances: ToleranceSpec::default(),
        seed: SEED,
    }
}

/// Vertices of the disk `(x - 1)^2 + y^2 <= 1` in the plane `z = 0` (one of
/// them at the origin) and the apexes `(0, 0, +-1)`.
pub(crate) fn standard_body_vertices() -> Vec<DVector<f64>> {
    let mut v: Vec<DVector<f64>> = (0..DISK_VERTICES)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / DISK_VERTICES as f64;
            DVector::from_vec(vec![1.0 - t.cos(), t.sin(), 0.0])
        })
        .collect();
    v.push(DVector::from_vec(vec![0.0, 0.0, 1.0]));
    v.push(DVector::from_vec(vec![0.0, 0.0, -1.0]));
    v
}

fn standard_body() -> Scenario {
    let point = |p: [f64; 3]| StateRecord::Point(p.to_vec());
    // The polygon's edges are about 8.7e-3 long; scales below a few edge
    // lengths see the polygon rather than the disk.
    let probes_settings = ProbeSettings {
        ladder: geometric_ladder(1e-1, 2e-2, 5),
        ..ProbeSettings::default()
    };
    Scenario {
        format: FORMAT,
        name: "standard-body".into(),
        backend: BackendSpec::Polytope {
            vertices: standard_body_vertices().iter().map(|v| v.iter().copied().collect()).collect(),
            observables: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
        },
        disorderliness: MeasureSpec::NegSqNorm {
            center: point([0.5, 0.0, 0.0]),
        },
        probes: vec![
            ProbeRequest::Inference {
                mean: MeanSpec::OfState(point([0.5, 0.0, 0.5])),
            },
            ProbeRequest::Midpoint {
                x: point([0.0, 0.0, 1.0]),
                y: point([0.0, 0.0, -1.0]),
            },
        ],
        tolerances: ToleranceSpec {
            probes: probes_settings,
            ..ToleranceSpec::default()
        },
        seed: SEED,
    }
}
