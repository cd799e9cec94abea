use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use maxent_bench::{interior_means, setup, states};
use maxent_core::maxent::{dual_fit_interior, primal_maxent};
use maxent_core::probes::{continuity_probe, families_for};
use maxent_core::{infer, Element, HermitianMatrix, ProbeSettings};

fn inference(c: &mut Criterion) {
    let cone = setup("cone");
    let means = interior_means(&cone, 8, 3);
    let mut g = c.benchmark_group("inference");
    g.bench_function("dual_interior_cone", |b| {
        b.iter(|| means.iter().map(|m| dual_fit_interior(&cone.model, m, 1e-10).unwrap().entropy_value).sum::<f64>())
    });
    g.bench_function("primal_interior_cone", |b| {
        b.iter(|| means.iter().map(|m| primal_maxent(&cone.model, m, &cone.measure, 1e-10).unwrap().entropy_value).sum::<f64>())
    });
    let vertex = HermitianMatrix::direct_sum(
        &HermitianMatrix::identity(2).add(&HermitianMatrix::pauli_y()).unwrap().scale(0.5),
        &HermitianMatrix::zeros(1),
    );
    let m0 = cone.model.project_mean(&Element::Matrix(vertex)).unwrap();
    g.bench_function("boundary_cone_vertex", |b| b.iter(|| infer(&cone.model, black_box(&m0), &cone.measure).unwrap()));
    let body = setup("standard-body");
    let body_means = interior_means(&body, 4, 3);
    g.bench_function("polytope_projection_standard_body", |b| {
        b.iter(|| body_means.iter().map(|m| infer(&body.model, m, &body.measure).unwrap().entropy_value).sum::<f64>())
    });
    g.finish();
}

fn projection(c: &mut Criterion) {
    let cone = setup("cone");
    let m = interior_means(&cone, 1, 5).remove(0);
    let xs = states(&cone, 8, 6);
    c.bench_function("fiber_distance_cone", |b| {
        b.iter(|| xs.iter().map(|x| cone.model.fiber_distance(&m, x).unwrap().0).sum::<f64>())
    });
}

fn probes(c: &mut Criterion) {
    let bloch = setup("bloch");
    let m = interior_means(&bloch, 1, 7).remove(0);
    let settings = ProbeSettings::default();
    let families = families_for(&bloch.model, &settings);
    let mut g = c.benchmark_group("probes");
    g.sample_size(10);
    g.bench_function("continuity_bloch", |b| {
        b.iter(|| continuity_probe(&bloch.model, &bloch.measure, &m, &families, &settings).unwrap().deficit)
    });
    g.finish();
}

criterion_group!(benches, inference, projection, probes);
criterion_main!(benches);
