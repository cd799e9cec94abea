//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints a PASS/FAIL line; exits non-zero if any fails.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI, SQRT_2};
use std::process::ExitCode;

use maxent_core::maxent::{dual_fit_interior, primal_maxent, DualObjective};
use maxent_core::probes::{continuity_probe, families_for, openness_probe, Agreement, ProbeKind, SampleStatus, StateRecord};
use maxent_core::scenario::{builtin_scenario, run, RunReport, Setup};
use maxent_core::{DisorderlinessMeasure, Element, HermitianMatrix, MeanValue, ProbeReport, ProbeSettings, Verdict};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// Oracles, built entry by entry.

fn mat(rows: &[&[f64]]) -> HermitianMatrix {
    let rows: Vec<Vec<Complex64>> = rows.iter().map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
    HermitianMatrix::from_rows(&rows).unwrap()
}

/// `(1 + sin a X + cos a Y) / 2` in the upper 2x2 block of a 3x3 matrix.
fn rim(a: f64) -> HermitianMatrix {
    let (s, c) = (a.sin(), a.cos());
    let rows = vec![
        vec![Complex64::new(0.5, 0.0), Complex64::new(0.5 * s, -0.5 * c), Complex64::new(0.0, 0.0)],
        vec![Complex64::new(0.5 * s, 0.5 * c), Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0)],
        vec![Complex64::new(0.0, 0.0); 3],
    ];
    HermitianMatrix::from_rows(&rows).unwrap()
}

fn apex() -> HermitianMatrix {
    mat(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0]])
}

fn cone_centre() -> HermitianMatrix {
    rim(0.0).add(&apex()).unwrap().scale(0.5)
}

fn bloch_state(t: f64) -> HermitianMatrix {
    mat(&[&[0.5, 0.5 * t], &[0.5 * t, 0.5]])
}

fn from_record(rec: &StateRecord) -> HermitianMatrix {
    let StateRecord::Matrix(rows) = rec else { panic!("matrix state expected") };
    let rows: Vec<Vec<Complex64>> = rows.iter().map(|r| r.iter().map(|&[a, b]| Complex64::new(a, b)).collect()).collect();
    HermitianMatrix::from_rows(&rows).unwrap()
}

fn hs_distance(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    a.sub(b).unwrap().norm()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

struct Runs {
    cone: RunReport,
    bloch: RunReport,
    body: RunReport,
}

fn equivalence_pairs(r: &RunReport) -> Vec<(&ProbeReport, &ProbeReport, Agreement)> {
    r.outcomes
        .iter()
        .filter(|o| o.kind == "equivalence")
        .map(|o| (&o.reports[0], &o.reports[1], o.agreement[0]))
        .collect()
}

fn outcome<'a>(r: &'a RunReport, index: usize, kind: &str) -> &'a maxent_core::scenario::ProbeOutcome {
    let o = &r.outcomes[index];
    assert_eq!(o.kind, kind, "builtin probe order changed");
    assert!(o.error.is_empty(), "probe {index} failed: {}", o.error);
    o
}

fn criterion_1(runs: &Runs) -> Outcome {
    let c = cone_centre();
    let gap_oracle = hs_distance(&rim(0.0), &c);
    let inf = &outcome(&runs.cone, 0, "inference").inferences[0];
    let state_err = hs_distance(&from_record(&inf.state), &c);
    let entropy_err = (inf.entropy - LN_2).abs();
    let cont = &outcome(&runs.cone, 1, "equivalence").reports[0];
    let open = &outcome(&runs.cone, 2, "openness").reports[0];
    let pass = state_err <= 1e-6
        && entropy_err <= 1e-6
        && cont.verdict == Verdict::Discontinuous
        && rel(cont.deficit, gap_oracle) <= 0.02
        && open.verdict == Verdict::NotOpen
        && rel(open.deficit, gap_oracle) <= 0.02;
    check(
        pass,
        format!(
            "|Phi(m0)-c| = {state_err:.2e}, |S - log 2| = {entropy_err:.2e}, continuity {:?} {:.6} , openness {:?} {:.6} (oracle {gap_oracle:.6})",
            cont.verdict, cont.deficit, open.verdict, open.deficit
        ),
    )
}

fn criterion_2(runs: &Runs) -> Outcome {
    let pairs: Vec<_> = equivalence_pairs(&runs.cone).into_iter().chain(equivalence_pairs(&runs.bloch)).collect();
    let mut bad = Vec::new();
    for (i, (c, o, a)) in pairs.iter().enumerate() {
        let inconclusive = c.verdict == Verdict::Inconclusive || o.verdict == Verdict::Inconclusive;
        // Both deficits a decade clear of the gray zone.
        let margin = |r: &ProbeReport| r.deficit <= r.thresholds.lower / 10.0 || r.deficit >= r.thresholds.upper * 10.0;
        if *a != Agreement::Agree || inconclusive || !margin(c) || !margin(o) {
            bad.push(i);
        }
    }
    check(
        bad.is_empty() && pairs.len() == 33,
        format!("{} points (23 cone, 10 Bloch), disagreeing or marginal: {bad:?}", pairs.len()),
    )
}

fn criterion_3(runs: &Runs) -> Outcome {
    let usc: Vec<&ProbeReport> = [&runs.cone, &runs.bloch]
        .iter()
        .flat_map(|r| r.outcomes.iter().filter(|o| o.kind == "usc").flat_map(|o| o.reports.iter()))
        .collect();
    let all_hold = usc.iter().all(|r| r.verdict == Verdict::Holds);
    let at_m0 = &outcome(&runs.cone, 4, "usc").reports[0];
    let jump = at_m0.records.iter().filter_map(|r| r.value).any(|v| (v + LN_2).abs() <= 1e-6);
    let pass = all_hold && at_m0.deficit <= 1e-6 && jump && (at_m0.reference - LN_2).abs() <= 1e-6;
    check(
        pass,
        format!(
            "{} usc reports all hold: {all_hold}; excess at m0 {:.3e}; downward jump of log 2 recorded: {jump}",
            usc.len(),
            at_m0.deficit
        ),
    )
}

fn criterion_4(runs: &Runs) -> Outcome {
    let r = &outcome(&runs.cone, 5, "closure").reports[0];
    let last = r.records.iter().filter(|x| x.status == SampleStatus::Ok).max_by_key(|x| x.rung).unwrap();
    let t_ok = (last.delta - 0.5f64.powi(12)).abs() < 1e-18;
    check(
        r.probe == ProbeKind::Closure && t_ok && last.value.unwrap() <= 1e-4,
        format!("|Phi(m_12) - c| = {:.3e} at t = 2^-12", last.value.unwrap()),
    )
}

fn criterion_5(runs: &Runs, bloch: &Setup) -> Outcome {
    let cone: Vec<_> = equivalence_pairs(&runs.cone).into_iter().skip(3).collect();
    let mut worst_open = cone.iter().map(|p| p.1.deficit).fold(0.0, f64::max);
    let mut worst_cont = cone.iter().map(|p| p.0.deficit).fold(0.0, f64::max);
    let s = ProbeSettings { seed: 9, ..ProbeSettings::default() };
    let fams = families_for(&bloch.model, &s);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let vn = DisorderlinessMeasure::VonNeumann;
    for _ in 0..20 {
        let x = bloch.model.space().random_state(&mut rng);
        let m = bloch.model.project_mean(&x).unwrap();
        let phi = maxent_core::infer(&bloch.model, &m, &vn).unwrap();
        worst_cont = worst_cont.max(continuity_probe(&bloch.model, &vn, &m, &fams, &s).unwrap().deficit);
        worst_open = worst_open.max(openness_probe(&bloch.model, &phi.state, &fams, &s).unwrap().deficit);
    }
    check(
        cone.len() == 20 && worst_open <= 1e-3 && worst_cont <= 1e-4,
        format!("40 interior points: max openness deficit {worst_open:.2e}, max continuity gap {worst_cont:.2e}"),
    )
}

fn criterion_6(runs: &Runs) -> Outcome {
    let map = &outcome(&runs.cone, 6, "fiber_map").fiber_map;
    let (r0, a) = (rim(0.0), apex());
    let len = hs_distance(&r0, &a);
    let mut worst = 0.0f64;
    let mut on_segment = 0.0f64;
    let mut ok = map.len() == 11;
    for p in map {
        let x = from_record(&p.state);
        let d = hs_distance(&x, &r0) / len;
        let on = r0.scale(1.0 - d).add(&a.scale(d)).unwrap();
        on_segment = on_segment.max(hs_distance(&x, &on));
        let deficit = p.report.deficit;
        if d < 0.05 {
            ok &= deficit <= 1e-3;
        } else {
            let e = rel(deficit, d * SQRT_2);
            worst = worst.max(e);
            ok &= e <= 0.05;
        }
    }
    check(
        ok && on_segment < 1e-6,
        format!("11 points on [rho(0), apex] (off-segment {on_segment:.1e}), worst relative error vs d*sqrt(2): {worst:.2e}"),
    )
}

fn criterion_7(cone: &Setup, bloch: &Setup) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = cone.model.project_mean(&Element::Matrix(rim(0.8).scale(0.6).add(&apex().scale(0.4)).unwrap())).unwrap();
    let f = DualObjective::new(&cone.model, &m).unwrap();
    let h = 1e-6;
    let mut grad_err = 0.0f64;
    for _ in 0..20 {
        let theta: Vec<f64> = (0..f.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g = f.gradient(&theta);
        let fd = nalgebra::DVector::from_fn(f.dim(), |i, _| {
            let (mut p, mut q) = (theta.clone(), theta.clone());
            p[i] += h;
            q[i] -= h;
            (f.value(&p) - f.value(&q)) / (2.0 * h)
        });
        grad_err = grad_err.max((fd - &g).norm() / g.norm());
    }

    let mut agree = 0.0f64;
    for (setup, n) in [(cone, 15), (bloch, 10)] {
        for _ in 0..n {
            let x = setup.model.space().random_state(&mut rng);
            let m = setup.model.project_mean(&x).unwrap();
            let d = dual_fit_interior(&setup.model, &m, 1e-10).unwrap();
            let p = primal_maxent(&setup.model, &m, &DisorderlinessMeasure::VonNeumann, 1e-10).unwrap();
            agree = agree.max(d.state.distance(&p.state).unwrap());
        }
    }

    let mut closed = 0.0f64;
    for t in [0.0, 0.3, -0.3, 0.9, -0.9, 0.99, -0.99] {
        let m = MeanValue::new(vec![t * FRAC_1_SQRT_2]).unwrap();
        let r = maxent_core::infer(&bloch.model, &m, &DisorderlinessMeasure::VonNeumann).unwrap();
        closed = closed.max(hs_distance(r.state.as_matrix().unwrap(), &bloch_state(t)));
    }
    check(
        grad_err <= 1e-5 && agree <= 1e-6 && closed <= 1e-6,
        format!("gradient rel. error {grad_err:.1e}, primal/dual gap {agree:.1e} on 25 points, Bloch closed form {closed:.1e}"),
    )
}

fn criterion_8(setups: &[(&str, &Setup)]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut details = Vec::new();
    for (name, setup) in setups {
        let model = &setup.model;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut means: Vec<MeanValue> = Vec::new();
        if *name == "cone" {
            for a in [0.0, PI, PI / 2.0] {
                means.push(model.project_mean(&Element::Matrix(rim(a))).unwrap());
            }
        }
        while means.len() < 10 {
            means.push(model.project_mean(&model.space().random_state(&mut rng)).unwrap());
        }
        let mut local = f64::NEG_INFINITY;
        for m in &means {
            let best = maxent_core::infer(model, m, &setup.measure).unwrap();
            let interior = model.fiber_interior_point(m).unwrap();
            for _ in 0..200 {
                let s = model.fiber_sample(m, &interior, &mut rng).unwrap();
                let v = setup.measure.value(model.space(), &s.state).unwrap();
                local = local.max(v - best.entropy_value);
            }
        }
        details.push(format!("{name} {local:.1e}"));
        worst = worst.max(local);
    }
    check(
        worst <= 1e-8,
        format!("max phi(sample) - phi(Phi(m)) over 200 samples x 10 means: {}", details.join(", ")),
    )
}

fn criterion_9(runs: &Runs) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, reference) in [("cone", &runs.cone), ("bloch", &runs.bloch), ("standard-body", &runs.body)] {
        let s = builtin_scenario(name).unwrap();
        let texts: Vec<String> = [1, 4]
            .iter()
            .map(|&n| {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
                pool.install(|| run(&s).unwrap().to_json())
            })
            .collect();
        let same = texts.iter().all(|t| *t == reference.to_json());
        ok &= same;
        notes.push(format!("{name}: {}", if same { "identical" } else { "DIFFERENT" }));
    }
    check(ok, notes.join(", "))
}

/// Gauge of `p` with respect to the polygon, about its origin vertex:
/// `min { s : p in s * polygon }`, by bisection on exact half-plane tests.
fn polygon_gauge(polygon: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let n = polygon.len();
    // Interior reference for the orientation of the edges.
    let c = polygon.iter().fold([0.0, 0.0], |a, v| [a[0] + v[0] / n as f64, a[1] + v[1] / n as f64]);
    let inside = |q: [f64; 2]| {
        (0..n).all(|i| {
            let (a, b) = (polygon[i], polygon[(i + 1) % n]);
            let side = |r: [f64; 2]| (b[0] - a[0]) * (r[1] - a[1]) - (b[1] - a[1]) * (r[0] - a[0]);
            side(q) * side(c) >= -1e-15
        })
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if !inside(p) {
        return f64::INFINITY;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if inside([p[0] / mid, p[1] / mid]) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn criterion_10(runs: &Runs) -> Outcome {
    let ball = &outcome(&runs.bloch, 21, "midpoint").reports[0];
    let body = &outcome(&runs.body, 1, "midpoint").reports[0];

    // Oracle for the pair x = (0,0,1), y = (0,0,-1) with mid-point the origin.
    // For z' = (p, 0) with x' + y' = 2 z', the endpoints sit at heights
    // +-h with p in (1 - h) * polygon, so the product distance to (x, y) is at
    // least sqrt(2) * gauge(p); the pair (z', z') attains sqrt(2 + 2|p|^2).
    let polygon: Vec<[f64; 2]> = (0..720)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / 720.0;
            [1.0 - t.cos(), t.sin()]
        })
        .collect();
    let mut lower = f64::INFINITY;
    let mut upper = 0.0f64;
    for i in [3usize, 5, 8, 12] {
        for p in [polygon[i], polygon[720 - i]] {
            let g = polygon_gauge(&polygon, p);
            lower = lower.min(SQRT_2 * g);
            upper = upper.max((2.0 + 2.0 * (p[0] * p[0] + p[1] * p[1])).sqrt());
        }
    }
    let oracle_unstable = lower >= 1.0;
    let in_bracket = body.deficit >= lower * 0.99 && body.deficit <= upper * 1.01;
    let pass = ball.verdict == Verdict::Stable && body.verdict == Verdict::Unstable && oracle_unstable && in_bracket;
    check(
        pass,
        format!(
            "ball {:?} ({:.1e}); standard body {:?} ({:.4}), oracle bracket [{lower:.4}, {upper:.4}] for boundary mid-points 0.026..0.1 away",
            ball.verdict, ball.deficit, body.verdict, body.deficit
        ),
    )
}

fn main() -> ExitCode {
    let runs = Runs {
        cone: run(&builtin_scenario("cone").unwrap()).unwrap(),
        bloch: run(&builtin_scenario("bloch").unwrap()).unwrap(),
        body: run(&builtin_scenario("standard-body").unwrap()).unwrap(),
    };
    let cone = builtin_scenario("cone").unwrap().setup().unwrap();
    let bloch = builtin_scenario("bloch").unwrap().setup().unwrap();
    let body = builtin_scenario("standard-body").unwrap().setup().unwrap();

    let results = [
        ("cone discontinuity", criterion_1(&runs)),
        ("continuity/openness equivalence", criterion_2(&runs)),
        ("upper semicontinuity", criterion_3(&runs)),
        ("closure at the vertex", criterion_4(&runs)),
        ("interior regime", criterion_5(&runs, &bloch)),
        ("fiber openness map", criterion_6(&runs)),
        ("solver correctness", criterion_7(&cone, &bloch)),
        ("maximality", criterion_8(&[("cone", &cone), ("bloch", &bloch), ("standard-body", &body)])),
        ("determinism", criterion_9(&runs)),
        ("mid-point stability", criterion_10(&runs)),
    ];
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        println!("criterion {:>2} {name}: {} | {}", i + 1, if r.pass { "PASS" } else { "FAIL" }, r.detail);
        failed += usize::from(!r.pass);
    }
    println!("acceptance: {} of {} criteria pass", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
