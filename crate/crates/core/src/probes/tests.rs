use super::*;
use crate::hermitian::HermitianMatrix;
use crate::testing::{apex, bloch, centre, cone, mean, rho};
use std::f64::consts::FRAC_1_SQRT_2;

fn vn() -> DisorderlinessMeasure {
    DisorderlinessMeasure::VonNeumann
}

fn settings() -> ProbeSettings {
    ProbeSettings {
        random_directions: 2,
        seed: 5,
        ..ProbeSettings::default()
    }
}

#[test]
fn centre_of_cone_fiber_is_not_open() {
    let model = cone();
    let s = settings();
    let r = openness_probe(&model, &Element::Matrix(centre()), &families_for(&model, &s), &s).unwrap();
    eprintln!("deficit {} {:?}", r.deficit, r.families);
    assert_eq!(r.verdict, Verdict::NotOpen);
    assert!((r.deficit - FRAC_1_SQRT_2).abs() < 2e-2, "{}", r.deficit);
    assert_eq!(r.rederive(), (r.deficit, r.verdict));
}

#[test]
fn extreme_cone_states_are_open() {
    let model = cone();
    let s = settings();
    let fams = families_for(&model, &s);
    for x in [rho(0.0), rho(1.0)] {
        let r = openness_probe(&model, &Element::Matrix(x), &fams, &s).unwrap();
        assert_eq!(r.verdict, Verdict::Open, "{}", r.deficit);
    }
    // The apex shares the vertex fiber but is far from every nearby fiber.
    let r = openness_probe(&model, &Element::Matrix(apex()), &fams, &s).unwrap();
    assert_eq!(r.verdict, Verdict::NotOpen);
    assert!((r.deficit - 2f64.sqrt()).abs() < 2e-2, "{}", r.deficit);
}

#[test]
fn inference_jumps_at_the_cone_vertex() {
    let model = cone();
    let s = settings();
    let m0 = mean(&model, &rho(0.0));
    let fams = families_for(&model, &s);
    let c = continuity_probe(&model, &vn(), &m0, &fams, &s).unwrap();
    eprintln!("continuity {} {:?}", c.deficit, c.families);
    assert_eq!(c.verdict, Verdict::Discontinuous);
    let o = openness_probe(&model, &Element::Matrix(centre()), &fams, &s).unwrap();
    assert_eq!(equivalence(&c, &o), Agreement::Agree);
    let u = usc_probe(&model, &vn(), &m0, &fams, &s).unwrap();
    eprintln!("usc {} ", u.deficit);
    assert_eq!(u.verdict, Verdict::Holds);
    let cl = closure_probe(&model, &vn(), &m0, &s).unwrap();
    eprintln!("closure {:?}", cl.records.iter().map(|r| r.value).collect::<Vec<_>>());
    assert_eq!(cl.verdict, Verdict::Holds);
}

#[test]
fn interior_inference_is_continuous() {
    let model = cone();
    let s = settings();
    let m = mean(&model, &HermitianMatrix::diagonal(&[0.3, 0.3, 0.4]));
    let c = continuity_probe(&model, &vn(), &m, &families_for(&model, &s), &s).unwrap();
    assert_eq!(c.verdict, Verdict::Continuous, "{}", c.deficit);
}

#[test]
fn bloch_midpoints_are_stable() {
    let model = bloch();
    let s = settings();
    let x = Element::Matrix(HermitianMatrix::identity(2).add(&HermitianMatrix::pauli_z()).unwrap().scale(0.5));
    let y = Element::Matrix(HermitianMatrix::identity(2).add(&HermitianMatrix::pauli_x()).unwrap().scale(0.5));
    let r = midpoint_stability_probe(&model, &x, &y, &s).unwrap();
    eprintln!("midpoint {} {:?}", r.deficit, r.families);
    assert_eq!(r.verdict, Verdict::Stable);
}

#[test]
fn fiber_map_over_the_vertex() {
    let model = cone();
    let s = ProbeSettings {
        random_directions: 0,
        ..settings()
    };
    let m0 = mean(&model, &rho(0.0));
    let map = fiber_openness_map(&model, &m0, 5, &families_for(&model, &s), &s).unwrap();
    assert_eq!(map.len(), 5);
    let verdicts: Vec<Verdict> = map.iter().map(|p| p.report.verdict).collect();
    eprintln!("{verdicts:?}");
    // Only the end at rho(0) is open.
    let open: Vec<usize> = (0..5).filter(|&i| verdicts[i] == Verdict::Open).collect();
    assert_eq!(open.len(), 1);
    let end = &map[open[0]];
    assert!(open[0] == 0 || open[0] == 4);
    let StateRecord::Matrix(pairs) = &end.state else { panic!() };
    assert!((pairs[0][0][0] - 0.5).abs() < 1e-6 && pairs[2][2][0].abs() < 1e-6);
}

#[test]
fn settings_are_validated() {
    let model = cone();
    let bad = ProbeSettings {
        ladder: vec![1e-3, 1e-2],
        ..ProbeSettings::default()
    };
    assert!(openness_probe(&model, &Element::Matrix(centre()), &[ApproachFamily::InteriorRadial], &bad).is_err());
}
