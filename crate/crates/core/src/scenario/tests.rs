use super::*;

fn cone_doc() -> serde_json::Value {
    serde_json::from_str(&builtin_scenario("cone").unwrap().to_json()).unwrap()
}

fn parse_value(v: &serde_json::Value) -> Result<Scenario> {
    parse_scenario(&serde_json::to_string(v).unwrap())
}

#[test]
fn builtins_round_trip() {
    for name in BUILTIN_NAMES {
        let s = builtin_scenario(name).unwrap();
        let text = s.to_json();
        let back = parse_scenario(&text).unwrap();
        assert_eq!(back, s, "{name}");
        assert_eq!(back.to_json(), text);
    }
    assert!(matches!(builtin_scenario("torus"), Err(Error::UnknownScenario(_))));
}

#[test]
fn builtin_shapes() {
    let cone = builtin_scenario("cone").unwrap().setup().unwrap();
    assert_eq!(cone.model.space().dim(), 4);
    assert_eq!(cone.model.k(), 2);
    let bloch = builtin_scenario("bloch").unwrap().setup().unwrap();
    assert_eq!(bloch.model.space().dim(), 4);
    assert_eq!(bloch.model.k(), 1);
    let body = builtin_scenario("standard-body").unwrap();
    let BackendSpec::Polytope { vertices, .. } = &body.backend else { panic!() };
    assert_eq!(vertices.len(), 722);
}

#[test]
fn unknown_keys_are_rejected_with_paths() {
    let mut v = cone_doc();
    v["probes"][0]["extra"] = serde_json::json!(1);
    let err = parse_value(&v).unwrap_err();
    let Error::Schema { path, .. } = &err else { panic!("{err}") };
    assert_eq!(path, "probes[0]");
    let mut v = cone_doc();
    v["colour"] = serde_json::json!("red");
    assert!(matches!(parse_value(&v), Err(Error::Schema { .. })));
}

#[test]
fn non_self_adjoint_matrix_is_named() {
    let mut v = cone_doc();
    v["backend"]["algebra"][1][0][1] = serde_json::json!([0.5, 0.0]);
    let err = parse_value(&v).unwrap_err();
    let Error::Schema { path, message } = &err else { panic!("{err}") };
    assert_eq!(path, "backend.algebra[1]");
    assert!(message.contains("entries[0][1]"), "{message}");
    assert!(err.is_validation());
}

#[test]
fn dependent_observables_are_dropped_with_a_warning() {
    let mut v = cone_doc();
    let first = v["backend"]["observables"][0].clone();
    let doubled: Vec<Vec<[f64; 2]>> = serde_json::from_value::<MatrixLiteral>(first)
        .unwrap()
        .into_iter()
        .map(|r| r.into_iter().map(|[a, b]| [2.0 * a, 2.0 * b]).collect())
        .collect();
    v["backend"]["observables"][1] = serde_json::to_value(doubled).unwrap();
    v["probes"] = serde_json::json!([]);
    let setup = parse_value(&v).unwrap().setup().unwrap();
    assert_eq!(setup.model.k(), 1);
    assert_eq!(setup.warnings.len(), 1);
}

#[test]
fn infeasible_targets_fail_validation() {
    let mut v = cone_doc();
    v["probes"] = serde_json::json!([{"kind": "inference", "mean": {"coords": [10.0, 10.0]}}]);
    let err = parse_value(&v).unwrap_err();
    assert!(err.is_validation(), "{err}");
    assert!(matches!(run(&serde_json::from_value(v).unwrap()), Err(e) if e.is_validation()));
}

#[test]
fn polytope_with_von_neumann_is_rejected() {
    let mut s = builtin_scenario("standard-body").unwrap();
    s.disorderliness = MeasureSpec::VonNeumann;
    assert!(s.setup().unwrap_err().is_validation());
}

#[test]
fn small_run_report_round_trips() {
    let mut s = builtin_scenario("bloch").unwrap();
    s.probes.truncate(2);
    let report = run(&s).unwrap();
    assert!(report.ok());
    let text = report.to_json();
    let back = RunReport::from_json(&text).unwrap();
    assert_eq!(back.to_json(), text);
    let tables = report.csv_tables().unwrap();
    assert_eq!(tables.len(), 3);
    for (_, t) in &tables {
        assert!(t.starts_with("family,rung,delta,m1,status,value\n"));
    }
    assert_eq!(report.outcomes[0].agreement, vec![crate::probes::Agreement::Agree]);
}
