use std::io;

use serde::{Deserialize, Serialize};

use super::{from_json, ResolvedProbe, Scenario, Setup, FORMAT};
use crate::error::Result;
use crate::geometry::{MeanValue, Model};
use crate::maxent::{infer, DisorderlinessMeasure, SolverPath};
use crate::probes::{
    closure_probe, continuity_probe, equivalence, fiber_openness_map, midpoint_stability_probe, openness_probe, usc_probe, Agreement,
    FiberMapPoint, ProbeReport, StateRecord,
};

/// Pretty JSON with every float written to 17 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PrettyExact::default());
    value.serialize(&mut ser).expect("serializing to memory");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// Pretty-printed JSON with every float written to 17 significant digits, so
/// documents re-parse to identical values and re-emit to identical bytes.
#[derive(Default)]
struct PrettyExact<'a> {
    pretty: serde_json::ser::PrettyFormatter<'a>,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.pretty.$name(writer $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for PrettyExact<'_> {
    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }

    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// One row of an inference table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceRow {
    pub mean: Vec<f64>,
    pub state: StateRecord,
    pub entropy: f64,
    pub support_rank: usize,
    pub boundary: bool,
    pub solver: SolverPath,
    pub projection_residual: f64,
    pub min_eigenvalue: f64,
}

/// The outcome of one probe request. Every field is always present; those
/// that do not apply to the request kind are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeOutcome {
    pub index: usize,
    pub kind: String,
    /// Empty on success.
    pub error: String,
    pub inferences: Vec<InferenceRow>,
    pub reports: Vec<ProbeReport>,
    pub agreement: Vec<Agreement>,
    pub fiber_map: Vec<FiberMapPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub format: u32,
    pub tool: String,
    pub scenario: Scenario,
    pub warnings: Vec<String>,
    pub observables: usize,
    pub outcomes: Vec<ProbeOutcome>,
}

impl RunReport {
    /// True when no probe errored.
    pub fn ok(&self) -> bool {
        self.outcomes.iter().all(|o| o.error.is_empty())
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        from_json(text)
    }

    /// Every probe report, labelled by the request it came from.
    pub fn labelled_reports(&self) -> Vec<(String, &ProbeReport)> {
        let mut out = Vec::new();
        for o in &self.outcomes {
            let nested = o.fiber_map.iter().map(|p| &p.report);
            for (j, r) in o.reports.iter().chain(nested).enumerate() {
                let kind = serde_json::to_value(r.probe).expect("plain enum");
                let kind = kind.as_str().expect("string tag");
                out.push((format!("probe{:02}_{}_{kind}_{j}", o.index, o.kind), r));
            }
        }
        out
    }

    /// One CSV table per probe report: `(file stem, contents)`.
    pub fn csv_tables(&self) -> Result<Vec<(String, String)>> {
        self.labelled_reports().into_iter().map(|(name, r)| Ok((name, report_csv(r)?))).collect()
    }
}

fn report_csv(r: &ProbeReport) -> Result<String> {
    let k = r.target.len();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["family".to_string(), "rung".into(), "delta".into()];
    header.extend((1..=k).map(|i| format!("m{i}")));
    header.extend(["status".into(), "value".into()]);
    let csv_err = |e: csv::Error| crate::error::Error::Io(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for rec in &r.records {
        let mut row = vec![r.families[rec.family].family.label(), rec.rung.to_string(), format!("{:.16e}", rec.delta)];
        row.extend((0..k).map(|i| rec.mean.get(i).map(|x| format!("{x:.16e}")).unwrap_or_default()));
        let status = serde_json::to_value(rec.status).expect("plain enum");
        row.push(status.as_str().expect("string tag").to_string());
        row.push(rec.value.map(|v| format!("{v:.16e}")).unwrap_or_default());
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("UTF-8 fields"))
}

fn row(model: &Model, m: &MeanValue, measure: &DisorderlinessMeasure) -> Result<InferenceRow> {
    let r = infer(model, m, measure)?;
    Ok(InferenceRow {
        mean: m.as_slice().to_vec(),
        state: StateRecord::from(&r.state),
        entropy: r.entropy_value,
        support_rank: r.support_rank,
        boundary: r.boundary_flag,
        solver: r.diagnostics.solver,
        projection_residual: r.diagnostics.projection_residual,
        min_eigenvalue: r.diagnostics.min_eigenvalue,
    })
}

/// A single inference for a validated scenario at mean value coordinates.
pub fn infer_mean(scenario: &Scenario, coords: &[f64]) -> Result<InferenceRow> {
    let setup = scenario.setup()?;
    let m = MeanValue::new(coords.to_vec())?;
    if m.len() != setup.model.k() {
        return Err(crate::error::Error::DimensionMismatch {
            expected: setup.model.k(),
            found: m.len(),
        });
    }
    if !setup.model.is_feasible(&m, 1e-9)? {
        return Err(crate::error::Error::InvalidConfig("the mean value is not feasible".into()));
    }
    row(&setup.model, &m, &setup.measure)
}

fn execute(setup: &Setup, probe: &ResolvedProbe, out: &mut ProbeOutcome) -> Result<()> {
    let (model, measure, s) = (&setup.model, &setup.measure, &setup.settings);
    match probe {
        ResolvedProbe::Inference(m) => out.inferences.push(row(model, m, measure)?),
        ResolvedProbe::Openness(x, f) => out.reports.push(openness_probe(model, x, f, s)?),
        ResolvedProbe::Continuity(m, f) => out.reports.push(continuity_probe(model, measure, m, f, s)?),
        ResolvedProbe::Usc(m, f) => out.reports.push(usc_probe(model, measure, m, f, s)?),
        ResolvedProbe::Closure(m) => out.reports.push(closure_probe(model, measure, m, s)?),
        ResolvedProbe::Equivalence(m, f) => {
            let phi = infer(model, m, measure)?;
            out.inferences.push(row(model, m, measure)?);
            let c = continuity_probe(model, measure, m, f, s)?;
            let o = openness_probe(model, &phi.state, f, s)?;
            out.agreement.push(equivalence(&c, &o));
            out.reports.extend([c, o]);
        }
        ResolvedProbe::FiberMap(m, grid, f) => out.fiber_map = fiber_openness_map(model, m, *grid, f, s)?,
        ResolvedProbe::Midpoint(x, y) => out.reports.push(midpoint_stability_probe(model, x, y, s)?),
    }
    Ok(())
}

/// Validates the scenario, then runs its probes in order. Validation problems
/// are returned as errors; probe failures are recorded in the report.
pub fn run(scenario: &Scenario) -> Result<RunReport> {
    let setup = scenario.setup()?;
    let outcomes = scenario
        .probes
        .iter()
        .zip(&setup.probes)
        .enumerate()
        .map(|(index, (req, probe))| {
            let mut out = ProbeOutcome {
                index,
                kind: req.kind().to_string(),
                error: String::new(),
                inferences: Vec::new(),
                reports: Vec::new(),
                agreement: Vec::new(),
                fiber_map: Vec::new(),
            };
            if let Err(e) = execute(&setup, probe, &mut out) {
                out = ProbeOutcome {
                    error: e.to_string(),
                    inferences: Vec::new(),
                    reports: Vec::new(),
                    agreement: Vec::new(),
                    fiber_map: Vec::new(),
                    ..out
                };
            }
            out
        })
        .collect();
    Ok(RunReport {
        format: FORMAT,
        tool: concat!("maxent ", env!("CARGO_PKG_VERSION")).to_string(),
        scenario: scenario.clone(),
        warnings: setup.warnings,
        observables: setup.model.k(),
        outcomes,
    })
}
