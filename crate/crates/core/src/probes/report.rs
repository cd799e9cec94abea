//! Probe reports and the rules that turn sample records into verdicts.
//!
//! A verdict is a pure function of the records and thresholds stored in the
//! report, so [`ProbeReport::rederive`] reproduces it exactly.

use serde::{Deserialize, Serialize};

use super::family::ApproachFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Openness,
    Continuity,
    Usc,
    Closure,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Open,
    NotOpen,
    Continuous,
    Discontinuous,
    Holds,
    Violated,
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Ok,
    /// The generated mean value lies outside the mean value set.
    Infeasible,
    /// The family has no member at this scale (e.g. a boundary walk from an
    /// interior point).
    NotApplicable,
    Failed,
}

/// One measured sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    /// Index into [`ProbeReport::families`].
    pub family: usize,
    pub rung: usize,
    pub delta: f64,
    /// Coordinates of the sampled mean value (empty when none was generated).
    pub mean: Vec<f64>,
    pub status: SampleStatus,
    pub value: Option<f64>,
}

/// Decision thresholds. Two-sided probes call values at most `lower`
/// negative (open, continuous) and at least `upper` positive; in between is
/// inconclusive. One-sided probes use `upper` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyEstimate {
    pub family: ApproachFamily,
    /// Extrapolated limit of the family's values, if it produced any.
    pub estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeReport {
    pub probe: ProbeKind,
    /// The probed mean value.
    pub target: Vec<f64>,
    pub verdict: Verdict,
    /// Extrapolated deficit, gap or excess the verdict is based on.
    pub deficit: f64,
    pub families: Vec<FamilyEstimate>,
    pub records: Vec<SampleRecord>,
    pub thresholds: Thresholds,
    /// Baseline the records are measured against (the maximum at the target
    /// for the u.s.c. probe, zero otherwise).
    pub reference: f64,
    pub failures: usize,
    pub seed: u64,
}

/// Limit of a sequence from its last three terms: Aitken's extrapolation
/// when the differences shrink monotonically, the last term otherwise. The
/// correction never exceeds the spread of the three terms.
pub fn trend_limit(values: &[f64]) -> Option<f64> {
    let n = values.len();
    let last = *values.last()?;
    if n < 3 {
        return Some(last);
    }
    let (a, b, c) = (values[n - 3], values[n - 2], last);
    let (d1, d2) = (b - a, c - b);
    if d1 == 0.0 || d1 * d2 <= 0.0 || d2.abs() >= d1.abs() {
        return Some(last);
    }
    let r = d2 / d1;
    let correction = d2 * r / (1.0 - r);
    let bound = (c - a).abs();
    Some(c + correction.clamp(-bound, bound))
}

fn rung_values(records: &[SampleRecord], family: usize) -> Vec<f64> {
    let mut v: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| r.family == family && r.status == SampleStatus::Ok)
        .filter_map(|r| r.value.map(|x| (r.rung, x)))
        .collect();
    v.sort_by_key(|&(rung, _)| rung);
    v.into_iter().map(|(_, x)| x).collect()
}

/// Per-family estimates and the aggregated deficit for a probe kind.
pub(crate) fn aggregate(kind: ProbeKind, records: &[SampleRecord], families: usize) -> (Vec<Option<f64>>, f64) {
    let per_family: Vec<Option<f64>> = (0..families)
        .map(|f| {
            let vals = rung_values(records, f);
            match kind {
                ProbeKind::Usc => trend_limit(&vals),
                _ => trend_limit(&vals).map(|x| x.max(0.0)),
            }
        })
        .collect();
    let deficit = match kind {
        // Maximum over the ball at each scale, then the limit over scales.
        ProbeKind::Usc => {
            let rungs = records.iter().map(|r| r.rung + 1).max().unwrap_or(0);
            let maxima: Vec<f64> = (0..rungs)
                .filter_map(|k| {
                    records
                        .iter()
                        .filter(|r| r.rung == k && r.status == SampleStatus::Ok)
                        .filter_map(|r| r.value)
                        .reduce(f64::max)
                })
                .collect();
            trend_limit(&maxima).unwrap_or(f64::NEG_INFINITY)
        }
        _ => per_family.iter().flatten().copied().fold(0.0, f64::max),
    };
    (per_family, deficit)
}

pub(crate) fn verdict_for(kind: ProbeKind, deficit: f64, t: Thresholds) -> Verdict {
    let two_sided = |yes: Verdict, no: Verdict| {
        if deficit <= t.lower {
            yes
        } else if deficit >= t.upper {
            no
        } else {
            Verdict::Inconclusive
        }
    };
    match kind {
        ProbeKind::Openness => two_sided(Verdict::Open, Verdict::NotOpen),
        ProbeKind::Continuity => two_sided(Verdict::Continuous, Verdict::Discontinuous),
        ProbeKind::Usc | ProbeKind::Closure => {
            if deficit <= t.upper {
                Verdict::Holds
            } else {
                Verdict::Violated
            }
        }
        ProbeKind::Midpoint => {
            if deficit <= t.upper {
                Verdict::Stable
            } else {
                Verdict::Unstable
            }
        }
    }
}

impl ProbeReport {
    pub(crate) fn assemble(
        probe: ProbeKind,
        target: Vec<f64>,
        families: Vec<ApproachFamily>,
        records: Vec<SampleRecord>,
        thresholds: Thresholds,
        reference: f64,
        seed: u64,
    ) -> Self {
        let (estimates, deficit) = aggregate(probe, &records, families.len());
        let failures = records.iter().filter(|r| r.status == SampleStatus::Failed).count();
        ProbeReport {
            probe,
            target,
            verdict: verdict_for(probe, deficit, thresholds),
            deficit,
            families: families
                .into_iter()
                .zip(estimates)
                .map(|(family, estimate)| FamilyEstimate { family, estimate })
                .collect(),
            records,
            thresholds,
            reference,
            failures,
            seed,
        }
    }

    /// Deficit and verdict recomputed from the records.
    pub fn rederive(&self) -> (f64, Verdict) {
        let (_, deficit) = aggregate(self.probe, &self.records, self.families.len());
        (deficit, verdict_for(self.probe, deficit, self.thresholds))
    }
}
