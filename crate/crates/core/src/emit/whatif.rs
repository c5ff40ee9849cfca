use serde::Serialize;

use crate::error::Result;
use crate::model::{DomainMap, EvidenceModel, JourneySpec, NodePath};
use crate::parser::EMAC_VERSION;

use super::trace::{build_trace, DerivationTrace, Status};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delta {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

impl Delta {
    pub fn new(a: f64, b: f64) -> Self {
        Delta { a, b, delta: b - a }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AvailabilityDelta {
    pub lo: Delta,
    pub hi: Delta,
    pub pessimistic: Delta,
    pub optimistic: Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LatencyDelta {
    pub percentile_a: f64,
    pub percentile_b: f64,
    pub point: Delta,
    pub upper: Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerdictChange {
    pub a: Status,
    pub b: Status,
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RankChange {
    pub name: String,
    pub rank_a: Option<usize>,
    pub rank_b: Option<usize>,
    pub delta_a: Option<f64>,
    pub delta_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeDelta {
    pub path: NodePath,
    pub operator: &'static str,
    pub lo: Delta,
    pub hi: Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TimeoutDelta {
    pub path: NodePath,
    pub t_ms: Delta,
    pub q_lo: Delta,
    pub q_hi: Delta,
}

/// Differences between two compilations, `b - a` throughout.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WhatIfReport {
    pub emac_version: u32,
    pub journey_a: String,
    pub journey_b: String,
    pub availability: AvailabilityDelta,
    pub latency: LatencyDelta,
    pub verdict: VerdictChange,
    pub dominant_a: Option<String>,
    pub dominant_b: Option<String>,
    /// Entries whose rank differs, or that exist on one side only.
    pub rank_changes: Vec<RankChange>,
    /// Nodes with the same path and operator on both sides.
    pub nodes: Vec<NodeDelta>,
    pub timeouts: Vec<TimeoutDelta>,
}

pub fn whatif(
    spec_a: &JourneySpec,
    model_a: &EvidenceModel,
    spec_b: &JourneySpec,
    model_b: &EvidenceModel,
) -> Result<WhatIfReport> {
    let a = build_trace(spec_a, model_a, &DomainMap::new())?;
    let b = build_trace(spec_b, model_b, &DomainMap::new())?;
    Ok(compare_traces(&a, &b))
}

pub fn compare_traces(a: &DerivationTrace, b: &DerivationTrace) -> WhatIfReport {
    let (ia, ib) = (&a.interval, &b.interval);
    let mut names: Vec<&str> = a
        .sensitivity
        .entries
        .iter()
        .chain(&b.sensitivity.entries)
        .map(|e| e.name.as_str())
        .collect();
    names.sort_unstable();
    names.dedup();
    let rank_changes = names
        .into_iter()
        .filter_map(|name| {
            let (ea, eb) = (a.sensitivity.entry(name), b.sensitivity.entry(name));
            let (ra, rb) = (ea.map(|e| e.rank), eb.map(|e| e.rank));
            (ra != rb).then(|| RankChange {
                name: name.to_string(),
                rank_a: ra,
                rank_b: rb,
                delta_a: ea.map(|e| e.delta),
                delta_b: eb.map(|e| e.delta),
            })
        })
        .collect();
    let nodes = a
        .records
        .iter()
        .filter_map(|ra| {
            let rb = b.record(&ra.path)?;
            if ra.operator != rb.operator {
                return None;
            }
            let (x, y) = (ra.availability.as_ref()?, rb.availability.as_ref()?);
            Some(NodeDelta {
                path: ra.path.clone(),
                operator: ra.operator,
                lo: Delta::new(x.lo, y.lo),
                hi: Delta::new(x.hi, y.hi),
            })
        })
        .collect();
    let timeouts = a
        .timeouts
        .iter()
        .filter_map(|qa| {
            let qb = b.timeouts.iter().find(|q| q.path == qa.path)?;
            Some(TimeoutDelta {
                path: qa.path.clone(),
                t_ms: Delta::new(qa.t_ms, qb.t_ms),
                q_lo: Delta::new(qa.lo, qb.lo),
                q_hi: Delta::new(qa.hi, qb.hi),
            })
        })
        .collect();
    WhatIfReport {
        emac_version: EMAC_VERSION,
        journey_a: a.journey.clone(),
        journey_b: b.journey.clone(),
        availability: AvailabilityDelta {
            lo: Delta::new(ia.lo, ib.lo),
            hi: Delta::new(ia.hi, ib.hi),
            pessimistic: Delta::new(ia.pessimistic, ib.pessimistic),
            optimistic: Delta::new(ia.optimistic, ib.optimistic),
        },
        latency: LatencyDelta {
            percentile_a: a.latency.percentile,
            percentile_b: b.latency.percentile,
            point: Delta::new(a.latency.point.point_ms, b.latency.point.point_ms),
            upper: Delta::new(a.latency.conservative.upper_ms, b.latency.conservative.upper_ms),
        },
        verdict: VerdictChange {
            a: a.verdict.status,
            b: b.verdict.status,
            changed: a.verdict.status != b.verdict.status,
        },
        dominant_a: a.sensitivity.dominant.clone(),
        dominant_b: b.sensitivity.dominant.clone(),
        rank_changes,
        nodes,
        timeouts,
    }
}
