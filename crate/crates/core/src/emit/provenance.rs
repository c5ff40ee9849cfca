use std::collections::BTreeSet;

use serde::Serialize;

use crate::availability::SensitivityEntry;
use crate::model::NodePath;
use crate::parser::EMAC_VERSION;

use super::trace::{DerivationTrace, EvidenceUse, TraceFlag, Verdict};

/// How many of the top-ranked sensitivity entries are listed as dominant.
pub const DOMINANT_CONTRIBUTORS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ArtifactLink {
    pub id: String,
    pub document: String,
    pub nodes: Vec<NodePath>,
    pub operators: Vec<&'static str>,
    pub assumptions: Vec<String>,
    pub evidence_windows: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProvenanceReport {
    pub emac_version: u32,
    pub journey: String,
    pub expression: String,
    pub verdict: Verdict,
    pub artifacts: Vec<ArtifactLink>,
    pub assumptions: Vec<String>,
    pub evidence: Vec<EvidenceUse>,
    pub dominant_contributors: Vec<SensitivityEntry>,
    pub flags: Vec<TraceFlag>,
    pub trace: DerivationTrace,
}

/// Links every artifact in the trace's backlinks to the operators,
/// assumptions and evidence windows of the nodes it came from.
/// `documents` maps artifact id to the file that defines it.
pub fn provenance_report(trace: &DerivationTrace, document_of: &dyn Fn(&str) -> String) -> ProvenanceReport {
    let artifacts = trace
        .backlinks
        .iter()
        .map(|(id, nodes)| {
            let records: Vec<_> = nodes.iter().filter_map(|p| trace.record(p)).collect();
            let operators: BTreeSet<&'static str> = records.iter().map(|r| r.operator).collect();
            let assumptions: BTreeSet<String> = records.iter().flat_map(|r| r.assumptions.iter().cloned()).collect();
            let windows: BTreeSet<String> = records
                .iter()
                .flat_map(|r| r.evidence.iter())
                .filter_map(|e| e.window.as_ref().map(|w| format!("{} {}: {w}", e.source, e.kind)))
                .collect();
            ArtifactLink {
                id: id.clone(),
                document: document_of(id),
                nodes: nodes.clone(),
                operators: operators.into_iter().collect(),
                assumptions: assumptions.into_iter().collect(),
                evidence_windows: windows.into_iter().collect(),
            }
        })
        .collect();
    let mut assumptions = vec![
        format!("availability lo: {}", trace.interval.lo_assumption.as_str()),
        format!("availability hi: {}", trace.interval.hi_assumption.as_str()),
        format!("automation acts on the {} bound", trace.verdict.bound_mode.as_str()),
    ];
    for (name, members) in &trace.domains {
        assumptions.push(format!("failure domain {name}: {}", members.join(", ")));
    }
    let evidence: BTreeSet<EvidenceUse> = trace.records.iter().flat_map(|r| r.evidence.iter().cloned()).collect();
    ProvenanceReport {
        emac_version: EMAC_VERSION,
        journey: trace.journey.clone(),
        expression: trace.expression.clone(),
        verdict: trace.verdict.clone(),
        artifacts,
        assumptions,
        evidence: evidence.into_iter().collect(),
        dominant_contributors: trace
            .sensitivity
            .entries
            .iter()
            .take(DOMINANT_CONTRIBUTORS)
            .cloned()
            .collect(),
        flags: trace.flags.clone(),
        trace: trace.clone(),
    }
}
