//! Derivation trace and the governance documents compiled from it.

pub mod format;
mod gate;
mod provenance;
mod rules;
mod text;
mod trace;
mod whatif;

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{validate_spec, BoundMode, DomainMap, EvidenceModel, JourneySpec, NodePath};
use crate::parser::EMAC_VERSION;

pub use gate::{emit_rollout_gate, AnalysisTemplate, Metric, PROMETHEUS_ADDRESS};
pub use provenance::{provenance_report, ArtifactLink, ProvenanceReport, DOMINANT_CONTRIBUTORS};
pub use rules::{
    burn_threshold, emit_burn_rate_alerts, emit_recording_rules, leaf_sli, percentile_tag, render_promql,
    rule_windows, window_tag, Emitted, Names, Rule, RuleFile, RuleGroup,
};
pub use text::render_trace_text;
pub use trace::{
    all_independent, build_trace, AvailabilityCheck, BranchRecord, DerivationTrace, EvidenceUse, JourneyLatency,
    LatencyCheck, NodeLatency, NodeRecord, ObjectiveView, Status, SymbolicForms, SymbolicView, TraceFlag,
    Verdict, DEFAULT_PERCENTILE,
};
pub use whatif::{compare_traces, whatif, Delta, NodeDelta, RankChange, TimeoutDelta, WhatIfReport};

pub const RECORDING_RULES_FILE: &str = "recording-rules.yaml";
pub const ALERTING_RULES_FILE: &str = "alerting-rules.yaml";
pub const ROLLOUT_GATE_FILE: &str = "rollout-gate.yaml";
pub const PROVENANCE_FILE: &str = "provenance.json";

/// Which SLI forms to emit. A single mode also drives alerts, the gate and
/// the verdict; `Both` leaves those to the policy's bound mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelection {
    Pessimistic,
    Optimistic,
    Both,
}

impl FromStr for ModeSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pessimistic" => Ok(ModeSelection::Pessimistic),
            "optimistic" => Ok(ModeSelection::Optimistic),
            "both" => Ok(ModeSelection::Both),
            other => Err(format!("unknown mode `{other}` (pessimistic, optimistic, both)")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CompileOptions {
    pub modes: Option<ModeSelection>,
    /// Extra failure domains, merged with the spec's and the model's.
    pub domains: DomainMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompilationBundle {
    pub recording_rules: String,
    pub alerting_rules: String,
    pub rollout_gate: String,
    pub provenance: String,
    pub trace: DerivationTrace,
    pub warnings: Vec<String>,
}

impl CompilationBundle {
    /// File name and content of each document, in write order.
    pub fn files(&self) -> [(&'static str, &str); 4] {
        [
            (RECORDING_RULES_FILE, &self.recording_rules),
            (ALERTING_RULES_FILE, &self.alerting_rules),
            (ROLLOUT_GATE_FILE, &self.rollout_gate),
            (PROVENANCE_FILE, &self.provenance),
        ]
    }
}

fn yaml_document<T: serde::Serialize>(journey: &str, value: &T) -> String {
    format!(
        "# emacVersion: {EMAC_VERSION}\n# Generated by emac for journey {journey}; do not edit.\n{}",
        format::to_yaml(value)
    )
}

/// Validates, derives the trace and renders every document. Output is a
/// pure function of the inputs.
pub fn compile(spec: &JourneySpec, model: &EvidenceModel, options: &CompileOptions) -> Result<CompilationBundle> {
    let diags = validate_spec(spec, model);
    if crate::diagnostics::has_errors(&diags) {
        return Err(Error::Invalid(diags));
    }
    let mut spec = spec.clone();
    let modes = match options.modes {
        Some(ModeSelection::Pessimistic) => {
            spec.policy.bound_mode = BoundMode::Pessimistic;
            vec![BoundMode::Pessimistic]
        }
        Some(ModeSelection::Optimistic) => {
            spec.policy.bound_mode = BoundMode::Optimistic;
            vec![BoundMode::Optimistic]
        }
        Some(ModeSelection::Both) => vec![BoundMode::Pessimistic, BoundMode::Optimistic],
        None => vec![spec.policy.bound_mode],
    };
    let mode = spec.policy.bound_mode;
    let mut trace = build_trace(&spec, model, &options.domains)?;
    let mut names = Names::new(&spec.name);

    let recording = emit_recording_rules(&trace, &spec, model, &modes, &mut names)?;
    let alerts = emit_burn_rate_alerts(&trace, &spec, mode, &mut names)?;
    let gate = emit_rollout_gate(&trace, &spec, mode, &mut names)?;

    let mut warnings: Vec<String> = diags.iter().map(ToString::to_string).collect();
    if !alerts.warnings.is_empty() {
        trace.flag("no-availability-objective", None, alerts.warnings.join("; "));
    }
    if !gate.warnings.is_empty() {
        trace.flag("latency-gate-advisory", Some(NodePath::root()), gate.warnings.join("; "));
    }
    warnings.extend(alerts.warnings.iter().cloned());
    warnings.extend(gate.warnings.iter().cloned());

    let mut documents = std::collections::BTreeMap::new();
    for (file, artifacts) in [
        (RECORDING_RULES_FILE, &recording.artifacts),
        (ALERTING_RULES_FILE, &alerts.artifacts),
        (ROLLOUT_GATE_FILE, &gate.artifacts),
    ] {
        for (id, paths) in artifacts {
            trace.backlinks.insert(id.clone(), paths.clone());
            documents.insert(id.clone(), file);
        }
    }
    let template = gate.document.metadata.name.clone();
    trace.backlinks.insert(template.clone(), vec![NodePath::root()]);
    documents.insert(template, ROLLOUT_GATE_FILE);

    let report = provenance_report(&trace, &|id| documents.get(id).copied().unwrap_or(PROVENANCE_FILE).to_string());
    Ok(CompilationBundle {
        recording_rules: yaml_document(&spec.name, &recording.document),
        alerting_rules: yaml_document(&spec.name, &alerts.document),
        rollout_gate: yaml_document(&spec.name, &gate.document),
        provenance: format::to_json(&report),
        trace,
        warnings,
    })
}

#[cfg(test)]
mod tests;
