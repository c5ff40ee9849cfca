use std::cmp::Ordering;

use serde::Serialize;

use crate::error::Result;
use crate::model::{merge_domains, BoundMode, DomainMap, EvidenceModel, JourneyExpr};
use crate::plan::Plan;
use crate::scalar::Scalar;

use super::plan_interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Leaf,
    Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityEntry {
    pub name: String,
    pub kind: EntryKind,
    /// Gain in the journey bound when this leaf (or every member of this
    /// domain) is made perfect.
    pub delta: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub mode: BoundMode,
    pub baseline: f64,
    pub entries: Vec<SensitivityEntry>,
    pub dominant: Option<String>,
}

impl SensitivityReport {
    pub fn entry(&self, name: &str) -> Option<&SensitivityEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Ranks leaves and named domains by how much perfecting them would raise
/// the journey bound selected by `mode`.
pub fn plan_sensitivity<S: Scalar>(plan: &Plan<S>, mode: BoundMode) -> Result<SensitivityReport> {
    let bound = |p: &Plan<S>| -> Result<f64> { Ok(plan_interval(p)?.interval.bound(mode)) };
    let baseline = bound(plan)?;
    let mut entries = Vec::new();
    for (i, leaf) in plan.leaves.iter().enumerate() {
        let improved = bound(&plan.with_perfect(&[i]))?;
        entries.push(SensitivityEntry {
            name: leaf.name.clone(),
            kind: EntryKind::Leaf,
            delta: (improved - baseline).max(0.0),
            rank: 0,
        });
    }
    for domain in plan.domains.iter().filter(|d| !d.members.is_empty()) {
        let improved = bound(&plan.with_perfect(&domain.members))?;
        entries.push(SensitivityEntry {
            name: domain.name.clone(),
            kind: EntryKind::Domain,
            delta: (improved - baseline).max(0.0),
            rank: 0,
        });
    }
    entries.sort_by(|a, b| {
        b.delta
            .partial_cmp(&a.delta)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.name.cmp(&b.name))
            .then_with(|| (a.kind as u8).cmp(&(b.kind as u8)))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(SensitivityReport {
        mode,
        baseline,
        dominant: entries.first().map(|e| e.name.clone()),
        entries,
    })
}

pub fn sensitivity(
    expr: &JourneyExpr,
    model: &EvidenceModel,
    domains: &DomainMap,
    mode: BoundMode,
) -> Result<SensitivityReport> {
    let plan = Plan::<f64>::build(expr, model, &merge_domains(domains, &model.domains))?;
    plan_sensitivity(&plan, mode)
}
