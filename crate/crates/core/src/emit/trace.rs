use std::collections::BTreeMap;

use rust_decimal::Decimal;
use serde::Serialize;

use crate::availability::{
    plan_interval, plan_sensitivity, plan_symbolic, Assumption, AvailabilityInterval, SensitivityReport,
    SymExpr, SymbolicFlag,
};
use crate::error::{Error, Result};
use crate::latency::{compose_plan, q_intervals, quantile, DistSummary, QInterval, QuantileResult};
use crate::model::{
    merge_domains, AvailabilityEvidence, BoundMode, DomainMap, EvidenceModel, GovernancePolicy, JourneyExpr,
    JourneySpec, LatencyTarget, NodePath, ProbRef,
};
use crate::parser::EMAC_VERSION;
use crate::plan::{LatencyBasis, NodeKind, Plan};

use super::format::fmt_num;

/// Percentile reported when the objective has no latency target.
pub const DEFAULT_PERCENTILE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AvailabilityCheck {
    pub target: Decimal,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LatencyCheck {
    pub percentile: f64,
    pub threshold_ms: f64,
    pub upper_ms: f64,
    pub pass: bool,
}

/// Objective comparison: the availability bound selected by the policy
/// against the target, and the conservative upper quantile against the
/// latency threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Verdict {
    pub status: Status,
    pub bound_mode: BoundMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub availability: Option<AvailabilityCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyCheck>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ObjectiveView {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub availability: Option<Decimal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_budget: Option<Decimal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyTarget>,
}

/// Evidence consumed by a record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvidenceUse {
    pub source: String,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeLatency {
    pub point: QuantileResult,
    pub conservative: QuantileResult,
    pub point_summary: DistSummary,
    pub conservative_summary: DistSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BranchRecord {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    /// Value used at each endpoint of the journey interval.
    pub pessimistic: f64,
    pub optimistic: f64,
}

/// One record per expression node, plus one per conditional's branch
/// probability (at `<cond>.p`).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeRecord {
    pub path: NodePath,
    pub operator: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub availability: Option<AvailabilityInterval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<NodeLatency>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout: Option<QInterval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<BranchRecord>,
    pub assumptions: Vec<String>,
    pub evidence: Vec<EvidenceUse>,
    pub flags: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct JourneyLatency {
    pub percentile: f64,
    pub point: QuantileResult,
    pub conservative: QuantileResult,
    pub point_summary: DistSummary,
    pub conservative_summary: DistSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SymbolicView {
    /// Rendered over leaf names.
    pub expression: String,
    pub flags: Vec<SymbolicFlag>,
    #[serde(skip)]
    pub expr: SymExpr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SymbolicForms {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pessimistic: Option<SymbolicView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimistic: Option<SymbolicView>,
}

impl SymbolicForms {
    pub fn get(&self, mode: BoundMode) -> Option<&SymbolicView> {
        match mode {
            BoundMode::Pessimistic => self.pessimistic.as_ref(),
            BoundMode::Optimistic => self.optimistic.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct TraceFlag {
    pub code: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<NodePath>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DerivationTrace {
    pub emac_version: u32,
    pub journey: String,
    pub expression: String,
    pub objective: ObjectiveView,
    pub policy: GovernancePolicy,
    pub domains: BTreeMap<String, Vec<String>>,
    pub interval: AvailabilityInterval,
    pub latency: JourneyLatency,
    pub timeouts: Vec<QInterval>,
    pub sensitivity: SensitivityReport,
    pub symbolic: SymbolicForms,
    pub verdict: Verdict,
    pub records: Vec<NodeRecord>,
    /// Artifact id to the node paths it was derived from; filled in as
    /// artifacts are emitted.
    pub backlinks: BTreeMap<String, Vec<NodePath>>,
    pub flags: Vec<TraceFlag>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub model_provenance: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub confidence: BTreeMap<String, f64>,
}

impl DerivationTrace {
    pub fn record(&self, path: &NodePath) -> Option<&NodeRecord> {
        self.records.iter().find(|r| &r.path == path)
    }

    pub fn percentile(&self) -> f64 {
        self.latency.percentile
    }

    pub(crate) fn flag(&mut self, code: &'static str, path: Option<NodePath>, message: impl Into<String>) {
        self.flags.push(TraceFlag {
            code,
            path,
            message: message.into(),
        });
        self.flags.sort();
        self.flags.dedup();
    }
}

fn leaf_evidence(name: &str, model: &EvidenceModel) -> Vec<EvidenceUse> {
    let Some(ev) = model.leaf(name) else {
        return Vec::new();
    };
    let availability = match &ev.availability {
        AvailabilityEvidence::Point(_) => EvidenceUse {
            source: name.to_string(),
            kind: "availability",
            window: None,
            samples: None,
        },
        AvailabilityEvidence::Counts { total, window, .. } => EvidenceUse {
            source: name.to_string(),
            kind: "availability",
            window: (!window.is_empty()).then(|| window.clone()),
            samples: Some(*total),
        },
    };
    let latency = EvidenceUse {
        source: name.to_string(),
        kind: "latency",
        window: Some(ev.latency.window.clone()),
        samples: Some(ev.latency.samples),
    };
    vec![availability, latency]
}

fn prob_evidence(name: &str, model: &EvidenceModel) -> Vec<EvidenceUse> {
    model
        .branch_probs
        .get(name)
        .map(|est| EvidenceUse {
            source: name.to_string(),
            kind: "branch",
            window: None,
            samples: est.samples,
        })
        .into_iter()
        .collect()
}

fn render_names(expr: &SymExpr) -> String {
    expr.render(&mut |leaf| leaf.to_string(), &|v| fmt_num(v))
}

fn interval_assumptions(interval: &AvailabilityInterval) -> Vec<String> {
    vec![
        format!("lo: {}", interval.lo_assumption.as_str()),
        format!("hi: {}", interval.hi_assumption.as_str()),
    ]
}

fn operator_assumptions(expr: &JourneyExpr) -> Vec<String> {
    let note = match expr {
        JourneyExpr::Leaf(_) => "leaf success and latency drawn independently of each other",
        JourneyExpr::Series(_) => "all children must succeed; latency is the sum of child latencies",
        JourneyExpr::Parallel(_) => "all children must succeed; latency is the slowest child",
        JourneyExpr::Cond { .. } => "exactly one branch runs; branch probability within its declared range",
        JourneyExpr::Race(_) => "first success wins; latency is the fastest successful child",
        JourneyExpr::KofN { .. } => "needs k successes; latency is the k-th fastest successful child",
        JourneyExpr::Timeout { .. } => {
            "body counts only if it succeeds within the deadline; fallback starts at the deadline"
        }
    };
    vec![note.to_string()]
}

fn coupled_domains(plan: &Plan<f64>) -> Vec<String> {
    plan.domains
        .iter()
        .filter(|d| d.is_coupling())
        .map(|d| {
            let members: Vec<&str> = d.members.iter().map(|&m| plan.leaves[m].name.as_str()).collect();
            format!("domain {} couples {}", d.name, members.join(", "))
        })
        .collect()
}

fn latency_at(plan: &Plan<f64>, pess: &[f64], opt: &[f64], percentile: f64, delta: f64) -> Result<NodeLatency> {
    let point = compose_plan(plan, LatencyBasis::Point, opt)?.dist;
    let conservative = compose_plan(plan, LatencyBasis::Conservative, pess)?.dist;
    Ok(NodeLatency {
        point: quantile(&point, percentile, delta),
        conservative: quantile(&conservative, percentile, delta),
        point_summary: point.summary(),
        conservative_summary: conservative.summary(),
    })
}

/// Record for the subtree at `path`, evaluated on its own.
fn node_record(
    expr: &JourneyExpr,
    path: &NodePath,
    model: &EvidenceModel,
    domains: &DomainMap,
    percentile: f64,
    delta: f64,
) -> Result<NodeRecord> {
    let plan = Plan::<f64>::build(expr, model, domains)?;
    let detail = plan_interval(&plan)?;
    let latency = latency_at(
        &plan,
        &detail.pessimistic.probs,
        &detail.optimistic.probs,
        percentile,
        delta,
    )?;
    let mut assumptions = interval_assumptions(&detail.interval);
    assumptions.extend(operator_assumptions(expr));
    assumptions.extend(coupled_domains(&plan));
    let mut evidence: Vec<EvidenceUse> = expr
        .leaf_set()
        .into_iter()
        .flat_map(|leaf| leaf_evidence(leaf, model))
        .collect();
    evidence.extend(expr.prob_names().into_iter().flat_map(|p| prob_evidence(p, model)));
    evidence.sort();
    evidence.dedup();
    let mut flags = Vec::new();
    if detail.interval.approximate {
        flags.push("branch-heuristic");
    }
    if latency.point_summary.capped || latency.conservative_summary.capped {
        flags.push("latency-capped");
    }
    if latency.conservative.saturated {
        flags.push("quantile-saturated");
    }
    let timeout = match plan.root().kind {
        NodeKind::Timeout { .. } => q_intervals(&plan, &detail.pessimistic.q, &detail.optimistic.q)
            .into_iter()
            .next()
            .map(|mut q| {
                q.path = path.clone();
                q
            }),
        _ => None,
    };
    Ok(NodeRecord {
        path: path.clone(),
        operator: expr.operator(),
        name: match expr {
            JourneyExpr::Leaf(name) => Some(name.clone()),
            _ => None,
        },
        availability: Some(detail.interval),
        latency: Some(latency),
        timeout,
        branch: None,
        assumptions,
        evidence,
        flags,
    })
}

/// Derives everything the emitters need from a validated spec and model:
/// the journey interval, latency quantiles, timeout SLIs, sensitivity,
/// symbolic forms, a record for every node, and the objective verdict.
/// `domains` are merged with the spec's and the model's own.
pub fn build_trace(spec: &JourneySpec, model: &EvidenceModel, domains: &DomainMap) -> Result<DerivationTrace> {
    let merged = merge_domains(&merge_domains(&spec.domains, &model.domains), domains);
    let expr = &spec.expression;
    let plan = Plan::<f64>::build(expr, model, &merged)?;
    let mode = spec.policy.bound_mode;
    let delta = spec.policy.dkw_delta;
    let percentile = spec.objective.latency.map(|l| l.percentile).unwrap_or(DEFAULT_PERCENTILE);

    let detail = plan_interval(&plan)?;
    let sensitivity = plan_sensitivity(&plan, mode)?;
    let latency = latency_at(
        &plan,
        &detail.pessimistic.probs,
        &detail.optimistic.probs,
        percentile,
        delta,
    )?;
    let timeouts = q_intervals(&plan, &detail.pessimistic.q, &detail.optimistic.q);

    let mut flags = Vec::new();
    let mut symbolic_view = |m: BoundMode| -> Result<Option<SymbolicView>> {
        match plan_symbolic(&plan, m) {
            Ok(sym) => {
                for f in &sym.flags {
                    flags.push(TraceFlag {
                        code: "symbolic-constant",
                        path: Some(f.path.clone()),
                        message: format!("{} form folds this subtree to a constant: {}", m.as_str(), f.reason),
                    });
                }
                Ok(Some(SymbolicView {
                    expression: render_names(&sym.expr),
                    flags: sym.flags,
                    expr: sym.expr,
                }))
            }
            Err(Error::Resource(msg)) => {
                flags.push(TraceFlag {
                    code: "symbolic-unavailable",
                    path: None,
                    message: format!("{} symbolic form not built: {msg}", m.as_str()),
                });
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };
    let symbolic = SymbolicForms {
        pessimistic: symbolic_view(BoundMode::Pessimistic)?,
        optimistic: symbolic_view(BoundMode::Optimistic)?,
    };

    let mut records = Vec::new();
    let mut failure = None;
    expr.walk(|path, node| {
        if failure.is_some() {
            return;
        }
        match node_record(node, path, model, &merged, percentile, delta) {
            Ok(r) => records.push(r),
            Err(e) => failure = Some(e),
        }
        if let JourneyExpr::Cond { p, .. } = node {
            let cond = plan
                .conds
                .iter()
                .position(|c| plan.nodes[c.node].path == *path)
                .expect("every conditional is in the plan");
            let c = &plan.conds[cond];
            let (name, evidence) = match p {
                ProbRef::Named(name) => (Some(name.clone()), prob_evidence(name, model)),
                ProbRef::Literal(_) => (None, Vec::new()),
            };
            let mut assumptions = vec!["branch choice independent of component outcomes".to_string()];
            if c.is_free() {
                assumptions.push(format!(
                    "pessimistic and optimistic endpoints take the probability from [{}, {}]",
                    fmt_num(c.lo),
                    fmt_num(c.hi)
                ));
            }
            records.push(NodeRecord {
                path: path.prob(),
                operator: "Prob",
                name,
                availability: None,
                latency: None,
                timeout: None,
                branch: Some(BranchRecord {
                    value: c.value,
                    lo: c.lo,
                    hi: c.hi,
                    pessimistic: detail.pessimistic.probs[cond],
                    optimistic: detail.optimistic.probs[cond],
                }),
                assumptions,
                evidence,
                flags: Vec::new(),
            });
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    records.sort_by(|a, b| a.path.cmp(&b.path));
    for r in &records {
        for f in &r.flags {
            flags.push(TraceFlag {
                code: f,
                path: Some(r.path.clone()),
                message: format!("see record {}", r.path),
            });
        }
    }
    for leaf in &plan.leaves {
        if model.leaf(&leaf.name).and_then(|l| l.sli_query.as_ref()).is_none() {
            flags.push(TraceFlag {
                code: "sli-constant",
                path: Some(plan.nodes[leaf.node].path.clone()),
                message: format!(
                    "leaf `{}` has no sliQuery; rules use its compile-time availability",
                    leaf.name
                ),
            });
        }
    }

    let bound = detail.interval.bound(mode);
    let availability = spec.objective.availability.map(|target| AvailabilityCheck {
        target,
        bound,
        pass: bound >= spec.objective.availability_f64().unwrap_or(1.0),
    });
    let latency_check = spec.objective.latency.map(|l| LatencyCheck {
        percentile: l.percentile,
        threshold_ms: l.threshold_ms,
        upper_ms: latency.conservative.upper_ms,
        pass: latency.conservative.upper_ms < l.threshold_ms,
    });
    let pass = availability.as_ref().map_or(true, |c| c.pass) && latency_check.as_ref().map_or(true, |c| c.pass);
    let verdict = Verdict {
        status: if pass { Status::Pass } else { Status::Fail },
        bound_mode: mode,
        availability,
        latency: latency_check,
    };

    let mut trace = DerivationTrace {
        emac_version: EMAC_VERSION,
        journey: spec.name.clone(),
        expression: expr.to_string(),
        objective: ObjectiveView {
            availability: spec.objective.availability,
            error_budget: spec.objective.error_budget(),
            latency: spec.objective.latency,
        },
        policy: spec.policy.clone(),
        domains: merged
            .iter()
            .map(|(k, v)| (k.to_string(), v.iter().cloned().collect()))
            .collect(),
        interval: detail.interval,
        latency: JourneyLatency {
            percentile,
            point: latency.point,
            conservative: latency.conservative,
            point_summary: latency.point_summary,
            conservative_summary: latency.conservative_summary,
        },
        timeouts,
        sensitivity,
        symbolic,
        verdict,
        records,
        backlinks: BTreeMap::new(),
        flags: Vec::new(),
        model_provenance: model.provenance.clone(),
        confidence: model.confidence.clone(),
    };
    for f in flags {
        trace.flag(f.code, f.path, f.message);
    }
    Ok(trace)
}

/// Whether every record's interval collapses to independence, as happens
/// when no domain couples two leaves.
pub fn all_independent(trace: &DerivationTrace) -> bool {
    trace.records.iter().filter_map(|r| r.availability.as_ref()).all(|i| {
        i.lo_assumption == Assumption::Independent && i.hi_assumption == Assumption::Independent
    })
}
