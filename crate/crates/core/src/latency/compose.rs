use serde::Serialize;

use crate::availability::endpoint;
use crate::error::Result;
use crate::model::{BoundMode, EvidenceModel, JourneyExpr, NodePath};
use crate::plan::{Coupling, LatencyBasis, Plan};
use crate::scalar::Scalar;

use super::{DiscreteDist, HistogramMode};

/// Journey latency with the timeout SLIs seen along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition<S> {
    pub dist: DiscreteDist<S>,
    /// Per timeout slot.
    pub q: Vec<S>,
}

/// Composes success-conditioned latency with leaves independent, each leaf
/// failing at its point availability, branch probabilities `probs`.
pub fn compose_plan<S: Scalar>(plan: &Plan<S>, basis: LatencyBasis, probs: &[S]) -> Result<Composition<S>> {
    let out = plan.evaluate_with(&plan.availabilities(), probs, basis, Coupling::Independent, true)?;
    Ok(Composition {
        dist: out.latency.expect("latency requested"),
        q: out.q,
    })
}

/// Range of one timeout's SLI across the two availability endpoints:
/// `lo` from the pessimistic endpoint with conservative latency, `hi` from
/// the optimistic endpoint with point latency (ordered if they cross).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct QInterval {
    pub path: NodePath,
    pub t_ms: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn q_intervals<S: Scalar>(plan: &Plan<S>, pessimistic_q: &[S], optimistic_q: &[S]) -> Vec<QInterval> {
    plan.timeouts
        .iter()
        .enumerate()
        .map(|(slot, &node)| {
            let t = match plan.nodes[node].kind {
                crate::plan::NodeKind::Timeout { t, .. } => t.to_f64_lossy(),
                _ => unreachable!("timeout slot points at a timeout"),
            };
            let (a, b) = (pessimistic_q[slot].to_f64_lossy(), optimistic_q[slot].to_f64_lossy());
            QInterval {
                path: plan.nodes[node].path.clone(),
                t_ms: t,
                lo: a.min(b),
                hi: a.max(b),
            }
        })
        .collect()
}

/// Journey latency in one histogram mode. Point mode mixes conditionals at
/// their optimistic endpoints, conservative mode at their pessimistic ones.
pub fn compose(
    expr: &JourneyExpr,
    model: &EvidenceModel,
    mode: HistogramMode,
) -> Result<(DiscreteDist<f64>, Vec<QInterval>)> {
    let plan = Plan::<f64>::build(expr, model, &model.domains)?;
    let pess = endpoint(&plan, BoundMode::Pessimistic)?;
    let opt = endpoint(&plan, BoundMode::Optimistic)?;
    let (basis, probs) = match mode {
        HistogramMode::Point => (LatencyBasis::Point, &opt.probs),
        HistogramMode::Conservative => (LatencyBasis::Conservative, &pess.probs),
    };
    let composition = compose_plan(&plan, basis, probs)?;
    Ok((composition.dist, q_intervals(&plan, &pess.q, &opt.q)))
}
