//! Journey availability bracketed by the two dependence extremes.
//!
//! The optimistic endpoint treats every leaf as independent. The
//! pessimistic endpoint couples the members of each failure domain through
//! one latent uniform (comonotone coupling), which collapses redundancy
//! inside a domain. Conjunctions can come out *higher* under coupling, so
//! the reported interval is the ordered pair of the two evaluations, each
//! labelled with the assumption that produced it.

mod sensitivity;
mod symbolic;

use serde::Serialize;

use crate::error::Result;
use crate::model::{merge_domains, BoundMode, DomainMap, EvidenceModel, JourneyExpr, NodePath};
use crate::plan::{Coupling, LatencyBasis, Plan};
use crate::scalar::Scalar;

pub use sensitivity::{plan_sensitivity, sensitivity, EntryKind, SensitivityEntry, SensitivityReport};
pub use symbolic::{plan_symbolic, symbolic_availability, SymExpr, Symbolic, SymbolicFlag, MAX_KOFN_EXPANSION};

/// Free conditionals whose endpoint combinations are searched exhaustively.
pub const MAX_VERTEX_CONDS: usize = 8;
/// Budget of tree walks for that search (vertices times domain patterns).
const VERTEX_WALK_BUDGET: u64 = 10_000_000;

/// The dependence assumption behind an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Assumption {
    #[serde(rename = "independent")]
    Independent,
    #[serde(rename = "comonotone-within-domains")]
    Comonotone,
}

impl Assumption {
    pub fn as_str(self) -> &'static str {
        match self {
            Assumption::Independent => "independent",
            Assumption::Comonotone => "comonotone-within-domains",
        }
    }
}

/// One evaluated endpoint with the branch probabilities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint<S> {
    pub value: S,
    pub assumption: Assumption,
    /// Chosen probability per conditional, in plan order.
    pub probs: Vec<S>,
    /// Per timeout slot: probability the body succeeds within its deadline.
    pub q: Vec<S>,
    /// Per node: marginal success probability of the subtree.
    pub node_availability: Vec<S>,
    /// True when the branch-probability choice came from a heuristic.
    pub approximate: bool,
}

fn semantics(mode: BoundMode) -> (Coupling, LatencyBasis, bool) {
    match mode {
        BoundMode::Optimistic => (Coupling::Independent, LatencyBasis::Point, true),
        BoundMode::Pessimistic => (Coupling::Comonotone, LatencyBasis::Conservative, false),
    }
}

/// Evaluates one endpoint. Optimistic: independence, point-mode latency for
/// timeout SLIs, branch probabilities at the maximizing endpoints.
/// Pessimistic: comonotone domains, conservative latency, minimizing
/// endpoints.
///
/// The journey availability is affine in each branch probability, so the
/// extreme is attained at a vertex of the probability box. Without
/// coupling and outside timeout bodies a local bottom-up choice is exact;
/// otherwise up to [`MAX_VERTEX_CONDS`] free conditionals are searched
/// exhaustively, and beyond that the local choice is used and flagged.
pub fn endpoint<S: Scalar>(plan: &Plan<S>, mode: BoundMode) -> Result<Endpoint<S>> {
    let (coupling, basis, maximize) = semantics(mode);
    let coupled = coupling == Coupling::Comonotone && plan.has_coupling();
    let assumption = if coupled {
        Assumption::Comonotone
    } else {
        Assumption::Independent
    };
    let avail = plan.availabilities();
    let free: Vec<usize> = (0..plan.conds.len()).filter(|&c| plan.conds[c].is_free()).collect();
    let mut probs = plan.point_probs();
    let mut approximate = false;
    let under_timeout = plan.conds_under_timeout_body();
    let local_exact = !coupled && free.iter().all(|c| !under_timeout.contains(c));
    let walks = (1u64 << free.len().min(63)).saturating_mul(plan.pattern_count());
    if free.is_empty() {
    } else if local_exact {
        local_choice(plan, &avail, &mut probs, basis, maximize)?;
    } else if free.len() <= MAX_VERTEX_CONDS && walks <= VERTEX_WALK_BUDGET {
        let mut best: Option<(S, Vec<S>)> = None;
        for mask in 0u32..(1 << free.len()) {
            let mut trial = probs.clone();
            for (bit, &c) in free.iter().enumerate() {
                let cond = &plan.conds[c];
                trial[c] = S::lift(if mask & (1 << bit) != 0 { cond.hi } else { cond.lo });
            }
            let v = plan.evaluate_with(&avail, &trial, basis, coupling, false)?.availability;
            let better = match &best {
                None => true,
                Some((b, _)) => (maximize && v > *b) || (!maximize && v < *b),
            };
            if better {
                best = Some((v, trial));
            }
        }
        probs = best.expect("at least one vertex").1;
    } else {
        local_choice(plan, &avail, &mut probs, basis, maximize)?;
        approximate = true;
    }
    let out = plan.evaluate_with(&avail, &probs, basis, coupling, false)?;
    Ok(Endpoint {
        value: out.availability,
        assumption,
        probs,
        q: out.q,
        node_availability: out.node_availability,
        approximate,
    })
}

/// Deepest conditionals first, each set to the endpoint favouring the
/// better (or worse) branch as evaluated under independence.
fn local_choice<S: Scalar>(
    plan: &Plan<S>,
    avail: &[S],
    probs: &mut [S],
    basis: LatencyBasis,
    maximize: bool,
) -> Result<()> {
    for c in (0..plan.conds.len()).rev() {
        let cond = &plan.conds[c];
        if !cond.is_free() {
            continue;
        }
        let out = plan.evaluate_with(avail, probs, basis, Coupling::Independent, false)?;
        let node = &plan.nodes[cond.node];
        let (t, f) = (out.node_availability[node.children[0]], out.node_availability[node.children[1]]);
        let take_hi = if maximize { t > f } else { t < f };
        probs[c] = S::lift(if take_hi { cond.hi } else { cond.lo });
    }
    Ok(())
}

pub fn plan_optimistic<S: Scalar>(plan: &Plan<S>) -> Result<S> {
    Ok(endpoint(plan, BoundMode::Optimistic)?.value)
}

pub fn plan_pessimistic<S: Scalar>(plan: &Plan<S>) -> Result<S> {
    Ok(endpoint(plan, BoundMode::Pessimistic)?.value)
}

/// Availability under independence.
pub fn eval_optimistic(expr: &JourneyExpr, model: &EvidenceModel) -> Result<f64> {
    plan_optimistic(&Plan::<f64>::build(expr, model, &model.domains)?)
}

/// Availability under comonotone coupling of `domains` merged with the
/// model's own domains.
pub fn eval_pessimistic(expr: &JourneyExpr, model: &EvidenceModel, domains: &DomainMap) -> Result<f64> {
    plan_pessimistic(&Plan::<f64>::build(expr, model, &merge_domains(domains, &model.domains))?)
}

/// Endpoint probability chosen for one conditional.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchChoice {
    pub label: String,
    pub path: NodePath,
    pub pessimistic: f64,
    pub optimistic: f64,
}

/// `[lo, hi]` with the assumption behind each end.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AvailabilityInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_assumption: Assumption,
    pub hi_assumption: Assumption,
    pub pessimistic: f64,
    pub optimistic: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub branch_probs: Vec<BranchChoice>,
    pub approximate: bool,
}

impl AvailabilityInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// The endpoint automation acts on: `lo` in pessimistic mode, `hi` in
    /// optimistic mode.
    pub fn bound(&self, mode: BoundMode) -> f64 {
        match mode {
            BoundMode::Pessimistic => self.lo,
            BoundMode::Optimistic => self.hi,
        }
    }
}

/// Both endpoints of a plan, with the raw per-endpoint detail.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDetail<S> {
    pub interval: AvailabilityInterval,
    pub pessimistic: Endpoint<S>,
    pub optimistic: Endpoint<S>,
}

pub fn plan_interval<S: Scalar>(plan: &Plan<S>) -> Result<IntervalDetail<S>> {
    let pess = endpoint(plan, BoundMode::Pessimistic)?;
    let opt = endpoint(plan, BoundMode::Optimistic)?;
    let (p, o) = (pess.value.to_f64_lossy(), opt.value.to_f64_lossy());
    let ((lo, lo_a), (hi, hi_a)) = if p <= o {
        ((p, pess.assumption), (o, opt.assumption))
    } else {
        ((o, opt.assumption), (p, pess.assumption))
    };
    let branch_probs = plan
        .conds
        .iter()
        .enumerate()
        .map(|(i, c)| BranchChoice {
            label: c.label.clone(),
            path: plan.nodes[c.node].path.clone(),
            pessimistic: pess.probs[i].to_f64_lossy(),
            optimistic: opt.probs[i].to_f64_lossy(),
        })
        .collect();
    let interval = AvailabilityInterval {
        lo,
        hi,
        lo_assumption: lo_a,
        hi_assumption: hi_a,
        pessimistic: p,
        optimistic: o,
        branch_probs,
        approximate: pess.approximate || opt.approximate,
    };
    Ok(IntervalDetail {
        interval,
        pessimistic: pess,
        optimistic: opt,
    })
}

pub fn availability_interval(
    expr: &JourneyExpr,
    model: &EvidenceModel,
    domains: &DomainMap,
) -> Result<AvailabilityInterval> {
    let plan = Plan::<f64>::build(expr, model, &merge_domains(domains, &model.domains))?;
    Ok(plan_interval(&plan)?.interval)
}
