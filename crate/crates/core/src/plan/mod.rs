//! Indexed form of a journey bound to evidence, shared by every evaluator.
//!
//! Leaves, conditionals and timeouts are numbered so evaluation runs over
//! slices instead of name lookups; this matters once failure-domain patterns
//! multiply the number of tree walks.

mod eval;

use std::collections::BTreeMap;

use crate::diagnostics::{DiagCode, Diagnostic, Location};
use crate::error::{Error, Result};
use crate::latency::{from_histogram, DiscreteDist, HistogramMode};
use crate::model::{DomainMap, EvidenceModel, JourneyExpr, NodePath, ProbEstimate, ProbRef};
use crate::scalar::Scalar;

pub use eval::{Coupled, Coupling, LatencyBasis, PATTERN_LIMIT};

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind<S> {
    Leaf(usize),
    Series,
    Parallel,
    Cond(usize),
    Race,
    KofN(usize),
    Timeout { t: S, slot: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode<S> {
    pub path: NodePath,
    pub kind: NodeKind<S>,
    pub children: Vec<usize>,
    /// Multi-member domains with a member somewhere below this node.
    pub footprint: Vec<usize>,
}

impl<S> PlanNode<S> {
    pub fn operator(&self) -> &'static str {
        match self.kind {
            NodeKind::Leaf(_) => "Leaf",
            NodeKind::Series => "Series",
            NodeKind::Parallel => "Parallel",
            NodeKind::Cond(_) => "Cond",
            NodeKind::Race => "Race",
            NodeKind::KofN(_) => "KofN",
            NodeKind::Timeout { .. } => "Timeout",
        }
    }
}

/// Evidence for one leaf in the form the engines consume.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafInput<S> {
    pub availability: S,
    pub point: DiscreteDist<S>,
    pub conservative: DiscreteDist<S>,
}

impl<S: Scalar> LeafInput<S> {
    /// Same distribution in both latency modes, as for analytic inputs.
    pub fn analytic(availability: S, latency: DiscreteDist<S>) -> Self {
        LeafInput {
            availability,
            conservative: latency.clone(),
            point: latency,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanLeaf<S> {
    pub name: String,
    pub node: usize,
    pub input: LeafInput<S>,
    pub domain: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanCond {
    pub node: usize,
    /// Model name of the probability, or the node path for literals.
    pub label: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl PlanCond {
    pub fn is_free(&self) -> bool {
        self.lo < self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanDomain {
    pub name: String,
    /// Leaf indices present in this journey.
    pub members: Vec<usize>,
}

impl PlanDomain {
    /// Only domains with two or more present members couple anything.
    pub fn is_coupling(&self) -> bool {
        self.members.len() >= 2
    }
}

/// A journey bound to evidence. Node 0 is the root; nodes are in pre-order.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan<S> {
    pub nodes: Vec<PlanNode<S>>,
    pub leaves: Vec<PlanLeaf<S>>,
    pub conds: Vec<PlanCond>,
    /// Node index of each timeout, by slot.
    pub timeouts: Vec<usize>,
    pub domains: Vec<PlanDomain>,
}

impl<S: Scalar> Plan<S> {
    /// Binds `expr` to `model` under `domains` (already merged with the
    /// model's own domains by the caller).
    pub fn build(expr: &JourneyExpr, model: &EvidenceModel, domains: &DomainMap) -> Result<Self> {
        let mut leaves = BTreeMap::new();
        for name in expr.leaf_set() {
            let ev = model
                .leaf(name)
                .ok_or_else(|| Error::Unbound(format!("leaf `{name}`")))?;
            let dist = |mode| {
                from_histogram(&ev.latency, mode).map_err(|e| {
                    Error::Invalid(vec![Diagnostic::error(
                        DiagCode::EvidenceInvalid,
                        e.to_string(),
                        Location::Field(format!("leaves.{name}.latency")),
                    )])
                })
            };
            leaves.insert(
                name.to_string(),
                LeafInput {
                    availability: S::lift(ev.availability.value()),
                    point: dist(HistogramMode::Point)?,
                    conservative: dist(HistogramMode::Conservative)?,
                },
            );
        }
        Self::from_inputs(expr, &leaves, &model.branch_probs, domains)
    }

    /// Binds `expr` to explicit per-leaf inputs.
    pub fn from_inputs(
        expr: &JourneyExpr,
        leaves: &BTreeMap<String, LeafInput<S>>,
        probs: &BTreeMap<String, ProbEstimate>,
        domains: &DomainMap,
    ) -> Result<Self> {
        let mut plan = Plan {
            nodes: Vec::new(),
            leaves: Vec::new(),
            conds: Vec::new(),
            timeouts: Vec::new(),
            domains: Vec::new(),
        };
        plan.add(expr, NodePath::root(), leaves, probs)?;
        for (name, members) in domains.iter() {
            let present: Vec<usize> = plan
                .leaves
                .iter()
                .enumerate()
                .filter(|(_, l)| members.contains(&l.name))
                .map(|(i, _)| i)
                .collect();
            let idx = plan.domains.len();
            for &leaf in &present {
                plan.leaves[leaf].domain = Some(idx);
            }
            plan.domains.push(PlanDomain {
                name: name.to_string(),
                members: present,
            });
        }
        plan.fill_footprints(0);
        Ok(plan)
    }

    fn add(
        &mut self,
        expr: &JourneyExpr,
        path: NodePath,
        leaves: &BTreeMap<String, LeafInput<S>>,
        probs: &BTreeMap<String, ProbEstimate>,
    ) -> Result<usize> {
        let idx = self.nodes.len();
        let kind = match expr {
            JourneyExpr::Leaf(name) => {
                let input = leaves
                    .get(name)
                    .ok_or_else(|| Error::Unbound(format!("leaf `{name}`")))?;
                self.leaves.push(PlanLeaf {
                    name: name.clone(),
                    node: idx,
                    input: input.clone(),
                    domain: None,
                });
                NodeKind::Leaf(self.leaves.len() - 1)
            }
            JourneyExpr::Series(_) => NodeKind::Series,
            JourneyExpr::Parallel(_) => NodeKind::Parallel,
            JourneyExpr::Race(_) => NodeKind::Race,
            JourneyExpr::KofN { k, .. } => NodeKind::KofN(*k),
            JourneyExpr::Cond { p, .. } => {
                let (label, est) = match p {
                    ProbRef::Literal(v) => (path.to_string(), ProbEstimate::exact(*v)),
                    ProbRef::Named(name) => (
                        name.clone(),
                        probs
                            .get(name)
                            .cloned()
                            .ok_or_else(|| Error::Unbound(format!("branch probability `{name}`")))?,
                    ),
                };
                let (lo, hi) = est.interval();
                self.conds.push(PlanCond {
                    node: idx,
                    label,
                    value: est.value,
                    lo,
                    hi,
                });
                NodeKind::Cond(self.conds.len() - 1)
            }
            JourneyExpr::Timeout { t_ms, .. } => {
                self.timeouts.push(idx);
                NodeKind::Timeout {
                    t: S::count(*t_ms),
                    slot: self.timeouts.len() - 1,
                }
            }
        };
        self.nodes.push(PlanNode {
            path: path.clone(),
            kind,
            children: Vec::new(),
            footprint: Vec::new(),
        });
        for (i, child) in expr.children().into_iter().enumerate() {
            let c = self.add(child, path.child(i), leaves, probs)?;
            self.nodes[idx].children.push(c);
        }
        Ok(idx)
    }

    fn fill_footprints(&mut self, idx: usize) -> Vec<usize> {
        let mut fp = match self.nodes[idx].kind {
            NodeKind::Leaf(l) => self.leaves[l]
                .domain
                .filter(|&d| self.domains[d].is_coupling())
                .into_iter()
                .collect(),
            _ => Vec::new(),
        };
        for c in self.nodes[idx].children.clone() {
            fp.extend(self.fill_footprints(c));
        }
        fp.sort_unstable();
        fp.dedup();
        self.nodes[idx].footprint = fp.clone();
        fp
    }

    pub fn root(&self) -> &PlanNode<S> {
        &self.nodes[0]
    }

    pub fn node_index(&self, path: &NodePath) -> Option<usize> {
        self.nodes.iter().position(|n| &n.path == path)
    }

    /// True when some domain has two or more members in this journey.
    pub fn has_coupling(&self) -> bool {
        self.domains.iter().any(PlanDomain::is_coupling)
    }

    pub fn availabilities(&self) -> Vec<S> {
        self.leaves.iter().map(|l| l.input.availability).collect()
    }

    /// Point values of every branch probability.
    pub fn point_probs(&self) -> Vec<S> {
        self.conds.iter().map(|c| S::lift(c.value)).collect()
    }

    /// The same journey with the listed leaves made perfect.
    pub fn with_perfect(&self, leaves: &[usize]) -> Self {
        let mut out = self.clone();
        for &l in leaves {
            out.leaves[l].input.availability = S::one();
        }
        out
    }

    /// Conditionals located inside some timeout body, whose choice feeds a
    /// timeout SLI rather than only the availability of their own subtree.
    pub fn conds_under_timeout_body(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for &t in &self.timeouts {
            let body = &self.nodes[self.nodes[t].children[0]].path;
            for (i, c) in self.conds.iter().enumerate() {
                if body.is_ancestor_of(&self.nodes[c.node].path) || body == &self.nodes[c.node].path {
                    out.push(i);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_expression;

    fn inputs(names: &[(&str, f64)]) -> BTreeMap<String, LeafInput<f64>> {
        names
            .iter()
            .map(|&(n, a)| (n.to_string(), LeafInput::analytic(a, DiscreteDist::delta(10.0))))
            .collect()
    }

    #[test]
    fn indexes_in_preorder() {
        let expr = parse_expression("Series(A, Cond(p; B, C), Timeout(200ms; D, E))").unwrap();
        let probs = BTreeMap::from([("p".to_string(), ProbEstimate::exact(0.3))]);
        let domains = DomainMap::from_groups([("d", ["B", "D"]), ("solo", ["A", "A"])]);
        let plan = Plan::<f64>::from_inputs(
            &expr,
            &inputs(&[("A", 0.9), ("B", 0.8), ("C", 0.7), ("D", 0.6), ("E", 0.5)]),
            &probs,
            &domains,
        )
        .unwrap();
        let ops: Vec<_> = plan.nodes.iter().map(|n| n.operator()).collect();
        assert_eq!(ops, ["Series", "Leaf", "Cond", "Leaf", "Leaf", "Timeout", "Leaf", "Leaf"]);
        assert_eq!(plan.nodes[5].path.to_string(), "$.2");
        assert_eq!(plan.conds[0].label, "p");
        assert_eq!(plan.timeouts, [5]);
        assert!(plan.has_coupling());
        assert_eq!(plan.nodes[0].footprint, [0]);
        assert!(plan.nodes[1].footprint.is_empty());
        assert_eq!(plan.conds_under_timeout_body(), Vec::<usize>::new());
    }

    #[test]
    fn unbound_names_are_errors() {
        let expr = parse_expression("Cond(q; A, B)").unwrap();
        let err = Plan::<f64>::from_inputs(&expr, &inputs(&[("A", 0.9), ("B", 0.9)]), &BTreeMap::new(), &DomainMap::new())
            .unwrap_err();
        assert!(matches!(err, Error::Unbound(_)));
    }
}
