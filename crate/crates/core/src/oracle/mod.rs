//! Operational reference semantics for journeys.
//!
//! The simulator evaluates the operator tree outcome by outcome: each leaf
//! either succeeds or fails and, independently, takes a latency; operators
//! combine those outcomes the way a request would actually experience them.
//! It shares no evaluation code with the analytic engines, so agreement
//! between the two is meaningful evidence that both are right.

mod enumerate;
mod montecarlo;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::latency::{from_histogram, DiscreteDist, HistogramMode};
use crate::model::{DomainMap, EvidenceModel, JourneyExpr, NodePath, ProbRef};
use crate::plan::Coupling;

/// Largest joint-outcome space enumerated exactly.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Enumerate,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub coupling: Coupling,
    pub mode: SimMode,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    pub percentiles: Vec<f64>,
}

impl SimConfig {
    pub fn monte_carlo(trials: u64, seed: u64, coupling: Coupling) -> Self {
        SimConfig {
            trials,
            seed,
            coupling,
            mode: SimMode::MonteCarlo,
            workers: 0,
            percentiles: vec![0.5, 0.9, 0.99],
        }
    }

    pub fn enumerate(coupling: Coupling) -> Self {
        SimConfig {
            mode: SimMode::Enumerate,
            ..SimConfig::monte_carlo(1, 0, coupling)
        }
    }

    fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if let Some(p) = self.percentiles.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::Config(format!("percentile {p} is outside (0, 1)")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyPoint {
    pub ms: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalQuantile {
    pub percentile: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeoutRate {
    pub path: NodePath,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimResult {
    pub mode: SimMode,
    pub coupling: Coupling,
    /// Sampled trials, or the number of joint outcomes enumerated.
    pub trials: u64,
    pub seed: Option<u64>,
    pub availability: f64,
    pub standard_error: f64,
    /// Latency among successful requests.
    pub latency: Vec<LatencyPoint>,
    pub quantiles: Vec<EmpiricalQuantile>,
    pub timeouts: Vec<TimeoutRate>,
}

impl SimResult {
    pub fn latency_dist(&self) -> Option<DiscreteDist<f64>> {
        (!self.latency.is_empty()).then(|| DiscreteDist::from_points(self.latency.iter().map(|p| (p.ms, p.mass)).collect()))
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Leaf(usize),
    Series(Vec<Node>),
    Parallel(Vec<Node>),
    Cond { cond: usize, if_true: Box<Node>, if_false: Box<Node> },
    Race(Vec<Node>),
    KofN { k: usize, children: Vec<Node> },
    Timeout { t: f64, slot: usize, body: Box<Node>, fallback: Box<Node> },
}

#[derive(Debug, Clone)]
pub(crate) struct Leaf {
    pub availability: f64,
    pub values: Vec<f64>,
    pub masses: Vec<f64>,
    /// Running totals of `masses`, last pinned to one.
    pub cumulative: Vec<f64>,
}

/// A journey with everything the simulator draws from.
#[derive(Debug, Clone)]
pub struct World {
    pub(crate) root: Node,
    pub(crate) leaves: Vec<Leaf>,
    pub(crate) conds: Vec<f64>,
    pub(crate) timeouts: Vec<NodePath>,
    /// Leaf indices of each domain with two or more members present.
    pub(crate) domains: Vec<Vec<usize>>,
}

impl World {
    /// Builds from explicit leaf data: availability and latency per leaf
    /// name, and a probability per conditional label (the model name, or
    /// the node path of a literal unless overridden).
    pub fn new(
        expr: &JourneyExpr,
        leaves: &BTreeMap<String, (f64, DiscreteDist<f64>)>,
        probs: &BTreeMap<String, f64>,
        domains: &DomainMap,
    ) -> Result<World> {
        let mut world = World {
            root: Node::Leaf(0),
            leaves: Vec::new(),
            conds: Vec::new(),
            timeouts: Vec::new(),
            domains: Vec::new(),
        };
        let mut names = Vec::new();
        world.root = world.lower(expr, &NodePath::root(), leaves, probs, &mut names)?;
        for (_, members) in domains.iter() {
            let present: Vec<usize> = (0..names.len()).filter(|&i| members.contains(&names[i])).collect();
            if present.len() >= 2 {
                world.domains.push(present);
            }
        }
        Ok(world)
    }

    /// Point-mode latency and point branch probabilities from a model.
    /// `probs` overrides individual conditionals by label.
    pub fn from_model(
        expr: &JourneyExpr,
        model: &EvidenceModel,
        domains: &DomainMap,
        overrides: &BTreeMap<String, f64>,
    ) -> Result<World> {
        let mut leaves = BTreeMap::new();
        for name in expr.leaf_set() {
            let ev = model
                .leaf(name)
                .ok_or_else(|| Error::Unbound(format!("leaf `{name}`")))?;
            let dist = from_histogram(&ev.latency, HistogramMode::Point)
                .map_err(|e| Error::Config(format!("leaf `{name}`: {e}")))?;
            leaves.insert(name.to_string(), (ev.availability.value(), dist));
        }
        let mut probs: BTreeMap<String, f64> =
            model.branch_probs.iter().map(|(k, v)| (k.clone(), v.value)).collect();
        probs.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));
        World::new(expr, &leaves, &probs, domains)
    }

    fn lower(
        &mut self,
        expr: &JourneyExpr,
        path: &NodePath,
        leaves: &BTreeMap<String, (f64, DiscreteDist<f64>)>,
        probs: &BTreeMap<String, f64>,
        names: &mut Vec<String>,
    ) -> Result<Node> {
        let mut lower_all = |w: &mut World, cs: &[JourneyExpr]| -> Result<Vec<Node>> {
            cs.iter()
                .enumerate()
                .map(|(i, c)| w.lower(c, &path.child(i), leaves, probs, names))
                .collect()
        };
        Ok(match expr {
            JourneyExpr::Leaf(name) => {
                let (a, dist) = leaves
                    .get(name)
                    .ok_or_else(|| Error::Unbound(format!("leaf `{name}`")))?;
                let masses: Vec<f64> = dist.support().iter().map(|p| p.1).collect();
                let mut acc = 0.0;
                let mut cumulative: Vec<f64> = masses
                    .iter()
                    .map(|m| {
                        acc += m;
                        acc
                    })
                    .collect();
                *cumulative.last_mut().expect("nonempty support") = 1.0;
                self.leaves.push(Leaf {
                    availability: *a,
                    values: dist.support().iter().map(|p| p.0).collect(),
                    masses,
                    cumulative,
                });
                names.push(name.clone());
                Node::Leaf(self.leaves.len() - 1)
            }
            JourneyExpr::Series(cs) => Node::Series(lower_all(self, cs)?),
            JourneyExpr::Parallel(cs) => Node::Parallel(lower_all(self, cs)?),
            JourneyExpr::Race(cs) => Node::Race(lower_all(self, cs)?),
            JourneyExpr::KofN { k, children } => Node::KofN {
                k: *k,
                children: lower_all(self, children)?,
            },
            JourneyExpr::Cond { p, if_true, if_false } => {
                let label = match p {
                    ProbRef::Literal(_) => path.to_string(),
                    ProbRef::Named(name) => name.clone(),
                };
                let value = match (p, probs.get(&label)) {
                    (_, Some(v)) => *v,
                    (ProbRef::Literal(v), None) => *v,
                    (ProbRef::Named(name), None) => {
                        return Err(Error::Unbound(format!("branch probability `{name}`")))
                    }
                };
                self.conds.push(value);
                let cond = self.conds.len() - 1;
                Node::Cond {
                    cond,
                    if_true: Box::new(self.lower(if_true, &path.child(0), leaves, probs, names)?),
                    if_false: Box::new(self.lower(if_false, &path.child(1), leaves, probs, names)?),
                }
            }
            JourneyExpr::Timeout { t_ms, body, fallback } => {
                self.timeouts.push(path.clone());
                let slot = self.timeouts.len() - 1;
                Node::Timeout {
                    t: *t_ms as f64,
                    slot,
                    body: Box::new(self.lower(body, &path.child(0), leaves, probs, names)?),
                    fallback: Box::new(self.lower(fallback, &path.child(1), leaves, probs, names)?),
                }
            }
        })
    }

    fn coupled(&self, coupling: Coupling) -> &[Vec<usize>] {
        match coupling {
            Coupling::Independent => &[],
            Coupling::Comonotone => &self.domains,
        }
    }
}

/// Runs the simulator on a prepared world.
pub fn run_world(world: &World, cfg: &SimConfig) -> Result<SimResult> {
    cfg.check()?;
    match cfg.mode {
        SimMode::MonteCarlo => montecarlo::run(world, cfg),
        SimMode::Enumerate => enumerate::run(world, cfg),
    }
}

/// Simulates `expr` against `model` under `domains` merged with the model's
/// own domains.
pub fn run(expr: &JourneyExpr, model: &EvidenceModel, domains: &DomainMap, cfg: &SimConfig) -> Result<SimResult> {
    let merged = crate::model::merge_domains(domains, &model.domains);
    run_world(&World::from_model(expr, model, &merged, &BTreeMap::new())?, cfg)
}

/// Smallest value whose cumulative mass reaches `p`.
fn empirical_quantile(points: &[LatencyPoint], p: f64) -> f64 {
    let mut acc = 0.0;
    for pt in points {
        acc += pt.mass;
        if acc >= p - 1e-12 {
            return pt.ms;
        }
    }
    points.last().map(|pt| pt.ms).unwrap_or(0.0)
}

fn quantiles(points: &[LatencyPoint], percentiles: &[f64]) -> Vec<EmpiricalQuantile> {
    if points.is_empty() {
        return Vec::new();
    }
    percentiles
        .iter()
        .map(|&p| EmpiricalQuantile {
            percentile: p,
            ms: empirical_quantile(points, p),
        })
        .collect()
}

#[cfg(test)]
mod tests;
