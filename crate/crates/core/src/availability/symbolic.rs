use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::binomial;
use crate::model::{merge_domains, BoundMode, DomainMap, EvidenceModel, JourneyExpr, NodePath};
use crate::plan::{LatencyBasis, NodeKind, Plan};
use crate::scalar::Scalar;

use super::endpoint;

/// Widest KofN whose success polynomial is expanded.
pub const MAX_KOFN_EXPANSION: usize = 8;

/// Arithmetic over leaf availability symbols.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SymExpr {
    Const(f64),
    Leaf(String),
    Add(Vec<SymExpr>),
    Sub(Box<SymExpr>, Box<SymExpr>),
    Mul(Vec<SymExpr>),
    Min(Vec<SymExpr>),
    Max(Vec<SymExpr>),
}

impl SymExpr {
    pub(crate) fn one_minus(x: SymExpr) -> SymExpr {
        SymExpr::Sub(Box::new(SymExpr::Const(1.0)), Box::new(x))
    }

    fn product(mut terms: Vec<SymExpr>) -> SymExpr {
        if terms.len() == 1 {
            terms.pop().expect("one term")
        } else {
            SymExpr::Mul(terms)
        }
    }

    /// `1 - prod(1 - x_i)`, or the lone term itself.
    fn any_of(mut terms: Vec<SymExpr>) -> SymExpr {
        if terms.len() == 1 {
            return terms.pop().expect("one term");
        }
        SymExpr::one_minus(SymExpr::Mul(terms.into_iter().map(SymExpr::one_minus).collect()))
    }

    pub fn eval(&self, leaf: &dyn Fn(&str) -> f64) -> f64 {
        match self {
            SymExpr::Const(c) => *c,
            SymExpr::Leaf(name) => leaf(name),
            SymExpr::Add(xs) => xs.iter().map(|x| x.eval(leaf)).sum(),
            SymExpr::Sub(a, b) => a.eval(leaf) - b.eval(leaf),
            SymExpr::Mul(xs) => xs.iter().fold(1.0, |acc, x| acc * x.eval(leaf)),
            SymExpr::Min(xs) => xs.iter().map(|x| x.eval(leaf)).fold(f64::INFINITY, f64::min),
            SymExpr::Max(xs) => xs.iter().map(|x| x.eval(leaf)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn leaves(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            SymExpr::Const(_) => {}
            SymExpr::Leaf(name) => {
                out.insert(name);
            }
            SymExpr::Sub(a, b) => {
                a.collect_leaves(out);
                b.collect_leaves(out);
            }
            SymExpr::Add(xs) | SymExpr::Mul(xs) | SymExpr::Min(xs) | SymExpr::Max(xs) => {
                xs.iter().for_each(|x| x.collect_leaves(out))
            }
        }
    }

    /// Renders as a query expression. `min`/`max` become pairwise
    /// comparison-filter unions since the query language has no elementwise
    /// binary min/max; constants inside them are wrapped by `vector`.
    pub fn render(&self, leaf: &mut dyn FnMut(&str) -> String, number: &dyn Fn(f64) -> String) -> String {
        match self {
            SymExpr::Const(c) => number(*c),
            SymExpr::Leaf(name) => leaf(name),
            SymExpr::Add(xs) => join(xs, " + ", leaf, number),
            SymExpr::Sub(a, b) => format!("({} - {})", a.render(leaf, number), b.render(leaf, number)),
            SymExpr::Mul(xs) => join(xs, " * ", leaf, number),
            SymExpr::Min(xs) | SymExpr::Max(xs) => {
                let op = if matches!(self, SymExpr::Min(_)) { "<=" } else { ">=" };
                let mut parts = xs.iter().map(|x| match x {
                    SymExpr::Const(c) => format!("vector({})", number(*c)),
                    other => other.render(leaf, number),
                });
                let first = parts.next().unwrap_or_default();
                parts.fold(first, |acc, next| format!("((({acc}) {op} ({next})) or ({next}))"))
            }
        }
    }
}

fn join(
    xs: &[SymExpr],
    sep: &str,
    leaf: &mut dyn FnMut(&str) -> String,
    number: &dyn Fn(f64) -> String,
) -> String {
    let parts: Vec<String> = xs.iter().map(|x| x.render(leaf, number)).collect();
    format!("({})", parts.join(sep))
}

/// A subtree replaced by its compile-time value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolicFlag {
    pub path: NodePath,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Symbolic {
    pub mode: BoundMode,
    pub expr: SymExpr,
    pub flags: Vec<SymbolicFlag>,
}

struct Builder<'a, S> {
    plan: &'a Plan<S>,
    avail: Vec<S>,
    probs: Vec<S>,
    basis: LatencyBasis,
    /// Coupled marginals, pessimistic only.
    node_value: Vec<S>,
    q: Vec<S>,
    flags: Vec<SymbolicFlag>,
}

impl<S: Scalar> Builder<'_, S> {
    fn lit(v: S) -> SymExpr {
        SymExpr::Const(v.to_f64_lossy())
    }

    fn children(&self, idx: usize) -> Vec<usize> {
        self.plan.nodes[idx].children.clone()
    }

    fn cond(p: S, t: SymExpr, f: SymExpr) -> SymExpr {
        if p == S::one() {
            t
        } else if p == S::zero() {
            f
        } else {
            SymExpr::Add(vec![
                SymExpr::Mul(vec![Self::lit(p), t]),
                SymExpr::Mul(vec![Self::lit(S::one() - p), f]),
            ])
        }
    }

    fn k_of_n(&self, idx: usize, k: usize, kids: Vec<SymExpr>) -> Result<SymExpr> {
        let n = kids.len();
        if k == 1 {
            return Ok(SymExpr::any_of(kids));
        }
        if k == n {
            return Ok(SymExpr::product(kids));
        }
        if n > MAX_KOFN_EXPANSION {
            return Err(Error::Resource(format!(
                "KofN at {} has {n} children; symbolic expansion supports at most {MAX_KOFN_EXPANSION}",
                self.plan.nodes[idx].path
            )));
        }
        // Pr[at least k] = sum_{j>=k} (-1)^(j-k) C(j-1, k-1) e_j
        let mut terms = Vec::new();
        for j in k..=n {
            let coef: f64 = binomial::<f64>(j - 1, k - 1) * if (j - k) % 2 == 0 { 1.0 } else { -1.0 };
            for subset in subsets(n, j) {
                let mut factors = vec![SymExpr::Const(coef)];
                factors.extend(subset.iter().map(|&i| kids[i].clone()));
                terms.push(SymExpr::Mul(factors));
            }
        }
        Ok(SymExpr::Add(terms))
    }

    /// Form mirroring the independent evaluator.
    fn independent(&mut self, idx: usize) -> Result<SymExpr> {
        let node = &self.plan.nodes[idx];
        Ok(match node.kind {
            NodeKind::Leaf(l) => SymExpr::Leaf(self.plan.leaves[l].name.clone()),
            NodeKind::Series | NodeKind::Parallel => {
                let kids = self.map_children(idx, Self::independent)?;
                SymExpr::product(kids)
            }
            NodeKind::Race => SymExpr::any_of(self.map_children(idx, Self::independent)?),
            NodeKind::KofN(k) => {
                let kids = self.map_children(idx, Self::independent)?;
                self.k_of_n(idx, k, kids)?
            }
            NodeKind::Cond(c) => {
                let [t, f] = self.children(idx)[..] else { unreachable!() };
                let (t, f) = (self.independent(t)?, self.independent(f)?);
                Self::cond(self.probs[c], t, f)
            }
            NodeKind::Timeout { t, .. } => {
                let [body, fallback] = self.children(idx)[..] else { unreachable!() };
                let (_, dist) = self.plan.subtree(body, &self.avail, &self.probs, self.basis);
                let within = dist.cdf(t);
                let body = self.independent(body)?;
                let q = if within == S::one() {
                    body
                } else {
                    SymExpr::Mul(vec![Self::lit(within), body])
                };
                let fallback = self.independent(fallback)?;
                timeout_form(q, fallback)
            }
        })
    }

    fn map_children(
        &mut self,
        idx: usize,
        f: fn(&mut Self, usize) -> Result<SymExpr>,
    ) -> Result<Vec<SymExpr>> {
        self.children(idx).into_iter().map(|c| f(self, c)).collect()
    }

    fn constant(&mut self, idx: usize, reason: &str) -> SymExpr {
        self.flags.push(SymbolicFlag {
            path: self.plan.nodes[idx].path.clone(),
            reason: reason.to_string(),
        });
        Self::lit(self.node_value[idx])
    }

    /// Form mirroring the comonotone evaluator: min/max collapse where the
    /// structure allows it, compile-time constants elsewhere.
    fn coupled(&mut self, idx: usize) -> Result<SymExpr> {
        let node = &self.plan.nodes[idx];
        if node.footprint.is_empty() {
            return self.independent(idx);
        }
        Ok(match node.kind {
            NodeKind::Leaf(l) => SymExpr::Leaf(self.plan.leaves[l].name.clone()),
            NodeKind::Cond(c) => {
                let [t, f] = self.children(idx)[..] else { unreachable!() };
                let (t, f) = (self.coupled(t)?, self.coupled(f)?);
                Self::cond(self.probs[c], t, f)
            }
            NodeKind::Series | NodeKind::Parallel | NodeKind::Race => {
                let race = matches!(node.kind, NodeKind::Race);
                match self.grouped(idx)? {
                    Some((groups, units)) => {
                        let mut terms: Vec<SymExpr> = groups
                            .into_iter()
                            .map(|g| {
                                let leaves: Vec<SymExpr> = g.into_iter().map(SymExpr::Leaf).collect();
                                match (leaves.len(), race) {
                                    (1, _) => leaves.into_iter().next().expect("one member"),
                                    (_, true) => SymExpr::Max(leaves),
                                    (_, false) => SymExpr::Min(leaves),
                                }
                            })
                            .collect();
                        terms.extend(units);
                        if race {
                            SymExpr::any_of(terms)
                        } else {
                            SymExpr::product(terms)
                        }
                    }
                    None => self.constant(idx, "children share a failure domain in a mixed structure"),
                }
            }
            NodeKind::KofN(k) => {
                let kids = self.children(idx);
                let fps: Vec<&Vec<usize>> = kids.iter().map(|&c| &self.plan.nodes[c].footprint).collect();
                let single_domain_leaves = kids
                    .iter()
                    .all(|&c| matches!(self.plan.nodes[c].kind, NodeKind::Leaf(_)))
                    && fps.iter().all(|f| f.len() == 1 && f[0] == fps[0][0]);
                if pairwise_disjoint(&fps) {
                    let syms = self.map_children(idx, Self::coupled)?;
                    self.k_of_n(idx, k, syms)?
                } else if single_domain_leaves && kids.len() <= MAX_KOFN_EXPANSION {
                    // k-th largest member: max over k-subsets of their min
                    let names: Vec<SymExpr> = kids
                        .iter()
                        .map(|&c| match self.plan.nodes[c].kind {
                            NodeKind::Leaf(l) => SymExpr::Leaf(self.plan.leaves[l].name.clone()),
                            _ => unreachable!(),
                        })
                        .collect();
                    let options: Vec<SymExpr> = subsets(kids.len(), k)
                        .into_iter()
                        .map(|s| SymExpr::Min(s.into_iter().map(|i| names[i].clone()).collect()))
                        .collect();
                    if options.len() == 1 {
                        options.into_iter().next().expect("one subset")
                    } else {
                        SymExpr::Max(options)
                    }
                } else {
                    self.constant(idx, "KofN children share a failure domain in a mixed structure")
                }
            }
            NodeKind::Timeout { slot, .. } => {
                let [body, fallback] = self.children(idx)[..] else { unreachable!() };
                let disjoint = pairwise_disjoint(&[
                    &self.plan.nodes[body].footprint,
                    &self.plan.nodes[fallback].footprint,
                ]);
                if !disjoint {
                    return Ok(self.constant(idx, "timeout body and fallback share a failure domain"));
                }
                let q = if self.plan.nodes[body].footprint.is_empty() {
                    match self.independent(idx)? {
                        // reuse the independent timeout's q term
                        SymExpr::Add(mut parts) => parts.remove(0),
                        _ => unreachable!("timeout form is a sum"),
                    }
                } else {
                    // the on-time share of body successes is held at its
                    // compile-time value, as in the independent form
                    let a_body = self.node_value[body];
                    let body_form = self.coupled(body)?;
                    if a_body > S::zero() {
                        let share = self.q[slot] / a_body;
                        if share == S::one() {
                            body_form
                        } else {
                            SymExpr::Mul(vec![Self::lit(share), body_form])
                        }
                    } else {
                        Self::lit(self.q[slot])
                    }
                };
                let fallback = self.coupled(fallback)?;
                timeout_form(q, fallback)
            }
        })
    }

    /// Splits children into per-domain leaf groups and independent units;
    /// `None` when some units share a domain with anything else.
    #[allow(clippy::type_complexity)]
    fn grouped(&mut self, idx: usize) -> Result<Option<(Vec<Vec<String>>, Vec<SymExpr>)>> {
        let mut groups: Vec<(usize, Vec<String>)> = Vec::new();
        let mut unit_nodes = Vec::new();
        for c in self.children(idx) {
            let node = &self.plan.nodes[c];
            match node.kind {
                NodeKind::Leaf(l) if !node.footprint.is_empty() => {
                    let d = node.footprint[0];
                    let name = self.plan.leaves[l].name.clone();
                    match groups.iter_mut().find(|g| g.0 == d) {
                        Some(g) => g.1.push(name),
                        None => groups.push((d, vec![name])),
                    }
                }
                _ => unit_nodes.push(c),
            }
        }
        let group_domains: Vec<usize> = groups.iter().map(|g| g.0).collect();
        let mut fps: Vec<&Vec<usize>> = unit_nodes.iter().map(|&c| &self.plan.nodes[c].footprint).collect();
        fps.push(&group_domains);
        if !pairwise_disjoint(&fps) {
            return Ok(None);
        }
        let units = unit_nodes
            .into_iter()
            .map(|c| self.coupled(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some((groups.into_iter().map(|g| g.1).collect(), units)))
    }
}

/// `q + (1 - q) * fallback`.
fn timeout_form(q: SymExpr, fallback: SymExpr) -> SymExpr {
    SymExpr::Add(vec![q.clone(), SymExpr::Mul(vec![SymExpr::one_minus(q), fallback])])
}

fn pairwise_disjoint(sets: &[&Vec<usize>]) -> bool {
    let mut seen = BTreeSet::new();
    sets.iter().all(|s| s.iter().all(|d| seen.insert(*d)))
}

/// Index subsets of size `k` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            if n - i < k - current.len() {
                break;
            }
            current.push(i);
            go(i + 1, n, k, current, out);
            current.pop();
        }
    }
    go(0, n, k, &mut current, &mut out);
    out
}

/// Symbolic availability mirroring the evaluator for `mode`, with branch
/// probabilities and timeout deadlines folded in as constants taken from
/// that endpoint's evaluation.
pub fn plan_symbolic<S: Scalar>(plan: &Plan<S>, mode: BoundMode) -> Result<Symbolic> {
    let ep = endpoint(plan, mode)?;
    let basis = match mode {
        BoundMode::Optimistic => LatencyBasis::Point,
        BoundMode::Pessimistic => LatencyBasis::Conservative,
    };
    let mut builder = Builder {
        plan,
        avail: plan.availabilities(),
        probs: ep.probs,
        basis,
        node_value: ep.node_availability,
        q: ep.q,
        flags: Vec::new(),
    };
    let expr = match mode {
        BoundMode::Optimistic => builder.independent(0)?,
        BoundMode::Pessimistic => builder.coupled(0)?,
    };
    Ok(Symbolic {
        mode,
        expr,
        flags: builder.flags,
    })
}

pub fn symbolic_availability(
    expr: &JourneyExpr,
    model: &EvidenceModel,
    domains: &DomainMap,
    mode: BoundMode,
) -> Result<Symbolic> {
    let plan = Plan::<f64>::build(expr, model, &merge_domains(domains, &model.domains))?;
    plan_symbolic(&plan, mode)
}
