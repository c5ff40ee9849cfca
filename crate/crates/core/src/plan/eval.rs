use std::str::FromStr;

use crate::error::{Error, Result};
use crate::latency::{
    convolve, max_indep, mixture, order_statistic_given_success, shift, truncate_renorm, DiscreteDist,
};
use crate::math::poisson_binomial_at_least;
use crate::scalar::Scalar;

use super::{NodeKind, Plan};

/// Largest number of joint domain patterns enumerated exactly.
pub const PATTERN_LIMIT: u64 = 1_000_000;

/// Which leaf latency distributions an evaluation reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatencyBasis {
    Point,
    Conservative,
}

/// How leaves in the same failure domain relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Independent,
    /// One latent uniform per domain drives all of its members.
    Comonotone,
}

impl FromStr for Coupling {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "independent" => Ok(Coupling::Independent),
            "comonotone" => Ok(Coupling::Comonotone),
            other => Err(format!("unknown coupling `{other}` (expected independent or comonotone)")),
        }
    }
}

/// Success probability plus the success-conditioned latency, when asked for.
struct Outcome<S> {
    a: S,
    dist: Option<DiscreteDist<S>>,
}

/// Result of a full evaluation under one coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupled<S> {
    pub availability: S,
    /// Per timeout slot: probability the body succeeds within its deadline.
    pub q: Vec<S>,
    /// Success-conditioned journey latency, if requested.
    pub latency: Option<DiscreteDist<S>>,
    /// Per node: success probability of its subtree.
    pub node_availability: Vec<S>,
    pub patterns: u64,
}

struct Walk<'a, S> {
    plan: &'a Plan<S>,
    avail: &'a [S],
    probs: &'a [S],
    basis: LatencyBasis,
    q: Vec<S>,
    node_a: Vec<S>,
}

impl<S: Scalar> Walk<'_, S> {
    fn node(&mut self, idx: usize, want_latency: bool) -> Outcome<S> {
        let out = self.node_inner(idx, want_latency);
        self.node_a[idx] = out.a;
        out
    }

    fn node_inner(&mut self, idx: usize, want_latency: bool) -> Outcome<S> {
        let node = &self.plan.nodes[idx];
        match node.kind {
            NodeKind::Leaf(l) => {
                let input = &self.plan.leaves[l].input;
                let dist = want_latency.then(|| match self.basis {
                    LatencyBasis::Point => input.point.clone(),
                    LatencyBasis::Conservative => input.conservative.clone(),
                });
                Outcome {
                    a: self.avail[l],
                    dist,
                }
            }
            NodeKind::Series | NodeKind::Parallel => {
                let kids = self.children(idx, want_latency);
                let a = kids.iter().fold(S::one(), |acc, k| acc * k.a);
                let dist = want_latency.then(|| {
                    let dists: Vec<&DiscreteDist<S>> = kids.iter().filter_map(|k| k.dist.as_ref()).collect();
                    if matches!(node.kind, NodeKind::Series) {
                        let mut acc = dists[0].clone();
                        for d in &dists[1..] {
                            acc = convolve(&acc, d);
                        }
                        acc
                    } else {
                        max_indep(&dists)
                    }
                });
                Outcome { a, dist }
            }
            NodeKind::Race | NodeKind::KofN(_) => {
                let k = match node.kind {
                    NodeKind::KofN(k) => k,
                    _ => 1,
                };
                let kids = self.children(idx, want_latency);
                let avail: Vec<S> = kids.iter().map(|c| c.a).collect();
                let a = if k == 1 {
                    S::one() - avail.iter().fold(S::one(), |acc, &x| acc * (S::one() - x))
                } else {
                    poisson_binomial_at_least(&avail, k)
                };
                let dist = want_latency.then(|| {
                    let dists: Vec<&DiscreteDist<S>> = kids.iter().filter_map(|k| k.dist.as_ref()).collect();
                    order_statistic_given_success(k, &dists, &avail)
                });
                Outcome { a, dist }
            }
            NodeKind::Cond(c) => {
                let p = self.probs[c];
                let t = self.node(node.children[0], want_latency);
                let f = self.node(node.children[1], want_latency);
                let a = p * t.a + (S::one() - p) * f.a;
                let dist = want_latency.then(|| {
                    // weight of the true branch among successes
                    let w = if a > S::zero() { (p * t.a / a).min(S::one()) } else { p };
                    mixture(w, t.dist.as_ref().expect("latency"), f.dist.as_ref().expect("latency"))
                });
                Outcome { a, dist }
            }
            NodeKind::Timeout { t, slot } => {
                let body = self.node(node.children[0], true);
                let body_dist = body.dist.expect("body latency");
                let within = body_dist.cdf(t);
                let q = body.a * within;
                self.q[slot] = q;
                let fb = self.node(node.children[1], want_latency);
                let a = q + (S::one() - q) * fb.a;
                let dist = want_latency.then(|| {
                    let late = shift(fb.dist.as_ref().expect("latency"), t);
                    match truncate_renorm(&body_dist, t) {
                        Ok((on_time, _)) => {
                            let w = if a > S::zero() { (q / a).min(S::one()) } else { within };
                            mixture(w, &on_time, &late)
                        }
                        Err(_) => late,
                    }
                });
                Outcome { a, dist }
            }
        }
    }

    fn children(&mut self, idx: usize, want_latency: bool) -> Vec<Outcome<S>> {
        let kids = self.plan.nodes[idx].children.clone();
        kids.into_iter().map(|c| self.node(c, want_latency)).collect()
    }
}

/// One comonotone domain: members sorted by availability, descending.
struct Group<S> {
    members: Vec<(usize, S)>,
}

impl<S: Scalar> Group<S> {
    /// Probability that exactly the first `j` members succeed.
    fn weight(&self, j: usize) -> S {
        let m = self.members.len();
        let at = |i: usize| self.members[i].1;
        if j == 0 {
            S::one() - at(0)
        } else if j == m {
            at(m - 1)
        } else {
            at(j - 1) - at(j)
        }
    }
}

impl<S: Scalar> Plan<S> {
    fn groups(&self, avail: &[S], coupling: Coupling) -> Vec<Group<S>> {
        if coupling == Coupling::Independent {
            return Vec::new();
        }
        self.domains
            .iter()
            .filter(|d| d.is_coupling())
            .map(|d| {
                let mut members: Vec<(usize, S)> = d.members.iter().map(|&l| (l, avail[l])).collect();
                members.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
                Group { members }
            })
            .collect()
    }

    /// Number of joint patterns a comonotone evaluation enumerates.
    pub fn pattern_count(&self) -> u64 {
        self.domains
            .iter()
            .filter(|d| d.is_coupling())
            .fold(1u64, |acc, d| acc.saturating_mul(d.members.len() as u64 + 1))
    }

    /// Evaluates the journey with leaf availabilities `avail` and branch
    /// probabilities `probs`. Under comonotone coupling every joint pattern of
    /// the coupled domains is enumerated in a fixed order and summed
    /// serially; leaves outside coupled domains stay fractional, which is
    /// exact because they are independent of everything else.
    pub fn evaluate_with(
        &self,
        avail: &[S],
        probs: &[S],
        basis: LatencyBasis,
        coupling: Coupling,
        want_latency: bool,
    ) -> Result<Coupled<S>> {
        let groups = self.groups(avail, coupling);
        let count = groups
            .iter()
            .fold(1u64, |acc, g| acc.saturating_mul(g.members.len() as u64 + 1));
        if count > PATTERN_LIMIT {
            return Err(Error::Resource(format!(
                "{count} failure-domain patterns exceed the limit of {PATTERN_LIMIT}; \
                 split or simplify the largest domains"
            )));
        }
        let mut fixed = avail.to_vec();
        let mut digits = vec![0usize; groups.len()];
        let mut availability = S::zero();
        let mut q = vec![S::zero(); self.timeouts.len()];
        let mut node_availability = vec![S::zero(); self.nodes.len()];
        let mut points: Vec<(S, S)> = Vec::new();
        let mut success_mass = S::zero();
        let mut fallback_points: Vec<(S, S)> = Vec::new();
        let mut samples = Vec::new();
        let mut capped = false;
        loop {
            let mut weight = S::one();
            for (g, &j) in groups.iter().zip(&digits) {
                weight = weight * g.weight(j);
                for (i, &(leaf, _)) in g.members.iter().enumerate() {
                    fixed[leaf] = if i < j { S::one() } else { S::zero() };
                }
            }
            if weight > S::zero() {
                let mut walk = Walk {
                    plan: self,
                    avail: &fixed,
                    probs,
                    basis,
                    q: vec![S::zero(); self.timeouts.len()],
                    node_a: vec![S::zero(); self.nodes.len()],
                };
                let out = walk.node(0, want_latency);
                availability = availability + weight * out.a;
                for (acc, v) in q.iter_mut().zip(walk.q) {
                    *acc = *acc + weight * v;
                }
                for (acc, v) in node_availability.iter_mut().zip(walk.node_a) {
                    *acc = *acc + weight * v;
                }
                if let Some(d) = out.dist {
                    let w = weight * out.a;
                    success_mass = success_mass + w;
                    points.extend(d.support().iter().map(|&(v, m)| (v, m * w)));
                    fallback_points.extend(d.support().iter().map(|&(v, m)| (v, m * weight)));
                    samples.push(d.samples());
                    capped |= d.capped();
                }
            }
            if !advance(&mut digits, &groups) {
                break;
            }
        }
        let latency = want_latency.then(|| {
            let (pts, norm) = if success_mass > S::zero() {
                (points, success_mass)
            } else {
                (fallback_points, S::one())
            };
            let pts = pts.into_iter().map(|(v, m)| (v, m / norm)).collect();
            DiscreteDist::canonical(pts, crate::latency::min_samples(samples), crate::latency::CAPACITY)
                .mark_capped(capped)
        });
        Ok(Coupled {
            availability,
            q,
            latency,
            node_availability,
            patterns: count,
        })
    }
}

impl<S: Scalar> Plan<S> {
    /// Availability and success-conditioned latency of the subtree at
    /// `idx`, all leaves independent.
    pub fn subtree(&self, idx: usize, avail: &[S], probs: &[S], basis: LatencyBasis) -> (S, DiscreteDist<S>) {
        let mut walk = Walk {
            plan: self,
            avail,
            probs,
            basis,
            q: vec![S::zero(); self.timeouts.len()],
            node_a: vec![S::zero(); self.nodes.len()],
        };
        let out = walk.node(idx, true);
        (out.a, out.dist.expect("latency requested"))
    }
}

fn advance<S>(digits: &mut [usize], groups: &[Group<S>]) -> bool {
    for (d, g) in digits.iter_mut().zip(groups) {
        *d += 1;
        if *d <= g.members.len() {
            return true;
        }
        *d = 0;
    }
    false
}
