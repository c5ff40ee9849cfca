//! Random journey instances for the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use emac_core::latency::DiscreteDist;
use emac_core::model::{DomainMap, JourneyExpr, ProbEstimate, ProbRef};
use emac_core::oracle::World;
use emac_core::plan::{LeafInput, Plan};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Series,
    Parallel,
    Cond,
    Race,
    KofN,
    Timeout,
}

pub const ALL_OPS: [Op; 6] = [Op::Series, Op::Parallel, Op::Cond, Op::Race, Op::KofN, Op::Timeout];

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_leaves: usize,
    pub max_depth: usize,
    pub ops: Vec<Op>,
    pub max_support: usize,
    /// Every leaf below a KofN is perfectly available.
    pub perfect_under_kofn: bool,
    /// Conservative latency differs from point latency (histogram-like).
    pub distinct_conservative: bool,
    /// Branch probabilities sometimes carry an interval.
    pub interval_probs: bool,
    /// Attach evidence sample counts to leaf latency.
    pub samples: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_leaves: 8,
            max_depth: 4,
            ops: ALL_OPS.to_vec(),
            max_support: 6,
            perfect_under_kofn: false,
            distinct_conservative: false,
            interval_probs: true,
            samples: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub expr: JourneyExpr,
    pub leaves: BTreeMap<String, LeafInput<f64>>,
    pub probs: BTreeMap<String, ProbEstimate>,
    pub domains: DomainMap,
}

impl Instance {
    pub fn plan(&self) -> Plan<f64> {
        Plan::from_inputs(&self.expr, &self.leaves, &self.probs, &self.domains).expect("instance binds")
    }

    /// Simulator world with point latency and the given probability per
    /// conditional (plan order).
    pub fn world(&self, plan: &Plan<f64>, probs: &[f64]) -> World {
        let leaves = self
            .leaves
            .iter()
            .map(|(n, l)| (n.clone(), (l.availability, l.point.clone())))
            .collect();
        let chosen = plan.conds.iter().zip(probs).map(|(c, &p)| (c.label.clone(), p)).collect();
        World::new(&self.expr, &leaves, &chosen, &self.domains).expect("world binds")
    }
}

struct Gen<'a, R> {
    rng: &'a mut R,
    cfg: &'a GenConfig,
    next_leaf: usize,
    next_prob: usize,
    leaves: BTreeMap<String, LeafInput<f64>>,
    probs: BTreeMap<String, ProbEstimate>,
}

impl<R: Rng> Gen<'_, R> {
    fn availability(&mut self, perfect: bool) -> f64 {
        if perfect {
            return 1.0;
        }
        match self.rng.gen_range(0..10) {
            0 => 1.0,
            1 => 0.0 + self.rng.gen_range(0.0..0.5),
            _ => self.rng.gen_range(0.5..1.0),
        }
    }

    fn latency(&mut self) -> (DiscreteDist<f64>, DiscreteDist<f64>) {
        let n = self.rng.gen_range(1..=self.cfg.max_support);
        let mut edges: Vec<u32> = (1..=60).collect();
        edges.shuffle(self.rng);
        let mut edges: Vec<f64> = edges[..n].iter().map(|&e| e as f64 * 10.0).collect();
        edges.sort_by(f64::total_cmp);
        let weights: Vec<f64> = (0..n).map(|_| self.rng.gen_range(1..10) as f64).collect();
        let total: f64 = weights.iter().sum();
        let masses: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let samples = self.cfg.samples.then(|| self.rng.gen_range(200..20_000));
        let point = if self.cfg.distinct_conservative {
            // bucket midpoints
            let mut prev = 0.0;
            edges
                .iter()
                .zip(&masses)
                .map(|(&e, &m)| {
                    let mid = (prev + e) / 2.0;
                    prev = e;
                    (mid, m)
                })
                .collect()
        } else {
            edges.iter().copied().zip(masses.iter().copied()).collect()
        };
        let cons = edges.into_iter().zip(masses).collect();
        (
            DiscreteDist::from_points(point).with_samples(samples),
            DiscreteDist::from_points(cons).with_samples(samples),
        )
    }

    fn leaf(&mut self, perfect: bool) -> JourneyExpr {
        let name = format!("L{}", self.next_leaf);
        self.next_leaf += 1;
        let availability = self.availability(perfect);
        let (point, conservative) = self.latency();
        self.leaves.insert(
            name.clone(),
            LeafInput {
                availability,
                point,
                conservative,
            },
        );
        JourneyExpr::Leaf(name)
    }

    fn prob(&mut self) -> ProbRef {
        let value: f64 = self.rng.gen_range(0.05..0.95);
        if self.rng.gen_bool(0.3) {
            return ProbRef::Literal((value * 100.0).round() / 100.0);
        }
        let name = format!("p{}", self.next_prob);
        self.next_prob += 1;
        let est = if self.cfg.interval_probs && self.rng.gen_bool(0.6) {
            let lo = value * self.rng.gen_range(0.5..1.0);
            let hi = value + (1.0 - value) * self.rng.gen_range(0.0..0.5);
            ProbEstimate {
                value,
                lo: Some(lo),
                hi: Some(hi),
                samples: None,
            }
        } else {
            ProbEstimate::exact(value)
        };
        self.probs.insert(name.clone(), est);
        ProbRef::Named(name)
    }

    fn node(&mut self, depth: usize, budget: usize, perfect: bool) -> JourneyExpr {
        if depth >= self.cfg.max_depth || budget < 2 || (depth > 1 && self.rng.gen_bool(0.15)) {
            return self.leaf(perfect);
        }
        let op = *self.cfg.ops.choose(self.rng).expect("some operator");
        let arity = match op {
            Op::Cond | Op::Timeout => 2,
            _ => self.rng.gen_range(2..=budget.min(4)),
        };
        // split the leaf budget so each child gets at least one
        let mut shares = vec![1usize; arity];
        for _ in 0..budget - arity {
            if self.rng.gen_bool(0.8) {
                let i = self.rng.gen_range(0..arity);
                shares[i] += 1;
            }
        }
        let under_kofn = perfect || (op == Op::KofN && self.cfg.perfect_under_kofn);
        let children: Vec<JourneyExpr> = shares.iter().map(|&s| self.node(depth + 1, s, under_kofn)).collect();
        let mut it = children.into_iter();
        match op {
            Op::Series => JourneyExpr::Series(it.collect()),
            Op::Parallel => JourneyExpr::Parallel(it.collect()),
            Op::Race => JourneyExpr::Race(it.collect()),
            Op::KofN => {
                let c: Vec<JourneyExpr> = it.collect();
                let k = self.rng.gen_range(1..=c.len());
                JourneyExpr::KofN { k, children: c }
            }
            Op::Cond => {
                let p = self.prob();
                JourneyExpr::Cond {
                    p,
                    if_true: Box::new(it.next().unwrap()),
                    if_false: Box::new(it.next().unwrap()),
                }
            }
            Op::Timeout => JourneyExpr::Timeout {
                t_ms: self.rng.gen_range(1..=40) * 15,
                body: Box::new(it.next().unwrap()),
                fallback: Box::new(it.next().unwrap()),
            },
        }
    }
}

/// Random partition of `names` into domains; roughly half the leaves end up
/// in a multi-member domain.
pub fn random_domains<R: Rng>(rng: &mut R, names: &[String]) -> DomainMap {
    let mut shuffled = names.to_vec();
    shuffled.shuffle(rng);
    let mut map = DomainMap::new();
    let mut i = 0;
    let mut d = 0;
    while i < shuffled.len() {
        let size = rng.gen_range(1..=3).min(shuffled.len() - i);
        map.insert(format!("d{d}"), shuffled[i..i + size].iter().cloned());
        i += size;
        d += 1;
    }
    map
}

pub fn random_instance<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Instance {
    let mut gen = Gen {
        rng,
        cfg,
        next_leaf: 0,
        next_prob: 0,
        leaves: BTreeMap::new(),
        probs: BTreeMap::new(),
    };
    let budget = gen.rng.gen_range(cfg.max_leaves.min(2)..=cfg.max_leaves);
    let expr = gen.node(1, budget, false);
    let names: Vec<String> = gen.leaves.keys().cloned().collect();
    let (leaves, probs) = (gen.leaves, gen.probs);
    let domains = random_domains(rng, &names);
    Instance {
        expr,
        leaves,
        probs,
        domains,
    }
}

/// Masses on the union of supports agree within `tol` and supports match.
pub fn same_dist(a: &DiscreteDist<f64>, b: &DiscreteDist<f64>, tol: f64) -> bool {
    let mut keys: Vec<f64> = a.support().iter().chain(b.support()).map(|p| p.0).collect();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    let mass = |d: &DiscreteDist<f64>, x: f64| d.support().iter().find(|p| p.0 == x).map(|p| p.1).unwrap_or(0.0);
    keys.into_iter().all(|x| (mass(a, x) - mass(b, x)).abs() <= tol)
}
