use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{quantiles, LatencyPoint, Node, SimConfig, SimResult, TimeoutRate, World, ENUMERATION_LIMIT};

/// Outcome distribution of a subtree: failure mass and success mass per
/// latency. Latencies are nonnegative, so their bit patterns sort like the
/// values themselves.
#[derive(Debug, Clone, Default)]
struct Outcomes {
    fail: f64,
    ok: BTreeMap<u64, f64>,
}

impl Outcomes {
    fn ok_mass(&self) -> f64 {
        self.ok.values().sum()
    }

    fn add(&mut self, latency: f64, mass: f64) {
        if mass > 0.0 {
            *self.ok.entry(latency.to_bits()).or_insert(0.0) += mass;
        }
    }

    fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ok.iter().map(|(&bits, &m)| (f64::from_bits(bits), m))
    }
}

struct Pass<'a> {
    world: &'a World,
    /// Success probability of each leaf in this domain pattern.
    success: Vec<f64>,
    on_time: Vec<f64>,
}

impl Pass<'_> {
    fn eval(&mut self, node: &Node) -> Outcomes {
        match node {
            Node::Leaf(i) => {
                let leaf = &self.world.leaves[*i];
                let s = self.success[*i];
                let mut out = Outcomes {
                    fail: 1.0 - s,
                    ..Outcomes::default()
                };
                for (&v, &m) in leaf.values.iter().zip(&leaf.masses) {
                    out.add(v, s * m);
                }
                out
            }
            Node::Series(cs) => self.all_of(cs, |a, b| a + b),
            Node::Parallel(cs) => self.all_of(cs, f64::max),
            Node::Race(cs) => self.at_least(1, cs),
            Node::KofN { k, children } => self.at_least(*k, children),
            Node::Cond { cond, if_true, if_false } => {
                let p = self.world.conds[*cond];
                let t = self.eval(if_true);
                let f = self.eval(if_false);
                let mut out = Outcomes {
                    fail: p * t.fail + (1.0 - p) * f.fail,
                    ..Outcomes::default()
                };
                for (v, m) in t.pairs() {
                    out.add(v, p * m);
                }
                for (v, m) in f.pairs() {
                    out.add(v, (1.0 - p) * m);
                }
                out
            }
            Node::Timeout { t, slot, body, fallback } => {
                let b = self.eval(body);
                let f = self.eval(fallback);
                let mut out = Outcomes::default();
                let mut on_time = 0.0;
                for (v, m) in b.pairs() {
                    if v <= *t {
                        on_time += m;
                        out.add(v, m);
                    }
                }
                self.on_time[*slot] = on_time;
                let late = 1.0 - on_time;
                out.fail = late * f.fail;
                for (v, m) in f.pairs() {
                    out.add(t + v, late * m);
                }
                out
            }
        }
    }

    /// Every child must succeed; latencies combine with `join`.
    fn all_of(&mut self, children: &[Node], join: fn(f64, f64) -> f64) -> Outcomes {
        let mut acc = self.eval(&children[0]);
        for c in &children[1..] {
            let next = self.eval(c);
            let mut out = Outcomes {
                fail: acc.fail + acc.ok_mass() * next.fail,
                ..Outcomes::default()
            };
            for (va, ma) in acc.pairs() {
                for (vb, mb) in next.pairs() {
                    out.add(join(va, vb), ma * mb);
                }
            }
            acc = out;
        }
        acc
    }

    /// Tracks the `k` smallest successful latencies seen so far; the subtree
    /// succeeds once `k` are present, finishing at the largest of them.
    fn at_least(&mut self, k: usize, children: &[Node]) -> Outcomes {
        let mut states: BTreeMap<Vec<u64>, f64> = BTreeMap::from([(Vec::new(), 1.0)]);
        for c in children {
            let child = self.eval(c);
            let mut next: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
            for (state, &m) in &states {
                if child.fail > 0.0 {
                    *next.entry(state.clone()).or_insert(0.0) += m * child.fail;
                }
                for (v, mv) in child.pairs() {
                    let mut s: Vec<f64> = state.iter().map(|&b| f64::from_bits(b)).collect();
                    s.push(v);
                    s.sort_by(f64::total_cmp);
                    s.truncate(k);
                    let key = s.into_iter().map(f64::to_bits).collect();
                    *next.entry(key).or_insert(0.0) += m * mv;
                }
            }
            states = next;
        }
        let mut out = Outcomes::default();
        for (state, m) in states {
            if state.len() == k {
                out.add(f64::from_bits(state[k - 1]), m);
            } else {
                out.fail += m;
            }
        }
        out
    }
}

fn count_outcomes(world: &World, coupled: &[Vec<usize>]) -> u128 {
    let patterns: u128 = coupled.iter().map(|d| d.len() as u128 + 1).product();
    let leaves: u128 = world.leaves.iter().map(|l| l.values.len() as u128 + 1).product();
    patterns
        .saturating_mul(leaves)
        .saturating_mul(1u128 << world.conds.len().min(64))
}

pub(super) fn run(world: &World, cfg: &SimConfig) -> Result<SimResult> {
    let coupled = world.coupled(cfg.coupling);
    let outcomes = count_outcomes(world, coupled);
    if outcomes > ENUMERATION_LIMIT {
        return Err(Error::Resource(format!(
            "{outcomes} joint outcomes exceed the enumeration limit of {ENUMERATION_LIMIT}; use Monte Carlo"
        )));
    }
    // one latent uniform per coupled domain: with members sorted by
    // availability, the uniform's position picks how many succeed
    let sorted: Vec<Vec<(usize, f64)>> = coupled
        .iter()
        .map(|d| {
            let mut m: Vec<(usize, f64)> = d.iter().map(|&i| (i, world.leaves[i].availability)).collect();
            m.sort_by(|a, b| b.1.total_cmp(&a.1));
            m
        })
        .collect();
    let mut availability = 0.0;
    let mut q = vec![0.0; world.timeouts.len()];
    let mut ok = Outcomes::default();
    let mut choice = vec![0usize; sorted.len()];
    loop {
        let mut weight = 1.0;
        let mut success: Vec<f64> = world.leaves.iter().map(|l| l.availability).collect();
        for (members, &j) in sorted.iter().zip(&choice) {
            let upper = if j == 0 { 1.0 } else { members[j - 1].1 };
            let lower = if j == members.len() { 0.0 } else { members[j].1 };
            weight *= upper - lower;
            for (rank, &(leaf, _)) in members.iter().enumerate() {
                success[leaf] = if rank < j { 1.0 } else { 0.0 };
            }
        }
        if weight > 0.0 {
            let mut pass = Pass {
                world,
                success,
                on_time: vec![0.0; world.timeouts.len()],
            };
            let out = pass.eval(&world.root);
            for (acc, v) in q.iter_mut().zip(&pass.on_time) {
                *acc += weight * v;
            }
            for (v, m) in out.pairs() {
                availability += weight * m;
                ok.add(v, weight * m);
            }
        }
        let mut pos = 0;
        loop {
            if pos == choice.len() {
                return Ok(finish(world, cfg, outcomes, availability, q, ok));
            }
            choice[pos] += 1;
            if choice[pos] <= sorted[pos].len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

fn finish(world: &World, cfg: &SimConfig, outcomes: u128, availability: f64, q: Vec<f64>, ok: Outcomes) -> SimResult {
    let latency: Vec<LatencyPoint> = ok
        .pairs()
        .filter(|_| availability > 0.0)
        .map(|(ms, m)| LatencyPoint {
            ms,
            mass: m / availability,
        })
        .collect();
    SimResult {
        mode: cfg.mode,
        coupling: cfg.coupling,
        trials: outcomes.min(u64::MAX as u128) as u64,
        seed: None,
        availability,
        standard_error: 0.0,
        quantiles: quantiles(&latency, &cfg.percentiles),
        latency,
        timeouts: world
            .timeouts
            .iter()
            .zip(q)
            .map(|(path, q)| TimeoutRate { path: path.clone(), q })
            .collect(),
    }
}
