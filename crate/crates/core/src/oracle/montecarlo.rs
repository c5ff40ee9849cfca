use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{quantiles, LatencyPoint, Node, SimConfig, SimResult, TimeoutRate, World};

/// Trials per work item. Fixed so the partition never depends on the
/// number of workers.
const CHUNK: u64 = 16_384;

#[derive(Default)]
struct Tally {
    successes: u64,
    on_time: Vec<u64>,
    latencies: Vec<f64>,
}

/// Everything one trial draws, in a fixed order.
struct Draws {
    success: Vec<bool>,
    latency: Vec<f64>,
    branch: Vec<bool>,
}

struct Trial<'a> {
    draws: &'a Draws,
    on_time: &'a mut [u64],
}

impl Trial<'_> {
    /// `(succeeded, latency)`; latency is meaningless on failure.
    fn eval(&mut self, node: &Node) -> (bool, f64) {
        match node {
            Node::Leaf(i) => (self.draws.success[*i], self.draws.latency[*i]),
            Node::Series(cs) => {
                let mut ok = true;
                let mut total = 0.0;
                for c in cs {
                    let (s, l) = self.eval(c);
                    ok &= s;
                    total += l;
                }
                (ok, total)
            }
            Node::Parallel(cs) => {
                let mut ok = true;
                let mut slowest: f64 = 0.0;
                for c in cs {
                    let (s, l) = self.eval(c);
                    ok &= s;
                    slowest = slowest.max(l);
                }
                (ok, slowest)
            }
            Node::Cond { cond, if_true, if_false } => {
                // both branches run so nested timeouts are counted every trial
                let t = self.eval(if_true);
                let f = self.eval(if_false);
                if self.draws.branch[*cond] {
                    t
                } else {
                    f
                }
            }
            Node::Race(cs) => self.k_th(1, cs),
            Node::KofN { k, children } => self.k_th(*k, children),
            Node::Timeout { t, slot, body, fallback } => {
                let (bs, bl) = self.eval(body);
                let (fs, fl) = self.eval(fallback);
                if bs && bl <= *t {
                    self.on_time[*slot] += 1;
                    (true, bl)
                } else {
                    (fs, t + fl)
                }
            }
        }
    }

    /// Succeeds when at least `k` children do; latency is the `k`-th
    /// smallest among the successful ones.
    fn k_th(&mut self, k: usize, children: &[Node]) -> (bool, f64) {
        let mut ok: Vec<f64> = Vec::with_capacity(children.len());
        for c in children {
            let (s, l) = self.eval(c);
            if s {
                ok.push(l);
            }
        }
        if ok.len() < k {
            return (false, 0.0);
        }
        ok.sort_by(f64::total_cmp);
        (true, ok[k - 1])
    }
}

fn draw(world: &World, coupled: &[Vec<usize>], rng: &mut ChaCha8Rng, draws: &mut Draws) {
    let n = world.leaves.len();
    let mut uniform = vec![None; n];
    for members in coupled {
        let u: f64 = rng.gen();
        for &m in members {
            uniform[m] = Some(u);
        }
    }
    for i in 0..n {
        let u = match uniform[i] {
            Some(u) => u,
            None => rng.gen(),
        };
        // u in [0, 1): success iff u < A, i.e. with probability A
        draws.success[i] = u < world.leaves[i].availability;
    }
    for (i, leaf) in world.leaves.iter().enumerate() {
        let u: f64 = rng.gen();
        let idx = leaf.cumulative.partition_point(|&c| c <= u).min(leaf.values.len() - 1);
        draws.latency[i] = leaf.values[idx];
    }
    for (i, &p) in world.conds.iter().enumerate() {
        let u: f64 = rng.gen();
        draws.branch[i] = u < p;
    }
}

fn run_chunk(world: &World, cfg: &SimConfig, start: u64, end: u64) -> Tally {
    let coupled = world.coupled(cfg.coupling);
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tally = Tally {
        on_time: vec![0; world.timeouts.len()],
        ..Tally::default()
    };
    let mut draws = Draws {
        success: vec![false; world.leaves.len()],
        latency: vec![0.0; world.leaves.len()],
        branch: vec![false; world.conds.len()],
    };
    for trial in start..end {
        let mut rng = base.clone();
        rng.set_stream(trial);
        draw(world, coupled, &mut rng, &mut draws);
        let mut t = Trial {
            draws: &draws,
            on_time: &mut tally.on_time,
        };
        let (ok, latency) = t.eval(&world.root);
        if ok {
            tally.successes += 1;
            tally.latencies.push(latency);
        }
    }
    tally
}

pub(super) fn run(world: &World, cfg: &SimConfig) -> Result<SimResult> {
    let chunks: Vec<(u64, u64)> = (0..cfg.trials.div_ceil(CHUNK))
        .map(|i| (i * CHUNK, ((i + 1) * CHUNK).min(cfg.trials)))
        .collect();
    let work = || -> Vec<Tally> {
        chunks
            .par_iter()
            .map(|&(s, e)| run_chunk(world, cfg, s, e))
            .collect()
    };
    let tallies = if cfg.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?
            .install(work)
    };
    let mut successes = 0u64;
    let mut on_time = vec![0u64; world.timeouts.len()];
    let mut latencies = Vec::new();
    for t in tallies {
        successes += t.successes;
        for (acc, v) in on_time.iter_mut().zip(t.on_time) {
            *acc += v;
        }
        latencies.extend(t.latencies);
    }
    latencies.sort_by(f64::total_cmp);
    let mut latency: Vec<LatencyPoint> = Vec::new();
    let mut i = 0;
    while i < latencies.len() {
        let v = latencies[i];
        let j = latencies[i..].partition_point(|&x| x == v) + i;
        latency.push(LatencyPoint {
            ms: v,
            mass: (j - i) as f64 / successes as f64,
        });
        i = j;
    }
    let n = cfg.trials as f64;
    let a = successes as f64 / n;
    Ok(SimResult {
        mode: cfg.mode,
        coupling: cfg.coupling,
        trials: cfg.trials,
        seed: Some(cfg.seed),
        availability: a,
        standard_error: (a * (1.0 - a) / n).sqrt(),
        quantiles: quantiles(&latency, &cfg.percentiles),
        latency,
        timeouts: world
            .timeouts
            .iter()
            .zip(on_time)
            .map(|(path, hits)| TimeoutRate {
                path: path.clone(),
                q: hits as f64 / n,
            })
            .collect(),
    })
}
