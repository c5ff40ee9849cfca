use crate::model::LatencyEvidence;
use crate::scalar::Scalar;
use crate::math::poisson_binomial_at_least;

use super::dist::{min_samples, DiscreteDist, CAPACITY};

/// How histogram buckets become support points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HistogramMode {
    /// Bucket midpoint (first bucket: half its upper edge).
    Point,
    /// Bucket upper edge; stochastically dominates `Point`.
    Conservative,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatencyError {
    #[error("latency histogram has no observations")]
    EmptyHistogram,
    #[error("no probability mass within {0}ms")]
    NoMassWithin(f64),
}

pub fn from_histogram<S: Scalar>(ev: &LatencyEvidence, mode: HistogramMode) -> Result<DiscreteDist<S>, LatencyError> {
    let total = ev.buckets.last().map(|b| b.cumulative_count).unwrap_or(0);
    if total == 0 {
        return Err(LatencyError::EmptyHistogram);
    }
    let mut prev_edge = 0.0;
    let mut prev_count = 0;
    let mut points = Vec::with_capacity(ev.buckets.len());
    for b in &ev.buckets {
        let count = b.cumulative_count.saturating_sub(prev_count);
        let at = match mode {
            HistogramMode::Point => (prev_edge + b.upper_edge_ms) / 2.0,
            HistogramMode::Conservative => b.upper_edge_ms,
        };
        points.push((S::lift(at), S::count(count) / S::count(total)));
        prev_edge = b.upper_edge_ms;
        prev_count = b.cumulative_count;
    }
    Ok(DiscreteDist::canonical(points, Some(ev.samples), CAPACITY))
}

/// Distribution of `A + B` for independent `A`, `B`.
pub fn convolve<S: Scalar>(a: &DiscreteDist<S>, b: &DiscreteDist<S>) -> DiscreteDist<S> {
    let mut points = Vec::with_capacity(a.len() * b.len());
    for &(va, ma) in a.support() {
        for &(vb, mb) in b.support() {
            points.push((va + vb, ma * mb));
        }
    }
    DiscreteDist::canonical(points, min_samples([a.samples(), b.samples()]), CAPACITY)
        .mark_capped(a.capped() || b.capped())
}

/// Sorted union of support values.
fn grid<S: Scalar>(dists: &[&DiscreteDist<S>]) -> Vec<S> {
    let mut values: Vec<S> = dists.iter().flat_map(|d| d.support().iter().map(|p| p.0)).collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite latencies"));
    values.dedup();
    values
}

/// CDF of each distribution evaluated at every grid point.
fn cdfs_on_grid<S: Scalar>(dists: &[&DiscreteDist<S>], grid: &[S]) -> Vec<Vec<S>> {
    dists
        .iter()
        .map(|d| {
            let cum = d.cumulative();
            let support = d.support();
            let mut idx = 0;
            grid.iter()
                .map(|&x| {
                    while idx < support.len() && support[idx].0 <= x {
                        idx += 1;
                    }
                    if idx == 0 {
                        S::zero()
                    } else {
                        cum[idx - 1]
                    }
                })
                .collect()
        })
        .collect()
}

/// Differences a CDF sampled on `grid` back into masses; the final CDF value
/// is pinned to one.
fn from_grid_cdf<S: Scalar>(grid: &[S], mut cdf: Vec<S>, dists: &[&DiscreteDist<S>]) -> DiscreteDist<S> {
    if let Some(last) = cdf.last_mut() {
        *last = S::one();
    }
    let mut prev = S::zero();
    let points = grid
        .iter()
        .zip(cdf)
        .map(|(&x, f)| {
            let f = f.max(prev);
            let mass = f - prev;
            prev = f;
            (x, mass)
        })
        .collect();
    DiscreteDist::canonical(points, min_samples(dists.iter().map(|d| d.samples())), CAPACITY)
        .mark_capped(dists.iter().any(|d| d.capped()))
}

/// `max_i L_i` of independent latencies (fan-out join).
pub fn max_indep<S: Scalar>(dists: &[&DiscreteDist<S>]) -> DiscreteDist<S> {
    let grid = grid(dists);
    let cdfs = cdfs_on_grid(dists, &grid);
    let cdf = (0..grid.len())
        .map(|i| cdfs.iter().fold(S::one(), |acc, c| acc * c[i]))
        .collect();
    from_grid_cdf(&grid, cdf, dists)
}

/// `min_i L_i` of independent latencies (hedged alternatives, all succeed).
pub fn min_indep<S: Scalar>(dists: &[&DiscreteDist<S>]) -> DiscreteDist<S> {
    let grid = grid(dists);
    let cdfs = cdfs_on_grid(dists, &grid);
    let cdf = (0..grid.len())
        .map(|i| S::one() - cdfs.iter().fold(S::one(), |acc, c| acc * (S::one() - c[i])))
        .collect();
    from_grid_cdf(&grid, cdf, dists)
}

/// `Mix_p(A, B)`: `A` with probability `p`, else `B`. A side with zero
/// weight does not contribute support or sample counts.
pub fn mixture<S: Scalar>(p: S, a: &DiscreteDist<S>, b: &DiscreteDist<S>) -> DiscreteDist<S> {
    let q = S::one() - p;
    let mut points = Vec::with_capacity(a.len() + b.len());
    let mut samples = Vec::new();
    let mut capped = false;
    if p > S::zero() {
        points.extend(a.support().iter().map(|&(v, m)| (v, m * p)));
        samples.push(a.samples());
        capped |= a.capped();
    }
    if q > S::zero() {
        points.extend(b.support().iter().map(|&(v, m)| (v, m * q)));
        samples.push(b.samples());
        capped |= b.capped();
    }
    DiscreteDist::canonical(points, min_samples(samples), CAPACITY).mark_capped(capped)
}

/// `k`-th smallest of independent latencies, `L_(k:n)`.
pub fn order_statistic<S: Scalar>(k: usize, dists: &[&DiscreteDist<S>]) -> DiscreteDist<S> {
    assert!(k >= 1 && k <= dists.len(), "order statistic needs 1 <= k <= n");
    let grid = grid(dists);
    let cdfs = cdfs_on_grid(dists, &grid);
    let mut probs = vec![S::zero(); dists.len()];
    let cdf = (0..grid.len())
        .map(|i| {
            for (p, c) in probs.iter_mut().zip(&cdfs) {
                *p = c[i];
            }
            poisson_binomial_at_least(&probs, k)
        })
        .collect();
    from_grid_cdf(&grid, cdf, dists)
}

/// `k`-th smallest latency among the children that succeed, conditioned on
/// at least `k` succeeding. Child `i` succeeds with probability
/// `success[i]`, independently of its latency. `Pr[L <= x]` is the chance
/// that `k` children both succeed and finish by `x`, divided by the chance
/// that `k` succeed. With every `success[i] = 1` this is [`order_statistic`];
/// with `k = 1` it is the success-conditioned hedged minimum.
pub fn order_statistic_given_success<S: Scalar>(
    k: usize,
    dists: &[&DiscreteDist<S>],
    success: &[S],
) -> DiscreteDist<S> {
    assert_eq!(dists.len(), success.len());
    let enough = poisson_binomial_at_least(success, k);
    if enough <= S::zero() {
        return order_statistic(k, dists);
    }
    let grid = grid(dists);
    let cdfs = cdfs_on_grid(dists, &grid);
    let mut probs = vec![S::zero(); dists.len()];
    let cdf = (0..grid.len())
        .map(|i| {
            for ((p, c), &s) in probs.iter_mut().zip(&cdfs).zip(success) {
                *p = s * c[i];
            }
            (poisson_binomial_at_least(&probs, k) / enough).min(S::one())
        })
        .collect();
    from_grid_cdf(&grid, cdf, dists)
}

/// Conditional distribution given `L <= t`, with the mass that was within
/// `t` before renormalization.
pub fn truncate_renorm<S: Scalar>(d: &DiscreteDist<S>, t: S) -> Result<(DiscreteDist<S>, S), LatencyError> {
    let kept: Vec<(S, S)> = d.support().iter().copied().filter(|&(v, _)| v <= t).collect();
    let within: S = kept.iter().map(|&(_, m)| m).sum();
    if within <= S::zero() {
        return Err(LatencyError::NoMassWithin(t.to_f64_lossy()));
    }
    if kept.len() == d.len() {
        return Ok((d.clone(), S::one()));
    }
    let points = kept.into_iter().map(|(v, m)| (v, m / within)).collect();
    Ok((
        DiscreteDist::canonical(points, d.samples(), CAPACITY).mark_capped(d.capped()),
        within,
    ))
}

/// `t + L`.
pub fn shift<S: Scalar>(d: &DiscreteDist<S>, t: S) -> DiscreteDist<S> {
    let points = d.support().iter().map(|&(v, m)| (v + t, m)).collect();
    DiscreteDist::canonical(points, d.samples(), CAPACITY).mark_capped(d.capped())
}
