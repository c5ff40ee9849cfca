use serde::Serialize;

use crate::scalar::Scalar;

use super::dist::DiscreteDist;

/// Guards the `CDF >= p` comparison against accumulated rounding.
const CDF_TOLERANCE: f64 = 1e-12;

/// Point and finite-sample upper estimates of one quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct QuantileResult {
    pub percentile: f64,
    pub point_ms: f64,
    pub upper_ms: f64,
    /// Miscoverage probability of the band.
    pub delta: f64,
    /// Confidence band half-width applied to the probability level.
    pub epsilon: f64,
    /// Sample count the band was computed from; `None` when analytic.
    pub effective_samples: Option<u64>,
    /// True when `percentile + epsilon >= 1` and the upper estimate is the
    /// largest support value.
    pub saturated: bool,
}

/// DKW half-width `sqrt(ln(2/delta) / (2n))`.
pub fn dkw_epsilon(samples: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * samples as f64)).sqrt()
}

fn smallest_at_least<S: Scalar>(dist: &DiscreteDist<S>, level: f64) -> Option<S> {
    let cum = dist.cumulative();
    let level = S::lift(level - CDF_TOLERANCE);
    dist.support()
        .iter()
        .zip(cum)
        .find(|&(_, f)| f >= level)
        .map(|(&(v, _), _)| v)
}

/// Quantile at level `p` in `(0, 1)`; the upper estimate is the quantile at
/// `p + epsilon` with epsilon derived from the distribution's sample count.
pub fn quantile<S: Scalar>(dist: &DiscreteDist<S>, p: f64, delta: f64) -> QuantileResult {
    let max = dist.max_value().map(|v| v.to_f64_lossy()).unwrap_or(0.0);
    let point = smallest_at_least(dist, p).map(|v| v.to_f64_lossy()).unwrap_or(max);
    let epsilon = dist.samples().map(|n| dkw_epsilon(n, delta)).unwrap_or(0.0);
    let level = p + epsilon;
    let saturated = level >= 1.0 && epsilon > 0.0;
    let upper = if saturated {
        max
    } else {
        smallest_at_least(dist, level).map(|v| v.to_f64_lossy()).unwrap_or(max)
    };
    QuantileResult {
        percentile: p,
        point_ms: point,
        upper_ms: upper.max(point),
        delta,
        epsilon,
        effective_samples: dist.samples(),
        saturated,
    }
}
