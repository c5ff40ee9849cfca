use std::cmp::Ordering;

use serde::Serialize;

use crate::scalar::Scalar;

/// Support size after any operation; larger results are re-gridded upward.
pub const CAPACITY: usize = 4096;

/// Finite latency distribution: strictly increasing values (ms) with
/// nonnegative masses summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist<S> {
    support: Vec<(S, S)>,
    samples: Option<u64>,
    capped: bool,
}

fn by_value<S: Scalar>(a: &(S, S), b: &(S, S)) -> Ordering {
    a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal)
}

impl<S: Scalar> DiscreteDist<S> {
    /// Point mass at `value`.
    pub fn delta(value: S) -> Self {
        DiscreteDist {
            support: vec![(value, S::one())],
            samples: None,
            capped: false,
        }
    }

    /// Builds a distribution from arbitrary `(value, mass)` pairs: sorts,
    /// merges equal values, drops zero masses, and re-grids above
    /// [`CAPACITY`]. Masses are taken as given (no renormalization).
    pub fn from_points(points: Vec<(S, S)>) -> Self {
        Self::canonical(points, None, CAPACITY)
    }

    pub(crate) fn canonical(mut points: Vec<(S, S)>, samples: Option<u64>, capacity: usize) -> Self {
        points.retain(|&(_, m)| m > S::zero());
        points.sort_by(by_value);
        let mut merged: Vec<(S, S)> = Vec::with_capacity(points.len());
        for (v, m) in points {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 = last.1 + m,
                _ => merged.push((v, m)),
            }
        }
        let capped = merged.len() > capacity;
        if capped {
            merged = regrid_up(&merged, capacity);
        }
        DiscreteDist {
            support: merged,
            samples,
            capped,
        }
    }

    pub fn with_samples(mut self, samples: Option<u64>) -> Self {
        self.samples = samples;
        self
    }

    pub fn support(&self) -> &[(S, S)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Smallest evidence sample count among contributing leaves; `None` for
    /// purely analytic inputs.
    pub fn samples(&self) -> Option<u64> {
        self.samples
    }

    /// True when some operation on the way here re-gridded the support.
    pub fn capped(&self) -> bool {
        self.capped
    }

    pub(crate) fn mark_capped(mut self, capped: bool) -> Self {
        self.capped |= capped;
        self
    }

    pub fn total_mass(&self) -> S {
        self.support.iter().map(|&(_, m)| m).sum()
    }

    pub fn min_value(&self) -> Option<S> {
        self.support.first().map(|p| p.0)
    }

    pub fn max_value(&self) -> Option<S> {
        self.support.last().map(|p| p.0)
    }

    /// `Pr[L <= x]`.
    pub fn cdf(&self, x: S) -> S {
        let end = self.support.partition_point(|&(v, _)| v <= x);
        if end == self.support.len() {
            return S::one();
        }
        self.support[..end].iter().map(|&(_, m)| m).sum()
    }

    pub fn mean(&self) -> S {
        self.support.iter().map(|&(v, m)| v * m).sum()
    }

    /// Cumulative masses normalized so the last entry is exactly one.
    pub(crate) fn cumulative(&self) -> Vec<S> {
        let total = self.total_mass();
        let mut acc = S::zero();
        let mut out: Vec<S> = self
            .support
            .iter()
            .map(|&(_, m)| {
                acc = acc + m;
                acc / total
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = S::one();
        }
        out
    }

    /// Strictly increasing values, nonnegative masses, unit total within
    /// `tol`.
    pub fn is_valid(&self, tol: S) -> bool {
        !self.support.is_empty()
            && self.support.windows(2).all(|w| w[0].0 < w[1].0)
            && self.support.iter().all(|&(v, m)| m >= S::zero() && v >= S::zero())
            && (self.total_mass() - S::one()).abs() <= tol
            && self.support.len() <= CAPACITY
    }

    pub fn map_scalar<T: Scalar>(&self) -> DiscreteDist<T> {
        DiscreteDist {
            support: self
                .support
                .iter()
                .map(|&(v, m)| (T::lift(v.to_f64_lossy()), T::lift(m.to_f64_lossy())))
                .collect(),
            samples: self.samples,
            capped: self.capped,
        }
    }

    /// Whether `self` is stochastically larger than `other`:
    /// `CDF_self(x) <= CDF_other(x) + tol` at every support point of either.
    pub fn dominates(&self, other: &DiscreteDist<S>, tol: S) -> bool {
        self.support
            .iter()
            .chain(other.support.iter())
            .all(|&(x, _)| self.cdf(x) <= other.cdf(x) + tol)
    }
}

/// Merges runs of adjacent points into the run's largest value so at most
/// `capacity` points remain. Mass only moves upward.
fn regrid_up<S: Scalar>(points: &[(S, S)], capacity: usize) -> Vec<(S, S)> {
    let block = points.len().div_ceil(capacity);
    points
        .chunks(block)
        .map(|chunk| {
            let mass = chunk.iter().map(|&(_, m)| m).sum();
            (chunk[chunk.len() - 1].0, mass)
        })
        .collect()
}

/// Smallest of the optional sample counts.
pub(crate) fn min_samples(counts: impl IntoIterator<Item = Option<u64>>) -> Option<u64> {
    counts.into_iter().flatten().min()
}

/// Serializable view used by reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DistSummary {
    pub points: usize,
    pub min_ms: f64,
    pub max_ms: f64,
    pub mean_ms: f64,
    pub capped: bool,
}

impl<S: Scalar> DiscreteDist<S> {
    pub fn summary(&self) -> DistSummary {
        DistSummary {
            points: self.len(),
            min_ms: self.min_value().map(Scalar::to_f64_lossy).unwrap_or(0.0),
            max_ms: self.max_value().map(Scalar::to_f64_lossy).unwrap_or(0.0),
            mean_ms: self.mean().to_f64_lossy(),
            capped: self.capped,
        }
    }
}
