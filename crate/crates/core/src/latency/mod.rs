//! Finite latency distributions and the operators that compose them.

mod compose;
mod dist;
mod ops;
mod quantile;

pub use compose::{compose, compose_plan, q_intervals, Composition, QInterval};
pub use dist::{DiscreteDist, DistSummary, CAPACITY};
pub(crate) use dist::min_samples;
pub use ops::{
    convolve, from_histogram, max_indep, min_indep, mixture, order_statistic,
    order_statistic_given_success, shift, truncate_renorm, HistogramMode, LatencyError,
};
pub use quantile::{dkw_epsilon, quantile, QuantileResult};
