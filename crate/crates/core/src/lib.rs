//! Journey reliability compiler.
//!
//! Journeys are operator trees (`Series`, `Parallel`, `Cond`, `Race`,
//! `KofN`, `Timeout`) over atomic components. Given per-component evidence
//! the crate derives an availability interval bracketed by independence and
//! per-domain perfect correlation, composes latency distributions, and emits
//! recording rules, burn-rate alerts, rollout gates and a provenance report.

pub mod availability;
pub mod diagnostics;
pub mod emit;
pub mod error;
pub mod latency;
pub(crate) mod math;
pub mod model;
pub mod oracle;
pub mod parser;
pub mod plan;
pub mod scalar;

pub use diagnostics::{DiagCode, Diagnostic, Location, Severity, SourceSpan};
pub use error::{Error, Result};
pub use parser::EMAC_VERSION;
pub use scalar::Scalar;

/// Latency distribution in the precision every emitted artifact uses.
pub type Dist = latency::DiscreteDist<f64>;
/// Single-precision distribution for quick sweeps.
pub type Dist32 = latency::DiscreteDist<f32>;
pub type Plan64 = plan::Plan<f64>;
pub type Plan32 = plan::Plan<f32>;
pub type Endpoint64 = availability::Endpoint<f64>;
