use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::Serialize;

use crate::diagnostics::{DiagCode, Diagnostic, Location};

use super::{DomainMap, JourneyExpr};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LatencyTarget {
    /// In (0, 1), e.g. 0.99 for p99.
    pub percentile: f64,
    pub threshold_ms: f64,
}

/// Journey objective. The availability target is held as an exact decimal
/// fraction (99.9% is `0.999`) so budgets and thresholds carry no binary
/// representation error.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Objective {
    pub availability: Option<Decimal>,
    pub latency: Option<LatencyTarget>,
}

impl Objective {
    /// Builds an availability target from a percentage such as `99.9`.
    pub fn from_percent(percent: Decimal) -> Decimal {
        percent / Decimal::ONE_HUNDRED
    }

    pub fn is_empty(&self) -> bool {
        self.availability.is_none() && self.latency.is_none()
    }

    pub fn availability_f64(&self) -> Option<f64> {
        self.availability.and_then(|d| d.to_f64())
    }

    /// Error budget `1 - target`, exact.
    pub fn error_budget(&self) -> Option<Decimal> {
        self.availability.map(|a| Decimal::ONE - a)
    }

    pub fn check(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.is_empty() {
            out.push(Diagnostic::error(
                DiagCode::MissingObjective,
                "objective needs an availability or a latency target",
                Location::Field("objective".into()),
            ));
        }
        if let Some(a) = self.availability {
            if a <= Decimal::ZERO || a >= Decimal::ONE {
                out.push(Diagnostic::error(
                    DiagCode::ObjectiveRange,
                    format!("availability target {}% must lie strictly between 0 and 100", a * Decimal::ONE_HUNDRED),
                    Location::Field("objective.availability".into()),
                ));
            }
        }
        if let Some(l) = self.latency {
            if !(l.percentile > 0.0 && l.percentile < 1.0) {
                out.push(Diagnostic::error(
                    DiagCode::ObjectiveRange,
                    format!("latency percentile {} must lie in (0, 1)", l.percentile),
                    Location::Field("objective.latency.percentile".into()),
                ));
            }
            if !(l.threshold_ms.is_finite() && l.threshold_ms > 0.0) {
                out.push(Diagnostic::error(
                    DiagCode::ObjectiveRange,
                    "latency threshold must be positive",
                    Location::Field("objective.latency.thresholdMs".into()),
                ));
            }
        }
        out
    }
}

/// Which endpoint of the availability interval automation acts on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    #[default]
    Pessimistic,
    Optimistic,
}

impl FromStr for BoundMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pessimistic" => Ok(BoundMode::Pessimistic),
            "optimistic" => Ok(BoundMode::Optimistic),
            other => Err(format!("unknown bound mode `{other}`")),
        }
    }
}

impl BoundMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundMode::Pessimistic => "pessimistic",
            BoundMode::Optimistic => "optimistic",
        }
    }
}

/// One multi-window burn-rate alert: fires when the error rate over both
/// windows exceeds `factor` times the budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BurnWindow {
    pub long_ms: u64,
    pub short_ms: u64,
    pub factor: Decimal,
    pub severity: String,
}

impl BurnWindow {
    pub fn new(long_ms: u64, short_ms: u64, factor: &str, severity: &str) -> Self {
        BurnWindow {
            long_ms,
            short_ms,
            factor: Decimal::from_str(factor).expect("literal burn factor"),
            severity: severity.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CanaryPolicy {
    pub short_ms: u64,
    pub long_ms: u64,
    pub interval_ms: u64,
    pub max_failures: u32,
}

impl Default for CanaryPolicy {
    fn default() -> Self {
        CanaryPolicy {
            short_ms: 5 * 60_000,
            long_ms: 60 * 60_000,
            interval_ms: 60_000,
            max_failures: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GovernancePolicy {
    pub burn_windows: Vec<BurnWindow>,
    pub canary: CanaryPolicy,
    pub bound_mode: BoundMode,
    pub dkw_delta: f64,
}

const HOUR: u64 = 3_600_000;
const MINUTE: u64 = 60_000;

impl GovernancePolicy {
    /// The standard page/page/ticket multi-window rows.
    pub fn default_burn_windows() -> Vec<BurnWindow> {
        vec![
            BurnWindow::new(HOUR, 5 * MINUTE, "14.4", "page"),
            BurnWindow::new(6 * HOUR, 30 * MINUTE, "6", "page"),
            BurnWindow::new(72 * HOUR, 6 * HOUR, "1", "ticket"),
        ]
    }

    pub fn check(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let bad = |field: String, msg: String| {
            Diagnostic::error(DiagCode::PolicyInvalid, msg, Location::Field(field))
        };
        for (i, row) in self.burn_windows.iter().enumerate() {
            let field = format!("policy.burnWindows[{i}]");
            if row.factor <= Decimal::ZERO {
                out.push(bad(field.clone(), format!("burn factor {} must be positive", row.factor)));
            }
            if row.short_ms == 0 || row.long_ms == 0 {
                out.push(bad(field.clone(), "windows must be positive".into()));
            }
            if row.short_ms >= row.long_ms {
                out.push(bad(field, "short window must be shorter than long window".into()));
            }
        }
        let c = &self.canary;
        if c.short_ms == 0 || c.long_ms == 0 || c.interval_ms == 0 {
            out.push(bad("policy.canary".into(), "canary windows and interval must be positive".into()));
        }
        if c.short_ms >= c.long_ms {
            out.push(bad(
                "policy.canary".into(),
                "canary short window must be shorter than long window".into(),
            ));
        }
        if !(self.dkw_delta > 0.0 && self.dkw_delta < 1.0) {
            out.push(bad("policy.dkwDelta".into(), format!("dkwDelta {} must lie in (0, 1)", self.dkw_delta)));
        }
        out
    }
}

impl Default for GovernancePolicy {
    fn default() -> Self {
        GovernancePolicy {
            burn_windows: GovernancePolicy::default_burn_windows(),
            canary: CanaryPolicy::default(),
            bound_mode: BoundMode::Pessimistic,
            dkw_delta: 0.05,
        }
    }
}

/// A named journey: expression, objective, policy, and optional inline
/// failure domains.
#[derive(Debug, Clone, PartialEq)]
pub struct JourneySpec {
    pub name: String,
    pub expression: JourneyExpr,
    pub objective: Objective,
    pub policy: GovernancePolicy,
    pub domains: DomainMap,
    /// PromQL yielding the observed end-to-end latency at the objective
    /// percentile, in milliseconds.
    pub latency_query: Option<String>,
}

impl JourneySpec {
    pub fn new(name: impl Into<String>, expression: JourneyExpr, objective: Objective) -> Self {
        JourneySpec {
            name: name.into(),
            expression,
            objective,
            policy: GovernancePolicy::default(),
            domains: DomainMap::new(),
            latency_query: None,
        }
    }
}
