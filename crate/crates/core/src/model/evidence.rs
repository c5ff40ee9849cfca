use std::collections::BTreeMap;

use crate::diagnostics::{DiagCode, Diagnostic, Location};

use super::DomainMap;

/// Evidence for a leaf's success probability.
#[derive(Debug, Clone, PartialEq)]
pub enum AvailabilityEvidence {
    Point(f64),
    Counts { good: u64, total: u64, window: String },
}

impl AvailabilityEvidence {
    pub fn value(&self) -> f64 {
        match self {
            AvailabilityEvidence::Point(v) => *v,
            AvailabilityEvidence::Counts { good, total, .. } => *good as f64 / *total as f64,
        }
    }

    pub fn window(&self) -> Option<&str> {
        match self {
            AvailabilityEvidence::Point(_) => None,
            AvailabilityEvidence::Counts { window, .. } => Some(window),
        }
    }

    pub fn check(&self, field: &str) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        match self {
            AvailabilityEvidence::Point(v) => {
                if !(0.0..=1.0).contains(v) {
                    out.push(Diagnostic::error(
                        DiagCode::EvidenceInvalid,
                        format!("availability {v} is outside [0, 1]"),
                        Location::Field(field.to_string()),
                    ));
                }
            }
            AvailabilityEvidence::Counts { good, total, .. } => {
                if *total == 0 {
                    out.push(Diagnostic::error(
                        DiagCode::EvidenceInvalid,
                        "availability total must be positive",
                        Location::Field(field.to_string()),
                    ));
                } else if good > total {
                    out.push(Diagnostic::error(
                        DiagCode::EvidenceInvalid,
                        format!("availability counts have good={good} > total={total}"),
                        Location::Field(field.to_string()),
                    ));
                }
            }
        }
        out
    }
}

/// One cumulative histogram bucket: `cumulative_count` observations were
/// at most `upper_edge_ms`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucket {
    pub upper_edge_ms: f64,
    pub cumulative_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyEvidence {
    pub buckets: Vec<Bucket>,
    pub samples: u64,
    pub window: String,
}

impl LatencyEvidence {
    pub fn new(buckets: Vec<(f64, u64)>, samples: u64, window: impl Into<String>) -> Self {
        LatencyEvidence {
            buckets: buckets
                .into_iter()
                .map(|(upper_edge_ms, cumulative_count)| Bucket {
                    upper_edge_ms,
                    cumulative_count,
                })
                .collect(),
            samples,
            window: window.into(),
        }
    }

    pub fn check(&self, field: &str) -> Vec<Diagnostic> {
        let err = |msg: String| {
            Diagnostic::error(DiagCode::EvidenceInvalid, msg, Location::Field(field.to_string()))
        };
        let mut out = Vec::new();
        if self.samples == 0 {
            out.push(err("latency samples must be positive".into()));
        }
        if self.buckets.is_empty() {
            out.push(err("latency histogram has no buckets".into()));
            return out;
        }
        for (i, b) in self.buckets.iter().enumerate() {
            if !(b.upper_edge_ms.is_finite() && b.upper_edge_ms > 0.0) {
                out.push(err(format!("bucket {i} upper edge must be a positive number")));
            }
        }
        for (i, pair) in self.buckets.windows(2).enumerate() {
            if pair[1].upper_edge_ms <= pair[0].upper_edge_ms {
                out.push(err(format!(
                    "bucket edges must be strictly increasing: bucket {} ({}) follows {}",
                    i + 1,
                    pair[1].upper_edge_ms,
                    pair[0].upper_edge_ms
                )));
            }
            if pair[1].cumulative_count < pair[0].cumulative_count {
                out.push(err(format!(
                    "cumulative counts must be nondecreasing at bucket {}",
                    i + 1
                )));
            }
        }
        let last = self.buckets.last().map(|b| b.cumulative_count).unwrap_or(0);
        if last != self.samples {
            out.push(err(format!(
                "final cumulative count {last} does not equal samples {}",
                self.samples
            )));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbEstimate {
    pub value: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub samples: Option<u64>,
}

impl ProbEstimate {
    pub fn exact(value: f64) -> Self {
        ProbEstimate {
            value,
            lo: None,
            hi: None,
            samples: None,
        }
    }

    /// `[lo, hi]`, collapsing to the point value where bounds are absent.
    pub fn interval(&self) -> (f64, f64) {
        (self.lo.unwrap_or(self.value), self.hi.unwrap_or(self.value))
    }

    pub fn check(&self, field: &str) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        for (name, v) in [("value", Some(self.value)), ("lo", self.lo), ("hi", self.hi)] {
            if let Some(v) = v {
                if !unit(v) {
                    out.push(Diagnostic::error(
                        DiagCode::ProbabilityRange,
                        format!("{name} = {v} is outside [0, 1]"),
                        Location::Field(format!("{field}.{name}")),
                    ));
                }
            }
        }
        let (lo, hi) = self.interval();
        if !(lo <= self.value && self.value <= hi) {
            out.push(Diagnostic::error(
                DiagCode::ProbabilityRange,
                format!("expected lo <= value <= hi, got {lo} / {} / {hi}", self.value),
                Location::Field(field.to_string()),
            ));
        }
        if self.samples == Some(0) {
            out.push(Diagnostic::error(
                DiagCode::EvidenceInvalid,
                "samples must be positive",
                Location::Field(format!("{field}.samples")),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafEvidence {
    pub availability: AvailabilityEvidence,
    pub latency: LatencyEvidence,
    /// PromQL fragment yielding the leaf's success ratio; `{{window}}` is
    /// replaced by the range selector window.
    pub sli_query: Option<String>,
}

/// Everything known about the components a journey binds to.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvidenceModel {
    pub leaves: BTreeMap<String, LeafEvidence>,
    pub branch_probs: BTreeMap<String, ProbEstimate>,
    pub domains: DomainMap,
    pub provenance: BTreeMap<String, String>,
    /// Carried through to reports, never interpreted.
    pub confidence: BTreeMap<String, f64>,
}

impl EvidenceModel {
    pub fn leaf(&self, name: &str) -> Option<&LeafEvidence> {
        self.leaves.get(name)
    }

    /// Structural checks on the model alone.
    pub fn check(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (name, leaf) in &self.leaves {
            out.extend(leaf.availability.check(&format!("leaves.{name}.availability")));
            out.extend(leaf.latency.check(&format!("leaves.{name}.latency")));
        }
        for (name, est) in &self.branch_probs {
            out.extend(est.check(&format!("branchProbs.{name}")));
        }
        out.extend(self.domains.check("domains"));
        for (name, c) in &self.confidence {
            if !(0.0..=1.0).contains(c) {
                out.push(Diagnostic::error(
                    DiagCode::EvidenceInvalid,
                    format!("confidence {c} is outside [0, 1]"),
                    Location::Field(format!("confidence.{name}")),
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_points() {
        let counts = AvailabilityEvidence::Counts {
            good: 999,
            total: 1000,
            window: "28d".into(),
        };
        assert_eq!(counts.value(), 0.999);
        assert!(counts.check("a").is_empty());
        let bad = AvailabilityEvidence::Counts {
            good: 1001,
            total: 1000,
            window: "28d".into(),
        };
        assert_eq!(bad.check("a")[0].code, DiagCode::EvidenceInvalid);
        assert!(!AvailabilityEvidence::Point(1.2).check("a").is_empty());
    }

    #[test]
    fn histogram_checks() {
        let ok = LatencyEvidence::new(vec![(50.0, 9), (100.0, 10)], 10, "1d");
        assert!(ok.check("l").is_empty());
        let unordered = LatencyEvidence::new(vec![(100.0, 5), (50.0, 9)], 9, "1d");
        let diags = unordered.check("l");
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("strictly increasing"));
        let short = LatencyEvidence::new(vec![(100.0, 5)], 9, "1d");
        assert!(short.check("l")[0].message.contains("samples"));
    }

    #[test]
    fn prob_estimate_ordering() {
        let est = ProbEstimate {
            value: 0.8,
            lo: Some(0.85),
            hi: Some(0.9),
            samples: None,
        };
        assert_eq!(est.check("p").len(), 1);
        assert_eq!(ProbEstimate::exact(0.3).interval(), (0.3, 0.3));
    }
}
