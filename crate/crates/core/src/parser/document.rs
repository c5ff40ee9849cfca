//! Versioned YAML/JSON documents for journey specs and evidence models.

use std::collections::BTreeMap;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{has_errors, DiagCode, Diagnostic, Location};
use crate::error::{Error, Result};
use crate::model::duration::{format_duration, parse_duration};
use crate::model::{
    validate_spec_document, AvailabilityEvidence, Bucket, BurnWindow, CanaryPolicy, DomainMap,
    EvidenceModel, GovernancePolicy, JourneySpec, LatencyEvidence, LatencyTarget, LeafEvidence,
    Limits, Objective, ProbEstimate,
};

use super::expr::parse_expression_with_warnings;
use super::Parsed;

pub const EMAC_VERSION: u32 = 1;

type Extra = BTreeMap<String, serde_yaml::Value>;

fn unknown_fields(prefix: &str, extra: &Extra, out: &mut Vec<Diagnostic>) {
    for key in extra.keys() {
        let field = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        out.push(Diagnostic::warning(
            DiagCode::UnknownField,
            format!("unknown field `{key}` ignored"),
            Location::Field(field),
        ));
    }
}

fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Document {
        path: ".".into(),
        message: format!("document is not UTF-8: {e}"),
    })?;
    let de = serde_yaml::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Document {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

fn check_version(version: &Option<serde_yaml::Value>) -> Result<()> {
    match version {
        None => Err(Error::Document {
            path: "emacVersion".into(),
            message: "missing required field `emacVersion`".into(),
        }),
        Some(serde_yaml::Value::Number(n)) if n.as_u64() == Some(EMAC_VERSION as u64) => Ok(()),
        Some(other) => Err(Error::Version {
            found: serde_yaml::to_string(other).unwrap_or_default().trim().to_string(),
            expected: EMAC_VERSION,
        }),
    }
}

fn duration_field(text: &str, path: &str) -> Result<u64> {
    parse_duration(text).map(|d| d.ms).ok_or_else(|| Error::Document {
        path: path.to_string(),
        message: format!("invalid duration `{text}`"),
    })
}

fn exact_decimal(value: f64, path: &str) -> Result<Decimal> {
    // f64 Display is the shortest round-trip form, so 99.9 reads back as "99.9".
    Decimal::from_str(&value.to_string()).map_err(|_| Error::Document {
        path: path.to_string(),
        message: format!("`{value}` is not a representable decimal"),
    })
}

fn domains_from(raw: BTreeMap<String, Vec<String>>) -> DomainMap {
    DomainMap::from_groups(raw)
}

// ---------------------------------------------------------------------------
// Spec documents

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SpecDoc {
    emac_version: Option<serde_yaml::Value>,
    name: String,
    expression: String,
    objective: Option<ObjectiveDoc>,
    #[serde(default)]
    domains: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    policy: Option<PolicyDoc>,
    #[serde(default)]
    latency_query: Option<String>,
    #[serde(flatten)]
    extra: Extra,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(rename_all = "camelCase")]
struct ObjectiveDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    availability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latency: Option<LatencyTargetDoc>,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(rename_all = "camelCase")]
struct LatencyTargetDoc {
    percentile: f64,
    threshold_ms: f64,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(rename_all = "camelCase")]
struct PolicyDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    burn_windows: Option<Vec<BurnWindowDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    canary: Option<CanaryDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bound_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dkw_delta: Option<f64>,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(rename_all = "camelCase")]
struct BurnWindowDoc {
    long_window: String,
    short_window: String,
    factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    severity: Option<String>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(rename_all = "camelCase")]
struct CanaryDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    short_window: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    long_window: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    interval: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_failures: Option<u32>,
}

fn objective_from(doc: Option<ObjectiveDoc>, warnings: &mut Vec<Diagnostic>) -> Result<Objective> {
    let Some(doc) = doc else {
        return Ok(Objective::default());
    };
    unknown_fields("objective", &doc.extra, warnings);
    Ok(Objective {
        availability: doc
            .availability
            .map(|p| exact_decimal(p, "objective.availability").map(Objective::from_percent))
            .transpose()?,
        latency: doc.latency.map(|l| LatencyTarget {
            percentile: l.percentile,
            threshold_ms: l.threshold_ms,
        }),
    })
}

fn policy_from(doc: Option<PolicyDoc>, warnings: &mut Vec<Diagnostic>) -> Result<GovernancePolicy> {
    let mut policy = GovernancePolicy::default();
    let Some(doc) = doc else {
        return Ok(policy);
    };
    unknown_fields("policy", &doc.extra, warnings);
    if let Some(rows) = doc.burn_windows {
        policy.burn_windows = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let at = format!("policy.burnWindows[{i}]");
                Ok(BurnWindow {
                    long_ms: duration_field(&row.long_window, &format!("{at}.longWindow"))?,
                    short_ms: duration_field(&row.short_window, &format!("{at}.shortWindow"))?,
                    factor: exact_decimal(row.factor, &format!("{at}.factor"))?,
                    severity: row.severity.unwrap_or_else(|| "page".into()),
                })
            })
            .collect::<Result<_>>()?;
    }
    if let Some(c) = doc.canary {
        let defaults = CanaryPolicy::default();
        let window = |v: Option<String>, field: &str, default: u64| {
            v.map(|t| duration_field(&t, &format!("policy.canary.{field}")))
                .unwrap_or(Ok(default))
        };
        policy.canary = CanaryPolicy {
            short_ms: window(c.short_window, "shortWindow", defaults.short_ms)?,
            long_ms: window(c.long_window, "longWindow", defaults.long_ms)?,
            interval_ms: window(c.interval, "interval", defaults.interval_ms)?,
            max_failures: c.max_failures.unwrap_or(defaults.max_failures),
        };
    }
    if let Some(mode) = doc.bound_mode {
        policy.bound_mode = mode.parse().map_err(|message| Error::Document {
            path: "policy.boundMode".into(),
            message,
        })?;
    }
    if let Some(delta) = doc.dkw_delta {
        policy.dkw_delta = delta;
    }
    Ok(policy)
}

/// Reads a journey spec document and checks it in isolation (expression
/// structure, objective, policy, inline domains).
pub fn load_spec_document(bytes: &[u8]) -> Result<Parsed<JourneySpec>> {
    load_spec_document_with(bytes, Limits::default())
}

pub fn load_spec_document_with(bytes: &[u8], limits: Limits) -> Result<Parsed<JourneySpec>> {
    let doc: SpecDoc = decode(bytes)?;
    check_version(&doc.emac_version)?;
    let mut warnings = Vec::new();
    unknown_fields("", &doc.extra, &mut warnings);
    if !crate::model::is_identifier(&doc.name) {
        return Err(Error::Document {
            path: "name".into(),
            message: format!("journey name `{}` is not an identifier", doc.name),
        });
    }
    let parsed = parse_expression_with_warnings(&doc.expression)?;
    warnings.extend(parsed.warnings);
    let spec = JourneySpec {
        name: doc.name,
        expression: parsed.value,
        objective: objective_from(doc.objective, &mut warnings)?,
        policy: policy_from(doc.policy, &mut warnings)?,
        domains: domains_from(doc.domains),
        latency_query: doc.latency_query,
    };
    let diags = validate_spec_document(&spec, limits);
    if has_errors(&diags) {
        return Err(Error::Invalid(diags));
    }
    warnings.extend(diags);
    Ok(Parsed { value: spec, warnings })
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct SpecDocOut {
    emac_version: u32,
    name: String,
    expression: String,
    objective: ObjectiveDoc,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    domains: BTreeMap<String, Vec<String>>,
    policy: PolicyDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    latency_query: Option<String>,
}

/// Renders a spec as a document that [`load_spec_document`] accepts.
pub fn spec_document_yaml(spec: &JourneySpec) -> String {
    use rust_decimal::prelude::ToPrimitive;
    let p = &spec.policy;
    let out = SpecDocOut {
        emac_version: EMAC_VERSION,
        name: spec.name.clone(),
        expression: spec.expression.to_string(),
        objective: ObjectiveDoc {
            availability: spec
                .objective
                .availability
                .and_then(|a| (a * Decimal::ONE_HUNDRED).normalize().to_f64()),
            latency: spec.objective.latency.map(|l| LatencyTargetDoc {
                percentile: l.percentile,
                threshold_ms: l.threshold_ms,
            }),
            extra: Extra::new(),
        },
        domains: spec
            .domains
            .iter()
            .map(|(k, v)| (k.to_string(), v.iter().cloned().collect()))
            .collect(),
        policy: PolicyDoc {
            burn_windows: Some(
                p.burn_windows
                    .iter()
                    .map(|w| BurnWindowDoc {
                        long_window: format_duration(w.long_ms),
                        short_window: format_duration(w.short_ms),
                        factor: w.factor.to_f64().unwrap_or(f64::NAN),
                        severity: Some(w.severity.clone()),
                    })
                    .collect(),
            ),
            canary: Some(CanaryDoc {
                short_window: Some(format_duration(p.canary.short_ms)),
                long_window: Some(format_duration(p.canary.long_ms)),
                interval: Some(format_duration(p.canary.interval_ms)),
                max_failures: Some(p.canary.max_failures),
            }),
            bound_mode: Some(p.bound_mode.as_str().to_string()),
            dkw_delta: Some(p.dkw_delta),
            extra: Extra::new(),
        },
        latency_query: spec.latency_query.clone(),
    };
    serde_yaml::to_string(&out).expect("spec document serializes")
}

// ---------------------------------------------------------------------------
// Evidence model documents

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ModelDoc {
    emac_version: Option<serde_yaml::Value>,
    leaves: BTreeMap<String, LeafDoc>,
    #[serde(default)]
    branch_probs: BTreeMap<String, ProbDoc>,
    #[serde(default)]
    domains: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    provenance: BTreeMap<String, String>,
    #[serde(default)]
    confidence: BTreeMap<String, f64>,
    #[serde(flatten)]
    extra: Extra,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct LeafDoc {
    availability: AvailabilityDoc,
    latency: LatencyDoc,
    #[serde(default)]
    sli_query: Option<String>,
    #[serde(flatten)]
    extra: Extra,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct AvailabilityDoc {
    #[serde(default)]
    point: Option<f64>,
    #[serde(default)]
    good: Option<u64>,
    #[serde(default)]
    total: Option<u64>,
    #[serde(default)]
    window: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct LatencyDoc {
    buckets: Vec<BucketDoc>,
    samples: u64,
    window: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct BucketDoc {
    le_ms: f64,
    count: u64,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ProbDoc {
    value: f64,
    #[serde(default)]
    lo: Option<f64>,
    #[serde(default)]
    hi: Option<f64>,
    #[serde(default)]
    samples: Option<u64>,
}

fn availability_from(doc: AvailabilityDoc, at: &str) -> Result<AvailabilityEvidence> {
    match doc {
        AvailabilityDoc {
            point: Some(p),
            good: None,
            total: None,
            ..
        } => Ok(AvailabilityEvidence::Point(p)),
        AvailabilityDoc {
            point: None,
            good: Some(good),
            total: Some(total),
            window,
        } => Ok(AvailabilityEvidence::Counts {
            good,
            total,
            window: window.unwrap_or_default(),
        }),
        _ => Err(Error::Document {
            path: at.to_string(),
            message: "availability needs either `point` or both `good` and `total`".into(),
        }),
    }
}

/// Reads an evidence model document and checks it in isolation.
pub fn load_model_document(bytes: &[u8]) -> Result<Parsed<EvidenceModel>> {
    let doc: ModelDoc = decode(bytes)?;
    check_version(&doc.emac_version)?;
    let mut warnings = Vec::new();
    unknown_fields("", &doc.extra, &mut warnings);
    let mut model = EvidenceModel {
        domains: domains_from(doc.domains),
        provenance: doc.provenance,
        confidence: doc.confidence,
        ..EvidenceModel::default()
    };
    for (name, leaf) in doc.leaves {
        let at = format!("leaves.{name}");
        unknown_fields(&at, &leaf.extra, &mut warnings);
        model.leaves.insert(
            name,
            LeafEvidence {
                availability: availability_from(leaf.availability, &format!("{at}.availability"))?,
                latency: LatencyEvidence {
                    buckets: leaf
                        .latency
                        .buckets
                        .into_iter()
                        .map(|b| Bucket {
                            upper_edge_ms: b.le_ms,
                            cumulative_count: b.count,
                        })
                        .collect(),
                    samples: leaf.latency.samples,
                    window: leaf.latency.window,
                },
                sli_query: leaf.sli_query,
            },
        );
    }
    for (name, p) in doc.branch_probs {
        model.branch_probs.insert(
            name,
            ProbEstimate {
                value: p.value,
                lo: p.lo,
                hi: p.hi,
                samples: p.samples,
            },
        );
    }
    let diags = model.check();
    if has_errors(&diags) {
        return Err(Error::Invalid(diags));
    }
    warnings.extend(diags);
    Ok(Parsed { value: model, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"
emacVersion: 1
name: checkout
expression: "Series(Frontend, Cond(p_hit; Cache, Catalog), Timeout(200ms; Race(PayA, PayB), Queue))"
objective:
  availability: 99.9
  latency: {percentile: 0.99, thresholdMs: 400}
domains:
  payments: [PayA, PayB]
policy:
  burnWindows:
    - {longWindow: 1h, shortWindow: 5m, factor: 14.4, severity: page}
  canary: {shortWindow: 5m, longWindow: 1h, interval: 1m, maxFailures: 1}
  dkwDelta: 0.01
owner: team-checkout
"#;

    fn model_doc(buckets: &str, good: u64, total: u64) -> String {
        format!(
            "emacVersion: 1\nleaves:\n  A:\n    availability: {{good: {good}, total: {total}, window: 28d}}\n    latency: {{buckets: {buckets}, samples: 9, window: 28d}}\n"
        )
    }

    #[test]
    fn loads_spec_with_unknown_field_warning() {
        let parsed = load_spec_document(SPEC.as_bytes()).unwrap();
        let spec = parsed.value;
        assert_eq!(spec.name, "checkout");
        assert_eq!(spec.expression.leaf_count(), 6);
        assert_eq!(spec.objective.availability.unwrap().to_string(), "0.999");
        assert_eq!(spec.policy.burn_windows.len(), 1);
        assert_eq!(spec.policy.burn_windows[0].factor.to_string(), "14.4");
        assert_eq!(spec.policy.canary.max_failures, 1);
        assert_eq!(spec.policy.dkw_delta, 0.01);
        assert_eq!(spec.domains.domain_of("PayB"), Some("payments"));
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.warnings[0].code, DiagCode::UnknownField);
    }

    #[test]
    fn spec_round_trips_through_document() {
        let spec = load_spec_document(SPEC.as_bytes()).unwrap().value;
        let text = spec_document_yaml(&spec);
        let again = load_spec_document(text.as_bytes()).unwrap();
        assert!(again.warnings.is_empty(), "{:?}", again.warnings);
        assert_eq!(again.value, spec);
    }

    #[test]
    fn version_is_required() {
        let missing = SPEC.replace("emacVersion: 1\n", "");
        assert!(matches!(load_spec_document(missing.as_bytes()), Err(Error::Document { .. })));
        let wrong = SPEC.replace("emacVersion: 1", "emacVersion: 2");
        assert!(matches!(load_spec_document(wrong.as_bytes()), Err(Error::Version { .. })));
    }

    #[test]
    fn schema_errors_carry_paths() {
        let bad = SPEC.replace("factor: 14.4", "factor: lots");
        match load_spec_document(bad.as_bytes()) {
            Err(Error::Document { path, .. }) => assert_eq!(path, "policy.burnWindows[0].factor"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = SPEC.replace("shortWindow: 5m, factor", "shortWindow: soon, factor");
        match load_spec_document(bad.as_bytes()) {
            Err(Error::Document { path, .. }) => assert_eq!(path, "policy.burnWindows[0].shortWindow"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn model_edge_ordering_error() {
        let doc = model_doc("[{leMs: 100, count: 5}, {leMs: 50, count: 9}]", 9, 10);
        match load_model_document(doc.as_bytes()) {
            Err(Error::Invalid(diags)) => {
                assert_eq!(diags.len(), 1);
                assert!(diags[0].message.contains("strictly increasing"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn model_counts_error() {
        let doc = model_doc("[{leMs: 50, count: 9}]", 1001, 1000);
        match load_model_document(doc.as_bytes()) {
            Err(Error::Invalid(diags)) => assert!(diags[0].message.contains("good=1001 > total=1000")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn model_accepts_json() {
        let json = r#"{"emacVersion": 1, "leaves": {"A": {"availability": {"point": 0.99},
            "latency": {"buckets": [{"leMs": 10, "count": 3}], "samples": 3, "window": "1d"}}},
            "branchProbs": {"p": {"value": 0.5, "lo": 0.4, "hi": 0.6}}}"#;
        let model = load_model_document(json.as_bytes()).unwrap().value;
        assert_eq!(model.leaves["A"].availability.value(), 0.99);
        assert_eq!(model.branch_probs["p"].interval(), (0.4, 0.6));
    }

    #[test]
    fn malformed_document() {
        assert!(matches!(
            load_model_document(b"emacVersion: [1"),
            Err(Error::Document { .. })
        ));
    }
}
