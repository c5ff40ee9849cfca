use std::collections::BTreeMap;

use rust_decimal::Decimal;
use serde::Serialize;

use crate::error::Result;
use crate::model::duration::format_duration;
use crate::model::{BoundMode, JourneySpec, NodePath};
use crate::parser::EMAC_VERSION;

use super::format::{dns_label, fmt_num};
use super::rules::{percentile_tag, window_tag, Emitted, Names};
use super::trace::DerivationTrace;

pub const PROMETHEUS_ADDRESS: &str = "http://prometheus.monitoring.svc:9090";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub name: String,
    pub labels: BTreeMap<String, String>,
    pub annotations: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arg {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrometheusQuery {
    pub address: String,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provider {
    pub prometheus: PrometheusQuery,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Metric {
    pub name: String,
    pub interval: String,
    pub success_condition: String,
    pub failure_limit: u32,
    pub provider: Provider,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DryRun {
    pub metric_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TemplateSpec {
    pub args: Vec<Arg>,
    pub metrics: Vec<Metric>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub dry_run: Vec<DryRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisTemplate {
    pub api_version: String,
    pub kind: String,
    pub metadata: Metadata,
    pub spec: TemplateSpec,
}

/// Rollout gate: pessimistic burn rate over the canary's short and long
/// windows, and the journey latency checked against the compiled upper
/// quantile. Without an end-to-end latency query the latency metric is
/// emitted as a dry-run metric over the compiled bound itself.
pub fn emit_rollout_gate(
    trace: &DerivationTrace,
    spec: &JourneySpec,
    mode: BoundMode,
    names: &mut Names,
) -> Result<Emitted<AnalysisTemplate>> {
    let canary = &spec.policy.canary;
    let interval = format_duration(canary.interval_ms);
    let address = "{{args.prometheus-address}}".to_string();
    let all: Vec<NodePath> = trace.records.iter().map(|r| r.path.clone()).collect();
    let mut metrics = Vec::new();
    let mut dry_run = Vec::new();
    let mut artifacts = Vec::new();
    let mut warnings = Vec::new();

    if let Some(budget) = spec.objective.error_budget() {
        let factors = spec.policy.burn_windows.iter().map(|r| r.factor);
        let short_factor = factors.clone().max();
        let long_factor = factors.min();
        for (label, window, factor) in [
            ("short", canary.short_ms, short_factor),
            ("long", canary.long_ms, long_factor),
        ] {
            let Some(factor) = factor else { continue };
            let name = names.claim("gate", &format!("burn_{label}_{}", format_duration(window)))?;
            let ratio = names.format(&format!("error_ratio_{}", mode.as_str()), &window_tag(window));
            metrics.push(Metric {
                name: name.clone(),
                interval: interval.clone(),
                success_condition: format!("result[0] < {}", factor.normalize()),
                failure_limit: canary.max_failures,
                provider: Provider {
                    prometheus: PrometheusQuery {
                        address: address.clone(),
                        query: format!("{ratio} / {}", budget.normalize()),
                    },
                },
            });
            artifacts.push((name, all.clone()));
        }
    }

    if let Some(target) = spec.objective.latency {
        let upper = trace.latency.conservative.upper_ms;
        let name = names.claim("gate", &format!("latency_{}", percentile_tag(target.percentile)))?;
        let metric = match &spec.latency_query {
            Some(query) => Metric {
                name: name.clone(),
                interval: interval.clone(),
                success_condition: format!("result[0] <= {}", fmt_num(upper.min(target.threshold_ms))),
                failure_limit: canary.max_failures,
                provider: Provider {
                    prometheus: PrometheusQuery {
                        address: address.clone(),
                        query: query.replace("{{window}}", &format_duration(canary.short_ms)),
                    },
                },
            },
            None => {
                dry_run.push(DryRun {
                    metric_name: name.clone(),
                });
                warnings.push(format!(
                    "journey `{}` has no latencyQuery; latency gate is advisory (dry run)",
                    spec.name
                ));
                Metric {
                    name: name.clone(),
                    interval: interval.clone(),
                    success_condition: format!("result[0] < {}", fmt_num(target.threshold_ms)),
                    failure_limit: canary.max_failures,
                    provider: Provider {
                        prometheus: PrometheusQuery {
                            address: address.clone(),
                            query: format!("vector({})", fmt_num(upper)),
                        },
                    },
                }
            }
        };
        metrics.push(metric);
        artifacts.push((name, all.clone()));
    }

    let template_name = format!("emac-{}-gate", dns_label(&spec.name));
    let labels = BTreeMap::from([
        ("app.kubernetes.io/managed-by".to_string(), "emac".to_string()),
        ("emac/journey".to_string(), dns_label(&spec.name)),
    ]);
    let mut annotations = BTreeMap::from([
        ("emac/version".to_string(), EMAC_VERSION.to_string()),
        ("emac/bound-mode".to_string(), mode.as_str().to_string()),
        ("emac/availability-bound".to_string(), fmt_num(trace.interval.bound(mode))),
        (
            format!("emac/latency-{}-upper-ms", percentile_tag(trace.percentile()).replace('_', "-")),
            fmt_num(trace.latency.conservative.upper_ms),
        ),
    ]);
    if let Some(a) = spec.objective.availability {
        annotations.insert("emac/availability-target".into(), (a * Decimal::ONE_HUNDRED).normalize().to_string());
    }
    Ok(Emitted {
        document: AnalysisTemplate {
            api_version: "argoproj.io/v1alpha1".into(),
            kind: "AnalysisTemplate".into(),
            metadata: Metadata {
                name: template_name,
                labels,
                annotations,
            },
            spec: TemplateSpec {
                args: vec![Arg {
                    name: "prometheus-address".into(),
                    value: PROMETHEUS_ADDRESS.into(),
                }],
                metrics,
                dry_run,
            },
        },
        artifacts,
        warnings,
    })
}
