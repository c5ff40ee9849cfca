use std::collections::{BTreeMap, BTreeSet};

use rust_decimal::Decimal;
use serde::Serialize;

use crate::availability::SymExpr;
use crate::error::{Error, Result};
use crate::model::duration::format_duration;
use crate::model::{BoundMode, EvidenceModel, JourneySpec, NodePath};

use super::format::{fmt_num, metric_safe};
use super::trace::DerivationTrace;

/// Hands out `emac:<journey>:<artifact>:<qualifier>` names and refuses to
/// hand out the same one twice.
#[derive(Debug, Default)]
pub struct Names {
    journey: String,
    taken: BTreeSet<String>,
}

impl Names {
    pub fn new(journey: &str) -> Self {
        Names {
            journey: metric_safe(journey),
            taken: BTreeSet::new(),
        }
    }

    pub fn format(&self, artifact: &str, qualifier: &str) -> String {
        format!("emac:{}:{artifact}:{qualifier}", self.journey)
    }

    pub fn claim(&mut self, artifact: &str, qualifier: &str) -> Result<String> {
        let name = self.format(artifact, qualifier);
        if !self.taken.insert(name.clone()) {
            return Err(Error::Collision(name));
        }
        Ok(name)
    }
}

/// `rate5m`, `rate1h`, ...
pub fn window_tag(ms: u64) -> String {
    format!("rate{}", format_duration(ms))
}

/// `p99`, `p99_9`, `p50`.
pub fn percentile_tag(p: f64) -> String {
    format!("p{}", fmt_num(p * 100.0).replace('.', "_"))
}

/// Every range window some rule or gate metric reads, ascending.
pub fn rule_windows(spec: &JourneySpec) -> Vec<u64> {
    let p = &spec.policy;
    let mut set: BTreeSet<u64> = p.burn_windows.iter().flat_map(|r| [r.long_ms, r.short_ms]).collect();
    set.insert(p.canary.short_ms);
    set.insert(p.canary.long_ms);
    set.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alert: Option<String>,
    pub expr: String,
    #[serde(rename = "for", skip_serializing_if = "Option::is_none")]
    pub for_: Option<String>,
    pub labels: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleGroup {
    pub name: String,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleFile {
    pub groups: Vec<RuleGroup>,
}

/// An emitted document plus the artifact ids it defines, each with the node
/// paths it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct Emitted<T> {
    pub document: T,
    pub artifacts: Vec<(String, Vec<NodePath>)>,
    pub warnings: Vec<String>,
}

/// Leaf success ratio over `window`: the model's snippet if present,
/// otherwise its compile-time availability as a constant series.
pub fn leaf_sli(model: &EvidenceModel, leaf: &str, window: &str) -> String {
    match model.leaf(leaf) {
        Some(ev) => match &ev.sli_query {
            Some(q) => format!("({})", q.replace("{{window}}", window)),
            None => format!("vector({})", fmt_num(ev.availability.value())),
        },
        None => format!("vector({})", leaf),
    }
}

/// PromQL for a symbolic availability form over leaf SLIs.
pub fn render_promql(expr: &SymExpr, model: &EvidenceModel, window: &str) -> String {
    let text = expr.render(&mut |leaf| leaf_sli(model, leaf, window), &|v| fmt_num(v));
    match expr {
        SymExpr::Const(v) => format!("vector({})", fmt_num(*v)),
        _ => text,
    }
}

fn base_labels(trace: &DerivationTrace, mode: BoundMode) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("journey".to_string(), trace.journey.clone()),
        ("emac_bound".to_string(), mode.as_str().to_string()),
    ])
}

fn all_paths(trace: &DerivationTrace) -> Vec<NodePath> {
    trace.records.iter().map(|r| r.path.clone()).collect()
}

/// Journey SLI and error-ratio recording rules for each mode and window,
/// followed by the compile-time bounds as constant series.
pub fn emit_recording_rules(
    trace: &DerivationTrace,
    spec: &JourneySpec,
    model: &EvidenceModel,
    modes: &[BoundMode],
    names: &mut Names,
) -> Result<Emitted<RuleFile>> {
    let windows = rule_windows(spec);
    let paths = all_paths(trace);
    let mut groups = Vec::new();
    let mut artifacts = Vec::new();
    for &mode in modes {
        let sym = trace.symbolic.get(mode).ok_or_else(|| {
            Error::Resource(format!(
                "{} symbolic form exceeds the expansion limit; no SLI rule can be emitted",
                mode.as_str()
            ))
        })?;
        let mut rules = Vec::new();
        for &w in &windows {
            let window = format_duration(w);
            let sli = names.claim(&format!("sli_{}", mode.as_str()), &window_tag(w))?;
            let ratio = names.claim(&format!("error_ratio_{}", mode.as_str()), &window_tag(w))?;
            let mut labels = base_labels(trace, mode);
            labels.insert("window".into(), window.clone());
            rules.push(Rule {
                record: Some(sli.clone()),
                alert: None,
                expr: render_promql(&sym.expr, model, &window),
                for_: None,
                labels: labels.clone(),
                annotations: BTreeMap::new(),
            });
            rules.push(Rule {
                record: Some(ratio.clone()),
                alert: None,
                expr: format!("1 - {sli}"),
                for_: None,
                labels,
                annotations: BTreeMap::new(),
            });
            artifacts.push((sli, paths.clone()));
            artifacts.push((ratio, paths.clone()));
        }
        groups.push(RuleGroup {
            name: names.format("sli", mode.as_str()),
            rules,
        });
    }

    let root = vec![NodePath::root()];
    let mut bounds = Vec::new();
    let constants = [
        ("availability_pessimistic".to_string(), trace.interval.pessimistic, BoundMode::Pessimistic),
        ("availability_optimistic".to_string(), trace.interval.optimistic, BoundMode::Optimistic),
        (
            format!("latency_{}_upper", percentile_tag(trace.percentile())),
            trace.latency.conservative.upper_ms,
            BoundMode::Pessimistic,
        ),
        (
            format!("latency_{}_point", percentile_tag(trace.percentile())),
            trace.latency.point.point_ms,
            BoundMode::Optimistic,
        ),
    ];
    for (qualifier, value, mode) in constants {
        let name = names.claim("bound", &qualifier)?;
        bounds.push(Rule {
            record: Some(name.clone()),
            alert: None,
            expr: format!("vector({})", fmt_num(value)),
            for_: None,
            labels: base_labels(trace, mode),
            annotations: BTreeMap::new(),
        });
        artifacts.push((name, if qualifier.starts_with("latency") { paths.clone() } else { root.clone() }));
    }
    groups.push(RuleGroup {
        name: names.format("bounds", "compiled"),
        rules: bounds,
    });
    Ok(Emitted {
        document: RuleFile { groups },
        artifacts,
        warnings: Vec::new(),
    })
}

/// `factor * (1 - target)`, exact.
pub fn burn_threshold(factor: Decimal, target: Decimal) -> Decimal {
    (factor * (Decimal::ONE - target)).normalize()
}

/// One multi-window alert per burn row: fires when the journey error ratio
/// over both the long and the short window exceeds `factor * budget`.
/// Without an availability objective the document has no groups.
pub fn emit_burn_rate_alerts(
    trace: &DerivationTrace,
    spec: &JourneySpec,
    mode: BoundMode,
    names: &mut Names,
) -> Result<Emitted<RuleFile>> {
    let Some(target) = spec.objective.availability else {
        return Ok(Emitted {
            document: RuleFile { groups: Vec::new() },
            artifacts: Vec::new(),
            warnings: vec![format!(
                "journey `{}` has no availability objective; no burn-rate alerts emitted",
                spec.name
            )],
        });
    };
    let budget = Decimal::ONE - target;
    let ratio_base = Names::new(&spec.name);
    let ratio = |ms: u64| ratio_base.format(&format!("error_ratio_{}", mode.as_str()), &window_tag(ms));
    let mut rules = Vec::new();
    let mut artifacts = Vec::new();
    for row in &spec.policy.burn_windows {
        let (long, short) = (format_duration(row.long_ms), format_duration(row.short_ms));
        let threshold = burn_threshold(row.factor, target);
        let expr = format!(
            "({} > {threshold}) and ({} > {threshold})",
            ratio(row.long_ms),
            ratio(row.short_ms)
        );
        let name = names.claim("burn", &format!("{}_{long}_{short}", metric_safe(&row.severity)))?;
        let mut labels = base_labels(trace, mode);
        labels.insert("severity".into(), row.severity.clone());
        let annotations = BTreeMap::from([
            (
                "summary".to_string(),
                format!(
                    "Journey {} is burning its error budget at more than {}x over {long} and {short}",
                    trace.journey,
                    row.factor.normalize()
                ),
            ),
            (
                "description".to_string(),
                format!(
                    "Error ratio ({} SLI) above {threshold} = {} x budget {} in both windows.",
                    mode.as_str(),
                    row.factor.normalize(),
                    budget.normalize()
                ),
            ),
        ]);
        rules.push(Rule {
            record: None,
            alert: Some(name.clone()),
            expr,
            for_: Some("0s".into()),
            labels,
            annotations,
        });
        artifacts.push((name, all_paths(trace)));
    }
    Ok(Emitted {
        document: RuleFile {
            groups: vec![RuleGroup {
                name: names.format("burn", mode.as_str()),
                rules,
            }],
        },
        artifacts,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags() {
        assert_eq!(window_tag(300_000), "rate5m");
        assert_eq!(window_tag(259_200_000), "rate3d");
        assert_eq!(percentile_tag(0.99), "p99");
        assert_eq!(percentile_tag(0.999), "p99_9");
        assert_eq!(percentile_tag(0.5), "p50");
    }

    #[test]
    fn names_collide() {
        let mut names = Names::new("check-out");
        assert_eq!(names.claim("sli", "rate5m").unwrap(), "emac:check_out:sli:rate5m");
        assert!(matches!(names.claim("sli", "rate5m"), Err(Error::Collision(_))));
    }

    #[test]
    fn thresholds_are_exact() {
        let t = |f: &str, a: &str| burn_threshold(f.parse().unwrap(), a.parse().unwrap()).to_string();
        assert_eq!(t("14.4", "0.999"), "0.0144");
        assert_eq!(t("6", "0.999"), "0.006");
        assert_eq!(t("1", "0.999"), "0.001");
        assert_eq!(t("14.4", "0.9995"), "0.0072");
    }

    proptest::proptest! {
        #[test]
        fn threshold_is_factor_times_budget(
            factor_tenths in 1u32..=1000,
            nines in 1u32..=5,
            tail in 0u32..=9,
        ) {
            let factor = Decimal::new(factor_tenths.into(), 1);
            // 0.9, 0.99, ..., optionally with a trailing digit (0.9995)
            let budget = Decimal::new(10i64 - i64::from(tail), nines + 1);
            let target = Decimal::ONE - budget;
            let t = burn_threshold(factor, target);
            proptest::prop_assert_eq!(t, (factor * budget).normalize());
            proptest::prop_assert_eq!(t / factor, budget.normalize());
            proptest::prop_assert!(t.scale() <= 28);
        }
    }
}
