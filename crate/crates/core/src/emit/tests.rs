use std::collections::BTreeSet;

use rust_decimal::Decimal;

use super::*;
use crate::model::{AvailabilityEvidence, LatencyEvidence, LatencyTarget, LeafEvidence, Objective, ProbEstimate};
use crate::parser::{load_model_document, load_spec_document, parse_expression};

pub(crate) fn checkout() -> (JourneySpec, EvidenceModel) {
    let spec = load_spec_document(include_bytes!("../../fixtures/checkout.spec.yaml")).unwrap().value;
    let model = load_model_document(include_bytes!("../../fixtures/checkout.model.yaml")).unwrap().value;
    (spec, model)
}

fn model_with(leaves: &[(&str, f64)], with_queries: bool) -> EvidenceModel {
    let mut model = EvidenceModel::default();
    for &(name, a) in leaves {
        model.leaves.insert(
            name.to_string(),
            LeafEvidence {
                availability: AvailabilityEvidence::Point(a),
                latency: LatencyEvidence::new(vec![(10.0, 50), (40.0, 100)], 100, "1d"),
                sli_query: with_queries.then(|| format!("sli_{name}[{{{{window}}}}]")),
            },
        );
    }
    model
}

fn spec_for(expr: &str, availability: Option<&str>, latency_ms: Option<f64>) -> JourneySpec {
    JourneySpec::new(
        "j",
        parse_expression(expr).unwrap(),
        Objective {
            availability: availability.map(|a| a.parse::<Decimal>().unwrap()),
            latency: latency_ms.map(|t| LatencyTarget {
                percentile: 0.99,
                threshold_ms: t,
            }),
        },
    )
}

fn yaml(doc: &str) -> serde_yaml::Value {
    serde_yaml::from_str(doc).unwrap()
}

/// Every `record`, `alert` and gate metric name defined in a bundle.
fn defined_names(bundle: &CompilationBundle) -> Vec<String> {
    let mut out = Vec::new();
    for doc in [&bundle.recording_rules, &bundle.alerting_rules] {
        for group in yaml(doc)["groups"].as_sequence().unwrap() {
            for rule in group["rules"].as_sequence().unwrap() {
                let name = rule.get("record").or_else(|| rule.get("alert")).unwrap();
                out.push(name.as_str().unwrap().to_string());
            }
        }
    }
    let gate = yaml(&bundle.rollout_gate);
    out.push(gate["metadata"]["name"].as_str().unwrap().to_string());
    for metric in gate["spec"]["metrics"].as_sequence().unwrap() {
        out.push(metric["name"].as_str().unwrap().to_string());
    }
    out
}

#[test]
fn checkout_trace_structure() {
    let (spec, model) = checkout();
    let trace = build_trace(&spec, &model, &DomainMap::new()).unwrap();
    assert_eq!(trace.records.len(), 11);
    let leaves = trace.records.iter().filter(|r| r.operator == "Leaf").count();
    let probs = trace.records.iter().filter(|r| r.operator == "Prob").count();
    assert_eq!((leaves, probs), (6, 1));
    let paths: BTreeSet<_> = trace.records.iter().map(|r| r.path.clone()).collect();
    assert_eq!(paths.len(), 11);
    assert!(trace.sensitivity.dominant.is_some());
    assert!(trace.verdict.passed());
    assert_eq!(trace.interval.lo_assumption.as_str(), "comonotone-within-domains");
    let race = trace.record(&NodePath::parse("$.2.0").unwrap()).unwrap();
    let a = race.availability.as_ref().unwrap();
    // same-domain race: no redundancy under coupling
    assert!((a.lo - 0.999).abs() < 1e-15);
    assert!((a.hi - (1.0 - 0.001 * 0.002)).abs() < 1e-15);
    assert_eq!(trace.timeouts.len(), 1);
    assert!(trace.timeouts[0].lo <= trace.timeouts[0].hi);
}

#[test]
fn singleton_domains_collapse_to_independence() {
    let (mut spec, model) = checkout();
    spec.domains = DomainMap::new();
    let trace = build_trace(&spec, &model, &DomainMap::new()).unwrap();
    assert!(all_independent(&trace));
    assert_eq!(trace.interval.lo_assumption, trace.interval.hi_assumption);
}

#[test]
fn verdict_fails_below_target() {
    let (mut spec, model) = checkout();
    spec.objective.availability = Some("0.99999".parse().unwrap());
    let trace = build_trace(&spec, &model, &DomainMap::new()).unwrap();
    assert_eq!(trace.verdict.status, Status::Fail);
    assert!(!trace.verdict.availability.as_ref().unwrap().pass);
    let bundle = compile(&spec, &model, &CompileOptions::default()).unwrap();
    assert!(!bundle.trace.verdict.passed());
}

#[test]
fn compile_is_deterministic_and_fully_linked() {
    let (spec, model) = checkout();
    let a = compile(&spec, &model, &CompileOptions::default()).unwrap();
    let b = compile(&spec, &model, &CompileOptions::default()).unwrap();
    assert_eq!(a.files(), b.files());
    let names = defined_names(&a);
    let unique: BTreeSet<_> = names.iter().collect();
    assert_eq!(unique.len(), names.len(), "names are unique per bundle");
    let paths: BTreeSet<_> = a.trace.records.iter().map(|r| r.path.clone()).collect();
    for name in &names {
        let links = a.trace.backlinks.get(name).unwrap_or_else(|| panic!("{name} has no backlink"));
        assert!(!links.is_empty());
        assert!(links.iter().all(|p| paths.contains(p)));
        assert!(a.provenance.contains(&format!("\"id\": \"{name}\"")));
    }
    assert!(names.iter().all(|n| n.starts_with("emac:checkout:") || n == "emac-checkout-gate"));
    let provenance: serde_json::Value = serde_json::from_str(&a.provenance).unwrap();
    assert_eq!(provenance["emacVersion"], 1);
    assert!(!provenance["dominantContributors"].as_array().unwrap().is_empty());
    for doc in [&a.recording_rules, &a.alerting_rules, &a.rollout_gate] {
        assert!(doc.starts_with("# emacVersion: 1\n"));
    }
}

#[test]
fn burn_alerts_use_exact_thresholds() {
    let (spec, model) = checkout();
    let bundle = compile(&spec, &model, &CompileOptions::default()).unwrap();
    let doc = yaml(&bundle.alerting_rules);
    let rules = doc["groups"][0]["rules"].as_sequence().unwrap();
    assert_eq!(rules.len(), 3);
    let exprs: Vec<&str> = rules.iter().map(|r| r["expr"].as_str().unwrap()).collect();
    assert_eq!(
        exprs[0],
        "(emac:checkout:error_ratio_pessimistic:rate1h > 0.0144) and (emac:checkout:error_ratio_pessimistic:rate5m > 0.0144)"
    );
    assert!(exprs[1].contains("rate6h > 0.006") && exprs[1].contains("rate30m > 0.006"));
    assert!(exprs[2].contains("rate3d > 0.001") && exprs[2].contains("rate6h > 0.001"));
    let severities: Vec<&str> = rules.iter().map(|r| r["labels"]["severity"].as_str().unwrap()).collect();
    assert_eq!(severities, ["page", "page", "ticket"]);
    // every referenced error ratio is recorded
    for expr in exprs {
        for part in expr.split(' ').filter(|p| p.contains("error_ratio")) {
            let name = part.trim_start_matches('(');
            assert!(bundle.recording_rules.contains(&format!("record: {name}")), "{name}");
        }
    }
}

#[test]
fn sli_rules_follow_operator_forms() {
    let model = model_with(&[("A", 0.99), ("B", 0.98), ("C", 0.97)], true);
    let rule_expr = |expr: &str, domains: DomainMap, mode: ModeSelection| {
        let mut spec = spec_for(expr, Some("0.9"), None);
        spec.domains = domains;
        let options = CompileOptions {
            modes: Some(mode),
            ..CompileOptions::default()
        };
        let bundle = compile(&spec, &model, &options).unwrap();
        yaml(&bundle.recording_rules)["groups"][0]["rules"][0]["expr"]
            .as_str()
            .unwrap()
            .to_string()
    };
    assert_eq!(
        rule_expr("Series(A, B)", DomainMap::new(), ModeSelection::Pessimistic),
        "((sli_A[5m]) * (sli_B[5m]))"
    );
    let shared = DomainMap::from_groups([("d", ["A", "B"])]);
    assert_eq!(
        rule_expr("Race(A, B)", shared, ModeSelection::Pessimistic),
        "((((sli_A[5m])) >= ((sli_B[5m]))) or ((sli_B[5m])))"
    );
    assert_eq!(
        rule_expr("Race(A, B)", DomainMap::new(), ModeSelection::Optimistic),
        "(1 - ((1 - (sli_A[5m])) * (1 - (sli_B[5m]))))"
    );
}

#[test]
fn kofn_polynomial_matches_its_expansion() {
    let model = model_with(&[("A", 0.9), ("B", 0.8), ("C", 0.7)], false);
    let spec = spec_for("KofN(2; A, B, C)", Some("0.9"), None);
    let trace = build_trace(&spec, &model, &DomainMap::new()).unwrap();
    let sym = &trace.symbolic.get(BoundMode::Optimistic).unwrap().expr;
    let mut rng_state = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        rng_state ^= rng_state << 13;
        rng_state ^= rng_state >> 7;
        rng_state ^= rng_state << 17;
        (rng_state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..100 {
        let (a, b, c) = (next(), next(), next());
        let value = sym.eval(&|leaf| match leaf {
            "A" => a,
            "B" => b,
            _ => c,
        });
        let expanded = a * b + a * c + b * c - 2.0 * a * b * c;
        assert!((value - expanded).abs() < 1e-12);
    }
}

#[test]
fn missing_queries_fall_back_to_constants() {
    let model = model_with(&[("A", 0.99), ("B", 0.98)], false);
    let spec = spec_for("Series(A, B)", Some("0.9"), None);
    let bundle = compile(&spec, &model, &CompileOptions::default()).unwrap();
    let expr = yaml(&bundle.recording_rules)["groups"][0]["rules"][0]["expr"]
        .as_str()
        .unwrap()
        .to_string();
    assert_eq!(expr, "(vector(0.99) * vector(0.98))");
    let flagged: Vec<_> = bundle.trace.flags.iter().filter(|f| f.code == "sli-constant").collect();
    assert_eq!(flagged.len(), 2);
}

#[test]
fn no_availability_objective_means_no_alerts() {
    let model = model_with(&[("A", 0.99), ("B", 0.98)], true);
    let spec = spec_for("Series(A, B)", None, Some(100.0));
    let bundle = compile(&spec, &model, &CompileOptions::default()).unwrap();
    assert_eq!(yaml(&bundle.alerting_rules)["groups"].as_sequence().unwrap().len(), 0);
    assert!(bundle.warnings.iter().any(|w| w.contains("no availability objective")));
    let gate = yaml(&bundle.rollout_gate);
    let metrics = gate["spec"]["metrics"].as_sequence().unwrap();
    assert_eq!(metrics.len(), 1);
    // no latency query: the latency metric is a dry run and flagged
    assert_eq!(gate["spec"]["dryRun"][0]["metricName"], metrics[0]["name"]);
    assert!(bundle.trace.flags.iter().any(|f| f.code == "latency-gate-advisory"));
}

#[test]
fn availability_only_gate_has_two_burn_metrics() {
    let model = model_with(&[("A", 0.99), ("B", 0.98)], true);
    let mut spec = spec_for("Series(A, B)", Some("0.95"), None);
    spec.policy.canary.max_failures = 2;
    let bundle = compile(&spec, &model, &CompileOptions::default()).unwrap();
    let gate = yaml(&bundle.rollout_gate);
    let metrics = gate["spec"]["metrics"].as_sequence().unwrap();
    assert_eq!(metrics.len(), 2);
    assert_eq!(metrics[0]["successCondition"], "result[0] < 14.4");
    assert_eq!(metrics[1]["successCondition"], "result[0] < 1");
    assert!(metrics.iter().all(|m| m["failureLimit"] == 2));
    assert_eq!(metrics[0]["provider"]["prometheus"]["query"], "emac:j:error_ratio_pessimistic:rate5m / 0.05");
    assert!(gate["spec"].get("dryRun").is_none());
}

#[test]
fn checkout_gate_latency_threshold() {
    let (spec, model) = checkout();
    let bundle = compile(&spec, &model, &CompileOptions::default()).unwrap();
    let gate = yaml(&bundle.rollout_gate);
    let metrics = gate["spec"]["metrics"].as_sequence().unwrap();
    assert_eq!(metrics.len(), 3);
    let latency = &metrics[2];
    let threshold: f64 = latency["successCondition"]
        .as_str()
        .unwrap()
        .trim_start_matches("result[0] <= ")
        .parse()
        .unwrap();
    assert!(threshold <= 400.0);
    assert_eq!(threshold, bundle.trace.latency.conservative.upper_ms.min(400.0));
    assert_eq!(gate["spec"]["metrics"][0]["failureLimit"], 0);
}

#[test]
fn both_modes_emit_both_sli_sets() {
    let (spec, model) = checkout();
    let options = CompileOptions {
        modes: Some(ModeSelection::Both),
        ..CompileOptions::default()
    };
    let bundle = compile(&spec, &model, &options).unwrap();
    let groups = yaml(&bundle.recording_rules)["groups"].clone();
    let names: Vec<&str> = groups.as_sequence().unwrap().iter().map(|g| g["name"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        ["emac:checkout:sli:pessimistic", "emac:checkout:sli:optimistic", "emac:checkout:bounds:compiled"]
    );
    assert!(bundle.alerting_rules.contains("error_ratio_pessimistic"));
}

#[test]
fn whatif_reflexive_and_monotone() {
    let (spec, model) = checkout();
    let same = whatif(&spec, &model, &spec, &model).unwrap();
    assert_eq!(same.availability.lo.delta, 0.0);
    assert_eq!(same.availability.hi.delta, 0.0);
    assert_eq!(same.latency.upper.delta, 0.0);
    assert!(!same.verdict.changed);
    assert!(same.rank_changes.is_empty());
    assert!(same.nodes.iter().all(|n| n.lo.delta == 0.0 && n.hi.delta == 0.0));

    let mut wider = spec.clone();
    wider.expression = parse_expression("Series(Frontend, Cond(p_hit; Cache, Catalog), Timeout(300ms; Race(PayA, PayB), Queue))").unwrap();
    let report = whatif(&spec, &model, &wider, &model).unwrap();
    assert_eq!(report.timeouts.len(), 1);
    assert!(report.timeouts[0].q_lo.delta >= 0.0);
    assert!(report.timeouts[0].q_hi.delta >= 0.0);
    assert_eq!(report.timeouts[0].t_ms.delta, 100.0);

    let mut split = spec.clone();
    split.domains = DomainMap::new();
    let report = whatif(&spec, &model, &split, &model).unwrap();
    let race = report.nodes.iter().find(|n| n.path.to_string() == "$.2.0").unwrap();
    assert!(race.lo.delta >= 0.0);
    assert!((race.lo.b - (1.0 - 0.001 * 0.002)).abs() < 1e-15);
}

#[test]
fn whatif_sees_branch_and_verdict_changes() {
    let (spec, model) = checkout();
    let mut worse = model.clone();
    worse.branch_probs.insert("p_hit".into(), ProbEstimate::exact(0.0));
    worse.leaves.get_mut("Catalog").unwrap().availability = AvailabilityEvidence::Point(0.99);
    let report = whatif(&spec, &model, &spec, &worse).unwrap();
    assert!(report.availability.lo.delta < 0.0);
    assert!(report.verdict.changed);
    assert_eq!(report.dominant_b.as_deref(), Some("Catalog"));
}
