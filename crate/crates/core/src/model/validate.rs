use std::collections::BTreeMap;

use crate::diagnostics::{DiagCode, Diagnostic, Location};

use super::{merge_domains, EvidenceModel, JourneyExpr, JourneySpec, NodePath, ProbRef};

/// Size limits on journey trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_depth: usize,
    pub max_leaves: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_depth: 16,
            max_leaves: 20,
        }
    }
}

/// Structural checks on an expression alone: arity, `k`, literal
/// probabilities, timeouts, leaf uniqueness and size limits.
pub fn validate_expr(expr: &JourneyExpr, limits: Limits) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut first_seen: BTreeMap<&str, NodePath> = BTreeMap::new();
    expr.walk(|path, node| {
        let at = || Location::Node(path.clone());
        match node {
            JourneyExpr::Leaf(name) => {
                if let Some(prev) = first_seen.get(name.as_str()) {
                    out.push(Diagnostic::error(
                        DiagCode::DuplicateLeaf,
                        format!("leaf `{name}` already appears at {prev}; use distinct leaves in one domain for shared fate"),
                        at(),
                    ));
                } else {
                    first_seen.insert(name, path.clone());
                }
            }
            JourneyExpr::Series(c) | JourneyExpr::Parallel(c) | JourneyExpr::Race(c) => {
                if c.len() < 2 {
                    out.push(Diagnostic::error(
                        DiagCode::TooFewChildren,
                        format!("{} needs at least two children", node.operator()),
                        at(),
                    ));
                }
            }
            JourneyExpr::KofN { k, children } => {
                if children.len() < 2 {
                    out.push(Diagnostic::error(
                        DiagCode::TooFewChildren,
                        "KofN needs at least two children",
                        at(),
                    ));
                }
                if *k == 0 {
                    out.push(Diagnostic::error(DiagCode::InvalidK, "KofN needs k >= 1", at()));
                } else if *k > children.len() {
                    out.push(Diagnostic::error(
                        DiagCode::KExceedsN,
                        format!("KofN has k={k} but only {} children", children.len()),
                        at(),
                    ));
                }
            }
            JourneyExpr::Cond { p, .. } => {
                if let ProbRef::Literal(v) = p {
                    if !(0.0..=1.0).contains(v) {
                        out.push(Diagnostic::error(
                            DiagCode::ProbabilityRange,
                            format!("branch probability {v} is outside [0, 1]"),
                            Location::Node(path.prob()),
                        ));
                    }
                }
            }
            JourneyExpr::Timeout { t_ms, .. } => {
                if *t_ms == 0 {
                    out.push(Diagnostic::error(DiagCode::DurationRange, "timeout must be positive", at()));
                }
            }
        }
    });
    let depth = expr.depth();
    if depth > limits.max_depth {
        out.push(Diagnostic::error(
            DiagCode::DepthLimit,
            format!("tree depth {depth} exceeds the limit of {}", limits.max_depth),
            Location::Node(NodePath::root()),
        ));
    }
    let leaves = expr.leaf_count();
    if leaves > limits.max_leaves {
        out.push(Diagnostic::error(
            DiagCode::LeafLimit,
            format!("{leaves} leaves exceed the limit of {}", limits.max_leaves),
            Location::Node(NodePath::root()),
        ));
    }
    sort_diagnostics(&mut out);
    out
}

/// Checks a spec document on its own (no evidence model).
pub fn validate_spec_document(spec: &JourneySpec, limits: Limits) -> Vec<Diagnostic> {
    let mut out = validate_expr(&spec.expression, limits);
    out.extend(spec.objective.check());
    out.extend(spec.policy.check());
    out.extend(spec.domains.check("domains"));
    sort_diagnostics(&mut out);
    out
}

/// Full validation of a spec against an evidence model. Returns an empty
/// list when every invariant holds, every leaf binds and every named branch
/// probability resolves. Output order is deterministic: node diagnostics by
/// path, then document diagnostics by field.
pub fn validate_spec(spec: &JourneySpec, model: &EvidenceModel) -> Vec<Diagnostic> {
    validate_spec_with(spec, model, Limits::default())
}

pub fn validate_spec_with(spec: &JourneySpec, model: &EvidenceModel, limits: Limits) -> Vec<Diagnostic> {
    let mut out = validate_spec_document(spec, limits);
    out.extend(model.check());
    spec.expression.walk(|path, node| match node {
        JourneyExpr::Leaf(name) if model.leaf(name).is_none() => {
            out.push(Diagnostic::error(
                DiagCode::UnboundLeaf,
                format!("leaf `{name}` has no evidence in the model"),
                Location::Node(path.clone()),
            ));
        }
        JourneyExpr::Cond {
            p: ProbRef::Named(name),
            ..
        } if !model.branch_probs.contains_key(name) => {
            out.push(Diagnostic::error(
                DiagCode::UnresolvedProb,
                format!("branch probability `{name}` is not in the model"),
                Location::Node(path.prob()),
            ));
        }
        _ => {}
    });
    let merged = merge_domains(&spec.domains, &model.domains);
    out.extend(merged.check("domains(merged)"));
    sort_diagnostics(&mut out);
    out.dedup();
    out
}

fn sort_diagnostics(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| {
        let key = |d: &Diagnostic| match &d.location {
            Location::Node(p) => (0, Some(p.clone()), String::new()),
            Location::Span(s) => (1, None, format!("{:020}", s.start)),
            Location::Field(f) => (2, None, f.clone()),
            Location::None => (3, None, String::new()),
        };
        key(a).cmp(&key(b))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AvailabilityEvidence, LatencyEvidence, LeafEvidence, Objective, ProbEstimate};
    use rust_decimal::Decimal;

    fn leaf(name: &str) -> JourneyExpr {
        JourneyExpr::Leaf(name.to_string())
    }

    fn model_for(names: &[&str]) -> EvidenceModel {
        let mut model = EvidenceModel::default();
        for name in names {
            model.leaves.insert(
                name.to_string(),
                LeafEvidence {
                    availability: AvailabilityEvidence::Point(0.999),
                    latency: LatencyEvidence::new(vec![(100.0, 10)], 10, "1d"),
                    sli_query: None,
                },
            );
        }
        model
    }

    fn spec(expr: JourneyExpr) -> JourneySpec {
        JourneySpec::new(
            "j",
            expr,
            Objective {
                availability: Some(Decimal::new(999, 3)),
                latency: None,
            },
        )
    }

    #[test]
    fn unbound_leaf_is_the_only_diagnostic() {
        let expr = JourneyExpr::Race(vec![leaf("PayA"), leaf("PayC")]);
        let diags = validate_spec(&spec(expr), &model_for(&["PayA", "PayB"]));
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, DiagCode::UnboundLeaf);
        assert!(diags[0].message.contains("PayC"));
        assert_eq!(diags[0].location, Location::Node(NodePath::root().child(1)));
    }

    #[test]
    fn k_exceeding_n_is_reported_at_the_node() {
        let expr = JourneyExpr::KofN {
            k: 4,
            children: vec![leaf("A"), leaf("B"), leaf("C")],
        };
        let diags = validate_spec(&spec(expr), &model_for(&["A", "B", "C"]));
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, DiagCode::KExceedsN);
        assert_eq!(diags[0].location, Location::Node(NodePath::root()));
    }

    #[test]
    fn duplicates_limits_and_probs() {
        let expr = JourneyExpr::Series(vec![
            leaf("A"),
            JourneyExpr::Cond {
                p: ProbRef::Named("p_hit".into()),
                if_true: Box::new(leaf("A")),
                if_false: Box::new(leaf("B")),
            },
        ]);
        let mut model = model_for(&["A", "B"]);
        let diags = validate_spec(&spec(expr.clone()), &model);
        let codes: Vec<_> = diags.iter().map(|d| d.code).collect();
        assert_eq!(codes, [DiagCode::DuplicateLeaf, DiagCode::UnresolvedProb]);
        model.branch_probs.insert("p_hit".into(), ProbEstimate::exact(0.5));
        assert_eq!(validate_spec(&spec(expr), &model).len(), 1);

        let names: Vec<String> = (0..21).map(|i| format!("L{i}")).collect();
        let wide = JourneyExpr::Parallel(names.iter().map(|n| leaf(n)).collect());
        let diags = validate_expr(&wide, Limits::default());
        assert_eq!(diags[0].code, DiagCode::LeafLimit);

        let mut deep = leaf("X0");
        for i in 1..17 {
            deep = JourneyExpr::Series(vec![deep, leaf(&format!("X{i}"))]);
        }
        assert!(validate_expr(&deep, Limits::default())
            .iter()
            .any(|d| d.code == DiagCode::DepthLimit));
    }

    #[test]
    fn validation_is_pure() {
        let expr = JourneyExpr::Series(vec![leaf("Z"), leaf("Y"), leaf("Z")]);
        let s = spec(expr);
        let m = model_for(&["A"]);
        assert_eq!(validate_spec(&s, &m), validate_spec(&s, &m));
    }
}
