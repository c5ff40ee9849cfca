use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::NodePath;

/// Branch probability of a conditional: a literal or a name bound in the
/// evidence model's `branchProbs`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbRef {
    Literal(f64),
    Named(String),
}

impl fmt::Display for ProbRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbRef::Literal(p) => write!(f, "{p}"),
            ProbRef::Named(name) => f.write_str(name),
        }
    }
}

/// Journey operator tree. Leaves name atomic components bound in the
/// evidence model.
#[derive(Debug, Clone, PartialEq)]
pub enum JourneyExpr {
    Leaf(String),
    Series(Vec<JourneyExpr>),
    Parallel(Vec<JourneyExpr>),
    Cond {
        p: ProbRef,
        if_true: Box<JourneyExpr>,
        if_false: Box<JourneyExpr>,
    },
    Race(Vec<JourneyExpr>),
    KofN {
        k: usize,
        children: Vec<JourneyExpr>,
    },
    Timeout {
        t_ms: u64,
        body: Box<JourneyExpr>,
        fallback: Box<JourneyExpr>,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("{op} needs at least two children, got {got}")]
    TooFewChildren { op: &'static str, got: usize },
    #[error("KofN requires 1 <= k <= n, got k={k} with n={n}")]
    BadK { k: usize, n: usize },
    #[error("branch probability {0} is outside [0, 1]")]
    ProbabilityRange(f64),
    #[error("timeout must be positive")]
    ZeroTimeout,
    #[error("leaf name `{0}` is not an identifier")]
    BadIdentifier(String),
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn at_least_two(op: &'static str, children: &[JourneyExpr]) -> Result<(), ExprError> {
    if children.len() < 2 {
        return Err(ExprError::TooFewChildren {
            op,
            got: children.len(),
        });
    }
    Ok(())
}

impl JourneyExpr {
    pub fn leaf(name: impl Into<String>) -> Result<Self, ExprError> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(ExprError::BadIdentifier(name));
        }
        Ok(JourneyExpr::Leaf(name))
    }

    pub fn series(children: Vec<JourneyExpr>) -> Result<Self, ExprError> {
        at_least_two("Series", &children)?;
        Ok(JourneyExpr::Series(children))
    }

    pub fn parallel(children: Vec<JourneyExpr>) -> Result<Self, ExprError> {
        at_least_two("Parallel", &children)?;
        Ok(JourneyExpr::Parallel(children))
    }

    pub fn race(children: Vec<JourneyExpr>) -> Result<Self, ExprError> {
        at_least_two("Race", &children)?;
        Ok(JourneyExpr::Race(children))
    }

    pub fn k_of_n(k: usize, children: Vec<JourneyExpr>) -> Result<Self, ExprError> {
        at_least_two("KofN", &children)?;
        if k == 0 || k > children.len() {
            return Err(ExprError::BadK {
                k,
                n: children.len(),
            });
        }
        Ok(JourneyExpr::KofN { k, children })
    }

    pub fn cond(p: ProbRef, if_true: JourneyExpr, if_false: JourneyExpr) -> Result<Self, ExprError> {
        if let ProbRef::Literal(v) = p {
            if !(0.0..=1.0).contains(&v) {
                return Err(ExprError::ProbabilityRange(v));
            }
        }
        Ok(JourneyExpr::Cond {
            p,
            if_true: Box::new(if_true),
            if_false: Box::new(if_false),
        })
    }

    pub fn timeout(t_ms: u64, body: JourneyExpr, fallback: JourneyExpr) -> Result<Self, ExprError> {
        if t_ms == 0 {
            return Err(ExprError::ZeroTimeout);
        }
        Ok(JourneyExpr::Timeout {
            t_ms,
            body: Box::new(body),
            fallback: Box::new(fallback),
        })
    }

    pub fn operator(&self) -> &'static str {
        match self {
            JourneyExpr::Leaf(_) => "Leaf",
            JourneyExpr::Series(_) => "Series",
            JourneyExpr::Parallel(_) => "Parallel",
            JourneyExpr::Cond { .. } => "Cond",
            JourneyExpr::Race(_) => "Race",
            JourneyExpr::KofN { .. } => "KofN",
            JourneyExpr::Timeout { .. } => "Timeout",
        }
    }

    /// Direct sub-expressions in path order.
    pub fn children(&self) -> Vec<&JourneyExpr> {
        match self {
            JourneyExpr::Leaf(_) => Vec::new(),
            JourneyExpr::Series(c)
            | JourneyExpr::Parallel(c)
            | JourneyExpr::Race(c)
            | JourneyExpr::KofN { children: c, .. } => c.iter().collect(),
            JourneyExpr::Cond {
                if_true, if_false, ..
            } => vec![if_true, if_false],
            JourneyExpr::Timeout { body, fallback, .. } => vec![body, fallback],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, JourneyExpr::Leaf(_))
    }

    /// Pre-order traversal with node paths.
    pub fn walk<'a>(&'a self, mut visit: impl FnMut(&NodePath, &'a JourneyExpr)) {
        fn go<'a>(
            node: &'a JourneyExpr,
            path: &NodePath,
            visit: &mut dyn FnMut(&NodePath, &'a JourneyExpr),
        ) {
            visit(path, node);
            for (i, child) in node.children().into_iter().enumerate() {
                go(child, &path.child(i), visit);
            }
        }
        go(self, &NodePath::root(), &mut visit);
    }

    /// Leaf names in pre-order, duplicates included.
    pub fn leaf_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(|_, node| {
            if let JourneyExpr::Leaf(name) = node {
                out.push(name.as_str());
            }
        });
        out
    }

    pub fn leaf_set(&self) -> BTreeSet<&str> {
        self.leaf_names().into_iter().collect()
    }

    /// Named branch-probability references in pre-order.
    pub fn prob_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(|_, node| {
            if let JourneyExpr::Cond {
                p: ProbRef::Named(name),
                ..
            } = node
            {
                out.push(name.as_str());
            }
        });
        out
    }

    /// Number of levels; a lone leaf has depth 1.
    pub fn depth(&self) -> usize {
        1 + self.children().into_iter().map(JourneyExpr::depth).max().unwrap_or(0)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_names().len()
    }

    pub fn operator_count(&self) -> usize {
        let mut n = 0;
        self.walk(|_, node| {
            if !node.is_leaf() {
                n += 1;
            }
        });
        n
    }

    /// Sub-expression at `path`, if it names an expression node.
    pub fn at(&self, path: &NodePath) -> Option<&JourneyExpr> {
        let mut node = self;
        for seg in path.segments() {
            match seg {
                super::Segment::Child(i) => node = *node.children().get(*i as usize)?,
                super::Segment::Prob => return None,
            }
        }
        Some(node)
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, children: &[JourneyExpr]) -> fmt::Result {
    for (i, child) in children.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{child}")?;
    }
    Ok(())
}

/// Canonical single-line form accepted by the expression parser.
impl fmt::Display for JourneyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JourneyExpr::Leaf(name) => f.write_str(name),
            JourneyExpr::Series(c) => {
                f.write_str("Series(")?;
                write_list(f, c)?;
                f.write_str(")")
            }
            JourneyExpr::Parallel(c) => {
                f.write_str("Parallel(")?;
                write_list(f, c)?;
                f.write_str(")")
            }
            JourneyExpr::Race(c) => {
                f.write_str("Race(")?;
                write_list(f, c)?;
                f.write_str(")")
            }
            JourneyExpr::KofN { k, children } => {
                write!(f, "KofN({k}; ")?;
                write_list(f, children)?;
                f.write_str(")")
            }
            JourneyExpr::Cond {
                p,
                if_true,
                if_false,
            } => write!(f, "Cond({p}; {if_true}, {if_false})"),
            JourneyExpr::Timeout {
                t_ms,
                body,
                fallback,
            } => write!(f, "Timeout({t_ms}ms; {body}, {fallback})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(name: &str) -> JourneyExpr {
        JourneyExpr::leaf(name).unwrap()
    }

    #[test]
    fn constructors_reject_invariant_violations() {
        assert_eq!(
            JourneyExpr::series(vec![leaf("A")]),
            Err(ExprError::TooFewChildren { op: "Series", got: 1 })
        );
        assert_eq!(
            JourneyExpr::k_of_n(4, vec![leaf("A"), leaf("B"), leaf("C")]),
            Err(ExprError::BadK { k: 4, n: 3 })
        );
        assert_eq!(
            JourneyExpr::k_of_n(0, vec![leaf("A"), leaf("B")]),
            Err(ExprError::BadK { k: 0, n: 2 })
        );
        assert!(JourneyExpr::cond(ProbRef::Literal(1.5), leaf("A"), leaf("B")).is_err());
        assert_eq!(
            JourneyExpr::timeout(0, leaf("A"), leaf("B")),
            Err(ExprError::ZeroTimeout)
        );
        assert!(JourneyExpr::leaf("9lives").is_err());
    }

    #[test]
    fn walk_counts_and_display() {
        let expr = JourneyExpr::series(vec![
            leaf("Frontend"),
            JourneyExpr::cond(ProbRef::Named("p_hit".into()), leaf("Cache"), leaf("Catalog")).unwrap(),
            JourneyExpr::timeout(
                200,
                JourneyExpr::race(vec![leaf("PayA"), leaf("PayB")]).unwrap(),
                leaf("Queue"),
            )
            .unwrap(),
        ])
        .unwrap();
        assert_eq!(expr.leaf_count(), 6);
        assert_eq!(expr.operator_count(), 4);
        assert_eq!(expr.depth(), 4);
        assert_eq!(expr.prob_names(), ["p_hit"]);
        assert_eq!(
            expr.to_string(),
            "Series(Frontend, Cond(p_hit; Cache, Catalog), Timeout(200ms; Race(PayA, PayB), Queue))"
        );
        let path = NodePath::root().child(2).child(0).child(1);
        assert_eq!(expr.at(&path), Some(&leaf("PayB")));
    }
}
