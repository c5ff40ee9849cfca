//! Diagnostics reported by the parser, the document loaders and validation.

use std::fmt;

use serde::Serialize;

use crate::model::NodePath;

/// Location of a token or node in source text. Offsets are byte offsets,
/// lines and columns are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn new(line: u32, column: u32, start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        SourceSpan {
            line,
            column,
            start,
            end,
        }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn to(self, other: SourceSpan) -> SourceSpan {
        SourceSpan {
            line: self.line,
            column: self.column,
            start: self.start,
            end: other.end.max(self.end),
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagCode {
    Syntax,
    ProbabilityRange,
    InvalidK,
    KExceedsN,
    TooFewChildren,
    DurationRange,
    DurationRounded,
    DuplicateLeaf,
    DepthLimit,
    LeafLimit,
    UnboundLeaf,
    UnresolvedProb,
    DomainOverlap,
    MissingObjective,
    ObjectiveRange,
    PolicyInvalid,
    EvidenceInvalid,
    DuplicateAssignment,
    UnknownField,
}

impl DiagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::Syntax => "syntax",
            DiagCode::ProbabilityRange => "probability-range",
            DiagCode::InvalidK => "invalid-k",
            DiagCode::KExceedsN => "k-exceeds-n",
            DiagCode::TooFewChildren => "too-few-children",
            DiagCode::DurationRange => "duration-range",
            DiagCode::DurationRounded => "duration-rounded",
            DiagCode::DuplicateLeaf => "duplicate-leaf",
            DiagCode::DepthLimit => "depth-limit",
            DiagCode::LeafLimit => "leaf-limit",
            DiagCode::UnboundLeaf => "unbound-leaf",
            DiagCode::UnresolvedProb => "unresolved-prob",
            DiagCode::DomainOverlap => "domain-overlap",
            DiagCode::MissingObjective => "missing-objective",
            DiagCode::ObjectiveRange => "objective-range",
            DiagCode::PolicyInvalid => "policy-invalid",
            DiagCode::EvidenceInvalid => "evidence-invalid",
            DiagCode::DuplicateAssignment => "duplicate-assignment",
            DiagCode::UnknownField => "unknown-field",
        }
    }
}

/// Where a diagnostic points: a span in parsed text, a node of the journey
/// tree, or a field path inside a structured document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Location {
    Span(SourceSpan),
    Node(NodePath),
    Field(String),
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagCode,
    pub message: String,
    pub location: Location,
}

impl Diagnostic {
    pub fn error(code: DiagCode, message: impl Into<String>, location: Location) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            location,
        }
    }

    pub fn warning(code: DiagCode, message: impl Into<String>, location: Location) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code,
            message: message.into(),
            location,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}]", self.code.as_str())?;
        match &self.location {
            Location::Span(span) => write!(f, " at {span}")?,
            Location::Node(path) => write!(f, " at {path}")?,
            Location::Field(field) => write!(f, " at {field}")?,
            Location::None => {}
        }
        write!(f, ": {}", self.message)
    }
}

/// True when any diagnostic in the slice is an error.
pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}
