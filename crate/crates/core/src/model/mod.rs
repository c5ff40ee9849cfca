//! Journey trees, evidence bindings, objectives and policy.

mod domains;
pub mod duration;
mod evidence;
mod expr;
mod path;
mod spec;
mod validate;

pub use domains::{merge_domains, DomainMap};
pub use evidence::{AvailabilityEvidence, Bucket, EvidenceModel, LatencyEvidence, LeafEvidence, ProbEstimate};
pub use expr::{is_identifier, ExprError, JourneyExpr, ProbRef};
pub use path::{NodePath, Segment};
pub use spec::{
    BoundMode, BurnWindow, CanaryPolicy, GovernancePolicy, JourneySpec, LatencyTarget, Objective,
};
pub use validate::{validate_expr, validate_spec, validate_spec_document, validate_spec_with, Limits};
