use thiserror::Error;

use crate::diagnostics::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Syntax or range errors in expression or script text.
    #[error("{}", render(.0))]
    Parse(Vec<Diagnostic>),
    /// Malformed or schema-violating document.
    #[error("{path}: {message}")]
    Document { path: String, message: String },
    #[error("unsupported emacVersion {found}, expected {expected}")]
    Version { found: String, expected: u32 },
    /// Spec/model validation failed.
    #[error("{}", render(.0))]
    Invalid(Vec<Diagnostic>),
    /// A computation would exceed a configured size limit.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("node {0} is not bound to evidence")]
    Unbound(String),
    #[error("artifact name `{0}` is emitted twice")]
    Collision(String),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn render(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

impl Error {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            Error::Parse(d) | Error::Invalid(d) => d,
            _ => &[],
        }
    }
}
