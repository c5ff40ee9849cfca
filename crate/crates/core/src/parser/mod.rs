//! Expression grammar, script form, and structured documents.

mod document;
mod expr;
mod lexer;
mod script;

pub use document::{
    load_model_document, load_spec_document, load_spec_document_with, spec_document_yaml, EMAC_VERSION,
};
pub use expr::{parse_expression, parse_expression_with_warnings};
pub use script::{parse_script, Script};

use crate::diagnostics::Diagnostic;

/// A successfully parsed value plus any non-fatal diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<Diagnostic>,
}
