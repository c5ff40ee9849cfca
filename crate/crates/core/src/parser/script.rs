use std::str::FromStr;

use rust_decimal::Decimal;

use crate::diagnostics::{DiagCode, Diagnostic, Location};
use crate::error::{Error, Result};
use crate::model::duration::parse_duration;
use crate::model::{JourneyExpr, LatencyTarget, Objective};

use super::expr::Parser;
use super::lexer::Tok;
use super::Parsed;

/// A journey written in script form:
///
/// ```text
/// checkout := Series(Frontend, ...).
/// objective: A >= 99.9
/// objective: p99 < 400ms
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub name: String,
    pub expression: JourneyExpr,
    /// Possibly empty; a warning is emitted when no objective line exists.
    pub objective: Objective,
}

pub fn parse_script(text: &str) -> Result<Parsed<Script>> {
    let mut parser = Parser::new(text).map_err(|d| Error::Parse(vec![d]))?;
    let fail = |d: Diagnostic| Error::Parse(vec![d]);
    let mut journey: Option<(String, JourneyExpr)> = None;
    let mut objective = Objective::default();

    loop {
        let head = parser.peek().clone();
        match (&head.tok, parser.peek_at(1)) {
            (Tok::Eof, _) => break,
            (Tok::Ident(kw), Tok::Colon) if kw == "objective" => {
                parser.bump();
                parser.bump();
                loop {
                    objective_clause(&mut parser, &mut objective).map_err(fail)?;
                    if !parser.eat(&Tok::Comma) {
                        break;
                    }
                }
                parser.eat(&Tok::Dot);
            }
            (Tok::Ident(name), Tok::Assign) => {
                let name = name.clone();
                parser.bump();
                parser.bump();
                let expr = parser.expr().map_err(fail)?;
                parser.eat(&Tok::Dot);
                if let Some((prev, _)) = &journey {
                    parser.diags.push(Diagnostic::error(
                        DiagCode::DuplicateAssignment,
                        format!("`{name}` assigned after journey `{prev}`; a script defines one journey"),
                        Location::Span(head.span),
                    ));
                } else {
                    journey = Some((name, expr));
                }
            }
            _ => return Err(fail(parser.unexpected("`name := expr` or `objective:`"))),
        }
    }

    let Some((name, expression)) = journey else {
        return Err(fail(Diagnostic::error(
            DiagCode::Syntax,
            "script has no `name := expr` assignment",
            Location::None,
        )));
    };
    if objective.is_empty() {
        parser.diags.push(Diagnostic::warning(
            DiagCode::MissingObjective,
            format!("journey `{name}` has no objective line"),
            Location::None,
        ));
    }
    parser.finish(Script {
        name,
        expression,
        objective,
    })
}

/// `A >= <percent>[%]` or `p<digits> < <duration>`.
fn objective_clause(parser: &mut Parser, objective: &mut Objective) -> std::result::Result<(), Diagnostic> {
    let head = parser.bump();
    let Tok::Ident(subject) = &head.tok else {
        return Err(Diagnostic::error(
            DiagCode::Syntax,
            format!("expected `A` or a percentile such as `p99`, found {}", head.tok.describe()),
            Location::Span(head.span),
        ));
    };
    if subject == "A" {
        parser.expect(Tok::Ge, "in availability objective")?;
        let value = parser.bump();
        let Tok::Number(text) = &value.tok else {
            return Err(Diagnostic::error(
                DiagCode::Syntax,
                format!("expected a percentage, found {}", value.tok.describe()),
                Location::Span(value.span),
            ));
        };
        parser.eat(&Tok::Percent);
        let percent = Decimal::from_str(text).map_err(|_| {
            Diagnostic::error(DiagCode::Syntax, format!("invalid percentage `{text}`"), Location::Span(value.span))
        })?;
        if objective.availability.is_some() {
            parser.diags.push(Diagnostic::error(
                DiagCode::DuplicateAssignment,
                "availability objective given twice",
                Location::Span(head.span),
            ));
        }
        if percent <= Decimal::ZERO || percent >= Decimal::ONE_HUNDRED {
            parser.diags.push(Diagnostic::error(
                DiagCode::ObjectiveRange,
                format!("availability objective {text}% must lie strictly between 0 and 100"),
                Location::Span(value.span),
            ));
        }
        objective.availability = Some(Objective::from_percent(percent));
        return Ok(());
    }
    let percentile = percentile_from_name(subject).ok_or_else(|| {
        Diagnostic::error(
            DiagCode::Syntax,
            format!("unknown objective subject `{subject}`; use `A` or `p<digits>`"),
            Location::Span(head.span),
        )
    })?;
    parser.expect(Tok::Lt, "in latency objective")?;
    let value = parser.bump();
    let threshold = match &value.tok {
        Tok::Quantity(text) => parse_duration(text).map(|d| d.ms as f64),
        _ => None,
    }
    .ok_or_else(|| {
        Diagnostic::error(
            DiagCode::Syntax,
            format!("expected a duration such as `400ms`, found {}", value.tok.describe()),
            Location::Span(value.span),
        )
    })?;
    if objective.latency.is_some() {
        parser.diags.push(Diagnostic::error(
            DiagCode::DuplicateAssignment,
            "latency objective given twice",
            Location::Span(head.span),
        ));
    }
    objective.latency = Some(LatencyTarget {
        percentile,
        threshold_ms: threshold,
    });
    Ok(())
}

/// `p99` → 0.99, `p999` → 0.999, `p5` → 0.05.
fn percentile_from_name(name: &str) -> Option<f64> {
    let digits = name.strip_prefix('p')?;
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let text = if digits.len() <= 2 {
        format!("0.{digits:0>2}")
    } else {
        format!("0.{digits}")
    };
    text.parse().ok().filter(|p: &f64| *p > 0.0 && *p < 1.0)
}
