use crate::diagnostics::{DiagCode, Diagnostic, Location, SourceSpan};
use crate::error::{Error, Result};
use crate::model::duration::parse_duration;
use crate::model::{JourneyExpr, ProbRef};

use super::lexer::{tokenize, Tok, Token};
use super::Parsed;

/// Recursive-descent parser over the token stream, shared by the
/// expression and script entry points.
pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// Range errors and warnings collected while parsing continues.
    pub(crate) diags: Vec<Diagnostic>,
}

type Step<T> = std::result::Result<T, Diagnostic>;

fn syntax(message: String, span: SourceSpan) -> Diagnostic {
    Diagnostic::error(DiagCode::Syntax, message, Location::Span(span))
}

impl Parser {
    pub(crate) fn new(text: &str) -> Step<Self> {
        Ok(Parser {
            tokens: tokenize(text)?,
            pos: 0,
            diags: Vec::new(),
        })
    }

    pub(crate) fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    pub(crate) fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    pub(crate) fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    pub(crate) fn eat(&mut self, want: &Tok) -> bool {
        if &self.peek().tok == want {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, want: Tok, context: &str) -> Step<Token> {
        if self.peek().tok == want {
            Ok(self.bump())
        } else {
            let found = self.peek();
            Err(syntax(
                format!("expected {} {context}, found {}", want.describe(), found.tok.describe()),
                found.span,
            ))
        }
    }

    pub(crate) fn unexpected(&self, wanted: &str) -> Diagnostic {
        let found = self.peek();
        syntax(format!("expected {wanted}, found {}", found.tok.describe()), found.span)
    }

    pub(crate) fn expr(&mut self) -> Step<JourneyExpr> {
        let token = self.bump();
        let name = match token.tok {
            Tok::Ident(name) => name,
            other => {
                return Err(syntax(
                    format!("expected an operator or leaf name, found {}", other.describe()),
                    token.span,
                ))
            }
        };
        let is_op = matches!(
            name.as_str(),
            "Series" | "Parallel" | "Cond" | "Race" | "KofN" | "Timeout"
        );
        if !is_op || self.peek().tok != Tok::LParen {
            return Ok(JourneyExpr::Leaf(name));
        }
        self.bump();
        let node = match name.as_str() {
            "Series" => JourneyExpr::Series(self.children(&name)?),
            "Parallel" => JourneyExpr::Parallel(self.children(&name)?),
            "Race" => JourneyExpr::Race(self.children(&name)?),
            "KofN" => {
                let k = self.k_param()?;
                self.expect(Tok::Semi, "after KofN's k")?;
                let children = self.children(&name)?;
                let n = children.len();
                if k.0 == 0 {
                    self.diags.push(Diagnostic::error(
                        DiagCode::InvalidK,
                        "KofN needs k >= 1",
                        Location::Span(k.1),
                    ));
                } else if k.0 > n {
                    self.diags.push(Diagnostic::error(
                        DiagCode::KExceedsN,
                        format!("KofN has k={} but only {n} children", k.0),
                        Location::Span(k.1),
                    ));
                }
                JourneyExpr::KofN { k: k.0, children }
            }
            "Cond" => {
                let p = self.prob()?;
                self.expect(Tok::Semi, "after Cond's probability")?;
                let if_true = self.expr()?;
                self.expect(Tok::Comma, "between Cond branches")?;
                let if_false = self.expr()?;
                JourneyExpr::Cond {
                    p,
                    if_true: Box::new(if_true),
                    if_false: Box::new(if_false),
                }
            }
            "Timeout" => {
                let t_ms = self.timeout_duration()?;
                self.expect(Tok::Semi, "after Timeout's duration")?;
                let body = self.expr()?;
                self.expect(Tok::Comma, "between Timeout body and fallback")?;
                let fallback = self.expr()?;
                JourneyExpr::Timeout {
                    t_ms,
                    body: Box::new(body),
                    fallback: Box::new(fallback),
                }
            }
            _ => unreachable!("operator keywords matched above"),
        };
        self.expect(Tok::RParen, &format!("to close {name}"))?;
        Ok(node)
    }

    fn children(&mut self, op: &str) -> Step<Vec<JourneyExpr>> {
        let mut out = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            out.push(self.expr()?);
        }
        if out.len() < 2 {
            let span = self.peek().span;
            return Err(syntax(format!("{op} needs at least two children"), span));
        }
        Ok(out)
    }

    fn k_param(&mut self) -> Step<(usize, SourceSpan)> {
        let token = self.bump();
        match &token.tok {
            Tok::Number(text) if text.chars().all(|c| c.is_ascii_digit()) => text
                .parse()
                .map(|k| (k, token.span))
                .map_err(|_| syntax(format!("k `{text}` is too large"), token.span)),
            other => Err(syntax(
                format!("expected an integer k, found {}", other.describe()),
                token.span,
            )),
        }
    }

    fn prob(&mut self) -> Step<ProbRef> {
        let token = self.bump();
        match token.tok {
            Tok::Ident(name) => Ok(ProbRef::Named(name)),
            Tok::Number(text) => {
                let p: f64 = text
                    .parse()
                    .map_err(|_| syntax(format!("invalid probability `{text}`"), token.span))?;
                if !(0.0..=1.0).contains(&p) {
                    self.diags.push(Diagnostic::error(
                        DiagCode::ProbabilityRange,
                        format!("branch probability {text} is outside [0, 1]"),
                        Location::Span(token.span),
                    ));
                }
                Ok(ProbRef::Literal(p))
            }
            other => Err(syntax(
                format!("expected a probability or a name, found {}", other.describe()),
                token.span,
            )),
        }
    }

    /// `<decimal>ms` or `<decimal>s`, normalized to whole milliseconds.
    fn timeout_duration(&mut self) -> Step<u64> {
        let token = self.bump();
        let text = match &token.tok {
            Tok::Quantity(text) if text.ends_with("ms") || text.ends_with('s') => text.clone(),
            other => {
                return Err(syntax(
                    format!("expected a duration such as `200ms` or `1.5s`, found {}", other.describe()),
                    token.span,
                ))
            }
        };
        let unit_ok = text.ends_with("ms") || !text[..text.len() - 1].ends_with(|c: char| c.is_ascii_alphabetic());
        let parsed = parse_duration(&text).filter(|_| unit_ok).ok_or_else(|| {
            syntax(format!("invalid duration `{text}`; use ms or s"), token.span)
        })?;
        if parsed.ms == 0 {
            self.diags.push(Diagnostic::error(
                DiagCode::DurationRange,
                format!("timeout `{text}` must be at least 1ms"),
                Location::Span(token.span),
            ));
        } else if parsed.rounded {
            self.diags.push(Diagnostic::warning(
                DiagCode::DurationRounded,
                format!("timeout `{text}` rounded to {}ms", parsed.ms),
                Location::Span(token.span),
            ));
        }
        Ok(parsed.ms)
    }

    /// Splits collected diagnostics into a failure or the warnings to keep.
    pub(crate) fn finish<T>(self, value: T) -> Result<Parsed<T>> {
        if self.diags.iter().any(Diagnostic::is_error) {
            return Err(Error::Parse(self.diags));
        }
        Ok(Parsed {
            value,
            warnings: self.diags,
        })
    }
}

/// Parses a journey expression. Warnings (inexact duration conversion) are
/// returned alongside the tree; syntax and range errors fail the parse.
pub fn parse_expression_with_warnings(text: &str) -> Result<Parsed<JourneyExpr>> {
    let mut parser = Parser::new(text).map_err(|d| Error::Parse(vec![d]))?;
    let expr = parser.expr().map_err(|d| Error::Parse(vec![d]))?;
    parser.eat(&Tok::Dot);
    if parser.peek().tok != Tok::Eof {
        return Err(Error::Parse(vec![parser.unexpected("end of expression")]));
    }
    parser.finish(expr)
}

pub fn parse_expression(text: &str) -> Result<JourneyExpr> {
    parse_expression_with_warnings(text).map(|p| p.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodePath;

    const CHECKOUT: &str =
        "Series(Frontend, Cond(p_hit; Cache, Catalog), Timeout(200ms; Race(PayA, PayB), Queue))";

    fn first_error(text: &str) -> Diagnostic {
        parse_expression(text).unwrap_err().diagnostics()[0].clone()
    }

    #[test]
    fn parses_checkout_listing() {
        let expr = parse_expression(CHECKOUT).unwrap();
        assert_eq!(expr.leaf_count(), 6);
        assert_eq!(expr.operator_count(), 4);
        assert_eq!(expr.prob_names(), ["p_hit"]);
        match expr.at(&NodePath::root().child(2)).unwrap() {
            JourneyExpr::Timeout { t_ms, .. } => assert_eq!(*t_ms, 200),
            other => panic!("expected Timeout, got {other:?}"),
        }
        assert_eq!(expr.to_string(), CHECKOUT);
    }

    #[test]
    fn single_leaf_and_trailing_dot() {
        assert_eq!(parse_expression("Frontend").unwrap(), JourneyExpr::Leaf("Frontend".into()));
        assert_eq!(parse_expression("  Frontend .\n").unwrap(), JourneyExpr::Leaf("Frontend".into()));
    }

    #[test]
    fn whitespace_and_newlines_are_insignificant() {
        let spread = "Series(Frontend,\n  Cond(p_hit; Cache, Catalog),\n  Timeout(200ms; Race(PayA, PayB), Queue)).";
        assert_eq!(parse_expression(spread).unwrap(), parse_expression(CHECKOUT).unwrap());
    }

    #[test]
    fn probability_out_of_range() {
        let d = first_error("Cond(1.5; A, B)");
        assert_eq!(d.code, DiagCode::ProbabilityRange);
        assert_eq!(d.location, Location::Span(SourceSpan::new(1, 6, 5, 8)));
    }

    #[test]
    fn k_range_and_durations() {
        assert_eq!(first_error("KofN(4; A, B, C)").code, DiagCode::KExceedsN);
        assert_eq!(first_error("KofN(0; A, B)").code, DiagCode::InvalidK);
        assert_eq!(first_error("Timeout(0ms; A, B)").code, DiagCode::DurationRange);
        let parsed = parse_expression_with_warnings("Timeout(1.5s; A, B)").unwrap();
        assert!(parsed.warnings.is_empty());
        assert!(matches!(parsed.value, JourneyExpr::Timeout { t_ms: 1500, .. }));
        let parsed = parse_expression_with_warnings("Timeout(0.0004s; A, B)").unwrap_err();
        assert_eq!(parsed.diagnostics()[0].code, DiagCode::DurationRange);
        let parsed = parse_expression_with_warnings("Timeout(2.6ms; A, B)").unwrap();
        assert_eq!(parsed.warnings[0].code, DiagCode::DurationRounded);
        assert!(matches!(parsed.value, JourneyExpr::Timeout { t_ms: 3, .. }));
        assert_eq!(first_error("Timeout(5m; A, B)").code, DiagCode::Syntax);
    }

    #[test]
    fn syntax_errors_carry_spans_inside_input() {
        for text in ["Series(A)", "Series(A, B", "Cond(p; A B)", "Race(, A)", "A B", "KofN(x; A, B)", ""] {
            let d = first_error(text);
            assert_eq!(d.code, DiagCode::Syntax, "{text}");
            match d.location {
                Location::Span(span) => assert!(span.end <= text.len(), "{text}"),
                other => panic!("no span for {text}: {other:?}"),
            }
        }
    }
}
