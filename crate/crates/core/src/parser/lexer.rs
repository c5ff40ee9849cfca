use crate::diagnostics::{DiagCode, Diagnostic, Location, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    /// Bare decimal literal, kept as text for exact conversion.
    Number(String),
    /// Decimal immediately followed by a unit suffix, e.g. `200ms`.
    Quantity(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Dot,
    Assign,
    Colon,
    Ge,
    Lt,
    Percent,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) | Tok::Quantity(s) => format!("`{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Assign => "`:=`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Percent => "`%`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let (sl, sc) = (line, col);
        if c == b'\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(text[start..i].to_string())
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                    i += 1;
                }
                Tok::Quantity(text[start..i].to_string())
            } else {
                Tok::Number(text[start..i].to_string())
            }
        } else {
            let two = bytes.get(i + 1).copied();
            let (tok, len) = match (c, two) {
                (b':', Some(b'=')) => (Tok::Assign, 2),
                (b'>', Some(b'=')) => (Tok::Ge, 2),
                (b'(', _) => (Tok::LParen, 1),
                (b')', _) => (Tok::RParen, 1),
                (b',', _) => (Tok::Comma, 1),
                (b';', _) => (Tok::Semi, 1),
                (b'.', _) => (Tok::Dot, 1),
                (b':', _) => (Tok::Colon, 1),
                (b'<', _) => (Tok::Lt, 1),
                (b'%', _) => (Tok::Percent, 1),
                _ => {
                    let ch = text[i..].chars().next().unwrap_or('?');
                    let end = i + ch.len_utf8();
                    return Err(Diagnostic::error(
                        DiagCode::Syntax,
                        format!("unexpected character `{ch}`"),
                        Location::Span(SourceSpan::new(sl, sc, start, end)),
                    ));
                }
            };
            i += len;
            tok
        };
        col += (i - start) as u32;
        out.push(Token {
            tok,
            span: SourceSpan::new(sl, sc, start, i),
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        span: SourceSpan::new(line, col, text.len(), text.len()),
    });
    Ok(out)
}
