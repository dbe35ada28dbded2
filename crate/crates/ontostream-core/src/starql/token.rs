//! Tokenizer for the stream query language.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Var(String),
    IriRef(String),
    Number { value: f64, text: String },
    /// A number immediately followed by a time unit, already in ms.
    Duration(i64),
    Colon,
    Comma,
    Dot,
    Semicolon,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Eq,
    Neq,
    Lt,
    Gt,
    Le,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    ArrowRight,
    ArrowLeft,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub col: usize,
    /// Byte offset; lets the parser check token adjacency (qnames).
    pub offset: usize,
    pub len: usize,
}

impl Token {
    pub fn end(&self) -> usize {
        self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl core::fmt::Display for LexError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LexError {}

pub fn duration_to_ms(value: i64, unit: &str) -> Option<i64> {
    let factor = match unit {
        "ms" => 1,
        "sec" | "s" => 1_000,
        "min" => 60_000,
        "hour" | "h" => 3_600_000,
        "day" => 86_400_000,
        // A year is exactly 365 days so that set-back arithmetic is
        // deterministic.
        "year" => 31_536_000_000,
        _ => return None,
    };
    Some(value * factor)
}

/// Renders a millisecond duration in the largest unit that divides it.
pub fn format_duration_ms(ms: i64) -> String {
    for (unit, factor) in [
        ("year", 31_536_000_000i64),
        ("day", 86_400_000),
        ("hour", 3_600_000),
        ("min", 60_000),
        ("sec", 1_000),
    ] {
        if ms != 0 && ms % factor == 0 {
            return alloc::format!("{}{}", ms / factor, unit);
        }
    }
    alloc::format!("{ms}ms")
}

struct Cursor<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.bytes.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn error(&self, message: impl Into<String>) -> LexError {
        LexError { line: self.line, col: self.col, message: message.into() }
    }
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'-'
}

pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor { src, bytes: src.as_bytes(), pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        // Skip whitespace and # comments.
        loop {
            match cur.peek() {
                Some(b) if b.is_ascii_whitespace() => {
                    cur.bump();
                }
                Some(b'#') => {
                    while let Some(b) = cur.peek() {
                        if b == b'\n' {
                            break;
                        }
                        cur.bump();
                    }
                }
                _ => break,
            }
        }
        let Some(b) = cur.peek() else { break };
        let (line, col, offset) = (cur.line, cur.col, cur.pos);
        let mut push = |cur: &Cursor, kind: TokenKind| {
            out.push(Token { kind, line, col, offset, len: cur.pos - offset });
        };

        match b {
            b'{' => {
                cur.bump();
                push(&cur, TokenKind::LBrace);
            }
            b'}' => {
                cur.bump();
                push(&cur, TokenKind::RBrace);
            }
            b'(' => {
                cur.bump();
                push(&cur, TokenKind::LParen);
            }
            b')' => {
                cur.bump();
                push(&cur, TokenKind::RParen);
            }
            b'[' => {
                cur.bump();
                push(&cur, TokenKind::LBracket);
            }
            b']' => {
                cur.bump();
                push(&cur, TokenKind::RBracket);
            }
            b',' => {
                cur.bump();
                push(&cur, TokenKind::Comma);
            }
            b'.' => {
                cur.bump();
                push(&cur, TokenKind::Dot);
            }
            b';' => {
                cur.bump();
                push(&cur, TokenKind::Semicolon);
            }
            b':' => {
                cur.bump();
                push(&cur, TokenKind::Colon);
            }
            b'=' => {
                cur.bump();
                push(&cur, TokenKind::Eq);
            }
            b'!' => {
                cur.bump();
                if cur.peek() == Some(b'=') {
                    cur.bump();
                    push(&cur, TokenKind::Neq);
                } else {
                    return Err(cur.error("expected `=` after `!`"));
                }
            }
            b'*' => {
                cur.bump();
                push(&cur, TokenKind::Star);
            }
            b'/' => {
                cur.bump();
                push(&cur, TokenKind::Slash);
            }
            b'+' => {
                cur.bump();
                push(&cur, TokenKind::Plus);
            }
            b'-' => {
                cur.bump();
                if cur.peek() == Some(b'>') {
                    cur.bump();
                    push(&cur, TokenKind::ArrowRight);
                } else {
                    push(&cur, TokenKind::Minus);
                }
            }
            b'>' => {
                cur.bump();
                if cur.peek() == Some(b'=') {
                    cur.bump();
                    push(&cur, TokenKind::Ge);
                } else {
                    push(&cur, TokenKind::Gt);
                }
            }
            b'<' => {
                // `<-`, `<=`, an IRI reference, or plain `<`.
                if cur.peek2() == Some(b'-') {
                    cur.bump();
                    cur.bump();
                    push(&cur, TokenKind::ArrowLeft);
                } else if cur.peek2() == Some(b'=') {
                    cur.bump();
                    cur.bump();
                    push(&cur, TokenKind::Le);
                } else if looks_like_iri(&cur) {
                    cur.bump();
                    let start = cur.pos;
                    while let Some(c) = cur.peek() {
                        if c == b'>' {
                            break;
                        }
                        cur.bump();
                    }
                    let iri = cur.src[start..cur.pos].to_string();
                    if cur.peek() != Some(b'>') {
                        return Err(cur.error("unterminated IRI reference"));
                    }
                    cur.bump();
                    push(&cur, TokenKind::IriRef(iri));
                } else {
                    cur.bump();
                    push(&cur, TokenKind::Lt);
                }
            }
            b'?' => {
                cur.bump();
                let start = cur.pos;
                while let Some(c) = cur.peek() {
                    if !is_ident_continue(c) {
                        break;
                    }
                    cur.bump();
                }
                if cur.pos == start {
                    return Err(cur.error("`?` must be followed by a variable name"));
                }
                let name = cur.src[start..cur.pos].to_string();
                push(&cur, TokenKind::Var(name));
            }
            b if b.is_ascii_digit() => {
                let start = cur.pos;
                while let Some(c) = cur.peek() {
                    if !c.is_ascii_digit() {
                        break;
                    }
                    cur.bump();
                }
                let mut is_float = false;
                if cur.peek() == Some(b'.') && cur.peek2().map(|c| c.is_ascii_digit()).unwrap_or(false) {
                    is_float = true;
                    cur.bump();
                    while let Some(c) = cur.peek() {
                        if !c.is_ascii_digit() {
                            break;
                        }
                        cur.bump();
                    }
                }
                // A unit suffix turns the number into a duration.
                if !is_float && cur.peek().map(is_ident_start).unwrap_or(false) {
                    let unit_start = cur.pos;
                    while let Some(c) = cur.peek() {
                        if !is_ident_continue(c) {
                            break;
                        }
                        cur.bump();
                    }
                    let value: i64 = cur.src[start..unit_start]
                        .parse()
                        .map_err(|_| cur.error("number too large"))?;
                    let unit = &cur.src[unit_start..cur.pos];
                    let ms = duration_to_ms(value, unit)
                        .ok_or_else(|| cur.error(alloc::format!("unknown time unit `{unit}`")))?;
                    push(&cur, TokenKind::Duration(ms));
                } else {
                    let text = cur.src[start..cur.pos].to_string();
                    let value: f64 =
                        text.parse().map_err(|_| cur.error("malformed number"))?;
                    push(&cur, TokenKind::Number { value, text });
                }
            }
            b if is_ident_start(b) => {
                let start = cur.pos;
                while let Some(c) = cur.peek() {
                    if !is_ident_continue(c) {
                        break;
                    }
                    cur.bump();
                }
                let name = cur.src[start..cur.pos].to_string();
                push(&cur, TokenKind::Ident(name));
            }
            other => {
                return Err(cur.error(alloc::format!("unexpected character `{}`", other as char)));
            }
        }
    }
    Ok(out)
}

/// `<` starts an IRI when a `>` appears before any whitespace.
fn looks_like_iri(cur: &Cursor) -> bool {
    let mut i = cur.pos + 1;
    while let Some(&b) = cur.bytes.get(i) {
        if b == b'>' {
            return i > cur.pos + 1;
        }
        if b.is_ascii_whitespace() {
            return false;
        }
        i += 1;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations_and_numbers() {
        let toks = lex("1min 0.75 1year 15sec 12").unwrap();
        let kinds: Vec<&TokenKind> = toks.iter().map(|t| &t.kind).collect();
        assert_eq!(
            kinds,
            [
                &TokenKind::Duration(60_000),
                &TokenKind::Number { value: 0.75, text: "0.75".into() },
                &TokenKind::Duration(31_536_000_000),
                &TokenKind::Duration(15_000),
                &TokenKind::Number { value: 12.0, text: "12".into() },
            ]
        );
    }

    #[test]
    fn window_arrows() {
        let toks = lex("1year <-[NOW - 1min, NOW]-> 1sec").unwrap();
        assert!(toks.iter().any(|t| t.kind == TokenKind::ArrowLeft));
        assert!(toks.iter().any(|t| t.kind == TokenKind::ArrowRight));
        assert!(toks.iter().any(|t| matches!(t.kind, TokenKind::Ident(ref s) if s == "NOW")));
    }

    #[test]
    fn iri_vs_comparison() {
        let toks = lex("<http://example.org/x> < 3").unwrap();
        assert!(matches!(toks[0].kind, TokenKind::IriRef(_)));
        assert_eq!(toks[1].kind, TokenKind::Lt);
    }

    #[test]
    fn unknown_unit_is_reported_with_position() {
        let err = lex("FREQUENCY = 3fortnight").unwrap_err();
        assert!(err.message.contains("fortnight"));
        assert_eq!(err.line, 1);
    }

    #[test]
    fn variables_and_qname_pieces() {
        let toks = lex("?sensor ex:hasValue ?y.").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Var("sensor".into()));
        assert_eq!(toks[1].kind, TokenKind::Ident("ex".into()));
        assert_eq!(toks[2].kind, TokenKind::Colon);
        assert_eq!(toks[3].kind, TokenKind::Ident("hasValue".into()));
        assert_eq!(toks.last().unwrap().kind, TokenKind::Dot);
    }
}
