//! Recursive-descent parser for the stream query language.
//!
//! The clause order is fixed: prefixes, an optional pulse declaration,
//! `CREATE STREAM ... AS`, the output form, optional static sources and
//! WHERE pattern, the stream sources with window specifications, then
//! `USING PULSE`, `SEQUENCE BY`, and `HAVING`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use super::token::{lex, LexError, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl core::fmt::Display for ParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParseError {}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        ParseError { line: e.line, col: e.col, message: e.message }
    }
}

pub fn parse(src: &str) -> Result<StarqlQuery, ParseError> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, pos: 0 };
    p.parse_query()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.tokens.get(self.pos + n)
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        match self.peek() {
            Some(t) => ParseError { line: t.line, col: t.col, message: message.into() },
            None => {
                let (line, col) = self
                    .tokens
                    .last()
                    .map(|t| (t.line, t.col))
                    .unwrap_or((1, 1));
                ParseError { line, col, message: message.into() }
            }
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Ident(name), .. }) if name == kw)
    }

    fn is_kw_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Some(Token { kind: TokenKind::Ident(name), .. }) if name == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error_here(format!("expected `{kw}`")))
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().map(|t| &t.kind == kind).unwrap_or(false) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> Result<(), ParseError> {
        if self.eat(kind) {
            Ok(())
        } else {
            Err(self.error_here(format!("expected {what}")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Token { kind: TokenKind::Ident(name), .. }) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => Err(self.error_here(format!("expected {what}"))),
        }
    }

    fn expect_duration(&mut self, what: &str) -> Result<i64, ParseError> {
        match self.peek() {
            Some(Token { kind: TokenKind::Duration(ms), .. }) => {
                let ms = *ms;
                self.pos += 1;
                Ok(ms)
            }
            // A bare `0` is accepted where a duration is expected.
            Some(Token { kind: TokenKind::Number { value, .. }, .. }) if *value == 0.0 => {
                self.pos += 1;
                Ok(0)
            }
            _ => Err(self.error_here(format!("expected {what} (a duration like `1min`)"))),
        }
    }

    /// A name: a bare identifier, a qname `prefix:local` (adjacent tokens),
    /// `:local`, or an IRI reference. Qnames resolve to their local part.
    fn parse_name(&mut self) -> Result<String, ParseError> {
        match self.peek().cloned() {
            Some(Token { kind: TokenKind::IriRef(iri), .. }) => {
                self.pos += 1;
                let local = iri.rsplit(['/', '#']).next().unwrap_or(&iri).to_string();
                Ok(local)
            }
            Some(Token { kind: TokenKind::Colon, offset, len, .. }) => {
                self.pos += 1;
                match self.peek() {
                    Some(t2 @ Token { kind: TokenKind::Ident(local), .. })
                        if t2.offset == offset + len =>
                    {
                        let local = local.clone();
                        self.pos += 1;
                        Ok(local)
                    }
                    _ => Err(self.error_here("expected a name after `:`")),
                }
            }
            Some(t @ Token { kind: TokenKind::Ident(_), .. }) => {
                let TokenKind::Ident(first) = &t.kind else { unreachable!() };
                let first = first.clone();
                self.pos += 1;
                // prefix:local when the colon and local name are adjacent.
                if let Some(colon) = self.peek() {
                    if colon.kind == TokenKind::Colon && colon.offset == t.end() {
                        let colon_end = colon.end();
                        if let Some(local_tok) = self.peek_at(1) {
                            if let TokenKind::Ident(local) = &local_tok.kind {
                                if local_tok.offset == colon_end {
                                    let local = local.clone();
                                    self.pos += 2;
                                    return Ok(local);
                                }
                            }
                        }
                    }
                }
                Ok(first)
            }
            _ => Err(self.error_here("expected a name")),
        }
    }

    fn parse_query(&mut self) -> Result<StarqlQuery, ParseError> {
        let mut prefixes = Vec::new();
        while self.is_kw("PREFIX") {
            self.pos += 1;
            let prefix = match self.peek() {
                Some(Token { kind: TokenKind::Ident(name), .. }) => {
                    let name = name.clone();
                    self.pos += 1;
                    name
                }
                _ => String::new(),
            };
            self.expect(&TokenKind::Colon, "`:` in prefix declaration")?;
            let iri = match self.peek() {
                Some(Token { kind: TokenKind::IriRef(iri), .. }) => {
                    let iri = iri.clone();
                    self.pos += 1;
                    iri
                }
                _ => return Err(self.error_here("expected an IRI after the prefix")),
            };
            prefixes.push((prefix, iri));
        }

        let mut pulse = None;
        while self.is_kw("CREATE") && self.is_kw_at(1, "PULSE") {
            if pulse.is_some() {
                return Err(self.error_here("duplicate CREATE PULSE clause"));
            }
            self.pos += 2;
            let name = self.expect_ident("pulse name")?;
            self.expect_kw("WITH")?;
            self.expect_kw("START")?;
            self.expect(&TokenKind::Eq, "`=`")?;
            let start = if self.eat_kw("NOW") {
                TimeAnchor::Now
            } else {
                match self.peek() {
                    Some(Token { kind: TokenKind::Number { value, .. }, .. }) => {
                        let ms = *value as i64;
                        self.pos += 1;
                        TimeAnchor::AbsoluteMs(ms)
                    }
                    Some(Token { kind: TokenKind::Duration(ms), .. }) => {
                        let ms = *ms;
                        self.pos += 1;
                        TimeAnchor::AbsoluteMs(ms)
                    }
                    _ => return Err(self.error_here("expected NOW or a start time")),
                }
            };
            self.expect(&TokenKind::Comma, "`,`")?;
            self.expect_kw("FREQUENCY")?;
            self.expect(&TokenKind::Eq, "`=`")?;
            let frequency_ms = self.expect_duration("pulse frequency")?;
            pulse = Some(PulseDecl { name, start, frequency_ms });
        }

        self.expect_kw("CREATE")?;
        self.expect_kw("STREAM")?;
        let output_stream = self.expect_ident("output stream name")?;
        self.expect_kw("AS")?;

        let output = if self.eat_kw("CONSTRUCT") {
            self.expect_kw("GRAPH")?;
            self.expect_kw("NOW")?;
            self.expect(&TokenKind::LBrace, "`{`")?;
            let subject_var = match self.peek() {
                Some(Token { kind: TokenKind::Var(v), .. }) => {
                    let v = v.clone();
                    self.pos += 1;
                    v
                }
                _ => return Err(self.error_here("expected a variable in the CONSTRUCT template")),
            };
            self.expect_kw("a")?;
            let concept = self.parse_name()?;
            self.expect(&TokenKind::RBrace, "`}`")?;
            OutputForm::Construct { subject_var, concept }
        } else if self.eat_kw("SELECT") {
            let mut vars = Vec::new();
            while let Some(Token { kind: TokenKind::Var(v), .. }) = self.peek() {
                vars.push(v.clone());
                self.pos += 1;
            }
            if vars.is_empty() {
                return Err(self.error_here("SELECT needs at least one variable"));
            }
            OutputForm::Select { vars }
        } else {
            return Err(self.error_here("expected CONSTRUCT or SELECT"));
        };

        let mut static_ontology = None;
        let mut static_data = None;
        if self.is_kw("FROM") && self.is_kw_at(1, "STATIC") {
            self.pos += 2;
            self.expect_kw("ONTOLOGY")?;
            static_ontology = Some(self.parse_name()?);
            self.expect(&TokenKind::Comma, "`,`")?;
            self.expect_kw("DATA")?;
            static_data = Some(self.parse_name()?);
        }

        let mut where_triples = Vec::new();
        if self.eat_kw("WHERE") {
            self.expect(&TokenKind::LBrace, "`{`")?;
            loop {
                if self.eat(&TokenKind::RBrace) {
                    break;
                }
                let subject = self.parse_pattern_term()?;
                let predicate = if self.is_kw("a") {
                    self.pos += 1;
                    WherePredicate::IsA
                } else {
                    WherePredicate::Named(self.parse_name()?)
                };
                let object = self.parse_pattern_term()?;
                where_triples.push(WhereTriple { subject, predicate, object });
                if !self.eat(&TokenKind::Dot) && !matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RBrace)) {
                    return Err(self.error_here("expected `.` or `}` after a triple"));
                }
            }
        }
        if self.is_kw("WHERE") {
            return Err(self.error_here("duplicate WHERE clause"));
        }

        self.expect_kw("FROM")?;
        self.expect_kw("STREAM")?;
        let mut stream_sources = Vec::new();
        loop {
            let name = self.expect_ident("stream name")?;
            let mut set_back_ms = None;
            if let Some(Token { kind: TokenKind::Duration(ms), .. }) = self.peek() {
                let ms = *ms;
                self.pos += 1;
                self.expect(&TokenKind::ArrowLeft, "`<-` after the set-back duration")?;
                set_back_ms = Some(ms);
            }
            self.expect(&TokenKind::LBracket, "`[`")?;
            self.expect_kw("NOW")?;
            self.expect(&TokenKind::Minus, "`-`")?;
            let range_ms = self.expect_duration("window range")?;
            self.expect(&TokenKind::Comma, "`,`")?;
            self.expect_kw("NOW")?;
            self.expect(&TokenKind::RBracket, "`]`")?;
            let mut slide_ms = None;
            if self.eat(&TokenKind::ArrowRight) {
                slide_ms = Some(self.expect_duration("window slide")?);
            }
            stream_sources.push(StreamSourceDecl { name, set_back_ms, range_ms, slide_ms });
            self.eat(&TokenKind::Comma);
            // Another source starts with an identifier that is not a
            // keyword of a later clause.
            match self.peek() {
                Some(Token { kind: TokenKind::Ident(name), .. })
                    if !matches!(name.as_str(), "USING" | "SEQUENCE" | "HAVING" | "FROM" | "WHERE") =>
                {
                    continue;
                }
                _ => break,
            }
        }
        if self.is_kw("FROM") {
            return Err(self.error_here("duplicate FROM STREAM clause"));
        }

        let mut using_pulse = None;
        if self.is_kw("USING") {
            self.pos += 1;
            self.expect_kw("PULSE")?;
            using_pulse = Some(self.expect_ident("pulse name")?);
        }

        let mut sequencing = None;
        if self.is_kw("SEQUENCE") {
            self.pos += 1;
            self.expect_kw("BY")?;
            let strategy = self.expect_ident("sequencing strategy")?;
            self.expect_kw("AS")?;
            let alias = self.expect_ident("sequence alias")?;
            sequencing = Some(SequencingDecl { strategy, alias });
        }

        let mut having = None;
        if self.eat_kw("HAVING") {
            having = Some(self.parse_having()?);
        }
        if self.eat_kw("HAVING") {
            return Err(self.error_here("duplicate HAVING clause"));
        }

        if let Some(t) = self.peek() {
            return Err(ParseError {
                line: t.line,
                col: t.col,
                message: "unexpected trailing input after the query".into(),
            });
        }

        Ok(StarqlQuery {
            prefixes,
            pulse,
            output_stream,
            output,
            static_ontology,
            static_data,
            where_triples,
            stream_sources,
            using_pulse,
            sequencing,
            having,
        })
    }

    fn parse_pattern_term(&mut self) -> Result<PatternTerm, ParseError> {
        match self.peek() {
            Some(Token { kind: TokenKind::Var(v), .. }) => {
                let v = v.clone();
                self.pos += 1;
                Ok(PatternTerm::Var(v))
            }
            Some(Token { kind: TokenKind::Number { text, .. }, .. }) => {
                let text = text.clone();
                self.pos += 1;
                Ok(PatternTerm::Number(text))
            }
            _ => Ok(PatternTerm::Name(self.parse_name()?)),
        }
    }

    fn parse_having(&mut self) -> Result<HavingExpr, ParseError> {
        self.parse_or()
    }

    fn parse_or(&mut self) -> Result<HavingExpr, ParseError> {
        let mut left = self.parse_and()?;
        while self.eat_kw("OR") {
            let right = self.parse_and()?;
            left = HavingExpr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<HavingExpr, ParseError> {
        let mut left = self.parse_unary_having()?;
        while self.eat_kw("AND") {
            let right = self.parse_unary_having()?;
            left = HavingExpr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_unary_having(&mut self) -> Result<HavingExpr, ParseError> {
        if self.eat_kw("NOT") {
            let inner = self.parse_unary_having()?;
            return Ok(HavingExpr::Not(Box::new(inner)));
        }
        if self.is_kw("EXISTS") || self.is_kw("FORALL") {
            return self.parse_quantified();
        }
        // Either a comparison or a parenthesized boolean expression; try
        // the comparison and fall back.
        let save = self.pos;
        match self.try_parse_comparison() {
            Ok(cmp) => Ok(cmp),
            Err(_) => {
                self.pos = save;
                self.expect(&TokenKind::LParen, "`(`")?;
                let inner = self.parse_having()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
        }
    }

    fn parse_quantified(&mut self) -> Result<HavingExpr, ParseError> {
        let quantifier = if self.eat_kw("EXISTS") {
            QuantifierKind::Exists
        } else {
            self.expect_kw("FORALL")?;
            QuantifierKind::Forall
        };
        let index_var = self.expect_ident("index variable")?;
        self.expect_kw("IN")?;
        let sequence = self.expect_ident("sequence name")?;
        self.expect(&TokenKind::LParen, "`(`")?;
        let mut graphs = Vec::new();
        loop {
            graphs.push(self.parse_indexed_graph()?);
            if !self.eat_kw("AND") {
                break;
            }
        }
        self.expect(&TokenKind::RParen, "`)`")?;
        self.expect_kw("HAVING")?;
        let filter = self.parse_having()?;
        Ok(HavingExpr::Quantified {
            quantifier,
            index_var,
            sequence,
            graphs,
            filter: Box::new(filter),
        })
    }

    fn parse_indexed_graph(&mut self) -> Result<IndexedGraph, ParseError> {
        self.expect_kw("GRAPH")?;
        let var = self.expect_ident("index variable")?;
        let mut offset = 0i64;
        if self.eat(&TokenKind::Plus) {
            match self.peek() {
                Some(Token { kind: TokenKind::Number { value, .. }, .. })
                    if *value == (*value as i64) as f64 =>
                {
                    offset = *value as i64;
                    self.pos += 1;
                }
                _ => return Err(self.error_here("expected an integer offset after `+`")),
            }
        }
        self.expect(&TokenKind::LBrace, "`{`")?;
        let mut triples = Vec::new();
        loop {
            if self.eat(&TokenKind::RBrace) {
                break;
            }
            let subject = self.parse_pattern_term()?;
            let predicate = self.parse_name()?;
            let value = self.parse_pattern_term()?;
            triples.push(GraphTriple { subject, predicate, value });
            if !self.eat(&TokenKind::Dot)
                && !matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RBrace))
            {
                return Err(self.error_here("expected `.` or `}` after a triple"));
            }
        }
        Ok(IndexedGraph { index: IndexExpr { var, offset }, triples })
    }

    fn try_parse_comparison(&mut self) -> Result<HavingExpr, ParseError> {
        let left = self.parse_num_expr()?;
        let op = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Lt) => CompareOp::Lt,
            Some(TokenKind::Le) => CompareOp::Le,
            Some(TokenKind::Gt) => CompareOp::Gt,
            Some(TokenKind::Ge) => CompareOp::Ge,
            Some(TokenKind::Eq) => CompareOp::Eq,
            Some(TokenKind::Neq) => CompareOp::Ne,
            _ => return Err(self.error_here("expected a comparison operator")),
        };
        self.pos += 1;
        let right = self.parse_num_expr()?;
        Ok(HavingExpr::Compare { op, left, right })
    }

    fn parse_num_expr(&mut self) -> Result<NumExpr, ParseError> {
        let mut left = self.parse_num_term()?;
        loop {
            if self.eat(&TokenKind::Plus) {
                let right = self.parse_num_term()?;
                left = NumExpr::Add(Box::new(left), Box::new(right));
            } else if self.eat(&TokenKind::Minus) {
                let right = self.parse_num_term()?;
                left = NumExpr::Sub(Box::new(left), Box::new(right));
            } else {
                return Ok(left);
            }
        }
    }

    fn parse_num_term(&mut self) -> Result<NumExpr, ParseError> {
        let mut left = self.parse_num_factor()?;
        loop {
            if self.eat(&TokenKind::Star) {
                let right = self.parse_num_factor()?;
                left = NumExpr::Mul(Box::new(left), Box::new(right));
            } else if self.eat(&TokenKind::Slash) {
                let right = self.parse_num_factor()?;
                left = NumExpr::Div(Box::new(left), Box::new(right));
            } else {
                return Ok(left);
            }
        }
    }

    fn parse_num_factor(&mut self) -> Result<NumExpr, ParseError> {
        match self.peek().cloned() {
            Some(Token { kind: TokenKind::Number { value, .. }, .. }) => {
                self.pos += 1;
                Ok(NumExpr::Const(value))
            }
            Some(Token { kind: TokenKind::Minus, .. }) => {
                self.pos += 1;
                let inner = self.parse_num_factor()?;
                Ok(NumExpr::Sub(Box::new(NumExpr::Const(0.0)), Box::new(inner)))
            }
            Some(Token { kind: TokenKind::Var(v), .. }) => {
                self.pos += 1;
                Ok(NumExpr::Var(v))
            }
            Some(Token { kind: TokenKind::LParen, .. }) => {
                self.pos += 1;
                let inner = self.parse_num_expr()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Token { kind: TokenKind::Ident(name), .. }) => {
                self.pos += 1;
                self.expect(&TokenKind::LParen, "`(` (function call)")?;
                let mut args = Vec::new();
                if !self.eat(&TokenKind::RParen) {
                    loop {
                        args.push(self.parse_num_expr()?);
                        if self.eat(&TokenKind::RParen) {
                            break;
                        }
                        self.expect(&TokenKind::Comma, "`,`")?;
                    }
                }
                Ok(NumExpr::Call(name, args))
            }
            _ => Err(self.error_here("expected a number, variable, or function call")),
        }
    }
}
