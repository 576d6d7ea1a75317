//! The closed predicate language of `SmartReflekt.….filter { … }`.
//!
//! The only binding is `it`. Any other identifier in value position is a
//! captured external name and is rejected while parsing, so every predicate
//! can be evaluated at build time.

use std::fmt;

use thiserror::Error;

use crate::frontend::lexer::{escape, tokenize, unescape, Token, TokenKind};
use crate::frontend::parser::TokenCursor;
use crate::name::Span;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum CmpOp {
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }

    pub fn apply(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Predicate {
    Or(Box<Predicate>, Box<Predicate>),
    And(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
    NameEq(String),
    NameNe(String),
    IsTopLevel,
    IsCompanion,
    ParamCount(CmpOp, i64),
    HasAnnotation(String),
    HasSupertype(String),
}

impl Predicate {
    pub fn and(a: Predicate, b: Predicate) -> Predicate {
        Predicate::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Predicate, b: Predicate) -> Predicate {
        Predicate::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Predicate) -> Predicate {
        Predicate::Not(Box::new(a))
    }

    fn precedence(&self) -> u8 {
        match self {
            Predicate::Or(..) => 0,
            Predicate::And(..) => 1,
            _ => 2,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let parens = self.precedence() < min_prec;
        if parens {
            f.write_str("(")?;
        }
        match self {
            // Left-associative: the right operand binds one level tighter.
            Predicate::Or(a, b) => {
                a.fmt_at(f, 0)?;
                f.write_str(" || ")?;
                b.fmt_at(f, 1)?;
            }
            Predicate::And(a, b) => {
                a.fmt_at(f, 1)?;
                f.write_str(" && ")?;
                b.fmt_at(f, 2)?;
            }
            Predicate::Not(a) => {
                f.write_str("!")?;
                a.fmt_at(f, 2)?;
            }
            Predicate::NameEq(s) => write!(f, "it.name == {}", escape(s))?,
            Predicate::NameNe(s) => write!(f, "it.name != {}", escape(s))?,
            Predicate::IsTopLevel => f.write_str("it.isTopLevel")?,
            Predicate::IsCompanion => f.write_str("it.isCompanion")?,
            Predicate::ParamCount(op, n) => write!(f, "it.paramCount {} {n}", op.symbol())?,
            Predicate::HasAnnotation(s) => write!(f, "it.hasAnnotation({})", escape(s))?,
            Predicate::HasSupertype(s) => write!(f, "it.hasSupertype({})", escape(s))?,
        }
        if parens {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Canonical text; parsing it yields an equal tree.
impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum PredicateError {
    #[error("predicate syntax error: {message}")]
    Syntax { span: Span, message: String },
    #[error("predicate captures external name `{name}`; only `it` may be referenced")]
    ForeignCapture { span: Span, name: String },
}

impl PredicateError {
    pub fn span(&self) -> Span {
        match self {
            PredicateError::Syntax { span, .. } | PredicateError::ForeignCapture { span, .. } => {
                *span
            }
        }
    }
}

pub fn parse_predicate(text: &str) -> Result<Predicate, PredicateError> {
    let tokens = tokenize(text).map_err(|e| PredicateError::Syntax {
        span: Span::new(e.offset, e.offset),
        message: e.message,
    })?;
    parse_predicate_tokens(text, &tokens)
}

/// Parses a complete predicate from `tokens` (the contents of the filter braces).
pub fn parse_predicate_tokens(src: &str, tokens: &[Token]) -> Result<Predicate, PredicateError> {
    let mut p = PredParser {
        cur: TokenCursor::new(src, tokens),
    };
    let pred = p.or()?;
    if !p.cur.at_end() {
        return Err(p.unexpected("`&&`, `||` or end of predicate"));
    }
    Ok(pred)
}

struct PredParser<'a> {
    cur: TokenCursor<'a>,
}

const PROPERTIES: &[&str] = &[
    "name",
    "isTopLevel",
    "isCompanion",
    "paramCount",
    "hasAnnotation",
    "hasSupertype",
];

impl<'a> PredParser<'a> {
    fn unexpected(&self, expected: &str) -> PredicateError {
        if let Some(tok) = self.cur.peek() {
            if tok.kind == TokenKind::Ident && tok.text(self.cur.src) != "it" {
                return PredicateError::ForeignCapture {
                    span: tok.span,
                    name: tok.text(self.cur.src).to_owned(),
                };
            }
        }
        PredicateError::Syntax {
            span: self.cur.current_span(),
            message: format!("expected {expected}, found {}", self.cur.found()),
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<&'a Token, PredicateError> {
        match self.cur.eat(kind) {
            Some(t) => Ok(t),
            None => Err(self.unexpected(kind.describe())),
        }
    }

    fn or(&mut self) -> Result<Predicate, PredicateError> {
        let mut lhs = self.and()?;
        while self.cur.eat(TokenKind::OrOr).is_some() {
            let rhs = self.and()?;
            lhs = Predicate::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Predicate, PredicateError> {
        let mut lhs = self.unary()?;
        while self.cur.eat(TokenKind::AndAnd).is_some() {
            let rhs = self.unary()?;
            lhs = Predicate::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Predicate, PredicateError> {
        if self.cur.eat(TokenKind::Bang).is_some() {
            return Ok(Predicate::not(self.unary()?));
        }
        if self.cur.eat(TokenKind::LParen).is_some() {
            let inner = self.or()?;
            self.expect(TokenKind::RParen)?;
            return Ok(inner);
        }
        self.atom()
    }

    fn string(&mut self) -> Result<String, PredicateError> {
        let tok = self.expect(TokenKind::Str)?;
        Ok(unescape(tok.text(self.cur.src)))
    }

    fn int(&mut self) -> Result<i64, PredicateError> {
        let tok = self.expect(TokenKind::Int)?;
        tok.text(self.cur.src)
            .parse()
            .map_err(|_| PredicateError::Syntax {
                span: tok.span,
                message: "integer literal out of range".into(),
            })
    }

    fn atom(&mut self) -> Result<Predicate, PredicateError> {
        if self.cur.eat_word("it").is_none() {
            return Err(self.unexpected("`it`, `!` or `(`"));
        }
        self.expect(TokenKind::Dot)?;
        let prop_tok = match self.cur.peek() {
            Some(t) if t.kind == TokenKind::Ident => *t,
            _ => return Err(self.unexpected("a property of `it`")),
        };
        let prop = prop_tok.text(self.cur.src);
        if !PROPERTIES.contains(&prop) {
            return Err(PredicateError::Syntax {
                span: prop_tok.span,
                message: format!(
                    "unknown property `it.{prop}`; expected one of {}",
                    PROPERTIES.join(", ")
                ),
            });
        }
        self.cur.bump();
        match prop {
            "name" => {
                if self.cur.eat(TokenKind::EqEq).is_some() {
                    Ok(Predicate::NameEq(self.string()?))
                } else if self.cur.eat(TokenKind::NotEq).is_some() {
                    Ok(Predicate::NameNe(self.string()?))
                } else {
                    Err(self.unexpected("`==` or `!=`"))
                }
            }
            "isTopLevel" => Ok(Predicate::IsTopLevel),
            "isCompanion" => Ok(Predicate::IsCompanion),
            "paramCount" => {
                let op = match self.cur.peek().map(|t| t.kind) {
                    Some(TokenKind::EqEq) => CmpOp::Eq,
                    Some(TokenKind::Lt) => CmpOp::Lt,
                    Some(TokenKind::Gt) => CmpOp::Gt,
                    Some(TokenKind::Le) => CmpOp::Le,
                    Some(TokenKind::Ge) => CmpOp::Ge,
                    _ => return Err(self.unexpected("a comparison operator")),
                };
                self.cur.bump();
                Ok(Predicate::ParamCount(op, self.int()?))
            }
            "hasAnnotation" | "hasSupertype" => {
                self.expect(TokenKind::LParen)?;
                let arg = self.string()?;
                self.expect(TokenKind::RParen)?;
                Ok(if prop == "hasAnnotation" {
                    Predicate::HasAnnotation(arg)
                } else {
                    Predicate::HasSupertype(arg)
                })
            }
            _ => unreachable!("checked against PROPERTIES"),
        }
    }
}
