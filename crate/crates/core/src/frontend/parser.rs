//! Recursive descent parser for `.rk` source files.

use std::collections::HashSet;
use std::path::Path;

use super::ast::{Block, Declaration, EntityKind, Param, SourceFile};
use super::lexer::{tokenize, Token, TokenKind};
use crate::name::{QualifiedName, Span};
use crate::types::{FunctionType, TypeRef};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ParseErrorKind {
    Syntax { expected: Vec<String>, found: String },
    UnbalancedBlock,
    DuplicateParameterName(String),
    Lex(String),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: Span,
}

impl ParseError {
    pub fn message(&self) -> String {
        match &self.kind {
            ParseErrorKind::Syntax { expected, found } => {
                format!("expected {}, found {found}", expected.join(" or "))
            }
            ParseErrorKind::UnbalancedBlock => "unbalanced block".into(),
            ParseErrorKind::DuplicateParameterName(name) => {
                format!("duplicate parameter name `{name}`")
            }
            ParseErrorKind::Lex(msg) => msg.clone(),
        }
    }
}

pub type ParseResult<T> = Result<T, ParseError>;

/// A cursor over a token slice, shared by the file, chain and predicate parsers.
pub struct TokenCursor<'a> {
    pub src: &'a str,
    pub tokens: &'a [Token],
    pub pos: usize,
    /// Offset reported for errors at end of input.
    pub end_offset: usize,
}

impl<'a> TokenCursor<'a> {
    pub fn new(src: &'a str, tokens: &'a [Token]) -> Self {
        let end_offset = tokens.last().map_or(src.len(), |t| t.span.end);
        Self {
            src,
            tokens,
            pos: 0,
            end_offset,
        }
    }

    pub fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    pub fn peek_at(&self, ahead: usize) -> Option<&'a Token> {
        self.tokens.get(self.pos + ahead)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    pub fn check(&self, kind: TokenKind) -> bool {
        self.peek().is_some_and(|t| t.kind == kind)
    }

    pub fn check_word(&self, word: &str) -> bool {
        self.peek().is_some_and(|t| t.is_ident(self.src, word))
    }

    pub fn bump(&mut self) -> Option<&'a Token> {
        let tok = self.tokens.get(self.pos);
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    pub fn eat(&mut self, kind: TokenKind) -> Option<&'a Token> {
        if self.check(kind) {
            self.bump()
        } else {
            None
        }
    }

    pub fn eat_word(&mut self, word: &str) -> Option<&'a Token> {
        if self.check_word(word) {
            self.bump()
        } else {
            None
        }
    }

    pub fn current_span(&self) -> Span {
        self.peek()
            .map(|t| t.span)
            .unwrap_or(Span::new(self.end_offset, self.end_offset))
    }

    pub fn found(&self) -> String {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => format!("`{}`", t.text(self.src)),
            Some(t) => t.kind.describe().to_owned(),
            None => "end of input".to_owned(),
        }
    }

    pub fn error<T>(&self, expected: &[&str]) -> ParseResult<T> {
        Err(ParseError {
            kind: ParseErrorKind::Syntax {
                expected: expected.iter().map(|s| (*s).to_owned()).collect(),
                found: self.found(),
            },
            span: self.current_span(),
        })
    }

    pub fn expect(&mut self, kind: TokenKind) -> ParseResult<&'a Token> {
        match self.eat(kind) {
            Some(t) => Ok(t),
            None => self.error(&[kind.describe()]),
        }
    }

    pub fn expect_word(&mut self, word: &str) -> ParseResult<&'a Token> {
        match self.eat_word(word) {
            Some(t) => Ok(t),
            None => self.error(&[&format!("`{word}`")]),
        }
    }

    pub fn expect_ident(&mut self) -> ParseResult<&'a Token> {
        self.expect(TokenKind::Ident)
    }

    /// `IDENT ("." IDENT)*`
    pub fn parse_qname(&mut self) -> ParseResult<(QualifiedName, Span)> {
        let first = self.expect_ident()?;
        let mut text = first.text(self.src).to_owned();
        let mut span = first.span;
        while self.check(TokenKind::Dot)
            && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Ident)
        {
            self.bump();
            let seg = self.bump().unwrap();
            text.push('.');
            text.push_str(seg.text(self.src));
            span = span.to(seg.span);
        }
        Ok((QualifiedName::parse(&text).expect("identifier segments"), span))
    }

    /// `qname | "(" (type ("," type)*)? ")" "->" type`
    pub fn parse_type(&mut self) -> ParseResult<TypeRef> {
        if self.eat(TokenKind::LParen).is_some() {
            let mut params = Vec::new();
            if !self.check(TokenKind::RParen) {
                params.push(self.parse_type()?);
                while self.eat(TokenKind::Comma).is_some() {
                    params.push(self.parse_type()?);
                }
            }
            self.expect(TokenKind::RParen)?;
            self.expect(TokenKind::Arrow)?;
            let ret = self.parse_type()?;
            Ok(TypeRef::Function(FunctionType::new(params, ret)))
        } else if self.check(TokenKind::Ident) {
            Ok(TypeRef::Nominal(self.parse_qname()?.0))
        } else {
            self.error(&["type"])
        }
    }

    /// Skips a balanced `{ ... }` group starting at the current `{`.
    /// Returns the index of the matching `}`.
    pub fn skip_balanced(&mut self) -> ParseResult<usize> {
        let open = self.expect(TokenKind::LBrace)?;
        let mut stack = vec![TokenKind::RBrace];
        while let Some(tok) = self.bump() {
            match tok.kind {
                TokenKind::LBrace => stack.push(TokenKind::RBrace),
                TokenKind::LParen => stack.push(TokenKind::RParen),
                TokenKind::LBracket => stack.push(TokenKind::RBracket),
                TokenKind::RBrace | TokenKind::RParen | TokenKind::RBracket => {
                    if stack.pop() != Some(tok.kind) {
                        return Err(ParseError {
                            kind: ParseErrorKind::UnbalancedBlock,
                            span: tok.span,
                        });
                    }
                    if stack.is_empty() {
                        return Ok(self.pos - 1);
                    }
                }
                _ => {}
            }
        }
        Err(ParseError {
            kind: ParseErrorKind::UnbalancedBlock,
            span: open.span,
        })
    }
}

const DECL_START: &[&str] = &["`@`", "`class`", "`object`", "`companion`", "`fun`"];

struct FileParser<'a> {
    cur: TokenCursor<'a>,
}

impl<'a> FileParser<'a> {
    fn parse_decl(
        &mut self,
        enclosing: Option<(&QualifiedName, EntityKind)>,
    ) -> ParseResult<Declaration> {
        let start = self.cur.current_span();
        let mut annotations = Vec::new();
        while self.cur.eat(TokenKind::At).is_some() {
            annotations.push(self.cur.parse_qname()?.0);
        }

        let mut is_companion = false;
        let kind = if self.cur.eat_word("class").is_some() {
            EntityKind::Class
        } else if self.cur.check_word("companion") {
            let tok = self.cur.bump().unwrap();
            if !matches!(enclosing, Some((_, EntityKind::Class))) {
                return Err(ParseError {
                    kind: ParseErrorKind::Syntax {
                        expected: vec!["`companion` only inside a class body".into()],
                        found: "`companion`".into(),
                    },
                    span: tok.span,
                });
            }
            self.cur.expect_word("object")?;
            is_companion = true;
            EntityKind::Object
        } else if self.cur.eat_word("object").is_some() {
            EntityKind::Object
        } else if self.cur.eat_word("fun").is_some() {
            EntityKind::Function
        } else if annotations.is_empty() {
            return self.cur.error(DECL_START);
        } else {
            return self.cur.error(&DECL_START[1..]);
        };

        let name = self.cur.expect_ident()?.text(self.cur.src).to_owned();
        let enclosing_path = enclosing.map(|(p, _)| p.clone());
        let mut decl = Declaration {
            kind,
            name,
            annotations,
            supertypes: Vec::new(),
            params: Vec::new(),
            return_type: None,
            is_companion,
            enclosing: enclosing_path,
            span: start,
            has_body: false,
            block: None,
            children: Vec::new(),
        };

        match kind {
            EntityKind::Class | EntityKind::Object => {
                if self.cur.eat(TokenKind::Colon).is_some() {
                    decl.supertypes.push(self.cur.parse_qname()?.0);
                    while self.cur.eat(TokenKind::Comma).is_some() {
                        decl.supertypes.push(self.cur.parse_qname()?.0);
                    }
                }
                let mut end = self.cur.tokens[self.cur.pos - 1].span;
                if let Some(open) = self.cur.eat(TokenKind::LBrace) {
                    decl.has_body = true;
                    let path = decl.local_path();
                    loop {
                        if let Some(close) = self.cur.eat(TokenKind::RBrace) {
                            end = close.span;
                            break;
                        }
                        if self.cur.at_end() {
                            return Err(ParseError {
                                kind: ParseErrorKind::UnbalancedBlock,
                                span: open.span,
                            });
                        }
                        let child = self.parse_decl(Some((&path, kind)))?;
                        decl.children.push(child);
                    }
                }
                decl.span = start.to(end);
            }
            EntityKind::Function => {
                self.cur.expect(TokenKind::LParen)?;
                let mut seen = HashSet::new();
                if !self.cur.check(TokenKind::RParen) {
                    loop {
                        let name_tok = self.cur.expect_ident()?;
                        let pname = name_tok.text(self.cur.src).to_owned();
                        self.cur.expect(TokenKind::Colon)?;
                        let ty = self.cur.parse_type()?;
                        if !seen.insert(pname.clone()) {
                            return Err(ParseError {
                                kind: ParseErrorKind::DuplicateParameterName(pname),
                                span: name_tok.span,
                            });
                        }
                        decl.params.push(Param { name: pname, ty });
                        if self.cur.eat(TokenKind::Comma).is_none() {
                            break;
                        }
                    }
                }
                self.cur.expect(TokenKind::RParen)?;
                if self.cur.eat(TokenKind::Colon).is_some() {
                    decl.return_type = Some(self.cur.parse_type()?);
                }
                if !self.cur.check(TokenKind::LBrace) {
                    return self.cur.error(&["`{`"]);
                }
                let open_idx = self.cur.pos;
                let close_idx = self.cur.skip_balanced()?;
                let span = self.cur.tokens[open_idx]
                    .span
                    .to(self.cur.tokens[close_idx].span);
                decl.block = Some(Block {
                    span,
                    tokens: open_idx + 1..close_idx,
                });
                decl.has_body = true;
                decl.span = start.to(span);
            }
        }
        Ok(decl)
    }
}

/// Parses one source file.
pub fn parse_source(path: &Path, text: &str) -> ParseResult<SourceFile> {
    let tokens = tokenize(text).map_err(|e| ParseError {
        kind: ParseErrorKind::Lex(e.message),
        span: Span::new(e.offset, e.offset),
    })?;
    let (package, declarations) = {
        let mut p = FileParser {
            cur: TokenCursor::new(text, &tokens),
        };
        p.cur.expect_word("package")?;
        let (package, _) = p.cur.parse_qname()?;
        let mut declarations = Vec::new();
        while !p.cur.at_end() {
            declarations.push(p.parse_decl(None)?);
        }
        (package, declarations)
    };
    Ok(SourceFile {
        path: path.to_path_buf(),
        package,
        declarations,
        text: text.to_owned(),
        tokens,
    })
}
