use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;

use super::predicate::parse_predicate_tokens;
use super::{Query, QueryError, QuerySite, Shape};
use crate::frontend::lexer::{tokenize, Token, TokenKind};
use crate::frontend::parser::TokenCursor;
use crate::frontend::{EntityIndex, EntityKind, NameTable, SourceFile};
use crate::name::{LineIndex, QualifiedName, SourcePos, Span};
use crate::types::{FunctionType, TypeRef};

const CORE_ROOT: &str = "Reflekt";
const SMART_ROOT: &str = "SmartReflekt";

/// Finds and normalizes every query chain in the function bodies of `files`.
/// Results are ordered by file path, then by position in the file.
pub fn extract_queries(
    files: &[SourceFile],
    index: &EntityIndex,
) -> Result<Vec<Query>, QueryError> {
    let mut sorted: Vec<&SourceFile> = files.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));
    let per_file: Vec<Result<Vec<Query>, QueryError>> = sorted
        .par_iter()
        .map(|f| extract_queries_from_file(f, index.names()))
        .collect();
    let mut out = Vec::new();
    for r in per_file {
        out.extend(r?);
    }
    Ok(out)
}

pub fn extract_queries_from_file(
    file: &SourceFile,
    names: &NameTable,
) -> Result<Vec<Query>, QueryError> {
    let mut blocks: Vec<_> = file
        .all_declarations()
        .into_iter()
        .filter_map(|d| d.block.as_ref())
        .collect();
    blocks.sort_by_key(|b| b.span.start);

    let mut out = Vec::new();
    let lines = LineIndex::new(&file.text);
    for block in blocks {
        let tokens = file.block_tokens(block);
        let mut i = 0;
        while i < tokens.len() {
            if is_chain_start(&file.text, tokens, i) {
                let mut parser = ChainParser {
                    cur: TokenCursor::new(&file.text, &tokens[i..]),
                    path: &file.path,
                    context: &file.package,
                    names,
                };
                let (query, span) = parser.parse()?;
                out.push(query.with_site(QuerySite {
                    pos: SourcePos::indexed(&file.path, &file.text, &lines, span),
                    package: file.package.clone(),
                }));
                i += parser.cur.pos;
            } else {
                i += 1;
            }
        }
    }
    Ok(out)
}

fn is_chain_start(src: &str, tokens: &[Token], i: usize) -> bool {
    let tok = &tokens[i];
    (tok.is_ident(src, CORE_ROOT) || tok.is_ident(src, SMART_ROOT))
        && tokens.get(i + 1).is_some_and(|t| t.kind == TokenKind::Dot)
        && (i == 0 || !matches!(tokens[i - 1].kind, TokenKind::Dot | TokenKind::ColonColon))
}

/// Parses a standalone chain expression, resolving names in `context`.
/// The whole text must be one chain.
pub fn parse_chain(
    text: &str,
    context: &QualifiedName,
    names: &NameTable,
) -> Result<Query, QueryError> {
    let path = Path::new("<chain>");
    let tokens = tokenize(text).map_err(|e| QueryError::MalformedChain {
        at: SourcePos::new(path, text, Span::new(e.offset, e.offset)),
        expected: "a query chain".into(),
        found: e.message,
    })?;
    let mut parser = ChainParser {
        cur: TokenCursor::new(text, &tokens),
        path,
        context,
        names,
    };
    if tokens.is_empty() || !is_chain_start(text, &tokens, 0) {
        return parser.malformed("`Reflekt.` or `SmartReflekt.`");
    }
    let (query, _) = parser.parse()?;
    if !parser.cur.at_end() {
        return parser.malformed("end of chain");
    }
    Ok(query)
}

struct ChainParser<'a> {
    cur: TokenCursor<'a>,
    path: &'a Path,
    context: &'a QualifiedName,
    names: &'a NameTable,
}

impl<'a> ChainParser<'a> {
    fn pos(&self, span: Span) -> SourcePos {
        SourcePos::new(self.path, self.cur.src, span)
    }

    fn malformed<T>(&self, expected: &str) -> Result<T, QueryError> {
        Err(QueryError::MalformedChain {
            at: self.pos(self.cur.current_span()),
            expected: expected.to_owned(),
            found: self.cur.found(),
        })
    }

    fn expect(&mut self, kind: TokenKind) -> Result<&'a Token, QueryError> {
        match self.cur.eat(kind) {
            Some(t) => Ok(t),
            None => self.malformed(kind.describe()),
        }
    }

    fn expect_word(&mut self, word: &str) -> Result<&'a Token, QueryError> {
        match self.cur.eat_word(word) {
            Some(t) => Ok(t),
            None => self.malformed(&format!("`{word}`")),
        }
    }

    fn empty_call(&mut self) -> Result<&'a Token, QueryError> {
        self.expect(TokenKind::LParen)?;
        self.expect(TokenKind::RParen)
    }

    /// Type arguments may be followed by an empty call, as in `withSupertype<A>()`.
    fn optional_empty_call(&mut self) -> Result<(), QueryError> {
        if self.cur.check(TokenKind::LParen) {
            self.empty_call()?;
        }
        Ok(())
    }

    fn resolve(&self, name: &QualifiedName, span: Span) -> Result<QualifiedName, QueryError> {
        self.names
            .resolve(self.context, name)
            .map_err(|source| QueryError::Name {
                at: self.pos(span),
                source,
            })
    }

    fn qname(&mut self) -> Result<QualifiedName, QueryError> {
        if !self.cur.check(TokenKind::Ident) {
            return self.malformed("a qualified name");
        }
        let (name, span) = self.cur.parse_qname().expect("checked identifier");
        self.resolve(&name, span)
    }

    fn qname_list(&mut self) -> Result<Vec<QualifiedName>, QueryError> {
        let mut out = vec![self.qname()?];
        while self.cur.eat(TokenKind::Comma).is_some() {
            out.push(self.qname()?);
        }
        Ok(out)
    }

    fn type_arg(&mut self) -> Result<TypeRef, QueryError> {
        let start = self.cur.current_span();
        let ty = match self.cur.parse_type() {
            Ok(ty) => ty,
            Err(_) => return self.malformed("a type"),
        };
        let end = self.cur.tokens[self.cur.pos - 1].span;
        let span = start.to(end);
        ty.try_map_names(&mut |n| self.resolve(n, span))
    }

    fn function_type_arg(&mut self) -> Result<FunctionType, QueryError> {
        let start = self.cur.current_span();
        match self.type_arg()? {
            TypeRef::Function(ft) => Ok(ft),
            TypeRef::Nominal(_) => Err(QueryError::MalformedChain {
                at: self.pos(start),
                expected: "a function type".into(),
                found: "a nominal type".into(),
            }),
        }
    }

    fn kind(&mut self) -> Result<EntityKind, QueryError> {
        match self.cur.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                if let Some(kind) = EntityKind::from_plural(t.text(self.cur.src)) {
                    self.cur.bump();
                    return Ok(kind);
                }
                self.malformed("`classes`, `objects` or `functions`")
            }
            _ => self.malformed("`classes`, `objects` or `functions`"),
        }
    }

    fn parse(&mut self) -> Result<(Query, Span), QueryError> {
        if self.cur.check_word(SMART_ROOT) {
            self.parse_smart()
        } else {
            self.parse_core()
        }
    }

    fn parse_core(&mut self) -> Result<(Query, Span), QueryError> {
        let root = self.expect_word(CORE_ROOT)?;
        self.expect(TokenKind::Dot)?;
        let kind = self.kind()?;
        self.empty_call()?;

        let mut supertypes: Option<BTreeSet<QualifiedName>> = None;
        let mut signature: Option<FunctionType> = None;
        let mut annotations: Option<BTreeSet<QualifiedName>> = None;
        loop {
            self.expect(TokenKind::Dot)?;
            let Some(tok) = self.cur.peek().filter(|t| t.kind == TokenKind::Ident) else {
                return self.malformed("a modifier, `toList` or `toSet`");
            };
            let word = tok.text(self.cur.src);
            let at = self.pos(tok.span);
            let mixed = |modifier: &str| QueryError::MixedModifier {
                at: at.clone(),
                modifier: modifier.to_owned(),
                kind: kind.as_str(),
            };
            let duplicate = || QueryError::MalformedChain {
                at: at.clone(),
                expected: "each modifier at most once".into(),
                found: format!("a second `{word}`"),
            };
            match word {
                "withSupertype" | "withSupertypes" => {
                    if kind == EntityKind::Function {
                        return Err(mixed(word));
                    }
                    if supertypes.is_some() {
                        return Err(duplicate());
                    }
                    self.cur.bump();
                    self.expect(TokenKind::Lt)?;
                    let list = if word == "withSupertype" {
                        vec![self.qname()?]
                    } else {
                        self.qname_list()?
                    };
                    self.expect(TokenKind::Gt)?;
                    self.optional_empty_call()?;
                    supertypes = Some(list.into_iter().collect());
                }
                "withSignature" => {
                    if kind != EntityKind::Function {
                        return Err(mixed(word));
                    }
                    if signature.is_some() {
                        return Err(duplicate());
                    }
                    self.cur.bump();
                    self.expect(TokenKind::Lt)?;
                    signature = Some(self.function_type_arg()?);
                    self.expect(TokenKind::Gt)?;
                    self.optional_empty_call()?;
                }
                "withAnnotations" => {
                    if annotations.is_some() {
                        return Err(duplicate());
                    }
                    self.cur.bump();
                    self.expect(TokenKind::Lt)?;
                    let list = self.qname_list()?;
                    self.expect(TokenKind::Gt)?;
                    self.optional_empty_call()?;
                    annotations = Some(list.into_iter().collect());
                }
                "toList" | "toSet" => {
                    self.cur.bump();
                    let close = self.empty_call()?;
                    let shape = if word == "toList" { Shape::List } else { Shape::Set };
                    let query = Query::new(
                        kind,
                        supertypes.unwrap_or_default(),
                        signature,
                        annotations.unwrap_or_default(),
                        None,
                        shape,
                    );
                    return Ok((query, root.span.to(close.span)));
                }
                _ => return self.malformed("a modifier, `toList` or `toSet`"),
            }
        }
    }

    fn parse_smart(&mut self) -> Result<(Query, Span), QueryError> {
        let root = self.expect_word(SMART_ROOT)?;
        self.expect(TokenKind::Dot)?;
        let kind = self.kind()?;
        self.expect(TokenKind::Lt)?;
        let (supertypes, signature) = match kind {
            EntityKind::Function => (BTreeSet::new(), Some(self.function_type_arg()?)),
            _ => (BTreeSet::from([self.qname()?]), None),
        };
        self.expect(TokenKind::Gt)?;
        self.optional_empty_call()?;
        self.expect(TokenKind::Dot)?;
        self.expect_word("filter")?;
        if !self.cur.check(TokenKind::LBrace) {
            return self.malformed("`{`");
        }
        let open = self.cur.pos;
        let close = match self.cur.skip_balanced() {
            Ok(close) => close,
            Err(_) => return self.malformed("a balanced `{ … }` predicate"),
        };
        let pred_tokens = &self.cur.tokens[open + 1..close];
        let predicate = parse_predicate_tokens(self.cur.src, pred_tokens).map_err(|source| {
            let span = source.span();
            QueryError::Predicate {
                at: self.pos(span),
                source,
            }
        })?;
        self.expect(TokenKind::Dot)?;
        self.expect_word("resolve")?;
        let end = self.empty_call()?;
        let query = Query::new(
            kind,
            supertypes,
            signature,
            BTreeSet::new(),
            Some(predicate),
            Shape::List,
        );
        Ok((query, root.span.to(end.span)))
    }
}
