//! Materializes resolved queries as source text: literal collections at the
//! call sites, and the `ReflektImpl.rk` file for library queries.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frontend::lexer::{tokenize, TokenKind};
use crate::frontend::{EntityKind, SourceFile};
use crate::name::{QualifiedName, Span};
use crate::query::{Query, QueryId, Shape};
use crate::resolver::ResolvedResult;

pub const IMPL_FILE_NAME: &str = "ReflektImpl.rk";
pub const IMPL_PACKAGE: &str = "reflekt.generated";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum CodegenError {
    #[error("overlapping rewrite spans {first:?} and {second:?} in {}", .path.display())]
    OverlappingSpans {
        path: PathBuf,
        first: Span,
        second: Span,
    },
    #[error("no result for query {0}")]
    MissingResult(QueryId),
    #[error("query id {0} appears more than once")]
    DuplicateQueryId(QueryId),
}

fn render_ref(kind: EntityKind, fqn: &QualifiedName) -> String {
    match kind {
        EntityKind::Class => format!("{fqn}::class"),
        EntityKind::Object => fqn.to_string(),
        EntityKind::Function => format!("::{fqn}"),
    }
}

/// `listOf(...)` / `setOf(...)` with classes as `A::class`, objects as `O`
/// and functions as `::f`.
pub fn emit_literal(result: &ResolvedResult) -> String {
    let items: Vec<String> = result
        .refs
        .iter()
        .map(|r| render_ref(r.kind, &r.fqn))
        .collect();
    format!("{}({})", result.shape.constructor(), items.join(", "))
}

/// A parsed literal collection: its shape and the rendered references.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Literal {
    pub shape: Shape,
    pub items: Vec<(EntityKind, QualifiedName)>,
}

/// Parses the output of [`emit_literal`].
pub fn parse_literal(text: &str) -> Option<Literal> {
    let tokens = tokenize(text).ok()?;
    let src = text;
    let mut i = 0;
    let head = tokens.get(i)?;
    let shape = match head.text(src) {
        "listOf" if head.kind == TokenKind::Ident => Shape::List,
        "setOf" if head.kind == TokenKind::Ident => Shape::Set,
        _ => return None,
    };
    i += 1;
    if tokens.get(i)?.kind != TokenKind::LParen {
        return None;
    }
    i += 1;
    let mut items = Vec::new();
    let qname = |i: &mut usize| -> Option<QualifiedName> {
        let mut parts = Vec::new();
        loop {
            let t = tokens.get(*i)?;
            if t.kind != TokenKind::Ident {
                return None;
            }
            parts.push(t.text(src));
            *i += 1;
            if tokens.get(*i).map(|t| t.kind) == Some(TokenKind::Dot) {
                *i += 1;
            } else {
                return QualifiedName::from_segments(parts);
            }
        }
    };
    if tokens.get(i)?.kind == TokenKind::RParen {
        return (i + 1 == tokens.len()).then_some(Literal { shape, items });
    }
    loop {
        if tokens.get(i)?.kind == TokenKind::ColonColon {
            i += 1;
            items.push((EntityKind::Function, qname(&mut i)?));
        } else {
            let name = qname(&mut i)?;
            if tokens.get(i).map(|t| t.kind) == Some(TokenKind::ColonColon) {
                if !tokens.get(i + 1)?.is_ident(src, "class") {
                    return None;
                }
                i += 2;
                items.push((EntityKind::Class, name));
            } else {
                items.push((EntityKind::Object, name));
            }
        }
        match tokens.get(i)?.kind {
            TokenKind::Comma => i += 1,
            TokenKind::RParen => {
                return (i + 1 == tokens.len()).then_some(Literal { shape, items });
            }
            _ => return None,
        }
    }
}

/// Applies non-overlapping replacements right-to-left.
pub fn apply_edits(
    path: &std::path::Path,
    text: &str,
    edits: &[(Span, String)],
) -> Result<String, CodegenError> {
    let mut sorted: Vec<&(Span, String)> = edits.iter().collect();
    sorted.sort_by_key(|e| std::cmp::Reverse(e.0.start));
    for pair in sorted.windows(2) {
        let (later, earlier) = (pair[0].0, pair[1].0);
        if earlier.overlaps(&later) || earlier == later {
            return Err(CodegenError::OverlappingSpans {
                path: path.to_path_buf(),
                first: earlier,
                second: later,
            });
        }
    }
    let mut out = text.to_owned();
    for (span, replacement) in sorted {
        out.replace_range(span.start..span.end, replacement);
    }
    Ok(out)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RewrittenFile {
    pub path: PathBuf,
    pub text: String,
    pub replaced: usize,
}

/// Per-file replacement lists, keyed by file path.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct RewritePlan {
    pub files: BTreeMap<PathBuf, Vec<(Span, String)>>,
    pub impl_file: Option<String>,
}

pub fn plan_rewrites(
    queries: &[Query],
    results: &[ResolvedResult],
) -> Result<RewritePlan, CodegenError> {
    let by_id: HashMap<&QueryId, &ResolvedResult> =
        results.iter().map(|r| (&r.query, r)).collect();
    let mut plan = RewritePlan::default();
    for q in queries {
        let Some(site) = &q.site else { continue };
        let result = by_id
            .get(&q.id)
            .ok_or_else(|| CodegenError::MissingResult(q.id.clone()))?;
        plan.files
            .entry(site.pos.path.clone())
            .or_default()
            .push((site.pos.span, emit_literal(result)));
    }
    Ok(plan)
}

/// Rewrites every file, replacing each query site by its literal. Files
/// without queries are returned unchanged. Output is sorted by path.
pub fn rewrite_project(
    files: &[SourceFile],
    queries: &[Query],
    results: &[ResolvedResult],
) -> Result<Vec<RewrittenFile>, CodegenError> {
    let plan = plan_rewrites(queries, results)?;
    let mut out = Vec::with_capacity(files.len());
    for file in files {
        let edits = plan.files.get(&file.path).map(Vec::as_slice).unwrap_or(&[]);
        out.push(RewrittenFile {
            path: file.path.clone(),
            text: apply_edits(&file.path, &file.text, edits)?,
            replaced: edits.len(),
        });
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

/// Generates `ReflektImpl.rk`: one `impl_<id>` function per query, sorted
/// by id, behind a header carrying the tool version and a content hash.
pub fn emit_impl_file(results: &[ResolvedResult]) -> Result<String, CodegenError> {
    let mut sorted: Vec<&ResolvedResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.query.cmp(&b.query));
    for pair in sorted.windows(2) {
        if pair[0].query == pair[1].query {
            return Err(CodegenError::DuplicateQueryId(pair[0].query.clone()));
        }
    }
    let mut body = format!("package {IMPL_PACKAGE}\n");
    for r in sorted {
        let _ = write!(
            body,
            "\nfun impl_{}(): {} {{ return {} }}\n",
            r.query,
            r.shape.type_name(),
            emit_literal(r)
        );
    }
    Ok(format!(
        "// Generated by srq {TOOL_VERSION}. Do not edit.\n// content-hash: {}\n{body}",
        content_hash(&body)
    ))
}

pub fn content_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Checks the header hash of a generated impl file against its body.
pub fn impl_file_is_fresh(text: &str) -> bool {
    let mut lines = text.splitn(3, '\n');
    let (_, hash_line, body) = match (lines.next(), lines.next(), lines.next()) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return false,
    };
    hash_line
        .strip_prefix("// content-hash: ")
        .is_some_and(|h| h == content_hash(body))
}
