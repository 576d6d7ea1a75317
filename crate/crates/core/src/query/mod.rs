//! Reflection queries: their normalized form, stable ids and extraction from
//! function bodies.

mod chain;
pub mod predicate;

use std::collections::BTreeSet;
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use chain::{extract_queries, extract_queries_from_file, parse_chain};
pub use predicate::{parse_predicate, CmpOp, Predicate, PredicateError};

use crate::frontend::{EntityKind, NameError};
use crate::name::{QualifiedName, SourcePos};
use crate::types::FunctionType;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    List,
    Set,
}

impl Shape {
    pub fn as_str(self) -> &'static str {
        match self {
            Shape::List => "list",
            Shape::Set => "set",
        }
    }

    /// The collection constructor used for literals.
    pub fn constructor(self) -> &'static str {
        match self {
            Shape::List => "listOf",
            Shape::Set => "setOf",
        }
    }

    /// Return type of generated impl functions.
    pub fn type_name(self) -> &'static str {
        match self {
            Shape::List => "List",
            Shape::Set => "Set",
        }
    }
}

/// Content hash of a normalized query: 16 lowercase hex digits.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryId(String);

impl QueryId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn from_hex(s: &str) -> Option<QueryId> {
        (s.len() == 16 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')))
            .then(|| QueryId(s.to_owned()))
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Where a query chain appears in source.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QuerySite {
    /// Span of the whole chain expression.
    pub pos: SourcePos,
    /// Package of the file, used to resolve the chain's names.
    pub package: QualifiedName,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Query {
    pub id: QueryId,
    pub kind: EntityKind,
    /// Class/object queries only; all must match.
    pub supertypes: BTreeSet<QualifiedName>,
    /// Function queries only.
    pub signature: Option<FunctionType>,
    pub annotations: BTreeSet<QualifiedName>,
    /// Present exactly for `SmartReflekt` queries.
    pub predicate: Option<Predicate>,
    pub shape: Shape,
    pub site: Option<QuerySite>,
}

impl Query {
    /// Builds a query and computes its id.
    pub fn new(
        kind: EntityKind,
        supertypes: BTreeSet<QualifiedName>,
        signature: Option<FunctionType>,
        annotations: BTreeSet<QualifiedName>,
        predicate: Option<Predicate>,
        shape: Shape,
    ) -> Query {
        let mut q = Query {
            id: QueryId(String::new()),
            kind,
            supertypes,
            signature,
            annotations,
            predicate,
            shape,
            site: None,
        };
        q.id = query_id(&q);
        q
    }

    pub fn with_site(mut self, site: QuerySite) -> Query {
        self.site = Some(site);
        self
    }

    pub fn without_site(&self) -> Query {
        Query {
            site: None,
            ..self.clone()
        }
    }

    pub fn is_smart(&self) -> bool {
        self.predicate.is_some()
    }

    /// Canonical chain text. Names are fully qualified, so it parses back to
    /// an equal query from any package.
    pub fn to_chain_text(&self) -> String {
        let mut out = String::new();
        let names = |set: &BTreeSet<QualifiedName>| {
            set.iter().map(|n| n.as_str()).collect::<Vec<_>>().join(", ")
        };
        match &self.predicate {
            Some(pred) => {
                let bound = match self.kind {
                    EntityKind::Function => self
                        .signature
                        .as_ref()
                        .map(ToString::to_string)
                        .unwrap_or_default(),
                    _ => names(&self.supertypes),
                };
                let _ = write!(
                    out,
                    "SmartReflekt.{}<{}>().filter {{ {} }}.resolve()",
                    self.kind.plural(),
                    bound,
                    pred
                );
            }
            None => {
                let _ = write!(out, "Reflekt.{}()", self.kind.plural());
                match self.supertypes.len() {
                    0 => {}
                    1 => {
                        let _ = write!(out, ".withSupertype<{}>()", names(&self.supertypes));
                    }
                    _ => {
                        let _ = write!(out, ".withSupertypes<{}>()", names(&self.supertypes));
                    }
                }
                if let Some(sig) = &self.signature {
                    let _ = write!(out, ".withSignature<{sig}>()");
                }
                if !self.annotations.is_empty() {
                    let _ = write!(out, ".withAnnotations<{}>()", names(&self.annotations));
                }
                let _ = write!(
                    out,
                    ".{}()",
                    match self.shape {
                        Shape::List => "toList",
                        Shape::Set => "toSet",
                    }
                );
            }
        }
        out
    }
}

/// Hash over (kind, sorted supertypes, signature, sorted annotations,
/// canonical predicate, shape). Sites and spelling do not contribute.
pub fn query_id(q: &Query) -> QueryId {
    let join = |set: &BTreeSet<QualifiedName>| {
        set.iter().map(|n| n.as_str()).collect::<Vec<_>>().join(",")
    };
    let canonical = format!(
        "kind={}\nsupertypes={}\nsignature={}\nannotations={}\npredicate={}\nshape={}\n",
        q.kind.as_str(),
        join(&q.supertypes),
        q.signature.as_ref().map(ToString::to_string).unwrap_or_default(),
        join(&q.annotations),
        q.predicate.as_ref().map(ToString::to_string).unwrap_or_default(),
        q.shape.as_str(),
    );
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(16);
    for b in &digest[..8] {
        let _ = write!(hex, "{b:02x}");
    }
    QueryId(hex)
}

#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum QueryError {
    #[error("{at}: malformed query chain: expected {expected}, found {found}")]
    MalformedChain {
        at: SourcePos,
        expected: String,
        found: String,
    },
    #[error("{at}: {source}")]
    Name {
        at: SourcePos,
        #[source]
        source: NameError,
    },
    #[error("{at}: `{modifier}` cannot be used on a {kind} query")]
    MixedModifier {
        at: SourcePos,
        modifier: String,
        kind: &'static str,
    },
    #[error("{at}: {source}")]
    Predicate {
        at: SourcePos,
        #[source]
        source: PredicateError,
    },
}

impl QueryError {
    pub fn position(&self) -> &SourcePos {
        match self {
            QueryError::MalformedChain { at, .. }
            | QueryError::Name { at, .. }
            | QueryError::MixedModifier { at, .. }
            | QueryError::Predicate { at, .. } => at,
        }
    }

    pub fn is_foreign_capture(&self) -> bool {
        matches!(
            self,
            QueryError::Predicate {
                source: PredicateError::ForeignCapture { .. },
                ..
            }
        )
    }
}
