use std::ops::Range;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::lexer::Token;
use crate::name::{QualifiedName, Span};
use crate::types::{FunctionType, TypeRef};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Class,
    Object,
    Function,
}

impl EntityKind {
    pub const ALL: [EntityKind; 3] = [EntityKind::Class, EntityKind::Object, EntityKind::Function];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Class => "class",
            EntityKind::Object => "object",
            EntityKind::Function => "function",
        }
    }

    /// The DSL method selecting this kind: `classes`, `objects` or `functions`.
    pub fn plural(self) -> &'static str {
        match self {
            EntityKind::Class => "classes",
            EntityKind::Object => "objects",
            EntityKind::Function => "functions",
        }
    }

    pub fn from_plural(s: &str) -> Option<Self> {
        EntityKind::ALL.into_iter().find(|k| k.plural() == s)
    }

    pub fn from_str_opt(s: &str) -> Option<Self> {
        EntityKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Param {
    pub name: String,
    pub ty: TypeRef,
}

/// A function body: the braces and the token range strictly inside them.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Block {
    pub span: Span,
    pub tokens: Range<usize>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Declaration {
    pub kind: EntityKind,
    pub name: String,
    /// Names as written; resolved when the index is built.
    pub annotations: Vec<QualifiedName>,
    pub supertypes: Vec<QualifiedName>,
    pub params: Vec<Param>,
    /// `None` when omitted in source, which means `Unit`.
    pub return_type: Option<TypeRef>,
    pub is_companion: bool,
    /// Qualified path of the enclosing declaration inside the package.
    pub enclosing: Option<QualifiedName>,
    pub span: Span,
    /// `class A` and `class A {}` are distinct only for printing.
    pub has_body: bool,
    pub block: Option<Block>,
    pub children: Vec<Declaration>,
}

impl Declaration {
    pub fn is_top_level(&self) -> bool {
        self.enclosing.is_none()
    }

    /// Declared signature, without any receiver.
    pub fn signature(&self) -> Option<FunctionType> {
        (self.kind == EntityKind::Function).then(|| {
            FunctionType::new(
                self.params.iter().map(|p| p.ty.clone()).collect(),
                self.return_type
                    .clone()
                    .unwrap_or_else(|| TypeRef::Nominal(crate::types::unit())),
            )
        })
    }

    /// Path relative to the package, e.g. `A.K`.
    pub fn local_path(&self) -> QualifiedName {
        match &self.enclosing {
            Some(outer) => outer.child(&self.name),
            None => QualifiedName::parse(&self.name).expect("identifier"),
        }
    }

    /// Depth-first, pre-order walk over this declaration and its children.
    pub fn walk<'a>(&'a self, out: &mut Vec<&'a Declaration>) {
        out.push(self);
        for child in &self.children {
            child.walk(out);
        }
    }
}

#[derive(Clone, Debug)]
pub struct SourceFile {
    pub path: PathBuf,
    pub package: QualifiedName,
    pub declarations: Vec<Declaration>,
    pub text: String,
    pub tokens: Vec<Token>,
}

impl SourceFile {
    pub fn all_declarations(&self) -> Vec<&Declaration> {
        let mut out = Vec::new();
        for decl in &self.declarations {
            decl.walk(&mut out);
        }
        out
    }

    pub fn block_tokens(&self, block: &Block) -> &[Token] {
        &self.tokens[block.tokens.clone()]
    }
}
