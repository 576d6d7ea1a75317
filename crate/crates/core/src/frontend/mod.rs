//! Lexing, parsing and indexing of subject-language projects.

pub mod ast;
pub mod index;
pub mod lexer;
pub mod parser;
pub mod printer;

use std::path::Path;

use thiserror::Error;

pub use ast::{Block, Declaration, EntityKind, Param, SourceFile};
pub use index::{build_index, build_index_linked, Entity, EntityIndex, NameError, NameTable};
pub use parser::{ParseError, ParseErrorKind};

use crate::name::{QualifiedName, SourcePos};

#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum FrontendError {
    #[error("{at}: syntax error: {message}")]
    Syntax {
        at: SourcePos,
        message: String,
        expected: Vec<String>,
    },
    #[error("{at}: unbalanced block")]
    UnbalancedBlock { at: SourcePos },
    #[error("{at}: duplicate parameter name `{name}`")]
    DuplicateParameterName { at: SourcePos, name: String },
    #[error("duplicate declaration `{name}` at {first} and {second}")]
    DuplicateFqn {
        name: QualifiedName,
        first: SourcePos,
        second: SourcePos,
    },
    #[error("{at}: {source}")]
    Name {
        at: SourcePos,
        #[source]
        source: NameError,
    },
}

impl FrontendError {
    pub fn position(&self) -> &SourcePos {
        match self {
            FrontendError::Syntax { at, .. }
            | FrontendError::UnbalancedBlock { at }
            | FrontendError::DuplicateParameterName { at, .. }
            | FrontendError::Name { at, .. } => at,
            FrontendError::DuplicateFqn { second, .. } => second,
        }
    }

    fn from_parse(path: &Path, text: &str, err: ParseError) -> Self {
        let at = SourcePos::new(path, text, err.span);
        match err.kind {
            ParseErrorKind::Syntax { ref expected, .. } => FrontendError::Syntax {
                message: err.message(),
                expected: expected.clone(),
                at,
            },
            ParseErrorKind::Lex(message) => FrontendError::Syntax {
                at,
                message,
                expected: Vec::new(),
            },
            ParseErrorKind::UnbalancedBlock => FrontendError::UnbalancedBlock { at },
            ParseErrorKind::DuplicateParameterName(name) => {
                FrontendError::DuplicateParameterName { at, name }
            }
        }
    }
}

/// Parses one file, attaching file/line/column to any error.
pub fn parse_file(path: &Path, text: &str) -> Result<SourceFile, FrontendError> {
    parser::parse_source(path, text).map_err(|e| FrontendError::from_parse(path, text, e))
}
