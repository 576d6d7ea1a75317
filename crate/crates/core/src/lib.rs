//! Build-time reflection for a small Kotlin-like language.
//!
//! Query chains such as
//! `Reflekt.classes().withSupertype<A>().withAnnotations<C>().toSet()` are
//! found in function bodies, answered against the project's entity index, and
//! replaced by literal collections, so nothing is scanned when the program
//! starts. Libraries ship their unanswered queries in a `.reflektmeta` file
//! and the consuming build answers them in a generated `ReflektImpl.rk`.

pub mod bench;
pub mod cli;
pub mod codegen;
pub mod frontend;
pub mod meta;
pub mod name;
pub mod project;
pub mod query;
pub mod resolver;
pub mod types;

pub use frontend::{build_index, parse_file, Entity, EntityIndex, EntityKind, SourceFile};
pub use name::{QualifiedName, SourcePos, Span};
pub use query::{extract_queries, parse_predicate, Predicate, Query, QueryId, Shape};
pub use types::{FunctionType, TypeHierarchy, TypeRef};
