//! The `.reflektmeta` library artifact: a library's unanswered core queries
//! plus its entity index, answered later against a consuming project.
//!
//! The file is canonical JSON: fixed field order, sorted lists, two-space
//! indentation and a trailing newline, so identical inputs give identical
//! bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{Entity, EntityIndex, EntityKind};
use crate::name::{QualifiedName, SourcePos};
use crate::query::{Query, Shape};
use crate::resolver::{resolve_all, ResolvedResult};
use crate::types::{CyclicHierarchy, FunctionType, TypeHierarchy};

pub const FORMAT_VERSION: u32 = 1;
pub const META_EXTENSION: &str = "reflektmeta";

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("{at}: SmartReflekt queries are not supported in libraries; only core Reflekt queries can be saved to a meta file")]
    SmartCallInLibrary { at: SourcePos },
    #[error("meta format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("corrupt meta file: {0}")]
    CorruptMeta(String),
    #[error("meta file refers to an invalid type or name `{0}`")]
    UnresolvedTypeInMeta(String),
    #[error("`{0}` is declared both by the project and by a linked library, or by two libraries")]
    FqnCollision(QualifiedName),
    #[error("two meta files declare the library name `{0}`")]
    DuplicateLibrary(String),
    #[error(transparent)]
    Cycle(#[from] CyclicHierarchy),
    #[error("{}: {source}", .path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ReflektMeta {
    pub format_version: u32,
    pub library_name: String,
    pub packages: Vec<QualifiedName>,
    /// Core-DSL queries without sites, sorted by id, unique.
    pub queries: Vec<Query>,
    /// Entities without source locations.
    pub entities: EntityIndex,
}

impl ReflektMeta {
    /// Packages a library's index and queries. Rejects `SmartReflekt` queries.
    pub fn from_library(
        library_name: &str,
        index: &EntityIndex,
        queries: &[Query],
    ) -> Result<Self, MetaError> {
        if let Some(smart) = queries.iter().find(|q| q.is_smart()) {
            let at = smart
                .site
                .as_ref()
                .map(|site| site.pos.clone())
                .unwrap_or_else(|| SourcePos::new("<unknown>", "", Default::default()));
            return Err(MetaError::SmartCallInLibrary { at });
        }
        let unique: BTreeMap<_, _> = queries
            .iter()
            .map(|q| (q.id.clone(), q.without_site()))
            .collect();
        let entities = index
            .iter()
            .map(|e| Entity {
                location: None,
                ..e.clone()
            })
            .collect();
        let packages: BTreeSet<_> = index.packages.iter().cloned().collect();
        Ok(Self {
            format_version: FORMAT_VERSION,
            library_name: library_name.to_owned(),
            packages: packages.iter().cloned().collect(),
            queries: unique.into_values().collect(),
            entities: EntityIndex::from_entities(entities, packages)
                .map_err(MetaError::FqnCollision)?,
        })
    }

    pub fn to_canonical_string(&self) -> String {
        let file = MetaFile {
            format_version: self.format_version,
            library_name: self.library_name.clone(),
            packages: self.packages.iter().map(ToString::to_string).collect(),
            queries: self
                .queries
                .iter()
                .map(|q| MetaQuery {
                    kind: q.kind,
                    supertypes: q.supertypes.iter().map(ToString::to_string).collect(),
                    signature: q.signature.as_ref().map(ToString::to_string),
                    annotations: q.annotations.iter().map(ToString::to_string).collect(),
                    shape: q.shape,
                    id: q.id.to_string(),
                })
                .collect(),
            entities: {
                let mut all: Vec<&Entity> = self.entities.iter().collect();
                all.sort_by(|a, b| a.fqn.cmp(&b.fqn));
                all.into_iter()
                    .map(|e| MetaEntity {
                        kind: e.kind,
                        fqn: e.fqn.to_string(),
                        annotations: e.annotations.iter().map(ToString::to_string).collect(),
                        supertypes: e.supertypes.iter().map(ToString::to_string).collect(),
                        signature: e.signature.as_ref().map(ToString::to_string),
                        is_top_level: e.is_top_level,
                        is_companion: e.is_companion,
                    })
                    .collect()
            },
        };
        let mut text = serde_json::to_string_pretty(&file).expect("meta serializes");
        text.push('\n');
        text
    }

    pub fn parse(text: &str) -> Result<Self, MetaError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| MetaError::CorruptMeta(e.to_string()))?;
        let version = value
            .get("formatVersion")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| MetaError::CorruptMeta("missing `formatVersion`".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(MetaError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let file: MetaFile =
            serde_json::from_value(value).map_err(|e| MetaError::CorruptMeta(e.to_string()))?;
        file.into_meta()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct MetaFile {
    format_version: u32,
    library_name: String,
    packages: Vec<String>,
    queries: Vec<MetaQuery>,
    entities: Vec<MetaEntity>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct MetaQuery {
    kind: EntityKind,
    supertypes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signature: Option<String>,
    annotations: Vec<String>,
    shape: Shape,
    id: String,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct MetaEntity {
    kind: EntityKind,
    fqn: String,
    annotations: Vec<String>,
    supertypes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signature: Option<String>,
    is_top_level: bool,
    is_companion: bool,
}

fn name(text: &str) -> Result<QualifiedName, MetaError> {
    QualifiedName::parse(text).ok_or_else(|| MetaError::UnresolvedTypeInMeta(text.to_owned()))
}

fn names(list: &[String]) -> Result<Vec<QualifiedName>, MetaError> {
    list.iter().map(|s| name(s)).collect()
}

fn signature(text: &Option<String>) -> Result<Option<FunctionType>, MetaError> {
    text.as_deref()
        .map(|s| {
            s.parse::<FunctionType>()
                .map_err(|_| MetaError::UnresolvedTypeInMeta(s.to_owned()))
        })
        .transpose()
}

impl MetaFile {
    fn into_meta(self) -> Result<ReflektMeta, MetaError> {
        let packages: BTreeSet<QualifiedName> = names(&self.packages)?.into_iter().collect();

        let mut queries = Vec::with_capacity(self.queries.len());
        for mq in &self.queries {
            let sig = signature(&mq.signature)?;
            let q = Query::new(
                mq.kind,
                names(&mq.supertypes)?.into_iter().collect(),
                sig,
                names(&mq.annotations)?.into_iter().collect(),
                None,
                mq.shape,
            );
            if q.id.as_str() != mq.id {
                return Err(MetaError::CorruptMeta(format!(
                    "query id {} does not match its content (expected {})",
                    mq.id, q.id
                )));
            }
            if (q.kind == EntityKind::Function && !q.supertypes.is_empty())
                || (q.kind != EntityKind::Function && q.signature.is_some())
            {
                return Err(MetaError::CorruptMeta(format!(
                    "query {} mixes supertype and signature constraints",
                    q.id
                )));
            }
            queries.push(q);
        }
        queries.sort_by(|a, b| a.id.cmp(&b.id));
        queries.dedup_by(|a, b| a.id == b.id);

        let mut entities = Vec::with_capacity(self.entities.len());
        for me in &self.entities {
            let fqn = name(&me.fqn)?;
            let package = packages
                .iter()
                .filter(|p| fqn.starts_with(p))
                .max_by_key(|p| p.as_str().len())
                .cloned()
                .ok_or_else(|| {
                    MetaError::CorruptMeta(format!("entity `{fqn}` is outside the listed packages"))
                })?;
            let mut annotations = names(&me.annotations)?;
            annotations.sort();
            annotations.dedup();
            let mut supertypes = names(&me.supertypes)?;
            supertypes.sort();
            supertypes.dedup();
            entities.push(Entity {
                kind: me.kind,
                name: fqn.simple_name().to_owned(),
                package,
                annotations,
                supertypes,
                signature: signature(&me.signature)?,
                is_top_level: me.is_top_level,
                is_companion: me.is_companion,
                location: None,
                fqn,
            });
        }
        let entities = EntityIndex::from_entities(entities, packages.clone())
            .map_err(|dup| MetaError::CorruptMeta(format!("duplicate entity `{dup}`")))?;

        Ok(ReflektMeta {
            format_version: self.format_version,
            library_name: self.library_name,
            packages: packages.into_iter().collect(),
            queries,
            entities,
        })
    }
}

pub fn save_meta(meta: &ReflektMeta, path: &Path) -> Result<(), MetaError> {
    fs::write(path, meta.to_canonical_string()).map_err(|source| MetaError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_meta(path: &Path) -> Result<ReflektMeta, MetaError> {
    let text = fs::read_to_string(path).map_err(|source| MetaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ReflektMeta::parse(&text)
}

/// Merges the entity indexes of several libraries, ordered by library name.
pub fn library_index(metas: &[ReflektMeta]) -> Result<EntityIndex, MetaError> {
    let mut sorted: Vec<&ReflektMeta> = metas.iter().collect();
    sorted.sort_by(|a, b| a.library_name.cmp(&b.library_name));
    for pair in sorted.windows(2) {
        if pair[0].library_name == pair[1].library_name {
            return Err(MetaError::DuplicateLibrary(pair[0].library_name.clone()));
        }
    }
    let mut merged = EntityIndex::default();
    for meta in sorted {
        merged = merged
            .merge(&meta.entities)
            .map_err(MetaError::FqnCollision)?;
    }
    Ok(merged)
}

/// Everything a consuming build needs after linking libraries.
#[derive(Clone, Debug)]
pub struct LinkOutcome {
    pub merged: EntityIndex,
    pub hierarchy: TypeHierarchy,
    /// One result per distinct library query id, sorted by id.
    pub library_results: Vec<ResolvedResult>,
    /// In the order of the downstream queries.
    pub downstream_results: Vec<ResolvedResult>,
}

/// Resolves the libraries' queries and the downstream project's own queries
/// against the union of all indexes.
pub fn link_resolve(
    downstream: &EntityIndex,
    downstream_queries: &[Query],
    metas: &[ReflektMeta],
) -> Result<LinkOutcome, MetaError> {
    let libraries = library_index(metas)?;
    let merged = downstream
        .merge(&libraries)
        .map_err(MetaError::FqnCollision)?;
    let hierarchy = merged.hierarchy()?;

    let library_queries: BTreeMap<_, _> = metas
        .iter()
        .flat_map(|m| m.queries.iter())
        .map(|q| (q.id.clone(), q.clone()))
        .collect();
    let library_queries: Vec<Query> = library_queries.into_values().collect();
    let library_results = resolve_all(&merged, &hierarchy, &library_queries);
    let downstream_results = resolve_all(&merged, &hierarchy, downstream_queries);
    Ok(LinkOutcome {
        merged,
        hierarchy,
        library_results,
        downstream_results,
    })
}
