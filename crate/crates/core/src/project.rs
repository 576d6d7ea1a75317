//! Loading a project from disk and running the pipeline stages over it.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;
use walkdir::WalkDir;

use crate::codegen::{self, CodegenError, RewrittenFile, IMPL_FILE_NAME};
use crate::frontend::{build_index, build_index_linked, parse_file, EntityIndex, FrontendError, SourceFile};
use crate::meta::{library_index, link_resolve, MetaError, ReflektMeta};
use crate::name::SourcePos;
use crate::query::{extract_queries, Query, QueryError};
use crate::resolver::{resolve_all, ResolvedResult};
use crate::types::{CyclicHierarchy, TypeHierarchy};

pub const SOURCE_EXTENSION: &str = "rk";
/// Written into every output tree so later runs over an enclosing
/// directory skip it.
pub const OUTPUT_MARKER: &str = ".srq-output";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: no source files", .0.display())]
    NoSources(PathBuf),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Cycle(#[from] CyclicHierarchy),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error(transparent)]
    Codegen(#[from] CodegenError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Source position to underline, when the error has one.
    pub fn position(&self) -> Option<&SourcePos> {
        match self {
            PipelineError::Frontend(e) => Some(e.position()),
            PipelineError::Query(e) => Some(e.position()),
            PipelineError::Meta(MetaError::SmartCallInLibrary { at }) => Some(at),
            _ => None,
        }
    }

    /// 1 for problems with the input, 2 for broken internal invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Internal(_) | PipelineError::Codegen(_) => 2,
            _ => 1,
        }
    }
}

/// Source files of a project, with paths relative to its root.
#[derive(Clone, Debug)]
pub struct Project {
    pub root: PathBuf,
    pub files: Vec<SourceFile>,
}

impl Project {
    pub fn source_text(&self, path: &Path) -> Option<&str> {
        self.files
            .iter()
            .find(|f| f.path == path)
            .map(|f| f.text.as_str())
    }
}

fn is_generated_dir(path: &Path) -> bool {
    path.join(OUTPUT_MARKER).is_file()
        || path
            .file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with(".srq-out-"))
}

/// Relative paths of every `.rk` file under `root`, sorted. Output trees
/// nested below `root` are skipped.
pub fn discover_sources(root: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    let walk = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_type().is_dir() || !is_generated_dir(e.path()));
    for entry in walk {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            PipelineError::Io {
                path,
                source: e.into(),
            }
        })?;
        if entry.file_type().is_file()
            && entry.path().extension().is_some_and(|x| x == SOURCE_EXTENSION)
        {
            let rel = entry.path().strip_prefix(root).expect("walk stays under root");
            out.push(rel.to_path_buf());
        }
    }
    out.sort();
    Ok(out)
}

/// Reads every source file. Texts come back in path order.
pub fn read_sources(root: &Path) -> Result<Vec<(PathBuf, String)>, PipelineError> {
    if !root.is_dir() {
        return Err(PipelineError::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let paths = discover_sources(root)?;
    paths
        .into_par_iter()
        .map(|rel| {
            let text = fs::read_to_string(root.join(&rel))
                .map_err(|e| PipelineError::io(&root.join(&rel), e))?;
            Ok((rel, text))
        })
        .collect()
}

pub fn parse_sources(sources: &[(PathBuf, String)]) -> Result<Vec<SourceFile>, PipelineError> {
    let parsed: Vec<Result<SourceFile, FrontendError>> = sources
        .par_iter()
        .map(|(path, text)| parse_file(path, text))
        .collect();
    // First error in path order, independent of scheduling.
    parsed
        .into_iter()
        .map(|r| r.map_err(PipelineError::from))
        .collect()
}

pub fn load_project(root: &Path) -> Result<Project, PipelineError> {
    let sources = read_sources(root)?;
    if sources.is_empty() {
        return Err(PipelineError::NoSources(root.to_path_buf()));
    }
    Ok(Project {
        root: root.to_path_buf(),
        files: parse_sources(&sources)?,
    })
}

/// Index, hierarchy, queries and their answers for one project.
#[derive(Clone, Debug)]
pub struct Resolution {
    pub index: EntityIndex,
    pub hierarchy: TypeHierarchy,
    pub queries: Vec<Query>,
    /// Parallel to `queries`.
    pub results: Vec<ResolvedResult>,
}

pub fn analyze(files: &[SourceFile]) -> Result<(EntityIndex, TypeHierarchy), PipelineError> {
    let index = build_index(files)?;
    let hierarchy = index.hierarchy()?;
    Ok((index, hierarchy))
}

/// The standalone pipeline up to, not including, rewriting.
pub fn resolve_project(files: &[SourceFile]) -> Result<Resolution, PipelineError> {
    let (index, hierarchy) = analyze(files)?;
    let queries = extract_queries(files, &index)?;
    let results = resolve_all(&index, &hierarchy, &queries);
    Ok(Resolution {
        index,
        hierarchy,
        queries,
        results,
    })
}

/// Output of a build: every source file (rewritten or not) plus the
/// generated impl file, if any.
#[derive(Clone, Debug)]
pub struct BuildOutput {
    pub files: Vec<RewrittenFile>,
    pub impl_file: Option<String>,
}

impl BuildOutput {
    pub fn call_sites(&self) -> usize {
        self.files.iter().map(|f| f.replaced).sum()
    }

    pub fn files_changed(&self) -> usize {
        self.files.iter().filter(|f| f.replaced > 0).count()
    }

    /// Relative path and contents of every file to write.
    pub fn entries(&self) -> Vec<(PathBuf, &str)> {
        let mut out: Vec<(PathBuf, &str)> = self
            .files
            .iter()
            .map(|f| (f.path.clone(), f.text.as_str()))
            .collect();
        if let Some(text) = &self.impl_file {
            out.push((PathBuf::from(IMPL_FILE_NAME), text.as_str()));
        }
        out
    }
}

/// Re-parses the changed output and checks that no query chain survived.
/// Unchanged files had no chains to begin with.
pub fn verify_output(output: &BuildOutput) -> Result<(), PipelineError> {
    let changed = output
        .files
        .iter()
        .filter(|f| f.replaced > 0)
        .map(|f| (f.path.clone(), f.text.as_str()));
    let generated = output
        .impl_file
        .as_deref()
        .map(|t| (PathBuf::from(IMPL_FILE_NAME), t));
    for (path, text) in changed.chain(generated) {
        let file = parse_file(&path, text).map_err(|e| {
            PipelineError::Internal(format!("rewritten file does not parse: {e}"))
        })?;
        let names = EntityIndex::default();
        // Any surviving chain either parses as a query or fails to; both are bugs.
        let leftover = crate::query::extract_queries_from_file(&file, names.names());
        if !matches!(&leftover, Ok(q) if q.is_empty()) {
            return Err(PipelineError::Internal(format!(
                "{}: query chain left after rewriting",
                path.display()
            )));
        }
    }
    Ok(())
}

pub fn build_project(files: &[SourceFile]) -> Result<(Resolution, BuildOutput), PipelineError> {
    let resolution = resolve_project(files)?;
    let rewritten = codegen::rewrite_project(files, &resolution.queries, &resolution.results)?;
    let output = BuildOutput {
        files: rewritten,
        impl_file: None,
    };
    verify_output(&output)?;
    Ok((resolution, output))
}

pub fn emit_meta(files: &[SourceFile], library_name: &str) -> Result<ReflektMeta, PipelineError> {
    let (index, _) = analyze(files)?;
    let queries = extract_queries(files, &index)?;
    Ok(ReflektMeta::from_library(library_name, &index, &queries)?)
}

/// Downstream build against linked libraries. Without metas this is a plain
/// build and no impl file is produced.
pub fn link_project(
    files: &[SourceFile],
    metas: &[ReflektMeta],
) -> Result<(Resolution, BuildOutput), PipelineError> {
    if metas.is_empty() {
        return build_project(files);
    }
    let libraries = library_index(metas)?;
    let downstream = build_index_linked(files, &libraries)?;
    let visible = downstream
        .merge(&libraries)
        .map_err(|n| PipelineError::Meta(MetaError::FqnCollision(n)))?;
    let queries = extract_queries(files, &visible)?;
    let linked = link_resolve(&downstream, &queries, metas)?;
    let rewritten = codegen::rewrite_project(files, &queries, &linked.downstream_results)?;
    let output = BuildOutput {
        files: rewritten,
        impl_file: Some(codegen::emit_impl_file(&linked.library_results)?),
    };
    verify_output(&output)?;
    Ok((
        Resolution {
            index: linked.merged,
            hierarchy: linked.hierarchy,
            queries,
            results: linked.downstream_results,
        },
        output,
    ))
}

/// Writes a tree of files under `out`, all or nothing: everything goes to a
/// sibling temp directory that replaces `out` once complete. Files under
/// `root` that are not sources are copied along.
pub fn write_tree(
    root: Option<&Path>,
    out: &Path,
    entries: &[(PathBuf, &str)],
) -> Result<(), PipelineError> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| PipelineError::io(&parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".srq-out-")
        .tempdir_in(&parent)
        .map_err(|e| PipelineError::io(&parent, e))?;

    if let Some(root) = root {
        copy_non_sources(root, out, staging.path())?;
    }
    let marker = staging.path().join(OUTPUT_MARKER);
    fs::write(&marker, "").map_err(|e| PipelineError::io(&marker, e))?;
    for (rel, text) in entries {
        let dest = staging.path().join(rel);
        if let Some(dir) = dest.parent() {
            fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
        fs::write(&dest, text).map_err(|e| PipelineError::io(&dest, e))?;
    }

    if out.exists() {
        let meta = fs::symlink_metadata(out).map_err(|e| PipelineError::io(out, e))?;
        if meta.is_dir() {
            fs::remove_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
        } else {
            fs::remove_file(out).map_err(|e| PipelineError::io(out, e))?;
        }
    }
    let staged = staging.keep();
    fs::rename(&staged, out).map_err(|e| {
        let _ = fs::remove_dir_all(&staged);
        PipelineError::io(out, e)
    })
}

fn copy_non_sources(root: &Path, out: &Path, staging: &Path) -> Result<(), PipelineError> {
    let out_abs = fs::canonicalize(out).ok();
    let mut walk = WalkDir::new(root).sort_by_file_name().into_iter();
    while let Some(entry) = walk.next() {
        let entry = entry.map_err(|e| PipelineError::io(root, e.into()))?;
        let path = entry.path();
        if entry.file_type().is_dir() {
            let canonical = fs::canonicalize(path).ok();
            let is_output = out_abs.is_some() && canonical == out_abs;
            if is_output || (entry.depth() > 0 && is_generated_dir(path)) {
                walk.skip_current_dir();
            }
            continue;
        }
        if !entry.file_type().is_file()
            || path.extension().is_some_and(|x| x == SOURCE_EXTENSION)
        {
            continue;
        }
        let rel = path.strip_prefix(root).expect("walk stays under root");
        let dest = staging.join(rel);
        if let Some(dir) = dest.parent() {
            fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
        fs::copy(path, &dest).map_err(|e| PipelineError::io(path, e))?;
    }
    Ok(())
}

/// Writes one file atomically via a temp file in the same directory.
pub fn write_file_atomic(path: &Path, text: &str) -> Result<(), PipelineError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| PipelineError::io(&dir, e))?;
    tmp.write_all(text.as_bytes())
        .map_err(|e| PipelineError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| PipelineError::io(path, e.error))?;
    Ok(())
}
