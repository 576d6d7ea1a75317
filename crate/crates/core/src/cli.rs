//! The `srq` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::bench::{run_bench, SyntheticSpec, DEFAULT_SIZES};
use crate::frontend::{Entity, EntityIndex};
use crate::meta::{load_meta, ReflektMeta};
use crate::name::SourcePos;
use crate::project::{self, PipelineError, Resolution};

pub const THREADS_ENV: &str = "SRQ_THREADS";

#[derive(Debug, Parser)]
#[command(name = "srq", version, about = "Build-time reflection queries for .rk projects")]
pub struct Cli {
    /// Print per-phase wall-clock timings after the command output.
    #[arg(long, global = true)]
    pub timings: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List every class, object and function in a project.
    Analyze {
        root: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Show each query in a project and what it resolves to.
    Resolve {
        root: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Replace every query with its result, writing the project to `-o`.
    Build {
        root: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Save a library's queries and entities to a meta file.
    EmitMeta {
        root: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        library_name: String,
    },
    /// Build a project against library meta files, generating ReflektImpl.rk.
    Link {
        root: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long = "meta")]
        metas: Vec<PathBuf>,
    },
    /// Time scanning at startup against precomputed results.
    Bench {
        /// Project sizes to measure; repeat or separate with commas.
        #[arg(long, value_delimiter = ',')]
        entities: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        queries: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0.01)]
        match_fraction: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

/// Reads the thread cap from the environment; 0 or unset means automatic.
pub fn thread_count_from_env() -> Result<usize, String> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")),
        Err(_) => Ok(0),
    }
}

/// Renders `error: ...` with the offending source line and a caret.
pub fn render_diagnostic(message: &str, at: Option<&SourcePos>, text: Option<&str>) -> String {
    let mut out = format!("error: {message}\n");
    let (Some(at), Some(text)) = (at, text) else {
        return out;
    };
    let Some(line) = text.lines().nth(at.line.saturating_sub(1)) else {
        return out;
    };
    let gutter = at.line.to_string().len();
    let col = at.col.max(1);
    let line_len = line.chars().count();
    let width = text
        .get(at.span.start..at.span.end)
        .map(|s| s.lines().next().unwrap_or("").chars().count())
        .unwrap_or(1)
        .clamp(1, line_len.saturating_sub(col - 1).max(1));
    out.push_str(&format!("{:gutter$}--> {at}\n", ""));
    out.push_str(&format!("{:gutter$} |\n", ""));
    out.push_str(&format!("{} | {line}\n", at.line));
    out.push_str(&format!(
        "{:gutter$} | {}{}\n",
        "",
        " ".repeat(col - 1),
        "^".repeat(width)
    ));
    out
}

struct Phases {
    enabled: bool,
    last: Instant,
    entries: Vec<(&'static str, f64)>,
}

impl Phases {
    fn new(enabled: bool) -> Self {
        Phases {
            enabled,
            last: Instant::now(),
            entries: Vec::new(),
        }
    }

    fn mark(&mut self, name: &'static str) {
        let now = Instant::now();
        self.entries
            .push((name, (now - self.last).as_secs_f64() * 1e3));
        self.last = now;
    }

    fn report(&self, out: &mut dyn Write) -> std::io::Result<()> {
        if self.enabled {
            let parts: Vec<String> = self
                .entries
                .iter()
                .map(|(n, ms)| format!("{n}={ms:.3}ms"))
                .collect();
            writeln!(out, "timings: {}", parts.join(" "))?;
        }
        Ok(())
    }
}

enum Failure {
    Pipeline(PipelineError),
    Usage(String),
    Output(std::io::Error),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Output(e)
    }
}

/// Keeps source texts so diagnostics can quote them.
struct Loaded {
    sources: Vec<(PathBuf, String)>,
    root: PathBuf,
}

impl Loaded {
    fn read(root: &Path) -> Result<Loaded, PipelineError> {
        let sources = project::read_sources(root)?;
        if sources.is_empty() {
            return Err(PipelineError::NoSources(root.to_path_buf()));
        }
        Ok(Loaded {
            sources,
            root: root.to_path_buf(),
        })
    }

    fn text(&self, path: &Path) -> Option<&str> {
        self.sources
            .iter()
            .find(|(p, _)| p == path)
            .map(|(_, t)| t.as_str())
    }
}

/// Runs the CLI with explicit arguments and streams; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{rendered}")
            } else {
                write!(stderr, "{rendered}")
            };
            return code;
        }
    };
    let mut loaded: Option<Loaded> = None;
    match execute(&cli, &mut loaded, stdout) {
        Ok(()) => 0,
        Err(Failure::Pipeline(e)) => {
            let at = e.position();
            let text = at.and_then(|p| loaded.as_ref().and_then(|l| l.text(&p.path)));
            let _ = write!(stderr, "{}", render_diagnostic(&e.to_string(), at, text));
            e.exit_code()
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
        Err(Failure::Output(e)) => {
            let _ = writeln!(stderr, "error: writing output: {e}");
            2
        }
    }
}

fn load<'a>(root: &Path, slot: &'a mut Option<Loaded>) -> Result<&'a Loaded, PipelineError> {
    Ok(slot.insert(Loaded::read(root)?))
}

fn execute(cli: &Cli, slot: &mut Option<Loaded>, out: &mut dyn Write) -> Result<(), Failure> {
    let mut phases = Phases::new(cli.timings);
    match &cli.command {
        Command::Analyze { root, json } => {
            let loaded = load(root, slot)?;
            let files = project::parse_sources(&loaded.sources)?;
            phases.mark("parse");
            let (index, _) = project::analyze(&files)?;
            phases.mark("index");
            if *json {
                writeln!(out, "{}", pretty(&index_json(&index)))?;
            } else {
                write!(out, "{}", index_table(&index))?;
            }
        }
        Command::Resolve { root, json } => {
            let loaded = load(root, slot)?;
            let files = project::parse_sources(&loaded.sources)?;
            phases.mark("parse");
            let resolution = project::resolve_project(&files)?;
            phases.mark("resolve");
            if *json {
                writeln!(out, "{}", pretty(&resolution_json(&resolution)))?;
            } else {
                write!(out, "{}", resolution_table(&resolution))?;
            }
        }
        Command::Build { root, out: dest } => {
            let loaded = load(root, slot)?;
            let files = project::parse_sources(&loaded.sources)?;
            phases.mark("parse");
            let (_, output) = project::build_project(&files)?;
            phases.mark("resolve+rewrite");
            project::write_tree(Some(&loaded.root), dest, &output.entries())?;
            phases.mark("write");
            writeln!(
                out,
                "rewrote {} call sites in {} files",
                output.call_sites(),
                output.files_changed()
            )?;
        }
        Command::EmitMeta {
            root,
            out: dest,
            library_name,
        } => {
            if library_name.trim().is_empty() {
                return Err(Failure::Usage("--library-name must not be empty".into()));
            }
            let loaded = load(root, slot)?;
            let files = project::parse_sources(&loaded.sources)?;
            phases.mark("parse");
            let meta = project::emit_meta(&files, library_name)?;
            phases.mark("analyze");
            project::write_file_atomic(dest, &meta.to_canonical_string())?;
            phases.mark("write");
            writeln!(
                out,
                "wrote {} with {} queries and {} entities",
                dest.display(),
                meta.queries.len(),
                meta.entities.len()
            )?;
        }
        Command::Link {
            root,
            out: dest,
            metas,
        } => {
            let metas: Vec<ReflektMeta> = metas
                .iter()
                .map(|p| load_meta(p).map_err(PipelineError::from))
                .collect::<Result<_, _>>()?;
            let loaded = load(root, slot)?;
            let files = project::parse_sources(&loaded.sources)?;
            phases.mark("parse");
            let (_, output) = project::link_project(&files, &metas)?;
            phases.mark("link");
            project::write_tree(Some(&loaded.root), dest, &output.entries())?;
            phases.mark("write");
            writeln!(
                out,
                "rewrote {} call sites in {} files",
                output.call_sites(),
                output.files_changed()
            )?;
            if output.impl_file.is_some() {
                let entries: usize = {
                    let mut ids: Vec<_> = metas.iter().flat_map(|m| m.queries.iter().map(|q| &q.id)).collect();
                    ids.sort();
                    ids.dedup();
                    ids.len()
                };
                writeln!(
                    out,
                    "generated {} with {entries} entries",
                    crate::codegen::IMPL_FILE_NAME
                )?;
            }
        }
        Command::Bench {
            entities,
            queries,
            trials,
            match_fraction,
            seed,
            json,
        } => {
            let spec = SyntheticSpec {
                entity_count: 0,
                query_count: *queries,
                match_fraction: *match_fraction,
                seed: *seed,
                trials: *trials,
            };
            spec.validate().map_err(Failure::Usage)?;
            let sizes = if entities.is_empty() {
                DEFAULT_SIZES.to_vec()
            } else {
                entities.clone()
            };
            let report = run_bench(&spec, &sizes)?;
            phases.mark("bench");
            if *json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
            } else {
                write!(out, "{}", report.to_table())?;
            }
        }
    }
    phases.report(out)?;
    Ok(())
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes")
}

fn entity_json(e: &Entity) -> Value {
    json!({
        "kind": e.kind.as_str(),
        "fqn": e.fqn.as_str(),
        "annotations": e.annotations.iter().map(|a| a.as_str()).collect::<Vec<_>>(),
        "supertypes": e.supertypes.iter().map(|a| a.as_str()).collect::<Vec<_>>(),
        "signature": e.signature.as_ref().map(ToString::to_string),
        "isTopLevel": e.is_top_level,
        "isCompanion": e.is_companion,
        "location": e.location.as_ref().map(ToString::to_string),
    })
}

fn sorted_entities(index: &EntityIndex) -> Vec<&Entity> {
    let mut all: Vec<&Entity> = index.iter().collect();
    all.sort_by(|a, b| a.fqn.cmp(&b.fqn));
    all
}

fn index_json(index: &EntityIndex) -> Value {
    json!({
        "packages": index.packages.iter().map(|p| p.as_str()).collect::<Vec<_>>(),
        "entities": sorted_entities(index).into_iter().map(entity_json).collect::<Vec<_>>(),
    })
}

fn index_table(index: &EntityIndex) -> String {
    let rows: Vec<[String; 4]> = sorted_entities(index)
        .into_iter()
        .map(|e| {
            let mut detail = Vec::new();
            if let Some(sig) = &e.signature {
                detail.push(sig.to_string());
            }
            if !e.supertypes.is_empty() {
                let s: Vec<&str> = e.supertypes.iter().map(|n| n.as_str()).collect();
                detail.push(format!(": {}", s.join(", ")));
            }
            if !e.annotations.is_empty() {
                let s: Vec<String> = e.annotations.iter().map(|n| format!("@{n}")).collect();
                detail.push(s.join(" "));
            }
            [
                e.kind.as_str().to_owned(),
                e.fqn.to_string(),
                detail.join("  "),
                e.location.as_ref().map(ToString::to_string).unwrap_or_default(),
            ]
        })
        .collect();
    let w0 = rows.iter().map(|r| r[0].len()).max().unwrap_or(0).max(4);
    let w1 = rows.iter().map(|r| r[1].len()).max().unwrap_or(0).max(3);
    let w2 = rows.iter().map(|r| r[2].len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:w0$}  {:w1$}  {:w2$}  {}\n", "KIND", "FQN", "DETAIL", "LOCATION");
    for r in &rows {
        out.push_str(format!("{:w0$}  {:w1$}  {:w2$}  {}", r[0], r[1], r[2], r[3]).trim_end());
        out.push('\n');
    }
    out.push_str(&format!("{} entities in {} packages\n", rows.len(), index.packages.len()));
    out
}

fn resolution_json(r: &Resolution) -> Value {
    let queries: Vec<Value> = r
        .queries
        .iter()
        .zip(&r.results)
        .map(|(q, res)| {
            json!({
                "id": q.id.as_str(),
                "site": q.site.as_ref().map(|s| s.pos.to_string()),
                "query": q.to_chain_text(),
                "kind": q.kind.as_str(),
                "shape": q.shape.as_str(),
                "results": res.refs.iter().map(|e| json!({"kind": e.kind.as_str(), "fqn": e.fqn.as_str()})).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "queries": queries })
}

fn resolution_table(r: &Resolution) -> String {
    let mut out = String::new();
    for (q, res) in r.queries.iter().zip(&r.results) {
        let site = q.site.as_ref().map(|s| s.pos.to_string()).unwrap_or_default();
        out.push_str(&format!("{site}  [{}]\n  {}\n", q.id, q.to_chain_text()));
        if res.refs.is_empty() {
            out.push_str("    (no matches)\n");
        }
        for e in &res.refs {
            out.push_str(&format!("    {} {}\n", e.kind.as_str(), e.fqn));
        }
    }
    out.push_str(&format!("{} queries\n", r.queries.len()));
    out
}
