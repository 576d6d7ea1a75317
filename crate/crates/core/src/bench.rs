//! Synthetic projects and startup timings: scanning at startup versus
//! loading the lists a build has already materialized.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codegen::{self, parse_literal, Literal};
use crate::project::{self, BuildOutput, PipelineError};
use crate::query::{extract_queries, Query};
use crate::resolver::{resolve_all, ResolvedResult};

pub const ENTITIES_PER_FILE: usize = 100;
pub const DEFAULT_SIZES: [usize; 4] = [100, 1_000, 10_000, 100_000];
const MAIN_FILE: &str = "src/bench/Main.rk";

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub entity_count: usize,
    pub query_count: usize,
    pub match_fraction: f64,
    pub seed: u64,
    pub trials: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            entity_count: 1_000,
            query_count: 4,
            match_fraction: 0.01,
            seed: 7,
            trials: 10,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.match_fraction) {
            return Err(format!("match fraction {} is outside [0, 1]", self.match_fraction));
        }
        if self.trials == 0 {
            return Err("at least one trial is needed".into());
        }
        Ok(())
    }
}

/// Kind of the `i`-th generated entity: half functions, a quarter each
/// classes and objects.
fn kind_of(i: usize) -> char {
    match i % 4 {
        0 | 1 => 'f',
        2 => 'c',
        _ => 'o',
    }
}

fn query_is_function(j: usize) -> bool {
    j.is_multiple_of(2)
}

/// Generated sources plus the answer each query must get.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticProject {
    /// Relative path and text, sorted by path.
    pub files: Vec<(PathBuf, String)>,
    /// Per query, the FQNs it must return, sorted.
    pub expected: Vec<Vec<String>>,
}

/// Builds the project text. Query `j` asks for functions annotated
/// `@bench.Mark<j>` (even `j`) or classes extending `bench.Base<j>` (odd
/// `j`); the matching entities are drawn with a seeded shuffle.
pub fn generate_sources(spec: &SyntheticSpec) -> SyntheticProject {
    let n = spec.entity_count;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let functions: Vec<usize> = (0..n).filter(|&i| kind_of(i) == 'f').collect();
    let classes: Vec<usize> = (0..n).filter(|&i| kind_of(i) == 'c').collect();

    // tags[i] = queries entity i must match
    let mut tags: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut expected = Vec::with_capacity(spec.query_count);
    for j in 0..spec.query_count {
        let pool = if query_is_function(j) { &functions } else { &classes };
        let want = ((spec.match_fraction * n as f64).round() as usize).min(pool.len());
        let mut chosen: Vec<usize> = pool.choose_multiple(&mut rng, want).copied().collect();
        chosen.sort_unstable();
        for &i in &chosen {
            tags[i].push(j);
        }
        let mut fqns: Vec<String> = chosen.iter().map(|&i| entity_fqn(i)).collect();
        fqns.sort();
        expected.push(fqns);
    }

    let mut files = Vec::new();
    for (k, chunk) in (0..n).collect::<Vec<_>>().chunks(ENTITIES_PER_FILE).enumerate() {
        let mut text = format!("package bench.pkg{k:05}\n");
        for &i in chunk {
            text.push('\n');
            match kind_of(i) {
                'f' => {
                    for j in &tags[i] {
                        let _ = writeln!(text, "@bench.Mark{j}");
                    }
                    let _ = writeln!(text, "fun f{i}(x: Int): Int {{ return x + {} }}", i % 7);
                }
                'c' => {
                    let supers: Vec<String> = tags[i].iter().map(|j| format!("bench.Base{j}")).collect();
                    if supers.is_empty() {
                        let _ = writeln!(text, "class C{i}");
                    } else {
                        let _ = writeln!(text, "class C{i} : {}", supers.join(", "));
                    }
                }
                _ => {
                    let _ = writeln!(text, "object O{i}");
                }
            }
        }
        files.push((PathBuf::from(format!("src/pkg{k:05}.rk")), text));
    }

    let mut support = String::from("package bench\n");
    let mut main = String::from("package bench\n\nfun main(): Unit {\n");
    for j in 0..spec.query_count {
        if query_is_function(j) {
            let _ = write!(support, "\nclass Mark{j}\n");
            let _ = writeln!(main, "    val q{j} = Reflekt.functions().withAnnotations<Mark{j}>().toList()");
        } else {
            let _ = write!(support, "\nclass Base{j}\n");
            let _ = writeln!(main, "    val q{j} = Reflekt.classes().withSupertype<Base{j}>().toList()");
        }
    }
    main.push_str("}\n");
    files.push((PathBuf::from(MAIN_FILE), main));
    files.push((PathBuf::from("src/bench/Support.rk"), support));
    files.sort_by(|a, b| a.0.cmp(&b.0));
    SyntheticProject { files, expected }
}

fn entity_fqn(i: usize) -> String {
    let prefix = match kind_of(i) {
        'f' => "f",
        'c' => "C",
        _ => "O",
    };
    format!("bench.pkg{:05}.{prefix}{i}", i / ENTITIES_PER_FILE)
}

/// Writes the generated project under `dir`.
pub fn generate_project(spec: &SyntheticSpec, dir: &Path) -> Result<SyntheticProject, PipelineError> {
    let project = generate_sources(spec);
    for (rel, text) in &project.files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
        }
        fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))?;
    }
    Ok(project)
}

/// The run-time approach: read, parse and index the whole project, then
/// filter for every query.
pub fn run_baseline(root: &Path, queries: &[Query]) -> Result<Vec<ResolvedResult>, PipelineError> {
    let sources = project::read_sources(root)?;
    let files = project::parse_sources(&sources)?;
    let (index, hierarchy) = project::analyze(&files)?;
    Ok(resolve_all(&index, &hierarchy, queries))
}

/// The build-time approach at startup: read the rewritten entry file and
/// evaluate its literal lists.
pub fn run_precomputed(built_root: &Path) -> Result<Vec<Literal>, PipelineError> {
    let path = built_root.join(MAIN_FILE);
    let text = fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
    let mut out = Vec::new();
    for line in text.lines() {
        if let Some((_, rhs)) = line.split_once(" = ") {
            let literal = parse_literal(rhs.trim()).ok_or_else(|| {
                PipelineError::Internal(format!("not a literal in {}: {rhs}", path.display()))
            })?;
            out.push(literal);
        }
    }
    Ok(out)
}

/// Wall-clock split of one build.
#[derive(Clone, Copy, Debug)]
pub struct BuildTiming {
    pub total_ms: f64,
    /// Resolving queries and rewriting call sites.
    pub resolve_rewrite_ms: f64,
}

/// Full standalone build of `root` into `out`, timed by phase.
pub fn timed_build(root: &Path, out: &Path) -> Result<(BuildOutput, BuildTiming), PipelineError> {
    let start = Instant::now();
    let project = project::load_project(root)?;
    let (index, hierarchy) = project::analyze(&project.files)?;
    let queries = extract_queries(&project.files, &index)?;
    let mid = Instant::now();
    let results = resolve_all(&index, &hierarchy, &queries);
    let files = codegen::rewrite_project(&project.files, &queries, &results)?;
    let resolved = Instant::now();
    let output = BuildOutput {
        files,
        impl_file: None,
    };
    project::verify_output(&output)?;
    project::write_tree(Some(root), out, &output.entries())?;
    let end = Instant::now();
    Ok((
        output,
        BuildTiming {
            total_ms: ms(end - start),
            resolve_rewrite_ms: ms(resolved - mid),
        },
    ))
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Stats {
    pub median_ms: f64,
    /// Interquartile range.
    pub spread_ms: f64,
    pub samples: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Stats {
    pub fn from_samples(samples: &[f64]) -> Stats {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        Stats {
            median_ms: quantile(&s, 0.5),
            spread_ms: quantile(&s, 0.75) - quantile(&s, 0.25),
            samples: s.len(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchPoint {
    pub entities: usize,
    pub files: usize,
    /// Size of each query's answer.
    pub matches: Vec<usize>,
    pub baseline: Stats,
    pub precomputed: Stats,
    /// One-time cost of the build-time approach.
    pub build: Stats,
    pub resolve_rewrite: Stats,
    /// Median over trials of resolve+rewrite time divided by build time.
    pub resolve_rewrite_share: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub queries: usize,
    pub match_fraction: f64,
    pub seed: u64,
    pub trials: usize,
    pub points: Vec<BenchPoint>,
    /// Both approaches returned the same lists for every query and size.
    pub equivalent: bool,
}

/// Generates, builds and times one project size. Trials run sequentially
/// after one discarded warm-up run.
pub fn bench_point(spec: &SyntheticSpec, work: &Path) -> Result<(BenchPoint, bool), PipelineError> {
    spec.validate().map_err(PipelineError::Internal)?;
    let root = work.join(format!("n{}", spec.entity_count));
    let out = work.join(format!("n{}-built", spec.entity_count));
    let generated = generate_project(spec, &root)?;

    let mut build_samples = Vec::new();
    let mut rr_samples = Vec::new();
    let mut shares = Vec::new();
    for trial in 0..=spec.trials {
        let (_, timing) = timed_build(&root, &out)?;
        if trial > 0 {
            build_samples.push(timing.total_ms);
            rr_samples.push(timing.resolve_rewrite_ms);
            shares.push(timing.resolve_rewrite_ms / timing.total_ms);
        }
    }

    let loaded = project::load_project(&root)?;
    let resolution = project::resolve_project(&loaded.files)?;
    let queries = resolution.queries;

    let mut baseline_samples = Vec::new();
    let mut baseline_results = Vec::new();
    for trial in 0..=spec.trials {
        let start = Instant::now();
        let results = run_baseline(&root, &queries)?;
        let elapsed = ms(start.elapsed());
        if trial > 0 {
            baseline_samples.push(elapsed);
        }
        baseline_results = results;
    }

    let mut precomputed_samples = Vec::new();
    let mut literals = Vec::new();
    for trial in 0..=spec.trials {
        let start = Instant::now();
        let lists = run_precomputed(&out)?;
        let elapsed = ms(start.elapsed());
        if trial > 0 {
            precomputed_samples.push(elapsed);
        }
        literals = lists;
    }

    let from_scan: Vec<Vec<String>> = baseline_results
        .iter()
        .map(|r| r.refs.iter().map(|e| e.fqn.to_string()).collect())
        .collect();
    let from_build: Vec<Vec<String>> = literals
        .iter()
        .map(|l| l.items.iter().map(|(_, n)| n.to_string()).collect())
        .collect();
    let equivalent = from_scan == from_build && from_scan == generated.expected;

    shares.sort_by(f64::total_cmp);
    let point = BenchPoint {
        entities: spec.entity_count,
        files: generated.files.len(),
        matches: from_scan.iter().map(Vec::len).collect(),
        baseline: Stats::from_samples(&baseline_samples),
        precomputed: Stats::from_samples(&precomputed_samples),
        build: Stats::from_samples(&build_samples),
        resolve_rewrite: Stats::from_samples(&rr_samples),
        resolve_rewrite_share: quantile(&shares, 0.5),
    };
    let _ = fs::remove_dir_all(&root);
    let _ = fs::remove_dir_all(&out);
    Ok((point, equivalent))
}

/// Runs every size in `sizes` with the other parameters of `spec`.
pub fn run_bench(spec: &SyntheticSpec, sizes: &[usize]) -> Result<BenchReport, PipelineError> {
    spec.validate().map_err(PipelineError::Internal)?;
    let work = tempfile::tempdir().map_err(|e| PipelineError::io(Path::new("."), e))?;
    let mut points = Vec::new();
    let mut equivalent = true;
    for &n in sizes {
        let spec_n = SyntheticSpec {
            entity_count: n,
            ..spec.clone()
        };
        let (point, same) = bench_point(&spec_n, work.path())?;
        equivalent &= same;
        points.push(point);
    }
    Ok(BenchReport {
        queries: spec.query_count,
        match_fraction: spec.match_fraction,
        seed: spec.seed,
        trials: spec.trials,
        points,
        equivalent,
    })
}

impl BenchReport {
    pub fn point(&self, entities: usize) -> Option<&BenchPoint> {
        self.points.iter().find(|p| p.entities == entities)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "queries={} matchFraction={} seed={} trials={}\n",
            self.queries, self.match_fraction, self.seed, self.trials
        );
        let _ = writeln!(
            out,
            "{:>9} {:>6} {:>22} {:>22} {:>22} {:>8}",
            "entities", "files", "baseline ms (iqr)", "precomputed ms (iqr)", "build ms (iqr)", "resolve%"
        );
        for p in &self.points {
            let cell = |s: &Stats| format!("{:.3} ({:.3})", s.median_ms, s.spread_ms);
            let _ = writeln!(
                out,
                "{:>9} {:>6} {:>22} {:>22} {:>22} {:>7.2}%",
                p.entities,
                p.files,
                cell(&p.baseline),
                cell(&p.precomputed),
                cell(&p.build),
                p.resolve_rewrite_share * 100.0
            );
        }
        let _ = writeln!(
            out,
            "results {}",
            if self.equivalent { "identical across approaches" } else { "DIFFER between approaches" }
        );
        out
    }
}
