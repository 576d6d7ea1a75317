//! Checks shared by the integration tests and the acceptance runner. Each
//! returns a one-line summary on success and a description of the first
//! counterexample on failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use srq_core::codegen::{emit_impl_file, parse_literal};
use srq_core::meta::{load_meta, save_meta, MetaError, ReflektMeta};
use srq_core::project::{build_project, emit_meta, link_project, parse_sources, resolve_project, PipelineError};
use srq_core::resolver::{resolve_all, ResolvedResult};
use srq_core::types::TypeHierarchy;
use srq_core::{build_index, extract_queries, parse_file, EntityKind, QualifiedName, Query, Shape, SourceFile};

use super::{random_dag, random_project, random_query, random_types, MEntity, MType, Model, Oracle, WarshallOracle};

pub type Check = Result<String, String>;

fn qn(s: &str) -> QualifiedName {
    QualifiedName::parse(s).unwrap()
}

pub fn parse_all(files: &[(PathBuf, String)]) -> Vec<SourceFile> {
    files
        .iter()
        .map(|(p, t)| parse_file(p, t).unwrap_or_else(|e| panic!("{e}\n{t}")))
        .collect()
}

pub fn write_files(root: &Path, files: &[(PathBuf, String)]) {
    for (rel, text) in files {
        let path = root.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }
}

/// Every file under `root`, keyed by relative path.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_path_buf();
            (rel, fs::read(e.path()).unwrap())
        })
        .collect()
}

fn fqns(r: &ResolvedResult) -> Vec<String> {
    r.refs.iter().map(|e| e.fqn.to_string()).collect()
}

// ---------------------------------------------------------------------------
// Resolver against the brute-force filter

pub fn oracle_equivalence(projects: u64, per_project: usize) -> Check {
    let mut cases = 0;
    let mut non_empty = 0;
    for seed in 0..projects {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_project(&mut rng, 50);
        let files = parse_all(&model.files);
        let index = build_index(&files).map_err(|e| format!("seed {seed}: {e}"))?;
        let h = index.hierarchy().map_err(|e| format!("seed {seed}: {e}"))?;
        let oracle = Oracle::new(&model);
        let queries: Vec<Query> = (0..per_project).map(|_| random_query(&mut rng, &model)).collect();
        let results = resolve_all(&index, &h, &queries);
        for (q, r) in queries.iter().zip(&results) {
            let want = oracle.answer(q);
            if fqns(r) != want {
                return Err(format!(
                    "seed {seed}: {} gave {:?}, expected {want:?}",
                    q.to_chain_text(),
                    fqns(r)
                ));
            }
            cases += 1;
            non_empty += usize::from(!want.is_empty());
        }
    }
    // A generator whose queries almost never match would make this vacuous.
    if non_empty * 4 <= cases {
        return Err(format!("only {non_empty} of {cases} answers non-empty"));
    }
    Ok(format!("{cases} queries over {projects} projects, {non_empty} non-empty"))
}

// ---------------------------------------------------------------------------
// Subtyping

fn hierarchy_of(names: &[String], direct: &[Vec<usize>]) -> TypeHierarchy {
    let map = names
        .iter()
        .zip(direct)
        .skip(1)
        .map(|(n, sups)| (qn(n), sups.iter().map(|&j| qn(&names[j])).collect()))
        .collect();
    TypeHierarchy::new(map).expect("edges point to lower indices")
}

pub fn subtyping_laws(hierarchies: u64) -> Check {
    let mut pairs = 0usize;
    let any = MType::Nom("Any".into());
    for seed in 0..hierarchies {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // At most 8 types including Any.
        let n = rng.gen_range(0..=7);
        let (names, direct) = random_dag(&mut rng, n);
        let h = hierarchy_of(&names, &direct);
        let oracle = WarshallOracle::new(names.clone(), &direct);
        let mut atoms = names.clone();
        atoms.push("Int".into());
        atoms.push("x.Unknown".into());
        let mut types: Vec<MType> = atoms.iter().map(|a| MType::Nom(a.clone())).collect();
        types.extend(random_types(&mut rng, &atoms, 16));
        let refs: Vec<_> = types.iter().map(MType::to_typeref).collect();
        let sub = |i: usize, j: usize| h.is_subtype_of(&refs[i], &refs[j]);
        let fail = |what: &str, i: usize, j: usize| {
            format!("seed {seed}: {what}: {} <: {}", refs[i], refs[j])
        };

        for i in 0..types.len() {
            if !sub(i, i) {
                return Err(fail("not reflexive", i, i));
            }
            if !h.is_subtype_of(&refs[i], &any.to_typeref()) {
                return Err(format!("seed {seed}: {} is not below Any", refs[i]));
            }
            if h.is_subtype_of(&any.to_typeref(), &refs[i]) != (types[i] == any) {
                return Err(format!("seed {seed}: Any <: {}", refs[i]));
            }
            for j in 0..types.len() {
                pairs += 1;
                if sub(i, j) != oracle.sub(&types[i], &types[j]) {
                    return Err(fail("disagrees with enumeration", i, j));
                }
            }
        }
        let k = types.len().min(12);
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    if sub(i, j) && sub(j, l) && !sub(i, l) {
                        return Err(fail("not transitive", i, l));
                    }
                }
            }
        }
    }
    Ok(format!("{pairs} ordered pairs over {hierarchies} hierarchies"))
}

// ---------------------------------------------------------------------------
// Worked examples

fn resolve_text(text: &str) -> Result<Vec<(String, Vec<String>)>, String> {
    let file = parse_file(Path::new("p/Main.rk"), text).map_err(|e| e.to_string())?;
    let r = resolve_project(&[file]).map_err(|e| e.to_string())?;
    Ok(r.queries
        .iter()
        .zip(&r.results)
        .map(|(q, res)| (q.to_chain_text(), fqns(res)))
        .collect())
}

fn expect_answers(label: &str, text: &str, want: &[&[&str]]) -> Result<(), String> {
    let got = resolve_text(text).map_err(|e| format!("{label}: {e}"))?;
    let got: Vec<Vec<String>> = got.into_iter().map(|(_, r)| r).collect();
    let want: Vec<Vec<String>> = want
        .iter()
        .map(|w| w.iter().map(|s| s.to_string()).collect())
        .collect();
    if got != want {
        return Err(format!("{label}: got {got:?}, expected {want:?}"));
    }
    Ok(())
}

pub const CLASS_QUERY_FIXTURE: &str = "package p

class A
class C

@C
class B1 : A
class B2 : A

fun main() {
    val found = Reflekt.classes().withSupertype<A>().withAnnotations<C>().toSet()
}
";

pub const CLASS_QUERY_REWRITTEN: &str = "package p

class A
class C

@C
class B1 : A
class B2 : A

fun main() {
    val found = setOf(p.B1::class)
}
";

pub const FUNCTION_QUERY_FIXTURE: &str = "package p

class A

@A
fun f1() { println(\"1\") }
@A
fun f2(): Int { return 2 }
@A
fun f3(x: Int) { }
fun f4() { }

object Holder {
    @A
    fun f5() { }
}

fun main() {
    val noArgs = Reflekt.functions().withSignature<() -> Unit>().withAnnotations<A>().toList()
    val anyRet = Reflekt.functions().withSignature<() -> Any>().withAnnotations<A>().toList()
}
";

pub const COMPANION_FIXTURE: &str = "package p

class A {
    companion object K { }
}
class B {
    companion object Factory
}
object Single
class C {
    object Nested
}

fun main() {
    val companions = SmartReflekt.objects<Any>().filter { it.isCompanion }.resolve()
    val all = Reflekt.objects().withSupertype<Any>().toList()
}
";

pub const NAMED_FUNCTION_FIXTURE: &str = "package p

fun foo() { }
fun foo2() { }
fun bar() { }
fun fooWithArg(x: Int) { }

object O {
    fun foo() { }
}

class K {
    fun foo() { }
}

fun main() {
    val found = SmartReflekt.functions<() -> Unit>().filter { it.isTopLevel && it.name == \"foo\" }.resolve()
}
";

pub const SCHEDULED_FIXTURE: &str = "package p

class Scheduled

@Scheduled
fun tick(): Unit { println(\"tick\") }
@Scheduled
fun report(): Int { return 0 }
@Scheduled
fun withArg(n: Int) { }
fun untagged() { }

fun main() {
    val jobs = Reflekt.functions().withSignature<() -> Unit>().withAnnotations<Scheduled>().toList()
}
";

pub const FOREIGN_CAPTURE_FIXTURE: &str = "package p

fun getName(): String { return \"foo\" }
fun foo() { }

fun main() {
    val found = SmartReflekt.functions<() -> Unit>().filter { it.name == getName() }.resolve()
}
";

pub fn worked_examples() -> Check {
    expect_answers("class query", CLASS_QUERY_FIXTURE, &[&["p.B1"]])?;
    expect_answers(
        "function query",
        FUNCTION_QUERY_FIXTURE,
        &[&["p.Holder.f5", "p.f1"], &["p.Holder.f5", "p.f1", "p.f2"]],
    )?;
    expect_answers(
        "companion query",
        COMPANION_FIXTURE,
        &[&["p.A.K", "p.B.Factory"], &["p.A.K", "p.B.Factory", "p.C.Nested", "p.Single"]],
    )?;
    expect_answers("named function query", NAMED_FUNCTION_FIXTURE, &[&["p.foo"]])?;
    expect_answers("scheduled query", SCHEDULED_FIXTURE, &[&["p.tick"]])?;

    let file = parse_file(Path::new("p/Main.rk"), CLASS_QUERY_FIXTURE).unwrap();
    let (_, out) = build_project(&[file]).map_err(|e| e.to_string())?;
    if out.files[0].text != CLASS_QUERY_REWRITTEN {
        return Err(format!("class query rewrite:\n{}", out.files[0].text));
    }

    let file = parse_file(Path::new("p/Main.rk"), FOREIGN_CAPTURE_FIXTURE).unwrap();
    let index = build_index(std::slice::from_ref(&file)).unwrap();
    match extract_queries(&[file], &index) {
        Err(e) if e.is_foreign_capture() && e.to_string().contains("getName") => {}
        other => return Err(format!("foreign capture: {other:?}")),
    }
    Ok("6 fixtures".into())
}

// ---------------------------------------------------------------------------
// Rewriting

/// A query-bearing file in package `z`: where each chain was placed, and
/// the entities it declares, for the oracle.
pub struct UseFile {
    pub path: PathBuf,
    pub text: String,
    /// Byte offset and query of every chain, in text order.
    pub chains: Vec<(usize, Query)>,
    pub entities: Vec<MEntity>,
}

pub fn use_file(package: &str, path: &str, queries: &[Query]) -> UseFile {
    let mut text = format!("package {package}\n\nclass Host {{\n    fun go() {{\n");
    let mut chains = Vec::new();
    let split = queries.len() / 2;
    for (i, q) in queries.iter().enumerate() {
        if i == split {
            text.push_str("    }\n}\n\nfun main() {\n    // listOf() stays as written\n");
        }
        let indent = if i < split { "        " } else { "    " };
        text.push_str(&format!("{indent}val r{i} = "));
        chains.push((text.len(), q.clone()));
        text.push_str(&q.to_chain_text());
        text.push_str(if i % 3 == 2 { ".size\n" } else { "\n" });
    }
    if split == queries.len() {
        text.push_str("    }\n}\n\nfun main() {\n");
    }
    text.push_str("}\n");
    let host = format!("{package}.Host");
    let plain = |kind, fqn: String, name: &str, sig, top| MEntity {
        kind,
        fqn,
        name: name.into(),
        annotations: BTreeSet::new(),
        supers: Vec::new(),
        sig,
        top_level: top,
        companion: false,
    };
    let unit = || Box::new(MType::Nom("Unit".into()));
    let entities = vec![
        plain(EntityKind::Class, host.clone(), "Host", None, true),
        plain(
            EntityKind::Function,
            format!("{host}.go"),
            "go",
            Some(MType::Fun(vec![MType::Nom(host.clone())], unit())),
            false,
        ),
        plain(
            EntityKind::Function,
            format!("{package}.main"),
            "main",
            Some(MType::Fun(Vec::new(), unit())),
            true,
        ),
    ];
    UseFile {
        path: path.into(),
        text,
        chains,
        entities,
    }
}

/// The literal a query should become, rendered straight from the oracle.
pub fn expected_literal(model: &Model, oracle: &Oracle, q: &Query) -> String {
    let items: Vec<String> = oracle
        .answer(q)
        .iter()
        .map(|fqn| match model.get(fqn).unwrap().kind {
            EntityKind::Class => format!("{fqn}::class"),
            EntityKind::Object => fqn.clone(),
            EntityKind::Function => format!("::{fqn}"),
        })
        .collect();
    let ctor = if q.shape == Shape::Set { "setOf" } else { "listOf" };
    format!("{ctor}({})", items.join(", "))
}

pub fn rewrite_integrity(projects: u64) -> Check {
    let mut sites = 0;
    for seed in 0..projects {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = random_project(&mut rng, 40);
        let n = rng.gen_range(0..=5);
        let queries: Vec<Query> = (0..n).map(|_| random_query(&mut rng, &model)).collect();
        let use_file = use_file("z", "z/Use.rk", &queries);
        model.files.push((use_file.path.clone(), use_file.text.clone()));
        model.entities.extend(use_file.entities.iter().cloned());
        let oracle = Oracle::new(&model);

        let files = parse_all(&model.files);
        let (resolution, out) = build_project(&files).map_err(|e| format!("seed {seed}: {e}"))?;
        let fail = |msg: String| format!("seed {seed}: {msg}");

        // Byte-identical outside the chains, which become oracle literals.
        let mut want = String::new();
        let mut cursor = 0;
        for (start, q) in &use_file.chains {
            want.push_str(&use_file.text[cursor..*start]);
            want.push_str(&expected_literal(&model, &oracle, q));
            cursor = start + q.to_chain_text().len();
        }
        want.push_str(&use_file.text[cursor..]);
        for f in &out.files {
            let original = &model.files.iter().find(|(p, _)| *p == f.path).unwrap().1;
            let expected = if f.path == use_file.path { &want } else { original };
            if &f.text != expected {
                return Err(fail(format!("{} differs:\n{}", f.path.display(), f.text)));
            }
            if f.text.contains("Reflekt.") {
                return Err(fail(format!("chain left in {}", f.path.display())));
            }
        }
        sites += out.call_sites();

        // Output re-parses to the same entities and has no queries left.
        let outputs: Vec<(PathBuf, String)> = out.files.iter().map(|f| (f.path.clone(), f.text.clone())).collect();
        let reparsed = parse_sources(&outputs).map_err(|e| fail(e.to_string()))?;
        let again = build_index(&reparsed).map_err(|e| fail(e.to_string()))?;
        let before: Vec<_> = resolution.index.iter().map(|e| (&e.fqn, e.kind)).collect();
        let after: Vec<_> = again.iter().map(|e| (&e.fqn, e.kind)).collect();
        if before != after {
            return Err(fail("index changed by rewriting".into()));
        }
        let left = extract_queries(&reparsed, &again).map_err(|e| fail(e.to_string()))?;
        if !left.is_empty() {
            return Err(fail(format!("{} queries after rewriting", left.len())));
        }

        // Idempotent.
        let (_, twice) = build_project(&reparsed).map_err(|e| fail(e.to_string()))?;
        if twice.call_sites() != 0 || twice.files.iter().zip(&out.files).any(|(a, b)| a.text != b.text) {
            return Err(fail("second build changed the output".into()));
        }

        // Every referenced entity exists with the rendered kind.
        for r in &resolution.results {
            let literal = srq_core::codegen::emit_literal(r);
            let parsed = parse_literal(&literal).ok_or_else(|| fail(format!("unparsable {literal}")))?;
            for (kind, fqn) in parsed.items {
                match resolution.index.get(&fqn) {
                    Some(e) if e.kind == kind => {}
                    _ => return Err(fail(format!("dangling reference {fqn}"))),
                }
            }
        }
    }
    Ok(format!("{sites} call sites over {projects} projects"))
}

// ---------------------------------------------------------------------------
// Libraries

fn query_names(q: &Query) -> Vec<QualifiedName> {
    let mut out: Vec<QualifiedName> = q.supertypes.iter().chain(&q.annotations).cloned().collect();
    if let Some(sig) = &q.signature {
        sig.visit_names(&mut |n| out.push(n.clone()));
    }
    out
}

/// A random project split into a library (packages `ann`, `p` and `lib`)
/// and a downstream project (packages `q` and `app`). The library's core
/// queries only name types it can see.
pub struct LibraryFixture {
    pub model: Model,
    pub library: Vec<(PathBuf, String)>,
    pub downstream: Vec<(PathBuf, String)>,
    pub library_queries: Vec<Query>,
    pub downstream_queries: Vec<Query>,
}

pub fn library_fixture(seed: u64) -> LibraryFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = random_project(&mut rng, 40);
    let visible: BTreeSet<String> = model
        .entities
        .iter()
        .filter(|e| !e.fqn.starts_with("q."))
        .map(|e| e.fqn.clone())
        .chain(["Any", "Int", "String", "Unit", super::UNKNOWN].map(String::from))
        .collect();
    let mut library_queries = Vec::new();
    for _ in 0..200 {
        if library_queries.len() == 4 {
            break;
        }
        let q = random_query(&mut rng, &model);
        if !q.is_smart() && query_names(&q).iter().all(|n| visible.contains(n.as_str())) {
            library_queries.push(q);
        }
    }
    let downstream_queries: Vec<Query> = (0..3).map(|_| random_query(&mut rng, &model)).collect();
    let lib = use_file("lib", "lib/Queries.rk", &library_queries);
    let app = use_file("app", "app/Use.rk", &downstream_queries);
    model.entities.extend(lib.entities.iter().cloned());
    model.entities.extend(app.entities.iter().cloned());

    let (mut library, mut downstream) = (Vec::new(), Vec::new());
    for (path, text) in &model.files {
        if path.starts_with("q") {
            downstream.push((path.clone(), text.clone()));
        } else {
            library.push((path.clone(), text.clone()));
        }
    }
    library.push((lib.path.clone(), lib.text.clone()));
    downstream.push((app.path.clone(), app.text.clone()));
    model.files.push((lib.path, lib.text));
    model.files.push((app.path, app.text));
    LibraryFixture {
        model,
        library,
        downstream,
        library_queries,
        downstream_queries,
    }
}

pub fn library_scenario(projects: u64) -> Check {
    let dir = tempfile::tempdir().unwrap();
    let mut entries = 0;
    for seed in 0..projects {
        let fx = library_fixture(seed);
        let fail = |msg: String| format!("seed {seed}: {msg}");
        let meta = emit_meta(&parse_all(&fx.library), "lib").map_err(|e| fail(e.to_string()))?;
        let path = dir.path().join("lib.reflektmeta");
        save_meta(&meta, &path).map_err(|e| fail(e.to_string()))?;
        let meta = load_meta(&path).map_err(|e| fail(e.to_string()))?;
        let (_, linked) = link_project(&parse_all(&fx.downstream), &[meta]).map_err(|e| fail(e.to_string()))?;
        let impl_file = linked.impl_file.clone().ok_or_else(|| fail("no impl file".into()))?;

        // The fused project resolves the same queries to the same answers.
        let fused = resolve_project(&parse_all(&fx.model.files)).map_err(|e| fail(e.to_string()))?;
        let wanted: BTreeSet<_> = fx.library_queries.iter().map(|q| q.id.clone()).collect();
        let mut fused_lib: BTreeMap<_, ResolvedResult> = BTreeMap::new();
        for r in &fused.results {
            if wanted.contains(&r.query) {
                fused_lib.insert(r.query.clone(), r.clone());
            }
        }
        let fused_lib: Vec<ResolvedResult> = fused_lib.into_values().collect();
        let expected_impl = emit_impl_file(&fused_lib).unwrap();
        if impl_file != expected_impl {
            return Err(fail(format!("impl file differs:\n{impl_file}\nexpected:\n{expected_impl}")));
        }
        entries += fused_lib.len();

        // And both agree with the brute-force oracle.
        let oracle = Oracle::new(&fx.model);
        for q in &fx.library_queries {
            let line = format!("return {} }}", expected_literal(&fx.model, &oracle, q));
            if !impl_file.contains(&format!("fun impl_{}(", q.id)) || !impl_file.contains(&line) {
                return Err(fail(format!("{} missing from impl file", q.to_chain_text())));
            }
        }
        let fused_out = build_project(&parse_all(&fx.model.files)).map_err(|e| fail(e.to_string()))?.1;
        for f in &linked.files {
            let same = fused_out.files.iter().find(|g| g.path == f.path).unwrap();
            if same.text != f.text {
                return Err(fail(format!("{} differs from the fused build", f.path.display())));
            }
        }
    }

    let smart = "package lib\nfun f() { SmartReflekt.objects<Any>().filter { it.isCompanion }.resolve() }\n";
    match emit_meta(&parse_all(&[("lib/F.rk".into(), smart.into())]), "lib") {
        Err(PipelineError::Meta(MetaError::SmartCallInLibrary { at })) if at.line == 2 => {}
        other => return Err(format!("extended query in a library: {other:?}")),
    }
    Ok(format!("{projects} library/downstream pairs, {entries} impl entries"))
}

pub fn meta_round_trip(metas: u64) -> Check {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..metas {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_project(&mut rng, 30);
        let index = build_index(&parse_all(&model.files)).unwrap();
        let queries: Vec<Query> = (0..rng.gen_range(0..6))
            .map(|_| random_query(&mut rng, &model))
            .filter(|q| !q.is_smart())
            .collect();
        let name: String = (0..rng.gen_range(1..12))
            .map(|_| *['a', 'Z', '-', '"', '\\', 'é', ' ', '7'].get(rng.gen_range(0..8)).unwrap())
            .collect();
        let meta = ReflektMeta::from_library(&name, &index, &queries).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("m{seed}.reflektmeta"));
        save_meta(&meta, &path).map_err(|e| e.to_string())?;
        let back = load_meta(&path).map_err(|e| format!("seed {seed}: {e}"))?;
        if back != meta {
            return Err(format!("seed {seed}: meta changed in a round trip"));
        }
        if back.to_canonical_string() != fs::read_to_string(&path).unwrap() {
            return Err(format!("seed {seed}: canonical text not stable"));
        }
    }
    Ok(format!("{metas} metas"))
}

// ---------------------------------------------------------------------------
// Command-line determinism

pub struct Run {
    pub code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
}

pub fn srq(bin: &Path, threads: usize, args: &[&str]) -> Run {
    let out = Command::new(bin)
        .args(args)
        .env("SRQ_THREADS", threads.to_string())
        .output()
        .unwrap();
    Run {
        code: out.status.code(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Writes the standalone, library, downstream and failing fixtures under
/// `root`.
pub fn cli_fixtures(root: &Path, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = random_project(&mut rng, 50);
    let queries: Vec<Query> = (0..6).map(|_| random_query(&mut rng, &model)).collect();
    let mut files = model.files.clone();
    let u = use_file("z", "z/Use.rk", &queries);
    files.push((u.path, u.text));
    write_files(&root.join("app"), &files);

    let fx = library_fixture(seed);
    write_files(&root.join("lib"), &fx.library);
    write_files(&root.join("down"), &fx.downstream);
    write_files(
        &root.join("bad"),
        &[("p/Main.rk".into(), FOREIGN_CAPTURE_FIXTURE.into())],
    );
}

/// Everything observable from running every command once.
pub fn cli_snapshot(bin: &Path, root: &Path, threads: usize) -> Vec<(String, String)> {
    let r = root.to_str().unwrap();
    let mut snap = Vec::new();
    let mut record = |label: &str, run: Run| {
        snap.push((format!("{label} exit"), format!("{:?}", run.code)));
        snap.push((format!("{label} stdout"), run.stdout.replace(r, "<root>")));
        snap.push((format!("{label} stderr"), run.stderr.replace(r, "<root>")));
    };
    let app = format!("{r}/app");
    let out = format!("{r}/out");
    let meta = format!("{r}/lib.reflektmeta");
    record("analyze", srq(bin, threads, &["analyze", &app]));
    record("analyze json", srq(bin, threads, &["analyze", "--json", &app]));
    record("resolve", srq(bin, threads, &["resolve", &app]));
    record("resolve json", srq(bin, threads, &["resolve", "--json", &app]));
    record("build", srq(bin, threads, &["build", &app, "-o", &out]));
    let mut trees = vec![("build tree", read_tree(Path::new(&out)))];
    record(
        "emit-meta",
        srq(bin, threads, &["emit-meta", &format!("{r}/lib"), "-o", &meta, "--library-name", "lib"]),
    );
    record(
        "link",
        srq(bin, threads, &["link", &format!("{r}/down"), "-o", &out, "--meta", &meta]),
    );
    trees.push(("link tree", read_tree(Path::new(&out))));
    record("bad build", srq(bin, threads, &["build", &format!("{r}/bad"), "-o", &out]));
    trees.push(("tree after failure", read_tree(Path::new(&out))));

    let bench = srq(bin, threads, &["bench", "--entities", "100,400", "--trials", "1", "--json"]);
    let mut value: serde_json::Value = serde_json::from_str(&bench.stdout).unwrap();
    // Timings vary between runs; the corpus and the answers must not.
    for point in value["points"].as_array_mut().unwrap() {
        let point = point.as_object_mut().unwrap();
        point.retain(|k, _| matches!(k.as_str(), "entities" | "files" | "matches"));
    }
    snap.push(("bench".into(), value.to_string()));

    snap.push(("meta".into(), fs::read_to_string(&meta).unwrap_or_default()));
    for (label, tree) in trees {
        for (path, bytes) in tree {
            snap.push((format!("{label} {}", path.display()), String::from_utf8_lossy(&bytes).into_owned()));
        }
    }
    snap
}

pub fn determinism(bin: &Path, seeds: u64) -> Check {
    let mut compared = 0;
    for seed in 0..seeds {
        let dir = tempfile::tempdir().unwrap();
        cli_fixtures(dir.path(), seed);
        let first = cli_snapshot(bin, dir.path(), 1);
        for (label, value) in &first {
            let should_fail = label.starts_with("bad ");
            if label.ends_with(" exit") && (value == "Some(0)") == should_fail {
                return Err(format!("seed {seed}: {label} was {value}"));
            }
        }
        for threads in [1, 8, 8] {
            let again = cli_snapshot(bin, dir.path(), threads);
            if again.len() != first.len() {
                return Err(format!("seed {seed}: {} outputs vs {}", again.len(), first.len()));
            }
            for ((label, a), (_, b)) in first.iter().zip(&again) {
                if a != b {
                    return Err(format!("seed {seed}, SRQ_THREADS={threads}: {label} differs"));
                }
            }
        }
        compared += first.len();
    }
    Ok(format!("{compared} outputs, each produced 4 times"))
}
