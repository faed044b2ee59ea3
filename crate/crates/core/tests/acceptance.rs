//! Acceptance suite. Prints one PASS/FAIL line per criterion; criterion 10
//! needs a live model endpoint and reports SKIP without one.
//!
//! Set `XLAT_BLESS=1` to rewrite the prompt golden files.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use serde::Deserialize;

use xlat_core::c::cfg::Cfg;
use xlat_core::c::ddg::{Ddg, NodeKind};
use xlat_core::c::project::{analyze_file, analyze_source, ProgramStructure};
use xlat_core::llm::{BackendTag, Gateway, LiveConfig, MockTable, ENV_ENDPOINT};
use xlat_core::pipeline::{PipelineConfig, Session};
use xlat_core::prompt::{
    c_dep, listed_symbols, render_function_fix_prompt, render_globals_prompt, render_item_fix_prompt,
    render_region_fix_prompt, render_semantic_fix_prompt, render_translation_prompt, Budget, DepSymbol, FunctionFixInput,
    GlobalsInput, ItemFixInput, PromptText, RagPair, RegionFixInput, SemanticFixInput, StateRecord, TranslationInput,
    H_DEPENDENT,
};
use xlat_core::report::{compute_metrics, BatchMetrics};
use xlat_core::rust::{find_function, parse_rust};
use xlat_core::semantic::diff::diff_outputs;
use xlat_core::semantic::exec::DEFAULT_TIME_LIMIT;
use xlat_core::semantic::localize::{def_sites, output_statements, probe_plan};
use xlat_core::semantic::{
    differential_test, instrument, load_cases, run_program, semantic_fix_loop, strip_probes, CCompiler, SemanticOptions,
    SemanticTarget, TestCase,
};
use xlat_core::syntax::diagnostic::{DiagSpan, Diagnostic, Severity};
use xlat_core::syntax::rules::{apply_rule_fixes, RoutingTable, RuleContext};
use xlat_core::syntax::workspace::errors;
use xlat_core::syntax::{repair_loop, Checker, RepairOptions, Stage, ToolchainError, Workspace};
use xlat_core::translate::{ConsistencyReport, TranslateOptions, TranslatedFunction, TranslationSession, Translator};
use xlat_core::translate::RustSymbol;

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn target_dir() -> PathBuf {
    std::env::temp_dir().join("xlat-acceptance-target")
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Corpus programs as (name, directory), sorted by name.
fn corpus() -> Vec<(String, PathBuf)> {
    let mut out: Vec<(String, PathBuf)> = std::fs::read_dir(fixtures().join("corpus"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), p))
        .collect();
    out.sort();
    out
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn ws(dir: &Path, name: &str, source: &str) -> Result<Workspace, String> {
    Ok(Workspace::create(dir.join(name), name, source)
        .map_err(err)?
        .with_target_dir(target_dir()))
}

// ---- 1 ----

#[derive(Deserialize)]
struct Golden {
    sigma: Vec<String>,
    functions: BTreeMap<String, GoldenFn>,
    call_edges: Vec<(String, String)>,
    order: Vec<String>,
}

#[derive(Deserialize)]
struct GoldenFn {
    dependencies: Vec<String>,
    calls: Vec<String>,
}

/// Functions `f<perm[i]>`; `calls[i][j]` (i < j) makes i call j. Prototypes
/// and definitions appear in the given orders, so source order says
/// nothing about the call structure.
fn dag_source(names: &[String], calls: &[(usize, usize)], protos: &[usize], defs: &[usize]) -> String {
    let mut out = String::new();
    for &i in protos {
        out.push_str(&format!("int {}(int x);\n", names[i]));
    }
    for &i in defs {
        out.push_str(&format!("int {}(int x) {{\n    int r = x;\n", names[i]));
        for &(_, j) in calls.iter().filter(|c| c.0 == i) {
            out.push_str(&format!("    r = r + {}(x - 1);\n", names[j]));
        }
        out.push_str("    return r;\n}\n");
    }
    out.push_str("int main(void) {\n    int t = 0;\n");
    for n in names {
        out.push_str(&format!("    t = t + {n}(3);\n"));
    }
    out.push_str("    return t;\n}\n");
    out
}

fn dag_strategy() -> impl Strategy<Value = (Vec<String>, Vec<(usize, usize)>, Vec<usize>, Vec<usize>)> {
    (2usize..=10).prop_flat_map(|n| {
        let ids: Vec<usize> = (0..n).collect();
        (
            Just(ids.clone()).prop_shuffle(),
            vec(any::<bool>(), n * n),
            Just(ids.clone()).prop_shuffle(),
            Just(ids).prop_shuffle(),
        )
            .prop_map(move |(perm, bits, protos, defs)| {
                let names = perm.iter().map(|p| format!("f{p}")).collect();
                let calls = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| bits[i * n + j])
                    .collect();
                (names, calls, protos, defs)
            })
    })
}

fn structure_fidelity() -> Check {
    let start = Instant::now();
    for (name, dir) in corpus() {
        let s = analyze_file(&dir.join(format!("{name}.c")), &[]).map_err(err)?;
        let g: Golden = serde_json::from_str(&read(&dir.join("golden.json"))?).map_err(err)?;
        let sigma: Vec<String> = s.symbols.entries.keys().cloned().collect();
        ensure!(sigma == g.sigma, "{name}: symbol table {sigma:?}");
        let fns: BTreeSet<&String> = s.functions.iter().filter(|f| f.body.is_some()).map(|f| &f.key).collect();
        ensure!(fns.iter().copied().eq(g.functions.keys()), "{name}: functions {fns:?}");
        for f in s.functions.iter().filter(|f| f.body.is_some()) {
            let want = &g.functions[&f.key];
            ensure!(f.dependencies == want.dependencies, "{name}/{}: dependencies {:?}", f.key, f.dependencies);
            ensure!(f.calls == want.calls, "{name}/{}: calls {:?}", f.key, f.calls);
        }
        ensure!(s.call_graph.edges == g.call_edges, "{name}: call edges {:?}", s.call_graph.edges);
        ensure!(s.order == g.order, "{name}: order {:?}", s.order);
    }

    runner(100)
        .run(&dag_strategy(), |(names, calls, protos, defs)| {
            let src = dag_source(&names, &calls, &protos, &defs);
            let s = analyze_source("dag", &src).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let pos: BTreeMap<&str, usize> = s.order.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
            prop_assert_eq!(pos.len(), s.order.len());
            prop_assert_eq!(pos.len(), names.len() + 1, "{:?}", s.order);
            for &(i, j) in &calls {
                prop_assert!(pos[names[j].as_str()] < pos[names[i].as_str()], "{} before {}\n{}", names[j], names[i], src);
            }
            prop_assert_eq!(s.order.last().map(String::as_str), Some("main"));
            let mut want: BTreeSet<(String, String)> =
                calls.iter().map(|&(i, j)| (names[i].clone(), names[j].clone())).collect();
            want.extend(names.iter().map(|n| ("main".to_string(), n.clone())));
            let got: BTreeSet<(String, String)> = s.call_graph.edges.iter().cloned().collect();
            prop_assert_eq!(got, want);
            Ok(())
        })
        .map_err(err)?;
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(10), "took {took:?}");
    Ok(())
}

// ---- 2 ----

struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n / 64 + 1])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }
    fn has(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
}

/// Def-use edges from a gen/kill bit-vector reaching-definitions pass over
/// the CFG, at the granularity of DDG nodes.
fn oracle_edges(cfg: &Cfg, ddg: &Ddg) -> BTreeSet<(usize, usize)> {
    let nodes = &ddg.nodes;
    let width = nodes.len() + 1;
    let mut defs_of: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for n in nodes.iter().filter(|n| n.kind != NodeKind::Use) {
        defs_of.entry(n.symbol.as_str()).or_default().push(n.id);
    }
    let body = |b: usize| nodes.iter().filter(move |n| n.block == b && n.stmt.is_some());
    let index: BTreeMap<usize, usize> = cfg.blocks.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let nb = cfg.blocks.len();

    let mut gen: Vec<Bits> = (0..nb).map(|_| Bits::new(width)).collect();
    let mut kill: Vec<Bits> = (0..nb).map(|_| Bits::new(width)).collect();
    for (i, b) in cfg.blocks.iter().enumerate() {
        for n in body(b.id) {
            if n.kind == NodeKind::Def {
                for &d in &defs_of[n.symbol.as_str()] {
                    kill[i].set(d);
                    gen[i].clear(d);
                }
            }
            if n.kind != NodeKind::Use {
                gen[i].set(n.id);
            }
        }
    }
    let mut entry = Bits::new(width);
    for n in nodes.iter().filter(|n| n.kind == NodeKind::Param) {
        entry.set(n.id);
    }

    let mut inn: Vec<Bits> = (0..nb).map(|_| Bits::new(width)).collect();
    let mut out: Vec<Bits> = (0..nb).map(|_| Bits::new(width)).collect();
    let mut work: VecDeque<usize> = (0..nb).collect();
    while let Some(i) = work.pop_front() {
        let id = cfg.blocks[i].id;
        let mut x = if id == cfg.entry { Bits(entry.0.clone()) } else { Bits::new(width) };
        for &(p, s) in &cfg.edges {
            if s == id {
                for (w, o) in x.0.iter_mut().zip(&out[index[&p]].0) {
                    *w |= o;
                }
            }
        }
        let y: Vec<u64> = x.0.iter().zip(&gen[i].0).zip(&kill[i].0).map(|((a, g), k)| g | (a & !k)).collect();
        inn[i] = x;
        if y != out[i].0 {
            out[i] = Bits(y);
            for &(p, s) in &cfg.edges {
                if p == id && !work.contains(&index[&s]) {
                    work.push_back(index[&s]);
                }
            }
        }
    }

    let mut edges = BTreeSet::new();
    for (i, b) in cfg.blocks.iter().enumerate() {
        let mut live = Bits(inn[i].0.clone());
        for n in body(b.id) {
            for r in &n.reads {
                for &d in defs_of.get(r.as_str()).into_iter().flatten() {
                    if live.has(d) && d != n.id {
                        edges.insert((d, n.id));
                    }
                }
            }
            if n.kind == NodeKind::Def {
                for &d in &defs_of[n.symbol.as_str()] {
                    live.clear(d);
                }
            }
            if n.kind != NodeKind::Use {
                live.set(n.id);
            }
        }
    }
    edges
}

fn bfs(cfg: &Cfg) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([cfg.entry]);
    let mut queue = VecDeque::from([cfg.entry]);
    while let Some(b) = queue.pop_front() {
        for &(p, s) in &cfg.edges {
            if p == b && seen.insert(s) {
                queue.push_back(s);
            }
        }
    }
    seen
}

fn graph_programs() -> Result<Vec<(String, ProgramStructure)>, String> {
    let mut out = Vec::new();
    for (name, dir) in corpus() {
        out.push((name.clone(), analyze_file(&dir.join(format!("{name}.c")), &[]).map_err(err)?));
    }
    let t = fixtures().join("semantic/threshold/program.c");
    out.push(("threshold".into(), analyze_file(&t, &[]).map_err(err)?));
    Ok(out)
}

fn graph_oracles() -> Check {
    let mut small = 0;
    for (name, s) in graph_programs()? {
        for (key, g) in &s.graphs {
            let statements: usize = g.cfg.blocks.iter().map(|b| b.stmts.len()).sum();
            if statements > 5 {
                continue;
            }
            small += 1;
            let ids: BTreeSet<usize> = g.cfg.blocks.iter().map(|b| b.id).collect();
            ensure!(
                g.cfg.edges.iter().all(|(a, b)| ids.contains(a) && ids.contains(b)),
                "{name}/{key}: dangling CFG edge"
            );
            let reach = bfs(&g.cfg);
            ensure!(
                g.cfg.reachable().into_iter().collect::<BTreeSet<_>>() == reach,
                "{name}/{key}: reachability"
            );
            ensure!(
                g.ddg.nodes.iter().all(|n| reach.contains(&n.block)),
                "{name}/{key}: DDG node in an unreachable block"
            );
            let want = oracle_edges(&g.cfg, &g.ddg);
            let got: BTreeSet<(usize, usize)> = g.ddg.edges.iter().copied().collect();
            ensure!(got == want, "{name}/{key}: DDG edges {got:?}, reaching definitions give {want:?}");
        }
    }
    ensure!(small >= 10, "only {small} functions with at most 5 statements");
    Ok(())
}

// ---- 3 ----

fn metric_fixed_points() -> Check {
    let close = |v: Option<f64>, want: f64| v.is_some_and(|v| (v - want).abs() <= 0.01);
    let m = compute_metrics(&BatchMetrics {
        n_c: 200,
        syn_rs: 200,
        sem_rs: 180,
        ..Default::default()
    });
    ensure!(close(m.syncor, 100.0), "SynCor {:?}", m.syncor);
    ensure!(close(m.semcor, 90.0), "SemCor {:?}", m.semcor);
    let m = compute_metrics(&BatchMetrics {
        n_c: 1,
        syn_rs: 1,
        rloc: 51,
        uloc: 0,
        ..Default::default()
    });
    ensure!(close(m.pur, 0.0), "PUR {:?}", m.pur);
    let m = compute_metrics(&BatchMetrics {
        n_c: 1,
        syn_rs: 1,
        rloc: 200,
        uloc: 15,
        ..Default::default()
    });
    ensure!(close(m.pur, 7.5), "PUR {:?}", m.pur);
    Ok(())
}

// ---- 4 ----

fn rule_fix_suite() -> Check {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(err)?;
    for name in ["resolve", "type", "import", "rename", "unsafe"] {
        let dir = fixtures().join("repair").join(name);
        let structure = analyze_source(name, &read(&dir.join("program.c"))?).map_err(err)?;
        let ctx = RuleContext::new(&structure.symbols);
        let input = read(&dir.join("input.rs"))?;
        let w = ws(tmp.path(), &format!("acc_rule_{name}"), &input)?;

        let mut src = input.clone();
        let mut passes = 0;
        loop {
            let diags = Checker::check(&w, &src).map_err(err)?;
            let errs = errors(&diags);
            if errs.is_empty() {
                break;
            }
            passes += 1;
            ensure!(passes <= 8, "{name}: still failing after 8 rule passes");
            let out = apply_rule_fixes(&src, &diags, &RoutingTable::builtin(), &ctx);
            ensure!(!out.applied.is_empty(), "{name}: no rule applies to {}", errs[0].headline());
            src = out.source;
        }
        ensure!(passes > 0, "{name}: the seeded workspace already compiles");

        let gw = Gateway::mock(MockTable::default());
        let s = repair_loop(&w, &input, name, &ctx, &gw, &RepairOptions::default()).map_err(err)?;
        ensure!(s.success, "{name}: repair loop left {} errors", s.final_errors.len());
        ensure!(gw.total_calls() == 0, "{name}: {} model calls", gw.total_calls());
        ensure!(s.ledger.iter().all(|e| e.stage == Stage::Rule), "{name}: non-rule fixes");
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(60), "took {took:?}");
    Ok(())
}

// ---- 5 ----

fn run_pipeline(out: &Path) -> Result<xlat_core::report::Report, String> {
    let cfg = PipelineConfig {
        inputs: vec![fixtures().join("corpus")],
        backend: BackendTag::Mock,
        mock_reference: Some("reference.rs".into()),
        out: out.to_path_buf(),
        jobs: 4,
        ..PipelineConfig::default()
    };
    Session::new(cfg).map_err(err)?.pipeline().map_err(err)
}

/// Session artifacts by relative path, without build output and the
/// configuration (which names the session directory).
fn artifacts(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .filter_entry(|e| e.file_name() != "target")
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.path().strip_prefix(root).unwrap().to_path_buf())
        .filter(|p| p != Path::new("config.toml") && !p.starts_with("workspaces"))
        .map(|p| {
            let bytes = std::fs::read(root.join(&p)).unwrap();
            (p, bytes)
        })
        .collect()
}

fn pipeline_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ra = run_pipeline(&a)?;
    let rb = run_pipeline(&b)?;
    ensure!(ra == rb, "reports differ");
    ensure!(ra.totals.n_c == corpus().len(), "{} programs in the report", ra.totals.n_c);
    let (fa, fb) = (artifacts(&a), artifacts(&b));
    ensure!(
        fa.keys().eq(fb.keys()),
        "file sets differ: {:?}",
        fa.keys().collect::<BTreeSet<_>>().symmetric_difference(&fb.keys().collect()).collect::<Vec<_>>()
    );
    for (p, bytes) in &fa {
        ensure!(&fb[p] == bytes, "{} differs", p.display());
    }
    for (name, _) in corpus() {
        for rel in [
            format!("translate/{name}/assembled.rs"),
            format!("repair/{name}.json"),
            format!("repair/{name}.rs"),
            format!("semantic/{name}/outcome.json"),
        ] {
            ensure!(fa.contains_key(Path::new(&rel)), "missing {rel}");
        }
    }
    for rel in ["report.json", "report.md"] {
        ensure!(fa.contains_key(Path::new(rel)), "missing {rel}");
    }
    Ok(())
}

// ---- 6 ----

fn threshold() -> PathBuf {
    fixtures().join("semantic/threshold")
}

fn generated_cases(n: usize) -> Vec<TestCase> {
    let mut r = runner(1);
    (0..n)
        .map(|i| {
            let xs = vec(-20i32..30, 0..12).new_tree(&mut r).unwrap().current();
            let body: Vec<String> = xs.iter().map(i32::to_string).collect();
            TestCase {
                id: format!("g{i:02}"),
                input: format!("{}\n{}\n", xs.len(), body.join(" ")).into_bytes(),
                expected: None,
                time_limit: DEFAULT_TIME_LIMIT,
            }
        })
        .collect()
}

fn differential_testing() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let c = CCompiler::default()
        .build(&[threshold().join("program.c")], &tmp.path().join("c/threshold"))
        .map_err(err)?;
    let fixed = ws(tmp.path(), "acc_diff_fixed", &read(&threshold().join("fixed.rs"))?)?
        .build()
        .map_err(err)?;
    let buggy = ws(tmp.path(), "acc_diff_buggy", &read(&threshold().join("buggy.rs"))?)?
        .build()
        .map_err(err)?;
    let cases = generated_cases(20);
    ensure!(cases.len() == 20, "generated {} cases", cases.len());
    for (what, a, b) in [("C", &c, &c), ("Rust", &fixed, &fixed), ("buggy Rust", &buggy, &buggy), ("C/Rust", &c, &fixed)] {
        let d = differential_test(a, b, &cases).map_err(err)?;
        ensure!(d.is_empty(), "{what}: {} discrepancies on identical programs", d.len());
    }
    let cases = load_cases(&threshold().join("tests"), DEFAULT_TIME_LIMIT).map_err(err)?;
    let d = differential_test(&c, &buggy, &cases).map_err(err)?;
    ensure!(d.len() == 1, "{} discrepancies on the off-by-one pair", d.len());
    ensure!(d[0].case_id == "03", "discrepancy on case {}", d[0].case_id);
    ensure!(d[0].diff.first_divergent_line == Some(5), "first divergent line {:?}", d[0].diff.first_divergent_line);
    ensure!(!d[0].exit_mismatch, "exit status mismatch");
    Ok(())
}

// ---- 7 ----

fn probe_non_interference() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut programs: Vec<(String, String, Vec<TestCase>)> = Vec::new();
    for (name, dir) in corpus() {
        let cases = load_cases(&dir.join("tests"), DEFAULT_TIME_LIMIT).map_err(err)?;
        programs.push((name, read(&dir.join("reference.rs"))?, cases));
    }
    let mut cases = load_cases(&threshold().join("tests"), DEFAULT_TIME_LIMIT).map_err(err)?;
    cases.extend(generated_cases(20));
    programs.push(("threshold".into(), read(&threshold().join("buggy.rs"))?, cases));

    let mut probes = 0;
    for (name, src, cases) in &programs {
        ensure!(!cases.is_empty(), "{name}: no test cases");
        let ast = parse_rust(src).map_err(err)?;
        let plan = probe_plan(&def_sites(&ast), &output_statements(&ast), usize::MAX);
        probes += plan.len();
        let probed_src = instrument(src, &plan);
        ensure!(strip_probes(&probed_src) == *src, "{name}: probes do not strip cleanly");
        let plain = ws(tmp.path(), &format!("acc_{name}"), src)?.build().map_err(err)?;
        let probed = ws(tmp.path(), &format!("acc_{name}_probed"), &probed_src)?
            .build()
            .map_err(|e| format!("{name}: instrumented build: {e}"))?;
        for case in cases {
            let a = run_program(&plain, &case.input, case.time_limit).map_err(err)?;
            let b = run_program(&probed, &case.input, case.time_limit).map_err(err)?;
            ensure!(a.stdout == b.stdout, "{name}/{}: stdout changed", case.id);
            ensure!(a.exit_code == b.exit_code, "{name}/{}: exit status changed", case.id);
        }
    }
    ensure!(probes >= programs.len(), "only {probes} probes over {} programs", programs.len());
    Ok(())
}

// ---- 8 ----

/// Counts and times toolchain checks.
struct TimedChecker<'a> {
    inner: &'a Workspace,
    calls: Cell<usize>,
    spent: RefCell<Duration>,
}

impl Checker for TimedChecker<'_> {
    fn check(&self, source: &str) -> Result<Vec<Diagnostic>, ToolchainError> {
        let t = Instant::now();
        let r = Checker::check(self.inner, source);
        self.calls.set(self.calls.get() + 1);
        *self.spent.borrow_mut() += t.elapsed();
        r
    }
}

const UNFIXABLE: &str = "fn main() {\n    let x = 5i32;\n    let y = x.frobnicate(2);\n    println!(\"{}\", y);\n}\n";

fn budget_termination() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let w = ws(tmp.path(), "acc_budget_syntax", UNFIXABLE)?;
    let sigma = analyze_source("u", "int main(void) { return 0; }\n").map_err(err)?.symbols;
    let opts = RepairOptions {
        max_iterations: 3,
        ..RepairOptions::default()
    };
    let checker = TimedChecker {
        inner: &w,
        calls: Cell::new(0),
        spent: RefCell::new(Duration::ZERO),
    };
    let gw = Gateway::mock(MockTable::echo());
    let t = Instant::now();
    let s = repair_loop(&checker, UNFIXABLE, "acc_budget", &RuleContext::new(&sigma), &gw, &opts).map_err(err)?;
    let wall = t.elapsed();
    ensure!(!s.success, "the unfixable program compiled");
    ensure!(s.iterations <= opts.max_iterations, "{} iterations", s.iterations);
    let per_iteration = opts.rule_passes + 3;
    ensure!(
        checker.calls.get() <= 1 + opts.max_iterations * per_iteration,
        "{} checks for {} iterations",
        checker.calls.get(),
        s.iterations
    );
    let slack = Duration::from_secs(2);
    let spent = *checker.spent.borrow();
    ensure!(wall <= spent + slack, "{wall:?} wall clock for {spent:?} of checks");

    let dir = threshold();
    let structure = analyze_source("threshold", &read(&dir.join("program.c"))?).map_err(err)?;
    let c_exe = CCompiler::default()
        .build(&[dir.join("program.c")], &tmp.path().join("c/threshold"))
        .map_err(err)?;
    let w = ws(tmp.path(), "acc_budget_semantic", &read(&dir.join("buggy.rs"))?)?;
    let cases = load_cases(&dir.join("tests"), DEFAULT_TIME_LIMIT).map_err(err)?;
    let ctx = RuleContext::new(&structure.symbols);
    let target = SemanticTarget {
        program: "acc_budget_semantic",
        structure: &structure,
        c_exe: &c_exe,
        workspace: &w,
        cases: &cases,
        rule_ctx: &ctx,
    };
    let opts = SemanticOptions {
        max_rounds: 3,
        ..SemanticOptions::default()
    };
    let gw = Gateway::mock(MockTable::echo());
    let out = semantic_fix_loop(&target, &gw, &opts).map_err(err)?;
    ensure!(!out.equivalent, "echo replies fixed the program");
    ensure!(out.rounds_used == opts.max_rounds, "{} rounds", out.rounds_used);
    ensure!(out.llm_calls <= opts.max_rounds, "{} calls", out.llm_calls);
    Ok(())
}

// ---- 9 ----

fn diag(code: &str, message: &str, source: &str, needle: &str, label: &str) -> Diagnostic {
    let start = source.find(needle).expect("needle in source");
    let line = source[..start].matches('\n').count() + 1;
    let column = start - source[..start].rfind('\n').map_or(0, |i| i + 1) + 1;
    Diagnostic {
        code: code.into(),
        severity: Severity::Error,
        message: message.into(),
        span: Some(DiagSpan {
            file: "src/main.rs".into(),
            byte_start: start,
            byte_end: start + needle.len(),
            line,
            column,
            label: Some(label.into()),
        }),
        suggestion: None,
        notes: Vec::new(),
    }
}

fn golden_prompts() -> Result<Vec<(&'static str, PromptText)>, String> {
    let dir = threshold();
    let c = read(&dir.join("program.c"))?;
    let structure = analyze_source("threshold", &c).map_err(err)?;
    let classify = structure.functions.iter().find(|f| f.name == "classify").ok_or("no classify")?;
    let main = structure.functions.iter().find(|f| f.name == "main").ok_or("no main")?;
    let buggy = read(&dir.join("buggy.rs"))?;
    let ast = parse_rust(&buggy).map_err(err)?;
    let item = find_function(&ast, "classify").ok_or("no Rust classify")?;
    let rust_classify = DepSymbol::new(&classify.key, "fn classify(x: i32) -> i32;");

    let mut out = Vec::new();
    out.push((
        "translation",
        render_translation_prompt(
            &TranslationInput {
                function: main,
                position: (2, 2),
                c_deps: main
                    .dependencies
                    .iter()
                    .map(|k| c_dep(k, structure.symbols.get(k).unwrap()))
                    .collect(),
                rust_deps: vec![rust_classify.clone()],
                rag_pairs: vec![RagPair {
                    c: "int twice(int x) { return 2 * x; }".into(),
                    rust: "fn twice(x: i32) -> i32 {\n    2 * x\n}".into(),
                }],
                constraints: "- Keep the function name.\n- Use only the Rust standard library.".into(),
            },
            Budget::unlimited(),
        ),
    ));
    out.push((
        "globals",
        render_globals_prompt(
            &GlobalsInput {
                group: "macros".into(),
                symbols: vec![DepSymbol::new("LIMIT", "#define LIMIT 10"), DepSymbol::new("STEP", "#define STEP 2")],
                rust_deps: Vec::new(),
                constraints: "- Use only the Rust standard library.".into(),
            },
            Budget::unlimited(),
        ),
    ));
    let e1 = diag("E0308", "mismatched types", &buggy, "x > 10", "expected `i32`, found `bool`");
    let e2 = diag("E0425", "cannot find value `limit` in this scope", &buggy, "return 1", "not found in this scope");
    out.push((
        "function_fix",
        render_function_fix_prompt(
            &FunctionFixInput {
                rust_fn: &item.source_text,
                fn_span: item.span,
                errors: &[e1.clone(), e2],
                interface: "fn classify(x: i32) -> i32;".into(),
                rust_deps: Vec::new(),
                constraints: "Keep function names, parameters and return types unchanged.".into(),
            },
            Budget::unlimited(),
        )
        .map_err(err)?,
    ));
    out.push((
        "item_fix",
        render_item_fix_prompt(
            &ItemFixInput {
                item: &item,
                error: &e1,
                rust_deps: vec![DepSymbol::new("LIMIT", "const LIMIT: i32 = 10;")],
                constraints: "Use only the Rust standard library.".into(),
            },
            Budget::unlimited(),
        )
        .map_err(err)?,
    ));
    out.push((
        "region_fix",
        render_region_fix_prompt(&RegionFixInput {
            region: "fn classify(x: i32) -> i32 {\n    if x >= 10 {\n        return 1;\n    \n    0\n}",
            lines: (3, 8),
            message: "unexpected closing delimiter: `}`",
            at: (8, 1),
            constraints: String::new(),
        }),
    ));
    let c_out = "1 small\n2 small\n3 small\n4 small\n10 big\n12 big\nbig count 2\n";
    let rust_out = "1 small\n2 small\n3 small\n4 small\n10 small\n12 big\nbig count 1\n";
    let diff = diff_outputs(c_out.as_bytes(), rust_out.as_bytes()).render();
    let g = &structure.graphs[&classify.key];
    let states = [
        StateRecord {
            site: 1,
            identifier: "x".into(),
            value: "10".into(),
        },
        StateRecord {
            site: 2,
            identifier: "c".into(),
            value: "0".into(),
        },
    ];
    out.push((
        "semantic_fix",
        render_semantic_fix_prompt(
            &SemanticFixInput {
                structure_info: format!("C `{}` -> Rust `classify`\nC `main` -> Rust `main`", classify.key),
                input: "6\n1 2 3 4 10 12\n",
                c_out,
                rust_out,
                diff,
                related_code: vec!["println!(\"{} {}\", x, if c != 0 { \"big\" } else { \"small\" });".into()],
                graphs: vec![(classify.name.clone(), &g.cfg, &g.ddg)],
                states: &states,
                failing_source: &buggy,
                constraints: "Keep function signatures unchanged.".into(),
            },
            Budget::unlimited(),
        ),
    ));
    Ok(out)
}

/// A structure with globals, macros, types and enums, where each function
/// references a random subset of them and calls functions defined earlier.
/// Returns the source and, per function, the keys it references.
fn random_structure(
    sizes: (usize, usize, usize, usize, usize),
    picks: &[u32],
) -> (String, BTreeMap<String, BTreeSet<String>>) {
    let (globals, macros, types, enums, fns) = sizes;
    let mut src = String::new();
    let mut pool: Vec<(String, String)> = Vec::new();
    for i in 0..macros {
        src.push_str(&format!("#define K{i} {}\n", i + 2));
        pool.push((format!("K{i}"), format!("    r = r + K{i};\n")));
    }
    for i in 0..types {
        src.push_str(&format!("typedef struct {{ int a; int b; }} T{i};\n"));
        pool.push((format!("T{i}"), format!("    T{i} t{i};\n    t{i}.a = x;\n    r = r + t{i}.a;\n")));
    }
    for i in 0..enums {
        src.push_str(&format!("enum E{i} {{ E{i}_A, E{i}_B }};\n"));
        pool.push((format!("enum E{i}"), format!("    r = r + E{i}_B;\n")));
    }
    for i in 0..globals {
        src.push_str(&format!("int g{i} = {i};\n"));
        pool.push((format!("g{i}"), format!("    r = r + g{i};\n    g{i} = r;\n")));
    }
    let mut refs = BTreeMap::new();
    let mut p = picks.iter().cycle();
    for f in 0..fns {
        let mut used = BTreeSet::new();
        let mut body = String::from("    int r = x;\n");
        for (key, code) in &pool {
            if p.next().unwrap() % 3 == 0 {
                used.insert(key.clone());
                body.push_str(code);
            }
        }
        for g in 0..f {
            if p.next().unwrap() % 3 == 0 {
                used.insert(format!("h{g}"));
                body.push_str(&format!("    r = r + h{g}(x - 1);\n"));
            }
        }
        src.push_str(&format!("int h{f}(int x) {{\n{body}    return r;\n}}\n"));
        refs.insert(format!("h{f}"), used);
    }
    (src, refs)
}

fn dependency_completeness() -> Check {
    let strategy = (
        (0usize..4, 0usize..4, 0usize..3, 0usize..3, 1usize..6),
        vec(any::<u32>(), 16..64),
        vec(any::<bool>(), 32),
    );
    let table = MockTable::default();
    let gateway = Gateway::mock(table);
    let options = TranslateOptions::default();
    runner(50)
        .run(&strategy, |(sizes, picks, translated)| {
            let (src, refs) = random_structure(sizes, &picks);
            let s = analyze_source("deps", &src).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let tr = Translator {
                structure: &s,
                gateway: &gateway,
                options: &options,
            };
            // Mark a random subset of Σ as already translated.
            let mut session = TranslationSession::new("deps");
            let mut done = BTreeSet::new();
            for ((key, def), &t) in s.symbols.entries.iter().zip(translated.iter().cycle()) {
                if !t {
                    continue;
                }
                done.insert(key.clone());
                if let Some(f) = s.functions.iter().find(|f| &f.key == key) {
                    session.functions.push(TranslatedFunction {
                        key: key.clone(),
                        name: f.name.clone(),
                        file: f.file.clone(),
                        text: format!("fn {}(x: i32) -> i32 {{\n    x\n}}\n", f.name),
                        attempts: 1,
                        report: ConsistencyReport::default(),
                        flagged: false,
                    });
                } else {
                    session.rust_symbols.push(RustSymbol {
                        key: key.clone(),
                        group: def.kind.as_str().into(),
                        file: def.file.clone(),
                        text: format!("const X: i32 = {};", key.len()),
                    });
                }
            }
            for (i, f) in s.functions.iter().enumerate() {
                let want = &refs[&f.key];
                let deps: BTreeSet<String> = f.dependencies.iter().cloned().collect();
                prop_assert_eq!(&deps, want, "{}\n{}", f.key, src);
                let (prompt, present, missing) = tr.function_prompt(&session, f, (i + 1, s.functions.len()), &[]);
                let listed = listed_symbols(prompt.section(H_DEPENDENT).unwrap_or(""));
                let side = |which: &str| -> BTreeSet<String> {
                    listed.iter().filter(|(s, _)| s == which).map(|(_, k)| k.clone()).collect()
                };
                prop_assert_eq!(&side("c"), want, "{}\n{}", f.key, prompt.rendered);
                let rust_want: BTreeSet<String> = want.intersection(&done).cloned().collect();
                prop_assert_eq!(&side("rust"), &rust_want, "{}\n{}", f.key, prompt.rendered);
                prop_assert_eq!(present.into_iter().collect::<BTreeSet<_>>(), rust_want);
                prop_assert_eq!(
                    missing.into_iter().collect::<BTreeSet<_>>(),
                    want.difference(&done).cloned().collect::<BTreeSet<_>>()
                );
            }
            Ok(())
        })
        .map_err(err)
}

fn prompt_goldens() -> Check {
    let dir = fixtures().join("prompts");
    let bless = std::env::var_os("XLAT_BLESS").is_some();
    for (name, prompt) in golden_prompts()? {
        let path = dir.join(format!("{name}.txt"));
        if bless {
            std::fs::create_dir_all(&dir).map_err(err)?;
            std::fs::write(&path, &prompt.rendered).map_err(err)?;
            continue;
        }
        let want = read(&path)?;
        ensure!(prompt.rendered == want, "{name}: rendered prompt differs from {}", path.display());
    }
    dependency_completeness()
}

// ---- 10 ----

fn live_smoke() -> Option<Check> {
    LiveConfig::from_env()?;
    Some((|| {
        let tmp = tempfile::tempdir().map_err(err)?;
        let cfg = PipelineConfig {
            inputs: vec![fixtures().join("corpus")],
            backend: BackendTag::Live,
            out: tmp.path().join("live"),
            jobs: 4,
            ..PipelineConfig::default()
        };
        let r = Session::new(cfg).map_err(err)?.pipeline().map_err(err)?;
        ensure!(r.totals.syn_rs >= 8, "{}/10 programs compile", r.totals.syn_rs);
        ensure!(r.totals.sem_rs >= 6, "{}/10 programs pass their tests", r.totals.sem_rs);
        Ok(())
    })())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("structure extraction matches goldens; random DAGs order soundly", structure_fidelity),
        ("DDG edges equal reaching definitions; CFG reachability", graph_oracles),
        ("metric fixed points", metric_fixed_points),
        ("rule fixes alone repair the seeded workspaces", rule_fix_suite),
        ("mock pipeline runs are byte-identical", pipeline_determinism),
        ("differential testing reflexive; off-by-one pair localized", differential_testing),
        ("instrumentation leaves stdout unchanged", probe_non_interference),
        ("repair loops stop within their budgets", budget_termination),
        ("prompt goldens and dependency completeness", prompt_goldens),
    ];
    let mut failed = Vec::new();
    for (i, (desc, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        match f() {
            Ok(()) => println!("criterion {}: PASS - {desc} ({:.1?})", i + 1, t.elapsed()),
            Err(e) => {
                println!("criterion {}: FAIL - {desc}: {e}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    let desc = "live backend smoke run";
    match live_smoke() {
        None => println!("criterion 10: SKIP - {desc} ({ENV_ENDPOINT} not set)"),
        Some(Ok(())) => println!("criterion 10: PASS - {desc}"),
        Some(Err(e)) => println!("criterion 10: FAIL - {desc}: {e}"),
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
