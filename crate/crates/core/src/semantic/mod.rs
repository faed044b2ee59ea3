//! Differential testing against the C reference and the semantic fix loop.

pub mod diff;
pub mod exec;
pub mod localize;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::c::project::ProgramStructure;
use crate::llm::{cache_key, extract_code, write_atomic, Expect, Gateway, GenerationParams};
use crate::prompt::{render_semantic_fix_prompt, Budget, SemanticFixInput, StateRecord};
use crate::rust::{compact, extract_items, parse_rust, ItemKind};
use crate::syntax::rules::RuleContext;
use crate::syntax::workspace::errors;
use crate::syntax::{repair_loop, Checker, RepairOptions, ToolchainError, Workspace};
pub use diff::{diff_outputs, OutputDiff};
pub use exec::{differential_test, differential_test_within, load_cases, run_program, CCompiler, Discrepancy, ExecError, ExecutionResult, TestCase};
pub use localize::{instrument, localize, parse_trace, strip_probes, Localization, Probe};

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error(transparent)]
    Toolchain(#[from] ToolchainError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticOptions {
    pub max_rounds: usize,
    pub probe_cap: usize,
    /// Syntax repair applied when a revision does not compile.
    pub repair: RepairOptions,
    pub params: GenerationParams,
    #[serde(skip, default = "Budget::unlimited")]
    pub budget: Budget,
    pub constraints: String,
    /// Directory for `round-<n>.trace` files.
    pub trace_dir: Option<PathBuf>,
    /// Relative tolerance for numbers in output comparison.
    pub float_tolerance: f64,
}

impl Default for SemanticOptions {
    fn default() -> Self {
        SemanticOptions {
            max_rounds: 3,
            probe_cap: localize::DEFAULT_PROBE_CAP,
            repair: RepairOptions {
                max_iterations: 2,
                ..RepairOptions::default()
            },
            params: GenerationParams::default(),
            budget: Budget::unlimited(),
            constraints: "Return the complete corrected Rust program.\nKeep function names and signatures unchanged.\nUse only the Rust standard library."
                .into(),
            trace_dir: None,
            float_tolerance: diff::FLOAT_TOLERANCE,
        }
    }
}

pub struct SemanticTarget<'a> {
    pub program: &'a str,
    pub structure: &'a ProgramStructure,
    pub c_exe: &'a Path,
    pub workspace: &'a Workspace,
    pub cases: &'a [TestCase],
    pub rule_ctx: &'a RuleContext,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub case_id: String,
    pub first_divergent_line: Option<usize>,
    pub matched_output: bool,
    pub output_statements: usize,
    pub probes: usize,
    pub dropped_probes: usize,
    pub states: usize,
    pub prompt_id: Option<String>,
    pub accepted: bool,
    pub note: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SemanticOutcome {
    pub program: String,
    pub equivalent: bool,
    pub rounds_used: usize,
    pub passing: Vec<String>,
    pub discrepancies: Vec<Discrepancy>,
    pub llm_calls: usize,
    pub rounds: Vec<RoundLog>,
}

impl SemanticOutcome {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serializes") + "\n"
    }
}

fn passing(cases: &[TestCase], disc: &[Discrepancy]) -> Vec<String> {
    cases
        .iter()
        .filter(|c| !disc.iter().any(|d| d.case_id == c.id))
        .map(|c| c.id.clone())
        .collect()
}

/// Replace items of `current` with same-named items of `reply`, append new
/// ones and add missing imports.
pub fn merge_items(current: &str, reply: &str) -> Option<String> {
    let cur_ast = parse_rust(current).ok()?;
    let reply_ast = parse_rust(reply).ok()?;
    let cur_items = extract_items(&cur_ast);
    let mut replacements: Vec<((usize, usize), String)> = Vec::new();
    let mut uses = Vec::new();
    let mut appended = Vec::new();
    for item in extract_items(&reply_ast) {
        if item.kind == ItemKind::Use {
            if !cur_items.iter().any(|c| c.kind == ItemKind::Use && compact(&c.source_text) == compact(&item.source_text)) {
                uses.push(item.source_text);
            }
            continue;
        }
        match cur_items.iter().find(|c| c.kind == item.kind && c.name == item.name) {
            Some(c) if !replacements.iter().any(|(s, _)| *s == c.span) => replacements.push((c.span, item.source_text)),
            Some(_) => {}
            None => appended.push(item.source_text),
        }
    }
    let mut out = current.to_string();
    replacements.sort_by(|a, b| b.0 .0.cmp(&a.0 .0));
    for (span, text) in replacements {
        out.replace_range(span.0..span.1, &text);
    }
    for text in appended {
        if !out.ends_with('\n') {
            out.push('\n');
        }
        out.push('\n');
        out.push_str(&text);
        out.push('\n');
    }
    if !uses.is_empty() {
        let at = cur_items.first().map_or(0, |i| i.span.0);
        let block: String = uses.iter().map(|u| format!("{u}\n")).collect();
        out.insert_str(at, &block);
    }
    parse_rust(&out).ok()?;
    Some(out)
}

/// Sibling workspace used for instrumented builds.
fn probe_workspace(ws: &Workspace, source: &str) -> std::io::Result<Workspace> {
    let name = ws.root.file_name().and_then(|n| n.to_str()).unwrap_or("program");
    let root = ws.root.with_file_name(format!("{name}.probe"));
    let mut p = Workspace::create(root, &format!("{}_probe", ws.package), source)?;
    p.target_dir = ws.target_dir.clone();
    p.timeout = ws.timeout;
    Ok(p)
}

/// Build the instrumented program, dropping probes that break the build,
/// and run one case. Returns the states and the number of dropped probes.
fn collect_states(
    ws: &Workspace,
    source: &str,
    plan: &[Probe],
    case: &TestCase,
) -> Result<(Vec<StateRecord>, usize, String), SemanticError> {
    let mut plan: Vec<Probe> = plan.to_vec();
    let mut dropped = 0;
    while !plan.is_empty() {
        let instrumented = instrument(source, &plan);
        let pws = probe_workspace(ws, &instrumented)?;
        let errs = errors(&Checker::check(&pws, &instrumented)?);
        if errs.is_empty() {
            let exe = pws.build()?;
            let r = run_program(&exe, &case.input, case.time_limit)?;
            return Ok((parse_trace(&r.stderr), dropped, instrumented));
        }
        // Drop the probes on failing lines, or the last one if none match.
        let bad_lines: Vec<usize> = errs.iter().filter_map(|d| d.span.as_ref().map(|s| s.line)).collect();
        let bad_sites: Vec<usize> = localize::probe_lines(&instrumented)
            .into_iter()
            .filter(|(l, _)| bad_lines.contains(l))
            .map(|(_, s)| s)
            .collect();
        let before = plan.len();
        if bad_sites.is_empty() {
            plan.pop();
        } else {
            plan.retain(|p| !bad_sites.contains(&p.site));
        }
        dropped += before - plan.len();
    }
    Ok((Vec::new(), dropped, source.to_string()))
}

fn structure_info(structure: &ProgramStructure, rust: &str) -> String {
    let Ok(ast) = parse_rust(rust) else {
        return String::new();
    };
    let fns: Vec<String> = crate::rust::all_items(&ast)
        .into_iter()
        .filter(|i| i.kind == ItemKind::Function)
        .map(|i| i.name)
        .collect();
    structure
        .functions
        .iter()
        .filter_map(|f| {
            let r = fns
                .iter()
                .find(|n| **n == f.name)
                .or_else(|| fns.iter().find(|n| crate::rust::loose_name(n) == crate::rust::loose_name(&f.name)))?;
            Some(format!("C function `{}` ({}) -> Rust fn `{}`", f.name, f.file, r))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn write_trace(dir: &Path, round: usize, case: &str, states: &[StateRecord]) -> std::io::Result<()> {
    let mut text = format!("# case {case}\n");
    for s in states {
        text.push_str(&format!("s{} {} -> {}\n", s.site, s.identifier, s.value));
    }
    write_atomic(&dir.join(format!("round-{round}.trace")), &text)
}

/// Differential test, localize, instrument, ask for a fix, verify; repeat
/// until equivalent or out of rounds. Revisions that fail to compile or
/// lose a passing case are rolled back.
pub fn semantic_fix_loop(t: &SemanticTarget<'_>, gateway: &Gateway, opts: &SemanticOptions) -> Result<SemanticOutcome, SemanticError> {
    let calls_before = gateway.calls(t.program);
    let ws = t.workspace;
    let mut source = ws.source()?;
    let exe = ws.build()?;
    let mut disc = differential_test_within(t.c_exe, &exe, t.cases, opts.float_tolerance)?;
    let mut out = SemanticOutcome {
        program: t.program.to_string(),
        ..Default::default()
    };
    while !disc.is_empty() && out.rounds_used < opts.max_rounds {
        out.rounds_used += 1;
        let round = out.rounds_used;
        let d = &disc[0];
        let case = t.cases.iter().find(|c| c.id == d.case_id).expect("discrepancy for a known case");
        let mut log = RoundLog {
            round,
            case_id: d.case_id.clone(),
            first_divergent_line: d.diff.first_divergent_line,
            ..Default::default()
        };
        let ast = parse_rust(&source).map_err(|e| std::io::Error::other(e.to_string()))?;
        let loc = localize(&ast, &d.diff, t.structure, opts.probe_cap);
        log.matched_output = loc.matched;
        log.output_statements = loc.output_statements.len();
        log.probes = loc.probe_plan.len();
        let (states, dropped, _) = collect_states(ws, &source, &loc.probe_plan, case)?;
        log.dropped_probes = dropped;
        log.states = states.len();
        if let Some(dir) = &opts.trace_dir {
            write_trace(dir, round, &case.id, &states)?;
        }
        let graphs: Vec<(String, &crate::c::cfg::Cfg, &crate::c::ddg::Ddg)> = loc
            .c_functions
            .iter()
            .filter_map(|k| t.structure.graphs.get(k).map(|g| (k.clone(), &g.cfg, &g.ddg)))
            .collect();
        let input = String::from_utf8_lossy(&case.input).into_owned();
        let c_out = String::from_utf8_lossy(&d.expected.stdout).into_owned();
        let rust_out = {
            let mut s = String::from_utf8_lossy(&d.actual.stdout).into_owned();
            if d.actual.timed_out {
                s.push_str("\n[timed out]");
            } else if d.exit_mismatch {
                s.push_str(&format!(
                    "\n[exit code {:?}, expected {:?}]\n{}",
                    d.actual.exit_code,
                    d.expected.exit_code,
                    String::from_utf8_lossy(&d.actual.stderr).trim_end()
                ));
            }
            s
        };
        let prompt = render_semantic_fix_prompt(
            &SemanticFixInput {
                structure_info: structure_info(t.structure, &source),
                input: &input,
                c_out: &c_out,
                rust_out: &rust_out,
                diff: d.diff.render(),
                related_code: loc.output_statements.iter().map(|s| s.text.clone()).collect(),
                graphs,
                states: &states,
                failing_source: &source,
                constraints: opts.constraints.clone(),
            },
            opts.budget,
        );
        log.prompt_id = Some(format!("{}:{}", prompt.kind.as_str(), &cache_key(&prompt, &opts.params)[..16]));
        let code = match gateway
            .complete(t.program, &prompt, &opts.params)
            .and_then(|r| extract_code(&r, Expect::Single))
        {
            Ok(mut b) => b.remove(0).code,
            Err(e) => {
                log.note = format!("model call failed: {e}");
                out.rounds.push(log);
                continue;
            }
        };
        let Some(mut candidate) = merge_items(&source, &code) else {
            log.note = "reply is not valid Rust".into();
            out.rounds.push(log);
            continue;
        };
        if candidate == source {
            log.note = "reply leaves the program unchanged".into();
            out.rounds.push(log);
            continue;
        }
        let diags = Checker::check(ws, &candidate)?;
        if !errors(&diags).is_empty() {
            let s = repair_loop(ws, &candidate, t.program, t.rule_ctx, gateway, &opts.repair)?;
            if !s.success {
                ws.write_source(&source)?;
                log.note = format!("revision does not compile ({} errors); rolled back", s.final_errors.len());
                out.rounds.push(log);
                continue;
            }
            candidate = s.source().to_string();
            ws.write_source(&candidate)?;
        }
        let exe = ws.build()?;
        let next = differential_test_within(t.c_exe, &exe, t.cases, opts.float_tolerance)?;
        let before = passing(t.cases, &disc);
        let after = passing(t.cases, &next);
        if before.iter().any(|id| !after.contains(id)) {
            ws.write_source(&source)?;
            ws.build()?;
            log.note = "revision fails a previously passing case; rolled back".into();
            out.rounds.push(log);
            continue;
        }
        log.accepted = true;
        log.note = format!("{} of {} cases pass", after.len(), t.cases.len());
        out.rounds.push(log);
        source = candidate;
        disc = next;
    }
    out.equivalent = disc.is_empty();
    out.passing = passing(t.cases, &disc);
    out.discrepancies = disc;
    out.llm_calls = gateway.calls(t.program) - calls_before;
    Ok(out)
}
