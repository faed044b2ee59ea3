//! Compiler-driven syntax repair.

pub mod diagnostic;
pub mod rules;
pub mod scope;
pub mod workspace;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::llm::{write_atomic, Gateway, GenerationParams};
use crate::prompt::Budget;
use crate::rust::parse_rust;
use diagnostic::{Diagnostic, Severity};
use rules::{apply_rule_fixes, escape_keywords, RoutingTable, RuleContext};
use scope::{fix_unparsable, llm_scope_fix, LlmFixContext, RegionOptions, Scope};
pub use workspace::{ToolchainError, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Unparsable,
    Rule,
    Function,
    Item,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Unparsable => "unparsable",
            Stage::Rule => "rule",
            Stage::Function => "function",
            Stage::Item => "item",
        }
    }
}

/// Something that compiles a candidate source and reports diagnostics.
pub trait Checker {
    fn check(&self, source: &str) -> Result<Vec<Diagnostic>, ToolchainError>;
}

impl Checker for Workspace {
    fn check(&self, source: &str) -> Result<Vec<Diagnostic>, ToolchainError> {
        self.write_source(source)?;
        Workspace::check(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub iteration: usize,
    pub stage: Stage,
    /// Rule id for deterministic fixes, prompt id for model fixes.
    pub id: String,
    pub span: (usize, usize),
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejected {
    pub iteration: usize,
    pub stage: Stage,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOptions {
    pub max_iterations: usize,
    pub region: RegionOptions,
    /// Rule passes per iteration, recompiling between passes.
    pub rule_passes: usize,
    #[serde(skip)]
    pub routing: RoutingTable,
    pub params: GenerationParams,
    #[serde(skip, default = "Budget::unlimited")]
    pub budget: Budget,
    pub constraints: String,
}

impl Default for RepairOptions {
    fn default() -> Self {
        RepairOptions {
            max_iterations: 5,
            region: RegionOptions::default(),
            rule_passes: 4,
            routing: RoutingTable::builtin(),
            params: GenerationParams::default(),
            budget: Budget::unlimited(),
            constraints: "Keep function names, parameters and return types unchanged.\nUse only the Rust standard library."
                .into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RepairSession {
    pub program: String,
    pub success: bool,
    pub iterations: usize,
    pub initial_errors: usize,
    pub final_errors: Vec<Diagnostic>,
    pub warnings: usize,
    pub llm_calls: usize,
    pub ledger: Vec<LedgerEntry>,
    pub rejected: Vec<Rejected>,
    /// Source after each accepted fix; the first is the input.
    #[serde(skip)]
    pub revisions: Vec<String>,
}

impl RepairSession {
    pub fn source(&self) -> &str {
        self.revisions.last().map(String::as_str).unwrap_or("")
    }

    pub fn fixes_by_stage(&self) -> BTreeMap<Stage, usize> {
        let mut m = BTreeMap::new();
        for e in &self.ledger {
            *m.entry(e.stage).or_insert(0) += 1;
        }
        m
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("session serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        write_atomic(path, &self.to_json())
    }

    fn accept(&mut self, iteration: usize, stage: Stage, id: &str, span: (usize, usize), before: &str, after: &str, source: String) {
        self.ledger.push(LedgerEntry {
            iteration,
            stage,
            id: id.to_string(),
            span,
            before: before.to_string(),
            after: after.to_string(),
        });
        self.revisions.push(source);
    }

    fn reject(&mut self, iteration: usize, stage: Stage, reason: impl Into<String>) {
        self.rejected.push(Rejected {
            iteration,
            stage,
            reason: reason.into(),
        });
    }

    fn rollback(&mut self, to: usize) {
        self.revisions.truncate(to);
        self.ledger.truncate(to - 1);
    }
}

fn error_count(diags: &[Diagnostic]) -> usize {
    diags.iter().filter(|d| d.is_error()).count()
}

/// Errors whose code is among `codes`.
fn targeted(diags: &[Diagnostic], codes: &[String]) -> usize {
    diags.iter().filter(|d| d.is_error() && codes.contains(&d.code)).count()
}

fn codes_of(diags: &[Diagnostic]) -> Vec<String> {
    let mut c: Vec<String> = diags.iter().filter(|d| d.is_error()).map(|d| d.code.clone()).collect();
    c.sort();
    c.dedup();
    c
}

/// Iterate parse fix, rule fixes and model fixes with recompilation
/// between stages until the program compiles or the budget runs out.
/// A stage that raises the number of errors it targeted is rolled back.
pub fn repair_loop(
    checker: &dyn Checker,
    initial: &str,
    program: &str,
    rule_ctx: &RuleContext,
    gateway: &Gateway,
    opts: &RepairOptions,
) -> Result<RepairSession, ToolchainError> {
    let calls_before = gateway.calls(program);
    let mut s = RepairSession {
        program: program.to_string(),
        revisions: vec![initial.to_string()],
        ..Default::default()
    };
    let llm = LlmFixContext {
        gateway,
        program,
        params: &opts.params,
        budget: opts.budget,
        constraints: opts.constraints.clone(),
    };
    let mut diags = if parse_rust(initial).is_ok() {
        checker.check(initial)?
    } else {
        Vec::new()
    };
    s.initial_errors = error_count(&diags);
    let mut parsed = parse_rust(initial).is_ok();
    if parsed && error_count(&diags) == 0 {
        return Ok(finish(s, diags, true, gateway, calls_before));
    }
    for it in 1..=opts.max_iterations {
        s.iterations = it;
        let start = s.revisions.len();
        if !parsed {
            for f in escape_keywords(s.source()) {
                s.accept(it, Stage::Unparsable, &f.rule, f.span, &f.before, &f.after, f.source);
            }
            if parse_rust(s.source()).is_err() {
                let out = fix_unparsable(s.source(), opts.region, &llm);
                for r in &out.rejected {
                    s.reject(it, Stage::Unparsable, r.to_string());
                }
                if let Some(e) = out.edit {
                    s.accept(it, Stage::Unparsable, &e.prompt_id, e.span, &e.before, &e.after, e.source);
                }
                if let Err(e) = out.result {
                    s.reject(it, Stage::Unparsable, e.to_string());
                    if s.revisions.len() == start {
                        break;
                    }
                    continue;
                }
            }
            parsed = true;
            diags = checker.check(s.source())?;
            if error_count(&diags) == 0 {
                return Ok(finish(s, diags, true, gateway, calls_before));
            }
        }

        for _ in 0..opts.rule_passes {
            let out = apply_rule_fixes(s.source(), &diags, &opts.routing, rule_ctx);
            for r in &out.regressions {
                s.reject(it, Stage::Rule, r.to_string());
            }
            if out.applied.is_empty() {
                break;
            }
            let mark = s.revisions.len();
            for f in out.applied {
                s.accept(it, Stage::Rule, &f.rule, f.span, &f.before, &f.after, f.source);
            }
            let codes = codes_of(&out.fixed);
            let next = checker.check(s.source())?;
            if targeted(&next, &codes) > targeted(&diags, &codes) {
                s.reject(it, Stage::Rule, format!("rule fixes increased {} errors; rolled back", codes.join(", ")));
                s.rollback(mark);
                break;
            }
            diags = next;
            if error_count(&diags) == 0 {
                return Ok(finish(s, diags, true, gateway, calls_before));
            }
        }

        for (scope, stage) in [(Scope::Function, Stage::Function), (Scope::Item, Stage::Item)] {
            let out = llm_scope_fix(s.source(), &diags, scope, &llm);
            for r in &out.rejected {
                s.reject(it, stage, r.to_string());
            }
            if out.edits.is_empty() {
                continue;
            }
            let mark = s.revisions.len();
            for e in out.edits {
                s.accept(it, stage, &e.prompt_id, e.span, &e.before, &e.after, e.source);
            }
            let codes = codes_of(&diags);
            let next = checker.check(s.source())?;
            if targeted(&next, &codes) > targeted(&diags, &codes) {
                s.reject(it, stage, "model fixes increased the error count; rolled back");
                s.rollback(mark);
                continue;
            }
            diags = next;
            if error_count(&diags) == 0 {
                return Ok(finish(s, diags, true, gateway, calls_before));
            }
        }
        if s.revisions.len() == start {
            break;
        }
    }
    if s.revisions.len() > 1 {
        // Keep the workspace on the last accepted revision.
        let _ = checker.check(s.source());
    }
    Ok(finish(s, diags, false, gateway, calls_before))
}

fn finish(mut s: RepairSession, diags: Vec<Diagnostic>, success: bool, gateway: &Gateway, calls_before: usize) -> RepairSession {
    s.success = success;
    s.warnings = diags.iter().filter(|d| d.severity == Severity::Warning).count();
    s.final_errors = diags.into_iter().filter(|d| d.is_error()).collect();
    s.llm_calls = gateway.calls(&s.program) - calls_before;
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MockTable;
    use std::cell::RefCell;

    /// Reports a fixed diagnostic list while `trigger` occurs in the source.
    struct FakeChecker {
        rules: Vec<(&'static str, Diagnostic)>,
        seen: RefCell<Vec<String>>,
    }

    impl Checker for FakeChecker {
        fn check(&self, source: &str) -> Result<Vec<Diagnostic>, ToolchainError> {
            self.seen.borrow_mut().push(source.to_string());
            Ok(self
                .rules
                .iter()
                .filter(|(t, _)| source.contains(t))
                .map(|(t, d)| {
                    let mut d = d.clone();
                    let at = source.find(t).unwrap();
                    if let Some(s) = d.span.as_mut() {
                        s.byte_start = at;
                        s.byte_end = at + t.len();
                    }
                    d
                })
                .collect())
        }
    }

    fn error(code: &str, msg: &str) -> Diagnostic {
        Diagnostic {
            code: code.into(),
            severity: Severity::Error,
            message: msg.into(),
            span: Some(diagnostic::DiagSpan {
                file: "src/main.rs".into(),
                byte_start: 0,
                byte_end: 0,
                line: 1,
                column: 1,
                label: None,
            }),
            suggestion: None,
            notes: vec![],
        }
    }

    #[test]
    fn compiling_input_succeeds_at_iteration_zero() {
        let c = FakeChecker {
            rules: vec![],
            seen: RefCell::new(vec![]),
        };
        let gw = Gateway::mock(MockTable::default());
        let s = repair_loop(&c, "fn main() {}\n", "p", &RuleContext::default(), &gw, &RepairOptions::default()).unwrap();
        assert!(s.success);
        assert_eq!(s.iterations, 0);
        assert!(s.ledger.is_empty());
        assert_eq!(gw.total_calls(), 0);
    }

    #[test]
    fn echo_backend_stops_within_budget() {
        let c = FakeChecker {
            rules: vec![("5", error("E0308", "mismatched types"))],
            seen: RefCell::new(vec![]),
        };
        let gw = Gateway::mock(MockTable::echo());
        let opts = RepairOptions::default();
        let s = repair_loop(&c, "fn f() -> String { 5 }\nfn main() {}\n", "p", &RuleContext::default(), &gw, &opts).unwrap();
        assert!(!s.success);
        assert!(s.iterations <= opts.max_iterations);
        assert_eq!(s.final_errors.len(), 1);
        assert!(s.ledger.is_empty());
        assert!(gw.total_calls() <= 2 * opts.max_iterations);
    }

    #[test]
    fn unparsable_input_with_echo_gives_up() {
        let c = FakeChecker {
            rules: vec![],
            seen: RefCell::new(vec![]),
        };
        let gw = Gateway::mock(MockTable::echo());
        let opts = RepairOptions::default();
        let s = repair_loop(&c, "fn main() {\n", "p", &RuleContext::default(), &gw, &opts).unwrap();
        assert!(!s.success);
        assert!(gw.total_calls() <= (opts.region.retries + 1) * opts.max_iterations);
        assert!(c.seen.borrow().is_empty());
    }

    #[test]
    fn ledger_before_texts_come_from_prior_revisions() {
        let mut d = error("E0530", "let bindings cannot shadow statics");
        d.span.as_mut().unwrap().label = None;
        let src = "static total: i32 = 0;\nfn main() {\n    let total = 3;\n    let type = total;\n}\n";
        let c = FakeChecker {
            rules: vec![("let total =", d)],
            seen: RefCell::new(vec![]),
        };
        // The fake reports the whole `let total =` text; narrow to the name.
        struct Narrow<'a>(&'a FakeChecker);
        impl Checker for Narrow<'_> {
            fn check(&self, source: &str) -> Result<Vec<Diagnostic>, ToolchainError> {
                let mut ds = self.0.check(source)?;
                for d in &mut ds {
                    if let Some(s) = d.span.as_mut() {
                        s.byte_start += 4;
                        s.byte_end = s.byte_start + 5;
                    }
                }
                Ok(ds)
            }
        }
        let gw = Gateway::mock(MockTable::default());
        let s = repair_loop(&Narrow(&c), src, "p", &RuleContext::default(), &gw, &RepairOptions::default()).unwrap();
        assert!(s.success, "{:?}", s.rejected);
        assert_eq!(gw.total_calls(), 0);
        assert_eq!(s.revisions.len(), s.ledger.len() + 1);
        for (i, e) in s.ledger.iter().enumerate() {
            assert_eq!(&s.revisions[i][e.span.0..e.span.1], e.before);
        }
        assert!(s.source().contains("let type_ = total_1;"));
        assert_eq!(s.fixes_by_stage()[&Stage::Rule], 1);
    }
}
