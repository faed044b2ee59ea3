//! Batch correctness and quality metrics, and the report files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::write_atomic;
use crate::rust::{count_unsafe_lines, parse_rust};
use crate::syntax::diagnostic::Severity;
use crate::syntax::workspace::errors;
use crate::syntax::{ToolchainError, Workspace};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Toolchain(#[from] ToolchainError),
    #[error("workspace does not compile ({0} errors)")]
    NotCompiling(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed report: {0}")]
    Malformed(#[from] serde_json::Error),
}

/// Outcome of one program, as collected from its session artifacts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramRecord {
    pub program: String,
    pub compiles: bool,
    /// Passes every test case. Only meaningful when `compiles`.
    pub passes: bool,
    pub rloc: usize,
    pub uloc: usize,
    pub warnings: usize,
    pub errors: usize,
    /// Accepted syntax fixes per repair stage.
    #[serde(default)]
    pub syntax_fixes: BTreeMap<String, usize>,
    #[serde(default)]
    pub semantic_rounds: usize,
    #[serde(default)]
    pub semantic_fixes: usize,
    #[serde(default)]
    pub llm_calls: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchMetrics {
    pub n_c: usize,
    pub syn_rs: usize,
    pub sem_rs: usize,
    pub rloc: usize,
    pub uloc: usize,
    pub warnings: usize,
    pub errors: usize,
}

impl BatchMetrics {
    /// Totals over a batch. Line and lint counts only include programs
    /// that compile.
    pub fn from_records(records: &[ProgramRecord]) -> Self {
        let mut m = BatchMetrics {
            n_c: records.len(),
            ..Default::default()
        };
        for r in records.iter().filter(|r| r.compiles) {
            m.syn_rs += 1;
            m.sem_rs += usize::from(r.passes);
            m.rloc += r.rloc;
            m.uloc += r.uloc.min(r.rloc);
            m.warnings += r.warnings;
            m.errors += r.errors;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub syncor: Option<f64>,
    pub semcor: Option<f64>,
    pub pur: Option<f64>,
    pub rloc: usize,
    pub warnings: usize,
    pub errors: usize,
}

impl Metrics {
    /// Whether SynCor reaches `threshold` percent. An empty batch passes.
    pub fn meets_syncor(&self, threshold: f64) -> bool {
        self.syncor.is_none_or(|s| s + 1e-9 >= threshold)
    }
}

/// `100 * num / den` rounded half-up to two decimals; `None` when `den`
/// is zero.
pub fn percent(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        return None;
    }
    let (num, den) = (num as u128, den as u128);
    let hundredths = (20_000 * num + den) / (2 * den);
    Some(hundredths as f64 / 100.0)
}

pub fn compute_metrics(b: &BatchMetrics) -> Metrics {
    Metrics {
        syncor: percent(b.syn_rs, b.n_c),
        semcor: percent(b.sem_rs, b.syn_rs),
        pur: percent(b.uloc, b.rloc),
        rloc: b.rloc,
        warnings: b.warnings,
        errors: b.errors,
    }
}

/// Lint warnings and errors for a compiling workspace. Denied lints are
/// reported at error level and count as errors.
pub fn run_lints(ws: &Workspace) -> Result<(usize, usize), ReportError> {
    let n = errors(&ws.check()?).len();
    if n > 0 {
        return Err(ReportError::NotCompiling(n));
    }
    let diags = ws.clippy()?;
    let count = |s: Severity| diags.iter().filter(|d| d.severity == s).count();
    Ok((count(Severity::Warning), count(Severity::Error)))
}

/// Record for a workspace: compilation, line counts and lints.
pub fn measure_workspace(ws: &Workspace, program: &str) -> Result<ProgramRecord, ReportError> {
    let mut r = ProgramRecord {
        program: program.to_string(),
        ..Default::default()
    };
    match run_lints(ws) {
        Ok((w, e)) => {
            r.compiles = true;
            r.warnings = w;
            r.errors = e;
        }
        Err(ReportError::NotCompiling(n)) => {
            r.failure = Some(format!("{n} compiler errors remain"));
            return Ok(r);
        }
        Err(e) => return Err(e),
    }
    let source = ws.source()?;
    if let Ok(ast) = parse_rust(&source) {
        let c = count_unsafe_lines(&ast);
        r.rloc = c.rloc;
        r.uloc = c.uloc;
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub programs: Vec<ProgramRecord>,
    pub totals: BatchMetrics,
    pub metrics: Metrics,
    /// Accepted fixes summed over programs, keyed by stage.
    pub fixes_by_stage: BTreeMap<String, usize>,
}

impl Report {
    pub fn new(mut programs: Vec<ProgramRecord>) -> Self {
        programs.sort_by(|a, b| a.program.cmp(&b.program));
        let totals = BatchMetrics::from_records(&programs);
        let mut fixes_by_stage: BTreeMap<String, usize> = BTreeMap::new();
        for p in &programs {
            for (stage, n) in &p.syntax_fixes {
                *fixes_by_stage.entry(stage.clone()).or_default() += n;
            }
            if p.semantic_fixes > 0 {
                *fixes_by_stage.entry("semantic".into()).or_default() += p.semantic_fixes;
            }
        }
        Report {
            version: REPORT_VERSION,
            metrics: compute_metrics(&totals),
            programs,
            totals,
            fixes_by_stage,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_markdown(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
        let yes = |b: bool| if b { "yes" } else { "no" };
        let stages: Vec<&String> = self.fixes_by_stage.keys().collect();
        let mut out = String::from("# Translation report\n\n");
        let m = &self.metrics;
        let t = &self.totals;
        out.push_str("| Metric | Value |\n|---|---|\n");
        out.push_str(&format!("| Programs | {} |\n", t.n_c));
        out.push_str(&format!("| SynCor (%) | {} ({}) |\n", pct(m.syncor), t.syn_rs));
        out.push_str(&format!("| SemCor (%) | {} ({}) |\n", pct(m.semcor), t.sem_rs));
        out.push_str(&format!("| RLOC | {} |\n", t.rloc));
        out.push_str(&format!("| PUR (%) | {} |\n", pct(m.pur)));
        out.push_str(&format!("| #W / #E | {} / {} |\n\n", t.warnings, t.errors));

        out.push_str("| Program | Compiles | Tests | RLOC | ULOC | PUR (%) | #W | #E |");
        for s in &stages {
            out.push_str(&format!(" {s} |"));
        }
        out.push_str(" Calls |\n|---|---|---|---|---|---|---|---|");
        out.push_str(&"---|".repeat(stages.len()));
        out.push_str("---|\n");
        for p in &self.programs {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                p.program,
                yes(p.compiles),
                yes(p.compiles && p.passes),
                p.rloc,
                p.uloc,
                pct(percent(p.uloc, p.rloc)),
                p.warnings,
                p.errors
            ));
            for s in &stages {
                let n = if s.as_str() == "semantic" {
                    p.semantic_fixes
                } else {
                    p.syntax_fixes.get(*s).copied().unwrap_or(0)
                };
                out.push_str(&format!(" {n} |"));
            }
            out.push_str(&format!(" {} |\n", p.llm_calls));
        }
        let failures: Vec<&ProgramRecord> = self.programs.iter().filter(|p| p.failure.is_some()).collect();
        if !failures.is_empty() {
            out.push_str("\n## Failures\n\n");
            for p in failures {
                out.push_str(&format!("- {}: {}\n", p.program, p.failure.as_deref().unwrap_or_default()));
            }
        }
        out
    }

    /// Write `report.json` and `report.md` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        write_atomic(&dir.join("report.json"), &self.to_json())?;
        write_atomic(&dir.join("report.md"), &self.to_markdown())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(name: &str, compiles: bool, passes: bool, rloc: usize, uloc: usize) -> ProgramRecord {
        ProgramRecord {
            program: name.into(),
            compiles,
            passes,
            rloc,
            uloc,
            ..Default::default()
        }
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(percent(1, 3), Some(33.33));
        assert_eq!(percent(2, 3), Some(66.67));
        assert_eq!(percent(1, 8), Some(12.5));
        assert_eq!(percent(1, 800), Some(0.13));
        assert_eq!(percent(1, 0), None);
    }

    #[test]
    fn empty_and_single_batches() {
        let r = Report::new(Vec::new());
        assert_eq!(r.totals.n_c, 0);
        assert_eq!((r.metrics.syncor, r.metrics.semcor, r.metrics.pur), (None, None, None));
        let r = Report::new(vec![rec("a", true, true, 10, 2)]);
        assert_eq!(
            r.totals,
            BatchMetrics {
                n_c: 1,
                syn_rs: 1,
                sem_rs: 1,
                rloc: 10,
                uloc: 2,
                warnings: 0,
                errors: 0
            }
        );
        assert_eq!(r.metrics.pur, Some(20.0));
    }

    #[test]
    fn non_compiling_programs_excluded_from_counts() {
        let r = Report::new(vec![rec("a", true, false, 10, 0), rec("b", false, true, 99, 99)]);
        assert_eq!((r.totals.syn_rs, r.totals.sem_rs, r.totals.rloc), (1, 0, 10));
        assert_eq!(r.metrics.syncor, Some(50.0));
        assert_eq!(r.metrics.semcor, Some(0.0));
        assert!(r.metrics.meets_syncor(50.0));
        assert!(!r.metrics.meets_syncor(50.01));
    }

    #[test]
    fn markdown_lists_programs_and_stages() {
        let mut a = rec("a", true, true, 10, 0);
        a.syntax_fixes.insert("rule".into(), 2);
        a.semantic_fixes = 1;
        let md = Report::new(vec![a, rec("b", false, false, 0, 0)]).to_markdown();
        assert!(md.contains("| SynCor (%) | 50.00 (1) |"), "{md}");
        assert!(md.contains("| a | yes | yes | 10 | 0 | 0.00 | 0 | 0 | 2 | 1 | 0 |"), "{md}");
        assert!(md.contains("| b | no | no | 0 | 0 | n/a | 0 | 0 | 0 | 0 | 0 |"), "{md}");
    }
}
