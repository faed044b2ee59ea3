//! Stage orchestration over a session directory.
//!
//! Layout under the session root, per program `P`:
//!
//! ```text
//! config.toml
//! analysis/P/structure.json
//! translate/P/{events.jsonl,session.json,assembled.rs}
//! workspaces/P/                 cargo package being repaired
//! repair/P.json, repair/P.rs    syntax repair ledger and result
//! build/P/c-ref                 C reference executable
//! semantic/P/{outcome.json,final.rs,round-<n>.trace}
//! status/P.json                 stage failures
//! llm/, prompts/                gateway call logs and replay cache
//! report.json, report.md
//! ```

pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::c::project::{analyze_file, analyze_project, AnalysisError, ProgramStructure};
use crate::llm::{gateway_for, write_atomic, Gateway, LlmError, MockTable};
use crate::report::{measure_workspace, ProgramRecord, Report, ReportError};
use crate::semantic::{load_cases, semantic_fix_loop, CCompiler, SemanticError, SemanticOptions, SemanticOutcome, SemanticTarget};
use crate::syntax::rules::RuleContext;
use crate::syntax::scope::RegionOptions;
use crate::syntax::{repair_loop, RepairOptions, RepairSession, ToolchainError, Workspace};
use crate::translate::{assemble, assemble_project, EventKind, TranslateOptions, TranslationSession, Translator};
pub use config::{ConfigError, Mode, PipelineConfig};

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Toolchain(#[from] ToolchainError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("input changed since {0} was written; run analyze again")]
    Stale(PathBuf),
    #[error("missing artifact {0}; run the earlier stage first")]
    MissingArtifact(PathBuf),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("malformed artifact {0}: {1}")]
    Malformed(PathBuf, serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageName {
    Analyze,
    Translate,
    FixSyntax,
    FixSemantics,
}

impl StageName {
    pub const ALL: [StageName; 4] = [
        StageName::Analyze,
        StageName::Translate,
        StageName::FixSyntax,
        StageName::FixSemantics,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramInput {
    pub name: String,
    pub path: PathBuf,
    pub mode: Mode,
}

impl ProgramInput {
    /// Directory holding the program and its side files.
    pub fn home(&self) -> &Path {
        match self.mode {
            Mode::Project => &self.path,
            Mode::File => self.path.parent().unwrap_or(Path::new(".")),
        }
    }

    pub fn c_sources(&self) -> Vec<PathBuf> {
        match self.mode {
            Mode::File => vec![self.path.clone()],
            Mode::Project => c_files(&self.path),
        }
    }
}

fn c_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .map(|e| e.into_path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "c"))
        .collect();
    v.sort();
    v
}

/// Programs named by the configuration, sorted by name.
pub fn discover(cfg: &PipelineConfig) -> Result<Vec<ProgramInput>, ConfigError> {
    let mut out: Vec<ProgramInput> = Vec::new();
    for input in &cfg.inputs {
        let paths = match cfg.mode {
            Mode::Project => vec![input.clone()],
            Mode::File if input.is_dir() => c_files(input),
            Mode::File => vec![input.clone()],
        };
        for path in paths {
            let name = match cfg.mode {
                Mode::Project => path.file_name(),
                Mode::File => path.file_stem(),
            }
            .and_then(|n| n.to_str())
            .unwrap_or("program")
            .to_string();
            if out.iter().any(|p| p.name == name) {
                return Err(ConfigError::Invalid(format!("two inputs are named `{name}`")));
            }
            out.push(ProgramInput {
                name,
                path,
                mode: cfg.mode,
            });
        }
    }
    if out.is_empty() {
        return Err(ConfigError::Invalid("no C programs found in the inputs".into()));
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Status {
    failures: BTreeMap<StageName, String>,
}

/// A validated configuration bound to its session directory.
pub struct Session {
    pub config: PipelineConfig,
    pub root: PathBuf,
    pub programs: Vec<ProgramInput>,
    mock_base: MockTable,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StageError + '_ {
    move |e| StageError::Io(path.to_path_buf(), e)
}

fn read(path: &Path) -> Result<String, StageError> {
    if !path.exists() {
        return Err(StageError::MissingArtifact(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, text: &str) -> Result<(), StageError> {
    write_atomic(path, text).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StageError> {
    serde_json::from_str(&read(path)?).map_err(|e| StageError::Malformed(path.to_path_buf(), e))
}

impl Session {
    /// Validate the configuration. Nothing is written.
    pub fn new(config: PipelineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let programs = discover(&config)?;
        let mock_base = match &config.mock_table {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| ConfigError::Read(p.clone(), e))?;
                toml::from_str(&text).map_err(|e| ConfigError::Parse(p.clone(), e))?
            }
            None => MockTable::default(),
        };
        Ok(Session {
            root: config.out.clone(),
            config,
            programs,
            mock_base,
        })
    }

    pub fn program(&self, name: &str) -> Option<&ProgramInput> {
        self.programs.iter().find(|p| p.name == name)
    }

    fn structure_path(&self, p: &str) -> PathBuf {
        self.root.join("analysis").join(p).join("structure.json")
    }

    fn translate_dir(&self, p: &str) -> PathBuf {
        self.root.join("translate").join(p)
    }

    pub fn workspace_dir(&self, p: &str) -> PathBuf {
        self.root.join("workspaces").join(p)
    }

    fn repair_json(&self, p: &str) -> PathBuf {
        self.root.join("repair").join(format!("{p}.json"))
    }

    fn repair_rs(&self, p: &str) -> PathBuf {
        self.root.join("repair").join(format!("{p}.rs"))
    }

    pub fn semantic_dir(&self, p: &str) -> PathBuf {
        self.root.join("semantic").join(p)
    }

    fn status_path(&self, p: &str) -> PathBuf {
        self.root.join("status").join(format!("{p}.json"))
    }

    fn target_dir(&self) -> PathBuf {
        self.root.join("target")
    }

    /// Record the resolved configuration in the session root.
    pub fn init(&self) -> Result<(), StageError> {
        let path = self.root.join("config.toml");
        write(&path, &self.config.to_toml())
    }

    fn gateway(&self, p: &ProgramInput) -> Result<Gateway, StageError> {
        let mut table = self.mock_base.clone();
        if let Some(r) = &self.config.mock_reference {
            let path = p.home().join(r);
            if path.exists() {
                let text = read(&path)?;
                table
                    .set_reference(&text)
                    .map_err(|e| StageError::Io(path.clone(), std::io::Error::other(e.to_string())))?;
            }
        }
        Ok(gateway_for(self.config.backend, &self.root, Some(table), self.config.jobs)?)
    }

    /// The analyzed structure with its syntax trees. The input is parsed
    /// again and must still match the saved `structure.json`.
    fn structure(&self, p: &ProgramInput) -> Result<ProgramStructure, StageError> {
        let saved = read(&self.structure_path(&p.name))?;
        let s = self.analyze_input(p)?;
        if s.to_json() != saved {
            return Err(StageError::Stale(self.structure_path(&p.name)));
        }
        Ok(s)
    }

    fn workspace(&self, p: &str, source: &str) -> Result<Workspace, StageError> {
        let dir = self.workspace_dir(p);
        let mut ws = Workspace::create(&dir, p, source)
            .map_err(io_err(&dir))?
            .with_target_dir(self.target_dir());
        ws.timeout = Duration::from_secs(self.config.toolchain_timeout_secs);
        Ok(ws)
    }

    fn repair_options(&self) -> RepairOptions {
        RepairOptions {
            max_iterations: self.config.max_iterations,
            region: RegionOptions {
                retries: self.config.region_retries,
                ..RegionOptions::default()
            },
            params: self.config.generation.clone(),
            ..RepairOptions::default()
        }
    }

    fn analyze_input(&self, p: &ProgramInput) -> Result<ProgramStructure, StageError> {
        let mut s = match p.mode {
            Mode::File => analyze_file(&p.path, &self.config.include_paths)?,
            Mode::Project => analyze_project(&p.path, &self.config.include_paths)?,
        };
        s.name = p.name.clone();
        Ok(s)
    }

    pub fn analyze(&self, p: &ProgramInput) -> Result<ProgramStructure, StageError> {
        let s = self.analyze_input(p)?;
        write(&self.structure_path(&p.name), &s.to_json())?;
        Ok(s)
    }

    pub fn translate(&self, p: &ProgramInput) -> Result<TranslationSession, StageError> {
        let structure = self.structure(p)?;
        let gateway = self.gateway(p)?;
        let options = TranslateOptions {
            params: self.config.generation.clone(),
            retranslations: self.config.retranslations,
            ..TranslateOptions::default()
        };
        let t = Translator {
            structure: &structure,
            gateway: &gateway,
            options: &options,
        };
        let (mut session, project) = match p.mode {
            Mode::Project => (t.translate_project(), true),
            Mode::File => (t.translate_program(), false),
        };
        let assembled = if project {
            assemble_project(&mut session, &structure)
        } else {
            assemble(&mut session, &structure)
        };
        let dir = self.translate_dir(&p.name);
        session.save(&dir, &assembled.source).map_err(io_err(&dir))?;
        Ok(session)
    }

    pub fn fix_syntax(&self, p: &ProgramInput) -> Result<RepairSession, StageError> {
        let structure = self.structure(p)?;
        let source = read(&self.translate_dir(&p.name).join("assembled.rs"))?;
        let ws = self.workspace(&p.name, &source)?;
        let gateway = self.gateway(p)?;
        let ctx = RuleContext::new(&structure.symbols);
        let session = repair_loop(&ws, &source, &p.name, &ctx, &gateway, &self.repair_options())?;
        write(&self.repair_json(&p.name), &session.to_json())?;
        write(&self.repair_rs(&p.name), session.source())?;
        Ok(session)
    }

    pub fn c_reference(&self, p: &ProgramInput) -> Result<PathBuf, StageError> {
        let mut cc = CCompiler::default();
        cc.include_paths = self.config.include_paths.clone();
        if p.mode == Mode::Project {
            cc.include_paths.push(p.path.clone());
        }
        let out = self.root.join("build").join(&p.name).join("c-ref");
        Ok(cc.build(&p.c_sources(), &out).map_err(SemanticError::from)?)
    }

    pub fn tests_dir(&self, p: &ProgramInput) -> Option<PathBuf> {
        match &self.config.tests_dir {
            Some(d) if d.join(&p.name).is_dir() => Some(d.join(&p.name)),
            Some(d) if self.programs.len() == 1 => Some(d.clone()),
            Some(_) => None,
            None => Some(p.home().join("tests")).filter(|d| d.is_dir()),
        }
    }

    pub fn fix_semantics(&self, p: &ProgramInput) -> Result<SemanticOutcome, StageError> {
        let structure = self.structure(p)?;
        let repair: RepairSession = read_json(&self.repair_json(&p.name))?;
        let source = read(&self.repair_rs(&p.name))?;
        let dir = self.semantic_dir(&p.name);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let mut outcome = SemanticOutcome {
            program: p.name.clone(),
            ..Default::default()
        };
        if !repair.success {
            write(&dir.join("outcome.json"), &outcome.to_json())?;
            return Ok(outcome);
        }
        let ws = self.workspace(&p.name, &source)?;
        let c_exe = self.c_reference(p)?;
        let cases = match self.tests_dir(p) {
            Some(d) => load_cases(&d, self.config.time_limit()).map_err(SemanticError::from)?,
            None => Vec::new(),
        };
        let gateway = self.gateway(p)?;
        let ctx = RuleContext::new(&structure.symbols);
        let opts = SemanticOptions {
            max_rounds: self.config.max_rounds,
            probe_cap: self.config.probe_cap,
            repair: RepairOptions {
                max_iterations: self.config.max_iterations.min(2),
                ..self.repair_options()
            },
            params: self.config.generation.clone(),
            trace_dir: Some(dir.clone()),
            float_tolerance: self.config.float_tolerance,
            ..SemanticOptions::default()
        };
        let target = SemanticTarget {
            program: &p.name,
            structure: &structure,
            c_exe: &c_exe,
            workspace: &ws,
            cases: &cases,
            rule_ctx: &ctx,
        };
        outcome = semantic_fix_loop(&target, &gateway, &opts)?;
        write(&dir.join("outcome.json"), &outcome.to_json())?;
        write(&dir.join("final.rs"), &ws.source().map_err(io_err(&ws.root))?)?;
        Ok(outcome)
    }

    fn set_status(&self, p: &str, stage: StageName, failure: Option<String>) -> Result<(), StageError> {
        let path = self.status_path(p);
        let mut st: Status = if path.exists() { read_json(&path)? } else { Status::default() };
        match failure {
            Some(f) => st.failures.insert(stage, f),
            None => st.failures.remove(&stage),
        };
        write(&path, &(serde_json::to_string_pretty(&st).unwrap() + "\n"))
    }

    /// Run one stage for one program, recording failure or success.
    pub fn run_stage(&self, stage: StageName, p: &ProgramInput) -> Result<(), StageError> {
        log::info!("{}: {:?}", p.name, stage);
        let r = match stage {
            StageName::Analyze => self.analyze(p).map(drop),
            StageName::Translate => self.translate(p).map(drop),
            StageName::FixSyntax => self.fix_syntax(p).map(drop),
            StageName::FixSemantics => self.fix_semantics(p).map(drop),
        };
        if let Err(e) = &r {
            log::warn!("{}: {:?} failed: {e}", p.name, stage);
        }
        self.set_status(&p.name, stage, r.as_ref().err().map(ToString::to_string))?;
        r
    }

    /// Run `stages` over every program with up to `jobs` programs at once.
    /// A failing program stops at its failing stage; others continue.
    pub fn run_stages(&self, stages: &[StageName]) -> Result<(), StageError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.jobs)
            .build()
            .expect("thread pool");
        pool.install(|| {
            self.programs.par_iter().for_each(|p| {
                for &s in stages {
                    if self.run_stage(s, p).is_err() {
                        break;
                    }
                }
            })
        });
        Ok(())
    }

    /// Per-program record from the session artifacts.
    pub fn record(&self, p: &ProgramInput) -> Result<ProgramRecord, StageError> {
        let status: Status = match self.status_path(&p.name) {
            path if path.exists() => read_json(&path)?,
            _ => Status::default(),
        };
        let failure = (!status.failures.is_empty()).then(|| {
            status
                .failures
                .iter()
                .map(|(s, m)| format!("{s:?}: {m}"))
                .collect::<Vec<_>>()
                .join("; ")
        });
        let mut calls = 0;
        if let Ok(t) = TranslationSession::load(&self.translate_dir(&p.name)) {
            calls += t
                .events
                .iter()
                .filter(|e| matches!(e.kind, EventKind::FunctionPrompted { .. } | EventKind::GlobalsPrompted { .. }))
                .count();
        }
        let repair: Option<RepairSession> = read_json(&self.repair_json(&p.name)).ok();
        let semantic: Option<SemanticOutcome> = read_json(&self.semantic_dir(&p.name).join("outcome.json")).ok();
        let latest = [self.semantic_dir(&p.name).join("final.rs"), self.repair_rs(&p.name)]
            .into_iter()
            .find(|f| f.exists());
        let mut rec = match latest {
            Some(f) => {
                let ws = self.workspace(&p.name, &read(&f)?)?;
                measure_workspace(&ws, &p.name)?
            }
            None => ProgramRecord {
                program: p.name.clone(),
                ..Default::default()
            },
        };
        if let Some(r) = &repair {
            calls += r.llm_calls;
            rec.syntax_fixes = r
                .fixes_by_stage()
                .into_iter()
                .map(|(s, n)| (s.as_str().to_string(), n))
                .collect();
        }
        if let Some(s) = &semantic {
            calls += s.llm_calls;
            rec.passes = rec.compiles && s.equivalent;
            rec.semantic_rounds = s.rounds_used;
            rec.semantic_fixes = s.rounds.iter().filter(|r| r.accepted).count();
        }
        rec.llm_calls = calls;
        rec.failure = match (failure, rec.failure.take()) {
            (Some(a), Some(b)) => Some(format!("{a}; {b}")),
            (a, b) => a.or(b),
        };
        Ok(rec)
    }

    /// Build and write `report.json` and `report.md`.
    pub fn report(&self) -> Result<Report, StageError> {
        let records = self
            .programs
            .iter()
            .map(|p| self.record(p))
            .collect::<Result<Vec<_>, _>>()?;
        let report = Report::new(records);
        report.write(&self.root).map_err(io_err(&self.root))?;
        Ok(report)
    }

    /// All stages, then the report.
    pub fn pipeline(&self) -> Result<Report, StageError> {
        self.init()?;
        self.run_stages(&StageName::ALL)?;
        self.report()
    }
}
