use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use xlat_core::llm::BackendTag;
use xlat_core::pipeline::{Mode, PipelineConfig, Session, StageName};

/// Translate C programs to Rust with structure-aware prompting and
/// compiler- and test-driven repair.
#[derive(Debug, Parser)]
#[command(name = "xlat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract program structure into the session.
    Analyze(Inputs),
    /// Translate analyzed programs.
    Translate(Inputs),
    /// Repair compiler errors in translated programs.
    FixSyntax(Inputs),
    /// Differential testing and behaviour repair.
    FixSemantics(Inputs),
    /// Write report.json and report.md for the session.
    Report(Inputs),
    /// All stages, then the report.
    Pipeline(Inputs),
}

#[derive(Debug, Args)]
struct Inputs {
    /// C files, directories of C files, or project directories with --project.
    paths: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Configuration file (TOML). Defaults to `<out>/config.toml` when it exists.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["live", "replay", "mock"])]
    backend: Option<String>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
    #[arg(long, global = true)]
    max_rounds: Option<usize>,
    /// Treat each input directory as one multi-file program.
    #[arg(long, global = true)]
    project: bool,
    #[arg(long = "include-path", global = true)]
    include_paths: Vec<PathBuf>,
    #[arg(long, global = true)]
    tests_dir: Option<PathBuf>,
    /// Session directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scripted replies for the mock backend.
    #[arg(long, global = true)]
    mock_table: Option<PathBuf>,
    /// Reference Rust file name next to each input, answered by the mock backend.
    #[arg(long, global = true)]
    mock_reference: Option<String>,
    /// Exit with status 1 when SynCor is below this percentage.
    #[arg(long, global = true)]
    syncor_threshold: Option<f64>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn load_config(o: &Overrides, inputs: &Inputs) -> Result<PipelineConfig> {
    let from_session = o
        .out
        .as_ref()
        .map(|d| d.join("config.toml"))
        .filter(|p| p.exists());
    let mut cfg = match o.config.as_ref().or(from_session.as_ref()) {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if !inputs.paths.is_empty() {
        cfg.inputs = inputs.paths.clone();
    }
    if let Some(b) = &o.backend {
        cfg.backend = b.parse::<BackendTag>().map_err(anyhow::Error::msg)?;
    }
    if o.project {
        cfg.mode = Mode::Project;
    }
    if !o.include_paths.is_empty() {
        cfg.include_paths = o.include_paths.clone();
    }
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = &o.$field {
                cfg.$field = v.clone().into();
            }
        )*};
    }
    set!(jobs, max_iterations, max_rounds, tests_dir, out, mock_table, mock_reference, syncor_threshold);
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let inputs = match &cli.command {
        Command::Analyze(i)
        | Command::Translate(i)
        | Command::FixSyntax(i)
        | Command::FixSemantics(i)
        | Command::Report(i)
        | Command::Pipeline(i) => i,
    };
    let cfg = load_config(&cli.opts, inputs)?;
    let threshold = cfg.syncor_threshold;
    let session = match Session::new(cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    let stage = match cli.command {
        Command::Analyze(_) => StageName::Analyze,
        Command::Translate(_) => StageName::Translate,
        Command::FixSyntax(_) => StageName::FixSyntax,
        Command::FixSemantics(_) => StageName::FixSemantics,
        Command::Report(_) | Command::Pipeline(_) => {
            let report = if matches!(cli.command, Command::Pipeline(_)) {
                session.pipeline()
            } else {
                session.report()
            }
            .context("report")?;
            let m = &report.metrics;
            let pct = |v: Option<f64>| v.map_or("n/a".into(), |v| format!("{v:.2}"));
            println!(
                "programs {}  SynCor {}  SemCor {}  PUR {}  RLOC {}  #W {}  #E {}",
                report.totals.n_c,
                pct(m.syncor),
                pct(m.semcor),
                pct(m.pur),
                m.rloc,
                m.warnings,
                m.errors
            );
            println!("report written to {}", session.root.join("report.md").display());
            return Ok(if m.meets_syncor(threshold) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            });
        }
    };
    session.init()?;
    let mut failed = 0;
    for p in &session.programs {
        match session.run_stage(stage, p) {
            Ok(()) => println!("{}: ok", p.name),
            Err(e) => {
                failed += 1;
                println!("{}: failed: {e}", p.name);
            }
        }
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.opts.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
