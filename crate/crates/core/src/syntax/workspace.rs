//! Generated cargo workspaces and toolchain invocation.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use serde_json::Value;
use thiserror::Error;
use wait_timeout::ChildExt;

use super::diagnostic::{parse_cargo_output, Diagnostic};
use crate::llm::write_atomic;

#[derive(Debug, Error)]
pub enum ToolchainError {
    #[error("cargo not found: {0}")]
    ToolchainMissing(String),
    #[error("`cargo {0}` exceeded {1:?}")]
    ToolchainTimeout(String, Duration),
    #[error("cargo {0} produced no executable")]
    NoExecutable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const DEFAULT_TOOL_TIMEOUT: Duration = Duration::from_secs(300);

/// One binary crate holding a translated program.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
    pub package: String,
    /// Shared target directory; the crate's own `target/` when absent.
    pub target_dir: Option<PathBuf>,
    pub timeout: Duration,
}

/// Cargo package name for a program name.
pub fn package_name(program: &str) -> String {
    let mut s: String = program
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if s.is_empty() || !s.starts_with(|c: char| c.is_ascii_alphabetic()) {
        s.insert_str(0, "p_");
    }
    s
}

impl Workspace {
    /// Create or overwrite the manifest and `src/main.rs`.
    pub fn create(root: impl Into<PathBuf>, program: &str, source: &str) -> std::io::Result<Self> {
        let root = root.into();
        let package = package_name(program);
        let manifest = format!(
            "[package]\nname = \"{package}\"\nversion = \"0.1.0\"\nedition = \"2021\"\n\n[dependencies]\n\n[workspace]\n"
        );
        write_atomic(&root.join("Cargo.toml"), &manifest)?;
        write_atomic(&root.join("src").join("main.rs"), source)?;
        Ok(Workspace {
            root,
            package,
            target_dir: None,
            timeout: DEFAULT_TOOL_TIMEOUT,
        })
    }

    /// Open an existing workspace.
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        let manifest = fs::read_to_string(root.join("Cargo.toml"))?;
        let package = manifest
            .lines()
            .find_map(|l| l.strip_prefix("name = \""))
            .and_then(|r| r.strip_suffix('"'))
            .unwrap_or("program")
            .to_string();
        Ok(Workspace {
            root,
            package,
            target_dir: None,
            timeout: DEFAULT_TOOL_TIMEOUT,
        })
    }

    pub fn with_target_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.target_dir = Some(dir.into());
        self
    }

    pub fn main_path(&self) -> PathBuf {
        self.root.join("src").join("main.rs")
    }

    pub fn source(&self) -> std::io::Result<String> {
        fs::read_to_string(self.main_path())
    }

    pub fn write_source(&self, text: &str) -> std::io::Result<()> {
        write_atomic(&self.main_path(), text)
    }

    fn cargo(&self, args: &[&str]) -> Result<(String, String, bool), ToolchainError> {
        let mut cmd = Command::new(std::env::var("CARGO").unwrap_or_else(|_| "cargo".into()));
        cmd.args(args)
            .arg("--manifest-path")
            .arg(self.root.join("Cargo.toml"))
            .env("CARGO_TERM_COLOR", "never")
            .env_remove("RUSTFLAGS")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(t) = &self.target_dir {
            cmd.env("CARGO_TARGET_DIR", t);
        }
        run_with_timeout(cmd, self.timeout, &args.join(" "))
    }

    /// `cargo check` diagnostics for the crate (errors and warnings).
    pub fn check(&self) -> Result<Vec<Diagnostic>, ToolchainError> {
        let (out, _, _) = self.cargo(&["check", "--offline", "--quiet", "--message-format=json"])?;
        Ok(parse_cargo_output(&out))
    }

    /// `cargo clippy` diagnostics, when clippy is installed.
    pub fn clippy(&self) -> Result<Vec<Diagnostic>, ToolchainError> {
        let (out, err, ok) = self.cargo(&["clippy", "--offline", "--quiet", "--message-format=json"])?;
        if !ok && out.trim().is_empty() && err.contains("no such command") {
            return Err(ToolchainError::ToolchainMissing("cargo clippy is not installed".into()));
        }
        Ok(parse_cargo_output(&out))
    }

    /// Build a debug binary and return its path.
    pub fn build(&self) -> Result<PathBuf, ToolchainError> {
        let (out, _, _) = self.cargo(&["build", "--offline", "--quiet", "--message-format=json"])?;
        for line in out.lines() {
            let Ok(v) = serde_json::from_str::<Value>(line) else {
                continue;
            };
            if v.get("reason").and_then(Value::as_str) == Some("compiler-artifact") {
                if let Some(exe) = v.get("executable").and_then(Value::as_str) {
                    return Ok(PathBuf::from(exe));
                }
            }
        }
        Err(ToolchainError::NoExecutable(self.package.clone()))
    }
}

/// Run a command, collecting stdout and stderr, killing it after `timeout`.
pub fn run_with_timeout(mut cmd: Command, timeout: Duration, what: &str) -> Result<(String, String, bool), ToolchainError> {
    let mut child = cmd.spawn().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ToolchainError::ToolchainMissing(e.to_string())
        } else {
            ToolchainError::Io(e)
        }
    })?;
    let mut stdout = child.stdout.take().unwrap();
    let mut stderr = child.stderr.take().unwrap();
    let out_t = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let err_t = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    let status = match child.wait_timeout(timeout)? {
        Some(s) => s,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ToolchainError::ToolchainTimeout(what.to_string(), timeout));
        }
    };
    let out = out_t.join().unwrap_or_default();
    let err = err_t.join().unwrap_or_default();
    Ok((out, err, status.success()))
}

/// Whether `cargo` can be run at all.
pub fn toolchain_available() -> bool {
    Command::new(std::env::var("CARGO").unwrap_or_else(|_| "cargo".into()))
        .arg("--version")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .is_ok_and(|s| s.success())
}

pub fn errors(diags: &[Diagnostic]) -> Vec<Diagnostic> {
    diags.iter().filter(|d| d.is_error()).cloned().collect()
}

pub fn in_main(d: &Diagnostic) -> bool {
    d.span.as_ref().is_some_and(|s| Path::new(&s.file).ends_with("src/main.rs"))
}
