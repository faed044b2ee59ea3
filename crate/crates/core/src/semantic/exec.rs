//! Building the C reference and running executables on test inputs.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use super::diff::{diff_outputs_within, OutputDiff, FLOAT_TOLERANCE};

pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(5);
/// Extra time granted to a killed process to exit.
const GRACE: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub input: Vec<u8>,
    /// Expected stdout when fixed by a `.out` file; otherwise the C
    /// reference output is used.
    pub expected: Option<Vec<u8>>,
    pub time_limit: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    /// `None` when killed by a signal or the time limit.
    pub exit_code: Option<i32>,
    pub timed_out: bool,
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("cannot start {path}: {source}")]
    SpawnFailure { path: PathBuf, source: std::io::Error },
    #[error("C compilation failed:\n{0}")]
    CBuildFailure(String),
    #[error("test directory {0}: {1}")]
    Cases(PathBuf, std::io::Error),
}

/// Run `exe` in a fresh working directory with `input` on stdin.
pub fn run_program(exe: &Path, input: &[u8], limit: Duration) -> Result<ExecutionResult, ExecError> {
    let dir = tempfile::tempdir().map_err(|e| ExecError::SpawnFailure {
        path: exe.to_path_buf(),
        source: e,
    })?;
    let mut child = Command::new(exe)
        .current_dir(dir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .env("RUST_BACKTRACE", "0")
        .spawn()
        .map_err(|e| ExecError::SpawnFailure {
            path: exe.to_path_buf(),
            source: e,
        })?;
    let mut stdin = child.stdin.take().unwrap();
    let input = input.to_vec();
    let feeder = std::thread::spawn(move || {
        let _ = stdin.write_all(&input);
    });
    let mut out = child.stdout.take().unwrap();
    let mut err = child.stderr.take().unwrap();
    let out_t = std::thread::spawn(move || {
        let mut v = Vec::new();
        let _ = out.read_to_end(&mut v);
        v
    });
    let err_t = std::thread::spawn(move || {
        let mut v = Vec::new();
        let _ = err.read_to_end(&mut v);
        v
    });
    let (status, timed_out) = match child.wait_timeout(limit).ok().flatten() {
        Some(s) => (Some(s), false),
        None => {
            let _ = child.kill();
            let s = child.wait_timeout(GRACE).ok().flatten();
            (s, true)
        }
    };
    let _ = feeder.join();
    let stdout = out_t.join().unwrap_or_default();
    let stderr = err_t.join().unwrap_or_default();
    Ok(ExecutionResult {
        stdout,
        stderr,
        exit_code: if timed_out { None } else { status.and_then(|s| s.code()) },
        timed_out,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CCompiler {
    pub program: String,
    pub flags: Vec<String>,
    pub include_paths: Vec<PathBuf>,
}

impl Default for CCompiler {
    fn default() -> Self {
        CCompiler {
            program: std::env::var("CC").unwrap_or_else(|_| "cc".into()),
            flags: vec!["-O0".into(), "-w".into()],
            include_paths: Vec::new(),
        }
    }
}

impl CCompiler {
    /// Compile and link `sources` into `out`.
    pub fn build(&self, sources: &[PathBuf], out: &Path) -> Result<PathBuf, ExecError> {
        if let Some(p) = out.parent() {
            fs::create_dir_all(p).map_err(|e| ExecError::CBuildFailure(e.to_string()))?;
        }
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.flags);
        for i in &self.include_paths {
            cmd.arg("-I").arg(i);
        }
        cmd.args(sources).arg("-o").arg(out).arg("-lm");
        let o = cmd.output().map_err(|e| ExecError::SpawnFailure {
            path: PathBuf::from(&self.program),
            source: e,
        })?;
        if !o.status.success() {
            return Err(ExecError::CBuildFailure(String::from_utf8_lossy(&o.stderr).into_owned()));
        }
        Ok(out.to_path_buf())
    }
}

/// Cases from `<dir>/<id>.in`, with `<id>.out` overriding the expected
/// output, sorted by id.
pub fn load_cases(dir: &Path, limit: Duration) -> Result<Vec<TestCase>, ExecError> {
    let err = |e| ExecError::Cases(dir.to_path_buf(), e);
    let mut cases = Vec::new();
    for entry in fs::read_dir(dir).map_err(err)? {
        let path = entry.map_err(err)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("in") {
            continue;
        }
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let input = fs::read(&path).map_err(err)?;
        let out = path.with_extension("out");
        let expected = if out.exists() { Some(fs::read(&out).map_err(err)?) } else { None };
        cases.push(TestCase {
            id,
            input,
            expected,
            time_limit: limit,
        });
    }
    cases.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(cases)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub case_id: String,
    pub diff: OutputDiff,
    pub exit_mismatch: bool,
    #[serde(skip)]
    pub expected: ExecutionResult,
    #[serde(skip)]
    pub actual: ExecutionResult,
}

impl Default for ExecutionResult {
    fn default() -> Self {
        ExecutionResult {
            stdout: Vec::new(),
            stderr: Vec::new(),
            exit_code: None,
            timed_out: false,
        }
    }
}

/// Run both executables on every case; one discrepancy per case whose
/// normalized stdout or exit status differs.
pub fn differential_test(c_exe: &Path, rust_exe: &Path, cases: &[TestCase]) -> Result<Vec<Discrepancy>, ExecError> {
    differential_test_within(c_exe, rust_exe, cases, FLOAT_TOLERANCE)
}

/// As [`differential_test`] with numbers compared at relative tolerance `tol`.
pub fn differential_test_within(
    c_exe: &Path,
    rust_exe: &Path,
    cases: &[TestCase],
    tol: f64,
) -> Result<Vec<Discrepancy>, ExecError> {
    let results: Vec<Result<Option<Discrepancy>, ExecError>> = cases
        .par_iter()
        .map(|tc| {
            let mut expected = run_program(c_exe, &tc.input, tc.time_limit)?;
            if let Some(o) = &tc.expected {
                expected.stdout = o.clone();
            }
            let actual = run_program(rust_exe, &tc.input, tc.time_limit)?;
            let diff = diff_outputs_within(&expected.stdout, &actual.stdout, tol);
            let exit_mismatch = actual.timed_out || expected.timed_out || expected.exit_code != actual.exit_code;
            Ok((!diff.is_empty() || exit_mismatch).then(|| Discrepancy {
                case_id: tc.id.clone(),
                diff,
                exit_mismatch,
                expected,
                actual,
            }))
        })
        .collect();
    let mut out = Vec::new();
    for r in results {
        if let Some(d) = r? {
            out.push(d);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c_exe(dir: &Path, name: &str, code: &str) -> PathBuf {
        let src = dir.join(format!("{name}.c"));
        fs::write(&src, code).unwrap();
        CCompiler::default().build(&[src], &dir.join(name)).unwrap()
    }

    #[test]
    fn runs_with_stdin_exit_codes_and_timeouts() {
        let d = tempfile::tempdir().unwrap();
        let echo = c_exe(
            d.path(),
            "echo",
            "#include <stdio.h>\nint main(void){int x; if(scanf(\"%d\",&x)!=1) return 3; printf(\"%d\\n\",x); return 0;}\n",
        );
        let r = run_program(&echo, b"5\n", DEFAULT_TIME_LIMIT).unwrap();
        assert_eq!(r.stdout, b"5\n");
        assert_eq!(r.exit_code, Some(0));
        let r = run_program(&echo, b"", DEFAULT_TIME_LIMIT).unwrap();
        assert_eq!(r.exit_code, Some(3));

        let spin = c_exe(d.path(), "spin", "int main(void){volatile int x=0; for(;;) x++; }\n");
        let t = std::time::Instant::now();
        let r = run_program(&spin, b"", Duration::from_millis(300)).unwrap();
        assert!(r.timed_out);
        assert!(t.elapsed() < Duration::from_millis(300) + GRACE + Duration::from_secs(1));

        assert!(matches!(
            run_program(&d.path().join("missing"), b"", DEFAULT_TIME_LIMIT),
            Err(ExecError::SpawnFailure { .. })
        ));
    }

    #[test]
    fn cases_load_sorted_with_overrides() {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join("b.in"), "2\n").unwrap();
        fs::write(d.path().join("a.in"), "1\n").unwrap();
        fs::write(d.path().join("a.out"), "one\n").unwrap();
        fs::write(d.path().join("notes.txt"), "x").unwrap();
        let cases = load_cases(d.path(), DEFAULT_TIME_LIMIT).unwrap();
        assert_eq!(cases.iter().map(|c| c.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(cases[0].expected.as_deref(), Some(&b"one\n"[..]));
        assert_eq!(cases[1].expected, None);
    }
}
