//! Normalized line comparison of program outputs.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const FLOAT_TOLERANCE: f64 = 1e-6;

/// Beyond this many differing lines per side the middle is reported as a
/// single hunk instead of aligned.
const MAX_ALIGN: usize = 2000;

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?(?:\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)").unwrap());

/// Lines with trailing whitespace removed; a missing final newline is
/// treated as present.
pub fn normalize(bytes: &[u8]) -> Vec<String> {
    let text = String::from_utf8_lossy(bytes);
    let mut lines: Vec<String> = text.split('\n').map(|l| l.trim_end().to_string()).collect();
    if text.ends_with('\n') || text.is_empty() {
        lines.pop();
    }
    lines
}

fn numbers_close(a: &str, b: &str, tol: f64) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x == y || (x - y).abs() <= tol * x.abs().max(y.abs()),
        _ => a == b,
    }
}

/// Alternating text and number segments.
fn segments(line: &str) -> Vec<(bool, &str)> {
    let mut out = Vec::new();
    let mut last = 0;
    for m in NUMBER.find_iter(line) {
        if m.start() > last {
            out.push((false, &line[last..m.start()]));
        }
        out.push((true, m.as_str()));
        last = m.end();
    }
    if last < line.len() {
        out.push((false, &line[last..]));
    }
    out
}

/// Line equality: byte-equal, or equal text with numbers within the
/// relative tolerance.
pub fn lines_equal(a: &str, b: &str) -> bool {
    lines_equal_within(a, b, FLOAT_TOLERANCE)
}

pub fn lines_equal_within(a: &str, b: &str, tol: f64) -> bool {
    if a == b {
        return true;
    }
    let (sa, sb) = (segments(a), segments(b));
    sa.len() == sb.len()
        && sa.iter().zip(&sb).all(|((na, ta), (nb, tb))| {
            na == nb && if *na { numbers_close(ta, tb, tol) } else { ta == tb }
        })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    /// 0-based index of the first line of the hunk on each side.
    pub expected_start: usize,
    pub actual_start: usize,
    pub expected: Vec<String>,
    pub actual: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDiff {
    pub expected: Vec<String>,
    pub actual: Vec<String>,
    /// 1-based number of the first line that differs.
    pub first_divergent_line: Option<usize>,
    pub hunks: Vec<Hunk>,
}

impl OutputDiff {
    pub fn is_empty(&self) -> bool {
        self.hunks.is_empty()
    }

    /// Unified-style rendering: `-` for expected (C), `+` for actual (Rust).
    pub fn render(&self) -> String {
        let mut out = Vec::new();
        for h in &self.hunks {
            out.push(format!(
                "@@ -{},{} +{},{} @@",
                h.expected_start + 1,
                h.expected.len(),
                h.actual_start + 1,
                h.actual.len()
            ));
            out.extend(h.expected.iter().map(|l| format!("-{l}")));
            out.extend(h.actual.iter().map(|l| format!("+{l}")));
        }
        out.join("\n")
    }

    /// Lines appearing in any hunk, from either side.
    pub fn divergent_lines(&self) -> impl Iterator<Item = &str> {
        self.hunks.iter().flat_map(|h| h.expected.iter().chain(&h.actual)).map(String::as_str)
    }
}

pub fn diff_outputs(expected: &[u8], actual: &[u8]) -> OutputDiff {
    diff_outputs_within(expected, actual, FLOAT_TOLERANCE)
}

pub fn diff_outputs_within(expected: &[u8], actual: &[u8], tol: f64) -> OutputDiff {
    diff_lines(normalize(expected), normalize(actual), tol)
}

/// Diff with numbers compared at relative tolerance `tol`.
pub fn diff_lines(expected: Vec<String>, actual: Vec<String>, tol: f64) -> OutputDiff {
    let eq = |a: &str, b: &str| lines_equal_within(a, b, tol);
    let (n, m) = (expected.len(), actual.len());
    let mut pre = 0;
    while pre < n && pre < m && eq(&expected[pre], &actual[pre]) {
        pre += 1;
    }
    let mut suf = 0;
    while suf < n - pre && suf < m - pre && eq(&expected[n - 1 - suf], &actual[m - 1 - suf]) {
        suf += 1;
    }
    let (e, a) = (&expected[pre..n - suf], &actual[pre..m - suf]);
    let mut hunks = Vec::new();
    if !e.is_empty() || !a.is_empty() {
        if e.len() > MAX_ALIGN || a.len() > MAX_ALIGN {
            hunks.push(Hunk {
                expected_start: pre,
                actual_start: pre,
                expected: e.to_vec(),
                actual: a.to_vec(),
            });
        } else {
            hunks = align(e, a, pre, &eq);
        }
    }
    let first_divergent_line = hunks.first().map(|h| h.expected_start.min(h.actual_start) + 1);
    OutputDiff {
        expected,
        actual,
        first_divergent_line,
        hunks,
    }
}

/// Longest-common-subsequence alignment; runs of unmatched lines become hunks.
fn align(e: &[String], a: &[String], offset: usize, eq: &dyn Fn(&str, &str) -> bool) -> Vec<Hunk> {
    let (n, m) = (e.len(), a.len());
    let mut lcs = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if eq(&e[i], &a[j]) {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let mut hunks = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut cur: Option<Hunk> = None;
    while i < n || j < m {
        if i < n && j < m && eq(&e[i], &a[j]) && lcs[i][j] == lcs[i + 1][j + 1] + 1 {
            hunks.extend(cur.take());
            i += 1;
            j += 1;
            continue;
        }
        let h = cur.get_or_insert_with(|| Hunk {
            expected_start: offset + i,
            actual_start: offset + j,
            expected: Vec::new(),
            actual: Vec::new(),
        });
        if j == m || (i < n && lcs[i + 1][j] >= lcs[i][j + 1]) {
            h.expected.push(e[i].clone());
            i += 1;
        } else {
            h.actual.push(a[j].clone());
            j += 1;
        }
    }
    hunks.extend(cur);
    hunks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize(b"a  \nb\t\n"), vec!["a", "b"]);
        assert_eq!(normalize(b"a\nb"), normalize(b"a\nb\n"));
        assert_ne!(normalize(b"a\n\n"), normalize(b"a\n"));
        assert!(normalize(b"").is_empty());
    }

    #[test]
    fn float_tolerance() {
        assert!(lines_equal("pi = 3.1415926", "pi = 3.14159260001"));
        assert!(lines_equal("1.000000 2", "1 2.0"));
        assert!(!lines_equal("x 3.14", "x 3.15"));
        assert!(!lines_equal("a 1", "b 1"));
        assert!(!lines_equal("1e6", "1000010"));
    }

    #[test]
    fn off_by_one_line() {
        let d = diff_outputs(b"1\n2\n3\n4\n5\n", b"1\n2\n3\n4\n6\n");
        assert_eq!(d.first_divergent_line, Some(5));
        assert_eq!(d.hunks.len(), 1);
        assert_eq!(d.hunks[0].expected, vec!["5"]);
        assert_eq!(d.hunks[0].actual, vec!["6"]);
        assert_eq!(d.render(), "@@ -5,1 +5,1 @@\n-5\n+6");
    }

    #[test]
    fn insertions_and_deletions() {
        let d = diff_outputs(b"a\nb\nc\nd\n", b"a\nc\nd\ne\n");
        assert_eq!(d.hunks.len(), 2);
        assert_eq!((d.hunks[0].expected.clone(), d.hunks[0].actual.clone()), (vec!["b".to_string()], vec![]));
        assert_eq!(d.hunks[1].actual, vec!["e"]);
        assert_eq!(d.first_divergent_line, Some(2));
        assert!(diff_outputs(b"x\n", b"x").is_empty());
    }
}
