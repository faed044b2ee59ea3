//! Compiler diagnostics in the shape cargo reports them with
//! `--message-format=json`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagSpan {
    /// Path relative to the workspace root, e.g. `src/main.rs`.
    pub file: String,
    pub byte_start: usize,
    pub byte_end: usize,
    pub line: usize,
    pub column: usize,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Error code such as `E0425`; lint name for lints; empty when the
    /// compiler gives none.
    pub code: String,
    pub severity: Severity,
    pub message: String,
    pub span: Option<DiagSpan>,
    pub suggestion: Option<String>,
    /// Messages of attached notes and help entries.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn byte_range(&self) -> Option<(usize, usize)> {
        self.span.as_ref().map(|s| (s.byte_start, s.byte_end))
    }

    /// One-line rendering used in prompts and logs, e.g.
    /// `error[E0425]: cannot find value `x` in this scope at src/main.rs:3:5`.
    pub fn headline(&self) -> String {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        let code = if self.code.is_empty() {
            String::new()
        } else {
            format!("[{}]", self.code)
        };
        let mut out = format!("{sev}{code}: {}", self.message);
        if let Some(s) = &self.span {
            out.push_str(&format!(" at {}:{}:{}", s.file, s.line, s.column));
            if let Some(l) = s.label.as_deref().filter(|l| !l.is_empty()) {
                out.push_str(&format!(" ({l})"));
            }
        }
        out
    }

    pub fn location(&self) -> String {
        match &self.span {
            Some(s) => format!("{}:{}:{} (bytes {}..{})", s.file, s.line, s.column, s.byte_start, s.byte_end),
            None => "(unknown)".into(),
        }
    }
}

/// Parse a single compiler message object (the `message` field of a cargo
/// `compiler-message` record). Returns `None` for summary lines such as
/// "aborting due to 2 previous errors".
pub fn parse_compiler_message(msg: &Value) -> Option<Diagnostic> {
    let severity = match msg.get("level")?.as_str()? {
        "error" | "error: internal compiler error" => Severity::Error,
        "warning" => Severity::Warning,
        _ => return None,
    };
    let message = msg.get("message")?.as_str()?.to_string();
    let spans = msg.get("spans").and_then(Value::as_array).cloned().unwrap_or_default();
    let code = msg
        .get("code")
        .and_then(|c| c.get("code"))
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    if spans.is_empty() && code.is_empty() {
        return None;
    }
    let primary = spans
        .iter()
        .find(|s| s.get("is_primary").and_then(Value::as_bool) == Some(true))
        .or(spans.first());
    let span = primary.and_then(|s| {
        Some(DiagSpan {
            file: s.get("file_name")?.as_str()?.to_string(),
            byte_start: s.get("byte_start")?.as_u64()? as usize,
            byte_end: s.get("byte_end")?.as_u64()? as usize,
            line: s.get("line_start")?.as_u64()? as usize,
            column: s.get("column_start")?.as_u64()? as usize,
            label: s.get("label").and_then(Value::as_str).map(str::to_string),
        })
    });
    let mut suggestion = spans
        .iter()
        .find_map(|s| s.get("suggested_replacement").and_then(Value::as_str))
        .map(str::to_string);
    let mut notes = Vec::new();
    for child in msg.get("children").and_then(Value::as_array).into_iter().flatten() {
        if let Some(m) = child.get("message").and_then(Value::as_str) {
            notes.push(m.to_string());
        }
        if suggestion.is_none() {
            suggestion = child
                .get("spans")
                .and_then(Value::as_array)
                .into_iter()
                .flatten()
                .find_map(|s| s.get("suggested_replacement").and_then(Value::as_str))
                .map(str::to_string);
        }
    }
    Some(Diagnostic {
        code,
        severity,
        message,
        span,
        suggestion,
        notes,
    })
}

/// Diagnostics from cargo's JSON-lines output, in emission order, with
/// exact duplicates removed.
pub fn parse_cargo_output(stdout: &str) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = Vec::new();
    for line in stdout.lines() {
        let Ok(v) = serde_json::from_str::<Value>(line) else {
            continue;
        };
        if v.get("reason").and_then(Value::as_str) != Some("compiler-message") {
            continue;
        }
        if let Some(d) = v.get("message").and_then(parse_compiler_message) {
            if !out.contains(&d) {
                out.push(d);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"reason":"compiler-artifact","target":{}}
{"reason":"compiler-message","message":{"message":"cannot find value `g_max` in this scope","code":{"code":"E0425","explanation":"..."},"level":"error","spans":[{"file_name":"src/main.rs","byte_start":40,"byte_end":45,"line_start":3,"line_end":3,"column_start":13,"column_end":18,"is_primary":true,"text":[],"label":"not found in this scope","suggested_replacement":null}],"children":[{"message":"a constant with a similar name exists","code":null,"level":"help","spans":[{"file_name":"src/main.rs","byte_start":40,"byte_end":45,"line_start":3,"line_end":3,"column_start":13,"column_end":18,"is_primary":true,"text":[],"label":null,"suggested_replacement":"G_MAX"}],"children":[],"rendered":null}],"rendered":"error..."}}
{"reason":"compiler-message","message":{"message":"aborting due to 1 previous error","code":null,"level":"error","spans":[],"children":[],"rendered":"error: aborting"}}
{"reason":"build-finished","success":false}
"#;

    #[test]
    fn parses_errors_and_skips_summaries() {
        let d = parse_cargo_output(SAMPLE);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, "E0425");
        assert!(d[0].is_error());
        assert_eq!(d[0].byte_range(), Some((40, 45)));
        assert_eq!(d[0].suggestion.as_deref(), Some("G_MAX"));
        assert_eq!(
            d[0].headline(),
            "error[E0425]: cannot find value `g_max` in this scope at src/main.rs:3:13 (not found in this scope)"
        );
    }
}
