//! Model-driven fixes at function, item and line-region granularity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::diagnostic::Diagnostic;
use super::Stage;
use crate::c::source::normalize_ws;
use crate::llm::{cache_key, extract_code, Expect, Gateway, GenerationParams, LlmError};
use crate::prompt::{
    render_function_fix_prompt, render_item_fix_prompt, render_region_fix_prompt, Budget, DepSymbol, FunctionFixInput,
    ItemFixInput, PromptText, RegionFixInput,
};
use crate::rust::{all_items, extract_items, parse_rust, referenced_idents, tokens_of, ItemKind, ParseFailure, RustAst, RustItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Function,
    Item,
}

pub struct LlmFixContext<'a> {
    pub gateway: &'a Gateway,
    pub program: &'a str,
    pub params: &'a GenerationParams,
    pub budget: Budget,
    pub constraints: String,
}

impl LlmFixContext<'_> {
    fn ask(&self, prompt: &PromptText, expect: Expect) -> Result<Vec<String>, LlmError> {
        let reply = self.gateway.complete(self.program, prompt, self.params)?;
        Ok(extract_code(&reply, expect)?.into_iter().map(|b| b.code).collect())
    }

    fn prompt_id(&self, prompt: &PromptText) -> String {
        format!("{}:{}", prompt.kind.as_str(), &cache_key(prompt, self.params)[..16])
    }
}

/// An accepted model edit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmEdit {
    pub stage: Stage,
    pub prompt_id: String,
    pub span: (usize, usize),
    pub before: String,
    pub after: String,
    #[serde(skip)]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum FixRejection {
    #[error("{prompt_id}: model call failed: {message}")]
    Generation { prompt_id: String, message: String },
    #[error("{prompt_id}: reply does not reproduce the current item")]
    OriginalMismatch { prompt_id: String },
    #[error("{prompt_id}: reply is not valid Rust: {message}")]
    Unparsable { prompt_id: String, message: String },
    #[error("{prompt_id}: reply does not define `{name}`")]
    MissingFunction { prompt_id: String, name: String },
    #[error("{prompt_id}: reply leaves the code unchanged")]
    Unchanged { prompt_id: String },
}

#[derive(Debug, Clone, Default)]
pub struct ScopeOutcome {
    pub source: String,
    pub edits: Vec<LlmEdit>,
    pub rejected: Vec<FixRejection>,
}

/// Definitions a piece of code refers to: full text for data items,
/// signatures for functions.
pub fn rust_deps_of(ast: &RustAst, code: &RustItem) -> Vec<DepSymbol> {
    let mut idents = Vec::new();
    if let Ok(ts) = code.source_text.parse() {
        referenced_idents(ts, &mut idents);
    }
    let mut out = Vec::new();
    for item in extract_items(ast) {
        if item.span == code.span || !idents.contains(&item.name) {
            continue;
        }
        let key = format!("{} {}", item.kind.as_str(), item.name);
        match item.kind {
            ItemKind::Use | ItemKind::Impl | ItemKind::Module | ItemKind::Other => {}
            ItemKind::Function => out.push(DepSymbol::new(key, fn_header(&item.source_text))),
            _ => out.push(DepSymbol::new(key, item.source_text.clone())),
        }
    }
    out
}

/// Signature of a function item, whitespace-normalized, ending in `;`.
pub fn fn_header(text: &str) -> String {
    let head = match syn::parse_str::<syn::ItemFn>(text) {
        Ok(f) => {
            let tokens = tokens_of(&f);
            let base = tokens.into_iter().next().map(|t| t.span().byte_range().start).unwrap_or(0);
            let brace = f.block.brace_token.span.open().byte_range().start;
            let start = match f.vis {
                syn::Visibility::Inherited => tokens_of(&f.sig).into_iter().next().map(|t| t.span().byte_range().start),
                _ => tokens_of(&f.vis).into_iter().next().map(|t| t.span().byte_range().start),
            }
            .unwrap_or(base);
            text.get(start..brace).unwrap_or(text).to_string()
        }
        Err(_) => text.split('{').next().unwrap_or(text).to_string(),
    };
    format!("{};", normalize_ws(&head))
}

fn innermost<'a>(items: &'a [RustItem], at: usize, kind: Option<ItemKind>) -> Option<&'a RustItem> {
    items
        .iter()
        .filter(|i| i.contains(at) && kind.is_none_or(|k| i.kind == k))
        .min_by_key(|i| i.span.1 - i.span.0)
}

fn error_start(d: &Diagnostic) -> Option<usize> {
    (d.is_error() && super::workspace::in_main(d)).then(|| d.byte_range().map(|r| r.0)).flatten()
}

/// One prompt per enclosing function (all its errors together) or per
/// diagnostic (item scope). Edits are applied from the end of the file
/// backwards so earlier spans stay valid.
pub fn llm_scope_fix(source: &str, diags: &[Diagnostic], scope: Scope, ctx: &LlmFixContext<'_>) -> ScopeOutcome {
    let mut out = ScopeOutcome {
        source: source.to_string(),
        ..Default::default()
    };
    let Ok(ast) = parse_rust(source) else {
        return out;
    };
    let items = all_items(&ast);
    // (target item, diagnostics)
    let mut groups: Vec<(RustItem, Vec<Diagnostic>)> = Vec::new();
    for d in diags {
        let Some(at) = error_start(d) else { continue };
        let kind = (scope == Scope::Function).then_some(ItemKind::Function);
        let Some(item) = innermost(&items, at, kind) else { continue };
        match scope {
            Scope::Function => match groups.iter_mut().find(|(i, _)| i.span == item.span) {
                Some((_, ds)) => ds.push(d.clone()),
                None => groups.push((item.clone(), vec![d.clone()])),
            },
            Scope::Item => groups.push((item.clone(), vec![d.clone()])),
        }
    }
    groups.sort_by(|a, b| b.0.span.0.cmp(&a.0.span.0).then(b.1[0].byte_range().cmp(&a.1[0].byte_range())));
    let mut touched: Vec<(usize, usize)> = Vec::new();
    for (item, ds) in groups {
        if touched.iter().any(|t| t.0 < item.span.1 && item.span.0 < t.1) {
            continue;
        }
        let cur_ast = match parse_rust(&out.source) {
            Ok(a) => a,
            Err(_) => break,
        };
        let deps = rust_deps_of(&cur_ast, &item);
        let prompt = match scope {
            Scope::Function => render_function_fix_prompt(
                &FunctionFixInput {
                    rust_fn: &item.source_text,
                    fn_span: item.span,
                    errors: &ds,
                    interface: fn_header(&item.source_text),
                    rust_deps: deps,
                    constraints: ctx.constraints.clone(),
                },
                ctx.budget,
            ),
            Scope::Item => render_item_fix_prompt(
                &ItemFixInput {
                    item: &item,
                    error: &ds[0],
                    rust_deps: deps,
                    constraints: ctx.constraints.clone(),
                },
                ctx.budget,
            ),
        };
        let Ok(prompt) = prompt else { continue };
        let prompt_id = ctx.prompt_id(&prompt);
        let expect = if scope == Scope::Function { Expect::Single } else { Expect::Pair };
        let blocks = match ctx.ask(&prompt, expect) {
            Ok(b) => b,
            Err(e) => {
                out.rejected.push(FixRejection::Generation {
                    prompt_id,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let replacement = match scope {
            Scope::Function => match function_from_reply(&blocks[0], &item.name) {
                Ok(t) => t,
                Err(r) => {
                    out.rejected.push(r.with_id(&prompt_id));
                    continue;
                }
            },
            Scope::Item => {
                if normalize_ws(&blocks[0]) != normalize_ws(&item.source_text) {
                    out.rejected.push(FixRejection::OriginalMismatch { prompt_id });
                    continue;
                }
                blocks[1].trim().to_string()
            }
        };
        if normalize_ws(&replacement) == normalize_ws(&item.source_text) {
            out.rejected.push(FixRejection::Unchanged { prompt_id });
            continue;
        }
        let mut next = out.source.clone();
        next.replace_range(item.span.0..item.span.1, &replacement);
        if let Err(f) = parse_rust(&next) {
            out.rejected.push(FixRejection::Unparsable {
                prompt_id,
                message: f.to_string(),
            });
            continue;
        }
        out.source = next;
        touched.push(item.span);
        out.edits.push(LlmEdit {
            stage: if scope == Scope::Function { Stage::Function } else { Stage::Item },
            prompt_id,
            span: item.span,
            before: item.source_text.clone(),
            after: replacement,
            source: out.source.clone(),
        });
    }
    out
}

enum ReplyProblem {
    Unparsable(String),
    Missing(String),
}

impl ReplyProblem {
    fn with_id(self, id: &str) -> FixRejection {
        match self {
            ReplyProblem::Unparsable(message) => FixRejection::Unparsable {
                prompt_id: id.to_string(),
                message,
            },
            ReplyProblem::Missing(name) => FixRejection::MissingFunction {
                prompt_id: id.to_string(),
                name,
            },
        }
    }
}

/// Text of the function named `name` in a reply, attributes included.
fn function_from_reply(code: &str, name: &str) -> Result<String, ReplyProblem> {
    let ast = parse_rust(code).map_err(|f| ReplyProblem::Unparsable(f.to_string()))?;
    extract_items(&ast)
        .into_iter()
        .find(|i| i.kind == ItemKind::Function && i.name == name)
        .map(|i| i.source_text)
        .ok_or_else(|| ReplyProblem::Missing(name.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("still unparsable after {attempts} region rewrites: {failure}")]
pub struct StillUnparsable {
    pub failure: ParseFailure,
    pub attempts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionOptions {
    /// Initial window in lines, centred on the failure.
    pub window: usize,
    /// Further attempts, each doubling the window.
    pub retries: usize,
}

impl Default for RegionOptions {
    fn default() -> Self {
        RegionOptions { window: 20, retries: 3 }
    }
}

#[derive(Debug, Clone)]
pub struct RegionOutcome {
    pub source: String,
    pub edit: Option<LlmEdit>,
    pub rejected: Vec<FixRejection>,
    pub result: Result<(), StillUnparsable>,
}

/// Byte range of 1-based inclusive lines `a..=b`, without the final newline.
fn line_range(source: &str, a: usize, b: usize) -> (usize, usize) {
    let starts: Vec<usize> = std::iter::once(0)
        .chain(source.match_indices('\n').map(|(i, _)| i + 1))
        .collect();
    let start = starts.get(a - 1).copied().unwrap_or(source.len());
    let end = starts.get(b).map_or(source.len(), |s| s - 1);
    (start, end.max(start))
}

/// Have the model rewrite the lines around the first parse failure,
/// doubling the window after each failed attempt.
pub fn fix_unparsable(source: &str, opts: RegionOptions, ctx: &LlmFixContext<'_>) -> RegionOutcome {
    let mut out = RegionOutcome {
        source: source.to_string(),
        edit: None,
        rejected: Vec::new(),
        result: Ok(()),
    };
    let Err(failure) = parse_rust(source) else {
        return out;
    };
    let n_lines = source.lines().count().max(1);
    let mut window = opts.window.max(1);
    let mut last = None;
    for _ in 0..=opts.retries {
        let half = window / 2;
        let a = failure.line.saturating_sub(half).max(1);
        let b = (failure.line + half).min(n_lines).max(a);
        if last == Some((a, b)) {
            // The window already covers the whole file.
            break;
        }
        last = Some((a, b));
        let (start, end) = line_range(source, a, b);
        let region = &source[start..end];
        let prompt = render_region_fix_prompt(&RegionFixInput {
            region,
            lines: (a, b),
            message: &failure.message,
            at: (failure.line, failure.column),
            constraints: ctx.constraints.clone(),
        });
        let prompt_id = ctx.prompt_id(&prompt);
        window *= 2;
        let code = match ctx.ask(&prompt, Expect::Single) {
            Ok(mut b) => b.remove(0),
            Err(e) => {
                out.rejected.push(FixRejection::Generation {
                    prompt_id,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let mut next = source.to_string();
        next.replace_range(start..end, code.trim_end_matches('\n'));
        match parse_rust(&next) {
            Ok(_) => {
                out.edit = Some(LlmEdit {
                    stage: Stage::Unparsable,
                    prompt_id,
                    span: (start, end),
                    before: region.to_string(),
                    after: code.trim_end_matches('\n').to_string(),
                    source: next.clone(),
                });
                out.source = next;
                return out;
            }
            Err(f) => {
                out.rejected.push(FixRejection::Unparsable {
                    prompt_id,
                    message: f.to_string(),
                });
            }
        }
    }
    out.result = Err(StillUnparsable {
        failure,
        attempts: opts.retries + 1,
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockTable, Selector};
    use crate::prompt::PromptKind;
    use crate::syntax::diagnostic::{DiagSpan, Severity};

    fn err_at(src: &str, needle: &str, code: &str) -> Diagnostic {
        let start = src.find(needle).unwrap();
        Diagnostic {
            code: code.into(),
            severity: Severity::Error,
            message: "mismatched types".into(),
            span: Some(DiagSpan {
                file: "src/main.rs".into(),
                byte_start: start,
                byte_end: start + needle.len(),
                line: 1,
                column: 1,
                label: None,
            }),
            suggestion: None,
            notes: vec![],
        }
    }

    fn ctx<'a>(gw: &'a Gateway, params: &'a GenerationParams) -> LlmFixContext<'a> {
        LlmFixContext {
            gateway: gw,
            program: "p",
            params,
            budget: Budget::unlimited(),
            constraints: String::new(),
        }
    }

    const SRC: &str = "struct P { x: i32 }\nfn a(p: &P) -> i32 { p.x.len() }\nfn b() -> String { 5 }\nfn main() {}\n";

    #[test]
    fn function_scope_batches_per_function() {
        let mut t = MockTable::default();
        t.push(
            Selector::KindContains(PromptKind::FunctionFix, vec!["fn a(".into()]),
            "```rust\nfn a(p: &P) -> i32 { p.x }\n```",
        );
        t.push(
            Selector::KindContains(PromptKind::FunctionFix, vec!["fn b(".into()]),
            "```rust\nfn b() -> String { 5.to_string() }\n```",
        );
        let gw = Gateway::mock(t);
        let params = GenerationParams::default();
        let ds = vec![err_at(SRC, "len", "E0599"), err_at(SRC, "p.x.len()", "E0308"), err_at(SRC, "5", "E0308")];
        let out = llm_scope_fix(SRC, &ds, Scope::Function, &ctx(&gw, &params));
        assert_eq!(gw.calls("p"), 2);
        assert_eq!(
            out.source,
            "struct P { x: i32 }\nfn a(p: &P) -> i32 { p.x }\nfn b() -> String { 5.to_string() }\nfn main() {}\n"
        );
        assert_eq!(out.edits.len(), 2);
        assert!(out.edits.iter().all(|e| e.stage == Stage::Function));
    }

    #[test]
    fn function_prompt_carries_dependencies() {
        let ast = parse_rust(SRC).unwrap();
        let f = crate::rust::find_function(&ast, "a").unwrap();
        let deps = rust_deps_of(&ast, &f);
        assert_eq!(deps.len(), 1);
        assert_eq!(deps[0].key, "struct P");
        assert_eq!(fn_header("pub fn a(p: &P)\n    -> i32 { 1 }"), "pub fn a(p: &P) -> i32;");
    }

    #[test]
    fn item_scope_checks_original() {
        let mut t = MockTable::default();
        t.push(
            Selector::Kind(PromptKind::ItemFix),
            "```rust\nfn b() -> String {   5 }\n```\n```rust\nfn b() -> String { 5.to_string() }\n```",
        );
        let gw = Gateway::mock(t);
        let params = GenerationParams::default();
        let out = llm_scope_fix(SRC, &[err_at(SRC, "5", "E0308")], Scope::Item, &ctx(&gw, &params));
        assert!(out.source.contains("5.to_string()"));

        let mut t = MockTable::default();
        t.push(
            Selector::Kind(PromptKind::ItemFix),
            "```rust\nfn c() {}\n```\n```rust\nfn b() -> String { 5.to_string() }\n```",
        );
        let gw = Gateway::mock(t);
        let out = llm_scope_fix(SRC, &[err_at(SRC, "5", "E0308")], Scope::Item, &ctx(&gw, &params));
        assert_eq!(out.source, SRC);
        assert!(matches!(out.rejected[0], FixRejection::OriginalMismatch { .. }));
    }

    #[test]
    fn echo_replies_change_nothing() {
        let gw = Gateway::mock(MockTable::echo());
        let params = GenerationParams::default();
        let out = llm_scope_fix(SRC, &[err_at(SRC, "5", "E0308")], Scope::Function, &ctx(&gw, &params));
        assert_eq!(out.source, SRC);
        assert!(matches!(out.rejected[0], FixRejection::Unchanged { .. }));
    }

    #[test]
    fn region_window_doubles_until_budget() {
        let src: String = (0..200).map(|i| format!("fn f{i}() {{}}\n")).collect::<String>().replace("fn f30() {}", "fn f30() {");
        let gw = Gateway::mock(MockTable::echo());
        let params = GenerationParams::default();
        let out = fix_unparsable(&src, RegionOptions::default(), &ctx(&gw, &params));
        assert_eq!(gw.calls("p"), 4);
        let short = "fn a() {\n";
        let gw2 = Gateway::mock(MockTable::echo());
        let out2 = fix_unparsable(short, RegionOptions::default(), &ctx(&gw2, &params));
        assert_eq!(gw2.calls("p"), 1);
        assert!(out2.result.is_err());
        assert!(out.result.is_err());
        assert_eq!(out.source, src);
        // Each attempt covers a different window, so every prompt differs.
        let ids: std::collections::BTreeSet<String> = out
            .rejected
            .iter()
            .map(|r| match r {
                FixRejection::Unparsable { prompt_id, .. } => prompt_id.clone(),
                other => panic!("{other}"),
            })
            .collect();
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn region_fix_replaces_lines() {
        let src = "fn a() {}\nfn b() {\n    let x = 1\n    x;\n}\nfn main() {}\n";
        let mut t = MockTable::default();
        t.push(
            Selector::Kind(PromptKind::RegionFix),
            "```rust\nfn a() {}\nfn b() {\n    let x = 1;\n    x;\n}\nfn main() {}\n```",
        );
        let gw = Gateway::mock(t);
        let params = GenerationParams::default();
        let out = fix_unparsable(src, RegionOptions::default(), &ctx(&gw, &params));
        assert!(out.result.is_ok());
        assert_eq!(out.source, "fn a() {}\nfn b() {\n    let x = 1;\n    x;\n}\nfn main() {}\n");
        assert_eq!(out.edit.unwrap().stage, Stage::Unparsable);
    }
}
