//! Dependency-ordered translation of a program structure into Rust.

pub mod assemble;
pub mod consistency;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::c::project::ProgramStructure;
use crate::c::structure::{FunctionUnit, SymbolKind};
use crate::llm::{extract_code, write_atomic, Expect, Gateway, GenerationParams, LlmError};
use crate::prompt::{
    c_dep, render_globals_prompt, render_translation_prompt, Budget, DepSymbol, GlobalsInput, PromptText,
    TranslationInput,
};
use crate::rust::{extract_items, loose_name, parse_rust, ItemKind};

pub use assemble::{assemble, assemble_project, Assembled};
pub use consistency::{check_consistency, CompareMode, ConsistencyReport, KnownNames};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslateOptions {
    pub params: GenerationParams,
    pub budget: Budget,
    /// Re-translations allowed per function after the first attempt.
    pub retranslations: u32,
    pub mode: CompareMode,
    /// Extra constraint lines appended to every translation prompt.
    pub constraints: Vec<String>,
}

impl Default for TranslateOptions {
    fn default() -> Self {
        TranslateOptions {
            params: GenerationParams::default(),
            budget: Budget::unlimited(),
            retranslations: 2,
            mode: CompareMode::Exact,
            constraints: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("generation failed for `{symbol}`: {source}")]
    GenerationFailed {
        symbol: String,
        #[source]
        source: LlmError,
    },
    #[error("re-translation budget exhausted for `{0}`")]
    BudgetExhausted(String),
    #[error("re-translation requested for `{0}`, whose translation already matches")]
    AlreadyMatched(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
}

/// Kind groups of global symbols, translated in this order.
pub const GROUPS: &[(&str, &[SymbolKind])] = &[
    ("types", &[SymbolKind::Typedef, SymbolKind::Struct, SymbolKind::Enum]),
    ("globals", &[SymbolKind::GlobalVar]),
    ("macros", &[SymbolKind::Macro]),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RustSymbol {
    pub key: String,
    pub group: String,
    pub file: String,
    pub text: String,
}

/// Items from replies that belong to no single symbol: `use` items, impl
/// blocks and helper definitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportItem {
    pub file: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslatedFunction {
    pub key: String,
    pub name: String,
    pub file: String,
    pub text: String,
    pub attempts: u32,
    pub report: ConsistencyReport,
    /// Kept as best effort after the re-translation budget ran out.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum EventKind {
    UnitStarted { file: String },
    GlobalsPrompted { group: String, keys: Vec<String> },
    SymbolTranslated { key: String },
    GenerationFailed { symbol: String, error: String },
    FunctionPrompted { key: String, attempt: u32, present: Vec<String>, missing: Vec<String> },
    FunctionTranslated { key: String, attempt: u32, matched: bool, violations: Vec<String> },
    BudgetExhausted { key: String },
    Assembled { items: usize, conflicts: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TranslationSession {
    pub program: String,
    /// Rust forms of Σ entries in insertion order.
    pub rust_symbols: Vec<RustSymbol>,
    pub support: Vec<SupportItem>,
    /// Functions in translation order.
    pub functions: Vec<TranslatedFunction>,
    /// Remaining re-translations per function.
    pub budgets: BTreeMap<String, u32>,
    /// Symbols and functions without a usable translation.
    pub untranslated: Vec<String>,
    pub events: Vec<Event>,
}

impl TranslationSession {
    pub fn new(program: impl Into<String>) -> Self {
        TranslationSession {
            program: program.into(),
            ..Default::default()
        }
    }

    pub fn log(&mut self, kind: EventKind) {
        let seq = self.events.len() + 1;
        self.events.push(Event { seq, kind });
    }

    pub fn symbol(&self, key: &str) -> Option<&str> {
        self.rust_symbols.iter().find(|s| s.key == key).map(|s| s.text.as_str())
    }

    pub fn function(&self, key: &str) -> Option<&TranslatedFunction> {
        self.functions.iter().find(|f| f.key == key)
    }

    fn set_function(&mut self, tf: TranslatedFunction) {
        match self.functions.iter_mut().find(|f| f.key == tf.key) {
            Some(slot) => *slot = tf,
            None => self.functions.push(tf),
        }
    }

    pub fn events_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).unwrap() + "\n")
            .collect()
    }

    /// Write `events.jsonl`, `session.json` and `assembled.rs` into `dir`.
    pub fn save(&self, dir: &Path, assembled: &str) -> std::io::Result<()> {
        write_atomic(&dir.join("events.jsonl"), &self.events_jsonl())?;
        write_atomic(&dir.join("session.json"), &serde_json::to_string_pretty(self).unwrap())?;
        write_atomic(&dir.join("assembled.rs"), assembled)
    }

    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(dir.join("session.json"))?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

/// Everything translation needs besides the session.
pub struct Translator<'a> {
    pub structure: &'a ProgramStructure,
    pub gateway: &'a Gateway,
    pub options: &'a TranslateOptions,
}

/// `fn` header text of the first function named `name` in `text`, ending
/// with `;`.
pub fn rust_signature(text: &str, name: &str) -> Option<String> {
    let file = syn::parse_file(text).ok()?;
    for item in &file.items {
        if let syn::Item::Fn(f) = item {
            if f.sig.ident == name || loose_name(&f.sig.ident.to_string()) == loose_name(name) {
                let head_tokens = match f.vis {
                    syn::Visibility::Inherited => crate::rust::tokens_of(&f.sig),
                    _ => crate::rust::tokens_of(&f.vis),
                };
                let start = head_tokens.into_iter().next()?.span().byte_range().start;
                let body = f.block.brace_token.span.open().byte_range().start;
                let head = text.get(start..body)?;
                return Some(format!("{};", crate::c::source::normalize_ws(head)));
            }
        }
    }
    None
}

impl Translator<'_> {
    fn program(&self) -> &str {
        &self.structure.name
    }

    fn complete(&self, prompt: &PromptText) -> Result<String, LlmError> {
        let reply = self.gateway.complete(self.program(), prompt, &self.options.params)?;
        Ok(extract_code(&reply, Expect::Single)?.remove(0).code)
    }

    /// Rust forms of already translated dependencies.
    fn rust_deps(&self, session: &TranslationSession, keys: &[String]) -> (Vec<DepSymbol>, Vec<String>) {
        let mut present = Vec::new();
        let mut missing = Vec::new();
        for key in keys {
            let Some(def) = self.structure.symbols.get(key) else {
                continue;
            };
            let text = if def.kind == SymbolKind::FunctionSignature {
                session
                    .function(key)
                    .and_then(|f| rust_signature(&f.text, &def.name))
            } else {
                session.symbol(key).map(str::to_string)
            };
            match text {
                Some(t) => present.push(DepSymbol::new(key.clone(), t)),
                None => missing.push(key.clone()),
            }
        }
        (present, missing)
    }

    /// Translate Σ entries (except function signatures) restricted to
    /// `file` when given, one prompt per kind group.
    pub fn translate_globals(&self, session: &mut TranslationSession, file: Option<&str>) {
        let sigma = &self.structure.symbols;
        for (group, kinds) in GROUPS {
            let mut pending: Vec<String> = sigma
                .in_order()
                .into_iter()
                .filter(|(k, d)| {
                    kinds.contains(&d.kind)
                        && file.is_none_or(|f| d.file == f)
                        && session.symbol(k).is_none()
                        && !session.untranslated.contains(k)
                })
                .map(|(k, _)| k.clone())
                .collect();
            let mut attempts = 0;
            while !pending.is_empty() && attempts <= self.options.retranslations {
                attempts += 1;
                let symbols: Vec<DepSymbol> = pending.iter().map(|k| c_dep(k, sigma.get(k).unwrap())).collect();
                let prior: Vec<DepSymbol> = session
                    .rust_symbols
                    .iter()
                    .map(|s| DepSymbol::new(s.key.clone(), s.text.clone()))
                    .collect();
                let prompt = render_globals_prompt(
                    &GlobalsInput {
                        group: group.to_string(),
                        symbols,
                        rust_deps: prior,
                        constraints: self.options.constraints.join("\n"),
                    },
                    self.options.budget,
                );
                session.log(EventKind::GlobalsPrompted {
                    group: group.to_string(),
                    keys: pending.clone(),
                });
                let code = match self.complete(&prompt) {
                    Ok(c) => c,
                    Err(e) => {
                        for k in pending.drain(..) {
                            session.log(EventKind::GenerationFailed {
                                symbol: k.clone(),
                                error: e.to_string(),
                            });
                            session.untranslated.push(k);
                        }
                        break;
                    }
                };
                let file_of = |k: &str| sigma.get(k).map(|d| d.file.clone()).unwrap_or_default();
                let home = pending.first().map(|k| file_of(k)).unwrap_or_default();
                self.absorb_globals(session, group, &home, &code, &pending, &file_of);
                pending.retain(|k| session.symbol(k).is_none());
            }
            for k in pending {
                session.log(EventKind::GenerationFailed {
                    symbol: k.clone(),
                    error: "no matching Rust definition in the reply".into(),
                });
                session.untranslated.push(k);
            }
        }
    }

    fn absorb_globals(
        &self,
        session: &mut TranslationSession,
        group: &str,
        home: &str,
        code: &str,
        keys: &[String],
        file_of: &dyn Fn(&str) -> String,
    ) {
        let Ok(ast) = parse_rust(code) else {
            session.support.push(SupportItem {
                file: home.to_string(),
                text: code.to_string(),
            });
            return;
        };
        let sigma = &self.structure.symbols;
        for item in extract_items(&ast) {
            let owners: Vec<&String> = match item.kind {
                ItemKind::Use | ItemKind::Impl | ItemKind::Other => Vec::new(),
                _ => keys
                    .iter()
                    .filter(|k| {
                        let def = sigma.get(k).unwrap();
                        loose_name(&def.name) == loose_name(&item.name)
                            || (def.kind == SymbolKind::Enum
                                && sigma
                                    .enum_constants
                                    .iter()
                                    .any(|(c, e)| e == *k && loose_name(c) == loose_name(&item.name)))
                    })
                    .collect(),
            };
            if owners.is_empty() {
                let t = item.source_text.clone();
                if !session.support.iter().any(|s| s.text == t) {
                    session.support.push(SupportItem {
                        file: home.to_string(),
                        text: t,
                    });
                }
                continue;
            }
            for k in owners {
                match session.rust_symbols.iter_mut().find(|s| &s.key == k) {
                    Some(s) => {
                        s.text.push_str("\n\n");
                        s.text.push_str(&item.source_text);
                    }
                    None => {
                        session.rust_symbols.push(RustSymbol {
                            key: k.clone(),
                            group: group.to_string(),
                            file: file_of(k),
                            text: item.source_text.clone(),
                        });
                        session.log(EventKind::SymbolTranslated { key: k.clone() });
                    }
                }
            }
        }
    }

    fn constraints(&self, f: &FunctionUnit) -> Vec<String> {
        let mut c = Vec::new();
        if f.is_main() {
            c.push("- This is the program entry point: write `fn main()` with no parameters; read standard input and write standard output exactly as the C program does, and exit with the C program's status.".to_string());
        } else {
            let arity = consistency::c_arity(f).unwrap_or(0);
            c.push(format!(
                "- Keep the function name `{}` and its {} parameter{} in the same order.",
                f.name,
                arity,
                if arity == 1 { "" } else { "s" }
            ));
        }
        c.push("- Do not redefine the dependent symbols; refer to them by their Rust names.".into());
        c.push("- Use only the Rust standard library.".into());
        c.extend(self.options.constraints.iter().cloned());
        c
    }

    pub fn function_prompt(
        &self,
        session: &TranslationSession,
        f: &FunctionUnit,
        position: (usize, usize),
        violations: &[String],
    ) -> (PromptText, Vec<String>, Vec<String>) {
        let sigma = &self.structure.symbols;
        let c_deps: Vec<DepSymbol> = f
            .dependencies
            .iter()
            .filter_map(|k| sigma.get(k).map(|d| c_dep(k, d)))
            .collect();
        let (rust_deps, missing) = self.rust_deps(session, &f.dependencies);
        let present = rust_deps.iter().map(|d| d.key.clone()).collect();
        let mut constraints = self.constraints(f);
        if !violations.is_empty() {
            constraints.push("- The previous translation violated these structural constraints; fix every one:".into());
            constraints.extend(violations.iter().map(|v| format!("  - {v}")));
        }
        let prompt = render_translation_prompt(
            &TranslationInput {
                function: f,
                position,
                c_deps,
                rust_deps,
                rag_pairs: Vec::new(),
                constraints: constraints.join("\n"),
            },
            self.options.budget,
        );
        (prompt, present, missing)
    }

    fn known_names(&self, session: &TranslationSession) -> KnownNames {
        let mut k = KnownNames::new(&self.structure.symbols);
        for s in &session.rust_symbols {
            k.add_rust_text(&s.text);
        }
        for s in &session.support {
            k.add_rust_text(&s.text);
        }
        for f in &session.functions {
            k.add_rust_text(&f.text);
        }
        k
    }

    fn attempt(
        &self,
        session: &mut TranslationSession,
        f: &FunctionUnit,
        position: (usize, usize),
        attempt: u32,
        violations: &[String],
    ) -> Result<TranslatedFunction, TranslateError> {
        let (prompt, present, missing) = self.function_prompt(session, f, position, violations);
        session.log(EventKind::FunctionPrompted {
            key: f.key.clone(),
            attempt,
            present,
            missing,
        });
        let text = self.complete(&prompt).map_err(|e| TranslateError::GenerationFailed {
            symbol: f.key.clone(),
            source: e,
        })?;
        let report = check_consistency(f, &text, &self.known_names(session), self.options.mode);
        session.log(EventKind::FunctionTranslated {
            key: f.key.clone(),
            attempt,
            matched: report.matched,
            violations: report.violations.clone(),
        });
        Ok(TranslatedFunction {
            key: f.key.clone(),
            name: f.name.clone(),
            file: f.file.clone(),
            text,
            attempts: attempt,
            report,
            flagged: false,
        })
    }

    /// First translation of a function. The result is recorded in the
    /// session even when it is inconsistent.
    pub fn translate_function(
        &self,
        session: &mut TranslationSession,
        f: &FunctionUnit,
        position: (usize, usize),
    ) -> Result<TranslatedFunction, TranslateError> {
        session.budgets.insert(f.key.clone(), self.options.retranslations);
        let tf = match self.attempt(session, f, position, 1, &[]) {
            Ok(tf) => tf,
            Err(e) => {
                session.log(EventKind::GenerationFailed {
                    symbol: f.key.clone(),
                    error: e.to_string(),
                });
                session.untranslated.push(f.key.clone());
                return Err(e);
            }
        };
        session.set_function(tf);
        Ok(session.function(&f.key).unwrap().clone())
    }

    /// Re-prompt with the violations of the current translation.
    pub fn retranslate(
        &self,
        session: &mut TranslationSession,
        f: &FunctionUnit,
        position: (usize, usize),
    ) -> Result<TranslatedFunction, TranslateError> {
        let current = session
            .function(&f.key)
            .ok_or_else(|| TranslateError::UnknownFunction(f.key.clone()))?
            .clone();
        if current.report.matched {
            return Err(TranslateError::AlreadyMatched(f.key.clone()));
        }
        let left = session.budgets.get(&f.key).copied().unwrap_or(0);
        if left == 0 {
            session.log(EventKind::BudgetExhausted { key: f.key.clone() });
            if let Some(tf) = session.functions.iter_mut().find(|x| x.key == f.key) {
                tf.flagged = true;
            }
            return Err(TranslateError::BudgetExhausted(f.key.clone()));
        }
        session.budgets.insert(f.key.clone(), left - 1);
        let tf = self.attempt(session, f, position, current.attempts + 1, &current.report.violations)?;
        session.set_function(tf);
        Ok(session.function(&f.key).unwrap().clone())
    }

    /// Translate and enforce consistency until matched or out of budget.
    pub fn translate_checked(&self, session: &mut TranslationSession, f: &FunctionUnit, position: (usize, usize)) {
        if self.translate_function(session, f, position).is_err() {
            return;
        }
        loop {
            match session.function(&f.key) {
                Some(tf) if !tf.report.matched => {}
                _ => return,
            }
            match self.retranslate(session, f, position) {
                Ok(_) => {}
                Err(TranslateError::GenerationFailed { source, .. }) => {
                    session.log(EventKind::GenerationFailed {
                        symbol: f.key.clone(),
                        error: source.to_string(),
                    });
                    return;
                }
                Err(_) => return,
            }
        }
    }

    /// Globals, then every defined function in call-graph order.
    pub fn translate_program(&self) -> TranslationSession {
        let mut session = TranslationSession::new(self.program());
        self.translate_globals(&mut session, None);
        let order = &self.structure.order;
        for (i, key) in order.iter().enumerate() {
            if let Some(f) = self.structure.function(key) {
                self.translate_checked(&mut session, f, (i + 1, order.len()));
            }
        }
        session
    }

    /// Files in file-graph order against one shared session.
    pub fn translate_project(&self) -> TranslationSession {
        let mut session = TranslationSession::new(self.program());
        let order = &self.structure.order;
        for file in &self.structure.file_graph.order {
            session.log(EventKind::UnitStarted { file: file.clone() });
            self.translate_globals(&mut session, Some(file));
            for (i, key) in order.iter().enumerate() {
                match self.structure.function(key) {
                    Some(f) if &f.file == file => self.translate_checked(&mut session, f, (i + 1, order.len())),
                    _ => {}
                }
            }
        }
        // Symbols of files missing from the file graph.
        self.translate_globals(&mut session, None);
        for (i, key) in order.iter().enumerate() {
            if session.function(key).is_none() && !session.untranslated.contains(key) {
                if let Some(f) = self.structure.function(key) {
                    self.translate_checked(&mut session, f, (i + 1, order.len()));
                }
            }
        }
        session
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c::project::analyze_source;
    use crate::llm::{MockTable, Selector};
    use crate::prompt::{PromptKind, H_CONSTRAINTS};

    #[test]
    fn signature_text() {
        assert_eq!(
            rust_signature("/// doc\npub fn sum(a: i32,\n   b: i32) -> i32 { a + b }", "sum").as_deref(),
            Some("pub fn sum(a: i32, b: i32) -> i32;")
        );
        assert_eq!(rust_signature("fn f() {}", "g"), None);
    }

    #[test]
    fn globals_map_to_sigma_keys() {
        let p = analyze_source("t.c", "struct Node { int v; };\nint g = 1;\nint main(void) { return g; }\n").unwrap();
        let mut t = MockTable::default();
        t.push(
            Selector::KindContains(PromptKind::GlobalsTranslation, vec!["Group: types".into()]),
            "```rust\nuse std::fmt;\npub struct Node { pub v: i32 }\n```",
        );
        t.push(
            Selector::KindContains(PromptKind::GlobalsTranslation, vec!["Group: globals".into()]),
            "```rust\nstatic mut G: i32 = 1;\n```",
        );
        let gw = Gateway::mock(t);
        let opts = TranslateOptions::default();
        let tr = Translator { structure: &p, gateway: &gw, options: &opts };
        let mut s = TranslationSession::new("t");
        tr.translate_globals(&mut s, None);
        let keys: Vec<_> = s.rust_symbols.iter().map(|r| r.key.as_str()).collect();
        assert_eq!(keys, vec!["struct Node", "g"]);
        assert!(syn::parse_file(s.symbol("g").unwrap()).is_ok());
        assert_eq!(s.support.len(), 1);
        assert!(s.untranslated.is_empty());
    }

    #[test]
    fn retranslation_carries_violations_and_budget() {
        let p = analyze_source("t.c", "int f(int a) { return a; }\n").unwrap();
        let mut t = MockTable::default();
        t.push(
            Selector::Kind(PromptKind::Translation),
            "```rust\nfn f(a: i32) -> i32 { return frobnicate(a); }\n```",
        );
        let gw = Gateway::mock(t);
        let opts = TranslateOptions { retranslations: 1, ..Default::default() };
        let tr = Translator { structure: &p, gateway: &gw, options: &opts };
        let mut s = TranslationSession::new("t");
        let f = p.function("f").unwrap();
        tr.translate_function(&mut s, f, (1, 1)).unwrap();
        let (prompt, _, _) = tr.function_prompt(&s, f, (1, 1), &s.function("f").unwrap().report.violations.clone());
        assert!(prompt.section(H_CONSTRAINTS).unwrap().contains("hallucinated symbol `frobnicate`"));
        assert!(tr.retranslate(&mut s, f, (1, 1)).is_ok());
        assert!(matches!(tr.retranslate(&mut s, f, (1, 1)), Err(TranslateError::BudgetExhausted(_))));
        assert!(s.function("f").unwrap().flagged);
        assert_eq!(gw.calls("t"), 2);
    }

    #[test]
    fn matched_translation_rejects_retranslation() {
        let p = analyze_source("t.c", "int f(int a) { return a; }\n").unwrap();
        let mut t = MockTable::default();
        t.push(Selector::Kind(PromptKind::Translation), "```rust\nfn f(a: i32) -> i32 { return a; }\n```");
        let gw = Gateway::mock(t);
        let opts = TranslateOptions::default();
        let tr = Translator { structure: &p, gateway: &gw, options: &opts };
        let mut s = TranslationSession::new("t");
        let f = p.function("f").unwrap();
        assert!(tr.translate_function(&mut s, f, (1, 1)).unwrap().report.matched);
        assert!(matches!(tr.retranslate(&mut s, f, (1, 1)), Err(TranslateError::AlreadyMatched(_))));
    }
}
