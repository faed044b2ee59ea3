//! Prompt rendering. Every prompt is a sequence of `### Heading` sections
//! with a fixed heading set per template; rendering is a pure function of
//! its inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::c::cfg::Cfg;
use crate::c::ddg::Ddg;
use crate::c::source::normalize_ws;
use crate::c::structure::{FunctionUnit, SymbolDef};
use crate::rust::RustItem;
use crate::syntax::diagnostic::Diagnostic;

pub const TEMPLATE_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptKind {
    Translation,
    GlobalsTranslation,
    FunctionFix,
    ItemFix,
    RegionFix,
    SemanticFix,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Translation => "translation",
            PromptKind::GlobalsTranslation => "globals-translation",
            PromptKind::FunctionFix => "function-fix",
            PromptKind::ItemFix => "item-fix",
            PromptKind::RegionFix => "region-fix",
            PromptKind::SemanticFix => "semantic-fix",
        }
    }

    /// Allowed headings in template order.
    pub fn headings(self) -> &'static [&'static str] {
        match self {
            PromptKind::Translation => &[
                H_INSTRUCTION,
                H_C_FUNCTION,
                H_DEPENDENT,
                H_RAG,
                H_CONSTRAINTS,
            ],
            PromptKind::GlobalsTranslation => &[H_INSTRUCTION, H_C_GLOBALS, H_DEPENDENT, H_CONSTRAINTS],
            PromptKind::FunctionFix => &[
                H_INSTRUCTION,
                H_RUST_FUNCTION,
                H_ERRORS,
                H_INTERFACE,
                H_DEPENDENT,
                H_CONSTRAINTS,
            ],
            PromptKind::ItemFix => &[
                H_INSTRUCTION,
                H_RUST_ITEM,
                H_SINGLE_ERROR,
                H_LOCATION,
                H_DEPENDENT,
                H_CONSTRAINTS,
            ],
            PromptKind::RegionFix => &[H_INSTRUCTION, H_REGION, H_PARSE_ERROR, H_CONSTRAINTS],
            PromptKind::SemanticFix => &[
                H_INSTRUCTION,
                H_STRUCTURE_INFO,
                H_IO,
                H_DIFF,
                H_OUTPUT_CODE,
                H_CFG_DDG,
                H_STATES,
                H_FAILING_CODE,
                H_CONSTRAINTS,
            ],
        }
    }
}

pub const H_INSTRUCTION: &str = "Instruction";
pub const H_C_FUNCTION: &str = "C Function";
pub const H_C_GLOBALS: &str = "C Global Symbols";
pub const H_DEPENDENT: &str = "Dependent Symbols";
pub const H_RAG: &str = "RAG Code Pairs";
pub const H_CONSTRAINTS: &str = "Constraints";
pub const H_RUST_FUNCTION: &str = "Selected Rust Function";
pub const H_ERRORS: &str = "Compiler Errors";
pub const H_INTERFACE: &str = "Function Interface";
pub const H_RUST_ITEM: &str = "Rust Item";
pub const H_SINGLE_ERROR: &str = "Error";
pub const H_LOCATION: &str = "Location";
pub const H_REGION: &str = "Code Region";
pub const H_PARSE_ERROR: &str = "Parse Error";
pub const H_STRUCTURE_INFO: &str = "C-Rust Structure Information";
pub const H_IO: &str = "Input and Outputs";
pub const H_DIFF: &str = "C/Rust Output Diff";
pub const H_OUTPUT_CODE: &str = "Output-Related Code";
pub const H_CFG_DDG: &str = "CFG and DDG";
pub const H_STATES: &str = "Instrumented Runtime States";
pub const H_FAILING_CODE: &str = "Code with Semantic Errors";

pub const NONE_MARKER: &str = "(none)";
pub const NO_STATES_MARKER: &str = "(no states captured)";
pub const PAIR_CONTRACT: &str =
    "Return both original and modified code: first the original item in one ```rust block, then the modified item in a second ```rust block.";
pub const ELIDED: &str = "/* ... */";
pub const TRUNCATED: &str = "[truncated]";

const TRANSLATION_INSTRUCTION: &str = "Translate the C function below into safe, idiomatic Rust. The dependent symbols have already been translated; use their Rust definitions exactly as given and do not redefine them. Reply with a single ```rust code block containing only the translated function.";
const GLOBALS_INSTRUCTION: &str = "Translate the C global symbols below into Rust definitions: types as structs, enums or type aliases, variables as statics or constants, macros as constants or functions. Keep each symbol's name recognizable. Reply with a single ```rust code block containing only the definitions and any `use` items they need.";
const FUNCTION_FIX_INSTRUCTION: &str = "The Rust function below fails to compile. Fix every listed compiler error while keeping the function interface unchanged. Reply with a single ```rust code block containing the complete corrected function.";
const ITEM_FIX_INSTRUCTION: &str = "The Rust item below triggers the compiler error shown. Fix the item so that the error disappears without changing its name.";
const REGION_FIX_INSTRUCTION: &str = "The Rust code region below cannot be parsed. Rewrite the region so that it is syntactically valid Rust with the same meaning. Reply with a single ```rust code block containing exactly the rewritten region.";
const SEMANTIC_FIX_INSTRUCTION: &str = "The Rust program below compiles but its output differs from the reference C program on the given input. Use the output difference, the structure of the C function, and the runtime states to find and fix the discrepancy. Reply with a single ```rust code block containing the complete corrected program.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub kind: PromptKind,
    pub sections: Vec<Section>,
    pub rendered: String,
}

impl PromptText {
    fn new(kind: PromptKind, sections: Vec<Section>) -> Self {
        let rendered = sections
            .iter()
            .map(|s| format!("### {}\n{}\n", s.heading, s.body.trim_end()))
            .collect::<Vec<_>>()
            .join("\n");
        PromptText {
            kind,
            sections,
            rendered,
        }
    }

    pub fn section(&self, heading: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|s| s.heading == heading)
            .map(|s| s.body.as_str())
    }

    pub fn len(&self) -> usize {
        self.rendered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rendered.is_empty()
    }
}

fn section(heading: &str, body: impl Into<String>) -> Section {
    Section {
        heading: heading.to_string(),
        body: body.into(),
    }
}

fn fenced(lang: &str, code: &str) -> String {
    format!("```{lang}\n{}\n```", code.trim_end())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("function-fix prompt needs at least one diagnostic")]
    NoDiagnostics,
    #[error("diagnostic at {0:?} lies outside the selected code")]
    OutsideScope((usize, usize)),
}

/// Character limit; `None` disables elision.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_chars: Option<usize>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget { max_chars: None }
    }

    pub fn chars(n: usize) -> Self {
        Budget { max_chars: Some(n) }
    }

    fn fits(&self, p: &PromptText) -> bool {
        self.max_chars.is_none_or(|m| p.len() <= m)
    }
}

/// Elision level: 0 full, 1 symbol bodies elided, 2 RAG pairs dropped,
/// 3 CFG block code truncated.
fn fit(budget: Budget, render: impl Fn(u8) -> PromptText) -> PromptText {
    let mut last = render(0);
    for level in 1..=3 {
        if budget.fits(&last) {
            break;
        }
        last = render(level);
    }
    last
}

/// A dependency entry: the Σ key it came from and its definition text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepSymbol {
    pub key: String,
    pub text: String,
}

impl DepSymbol {
    pub fn new(key: impl Into<String>, text: impl Into<String>) -> Self {
        DepSymbol {
            key: key.into(),
            text: text.into(),
        }
    }
}

/// Collapse a definition onto one line. Rust line comments are dropped
/// first so that the result stays valid code.
pub fn one_line(text: &str) -> String {
    let stripped: Vec<&str> = text
        .lines()
        .map(|l| match comment_start(l) {
            Some(i) => &l[..i],
            None => l,
        })
        .collect();
    normalize_ws(&stripped.join("\n"))
}

fn comment_start(line: &str) -> Option<usize> {
    let b = line.as_bytes();
    let mut in_str = false;
    let mut i = 0;
    while i + 1 < b.len() {
        match b[i] {
            b'\\' if in_str => i += 1,
            b'"' => in_str = !in_str,
            b'/' if !in_str && b[i + 1] == b'/' => return Some(i),
            _ => {}
        }
        i += 1;
    }
    None
}

/// Text up to the first `{`, with the body replaced by an elision marker.
pub fn elide_body(text: &str) -> String {
    let line = one_line(text);
    match line.find('{') {
        Some(i) => format!("{} {{ {ELIDED} }}", line[..i].trim_end()),
        None => line,
    }
}

fn dep_lines(deps: &[DepSymbol], elide: bool) -> Vec<String> {
    deps.iter()
        .map(|d| {
            let t = if elide { elide_body(&d.text) } else { one_line(&d.text) };
            format!("- {}: {}", d.key, t)
        })
        .collect()
}

fn dependent_section(c: &[DepSymbol], rust: &[DepSymbol], elide: bool) -> Section {
    if c.is_empty() && rust.is_empty() {
        return section(H_DEPENDENT, NONE_MARKER);
    }
    let mut lines = Vec::new();
    if !c.is_empty() {
        lines.push("C definitions:".to_string());
        lines.extend(dep_lines(c, elide));
    }
    lines.push("Rust definitions:".to_string());
    if rust.is_empty() {
        lines.push(NONE_MARKER.to_string());
    } else {
        lines.extend(dep_lines(rust, elide));
    }
    section(H_DEPENDENT, lines.join("\n"))
}

/// Σ keys listed in a dependent-symbols section body.
pub fn listed_symbols(body: &str) -> Vec<(String, String)> {
    let mut side = String::new();
    let mut out = Vec::new();
    for line in body.lines() {
        match line {
            "C definitions:" => side = "c".into(),
            "Rust definitions:" => side = "rust".into(),
            _ => {
                if let Some(rest) = line.strip_prefix("- ") {
                    if let Some((key, _)) = rest.split_once(": ") {
                        out.push((side.clone(), key.to_string()));
                    }
                }
            }
        }
    }
    out
}

/// One-line C form of a Σ entry.
pub fn c_dep(key: &str, def: &SymbolDef) -> DepSymbol {
    DepSymbol::new(key, def.source_text.clone())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RagPair {
    pub c: String,
    pub rust: String,
}

#[derive(Debug, Clone)]
pub struct TranslationInput<'a> {
    pub function: &'a FunctionUnit,
    /// 1-based position in the translation order and its length.
    pub position: (usize, usize),
    pub c_deps: Vec<DepSymbol>,
    pub rust_deps: Vec<DepSymbol>,
    pub rag_pairs: Vec<RagPair>,
    pub constraints: String,
}

pub fn c_function_text(f: &FunctionUnit) -> String {
    match &f.body {
        Some(b) => format!("{} {}", f.signature, b.trim()),
        None => format!("{};", f.signature),
    }
}

pub fn render_translation_prompt(input: &TranslationInput<'_>, budget: Budget) -> PromptText {
    fit(budget, |level| {
        let f = input.function;
        let mut s = vec![
            section(H_INSTRUCTION, TRANSLATION_INSTRUCTION),
            section(
                H_C_FUNCTION,
                format!(
                    "Function: {} ({} of {})\nFile: {}\n{}",
                    f.name,
                    input.position.0,
                    input.position.1,
                    f.file,
                    fenced("c", &c_function_text(f))
                ),
            ),
            dependent_section(&input.c_deps, &input.rust_deps, level >= 1),
        ];
        if !input.rag_pairs.is_empty() && level < 2 {
            let body = input
                .rag_pairs
                .iter()
                .enumerate()
                .map(|(i, p)| format!("Pair {}:\n{}\n{}", i + 1, fenced("c", &p.c), fenced("rust", &p.rust)))
                .collect::<Vec<_>>()
                .join("\n");
            s.push(section(H_RAG, body));
        }
        s.push(section(H_CONSTRAINTS, constraints_or_none(&input.constraints)));
        PromptText::new(PromptKind::Translation, s)
    })
}

#[derive(Debug, Clone)]
pub struct GlobalsInput {
    /// Kind group being translated, e.g. `types`.
    pub group: String,
    pub symbols: Vec<DepSymbol>,
    pub rust_deps: Vec<DepSymbol>,
    pub constraints: String,
}

pub fn render_globals_prompt(input: &GlobalsInput, budget: Budget) -> PromptText {
    fit(budget, |level| {
        let mut body = vec![format!("Group: {}", input.group)];
        body.extend(dep_lines(&input.symbols, false));
        PromptText::new(
            PromptKind::GlobalsTranslation,
            vec![
                section(H_INSTRUCTION, GLOBALS_INSTRUCTION),
                section(H_C_GLOBALS, body.join("\n")),
                dependent_section(&[], &input.rust_deps, level >= 1),
                section(H_CONSTRAINTS, constraints_or_none(&input.constraints)),
            ],
        )
    })
}

fn constraints_or_none(c: &str) -> String {
    if c.trim().is_empty() {
        NONE_MARKER.to_string()
    } else {
        c.trim_end().to_string()
    }
}

#[derive(Debug, Clone)]
pub struct FunctionFixInput<'a> {
    pub rust_fn: &'a str,
    /// Byte range of `rust_fn` inside the file the diagnostics refer to.
    pub fn_span: (usize, usize),
    pub errors: &'a [Diagnostic],
    pub interface: String,
    pub rust_deps: Vec<DepSymbol>,
    pub constraints: String,
}

fn check_scope(d: &Diagnostic, span: (usize, usize)) -> Result<(), PromptError> {
    match d.byte_range() {
        Some((a, b)) if a >= span.0 && b <= span.1 => Ok(()),
        Some(r) => Err(PromptError::OutsideScope(r)),
        None => Err(PromptError::OutsideScope((0, 0))),
    }
}

pub fn render_function_fix_prompt(input: &FunctionFixInput<'_>, budget: Budget) -> Result<PromptText, PromptError> {
    if input.errors.is_empty() {
        return Err(PromptError::NoDiagnostics);
    }
    for d in input.errors {
        check_scope(d, input.fn_span)?;
    }
    let errors = input
        .errors
        .iter()
        .enumerate()
        .map(|(i, d)| format!("{}. {}", i + 1, d.headline()))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(fit(budget, |level| {
        PromptText::new(
            PromptKind::FunctionFix,
            vec![
                section(H_INSTRUCTION, FUNCTION_FIX_INSTRUCTION),
                section(H_RUST_FUNCTION, fenced("rust", input.rust_fn)),
                section(H_ERRORS, errors.clone()),
                section(H_INTERFACE, one_line(&input.interface)),
                dependent_section(&[], &input.rust_deps, level >= 1),
                section(H_CONSTRAINTS, constraints_or_none(&input.constraints)),
            ],
        )
    }))
}

#[derive(Debug, Clone)]
pub struct ItemFixInput<'a> {
    pub item: &'a RustItem,
    pub error: &'a Diagnostic,
    pub rust_deps: Vec<DepSymbol>,
    pub constraints: String,
}

pub fn render_item_fix_prompt(input: &ItemFixInput<'_>, budget: Budget) -> Result<PromptText, PromptError> {
    check_scope(input.error, input.item.span)?;
    let mut constraints = input.constraints.trim_end().to_string();
    if !constraints.is_empty() {
        constraints.push('\n');
    }
    constraints.push_str(PAIR_CONTRACT);
    Ok(fit(budget, |level| {
        PromptText::new(
            PromptKind::ItemFix,
            vec![
                section(H_INSTRUCTION, ITEM_FIX_INSTRUCTION),
                section(
                    H_RUST_ITEM,
                    format!(
                        "{} {}\n{}",
                        input.item.kind.as_str(),
                        input.item.name,
                        fenced("rust", &input.item.source_text)
                    ),
                ),
                section(H_SINGLE_ERROR, input.error.headline()),
                section(H_LOCATION, input.error.location()),
                dependent_section(&[], &input.rust_deps, level >= 1),
                section(H_CONSTRAINTS, constraints.clone()),
            ],
        )
    }))
}

#[derive(Debug, Clone)]
pub struct RegionFixInput<'a> {
    pub region: &'a str,
    /// 1-based inclusive line range of the region.
    pub lines: (usize, usize),
    pub message: &'a str,
    /// 1-based line and column of the parse failure.
    pub at: (usize, usize),
    pub constraints: String,
}

pub fn render_region_fix_prompt(input: &RegionFixInput<'_>) -> PromptText {
    PromptText::new(
        PromptKind::RegionFix,
        vec![
            section(H_INSTRUCTION, REGION_FIX_INSTRUCTION),
            section(
                H_REGION,
                format!("Lines {}-{}:\n{}", input.lines.0, input.lines.1, fenced("rust", input.region)),
            ),
            section(
                H_PARSE_ERROR,
                format!("{} at line {}, column {}", input.message, input.at.0, input.at.1),
            ),
            section(H_CONSTRAINTS, constraints_or_none(&input.constraints)),
        ],
    )
}

/// Textual CFG and DDG. `max_block_chars` truncates block code.
pub fn render_structure_text_limited(cfg: &Cfg, ddg: &Ddg, max_block_chars: Option<usize>) -> String {
    let mut lines = Vec::new();
    for b in &cfg.blocks {
        let mut code = b.stmts.join(" ");
        if let Some(m) = max_block_chars {
            if code.chars().count() > m {
                code = format!("{} {TRUNCATED}", code.chars().take(m).collect::<String>().trim_end());
            }
        }
        if code.is_empty() {
            lines.push(format!("Block {}:", b.id));
        } else {
            lines.push(format!("Block {}: {}", b.id, code));
        }
    }
    for (a, b) in &cfg.edges {
        lines.push(format!("Block {a} -> Block {b}"));
    }
    for n in &ddg.nodes {
        lines.push(format!("Node {} ({})", n.id, n.symbol));
    }
    for &(a, b) in &ddg.edges {
        let sym = |id: usize| ddg.node(id).map_or("?", |n| n.symbol.as_str());
        lines.push(format!("Node {a} ({}) -> Node {b} ({})", sym(a), sym(b)));
    }
    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

pub fn render_structure_text(cfg: &Cfg, ddg: &Ddg) -> String {
    render_structure_text_limited(cfg, ddg, None)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRecord {
    pub site: usize,
    pub identifier: String,
    pub value: String,
}

#[derive(Debug, Clone)]
pub struct SemanticFixInput<'a> {
    /// Correspondence between C functions and their Rust translations.
    pub structure_info: String,
    pub input: &'a str,
    pub c_out: &'a str,
    pub rust_out: &'a str,
    /// Unified-style diff lines.
    pub diff: String,
    pub related_code: Vec<String>,
    /// Function name with its C graphs.
    pub graphs: Vec<(String, &'a Cfg, &'a Ddg)>,
    pub states: &'a [StateRecord],
    pub failing_source: &'a str,
    pub constraints: String,
}

pub fn render_states(states: &[StateRecord]) -> String {
    if states.is_empty() {
        return NO_STATES_MARKER.to_string();
    }
    states
        .iter()
        .map(|s| format!("{} -> {}", s.identifier, s.value))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_semantic_fix_prompt(input: &SemanticFixInput<'_>, budget: Budget) -> PromptText {
    fit(budget, |level| {
        let limit = (level >= 3).then_some(40);
        let structure = if input.graphs.is_empty() {
            NONE_MARKER.to_string()
        } else {
            input
                .graphs
                .iter()
                .map(|(name, cfg, ddg)| format!("Function {name}:\n{}", render_structure_text_limited(cfg, ddg, limit)))
                .collect::<Vec<_>>()
                .join("\n")
        };
        let related = if input.related_code.is_empty() {
            NONE_MARKER.to_string()
        } else {
            input.related_code.join("\n")
        };
        PromptText::new(
            PromptKind::SemanticFix,
            vec![
                section(H_INSTRUCTION, SEMANTIC_FIX_INSTRUCTION),
                section(H_STRUCTURE_INFO, constraints_or_none(&input.structure_info)),
                section(
                    H_IO,
                    format!(
                        "Input:\n{}\nC output:\n{}\nRust output:\n{}",
                        fenced("text", input.input),
                        fenced("text", input.c_out),
                        fenced("text", input.rust_out)
                    ),
                ),
                section(H_DIFF, fenced("diff", &input.diff)),
                section(H_OUTPUT_CODE, related),
                section(H_CFG_DDG, structure),
                section(H_STATES, render_states(input.states)),
                section(H_FAILING_CODE, fenced("rust", input.failing_source)),
                section(H_CONSTRAINTS, constraints_or_none(&input.constraints)),
            ],
        )
    })
}
