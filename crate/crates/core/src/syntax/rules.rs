//! Deterministic fixes for common compiler error classes.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use proc_macro2::{Delimiter, TokenStream, TokenTree};
use regex::Regex;
use serde::{Deserialize, Serialize};
use syn::spanned::Spanned;
use syn::visit::Visit;
use thiserror::Error;

use super::diagnostic::Diagnostic;
use crate::c::structure::SymbolTable;
use crate::rust::{loose_name, parse_rust, tokens_of, RustAst};

const BUILTIN_TABLE: &str = include_str!("../../data/rules.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleClass {
    Resolve,
    Type,
    Import,
    Rename,
    Unsafe,
}

impl RuleClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleClass::Resolve => "resolve",
            RuleClass::Type => "type",
            RuleClass::Import => "import",
            RuleClass::Rename => "rename",
            RuleClass::Unsafe => "unsafe",
        }
    }
}

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("invalid routing table: {0}")]
    Invalid(#[from] toml::de::Error),
    #[error("unsupported routing table version {0}")]
    Version(u32),
}

/// Error code to rule class map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingTable {
    pub version: u32,
    pub codes: BTreeMap<String, RuleClass>,
}

impl Default for RoutingTable {
    fn default() -> Self {
        RoutingTable::builtin()
    }
}

impl RoutingTable {
    pub fn builtin() -> Self {
        RoutingTable::parse(BUILTIN_TABLE).expect("builtin routing table")
    }

    pub fn parse(text: &str) -> Result<Self, RoutingError> {
        let t: RoutingTable = toml::from_str(text)?;
        if t.version != 1 {
            return Err(RoutingError::Version(t.version));
        }
        Ok(t)
    }

    /// Rule class for an error; `None` sends it to function-level repair.
    /// A compiler suggestion that is an import always routes to `Import`.
    pub fn route(&self, d: &Diagnostic) -> Option<RuleClass> {
        if !d.is_error() {
            return None;
        }
        if import_suggestion(d).is_some() {
            return Some(RuleClass::Import);
        }
        self.codes.get(&d.code).copied()
    }
}

fn import_suggestion(d: &Diagnostic) -> Option<String> {
    let s = d.suggestion.as_deref()?.trim();
    (s.starts_with("use ") && s.ends_with(';') && !s.contains('\n')).then(|| s.to_string())
}

/// Names the program defines, for resolving identifiers the compiler
/// could not find.
#[derive(Debug, Clone, Default)]
pub struct RuleContext {
    /// Loose names of C symbols.
    names: BTreeSet<String>,
    /// Loose enum constant name to loose enum name.
    enum_constants: BTreeMap<String, String>,
}

impl RuleContext {
    pub fn new(sigma: &SymbolTable) -> Self {
        let mut ctx = RuleContext::default();
        for def in sigma.entries.values() {
            ctx.names.insert(loose_name(&def.name));
        }
        for (constant, enum_key) in &sigma.enum_constants {
            let enum_name = sigma.get(enum_key).map(|d| d.name.clone()).unwrap_or_default();
            ctx.names.insert(loose_name(constant));
            ctx.enum_constants.insert(loose_name(constant), loose_name(&enum_name));
        }
        ctx
    }
}

/// One accepted rule edit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedFix {
    pub class: RuleClass,
    pub rule: String,
    pub span: (usize, usize),
    pub before: String,
    pub after: String,
    /// Source after the edit.
    #[serde(skip)]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("rule `{rule}` made the source unparsable at {span:?}; rolled back")]
pub struct RuleFixRegression {
    pub rule: String,
    pub span: (usize, usize),
}

#[derive(Debug, Clone, Default)]
pub struct RuleFixOutcome {
    pub source: String,
    pub fixed: Vec<Diagnostic>,
    pub remaining: Vec<Diagnostic>,
    pub applied: Vec<AppliedFix>,
    pub regressions: Vec<RuleFixRegression>,
}

#[derive(Debug, Clone)]
struct Edit {
    class: RuleClass,
    rule: &'static str,
    range: (usize, usize),
    text: String,
    diag: usize,
}

/// Apply every applicable rule to `source`. Edits that leave the file
/// unparsable are rolled back and their diagnostics stay in `remaining`.
pub fn apply_rule_fixes(source: &str, diags: &[Diagnostic], table: &RoutingTable, ctx: &RuleContext) -> RuleFixOutcome {
    let mut out = RuleFixOutcome {
        source: source.to_string(),
        ..Default::default()
    };
    let Ok(ast) = parse_rust(source) else {
        out.remaining = diags.iter().filter(|d| d.is_error()).cloned().collect();
        return out;
    };
    let toks = flatten(source);
    let mut edits: Vec<Edit> = Vec::new();
    let mut handled = vec![false; diags.len()];
    let mut dupes: Vec<(usize, usize)> = Vec::new();
    for (i, d) in diags.iter().enumerate() {
        let Some(class) = table.route(d) else { continue };
        let edit = match class {
            RuleClass::Resolve => resolve_edit(&ast, d, ctx),
            RuleClass::Type => type_edit(&ast, d),
            RuleClass::Import => import_edit(&ast, d),
            RuleClass::Rename => rename_edit(&ast, &toks, d),
            RuleClass::Unsafe => unsafe_edit(&ast, d),
        };
        if let Some((rule, range, text)) = edit {
            if let Some(prev) = edits.iter().find(|e| e.range == range && e.text == text) {
                dupes.push((i, prev.diag));
                continue;
            }
            edits.push(Edit {
                class,
                rule,
                range,
                text,
                diag: i,
            });
        }
    }
    // Greedy non-overlapping selection in diagnostic order.
    let mut chosen: Vec<Edit> = Vec::new();
    for e in edits {
        let overlaps = chosen.iter().any(|c| {
            let (a, b) = (c.range, e.range);
            a.0 < b.1 && b.0 < a.1 || (a.0 == a.1 || b.0 == b.1) && a.0 == b.0
        });
        if !overlaps {
            chosen.push(e);
        }
    }
    chosen.sort_by(|a, b| b.range.0.cmp(&a.range.0).then(b.range.1.cmp(&a.range.1)));
    let mut applied_rev = Vec::new();
    for e in chosen {
        let before = out.source[e.range.0..e.range.1].to_string();
        let mut next = out.source.clone();
        next.replace_range(e.range.0..e.range.1, &e.text);
        let rule = format!("{}/{}", e.class.as_str(), e.rule);
        if parse_rust(&next).is_err() {
            out.regressions.push(RuleFixRegression { rule, span: e.range });
            continue;
        }
        out.source = next;
        handled[e.diag] = true;
        applied_rev.push(AppliedFix {
            class: e.class,
            rule,
            span: e.range,
            before,
            after: e.text,
            source: out.source.clone(),
        });
    }
    out.applied = applied_rev;
    for (i, j) in dupes {
        handled[i] = handled[j];
    }
    for (i, d) in diags.iter().enumerate() {
        if !d.is_error() {
            continue;
        }
        if handled[i] {
            out.fixed.push(d.clone());
        } else {
            out.remaining.push(d.clone());
        }
    }
    out
}

type EditSpec = (&'static str, (usize, usize), String);

fn diag_text<'a>(ast: &'a RustAst, d: &Diagnostic) -> Option<(&'a str, (usize, usize))> {
    let (a, b) = d.byte_range()?;
    Some((ast.source.get(a..b)?, (a, b)))
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    cs.next().is_some_and(|c| c.is_alphabetic() || c == '_') && cs.all(|c| c.is_alphanumeric() || c == '_')
}

// ---------------------------------------------------------------- resolve

struct Defined {
    /// (name, kind) of items at any depth.
    items: Vec<(String, &'static str)>,
    /// enum name, variant names
    enums: Vec<(String, Vec<String>)>,
}

fn defined_names(ast: &RustAst) -> Defined {
    struct V(Defined);
    impl<'ast> Visit<'ast> for V {
        fn visit_item(&mut self, i: &'ast syn::Item) {
            let entry = match i {
                syn::Item::Fn(f) => Some((f.sig.ident.to_string(), "fn")),
                syn::Item::Struct(s) => Some((s.ident.to_string(), "type")),
                syn::Item::Union(s) => Some((s.ident.to_string(), "type")),
                syn::Item::Type(s) => Some((s.ident.to_string(), "type")),
                syn::Item::Static(s) => Some((s.ident.to_string(), "value")),
                syn::Item::Const(s) => Some((s.ident.to_string(), "value")),
                syn::Item::Macro(m) => m.ident.as_ref().map(|i| (i.to_string(), "macro")),
                syn::Item::Enum(e) => {
                    self.0
                        .enums
                        .push((e.ident.to_string(), e.variants.iter().map(|v| v.ident.to_string()).collect()));
                    Some((e.ident.to_string(), "type"))
                }
                _ => None,
            };
            if let Some(e) = entry {
                self.0.items.push(e);
            }
            syn::visit::visit_item(self, i);
        }
    }
    let mut v = V(Defined {
        items: Vec::new(),
        enums: Vec::new(),
    });
    v.visit_file(&ast.file);
    v.0
}

fn resolve_edit(ast: &RustAst, d: &Diagnostic, ctx: &RuleContext) -> Option<EditSpec> {
    let (text, range) = diag_text(ast, d)?;
    if !is_ident(text) {
        return None;
    }
    let loose = loose_name(text);
    if let Some(s) = d.suggestion.as_deref().map(str::trim) {
        if is_ident(s) && s != text && loose_name(s) == loose {
            return Some(("compiler-suggestion", range, s.to_string()));
        }
    }
    if !ctx.names.contains(&loose) {
        return None;
    }
    let defined = defined_names(ast);
    if let Some(enum_loose) = ctx.enum_constants.get(&loose) {
        let mut found = None;
        for (e, variants) in &defined.enums {
            for v in variants {
                if loose_name(v) == loose || loose_name(&format!("{e}{v}")) == loose {
                    let exact = loose_name(e) == *enum_loose;
                    if found.as_ref().is_none_or(|(x, _): &(bool, String)| exact && !*x) {
                        found = Some((exact, format!("{e}::{v}")));
                    }
                }
            }
        }
        if let Some((_, path)) = found {
            return Some(("enum-constant", range, path));
        }
    }
    let want_type = d.message.contains("cannot find type") || d.message.contains("undeclared type");
    let candidates: Vec<&String> = defined
        .items
        .iter()
        .filter(|(n, k)| n != text && loose_name(n) == loose && (*k == "type") == want_type)
        .map(|(n, _)| n)
        .collect();
    match candidates.as_slice() {
        [one] => Some(("symbol-name", range, (*one).clone())),
        _ => None,
    }
}

// ---------------------------------------------------------------- type

const INTS: &[&str] = &[
    "i8", "i16", "i32", "i64", "i128", "isize", "u8", "u16", "u32", "u64", "u128", "usize",
];

fn is_int(t: &str) -> bool {
    INTS.contains(&t)
}

fn is_num(t: &str) -> bool {
    is_int(t) || t == "f32" || t == "f64"
}

fn castable(from: &str, to: &str) -> bool {
    (is_num(from) && is_num(to))
        || (from == "bool" && is_int(to))
        || (from == "char" && is_int(to))
        || (from == "u8" && to == "char")
}

fn cast_text(source: &str, range: (usize, usize), ty: &str) -> String {
    let text = &source[range.0..range.1];
    let atom = syn::parse_str::<syn::Expr>(text).is_ok_and(|e| {
        matches!(
            e,
            syn::Expr::Path(_)
                | syn::Expr::Lit(_)
                | syn::Expr::Call(_)
                | syn::Expr::MethodCall(_)
                | syn::Expr::Field(_)
                | syn::Expr::Index(_)
                | syn::Expr::Paren(_)
        )
    });
    let before = source[..range.0].trim_end();
    let after = source[range.1..].trim_start();
    let tight = before.ends_with(['-', '!', '&', '*', '.']) || after.starts_with(['<', '.', '[', '(']);
    if atom && !tight && !text.starts_with('-') {
        format!("{text} as {ty}")
    } else {
        format!("({text} as {ty})")
    }
}

fn type_edit(ast: &RustAst, d: &Diagnostic) -> Option<EditSpec> {
    let label = d.span.as_ref()?.label.clone().unwrap_or_default();
    let (text, range) = diag_text(ast, d)?;
    if d.code == "E0308" {
        let re = Regex::new(r"expected `([\w]+)`, found (`([\w]+)`|integer|floating-point number)").unwrap();
        let c = re.captures(&label).or_else(|| re.captures(&d.message))?;
        let to = c.get(1)?.as_str();
        match c.get(3).map(|m| m.as_str()) {
            Some(from) if castable(from, to) => Some(("numeric-cast", range, cast_text(&ast.source, range, to))),
            None if c.get(2)?.as_str() == "integer" && (to == "f64" || to == "f32") => {
                let lit = text.trim_end_matches(|c: char| c.is_alphabetic() || c == '_');
                if !lit.is_empty() && lit.chars().all(|c| c.is_ascii_digit() || c == '_') {
                    Some(("float-literal", range, format!("{lit}.0")))
                } else {
                    Some(("numeric-cast", range, cast_text(&ast.source, range, to)))
                }
            }
            None if c.get(2)?.as_str() == "floating-point number" && is_int(to) => {
                Some(("numeric-cast", range, cast_text(&ast.source, range, to)))
            }
            _ => None,
        }
    } else if d.code == "E0277" {
        let re = Regex::new(r"`(\w+) (?:\+|-|\*|/|%|\+=|-=|\*=|/=|%=|&|\||\^|<<|>>) (\w+)`").unwrap();
        let c = re.captures(&label)?;
        let (lhs_ty, rhs_ty) = (c.get(1)?.as_str(), c.get(2)?.as_str());
        if !castable(rhs_ty, lhs_ty) {
            return None;
        }
        let rhs = binary_rhs_at(ast, range)?;
        Some(("operand-cast", rhs, cast_text(&ast.source, rhs, lhs_ty)))
    } else {
        None
    }
}

/// Right operand of the binary expression whose operator is at `op`.
fn binary_rhs_at(ast: &RustAst, op: (usize, usize)) -> Option<(usize, usize)> {
    struct V {
        op: (usize, usize),
        found: Option<(usize, usize)>,
    }
    impl<'ast> Visit<'ast> for V {
        fn visit_expr_binary(&mut self, e: &'ast syn::ExprBinary) {
            let r = e.op.span().byte_range();
            if r.start <= self.op.0 && self.op.1 <= r.end.max(r.start + 1) {
                let rr = e.right.span().byte_range();
                let full = crate::rust::stream_range(tokens_of(&*e.right)).unwrap_or((rr.start, rr.end));
                self.found = Some(full);
            }
            syn::visit::visit_expr_binary(self, e);
        }
    }
    let mut v = V { op, found: None };
    v.visit_file(&ast.file);
    v.found
}

// ---------------------------------------------------------------- import

/// Innermost inline module containing `offset`: (content start, content end).
fn module_body_at(ast: &RustAst, offset: usize) -> Option<(usize, usize, Vec<syn::Item>)> {
    struct V {
        offset: usize,
        found: Option<(usize, usize, Vec<syn::Item>)>,
    }
    impl<'ast> Visit<'ast> for V {
        fn visit_item_mod(&mut self, m: &'ast syn::ItemMod) {
            if let Some((brace, items)) = &m.content {
                let open = brace.span.open().byte_range().end;
                let close = brace.span.close().byte_range().start;
                if open <= self.offset && self.offset < close {
                    self.found = Some((open, close, items.clone()));
                }
            }
            syn::visit::visit_item_mod(self, m);
        }
    }
    let mut v = V { offset, found: None };
    v.visit_file(&ast.file);
    v.found
}

fn import_edit(ast: &RustAst, d: &Diagnostic) -> Option<EditSpec> {
    let (at, _) = d.byte_range()?;
    if let Some(use_line) = import_suggestion(d) {
        let (start, items) = match module_body_at(ast, at) {
            Some((open, _, items)) => (open, items),
            None => (0, ast.file.items.clone()),
        };
        let present = items.iter().any(|i| {
            matches!(i, syn::Item::Use(_)) && crate::rust::compact(&tokens_of(i).to_string()) == crate::rust::compact(&use_line)
        });
        if present {
            return None;
        }
        let first_use = items
            .iter()
            .filter(|i| matches!(i, syn::Item::Use(_)))
            .filter_map(|i| crate::rust::stream_range(tokens_of(i)))
            .map(|r| r.0)
            .min();
        let (pos, text) = match first_use {
            Some(p) => {
                let line_start = ast.source[..p].rfind('\n').map_or(0, |i| i + 1);
                let indent = &ast.source[line_start..p];
                (p, format!("{use_line}\n{indent}"))
            }
            None if start == 0 => {
                let after_attrs = ast
                    .file
                    .attrs
                    .iter()
                    .filter_map(|a| crate::rust::stream_range(tokens_of(a)))
                    .map(|r| r.1)
                    .max();
                match after_attrs {
                    Some(p) => (p, format!("\n{use_line}")),
                    None => (0, format!("{use_line}\n")),
                }
            }
            None => (start, format!("\n    {use_line}")),
        };
        return Some(("insert-use", (pos, pos), text));
    }
    // Redefined import: drop the `use` item when it imports a single name.
    let item = crate::rust::all_items(ast)
        .into_iter()
        .filter(|i| i.kind == crate::rust::ItemKind::Use && i.contains(at))
        .min_by_key(|i| i.span.1 - i.span.0)?;
    if item.source_text.contains('{') || item.source_text.contains('*') {
        return None;
    }
    let mut end = item.span.1;
    let rest = &ast.source[end..];
    let ws = rest.len() - rest.trim_start_matches([' ', '\t']).len();
    end += ws;
    if ast.source[end..].starts_with('\n') {
        end += 1;
    }
    Some(("remove-duplicate-use", (item.span.0, end), String::new()))
}

// ---------------------------------------------------------------- rename

#[derive(Debug, Clone)]
struct Tok {
    text: String,
    range: (usize, usize),
    punct: Option<char>,
}

/// Flat token list; groups contribute their delimiters as punctuation.
fn flatten(source: &str) -> Vec<Tok> {
    fn walk(ts: TokenStream, out: &mut Vec<Tok>) {
        for tt in ts {
            match tt {
                TokenTree::Group(g) => {
                    let (o, c) = match g.delimiter() {
                        Delimiter::Parenthesis => ('(', ')'),
                        Delimiter::Brace => ('{', '}'),
                        Delimiter::Bracket => ('[', ']'),
                        Delimiter::None => (' ', ' '),
                    };
                    let r = g.span_open().byte_range();
                    out.push(Tok {
                        text: o.to_string(),
                        range: (r.start, r.end),
                        punct: Some(o),
                    });
                    walk(g.stream(), out);
                    let r = g.span_close().byte_range();
                    out.push(Tok {
                        text: c.to_string(),
                        range: (r.start, r.end),
                        punct: Some(c),
                    });
                }
                TokenTree::Ident(i) => {
                    let r = i.span().byte_range();
                    out.push(Tok {
                        text: i.to_string(),
                        range: (r.start, r.end),
                        punct: None,
                    });
                }
                TokenTree::Punct(p) => {
                    let r = p.span().byte_range();
                    out.push(Tok {
                        text: p.as_char().to_string(),
                        range: (r.start, r.end),
                        punct: Some(p.as_char()),
                    });
                }
                TokenTree::Literal(l) => {
                    let r = l.span().byte_range();
                    out.push(Tok {
                        text: l.to_string(),
                        range: (r.start, r.end),
                        punct: None,
                    });
                }
            }
        }
    }
    let mut out = Vec::new();
    if let Ok(ts) = TokenStream::from_str(source) {
        walk(ts, &mut out);
    }
    out
}

/// First `name_N` (N from 1) that is not an identifier anywhere in the file.
fn fresh_name(toks: &[Tok], name: &str) -> String {
    let used: BTreeSet<&str> = toks.iter().filter(|t| t.punct.is_none()).map(|t| t.text.as_str()).collect();
    (1..)
        .map(|n| format!("{name}_{n}"))
        .find(|c| !used.contains(c.as_str()))
        .unwrap()
}

/// Uses of a local variable `name` within `scope`: identifier tokens not
/// reached through `.` or `::` and not followed by `::`, `!` or `(`.
fn local_uses(toks: &[Tok], name: &str, scope: (usize, usize)) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        if t.punct.is_some() || t.text != name || t.range.0 < scope.0 || t.range.1 > scope.1 {
            continue;
        }
        let prev = i.checked_sub(1).and_then(|j| toks[j].punct);
        let next = toks.get(i + 1).and_then(|t| t.punct);
        let next2 = toks.get(i + 2).and_then(|t| t.punct);
        if prev == Some('.') || prev == Some(':') || next == Some('!') || next == Some('(') {
            continue;
        }
        if next == Some(':') && next2 == Some(':') {
            continue;
        }
        out.push(t.range);
    }
    out
}

/// Smallest block or match arm around `at`; for blocks the scope starts at `at`.
fn binding_scope(ast: &RustAst, at: usize) -> Option<(usize, usize)> {
    struct V {
        at: usize,
        best: Option<(usize, usize)>,
    }
    impl V {
        fn offer(&mut self, r: (usize, usize)) {
            if r.0 <= self.at && self.at < r.1 && self.best.is_none_or(|b| r.1 - r.0 < b.1 - b.0) {
                self.best = Some(r);
            }
        }
    }
    impl<'ast> Visit<'ast> for V {
        fn visit_block(&mut self, b: &'ast syn::Block) {
            let r = (b.brace_token.span.open().byte_range().start, b.brace_token.span.close().byte_range().end);
            self.offer(r);
            syn::visit::visit_block(self, b);
        }
        fn visit_arm(&mut self, a: &'ast syn::Arm) {
            if let Some(r) = crate::rust::stream_range(tokens_of(a)) {
                self.offer(r);
            }
            syn::visit::visit_arm(self, a);
        }
        fn visit_expr_closure(&mut self, c: &'ast syn::ExprClosure) {
            if let Some(r) = crate::rust::stream_range(tokens_of(c)) {
                self.offer(r);
            }
            syn::visit::visit_expr_closure(self, c);
        }
    }
    let mut v = V { at, best: None };
    v.visit_file(&ast.file);
    v.best.map(|(a, b)| (a.max(at), b))
}

fn rename_edit(ast: &RustAst, toks: &[Tok], d: &Diagnostic) -> Option<EditSpec> {
    let (text, range) = diag_text(ast, d)?;
    if !is_ident(text) {
        return None;
    }
    match d.code.as_str() {
        "E0530" => {
            let scope = binding_scope(ast, range.0)?;
            let uses = local_uses(toks, text, scope);
            if uses.first() != Some(&range) {
                return None;
            }
            let new = fresh_name(toks, text);
            // A single edit spanning the scope keeps the rename atomic.
            let start = range.0;
            let end = uses.last()?.1;
            let mut body = ast.source[start..end].to_string();
            for u in uses.iter().rev() {
                body.replace_range(u.0 - start..u.1 - start, &new);
            }
            Some(("shadowed-binding", (start, end), body))
        }
        "E0428" => {
            let items = crate::rust::all_items(ast);
            let second = items
                .iter()
                .filter(|i| i.contains(range.0))
                .min_by_key(|i| i.span.1 - i.span.0)?;
            let first = items.iter().find(|i| {
                i.kind == second.kind && i.name == second.name && i.span.0 < second.span.0
            });
            if let Some(first) = first {
                if crate::rust::compact(&first.source_text) == crate::rust::compact(&second.source_text) {
                    let mut end = second.span.1;
                    if ast.source[end..].starts_with('\n') {
                        end += 1;
                    }
                    return Some(("remove-duplicate-item", (second.span.0, end), String::new()));
                }
            }
            Some(("redefined-item", range, fresh_name(toks, text)))
        }
        "E0415" | "E0416" => Some(("duplicate-binding", range, fresh_name(toks, text))),
        _ => None,
    }
}

/// Rust keywords that C programs may use as identifiers.
pub const RUST_ONLY_KEYWORDS: &[&str] = &[
    "abstract", "as", "async", "await", "become", "box", "crate", "dyn", "final", "fn", "gen", "impl", "in", "let",
    "loop", "macro", "match", "mod", "move", "mut", "override", "priv", "pub", "ref", "self", "super", "trait",
    "try", "type", "typeof", "unsafe", "unsized", "use", "virtual", "where", "yield",
];

/// Keywords safe to rename inside macro arguments as well.
const MACRO_SAFE_KEYWORDS: &[&str] = &[
    "abstract", "become", "box", "final", "fn", "gen", "impl", "loop", "macro", "mod", "override", "priv", "ref",
    "trait", "try", "type", "typeof", "unsized", "use", "virtual", "where", "yield",
];

/// Rename keyword-named identifiers that stop the parser, `type` becoming
/// `type_`. Returns the edits applied, each with the source after it.
pub fn escape_keywords(source: &str) -> Vec<AppliedFix> {
    let mut out = Vec::new();
    let mut cur = source.to_string();
    let mut renamed: Vec<String> = Vec::new();
    for _ in 0..64 {
        let Err(f) = parse_rust(&cur) else { break };
        let toks = flatten(&cur);
        let Some(tok) = toks.iter().find(|t| t.range.0 <= f.offset && f.offset < t.range.1.max(t.range.0 + 1)) else {
            break;
        };
        let kw = tok.text.clone();
        if !RUST_ONLY_KEYWORDS.contains(&kw.as_str()) {
            // The failure can sit one token past the keyword.
            break;
        }
        let new = format!("{kw}_");
        let range = tok.range;
        let before = cur[range.0..range.1].to_string();
        cur.replace_range(range.0..range.1, &new);
        if !renamed.contains(&kw) {
            renamed.push(kw);
        }
        out.push(AppliedFix {
            class: RuleClass::Rename,
            rule: "rename/keyword".into(),
            span: range,
            before,
            after: new,
            source: cur.clone(),
        });
    }
    if parse_rust(&cur).is_err() {
        return Vec::new();
    }
    // Uses inside macro arguments are not seen by the parser.
    for kw in renamed.iter().filter(|k| MACRO_SAFE_KEYWORDS.contains(&k.as_str())) {
        let toks = flatten(&cur);
        let hits: Vec<(usize, usize)> = macro_arg_ranges(&toks)
            .into_iter()
            .flat_map(|(a, b)| local_uses(&toks, kw, (a, b)))
            .collect();
        for r in hits.into_iter().rev() {
            let mut next = cur.clone();
            next.replace_range(r.0..r.1, &format!("{kw}_"));
            if parse_rust(&next).is_ok() {
                cur = next;
                out.push(AppliedFix {
                    class: RuleClass::Rename,
                    rule: "rename/keyword".into(),
                    span: r,
                    before: kw.clone(),
                    after: format!("{kw}_"),
                    source: cur.clone(),
                });
            }
        }
    }
    out
}

fn macro_arg_ranges(toks: &[Tok]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 1..toks.len() {
        if toks[i - 1].punct == Some('!') && matches!(toks[i].punct, Some('(') | Some('[') | Some('{')) {
            let open = toks[i].punct.unwrap();
            let close = match open {
                '(' => ')',
                '[' => ']',
                _ => '}',
            };
            let mut depth = 0usize;
            for t in &toks[i..] {
                if t.punct == Some(open) {
                    depth += 1;
                } else if t.punct == Some(close) {
                    depth -= 1;
                    if depth == 0 {
                        out.push((toks[i].range.1, t.range.0));
                        break;
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------- unsafe

fn unsafe_edit(ast: &RustAst, d: &Diagnostic) -> Option<EditSpec> {
    let (at, end) = d.byte_range()?;
    struct V {
        at: (usize, usize),
        best: Option<((usize, usize), Option<(usize, usize)>)>,
    }
    impl<'ast> Visit<'ast> for V {
        fn visit_stmt(&mut self, s: &'ast syn::Stmt) {
            if let Some(r) = crate::rust::stream_range(tokens_of(s)) {
                if r.0 <= self.at.0 && self.at.1 <= r.1 && self.best.is_none_or(|(b, _)| r.1 - r.0 <= b.1 - b.0) {
                    let init = match s {
                        syn::Stmt::Local(l) => l
                            .init
                            .as_ref()
                            .and_then(|i| crate::rust::stream_range(tokens_of(&*i.expr))),
                        _ => None,
                    };
                    let ok = !matches!(s, syn::Stmt::Item(_))
                        && !matches!(s, syn::Stmt::Local(l) if l.init.is_none() || l.init.as_ref().is_some_and(|i| i.diverge.is_some()));
                    if ok {
                        self.best = Some((r, init));
                    }
                }
            }
            syn::visit::visit_stmt(self, s);
        }
    }
    let mut v = V {
        at: (at, end),
        best: None,
    };
    v.visit_file(&ast.file);
    let (stmt, init) = v.best?;
    let target = match init {
        Some(i) if i.0 <= at && end <= i.1 => i,
        Some(_) => return None,
        None => stmt,
    };
    let text = &ast.source[target.0..target.1];
    Some(("wrap-unsafe", target, format!("unsafe {{ {text} }}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::diagnostic::{DiagSpan, Severity};

    fn diag(src: &str, code: &str, needle: &str, nth: usize, msg: &str, label: &str, sugg: Option<&str>) -> Diagnostic {
        let start = src.match_indices(needle).nth(nth).unwrap().0;
        Diagnostic {
            code: code.into(),
            severity: Severity::Error,
            message: msg.into(),
            span: Some(DiagSpan {
                file: "src/main.rs".into(),
                byte_start: start,
                byte_end: start + needle.len(),
                line: 1,
                column: 1,
                label: Some(label.into()),
            }),
            suggestion: sugg.map(str::to_string),
            notes: vec![],
        }
    }

    fn ctx_for(c: &str) -> RuleContext {
        RuleContext::new(&crate::c::project::analyze_source("t.c", c).unwrap().symbols)
    }

    #[test]
    fn builtin_table_routes() {
        let t = RoutingTable::builtin();
        assert_eq!(t.codes["E0133"], RuleClass::Unsafe);
        let mut d = diag("x", "E0599", "x", 0, "no method", "", None);
        assert_eq!(t.route(&d), None);
        d.suggestion = Some("use std::io::BufRead;\n\n".into());
        assert_eq!(t.route(&d), Some(RuleClass::Import));
        d.severity = Severity::Warning;
        assert_eq!(t.route(&d), None);
        assert!(RoutingTable::parse("version = 2\n[codes]\n").is_err());
    }

    #[test]
    fn resolves_sigma_names_and_enum_constants() {
        let ctx = ctx_for("int g_max = 3; enum color { RED, GREEN }; int main(void){return g_max + RED;}");
        let src = "const G_MAX: i32 = 3;\nenum Color { Red, Green }\nfn main() { let a = g_max; let b = RED; }\n";
        let d1 = diag(src, "E0425", "g_max", 0, "cannot find value `g_max` in this scope", "", None);
        let d2 = diag(src, "E0425", "RED", 0, "cannot find value `RED` in this scope", "", None);
        let out = apply_rule_fixes(src, &[d1, d2], &RoutingTable::builtin(), &ctx);
        assert!(out.source.contains("let a = G_MAX;"), "{}", out.source);
        assert!(out.source.contains("let b = Color::Red;"));
        assert_eq!(out.fixed.len(), 2);
        assert!(out.remaining.is_empty());
    }

    #[test]
    fn unknown_names_are_left() {
        let ctx = ctx_for("int main(void){return 0;}");
        let src = "fn main() { let a = zzz; }\n";
        let d = diag(src, "E0425", "zzz", 0, "cannot find value", "", None);
        let out = apply_rule_fixes(src, &[d], &RoutingTable::builtin(), &ctx);
        assert_eq!(out.source, src);
        assert_eq!(out.remaining.len(), 1);
    }

    #[test]
    fn casts_and_float_literals() {
        let src = "fn f(a: i64) -> i64 { a }\nfn main() { let x: i32 = 5; let y: i64 = f(x); let z = x + y; let q: f64 = 2; }\n";
        let ds = vec![
            diag(src, "E0308", "x", 1, "mismatched types", "expected `i64`, found `i32`", Some(".into()")),
            diag(src, "E0308", "y", 1, "mismatched types", "expected `i32`, found `i64`", None),
            diag(src, "E0277", "+", 0, "cannot add `i64` to `i32`", "no implementation for `i32 + i64`", None),
            diag(src, "E0308", "2", 1, "mismatched types", "expected `f64`, found integer", Some(".0")),
        ];
        let out = apply_rule_fixes(src, &ds, &RoutingTable::builtin(), &RuleContext::default());
        assert!(out.source.contains("f(x as i64)"), "{}", out.source);
        assert!(out.source.contains("let z = x + y as i32;"), "{}", out.source);
        assert!(out.source.contains("let q: f64 = 2.0;"));
        assert_eq!(out.fixed.len(), 4);
    }

    #[test]
    fn import_insertion_and_duplicate_removal() {
        let src = "use std::fmt;\nuse std::fmt;\nfn main() { let m: HashMap<i32, i32> = HashMap::new(); }\n";
        let ds = vec![
            diag(src, "E0412", "HashMap", 0, "cannot find type", "", Some("use std::collections::HashMap;\n\n")),
            diag(src, "E0433", "HashMap", 1, "failed to resolve", "", Some("use std::collections::HashMap;\n\n")),
            diag(src, "E0252", "std::fmt", 1, "the name `fmt` is defined multiple times", "", None),
        ];
        let out = apply_rule_fixes(src, &ds, &RoutingTable::builtin(), &RuleContext::default());
        assert_eq!(
            out.source,
            "use std::collections::HashMap;\nuse std::fmt;\nfn main() { let m: HashMap<i32, i32> = HashMap::new(); }\n"
        );
        assert_eq!(out.fixed.len(), 3);
    }

    #[test]
    fn import_goes_into_enclosing_module() {
        let src = "pub mod a {\n    pub fn f() { let v: Vec<i32> = Vec::new(); let _ = io::stdin(); }\n}\nfn main() {}\n";
        let d = diag(src, "E0433", "io", 0, "failed to resolve", "", Some("use std::io;\n"));
        let out = apply_rule_fixes(src, &[d], &RoutingTable::builtin(), &RuleContext::default());
        assert!(out.source.starts_with("pub mod a {\n    use std::io;\n    pub fn f()"), "{}", out.source);
        assert!(parse_rust(&out.source).is_ok());
    }

    #[test]
    fn shadowed_static_is_renamed_in_scope() {
        let src = "static total: i32 = 0;\nfn main() {\n    let total = 3;\n    println!(\"{}\", total);\n}\nfn g() -> i32 { total }\n";
        let d = diag(src, "E0530", "total", 1, "let bindings cannot shadow statics", "", None);
        let out = apply_rule_fixes(src, &[d], &RoutingTable::builtin(), &RuleContext::default());
        assert!(out.source.contains("let total_1 = 3;"));
        assert!(out.source.contains("println!(\"{}\", total_1);"));
        assert!(out.source.contains("fn g() -> i32 { total }"));
    }

    #[test]
    fn duplicate_items() {
        let src = "fn a() {}\nfn a() {}\nstruct S;\nstruct S(i32);\nfn main() {}\n";
        let ds = vec![
            diag(src, "E0428", "a", 1, "the name `a` is defined multiple times", "", None),
            diag(src, "E0428", "S", 1, "the name `S` is defined multiple times", "", None),
        ];
        let out = apply_rule_fixes(src, &ds, &RoutingTable::builtin(), &RuleContext::default());
        assert_eq!(out.source, "fn a() {}\nstruct S;\nstruct S_1(i32);\nfn main() {}\n");
    }

    #[test]
    fn unsafe_wraps_statement_or_initializer() {
        let src = "static mut C: i32 = 0;\nfn main() {\n    C += 1;\n    let w = C * 2;\n}\n";
        let ds = vec![
            diag(src, "E0133", "C", 1, "use of mutable static is unsafe", "", None),
            diag(src, "E0133", "C", 2, "use of mutable static is unsafe", "", None),
        ];
        let out = apply_rule_fixes(src, &ds, &RoutingTable::builtin(), &RuleContext::default());
        assert!(out.source.contains("unsafe { C += 1; }"), "{}", out.source);
        assert!(out.source.contains("let w = unsafe { C * 2 };"));
    }

    #[test]
    fn keyword_identifiers_are_escaped() {
        let src = "fn main() {\n    let type = 3;\n    let x = type + 1;\n    println!(\"{}\", type);\n}\n";
        let fixes = escape_keywords(src);
        let last = &fixes.last().unwrap().source;
        assert!(last.contains("let type_ = 3;"));
        assert!(last.contains("let x = type_ + 1;"));
        assert!(last.contains("println!(\"{}\", type_);"), "{last}");
        assert!(escape_keywords("fn main() { let = ; }").is_empty());
    }

    #[test]
    fn unparsable_edits_roll_back() {
        let src = "fn main() { let a = &x; }\n";
        // A cast on a borrowed operand parenthesises; a bogus span that
        // splits a token must not be applied.
        let mut d = diag(src, "E0308", "x;", 0, "mismatched types", "expected `i64`, found `i32`", None);
        d.span.as_mut().unwrap().byte_end += 1;
        let out = apply_rule_fixes(src, &[d], &RoutingTable::builtin(), &RuleContext::default());
        assert_eq!(out.source, src);
        assert_eq!(out.regressions.len(), 1);
        assert_eq!(out.remaining.len(), 1);
    }
}
