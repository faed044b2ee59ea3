//! Program assembly from a translation session.

use std::collections::BTreeMap;

use proc_macro2::TokenTree;
use serde::{Deserialize, Serialize};

use super::{EventKind, TranslationSession, GROUPS};
use crate::c::project::ProgramStructure;
use crate::rust::{dedup_items_lenient, extract_items, parse_rust, tokens_of, ItemKind, RustItem};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assembled {
    pub source: String,
    /// Per C file Rust text (one entry for single-file programs).
    pub files: BTreeMap<String, String>,
    /// Same-name items that differ, as `kind name`.
    pub conflicts: Vec<String>,
    pub item_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Uses,
    Types,
    Globals,
    Other,
    Functions,
}

fn section_of(kind: ItemKind) -> Section {
    match kind {
        ItemKind::Use => Section::Uses,
        ItemKind::Struct | ItemKind::Enum | ItemKind::TypeAlias | ItemKind::Trait | ItemKind::Impl => Section::Types,
        ItemKind::Static | ItemKind::Const => Section::Globals,
        ItemKind::Function => Section::Functions,
        ItemKind::Module | ItemKind::Other => Section::Other,
    }
}

/// Split a chunk into items. Unparsable chunks stay whole.
fn items_of(text: &str, fallback: Section) -> Vec<(Section, RustItem)> {
    match parse_rust(text) {
        Ok(ast) => extract_items(&ast)
            .into_iter()
            .map(|i| (section_of(i.kind), i))
            .collect(),
        Err(_) if text.trim().is_empty() => Vec::new(),
        Err(_) => vec![(
            fallback,
            RustItem {
                kind: ItemKind::Other,
                name: String::new(),
                span: (0, text.len()),
                source_text: text.trim().to_string(),
            },
        )],
    }
}

/// Chunks of a session in emission order, optionally restricted to one file.
fn chunks<'a>(session: &'a TranslationSession, file: Option<&str>) -> Vec<(Section, &'a str)> {
    let keep = |f: &str| file.is_none_or(|x| x == f);
    let mut out = Vec::new();
    for s in session.support.iter().filter(|s| keep(&s.file)) {
        out.push((Section::Types, s.text.as_str()));
    }
    for (group, _) in GROUPS {
        for s in session.rust_symbols.iter().filter(|s| s.group == *group && keep(&s.file)) {
            out.push((Section::Types, s.text.as_str()));
        }
    }
    for f in session.functions.iter().filter(|f| keep(&f.file)) {
        out.push((Section::Functions, f.text.as_str()));
    }
    out
}

fn assemble_items(chunks: &[(Section, &str)]) -> (Vec<RustItem>, Vec<String>) {
    let mut all: Vec<(Section, usize, RustItem)> = Vec::new();
    for (fallback, text) in chunks {
        for (sec, item) in items_of(text, *fallback) {
            let n = all.len();
            all.push((sec, n, item));
        }
    }
    all.sort_by_key(|(s, n, _)| (*s, *n));
    let (items, conflicts) = dedup_items_lenient(all.into_iter().map(|(_, _, i)| i).collect());
    let conflicts = conflicts
        .into_iter()
        .map(|c| format!("{} {}", c.kind.as_str(), c.name))
        .collect();
    (items, conflicts)
}

fn join(items: &[RustItem]) -> String {
    let mut out = items
        .iter()
        .map(|i| i.source_text.trim_end())
        .collect::<Vec<_>>()
        .join("\n\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

fn has_main(items: &[RustItem]) -> bool {
    items.iter().any(|i| i.kind == ItemKind::Function && i.name == "main")
}

/// Single source file: uses, types, globals, then functions in
/// translation order, without duplicates.
pub fn assemble(session: &mut TranslationSession, structure: &ProgramStructure) -> Assembled {
    let (items, conflicts) = assemble_items(&chunks(session, None));
    let mut source = join(&items);
    if structure.has_main() && !has_main(&items) {
        if !source.is_empty() {
            source.push('\n');
        }
        source.push_str("fn main() {}\n");
    }
    session.log(EventKind::Assembled {
        items: items.len(),
        conflicts: conflicts.clone(),
    });
    let file = structure
        .functions
        .first()
        .map(|f| f.file.clone())
        .unwrap_or_else(|| structure.name.clone());
    Assembled {
        files: BTreeMap::from([(file, source.clone())]),
        source,
        conflicts,
        item_count: items.len(),
    }
}

/// Rust module name for a C file name, e.g. `list.h` -> `list_h`.
pub fn module_name(file: &str) -> String {
    let base = file.rsplit('/').next().unwrap_or(file);
    let mut s: String = base
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert(0, 'm');
    }
    if crate::c::parser::is_keyword(&s) || syn::parse_str::<syn::Ident>(&s).is_err() {
        s.push('_');
    }
    s
}

/// Start offsets of item or field declarations that lack a visibility.
fn widen_points(src: &str) -> Vec<usize> {
    let Ok(file) = syn::parse_file(src) else {
        return Vec::new();
    };
    let first_after_attrs = |ts: proc_macro2::TokenStream| -> Option<usize> {
        let toks: Vec<TokenTree> = ts.into_iter().collect();
        let mut i = 0;
        while let Some(TokenTree::Punct(p)) = toks.get(i) {
            if p.as_char() == '#' {
                i += 2;
            } else {
                break;
            }
        }
        toks.get(i).map(|t| t.span().byte_range().start)
    };
    let inherited = |v: &syn::Visibility| matches!(v, syn::Visibility::Inherited);
    let mut points = Vec::new();
    let fields = |fs: &syn::Fields, points: &mut Vec<usize>| {
        for f in fs {
            if inherited(&f.vis) {
                points.extend(first_after_attrs(tokens_of(f)));
            }
        }
    };
    for item in &file.items {
        let vis = match item {
            syn::Item::Fn(i) => Some(&i.vis),
            syn::Item::Struct(i) => {
                fields(&i.fields, &mut points);
                Some(&i.vis)
            }
            syn::Item::Union(i) => {
                fields(&syn::Fields::Named(i.fields.clone()), &mut points);
                Some(&i.vis)
            }
            syn::Item::Enum(i) => Some(&i.vis),
            syn::Item::Static(i) => Some(&i.vis),
            syn::Item::Const(i) => Some(&i.vis),
            syn::Item::Type(i) => Some(&i.vis),
            syn::Item::Trait(i) => Some(&i.vis),
            _ => None,
        };
        if let Some(v) = vis {
            if inherited(v) {
                points.extend(first_after_attrs(tokens_of(item)));
            }
        }
        if let syn::Item::Impl(imp) = item {
            if imp.trait_.is_none() {
                for ii in &imp.items {
                    if let syn::ImplItem::Fn(f) = ii {
                        if inherited(&f.vis) {
                            points.extend(first_after_attrs(tokens_of(f)));
                        }
                    }
                }
            }
        }
    }
    points.sort_unstable();
    points.dedup();
    points
}

/// Make items, struct fields and inherent methods `pub` so that sibling
/// modules can use them.
pub fn widen_visibility(src: &str) -> String {
    let mut out = src.to_string();
    for p in widen_points(src).into_iter().rev() {
        out.insert_str(p, "pub ");
    }
    out
}

fn indent(text: &str) -> String {
    text.lines()
        .map(|l| if l.is_empty() { String::new() } else { format!("    {l}") })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Single compilation root with one inline module per C file. Every module
/// glob-imports the crate root, which glob-re-exports every module.
pub fn assemble_project(session: &mut TranslationSession, structure: &ProgramStructure) -> Assembled {
    let mut files: Vec<String> = structure.file_graph.order.clone();
    for f in session
        .functions
        .iter()
        .map(|f| &f.file)
        .chain(session.rust_symbols.iter().map(|s| &s.file))
        .chain(session.support.iter().map(|s| &s.file))
    {
        if !files.contains(f) {
            files.push(f.clone());
        }
    }
    let mut per_file = BTreeMap::new();
    let mut conflicts = Vec::new();
    let mut item_count = 0;
    let mut modules = Vec::new();
    let mut main_module = None;
    for file in &files {
        let (items, c) = assemble_items(&chunks(session, Some(file)));
        if items.is_empty() {
            continue;
        }
        item_count += items.len();
        conflicts.extend(c.into_iter().map(|c| format!("{file}: {c}")));
        let text = widen_visibility(&join(&items));
        let m = module_name(file);
        if has_main(&items) && main_module.is_none() {
            main_module = Some(m.clone());
        }
        modules.push((m, text.clone()));
        per_file.insert(file.clone(), text);
    }
    let mut source = String::new();
    for (m, text) in &modules {
        source.push_str(&format!(
            "pub mod {m} {{\n    #![allow(unused_imports)]\n    use crate::*;\n\n{}\n}}\npub use {m}::*;\n\n",
            indent(text.trim_end())
        ));
    }
    match main_module {
        Some(m) => source.push_str(&format!("fn main() {{\n    {m}::main();\n}}\n")),
        None if structure.has_main() => source.push_str("fn main() {}\n"),
        None => {}
    }
    session.log(EventKind::Assembled {
        items: item_count,
        conflicts: conflicts.clone(),
    });
    Assembled {
        source,
        files: per_file,
        conflicts,
        item_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translate::{RustSymbol, SupportItem, TranslatedFunction};

    fn tf(key: &str, file: &str, text: &str) -> TranslatedFunction {
        TranslatedFunction {
            key: key.into(),
            name: key.into(),
            file: file.into(),
            text: text.into(),
            attempts: 1,
            report: Default::default(),
            flagged: false,
        }
    }

    fn structure(src: &str) -> ProgramStructure {
        crate::c::project::analyze_source("t.c", src).unwrap()
    }

    #[test]
    fn order_and_dedup() {
        let p = structure("int foo(void) { return 1; }\nint main(void) { return foo(); }\n");
        let mut s = TranslationSession::new("t");
        s.support.push(SupportItem { file: "t.c".into(), text: "use std::io;".into() });
        s.functions.push(tf("foo", "t.c", "use std::io;\nfn foo() -> i32 { 1 }"));
        s.functions.push(tf("main", "t.c", "fn main() { std::process::exit(foo()); }"));
        let a = assemble(&mut s, &p);
        assert_eq!(a.source.matches("use std::io;").count(), 1);
        assert!(a.source.find("fn foo").unwrap() < a.source.find("fn main").unwrap());
        assert!(a.source.starts_with("use std::io;"));
        assert!(parse_rust(&a.source).is_ok());
    }

    #[test]
    fn empty_session_gets_main_stub_only_with_c_main() {
        let mut s = TranslationSession::new("t");
        assert_eq!(assemble(&mut s, &structure("int main(void) { return 0; }\n")).source, "fn main() {}\n");
        let mut s = TranslationSession::new("t");
        assert_eq!(assemble(&mut s, &structure("int f(void) { return 0; }\n")).source, "");
    }

    #[test]
    fn types_precede_globals_and_functions() {
        let p = structure("int g;\nint main(void) { return g; }\n");
        let mut s = TranslationSession::new("t");
        s.functions.push(tf("main", "t.c", "fn main() {}"));
        s.rust_symbols.push(RustSymbol { key: "g".into(), group: "globals".into(), file: "t.c".into(), text: "static G: i32 = 0;".into() });
        s.rust_symbols.push(RustSymbol { key: "struct N".into(), group: "types".into(), file: "t.c".into(), text: "struct N;".into() });
        let a = assemble(&mut s, &p);
        assert_eq!(a.source, "struct N;\n\nstatic G: i32 = 0;\n\nfn main() {}\n");
    }

    #[test]
    fn visibility_widening() {
        let src = "#[derive(Debug)]\nstruct A {\n    x: i32,\n    pub y: i32,\n}\nfn f() {}\npub fn g() {}\nimpl A { fn new() -> Self { A { x: 0, y: 0 } } }\n";
        let out = widen_visibility(src);
        assert_eq!(
            out,
            "#[derive(Debug)]\npub struct A {\n    pub x: i32,\n    pub y: i32,\n}\npub fn f() {}\npub fn g() {}\nimpl A { pub fn new() -> Self { A { x: 0, y: 0 } } }\n"
        );
    }

    #[test]
    fn module_names() {
        assert_eq!(module_name("list.h"), "list_h");
        assert_eq!(module_name("src/2d.c"), "m2d_c");
    }
}
