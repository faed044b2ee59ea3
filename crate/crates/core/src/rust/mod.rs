//! Parsing and inspection of generated Rust.

mod categories;
mod loc;

use std::collections::HashSet;

use proc_macro2::{TokenStream, TokenTree};
use quote::ToTokens;
use serde::{Deserialize, Serialize};
use syn::visit::Visit;
use thiserror::Error;

pub use categories::{normalize_c_block, normalize_rust_block, normalize_statements, Language, StatementCategory};
pub use loc::{count_unsafe_lines, LineCounts};

pub struct RustAst {
    pub source: String,
    pub file: syn::File,
}

impl std::fmt::Debug for RustAst {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RustAst").field("bytes", &self.source.len()).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{line}:{column}: {message}")]
pub struct ParseFailure {
    /// Byte offset of the first unparsable position.
    pub offset: usize,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
    pub message: String,
}

pub fn parse_rust(source: &str) -> Result<RustAst, ParseFailure> {
    match syn::parse_file(source) {
        Ok(file) => Ok(RustAst {
            source: source.to_string(),
            file,
        }),
        Err(e) => Err(failure(source, &e)),
    }
}

fn failure(source: &str, e: &syn::Error) -> ParseFailure {
    let message = e.to_string();
    let start = e.span().start();
    let offset = if message.contains("end of input") {
        source.len()
    } else {
        offset_of(source, start.line, start.column)
    };
    let (line, column) = line_col(source, offset);
    ParseFailure {
        offset,
        line,
        column,
        message,
    }
}

/// Byte offset of a 1-based line and 0-based character column.
pub fn offset_of(source: &str, line: usize, column: usize) -> usize {
    let mut off = 0;
    for (i, l) in source.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return off
                + l.char_indices()
                    .nth(column)
                    .map_or(l.len(), |(b, _)| b);
        }
        off += l.len();
    }
    source.len()
}

/// 1-based line and character column of a byte offset.
pub fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(source.len());
    let before = &source[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemKind {
    Function,
    Struct,
    Enum,
    Trait,
    Impl,
    Use,
    Static,
    Const,
    TypeAlias,
    Module,
    Other,
}

impl ItemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ItemKind::Function => "function",
            ItemKind::Struct => "struct",
            ItemKind::Enum => "enum",
            ItemKind::Trait => "trait",
            ItemKind::Impl => "impl",
            ItemKind::Use => "use",
            ItemKind::Static => "static",
            ItemKind::Const => "const",
            ItemKind::TypeAlias => "type-alias",
            ItemKind::Module => "module",
            ItemKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RustItem {
    pub kind: ItemKind,
    pub name: String,
    /// Byte range in the source, including attributes and doc comments.
    pub span: (usize, usize),
    pub source_text: String,
}

impl RustItem {
    pub fn contains(&self, offset: usize) -> bool {
        self.span.0 <= offset && offset < self.span.1
    }
}

/// Byte range covered by a token stream.
pub fn stream_range(ts: TokenStream) -> Option<(usize, usize)> {
    let mut lo = usize::MAX;
    let mut hi = 0;
    for tt in ts {
        let r = tt.span().byte_range();
        lo = lo.min(r.start);
        hi = hi.max(r.end);
    }
    (lo < hi).then_some((lo, hi))
}

pub fn tokens_of<T: ToTokens>(t: &T) -> TokenStream {
    t.to_token_stream()
}

pub fn item_kind_and_name(item: &syn::Item) -> (ItemKind, String) {
    use syn::Item::*;
    match item {
        Fn(f) => (ItemKind::Function, f.sig.ident.to_string()),
        Struct(s) => (ItemKind::Struct, s.ident.to_string()),
        Union(u) => (ItemKind::Struct, u.ident.to_string()),
        Enum(e) => (ItemKind::Enum, e.ident.to_string()),
        Trait(t) => (ItemKind::Trait, t.ident.to_string()),
        Impl(i) => (ItemKind::Impl, impl_name(i)),
        Use(u) => (ItemKind::Use, use_path(&u.tree)),
        Static(s) => (ItemKind::Static, s.ident.to_string()),
        Const(c) => (ItemKind::Const, c.ident.to_string()),
        Type(t) => (ItemKind::TypeAlias, t.ident.to_string()),
        Mod(m) => (ItemKind::Module, m.ident.to_string()),
        Macro(m) => (
            ItemKind::Other,
            m.ident
                .as_ref()
                .map_or_else(|| path_text(&m.mac.path), |i| i.to_string()),
        ),
        ExternCrate(e) => (ItemKind::Other, e.ident.to_string()),
        _ => (ItemKind::Other, String::new()),
    }
}

fn path_text(p: &syn::Path) -> String {
    p.segments
        .iter()
        .map(|s| s.ident.to_string())
        .collect::<Vec<_>>()
        .join("::")
}

fn type_text(t: &syn::Type) -> String {
    compact(&tokens_of(t).to_string())
}

/// Token text with the spaces `TokenStream::to_string` inserts around
/// punctuation removed where Rust never needs them.
pub fn compact(s: &str) -> String {
    let mut out = s.to_string();
    for (a, b) in [(" :: ", "::"), (" < ", "<"), (" >", ">"), ("& ", "&"), (" ,", ","), ("* ", "*")] {
        out = out.replace(a, b);
    }
    out
}

fn impl_name(i: &syn::ItemImpl) -> String {
    let ty = type_text(&i.self_ty);
    match &i.trait_ {
        Some((_, path, _)) => format!("impl {} for {}", compact(&tokens_of(path).to_string()), ty),
        None => format!("impl {ty}"),
    }
}

/// Compact text of a use tree, e.g. `std::io::{Read, Write}`.
pub fn use_path(tree: &syn::UseTree) -> String {
    match tree {
        syn::UseTree::Path(p) => format!("{}::{}", p.ident, use_path(&p.tree)),
        syn::UseTree::Name(n) => n.ident.to_string(),
        syn::UseTree::Rename(r) => format!("{} as {}", r.ident, r.rename),
        syn::UseTree::Glob(_) => "*".into(),
        syn::UseTree::Group(g) => format!(
            "{{{}}}",
            g.items.iter().map(use_path).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn make_item(source: &str, item: &syn::Item) -> Option<RustItem> {
    let (kind, name) = item_kind_and_name(item);
    let span = stream_range(tokens_of(item))?;
    Some(RustItem {
        kind,
        name,
        span,
        source_text: source.get(span.0..span.1).unwrap_or("").to_string(),
    })
}

/// Lowercased name without underscores, so `g_max`, `G_MAX` and `gMax`
/// compare equal.
pub fn loose_name(name: &str) -> String {
    name.chars().filter(|c| *c != '_').flat_map(char::to_lowercase).collect()
}

/// Top-level items in source order.
pub fn extract_items(ast: &RustAst) -> Vec<RustItem> {
    ast.file
        .items
        .iter()
        .filter_map(|i| make_item(&ast.source, i))
        .collect()
}

/// Every item at any depth, including associated functions in impls and
/// traits and items nested in function bodies.
pub fn all_items(ast: &RustAst) -> Vec<RustItem> {
    struct Collect<'s> {
        source: &'s str,
        out: Vec<RustItem>,
    }
    impl<'ast> Visit<'ast> for Collect<'_> {
        fn visit_item(&mut self, i: &'ast syn::Item) {
            if let Some(it) = make_item(self.source, i) {
                self.out.push(it);
            }
            syn::visit::visit_item(self, i);
        }
        fn visit_impl_item_fn(&mut self, f: &'ast syn::ImplItemFn) {
            if let Some(span) = stream_range(tokens_of(f)) {
                self.out.push(RustItem {
                    kind: ItemKind::Function,
                    name: f.sig.ident.to_string(),
                    span,
                    source_text: self.source.get(span.0..span.1).unwrap_or("").to_string(),
                });
            }
            syn::visit::visit_impl_item_fn(self, f);
        }
        fn visit_trait_item_fn(&mut self, f: &'ast syn::TraitItemFn) {
            if let Some(span) = stream_range(tokens_of(f)) {
                self.out.push(RustItem {
                    kind: ItemKind::Function,
                    name: f.sig.ident.to_string(),
                    span,
                    source_text: self.source.get(span.0..span.1).unwrap_or("").to_string(),
                });
            }
            syn::visit::visit_trait_item_fn(self, f);
        }
    }
    let mut c = Collect {
        source: &ast.source,
        out: Vec::new(),
    };
    c.visit_file(&ast.file);
    c.out.sort_by_key(|i| (i.span.0, std::cmp::Reverse(i.span.1)));
    c.out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no item encloses byte {0}")]
pub struct NoEnclosingItem(pub usize);

/// Innermost item whose span contains `offset`.
pub fn find_enclosing_item(ast: &RustAst, offset: usize) -> Result<RustItem, NoEnclosingItem> {
    all_items(ast)
        .into_iter()
        .filter(|i| i.contains(offset))
        .min_by_key(|i| i.span.1 - i.span.0)
        .ok_or(NoEnclosingItem(offset))
}

/// Top-level or associated function with the given name.
pub fn find_function(ast: &RustAst, name: &str) -> Option<RustItem> {
    all_items(ast)
        .into_iter()
        .find(|i| i.kind == ItemKind::Function && i.name == name)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("conflicting {} definitions of `{name}`", kind.as_str())]
pub struct DuplicateConflict {
    pub name: String,
    pub kind: ItemKind,
}

/// Remove duplicate items. Identical (whitespace-normalized) items keep the
/// first occurrence; same-name items of one kind that differ are returned as
/// conflicts and all of them are kept.
pub fn dedup_items_lenient(items: Vec<RustItem>) -> (Vec<RustItem>, Vec<DuplicateConflict>) {
    let mut out: Vec<RustItem> = Vec::new();
    let mut texts = HashSet::new();
    let mut conflicts = Vec::new();
    for item in items {
        let norm = crate::c::source::normalize_ws(&item.source_text);
        if !texts.insert((item.kind, norm)) {
            continue;
        }
        let named = !item.name.is_empty()
            && !matches!(item.kind, ItemKind::Impl | ItemKind::Use | ItemKind::Other);
        if named && out.iter().any(|o| o.kind == item.kind && o.name == item.name) {
            let c = DuplicateConflict {
                name: item.name.clone(),
                kind: item.kind,
            };
            if !conflicts.contains(&c) {
                conflicts.push(c);
            }
        }
        out.push(item);
    }
    (out, conflicts)
}

pub fn dedup_items(items: Vec<RustItem>) -> Result<Vec<RustItem>, DuplicateConflict> {
    let (out, conflicts) = dedup_items_lenient(items);
    match conflicts.into_iter().next() {
        Some(c) => Err(c),
        None => Ok(out),
    }
}

/// Identifiers referenced as paths, macros or method names in an item.
pub fn referenced_idents(tokens: TokenStream, out: &mut Vec<String>) {
    for tt in tokens {
        match tt {
            TokenTree::Ident(i) => {
                let s = i.to_string();
                if !out.contains(&s) {
                    out.push(s);
                }
            }
            TokenTree::Group(g) => referenced_idents(g.stream(), out),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_success_and_failure() {
        let ast = parse_rust("fn main() {}").unwrap();
        assert_eq!(extract_items(&ast).len(), 1);
        let src = "struct Node";
        let err = parse_rust(src).unwrap_err();
        assert_eq!(err.offset, src.len());
        let err = parse_rust("fn main() {\n    let x = ;\n}\n").unwrap_err();
        assert_eq!((err.line, err.column), (2, 13));
    }

    #[test]
    fn items_in_order_with_spans() {
        let src = "struct Node { v: i32 }\n\nimpl Node {\n    fn get(&self) -> i32 { self.v }\n}\nfn main() {}\n";
        let ast = parse_rust(src).unwrap();
        let items = extract_items(&ast);
        let summary: Vec<_> = items.iter().map(|i| (i.kind, i.name.as_str())).collect();
        assert_eq!(
            summary,
            vec![
                (ItemKind::Struct, "Node"),
                (ItemKind::Impl, "impl Node"),
                (ItemKind::Function, "main")
            ]
        );
        assert_eq!(items[0].source_text, "struct Node { v: i32 }");
        let inside_get = src.find("self.v").unwrap();
        assert_eq!(find_enclosing_item(&ast, inside_get).unwrap().name, "get");
        let between = src.find("\n\nimpl").unwrap() + 1;
        assert!(find_enclosing_item(&ast, between).is_err());
    }

    #[test]
    fn empty_file_has_no_items() {
        assert!(extract_items(&parse_rust("").unwrap()).is_empty());
    }

    #[test]
    fn dedup_rules() {
        let ast = parse_rust("use std::io;\nuse std::io;\nfn a() {}\nfn parse() -> i32 { 1 }\nfn parse() -> i32 { 2 }\n").unwrap();
        let items = extract_items(&ast);
        let (kept, conflicts) = dedup_items_lenient(items.clone());
        assert_eq!(kept.len(), 4);
        assert_eq!(conflicts, vec![DuplicateConflict { name: "parse".into(), kind: ItemKind::Function }]);
        assert!(dedup_items(items).is_err());
    }
}
