//! Code-line and unsafe-line counts.

use std::collections::BTreeSet;
use std::str::FromStr;

use proc_macro2::{Delimiter, TokenStream, TokenTree};
use serde::{Deserialize, Serialize};
use syn::spanned::Spanned;
use syn::visit::Visit;

use super::RustAst;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineCounts {
    pub uloc: usize,
    pub rloc: usize,
}

impl LineCounts {
    /// Percentage of code lines that are unsafe.
    pub fn pur(&self) -> f64 {
        if self.rloc == 0 {
            0.0
        } else {
            100.0 * self.uloc as f64 / self.rloc as f64
        }
    }
}

pub fn count_unsafe_lines(ast: &RustAst) -> LineCounts {
    let code = code_lines(&ast.source);
    let mut v = UnsafeRanges::default();
    v.visit_file(&ast.file);
    let uloc = code
        .iter()
        .filter(|l| v.ranges.iter().any(|(a, b)| a <= *l && *l <= b))
        .count();
    LineCounts {
        uloc,
        rloc: code.len(),
    }
}

/// 1-based lines holding at least one token. Comments, doc comments and
/// blank lines do not count.
pub fn code_lines(source: &str) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    if let Ok(ts) = TokenStream::from_str(source) {
        mark(ts, &mut out);
    }
    out
}

fn mark(ts: TokenStream, out: &mut BTreeSet<usize>) {
    let tokens: Vec<TokenTree> = ts.into_iter().collect();
    let mut i = 0;
    while i < tokens.len() {
        if let Some(skip) = doc_attr_len(&tokens[i..]) {
            i += skip;
            continue;
        }
        match &tokens[i] {
            TokenTree::Group(g) => {
                out.insert(g.span_open().start().line);
                out.insert(g.span_close().start().line);
                mark(g.stream(), out);
            }
            t => {
                let s = t.span();
                out.extend(s.start().line..=s.end().line);
            }
        }
        i += 1;
    }
}

/// Token count of a `#[doc = ...]` or `#![doc = ...]` attribute at the head
/// of `tokens`; these come from doc comments.
fn doc_attr_len(tokens: &[TokenTree]) -> Option<usize> {
    let TokenTree::Punct(p) = tokens.first()? else {
        return None;
    };
    if p.as_char() != '#' {
        return None;
    }
    let mut k = 1;
    if let Some(TokenTree::Punct(b)) = tokens.get(1) {
        if b.as_char() == '!' {
            k = 2;
        }
    }
    let TokenTree::Group(g) = tokens.get(k)? else {
        return None;
    };
    if g.delimiter() != Delimiter::Bracket {
        return None;
    }
    let first = g.stream().into_iter().next();
    let is_doc = matches!(&first, Some(TokenTree::Ident(i)) if i == "doc");
    // Doc comments carry the comment's own span on every token.
    let from_comment = is_doc && g.span_open().start() == p.span().start();
    from_comment.then_some(k + 1)
}

#[derive(Default)]
struct UnsafeRanges {
    ranges: Vec<(usize, usize)>,
}

impl UnsafeRanges {
    fn add(&mut self, start: proc_macro2::Span, block: &syn::Block) {
        self.ranges
            .push((start.start().line, block.brace_token.span.close().end().line));
    }
}

impl<'ast> Visit<'ast> for UnsafeRanges {
    fn visit_expr_unsafe(&mut self, e: &'ast syn::ExprUnsafe) {
        self.add(e.unsafe_token.span, &e.block);
        syn::visit::visit_expr_unsafe(self, e);
    }
    fn visit_item_fn(&mut self, f: &'ast syn::ItemFn) {
        if let Some(u) = &f.sig.unsafety {
            self.add(u.span(), &f.block);
        }
        syn::visit::visit_item_fn(self, f);
    }
    fn visit_impl_item_fn(&mut self, f: &'ast syn::ImplItemFn) {
        if let Some(u) = &f.sig.unsafety {
            self.add(u.span(), &f.block);
        }
        syn::visit::visit_impl_item_fn(self, f);
    }
    fn visit_trait_item_fn(&mut self, f: &'ast syn::TraitItemFn) {
        if let (Some(u), Some(b)) = (&f.sig.unsafety, &f.default) {
            self.add(u.span(), b);
        }
        syn::visit::visit_trait_item_fn(self, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rust::parse_rust;

    fn counts(src: &str) -> LineCounts {
        count_unsafe_lines(&parse_rust(src).unwrap())
    }

    #[test]
    fn comments_and_blanks_are_not_code() {
        let src = "// header\n\n/// doc\nfn main() {\n    /* block\n       comment */\n    let s = \"a\nb\";\n}\n";
        let c = counts(src);
        assert_eq!(code_lines(src).into_iter().collect::<Vec<_>>(), vec![4, 7, 8, 9]);
        assert_eq!(c, LineCounts { uloc: 0, rloc: 4 });
    }

    #[test]
    fn whole_file_unsafe_fn() {
        let c = counts("unsafe fn f(p: *mut i32) {\n    *p = 1;\n\n    *p += 2;\n}\n");
        assert_eq!(c.uloc, c.rloc);
        assert_eq!(c.rloc, 4);
    }

    #[test]
    fn unsafe_block_lines() {
        let src = "fn main() {\n    let x = 1;\n    unsafe {\n        libc::puts(p);\n    }\n}\n";
        assert_eq!(counts(src), LineCounts { uloc: 3, rloc: 6 });
    }

    #[test]
    fn ratio() {
        assert_eq!(LineCounts { uloc: 15, rloc: 200 }.pur(), 7.5);
        assert_eq!(LineCounts { uloc: 0, rloc: 51 }.pur(), 0.0);
        assert_eq!(LineCounts::default().pur(), 0.0);
    }
}
