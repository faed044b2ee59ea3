//! Output-statement localization, probe planning and instrumentation.

use std::collections::{BTreeSet, VecDeque};
use std::sync::LazyLock;

use proc_macro2::TokenStream;
use regex::Regex;
use serde::{Deserialize, Serialize};
use syn::visit::Visit;

use super::diff::OutputDiff;
use crate::c::project::ProgramStructure;
use crate::prompt::{render_structure_text, StateRecord};
use crate::rust::{loose_name, referenced_idents, stream_range, tokens_of, RustAst};

pub const DEFAULT_PROBE_CAP: usize = 16;
pub const PROBE_MARKER: &str = "@@probe";

const OUTPUT_MACROS: &[&str] = &["print", "println", "write", "writeln"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputStatement {
    pub span: (usize, usize),
    pub function: String,
    pub text: String,
    /// Literal text of the format string between placeholders.
    pub literal_pieces: Vec<String>,
    /// Local variables the statement reads.
    pub vars: Vec<String>,
}

/// A definition site of a local variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefSite {
    pub function: String,
    pub var: String,
    /// Byte range of the defining statement (or binding).
    pub span: (usize, usize),
    /// Probes go here.
    pub insert_at: usize,
    /// Whether the probe starts a block rather than following a statement.
    pub block_start: bool,
    /// Local variables read by the definition.
    pub uses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub site: usize,
    pub def: DefSite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Localization {
    pub output_statements: Vec<OutputStatement>,
    /// False when no statement matched the diff and all are reported.
    pub matched: bool,
    /// Keys of the C functions the statements translate.
    pub c_functions: Vec<String>,
    pub structure_text: String,
    pub probe_plan: Vec<Probe>,
}

struct FnScan {
    name: String,
    defs: Vec<DefSite>,
    outputs: Vec<OutputStatement>,
}

fn idents_in(ts: TokenStream) -> Vec<String> {
    let mut v = Vec::new();
    referenced_idents(ts, &mut v);
    v
}

fn pat_idents(p: &syn::Pat, out: &mut Vec<String>) {
    match p {
        syn::Pat::Ident(i) => {
            out.push(i.ident.to_string());
            if let Some((_, sub)) = &i.subpat {
                pat_idents(sub, out);
            }
        }
        syn::Pat::Type(t) => pat_idents(&t.pat, out),
        syn::Pat::Tuple(t) => t.elems.iter().for_each(|e| pat_idents(e, out)),
        syn::Pat::TupleStruct(t) => t.elems.iter().for_each(|e| pat_idents(e, out)),
        syn::Pat::Struct(s) => s.fields.iter().for_each(|f| pat_idents(&f.pat, out)),
        syn::Pat::Slice(s) => s.elems.iter().for_each(|e| pat_idents(e, out)),
        syn::Pat::Reference(r) => pat_idents(&r.pat, out),
        syn::Pat::Paren(p) => pat_idents(&p.pat, out),
        _ => {}
    }
}

/// Variable at the root of an assignment target: `a`, `a.b`, `a[i]`, `*a`.
fn place_root(e: &syn::Expr) -> Option<String> {
    match e {
        syn::Expr::Path(p) if p.path.segments.len() == 1 => Some(p.path.segments[0].ident.to_string()),
        syn::Expr::Field(f) => place_root(&f.base),
        syn::Expr::Index(i) => place_root(&i.expr),
        syn::Expr::Unary(u) if matches!(u.op, syn::UnOp::Deref(_)) => place_root(&u.expr),
        syn::Expr::Paren(p) => place_root(&p.expr),
        _ => None,
    }
}

fn is_assign_op(op: &syn::BinOp) -> bool {
    use syn::BinOp::*;
    matches!(
        op,
        AddAssign(_) | SubAssign(_) | MulAssign(_) | DivAssign(_) | RemAssign(_) | BitXorAssign(_) | BitAndAssign(_)
            | BitOrAssign(_) | ShlAssign(_) | ShrAssign(_)
    )
}

/// Format string of an output macro and the names it captures inline.
fn format_pieces(mac: &syn::Macro) -> (Vec<String>, Vec<String>) {
    static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)?(?::[^}]*)?\}").unwrap());
    let lit = mac.tokens.clone().into_iter().find_map(|tt| match tt {
        proc_macro2::TokenTree::Literal(l) => syn::parse_str::<syn::LitStr>(&l.to_string()).ok(),
        _ => None,
    });
    let Some(lit) = lit else {
        return (Vec::new(), Vec::new());
    };
    let fmt = lit.value().replace("{{", "\u{1}").replace("}}", "\u{2}");
    let mut captures = Vec::new();
    for c in PLACEHOLDER.captures_iter(&fmt) {
        if let Some(n) = c.get(1) {
            captures.push(n.as_str().to_string());
        }
    }
    let pieces = PLACEHOLDER
        .split(&fmt)
        .map(|p| p.replace('\u{1}', "{").replace('\u{2}', "}"))
        .flat_map(|p| p.split('\n').map(str::to_string).collect::<Vec<_>>())
        .filter(|p| !p.trim().is_empty())
        .collect();
    (pieces, captures)
}

struct Scanner<'s> {
    source: &'s str,
    stack: Vec<FnScan>,
    done: Vec<FnScan>,
}

impl Scanner<'_> {
    fn cur(&mut self) -> Option<&mut FnScan> {
        self.stack.last_mut()
    }

    fn push_def(&mut self, vars: Vec<String>, span: (usize, usize), insert_at: usize, block_start: bool, uses: Vec<String>) {
        let Some(f) = self.cur() else { return };
        let function = f.name.clone();
        for var in vars {
            f.defs.push(DefSite {
                function: function.clone(),
                var,
                span,
                insert_at,
                block_start,
                uses: uses.clone(),
            });
        }
    }

    fn scan_fn(&mut self, name: String, sig: &syn::Signature, block: &syn::Block) {
        self.stack.push(FnScan {
            name,
            defs: Vec::new(),
            outputs: Vec::new(),
        });
        let open = block.brace_token.span.open().byte_range().end;
        for input in &sig.inputs {
            if let syn::FnArg::Typed(t) = input {
                let mut vars = Vec::new();
                pat_idents(&t.pat, &mut vars);
                let span = stream_range(tokens_of(t)).unwrap_or((open, open));
                self.push_def(vars, span, open, true, Vec::new());
            }
        }
        self.visit_block(block);
        let f = self.stack.pop().expect("pushed above");
        self.done.push(f);
    }

    fn output(&mut self, mac: &syn::Macro, span: (usize, usize)) {
        let name = mac.path.segments.last().map(|s| s.ident.to_string()).unwrap_or_default();
        if !OUTPUT_MACROS.contains(&name.as_str()) {
            return;
        }
        let (pieces, captures) = format_pieces(mac);
        let mut vars = idents_in(mac.tokens.clone());
        for c in captures {
            if !vars.contains(&c) {
                vars.push(c);
            }
        }
        let text = self.source[span.0..span.1].to_string();
        if let Some(f) = self.cur() {
            f.outputs.push(OutputStatement {
                span,
                function: f.name.clone(),
                text,
                literal_pieces: pieces,
                vars,
            });
        }
    }
}

impl<'ast> Visit<'ast> for Scanner<'_> {
    fn visit_item_fn(&mut self, f: &'ast syn::ItemFn) {
        self.scan_fn(f.sig.ident.to_string(), &f.sig, &f.block);
    }

    fn visit_impl_item_fn(&mut self, f: &'ast syn::ImplItemFn) {
        self.scan_fn(f.sig.ident.to_string(), &f.sig, &f.block);
    }

    fn visit_stmt(&mut self, s: &'ast syn::Stmt) {
        let range = stream_range(tokens_of(s));
        match (s, range) {
            (syn::Stmt::Local(l), Some(r)) => {
                let mut vars = Vec::new();
                pat_idents(&l.pat, &mut vars);
                let uses = l.init.as_ref().map(|i| idents_in(tokens_of(&*i.expr))).unwrap_or_default();
                if l.init.as_ref().is_none_or(|i| i.diverge.is_none()) {
                    self.push_def(vars, r, r.1, false, uses);
                }
            }
            (syn::Stmt::Expr(e, Some(_)), Some(r)) => match e {
                syn::Expr::Assign(a) => {
                    if let Some(v) = place_root(&a.left) {
                        let mut uses = idents_in(tokens_of(&*a.right));
                        if !matches!(&*a.left, syn::Expr::Path(_)) {
                            uses.extend(idents_in(tokens_of(&*a.left)));
                        }
                        self.push_def(vec![v], r, r.1, false, uses);
                    }
                }
                syn::Expr::Binary(b) if is_assign_op(&b.op) => {
                    if let Some(v) = place_root(&b.left) {
                        let mut uses = idents_in(tokens_of(&*b.right));
                        uses.extend(idents_in(tokens_of(&*b.left)));
                        self.push_def(vec![v], r, r.1, false, uses);
                    }
                }
                syn::Expr::Macro(m) => self.output(&m.mac, r),
                _ => {}
            },
            (syn::Stmt::Macro(m), Some(r)) => self.output(&m.mac, r),
            (syn::Stmt::Expr(syn::Expr::Macro(m), None), Some(r)) => self.output(&m.mac, r),
            _ => {}
        }
        syn::visit::visit_stmt(self, s);
    }

    fn visit_expr_for_loop(&mut self, f: &'ast syn::ExprForLoop) {
        let mut vars = Vec::new();
        pat_idents(&f.pat, &mut vars);
        let open = f.body.brace_token.span.open().byte_range().end;
        let span = stream_range(tokens_of(&*f.pat)).unwrap_or((open, open));
        let uses = idents_in(tokens_of(&*f.expr));
        self.push_def(vars, span, open, true, uses);
        syn::visit::visit_expr_for_loop(self, f);
    }

    fn visit_item(&mut self, i: &'ast syn::Item) {
        match i {
            syn::Item::Fn(f) => self.visit_item_fn(f),
            _ => syn::visit::visit_item(self, i),
        }
    }
}

fn scan(ast: &RustAst) -> Vec<FnScan> {
    let mut s = Scanner {
        source: &ast.source,
        stack: Vec::new(),
        done: Vec::new(),
    };
    s.visit_file(&ast.file);
    s.done.sort_by_key(|f| f.defs.first().map(|d| d.span.0).or(f.outputs.first().map(|o| o.span.0)));
    // Keep only variables that are locals of their function.
    for f in &mut s.done {
        let locals: BTreeSet<String> = f.defs.iter().map(|d| d.var.clone()).collect();
        for d in &mut f.defs {
            d.uses.retain(|u| locals.contains(u));
            d.uses.dedup();
        }
        for o in &mut f.outputs {
            o.vars.retain(|v| locals.contains(v));
        }
    }
    s.done
}

/// Every print statement in the program.
pub fn output_statements(ast: &RustAst) -> Vec<OutputStatement> {
    scan(ast).into_iter().flat_map(|f| f.outputs).collect()
}

/// Definition sites of locals in the program, in source order per function.
pub fn def_sites(ast: &RustAst) -> Vec<DefSite> {
    scan(ast).into_iter().flat_map(|f| f.defs).collect()
}

/// Output statements whose literal text occurs in a divergent line.
fn matching(outputs: &[OutputStatement], diff: &OutputDiff) -> Vec<OutputStatement> {
    let lines: Vec<&str> = diff.divergent_lines().collect();
    outputs
        .iter()
        .filter(|o| {
            o.literal_pieces
                .iter()
                .any(|p| lines.iter().any(|l| l.contains(p.trim())))
        })
        .cloned()
        .collect()
}

/// Definitions transitively reaching the variables of `stmts`,
/// nearest first, at most `cap`.
pub fn probe_plan(defs: &[DefSite], stmts: &[OutputStatement], cap: usize) -> Vec<Probe> {
    let mut chosen: Vec<&DefSite> = Vec::new();
    let mut seen_vars: BTreeSet<(String, String)> = BTreeSet::new();
    let mut queue: VecDeque<(String, String, usize)> = VecDeque::new();
    for s in stmts {
        for v in &s.vars {
            if seen_vars.insert((s.function.clone(), v.clone())) {
                queue.push_back((s.function.clone(), v.clone(), s.span.0));
            }
        }
    }
    while let Some((func, var, anchor)) = queue.pop_front() {
        let mut sites: Vec<&DefSite> = defs.iter().filter(|d| d.function == func && d.var == var).collect();
        // Closest preceding definitions first, then later ones (loops).
        sites.sort_by_key(|d| if d.insert_at <= anchor { (0, anchor - d.insert_at) } else { (1, d.insert_at - anchor) });
        for d in sites {
            if chosen.iter().any(|c| c.span == d.span && c.var == d.var) {
                continue;
            }
            chosen.push(d);
            for u in &d.uses {
                if seen_vars.insert((func.clone(), u.clone())) {
                    queue.push_back((func.clone(), u.clone(), d.span.0));
                }
            }
        }
    }
    chosen
        .into_iter()
        .take(cap)
        .enumerate()
        .map(|(i, d)| Probe {
            site: i + 1,
            def: d.clone(),
        })
        .collect()
}

/// Map a Rust function to the C function it translates.
pub fn c_counterpart<'a>(structure: &'a ProgramStructure, rust_fn: &str) -> Option<&'a crate::c::structure::FunctionUnit> {
    structure
        .functions
        .iter()
        .find(|f| f.name == rust_fn)
        .or_else(|| structure.functions.iter().find(|f| loose_name(&f.name) == loose_name(rust_fn)))
}

pub fn localize(ast: &RustAst, diff: &OutputDiff, structure: &ProgramStructure, cap: usize) -> Localization {
    let scans = scan(ast);
    let all: Vec<OutputStatement> = scans.iter().flat_map(|f| f.outputs.clone()).collect();
    let defs: Vec<DefSite> = scans.iter().flat_map(|f| f.defs.clone()).collect();
    let hits = matching(&all, diff);
    let matched = !hits.is_empty();
    let stmts = if matched { hits } else { all };
    let probe_plan = probe_plan(&defs, &stmts, cap);
    let mut c_functions: Vec<String> = Vec::new();
    for s in &stmts {
        if let Some(f) = c_counterpart(structure, &s.function) {
            if !c_functions.contains(&f.key) {
                c_functions.push(f.key.clone());
            }
        }
    }
    if c_functions.is_empty() {
        if let Some(m) = structure.functions.iter().find(|f| f.is_main()) {
            c_functions.push(m.key.clone());
        }
    }
    let structure_text = c_functions
        .iter()
        .filter_map(|k| structure.graphs.get(k).map(|g| (k, g)))
        .map(|(k, g)| format!("Function {k}:\n{}", render_structure_text(&g.cfg, &g.ddg)))
        .collect::<Vec<_>>()
        .join("\n");
    Localization {
        output_statements: stmts,
        matched,
        c_functions,
        structure_text,
        probe_plan,
    }
}

fn probe_line(p: &Probe) -> String {
    format!(
        "eprintln!(\"{PROBE_MARKER} s{} {} -> {{:?}}\", {});",
        p.site, p.def.var, p.def.var
    )
}

fn line_indent(source: &str, at: usize) -> &str {
    let start = source[..at].rfind('\n').map_or(0, |i| i + 1);
    let line = &source[start..];
    &line[..line.len() - line.trim_start_matches([' ', '\t']).len()]
}

/// Insert a stderr probe after each planned definition.
pub fn instrument(source: &str, plan: &[Probe]) -> String {
    let mut inserts: Vec<(usize, String)> = Vec::new();
    for p in plan {
        let at = p.def.insert_at;
        let indent = line_indent(source, p.def.span.0.min(at));
        let text = if p.def.block_start {
            let brace_indent = line_indent(source, at.saturating_sub(1));
            format!("\n{brace_indent}    {}", probe_line(p))
        } else {
            let rest = &source[at..];
            let eol = rest.find('\n').unwrap_or(rest.len());
            let tail = rest[..eol].trim();
            if tail.is_empty() || tail.starts_with("//") {
                inserts.push((at + eol, format!("\n{indent}{}", probe_line(p))));
                continue;
            }
            format!(" {}", probe_line(p))
        };
        inserts.push((at, text));
    }
    // Stable order for equal offsets: plan order.
    let mut out = source.to_string();
    let mut order: Vec<usize> = (0..inserts.len()).collect();
    order.sort_by(|&a, &b| inserts[b].0.cmp(&inserts[a].0).then(b.cmp(&a)));
    for i in order {
        out.insert_str(inserts[i].0, &inserts[i].1);
    }
    out
}

/// Remove every probe inserted by [`instrument`].
pub fn strip_probes(source: &str) -> String {
    static PROBE: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(&format!(r#"(?:\n[ \t]*| )eprintln!\("{PROBE_MARKER} [^"]*", [A-Za-z_][A-Za-z0-9_]*\);"#)).unwrap()
    });
    PROBE.replace_all(source, "").into_owned()
}

/// Probe records in stderr, in execution order.
pub fn parse_trace(stderr: &[u8]) -> Vec<StateRecord> {
    static LINE: LazyLock<Regex> =
        LazyLock::new(|| Regex::new(&format!(r"^{PROBE_MARKER} s(\d+) ([A-Za-z_][A-Za-z0-9_]*) -> (.*)$")).unwrap());
    String::from_utf8_lossy(stderr)
        .lines()
        .filter_map(|l| {
            let c = LINE.captures(l)?;
            Some(StateRecord {
                site: c[1].parse().ok()?,
                identifier: c[2].to_string(),
                value: c[3].to_string(),
            })
        })
        .collect()
}

/// Line numbers (1-based) holding each probe of an instrumented source.
pub fn probe_lines(instrumented: &str) -> Vec<(usize, usize)> {
    static SITE: LazyLock<Regex> = LazyLock::new(|| Regex::new(&format!(r#"{PROBE_MARKER} s(\d+) "#)).unwrap());
    instrumented
        .lines()
        .enumerate()
        .flat_map(|(i, l)| {
            SITE.captures_iter(l)
                .filter_map(|c| c[1].parse().ok())
                .map(move |s| (i + 1, s))
                .collect::<Vec<_>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c::project::analyze_source;
    use crate::rust::parse_rust;
    use crate::semantic::diff::diff_outputs;

    const SRC: &str = r#"fn sum(n: i32) -> i32 {
    let mut s = 0;
    for i in 0..=n {
        s += i;
    }
    s
}

fn main() {
    let n = 4;
    let total = sum(n) + 1; // off by one
    println!("total = {}", total);
    println!("done");
}
"#;

    #[test]
    fn statements_and_defs() {
        let ast = parse_rust(SRC).unwrap();
        let outs = output_statements(&ast);
        assert_eq!(outs.len(), 2);
        assert_eq!(outs[0].literal_pieces, vec!["total = "]);
        assert_eq!(outs[0].vars, vec!["total"]);
        let defs = def_sites(&ast);
        let names: Vec<(&str, &str)> = defs.iter().map(|d| (d.function.as_str(), d.var.as_str())).collect();
        assert_eq!(names, [("sum", "n"), ("sum", "s"), ("sum", "i"), ("sum", "s"), ("main", "n"), ("main", "total")]);
        let total = defs.iter().find(|d| d.var == "total").unwrap();
        assert_eq!(total.uses, vec!["n"]);
    }

    #[test]
    fn localize_literal_match_and_fallback() {
        let c = analyze_source("p.c", "#include <stdio.h>\nint main(void){int n=4; printf(\"total = %d\\n\", n+n); return 0;}\n").unwrap();
        let ast = parse_rust(SRC).unwrap();
        let d = diff_outputs(b"total = 10\ndone\n", b"total = 11\ndone\n");
        let l = localize(&ast, &d, &c, DEFAULT_PROBE_CAP);
        assert!(l.matched);
        assert_eq!(l.output_statements.len(), 1);
        let vars: Vec<&str> = l.probe_plan.iter().map(|p| p.def.var.as_str()).collect();
        assert_eq!(vars, ["total", "n"]);
        assert_eq!(l.c_functions, ["main"]);
        assert!(l.structure_text.starts_with("Function main:\nBlock 1:"));

        let d = diff_outputs(b"x\n", b"y\n");
        let l = localize(&ast, &d, &c, DEFAULT_PROBE_CAP);
        assert!(!l.matched);
        assert_eq!(l.output_statements.len(), 2);

        let d = diff_outputs(b"total = 10\ndone\n", b"total = 10\nfinished\n");
        let l = localize(&ast, &d, &c, DEFAULT_PROBE_CAP);
        assert!(l.matched);
        assert_eq!(l.output_statements[0].text, "println!(\"done\");");
        assert!(l.probe_plan.is_empty());
    }

    #[test]
    fn instrument_and_strip_round_trip() {
        let ast = parse_rust(SRC).unwrap();
        let defs = def_sites(&ast);
        let plan: Vec<Probe> = defs.into_iter().enumerate().map(|(i, def)| Probe { site: i + 1, def }).collect();
        let inst = instrument(SRC, &plan);
        assert!(parse_rust(&inst).is_ok(), "{inst}");
        assert!(inst.contains("    let total = sum(n) + 1; // off by one\n    eprintln!(\"@@probe s6 total -> {:?}\", total);\n"));
        assert!(inst.contains("for i in 0..=n {\n        eprintln!(\"@@probe s3 i -> {:?}\", i);\n        s += i;"), "{inst}");
        assert_eq!(strip_probes(&inst), SRC);
        assert_eq!(instrument(SRC, &[]), SRC);
        assert_eq!(probe_lines(&inst).len(), 6);
    }

    #[test]
    fn trace_parsing() {
        let t = parse_trace(b"noise\n@@probe s1 x -> 5\n@@probe s2 y -> [1, 2]\n");
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].site, t[0].identifier.as_str(), t[0].value.as_str()), (1, "x", "5"));
        assert_eq!(t[1].value, "[1, 2]");
    }
}
