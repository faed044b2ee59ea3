//! Structural consistency between a C function and its Rust translation.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use syn::visit::Visit;

use crate::c::ast::{Derived, TypeSpec};
use crate::c::structure::{FunctionUnit, SymbolTable};
use crate::rust::{loose_name, normalize_c_block, normalize_rust_block, StatementCategory};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareMode {
    #[default]
    Exact,
    Multiset,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub signature_ok: bool,
    pub c_categories: Vec<StatementCategory>,
    pub rust_categories: Vec<StatementCategory>,
    pub matched: bool,
    pub violations: Vec<String>,
    /// Advisory type-mapping notes; never affect `matched`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Names a translation may refer to besides its own locals.
#[derive(Debug, Clone, Default)]
pub struct KnownNames {
    exact: HashSet<String>,
    loose: HashSet<String>,
}

impl KnownNames {
    pub fn new(sigma: &SymbolTable) -> Self {
        let mut k = KnownNames::default();
        for d in sigma.entries.values() {
            k.add_loose(&d.name);
        }
        for c in sigma.enum_constants.keys() {
            k.add_loose(c);
        }
        k
    }

    pub fn add_exact(&mut self, name: &str) {
        self.exact.insert(name.to_string());
    }

    pub fn add_loose(&mut self, name: &str) {
        self.loose.insert(loose_name(name));
    }

    /// Item, variant and imported names defined by Rust source text.
    pub fn add_rust_text(&mut self, text: &str) {
        if let Ok(file) = syn::parse_file(text) {
            let mut d = Defined::default();
            d.visit_file(&file);
            self.exact.extend(d.names);
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        is_std_name(name) || self.exact.contains(name) || self.loose.contains(&loose_name(name))
    }
}

const STD_NAMES: &[&str] = &[
    "i8", "i16", "i32", "i64", "i128", "isize", "u8", "u16", "u32", "u64", "u128", "usize", "f32", "f64", "bool",
    "char", "str", "String", "Self", "self", "super", "crate", "std", "core", "alloc", "Option", "Some", "None",
    "Result", "Ok", "Err", "Vec", "Box", "ToString", "Into", "From", "Iterator", "IntoIterator", "Default", "Clone",
    "Copy", "drop", "Fn", "FnMut", "FnOnce", "PartialEq", "PartialOrd", "Eq", "Ord", "Sized", "Send", "Sync",
    "AsRef", "AsMut", "Drop", "ToOwned", "ExactSizeIterator", "DoubleEndedIterator", "Extend", "TryFrom",
    "TryInto", "FromIterator", "println", "print", "eprintln", "eprint", "format", "write", "writeln", "vec",
    "panic", "assert", "assert_eq", "assert_ne", "debug_assert", "debug_assert_eq", "unreachable",
    "unimplemented", "todo", "matches", "concat", "stringify", "include_str", "env", "line", "file", "column",
    "format_args", "dbg", "cfg", "HashMap", "HashSet", "BTreeMap", "BTreeSet", "VecDeque", "BinaryHeap", "Rc",
    "RefCell", "Cell", "Arc", "Mutex", "Ordering", "Wrapping", "Read", "Write", "BufRead", "BufReader",
    "BufWriter", "Cow", "Path", "PathBuf", "Duration", "Instant",
];

pub fn is_std_name(name: &str) -> bool {
    STD_NAMES.contains(&name)
}

#[derive(Default)]
struct Defined {
    names: BTreeSet<String>,
}

impl<'ast> Visit<'ast> for Defined {
    fn visit_item(&mut self, i: &'ast syn::Item) {
        let (kind, name) = crate::rust::item_kind_and_name(i);
        if !matches!(kind, crate::rust::ItemKind::Impl | crate::rust::ItemKind::Use) && !name.is_empty() {
            self.names.insert(name);
        }
        syn::visit::visit_item(self, i);
    }
    fn visit_variant(&mut self, v: &'ast syn::Variant) {
        self.names.insert(v.ident.to_string());
    }
    fn visit_use_name(&mut self, n: &'ast syn::UseName) {
        self.names.insert(n.ident.to_string());
    }
    fn visit_use_rename(&mut self, n: &'ast syn::UseRename) {
        self.names.insert(n.rename.to_string());
    }
    fn visit_impl_item_fn(&mut self, f: &'ast syn::ImplItemFn) {
        self.names.insert(f.sig.ident.to_string());
        syn::visit::visit_impl_item_fn(self, f);
    }
    fn visit_pat_ident(&mut self, p: &'ast syn::PatIdent) {
        self.names.insert(p.ident.to_string());
        syn::visit::visit_pat_ident(self, p);
    }
    fn visit_generic_param(&mut self, g: &'ast syn::GenericParam) {
        match g {
            syn::GenericParam::Type(t) => {
                self.names.insert(t.ident.to_string());
            }
            syn::GenericParam::Const(c) => {
                self.names.insert(c.ident.to_string());
            }
            syn::GenericParam::Lifetime(_) => {}
        }
        syn::visit::visit_generic_param(self, g);
    }
}

#[derive(Default)]
struct Referenced {
    names: Vec<String>,
}

impl Referenced {
    fn push_path(&mut self, p: &syn::Path) {
        if p.leading_colon.is_some() {
            return;
        }
        if let Some(first) = p.segments.first() {
            let s = first.ident.to_string();
            if !self.names.contains(&s) {
                self.names.push(s);
            }
        }
    }
}

impl<'ast> Visit<'ast> for Referenced {
    fn visit_expr_path(&mut self, e: &'ast syn::ExprPath) {
        if e.qself.is_none() {
            self.push_path(&e.path);
        }
        syn::visit::visit_expr_path(self, e);
    }
    fn visit_expr_struct(&mut self, e: &'ast syn::ExprStruct) {
        self.push_path(&e.path);
        syn::visit::visit_expr_struct(self, e);
    }
    fn visit_type_path(&mut self, t: &'ast syn::TypePath) {
        if t.qself.is_none() {
            self.push_path(&t.path);
        }
        syn::visit::visit_type_path(self, t);
    }
    fn visit_macro(&mut self, m: &'ast syn::Macro) {
        self.push_path(&m.path);
        // Format arguments are expressions; look inside them when they parse.
        if let Ok(args) = m.parse_body_with(
            syn::punctuated::Punctuated::<syn::Expr, syn::Token![,]>::parse_terminated,
        ) {
            for a in &args {
                self.visit_expr(a);
            }
        }
    }
    fn visit_pat_tuple_struct(&mut self, p: &'ast syn::PatTupleStruct) {
        self.push_path(&p.path);
        syn::visit::visit_pat_tuple_struct(self, p);
    }
    fn visit_pat_struct(&mut self, p: &'ast syn::PatStruct) {
        self.push_path(&p.path);
        syn::visit::visit_pat_struct(self, p);
    }
}

/// Number of declared parameters, treating `(void)` as none.
pub fn c_arity(f: &FunctionUnit) -> Option<usize> {
    let def = f.def.as_ref()?;
    let p = def.declarator.function_params()?;
    let void_only = p.params.len() == 1
        && p.params[0].declarator.as_ref().is_none_or(|d| d.name.is_none() && d.derived.is_empty())
        && matches!(&p.params[0].specs.ty, TypeSpec::Builtin(b) if b == "void");
    Some(if void_only { 0 } else { p.params.len() })
}

fn c_param_types(f: &FunctionUnit) -> Vec<Option<String>> {
    let Some(p) = f.def.as_ref().and_then(|d| d.declarator.function_params()) else {
        return Vec::new();
    };
    p.params
        .iter()
        .map(|pd| {
            let plain = pd.declarator.as_ref().is_none_or(|d| d.derived.iter().all(|x| !matches!(x, Derived::Pointer | Derived::Array(_))));
            match (&pd.specs.ty, plain) {
                (TypeSpec::Builtin(b), true) => Some(b.clone()),
                _ => None,
            }
        })
        .collect()
}

/// Usual Rust forms of C arithmetic types.
pub fn usual_rust_types(c: &str) -> &'static [&'static str] {
    let words: Vec<&str> = c.split_whitespace().filter(|w| *w != "signed" && *w != "const" && *w != "int").collect();
    let unsigned = c.contains("unsigned");
    let core: Vec<&str> = words.into_iter().filter(|w| *w != "unsigned").collect();
    match (core.as_slice(), unsigned) {
        ([], false) => &["i32", "i64", "isize"],
        ([], true) => &["u32", "u64", "usize"],
        (["short"], false) => &["i16", "i32"],
        (["short"], true) => &["u16", "u32"],
        (["long"], false) | (["long", "long"], false) => &["i64", "isize", "i128"],
        (["long"], true) | (["long", "long"], true) => &["u64", "usize", "u128"],
        (["char"], _) => &["u8", "i8", "char"],
        (["float"], _) => &["f32", "f64"],
        (["double"], _) | (["long", "double"], _) => &["f64"],
        (["_Bool"], _) | (["bool"], _) => &["bool"],
        _ => &[],
    }
}

fn rust_fn_item<'a>(file: &'a syn::File, name: &str) -> Option<&'a syn::ItemFn> {
    let fns: Vec<&syn::ItemFn> = file
        .items
        .iter()
        .filter_map(|i| match i {
            syn::Item::Fn(f) => Some(f),
            _ => None,
        })
        .collect();
    fns.iter()
        .find(|f| f.sig.ident == name)
        .or_else(|| fns.iter().find(|f| loose_name(&f.sig.ident.to_string()) == loose_name(name)))
        .copied()
}

pub fn categories_match(c: &[StatementCategory], r: &[StatementCategory], mode: CompareMode) -> bool {
    match mode {
        CompareMode::Exact => c == r,
        CompareMode::Multiset => {
            let mut a = c.to_vec();
            let mut b = r.to_vec();
            a.sort_by_key(|x| *x as u8);
            b.sort_by_key(|x| *x as u8);
            a == b
        }
    }
}

fn fmt_categories(c: &[StatementCategory]) -> String {
    format!("[{}]", c.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(", "))
}

/// Compare a C function with the Rust text produced for it.
pub fn check_consistency(c_fn: &FunctionUnit, rust_text: &str, known: &KnownNames, mode: CompareMode) -> ConsistencyReport {
    let mut r = ConsistencyReport::default();
    if let Some(def) = &c_fn.def {
        r.c_categories = normalize_c_block(&def.body);
    }
    let file = match syn::parse_file(rust_text) {
        Ok(f) => f,
        Err(e) => {
            r.violations.push(format!("translation does not parse: {e}"));
            return r;
        }
    };
    let Some(item) = rust_fn_item(&file, &c_fn.name) else {
        r.violations.push(format!("missing function `{}`", c_fn.name));
        return r;
    };

    let rust_arity = item.sig.inputs.len();
    let arity_ok = match c_arity(c_fn) {
        Some(_) if c_fn.is_main() => rust_arity == 0,
        Some(n) => n == rust_arity,
        None => true,
    };
    r.signature_ok = arity_ok;
    if !arity_ok {
        r.violations.push(format!(
            "arity mismatch: C `{}` takes {} parameters, Rust `{}` takes {}",
            c_fn.name,
            c_arity(c_fn).unwrap_or(0),
            item.sig.ident,
            rust_arity
        ));
    }
    if item.sig.ident != c_fn.name.as_str() {
        r.warnings.push(format!("function renamed from `{}` to `{}`", c_fn.name, item.sig.ident));
    }
    for (i, (ct, input)) in c_param_types(c_fn).iter().zip(&item.sig.inputs).enumerate() {
        let (Some(ct), syn::FnArg::Typed(pt)) = (ct, input) else {
            continue;
        };
        let rt = crate::rust::compact(&crate::rust::tokens_of(&*pt.ty).to_string());
        let usual = usual_rust_types(ct);
        if !usual.is_empty() && !usual.contains(&rt.as_str()) {
            r.warnings.push(format!(
                "parameter {}: C `{ct}` usually maps to {}, found `{rt}`",
                i + 1,
                usual.iter().map(|t| format!("`{t}`")).collect::<Vec<_>>().join(" or ")
            ));
        }
    }

    let mut local = known.clone();
    local.add_rust_text(rust_text);
    let mut refs = Referenced::default();
    refs.visit_item_fn(item);
    for name in &refs.names {
        if !local.contains(name) {
            r.violations.push(format!("hallucinated symbol `{name}`: not defined in the program, its translations or the standard library"));
        }
    }

    let returns_value = !matches!(item.sig.output, syn::ReturnType::Default);
    r.rust_categories = normalize_rust_block(&item.block, returns_value);
    let cats_ok = categories_match(&r.c_categories, &r.rust_categories, mode);
    if !cats_ok {
        r.violations.push(format!(
            "statement categories differ: C {} vs Rust {}",
            fmt_categories(&r.c_categories),
            fmt_categories(&r.rust_categories)
        ));
    }
    r.matched = r.signature_ok && r.violations.is_empty();
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c::project::analyze_source;

    fn check(c: &str, name: &str, rust: &str) -> ConsistencyReport {
        let p = analyze_source("t.c", c).unwrap();
        let known = KnownNames::new(&p.symbols);
        check_consistency(p.function(name).unwrap(), rust, &known, CompareMode::Exact)
    }

    #[test]
    fn aligned_pair_matches() {
        let r = check(
            "int f(void) { int x = 0; x++; return x; }",
            "f",
            "fn f() -> i32 { let mut x = 0; x += 1; return x; }",
        );
        assert!(r.matched, "{r:?}");
        assert!(r.signature_ok);
    }

    #[test]
    fn hallucinated_helper() {
        let r = check(
            "int f(int a) { return a; }",
            "f",
            "fn f(a: i32) -> i32 { return frobnicate(a); }",
        );
        assert!(!r.matched);
        assert!(r.violations.iter().any(|v| v.contains("hallucinated symbol `frobnicate`")));
    }

    #[test]
    fn arity_mismatch() {
        let r = check(
            "int f(int a, int b) { return a + b; }",
            "f",
            "fn f(a: i32, b: i32, c: i32) -> i32 { return a + b + c; }",
        );
        assert!(!r.signature_ok);
        assert!(!r.matched);
    }

    #[test]
    fn known_globals_and_types_are_not_hallucinated() {
        let c = "struct Node { int v; };\nint g_max = 3;\nint get(struct Node *n) { return n->v + g_max; }\n";
        let r = check(c, "get", "fn get(n: &Node) -> i32 { return n.v + G_MAX; }");
        assert!(r.matched, "{r:?}");
        let r = check(c, "get", "fn get(n: &Node) -> i64 { let t: Thing = Thing::new(); return 0; }");
        assert!(r.violations.iter().any(|v| v.contains("`Thing`")));
    }

    #[test]
    fn type_advice_is_only_a_warning() {
        let r = check("int f(int a) { return a; }", "f", "fn f(a: u8) -> i32 { return a as i32; }");
        assert!(r.matched);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn multiset_mode() {
        use StatementCategory::*;
        assert!(!categories_match(&[Call, Return], &[Return, Call], CompareMode::Exact));
        assert!(categories_match(&[Call, Return], &[Return, Call], CompareMode::Multiset));
    }
}
