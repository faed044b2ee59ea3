//! Global symbol table and function units extracted from a parsed C unit.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::preprocess::IncludeTarget;
use super::source::{normalize_ws, FileId, SourceMap, Span};
use super::{stdlib, CAst};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolKind {
    GlobalVar,
    Struct,
    Enum,
    Typedef,
    FunctionSignature,
    Macro,
}

impl SymbolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SymbolKind::GlobalVar => "global-var",
            SymbolKind::Struct => "struct",
            SymbolKind::Enum => "enum",
            SymbolKind::Typedef => "typedef",
            SymbolKind::FunctionSignature => "function-signature",
            SymbolKind::Macro => "macro",
        }
    }

    /// Order in which global symbols are translated.
    pub fn translation_rank(self) -> u8 {
        match self {
            SymbolKind::Typedef | SymbolKind::Struct | SymbolKind::Enum => 0,
            SymbolKind::GlobalVar => 1,
            SymbolKind::Macro => 2,
            SymbolKind::FunctionSignature => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolDef {
    pub kind: SymbolKind,
    /// Identifier as written (without tag keyword or file namespace).
    pub name: String,
    pub source_text: String,
    pub file: String,
    pub is_definition: bool,
    pub is_static: bool,
    /// Position in declaration order across the program.
    pub order: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolTable {
    pub entries: BTreeMap<String, SymbolDef>,
    /// Enumeration constants mapped to the key of the enum that declares them.
    pub enum_constants: BTreeMap<String, String>,
}

impl SymbolTable {
    pub fn get(&self, key: &str) -> Option<&SymbolDef> {
        self.entries.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Resolve an identifier used in code to its table key.
    pub fn resolve(&self, name: &str) -> Option<&str> {
        if let Some((k, _)) = self.entries.get_key_value(name) {
            return Some(k);
        }
        self.enum_constants.get(name).map(|s| s.as_str())
    }

    /// Entries in declaration order.
    pub fn in_order(&self) -> Vec<(&String, &SymbolDef)> {
        let mut v: Vec<_> = self.entries.iter().collect();
        v.sort_by_key(|(k, d)| (d.order, (*k).clone()));
        v
    }

    /// Insert following the precedence rules: a definition replaces a
    /// declaration, otherwise the first entry stays.
    pub fn insert(&mut self, key: String, def: SymbolDef) {
        match self.entries.get(&key) {
            Some(old) if old.is_definition || !def.is_definition => {}
            Some(old) => {
                let order = old.order.min(def.order);
                self.entries.insert(key, SymbolDef { order, ..def });
            }
            None => {
                self.entries.insert(key, def);
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionUnit {
    /// Key of the function in the symbol table (file-qualified for statics
    /// at project level).
    pub key: String,
    pub name: String,
    pub signature: String,
    pub body: Option<String>,
    /// Symbol-table keys referenced in the signature or body, first occurrence first.
    pub dependencies: Vec<String>,
    /// Identifiers declared in no project file.
    pub externals: Vec<String>,
    /// Defined functions referenced from the body.
    pub calls: Vec<String>,
    /// Global variables referenced from the body.
    pub globals_used: Vec<String>,
    pub file: String,
    pub is_static: bool,
    pub order: u32,
    #[serde(skip)]
    pub def: Option<Arc<FunctionDef>>,
    /// Byte offset of `body` inside its source file, used to slice statement spans.
    #[serde(skip)]
    pub body_origin: Option<(FileId, u32)>,
}

impl FunctionUnit {
    /// Source text for a span inside this function, or an empty string when
    /// the span lies outside the recorded body.
    pub fn text(&self, span: Span) -> &str {
        let (Some(body), Some((file, base))) = (&self.body, self.body_origin) else {
            return "";
        };
        if span.file != file || span.lo < base {
            return "";
        }
        let lo = (span.lo - base) as usize;
        let hi = ((span.hi - base) as usize).min(body.len());
        body.get(lo..hi).unwrap_or("")
    }

    pub fn is_main(&self) -> bool {
        self.name == "main"
    }
}

/// Symbols and functions of one translation unit.
pub fn extract_structure(ast: &CAst) -> (SymbolTable, Vec<FunctionUnit>) {
    let mut ex = Extractor {
        sm: &ast.sources,
        sigma: SymbolTable::default(),
        order: 0,
        statics: HashSet::new(),
    };
    let mut funcs = Vec::new();
    for item in &ast.unit.items {
        match item {
            ExternalDecl::Decl(d) => ex.declaration(d),
            ExternalDecl::Func(f) => {
                ex.function_sig(f);
                funcs.push(f);
            }
        }
    }
    for m in &ast.pp.defines {
        if m.body.is_empty() {
            continue;
        }
        let order = ex.next_order();
        ex.sigma.insert(
            m.name.clone(),
            SymbolDef {
                kind: SymbolKind::Macro,
                name: m.name.clone(),
                source_text: m.text.clone(),
                file: ex.sm.file(m.span.file).name.clone(),
                is_definition: true,
                is_static: false,
                order,
            },
        );
    }
    let sigma = ex.sigma;
    let defined: HashSet<&str> = funcs.iter().map(|f| f.name()).collect();
    let mut units = Vec::new();
    for (i, f) in funcs.iter().enumerate() {
        units.push(function_unit(ast, &sigma, &defined, f, i as u32));
    }
    (sigma, units)
}

struct Extractor<'a> {
    sm: &'a SourceMap,
    sigma: SymbolTable,
    order: u32,
    statics: HashSet<String>,
}

impl Extractor<'_> {
    fn next_order(&mut self) -> u32 {
        self.order += 1;
        self.order
    }

    fn file_name(&self, span: Span) -> String {
        self.sm.file(span.file).name.clone()
    }

    /// Declaration specifiers as text, with an embedded tagged struct/enum
    /// body shortened to its tag.
    fn spec_text(&self, specs: &DeclSpecs) -> String {
        let full = self.sm.slice(specs.span);
        let (kw, tag, span, has_body) = match &specs.ty {
            TypeSpec::Record(r) => (
                if r.is_union { "union" } else { "struct" },
                r.tag.as_ref(),
                r.span,
                r.fields.is_some(),
            ),
            TypeSpec::Enum(e) => ("enum", e.tag.as_ref(), e.span, e.variants.is_some()),
            _ => return normalize_ws(full),
        };
        match tag {
            Some(tag) if has_body && specs.span.contains(&span) => {
                let lo = (span.lo - specs.span.lo) as usize;
                let hi = (span.hi - specs.span.lo) as usize;
                normalize_ws(&format!("{}{} {}{}", &full[..lo], kw, tag.name, &full[hi..]))
            }
            _ => full.trim().to_string(),
        }
    }

    fn declaration(&mut self, d: &Declaration) {
        self.type_spec(&d.specs.ty, d.declarators.is_empty());
        let is_static = d.specs.storage == Some(Storage::Static);
        let spec_text = self.spec_text(&d.specs);
        for id in &d.declarators {
            let Some(name) = &id.declarator.name else { continue };
            let decl_text = self.sm.slice(id.span).trim();
            let order = self.next_order();
            let file = self.file_name(id.span);
            let (kind, text, is_definition) = if d.specs.is_typedef() {
                (SymbolKind::Typedef, format!("{spec_text} {decl_text};"), true)
            } else if id.declarator.is_function() {
                (SymbolKind::FunctionSignature, format!("{spec_text} {decl_text}"), false)
            } else {
                let is_def = d.specs.storage != Some(Storage::Extern) || id.init.is_some();
                (SymbolKind::GlobalVar, format!("{spec_text} {decl_text};"), is_def)
            };
            if d.specs.is_typedef() {
                if let TypeSpec::Enum(e) = &d.specs.ty {
                    if e.tag.is_none() {
                        self.enum_constants(e, &name.name);
                    }
                }
            }
            if is_static {
                self.statics.insert(name.name.clone());
            }
            self.sigma.insert(
                name.name.clone(),
                SymbolDef {
                    kind,
                    name: name.name.clone(),
                    source_text: text,
                    file,
                    is_definition,
                    is_static: is_static || self.statics.contains(&name.name),
                    order,
                },
            );
        }
    }

    fn function_sig(&mut self, f: &FunctionDef) {
        self.type_spec(&f.specs.ty, false);
        let is_static = f.specs.storage == Some(Storage::Static) || self.statics.contains(f.name());
        let text = if f.specs.span.file == f.declarator.span.file {
            normalize_ws(self.sm.slice(f.specs.span.to(f.declarator.span)))
        } else {
            format!("{} {}", self.spec_text(&f.specs), self.sm.slice(f.declarator.span))
        };
        let order = self.next_order();
        self.sigma.insert(
            f.name().to_string(),
            SymbolDef {
                kind: SymbolKind::FunctionSignature,
                name: f.name().to_string(),
                source_text: text,
                file: self.file_name(f.span),
                is_definition: true,
                is_static,
                order,
            },
        );
    }

    fn type_spec(&mut self, ty: &TypeSpec, standalone: bool) {
        match ty {
            TypeSpec::Record(r) => {
                if let Some(fields) = &r.fields {
                    for f in fields {
                        self.type_spec(&f.specs.ty, false);
                    }
                }
                let Some(tag) = &r.tag else { return };
                if r.fields.is_none() && !standalone {
                    return;
                }
                let kw = if r.is_union { "union" } else { "struct" };
                let text = if r.fields.is_some() {
                    format!("{};", self.sm.slice(r.span).trim())
                } else {
                    format!("{kw} {};", tag.name)
                };
                let order = self.next_order();
                self.sigma.insert(
                    format!("{kw} {}", tag.name),
                    SymbolDef {
                        kind: SymbolKind::Struct,
                        name: tag.name.clone(),
                        source_text: text,
                        file: self.file_name(r.span),
                        is_definition: r.fields.is_some(),
                        is_static: false,
                        order,
                    },
                );
            }
            TypeSpec::Enum(e) => {
                let Some(variants) = &e.variants else { return };
                let key = match &e.tag {
                    Some(t) => format!("enum {}", t.name),
                    None if standalone => match variants.first() {
                        Some(v) => format!("enum@{}", v.name.name),
                        None => return,
                    },
                    None => return,
                };
                let order = self.next_order();
                self.sigma.insert(
                    key.clone(),
                    SymbolDef {
                        kind: SymbolKind::Enum,
                        name: e.tag.as_ref().map_or_else(String::new, |t| t.name.clone()),
                        source_text: format!("{};", self.sm.slice(e.span).trim()),
                        file: self.file_name(e.span),
                        is_definition: true,
                        is_static: false,
                        order,
                    },
                );
                self.enum_constants(e, &key);
            }
            _ => {}
        }
    }

    fn enum_constants(&mut self, e: &EnumSpec, key: &str) {
        for v in e.variants.iter().flatten() {
            self.sigma
                .enum_constants
                .entry(v.name.name.clone())
                .or_insert_with(|| key.to_string());
        }
    }
}

fn function_unit(
    ast: &CAst,
    sigma: &SymbolTable,
    defined: &HashSet<&str>,
    f: &FunctionDef,
    order: u32,
) -> FunctionUnit {
    let sm = &ast.sources;
    let mut refs = RefCollector::default();
    refs.push_scope();
    refs.specs(&f.specs);
    refs.declarator(&f.declarator, true);
    refs.block(&f.body);
    refs.pop_scope();
    for m in &ast.pp.uses {
        if f.span.contains(&m.span) {
            refs.hits.push((m.span.lo, m.name.clone(), RefRole::Macro));
        }
    }
    refs.hits.sort_by_key(|h| h.0);

    let mut deps = Vec::new();
    let mut externals = Vec::new();
    let mut calls = Vec::new();
    let mut globals = Vec::new();
    let mut seen = HashSet::new();
    for (_, name, role) in &refs.hits {
        if name == f.name() && *role != RefRole::Type {
            push_unique(&mut calls, name);
            continue;
        }
        let key = match role {
            RefRole::Tag => sigma.get(name).map(|_| name.as_str()),
            _ => sigma.resolve(name),
        };
        match key {
            Some(k) => {
                if seen.insert(k.to_string()) {
                    deps.push(k.to_string());
                }
                let kind = sigma.get(k).map(|d| d.kind);
                if kind == Some(SymbolKind::FunctionSignature) && defined.contains(k) {
                    push_unique(&mut calls, k);
                }
                if kind == Some(SymbolKind::GlobalVar) {
                    push_unique(&mut globals, k);
                }
            }
            None if *role != RefRole::Tag => push_unique(&mut externals, name),
            None => {}
        }
    }
    let body_text = sm.slice(f.body.span).to_string();
    let signature = sigma
        .get(f.name())
        .filter(|d| d.is_definition)
        .map(|d| d.source_text.clone())
        .unwrap_or_else(|| normalize_ws(sm.slice(f.specs.span.to(f.declarator.span))));
    FunctionUnit {
        key: f.name().to_string(),
        name: f.name().to_string(),
        signature,
        body: Some(body_text),
        dependencies: deps,
        externals,
        calls,
        globals_used: globals,
        file: sm.file(f.span.file).name.clone(),
        is_static: f.specs.storage == Some(Storage::Static),
        order,
        def: Some(Arc::new(f.clone())),
        body_origin: Some((f.body.span.file, f.body.span.lo)),
    }
}

fn push_unique(v: &mut Vec<String>, s: &str) {
    if !v.iter().any(|x| x == s) {
        v.push(s.to_string());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RefRole {
    Value,
    Type,
    Tag,
    Macro,
}

/// Walks a function collecting references to non-local names.
#[derive(Default)]
struct RefCollector {
    scopes: Vec<HashSet<String>>,
    hits: Vec<(u32, String, RefRole)>,
}

impl RefCollector {
    fn push_scope(&mut self) {
        self.scopes.push(HashSet::new());
    }

    fn pop_scope(&mut self) {
        self.scopes.pop();
    }

    fn bind(&mut self, name: &str) {
        if let Some(s) = self.scopes.last_mut() {
            s.insert(name.to_string());
        }
    }

    fn is_local(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.contains(name))
    }

    fn hit(&mut self, span: Span, name: &str, role: RefRole) {
        if role == RefRole::Value && self.is_local(name) {
            return;
        }
        self.hits.push((span.lo, name.to_string(), role));
    }

    fn specs(&mut self, specs: &DeclSpecs) {
        match &specs.ty {
            TypeSpec::Named(id) => self.hit(id.span, &id.name, RefRole::Type),
            TypeSpec::Record(r) => {
                if let Some(tag) = &r.tag {
                    let kw = if r.is_union { "union" } else { "struct" };
                    self.hit(tag.span, &format!("{kw} {}", tag.name), RefRole::Tag);
                }
                for f in r.fields.iter().flatten() {
                    self.specs(&f.specs);
                    for d in &f.declarators {
                        self.declarator(d, false);
                    }
                }
            }
            TypeSpec::Enum(e) => {
                if let Some(tag) = &e.tag {
                    self.hit(tag.span, &format!("enum {}", tag.name), RefRole::Tag);
                }
                for v in e.variants.iter().flatten() {
                    self.bind(&v.name.name);
                    if let Some(x) = &v.value {
                        self.expr(x);
                    }
                }
            }
            _ => {}
        }
    }

    /// Walk the derived parts of a declarator. Parameter names are bound
    /// when `bind_params` is set (function definitions).
    fn declarator(&mut self, d: &Declarator, bind_params: bool) {
        for (i, der) in d.derived.iter().enumerate() {
            match der {
                Derived::Array(Some(e)) => self.expr(e),
                Derived::Function(params) => {
                    for p in &params.params {
                        self.specs(&p.specs);
                        if let Some(pd) = &p.declarator {
                            self.declarator(pd, false);
                            if bind_params && i == 0 {
                                if let Some(n) = &pd.name {
                                    self.bind(&n.name);
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }

    fn type_name(&mut self, t: &TypeName) {
        self.specs(&t.specs);
        if let Some(d) = &t.declarator {
            self.declarator(d, false);
        }
    }

    fn declaration(&mut self, d: &Declaration) {
        self.specs(&d.specs);
        for id in &d.declarators {
            self.declarator(&id.declarator, false);
            if let Some(n) = &id.declarator.name {
                self.bind(&n.name);
            }
            if let Some(init) = &id.init {
                self.initializer(init);
            }
        }
    }

    fn initializer(&mut self, init: &Initializer) {
        match init {
            Initializer::Expr(e) => self.expr(e),
            Initializer::List(items, _) => {
                for item in items {
                    for d in &item.designators {
                        match d {
                            Designator::Index(e) => self.expr(e),
                            Designator::Range(a, b) => {
                                self.expr(a);
                                self.expr(b);
                            }
                            Designator::Field(_) => {}
                        }
                    }
                    self.initializer(&item.init);
                }
            }
        }
    }

    fn block(&mut self, b: &Block) {
        self.push_scope();
        for s in &b.stmts {
            self.stmt(s);
        }
        self.pop_scope();
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Compound(b) => self.block(b),
            StmtKind::Expr(e) => {
                if let Some(e) = e {
                    self.expr(e);
                }
            }
            StmtKind::Decl(d) => self.declaration(d),
            StmtKind::If { cond, then, els } => {
                self.expr(cond);
                self.stmt(then);
                if let Some(e) = els {
                    self.stmt(e);
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond);
                self.stmt(body);
            }
            StmtKind::DoWhile { body, cond } => {
                self.stmt(body);
                self.expr(cond);
            }
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => {
                self.push_scope();
                match init {
                    Some(ForInit::Decl(d)) => self.declaration(d),
                    Some(ForInit::Expr(e)) => self.expr(e),
                    None => {}
                }
                if let Some(c) = cond {
                    self.expr(c);
                }
                if let Some(st) = step {
                    self.expr(st);
                }
                self.stmt(body);
                self.pop_scope();
            }
            StmtKind::Switch { expr, body } => {
                self.expr(expr);
                self.stmt(body);
            }
            StmtKind::Case { value, body } => {
                self.expr(value);
                self.stmt(body);
            }
            StmtKind::Default(b) | StmtKind::Labeled { body: b, .. } => self.stmt(b),
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e);
                }
            }
            StmtKind::Goto(_) | StmtKind::Break | StmtKind::Continue | StmtKind::Asm => {}
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Ident(n) => self.hit(e.span, n, RefRole::Value),
            ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Char(_) | ExprKind::Str(_) => {}
            ExprKind::Call { callee, args } => {
                self.expr(callee);
                for a in args {
                    self.expr(a);
                }
            }
            ExprKind::Index { base, index } => {
                self.expr(base);
                self.expr(index);
            }
            ExprKind::Member { base, .. } => self.expr(base),
            ExprKind::Unary { expr, .. } | ExprKind::SizeofExpr(expr) => self.expr(expr),
            ExprKind::SizeofType(t) => self.type_name(t),
            ExprKind::Cast { ty, expr } => {
                self.type_name(ty);
                self.expr(expr);
            }
            ExprKind::CompoundLit { ty, items } => {
                self.type_name(ty);
                self.initializer(&Initializer::List(items.clone(), e.span));
            }
            ExprKind::Binary { lhs, rhs, .. } | ExprKind::Assign { lhs, rhs, .. } => {
                self.expr(lhs);
                self.expr(rhs);
            }
            ExprKind::Cond { cond, then, els } => {
                self.expr(cond);
                self.expr(then);
                self.expr(els);
            }
            ExprKind::Comma(items) => {
                for i in items {
                    self.expr(i);
                }
            }
            ExprKind::VaArg { expr, ty } => {
                self.expr(expr);
                self.type_name(ty);
            }
            ExprKind::Offsetof { ty, .. } => self.type_name(ty),
            ExprKind::StmtExpr(b) => self.block(b),
        }
    }
}

/// Names of the files a unit includes directly, per including file.
pub fn include_edges(ast: &CAst) -> Vec<(String, IncludeTarget)> {
    ast.pp
        .includes
        .iter()
        .map(|r| (ast.sources.file(r.from).name.clone(), r.target.clone()))
        .collect()
}

/// All identifiers in a unit that resolve to nothing in Σ and are not standard.
pub fn unknown_externals(fns: &[FunctionUnit]) -> Vec<String> {
    let mut out: Vec<String> = fns
        .iter()
        .flat_map(|f| f.externals.iter())
        .filter(|n| stdlib::lookup(n).is_none())
        .cloned()
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Map from identifier to the file that defines it, used for the file graph.
pub fn definers(sigma: &SymbolTable) -> HashMap<&str, &str> {
    sigma
        .entries
        .iter()
        .map(|(k, d)| (k.as_str(), d.file.as_str()))
        .collect()
}
