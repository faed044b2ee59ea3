//! Data-dependence graphs from intraprocedural reaching definitions.
//!
//! Each definition site is a node labelled with the variable it defines;
//! reads inside that definition belong to the same node. Reads outside any
//! definition get their own use nodes. An edge runs from a definition to
//! every node that reads the variable while the definition reaches it.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::cfg::{build_flow, Atom, Flow};
use super::structure::FunctionUnit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    /// Parameter value on entry.
    Param,
    /// Assignment that replaces the whole variable.
    Def,
    /// Partial or possible update (element, field, pointee, out-argument).
    WeakDef,
    Use,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DdgNode {
    /// 1-based.
    pub id: usize,
    pub symbol: String,
    pub kind: NodeKind,
    /// Variables read by this node.
    pub reads: Vec<String>,
    /// CFG block id.
    pub block: usize,
    /// Index of the statement inside the block; `None` for parameters.
    pub stmt: Option<usize>,
    /// Text of the statement the occurrence belongs to.
    pub text: String,
    /// Byte range of the occurrence in its source file.
    pub span: (u32, u32),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ddg {
    pub nodes: Vec<DdgNode>,
    pub edges: Vec<(usize, usize)>,
}

impl Ddg {
    pub fn node(&self, id: usize) -> Option<&DdgNode> {
        self.nodes.get(id.wrapping_sub(1))
    }

    /// Definition nodes that reach node `id` through any chain of edges,
    /// nearest first.
    pub fn ancestors(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut seen = HashSet::from([id]);
        let mut frontier = vec![id];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for n in frontier {
                for (a, _) in self.edges.iter().filter(|e| e.1 == n) {
                    if seen.insert(*a) {
                        out.push(*a);
                        next.push(*a);
                    }
                }
            }
            next.sort();
            frontier = next;
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Event {
    Node {
        symbol: String,
        kind: NodeKind,
        reads: Vec<String>,
        span: (u32, u32),
    },
}

/// Events an atom contributes, in evaluation order.
struct EventCollector<'v> {
    vars: &'v HashSet<String>,
    aliases: &'v HashMap<String, BTreeSet<String>>,
    events: Vec<Event>,
    /// Reads not attributed to a definition, with the span of their first occurrence.
    loose: Vec<(String, (u32, u32))>,
}

impl<'v> EventCollector<'v> {
    fn is_var(&self, n: &str) -> bool {
        self.vars.contains(n)
    }

    /// Collect variables read by `e` into `out`, emitting nested
    /// definitions as their own events.
    fn reads(&mut self, e: &Expr, out: &mut Vec<String>) {
        match &e.kind {
            ExprKind::Ident(n) => {
                if self.is_var(n) && !out.contains(n) {
                    out.push(n.clone());
                }
            }
            ExprKind::Int(_)
            | ExprKind::Float(_)
            | ExprKind::Char(_)
            | ExprKind::Str(_)
            | ExprKind::SizeofType(_)
            | ExprKind::Offsetof { .. }
            | ExprKind::SizeofExpr(_) => {}
            ExprKind::Call { callee, args } => {
                if callee.as_ident().is_none() {
                    self.reads(callee, out);
                }
                let mut outs = Vec::new();
                for a in args {
                    self.reads(a, out);
                    if let ExprKind::Unary {
                        op: UnaryOp::AddrOf,
                        expr,
                    } = &a.kind
                    {
                        if let Some(root) = root_var(expr) {
                            if self.is_var(root) {
                                outs.push((root.to_string(), span_of(a)));
                            }
                        }
                    }
                }
                for (v, sp) in outs {
                    self.events.push(Event::Node {
                        symbol: v,
                        kind: NodeKind::WeakDef,
                        reads: Vec::new(),
                        span: sp,
                    });
                }
            }
            ExprKind::Index { base, index } => {
                self.reads(base, out);
                self.reads(index, out);
            }
            ExprKind::Member { base, .. } => self.reads(base, out),
            ExprKind::Unary { op, expr } => match op {
                UnaryOp::PreInc | UnaryOp::PreDec | UnaryOp::PostInc | UnaryOp::PostDec => {
                    self.update(expr, None, true, e);
                    if let Some(v) = root_var(expr) {
                        if self.is_var(v) && !out.contains(&v.to_string()) {
                            out.push(v.to_string());
                        }
                    }
                }
                UnaryOp::AddrOf => {
                    if !matches!(expr.kind, ExprKind::Ident(_)) {
                        self.reads(expr, out);
                    }
                }
                _ => self.reads(expr, out),
            },
            ExprKind::Cast { expr, .. } => self.reads(expr, out),
            ExprKind::CompoundLit { items, .. } => self.init_items(items, out),
            ExprKind::Binary { lhs, rhs, .. } => {
                self.reads(lhs, out);
                self.reads(rhs, out);
            }
            ExprKind::Assign { op, lhs, rhs } => {
                self.update(lhs, Some(rhs), op.is_some(), e);
                if let Some(v) = root_var(lhs) {
                    if self.is_var(v) && !out.contains(&v.to_string()) {
                        out.push(v.to_string());
                    }
                }
            }
            ExprKind::Cond { cond, then, els } => {
                self.reads(cond, out);
                self.reads(then, out);
                self.reads(els, out);
            }
            ExprKind::Comma(items) => {
                for i in items {
                    self.reads(i, out);
                }
            }
            ExprKind::VaArg { expr, .. } => self.reads(expr, out),
            ExprKind::StmtExpr(_) => {}
        }
    }

    fn init_items(&mut self, items: &[InitItem], out: &mut Vec<String>) {
        for it in items {
            match &it.init {
                Initializer::Expr(e) => self.reads(e, out),
                Initializer::List(inner, _) => self.init_items(inner, out),
            }
        }
    }

    /// Emit the definition made by assigning to (or incrementing) `target`.
    fn update(&mut self, target: &Expr, value: Option<&Expr>, reads_target: bool, whole: &Expr) {
        let mut reads = Vec::new();
        if let Some(v) = value {
            self.reads(v, &mut reads);
        }
        let (symbols, kind) = self.targets(target, &mut reads);
        if reads_target {
            for s in &symbols {
                if !reads.contains(s) {
                    reads.push(s.clone());
                }
            }
            if let Some(v) = root_var(target) {
                if self.is_var(v) && !reads.iter().any(|r| r == v) {
                    reads.push(v.to_string());
                }
            }
        }
        if symbols.is_empty() {
            for r in reads {
                self.loose_read(r, span_of(whole));
            }
            return;
        }
        for s in symbols {
            self.events.push(Event::Node {
                symbol: s,
                kind,
                reads: reads.clone(),
                span: span_of(whole),
            });
        }
    }

    /// Variables defined by writing through `lhs`, reading any variables
    /// the location computation needs.
    fn targets(&mut self, lhs: &Expr, reads: &mut Vec<String>) -> (Vec<String>, NodeKind) {
        match &lhs.kind {
            ExprKind::Ident(n) if self.is_var(n) => (vec![n.clone()], NodeKind::Def),
            ExprKind::Index { base, index } => {
                self.reads(index, reads);
                match root_var(base) {
                    Some(v) if self.is_var(v) => {
                        self.reads_inner(base, reads);
                        (vec![v.to_string()], NodeKind::WeakDef)
                    }
                    _ => {
                        self.reads(base, reads);
                        (Vec::new(), NodeKind::WeakDef)
                    }
                }
            }
            ExprKind::Member { base, arrow, .. } => {
                if *arrow {
                    self.reads(base, reads);
                    let targets = root_var(base)
                        .and_then(|p| self.aliases.get(p))
                        .map(|s| s.iter().cloned().collect())
                        .unwrap_or_default();
                    (targets, NodeKind::WeakDef)
                } else {
                    match root_var(base) {
                        Some(v) if self.is_var(v) => {
                            self.reads_inner(base, reads);
                            (vec![v.to_string()], NodeKind::WeakDef)
                        }
                        _ => (Vec::new(), NodeKind::WeakDef),
                    }
                }
            }
            ExprKind::Unary {
                op: UnaryOp::Deref,
                expr,
            } => {
                self.reads(expr, reads);
                let targets = match expr.as_ident() {
                    Some(p) => self
                        .aliases
                        .get(p)
                        .map(|s| s.iter().cloned().collect())
                        .unwrap_or_default(),
                    None => Vec::new(),
                };
                (targets, NodeKind::WeakDef)
            }
            ExprKind::Cast { expr, .. } => self.targets(expr, reads),
            _ => {
                self.reads(lhs, reads);
                (Vec::new(), NodeKind::WeakDef)
            }
        }
    }

    /// Reads in a location path below its root variable (indices of nested
    /// subscripts), without counting the root itself.
    fn reads_inner(&mut self, e: &Expr, out: &mut Vec<String>) {
        match &e.kind {
            ExprKind::Index { base, index } => {
                self.reads(index, out);
                self.reads_inner(base, out);
            }
            ExprKind::Member { base, .. } => self.reads_inner(base, out),
            _ => {}
        }
    }

    fn loose_read(&mut self, v: String, span: (u32, u32)) {
        if !self.loose.iter().any(|(x, _)| *x == v) {
            self.loose.push((v, span));
        }
    }

    /// Reads at the top level of an atom become loose reads; definitions
    /// are emitted as events.
    fn top(&mut self, e: &Expr) {
        let mut reads = Vec::new();
        self.reads_top(e, &mut reads);
        for r in reads {
            self.loose_read(r, span_of(e));
        }
    }

    fn reads_top(&mut self, e: &Expr, out: &mut Vec<String>) {
        match &e.kind {
            ExprKind::Assign { .. } => {
                let mut ignored = Vec::new();
                self.reads(e, &mut ignored);
            }
            ExprKind::Unary {
                op: UnaryOp::PreInc | UnaryOp::PreDec | UnaryOp::PostInc | UnaryOp::PostDec,
                ..
            } => {
                let mut ignored = Vec::new();
                self.reads(e, &mut ignored);
            }
            ExprKind::Comma(items) => {
                for i in items {
                    self.reads_top(i, out);
                }
            }
            _ => self.reads(e, out),
        }
    }

    fn declaration(&mut self, d: &Declaration) {
        for id in &d.declarators {
            let Some(name) = &id.declarator.name else { continue };
            let Some(init) = &id.init else { continue };
            let mut reads = Vec::new();
            match init {
                Initializer::Expr(e) => self.reads(e, &mut reads),
                Initializer::List(items, _) => self.init_items(items, &mut reads),
            }
            self.events.push(Event::Node {
                symbol: name.name.clone(),
                kind: NodeKind::Def,
                reads,
                span: (id.span.lo, id.span.hi),
            });
        }
    }
}

fn span_of(e: &Expr) -> (u32, u32) {
    (e.span.lo, e.span.hi)
}

/// Variable at the root of an lvalue path such as `a[i].f`.
fn root_var(e: &Expr) -> Option<&str> {
    match &e.kind {
        ExprKind::Ident(n) => Some(n),
        ExprKind::Index { base, .. } => root_var(base),
        ExprKind::Member { base, arrow: false, .. } => root_var(base),
        ExprKind::Cast { expr, .. } => root_var(expr),
        _ => None,
    }
}

/// Variables of a function: parameters, locals and globals it references.
fn collect_vars(unit: &FunctionUnit, def: &FunctionDef) -> (Vec<String>, HashSet<String>) {
    let mut params = Vec::new();
    if let Some(p) = def.declarator.function_params() {
        for pd in &p.params {
            if let Some(n) = pd.declarator.as_ref().and_then(|d| d.name.as_ref()) {
                params.push(n.name.clone());
            }
        }
    }
    let mut vars: HashSet<String> = params.iter().cloned().collect();
    vars.extend(unit.globals_used.iter().cloned());
    fn walk_block(b: &Block, vars: &mut HashSet<String>) {
        for s in &b.stmts {
            walk_stmt(s, vars);
        }
    }
    fn walk_decl(d: &Declaration, vars: &mut HashSet<String>) {
        if d.specs.is_typedef() {
            return;
        }
        for id in &d.declarators {
            if id.declarator.is_function() {
                continue;
            }
            if let Some(n) = &id.declarator.name {
                vars.insert(n.name.clone());
            }
        }
    }
    fn walk_stmt(s: &Stmt, vars: &mut HashSet<String>) {
        match &s.kind {
            StmtKind::Compound(b) => walk_block(b, vars),
            StmtKind::Decl(d) => walk_decl(d, vars),
            StmtKind::If { then, els, .. } => {
                walk_stmt(then, vars);
                if let Some(e) = els {
                    walk_stmt(e, vars);
                }
            }
            StmtKind::While { body, .. }
            | StmtKind::DoWhile { body, .. }
            | StmtKind::Switch { body, .. }
            | StmtKind::Case { body, .. }
            | StmtKind::Default(body)
            | StmtKind::Labeled { body, .. } => walk_stmt(body, vars),
            StmtKind::For { init, body, .. } => {
                if let Some(ForInit::Decl(d)) = init {
                    walk_decl(d, vars);
                }
                walk_stmt(body, vars);
            }
            _ => {}
        }
    }
    walk_block(&def.body, &mut vars);
    (params, vars)
}

/// `p = &x` facts anywhere in the function.
fn collect_aliases(flow: &Flow<'_>) -> HashMap<String, BTreeSet<String>> {
    fn addr_root(e: &Expr) -> Option<&str> {
        match &e.kind {
            ExprKind::Unary {
                op: UnaryOp::AddrOf,
                expr,
            } => root_var(expr),
            ExprKind::Cast { expr, .. } => addr_root(expr),
            _ => None,
        }
    }
    fn scan(e: &Expr, out: &mut HashMap<String, BTreeSet<String>>) {
        match &e.kind {
            ExprKind::Assign { op: None, lhs, rhs } => {
                if let (Some(p), Some(x)) = (lhs.as_ident(), addr_root(rhs)) {
                    out.entry(p.to_string()).or_default().insert(x.to_string());
                }
                scan(rhs, out);
            }
            ExprKind::Comma(items) => items.iter().for_each(|i| scan(i, out)),
            _ => {}
        }
    }
    let mut out: HashMap<String, BTreeSet<String>> = HashMap::new();
    for atoms in &flow.blocks {
        for a in atoms {
            match a {
                Atom::Decl(d) => {
                    for id in &d.declarators {
                        if let (Some(n), Some(Initializer::Expr(e))) = (&id.declarator.name, &id.init)
                        {
                            if let Some(x) = addr_root(e) {
                                out.entry(n.name.clone())
                                    .or_default()
                                    .insert(x.to_string());
                            }
                        }
                    }
                }
                Atom::Stmt(Stmt {
                    kind: StmtKind::Expr(Some(e)),
                    ..
                }) => scan(e, &mut out),
                Atom::Expr(e, _) => scan(e, &mut out),
                _ => {}
            }
        }
    }
    out
}

fn atom_events(c: &mut EventCollector<'_>, atom: &Atom<'_>) -> Vec<Event> {
    c.events.clear();
    c.loose.clear();
    match atom {
        Atom::Decl(d) => c.declaration(d),
        Atom::Expr(e, _) => c.top(e),
        Atom::Stmt(s) => match &s.kind {
            StmtKind::Expr(Some(e)) | StmtKind::Return(Some(e)) => c.top(e),
            _ => {}
        },
    }
    let mut events = std::mem::take(&mut c.events);
    // Loose reads happen before the atom's own definitions take effect only
    // when they appear first; uses are placed ahead so `x = f(x)` style
    // statements never read their own write.
    let loose: Vec<Event> = c
        .loose
        .drain(..)
        .map(|(v, span)| Event::Node {
            symbol: v.clone(),
            kind: NodeKind::Use,
            reads: vec![v],
            span,
        })
        .collect();
    let mut all = loose;
    all.append(&mut events);
    all
}

/// Data-dependence graph of a defined function.
pub fn build_ddg(unit: &FunctionUnit) -> Ddg {
    let Some(def) = &unit.def else {
        return Ddg::default();
    };
    let flow = build_flow(&def.body);
    let (params, vars) = collect_vars(unit, def);
    let aliases = collect_aliases(&flow);
    let mut collector = EventCollector {
        vars: &vars,
        aliases: &aliases,
        events: Vec::new(),
        loose: Vec::new(),
    };

    let mut nodes: Vec<DdgNode> = Vec::new();
    let sig = def
        .declarator
        .function_params()
        .map(|p| {
            p.params
                .iter()
                .map(|pd| (pd.span.lo, pd.span.hi))
                .collect::<Vec<_>>()
        })
        .unwrap_or_default();
    for (i, p) in params.iter().enumerate() {
        nodes.push(DdgNode {
            id: nodes.len() + 1,
            symbol: p.clone(),
            kind: NodeKind::Param,
            reads: Vec::new(),
            block: 1,
            stmt: None,
            text: p.clone(),
            span: sig.get(i).copied().unwrap_or((0, 0)),
        });
    }
    // Per block: node ids in order.
    let mut block_nodes: Vec<Vec<usize>> = vec![Vec::new(); flow.blocks.len()];
    for (b, atoms) in flow.blocks.iter().enumerate() {
        for (si, atom) in atoms.iter().enumerate() {
            let text = Flow::atom_text(unit, atom);
            for ev in atom_events(&mut collector, atom) {
                let Event::Node {
                    symbol,
                    kind,
                    reads,
                    span,
                } = ev;
                nodes.push(DdgNode {
                    id: nodes.len() + 1,
                    symbol,
                    kind,
                    reads,
                    block: b + 1,
                    stmt: Some(si),
                    text: text.clone(),
                    span,
                });
                block_nodes[b].push(nodes.len());
            }
        }
    }

    let is_def = |k: NodeKind| k != NodeKind::Use;
    let n = flow.blocks.len();
    let transfer = |input: &BTreeSet<usize>, b: usize| -> BTreeSet<usize> {
        let mut cur = input.clone();
        for &id in &block_nodes[b] {
            let node = &nodes[id - 1];
            if node.kind == NodeKind::Def {
                cur.retain(|d| nodes[d - 1].symbol != node.symbol);
            }
            if is_def(node.kind) {
                cur.insert(id);
            }
        }
        cur
    };
    let entry_defs: BTreeSet<usize> = (1..=params.len()).collect();
    let mut inn = vec![BTreeSet::new(); n];
    let mut out = vec![BTreeSet::new(); n];
    let mut changed = true;
    while changed {
        changed = false;
        for b in 0..n {
            let mut i: BTreeSet<usize> = if b == 0 { entry_defs.clone() } else { BTreeSet::new() };
            for (p, s) in &flow.edges {
                if *s == b {
                    i.extend(out[*p].iter().copied());
                }
            }
            let o = transfer(&i, b);
            if i != inn[b] || o != out[b] {
                inn[b] = i;
                out[b] = o;
                changed = true;
            }
        }
    }

    let mut edges = BTreeSet::new();
    for b in 0..n {
        let mut cur = inn[b].clone();
        for &id in &block_nodes[b] {
            let node = &nodes[id - 1];
            for r in &node.reads {
                for &d in &cur {
                    if nodes[d - 1].symbol == *r && d != id {
                        edges.insert((d, id));
                    }
                }
            }
            if node.kind == NodeKind::Def {
                cur.retain(|d| nodes[d - 1].symbol != node.symbol);
            }
            if is_def(node.kind) {
                cur.insert(id);
            }
        }
    }
    Ddg {
        nodes,
        edges: edges.into_iter().collect(),
    }
}
