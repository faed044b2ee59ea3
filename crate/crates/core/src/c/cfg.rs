//! Basic-block control-flow graphs for C function bodies.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::structure::FunctionUnit;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    /// 1-based.
    pub id: usize,
    /// Statement texts in execution order. Conditions appear as `if (c)`,
    /// `while (c)`, `for (...)` or `switch (e)`.
    pub stmts: Vec<String>,
}

impl Block {
    pub fn text(&self) -> String {
        self.stmts.join("\n")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cfg {
    pub blocks: Vec<Block>,
    pub edges: Vec<(usize, usize)>,
    pub entry: usize,
}

impl Cfg {
    pub fn successors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == id).map(|e| e.1)
    }

    pub fn predecessors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.1 == id).map(|e| e.0)
    }

    /// Blocks visited by a depth-first search from the entry.
    pub fn reachable(&self) -> HashSet<usize> {
        let mut seen = HashSet::new();
        let mut stack = vec![self.entry];
        while let Some(b) = stack.pop() {
            if self.blocks.iter().any(|x| x.id == b) && seen.insert(b) {
                stack.extend(self.successors(b));
            }
        }
        seen
    }
}

/// One statement-level element of a block, tied back to the AST.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Atom<'a> {
    Stmt(&'a Stmt),
    Decl(&'a Declaration),
    /// An expression evaluated for effect or as a condition.
    Expr(&'a Expr, AtomForm),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum AtomForm {
    Plain,
    If,
    While,
    For,
    Switch,
    DoWhile,
}

/// A built graph with AST references, before serialization.
pub(crate) struct Flow<'a> {
    pub blocks: Vec<Vec<Atom<'a>>>,
    pub edges: Vec<(usize, usize)>,
}

impl<'a> Flow<'a> {
    pub fn atom_text(unit: &FunctionUnit, atom: &Atom<'_>) -> String {
        match atom {
            Atom::Stmt(s) => unit.text(s.span).trim().to_string(),
            Atom::Decl(d) => unit.text(d.span).trim().to_string(),
            Atom::Expr(e, form) => {
                let t = unit.text(e.span).trim();
                match form {
                    AtomForm::Plain => format!("{t};"),
                    AtomForm::If => format!("if ({t})"),
                    AtomForm::While | AtomForm::DoWhile => format!("while ({t})"),
                    AtomForm::For => format!("for (; {t}; )"),
                    AtomForm::Switch => format!("switch ({t})"),
                }
            }
        }
    }

    pub fn to_cfg(&self, unit: &FunctionUnit) -> Cfg {
        Cfg {
            blocks: self
                .blocks
                .iter()
                .enumerate()
                .map(|(i, atoms)| Block {
                    id: i + 1,
                    stmts: atoms.iter().map(|a| Self::atom_text(unit, a)).collect(),
                })
                .collect(),
            edges: self.edges.iter().map(|(a, b)| (a + 1, b + 1)).collect(),
            entry: 1,
        }
    }
}

#[derive(Default)]
struct Jumps {
    breaks: Vec<usize>,
    continues: Vec<usize>,
    is_loop: bool,
    /// Switch dispatch block, when this context is a switch.
    switch: Option<usize>,
    has_default: bool,
}

struct Builder<'a> {
    blocks: Vec<Vec<Atom<'a>>>,
    edges: Vec<(usize, usize)>,
    cur: Option<usize>,
    jumps: Vec<Jumps>,
    labels: HashMap<String, usize>,
    gotos: Vec<(usize, String)>,
}

impl<'a> Builder<'a> {
    fn new_block(&mut self) -> usize {
        self.blocks.push(Vec::new());
        self.blocks.len() - 1
    }

    fn edge(&mut self, a: usize, b: usize) {
        if !self.edges.contains(&(a, b)) {
            self.edges.push((a, b));
        }
    }

    /// Current block, opening a fresh (unreachable) one after a jump.
    fn current(&mut self) -> usize {
        match self.cur {
            Some(b) => b,
            None => {
                let b = self.new_block();
                self.cur = Some(b);
                b
            }
        }
    }

    fn push(&mut self, atom: Atom<'a>) {
        let b = self.current();
        self.blocks[b].push(atom);
    }

    /// Start a block that control flows into from the current one. An empty
    /// current block is reused.
    fn enter_new(&mut self) -> usize {
        match self.cur {
            Some(b) if self.blocks[b].is_empty() => b,
            Some(b) => {
                let n = self.new_block();
                self.edge(b, n);
                self.cur = Some(n);
                n
            }
            None => {
                let n = self.new_block();
                self.cur = Some(n);
                n
            }
        }
    }

    fn flow_from_current(&mut self, to: usize) {
        if let Some(c) = self.cur {
            self.edge(c, to);
        }
    }

    fn stmt(&mut self, s: &'a Stmt) {
        match &s.kind {
            StmtKind::Compound(b) => {
                for st in &b.stmts {
                    self.stmt(st);
                }
            }
            StmtKind::Expr(None) => {}
            StmtKind::Expr(Some(_)) | StmtKind::Asm => self.push(Atom::Stmt(s)),
            StmtKind::Decl(d) => self.push(Atom::Decl(d)),
            StmtKind::If { cond, then, els } => {
                self.push(Atom::Expr(cond, AtomForm::If));
                let c = self.current();
                let t = self.new_block();
                self.edge(c, t);
                self.cur = Some(t);
                self.stmt(then);
                let then_end = self.cur;
                let else_end = match els {
                    Some(e) => {
                        let eb = self.new_block();
                        self.edge(c, eb);
                        self.cur = Some(eb);
                        self.stmt(e);
                        self.cur
                    }
                    None => Some(c),
                };
                let join = self.new_block();
                for end in [then_end, else_end].into_iter().flatten() {
                    self.edge(end, join);
                }
                self.cur = Some(join);
            }
            StmtKind::While { cond, body } => {
                let h = self.enter_new();
                self.blocks[h].push(Atom::Expr(cond, AtomForm::While));
                let b = self.new_block();
                self.edge(h, b);
                self.cur = Some(b);
                self.jumps.push(Jumps {
                    is_loop: true,
                    ..Default::default()
                });
                self.stmt(body);
                self.flow_from_current(h);
                let j = self.jumps.pop().unwrap();
                for c in j.continues {
                    self.edge(c, h);
                }
                let exit = self.new_block();
                self.edge(h, exit);
                for br in j.breaks {
                    self.edge(br, exit);
                }
                self.cur = Some(exit);
            }
            StmtKind::DoWhile { body, cond } => {
                let b = self.enter_new();
                self.jumps.push(Jumps {
                    is_loop: true,
                    ..Default::default()
                });
                self.stmt(body);
                let j = self.jumps.pop().unwrap();
                let c = self.new_block();
                self.flow_from_current(c);
                for k in j.continues {
                    self.edge(k, c);
                }
                self.blocks[c].push(Atom::Expr(cond, AtomForm::DoWhile));
                self.edge(c, b);
                let exit = self.new_block();
                self.edge(c, exit);
                for br in j.breaks {
                    self.edge(br, exit);
                }
                self.cur = Some(exit);
            }
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => {
                match init {
                    Some(ForInit::Decl(d)) => self.push(Atom::Decl(d)),
                    Some(ForInit::Expr(e)) => self.push(Atom::Expr(e, AtomForm::Plain)),
                    None => {}
                }
                let h = self.enter_new();
                if let Some(c) = cond {
                    self.blocks[h].push(Atom::Expr(c, AtomForm::For));
                }
                let b = self.new_block();
                self.edge(h, b);
                self.cur = Some(b);
                self.jumps.push(Jumps {
                    is_loop: true,
                    ..Default::default()
                });
                self.stmt(body);
                let j = self.jumps.pop().unwrap();
                let latch = match step {
                    Some(st) => {
                        let s = self.new_block();
                        self.flow_from_current(s);
                        self.blocks[s].push(Atom::Expr(st, AtomForm::Plain));
                        self.edge(s, h);
                        s
                    }
                    None => {
                        self.flow_from_current(h);
                        h
                    }
                };
                for c in j.continues {
                    self.edge(c, latch);
                }
                let exit = self.new_block();
                if cond.is_some() {
                    self.edge(h, exit);
                }
                for br in j.breaks {
                    self.edge(br, exit);
                }
                self.cur = Some(exit);
            }
            StmtKind::Switch { expr, body } => {
                self.push(Atom::Expr(expr, AtomForm::Switch));
                let sw = self.current();
                self.cur = None;
                self.jumps.push(Jumps {
                    switch: Some(sw),
                    ..Default::default()
                });
                self.stmt(body);
                let j = self.jumps.pop().unwrap();
                let exit = self.new_block();
                self.flow_from_current(exit);
                if !j.has_default {
                    self.edge(sw, exit);
                }
                for br in j.breaks {
                    self.edge(br, exit);
                }
                self.cur = Some(exit);
            }
            StmtKind::Case { body, .. } | StmtKind::Default(body) => {
                let is_default = matches!(s.kind, StmtKind::Default(_));
                let sw = self.jumps.iter_mut().rev().find(|j| j.switch.is_some());
                let dispatch = sw.map(|j| {
                    j.has_default |= is_default;
                    j.switch.unwrap()
                });
                let b = self.new_block();
                self.flow_from_current(b);
                if let Some(d) = dispatch {
                    self.edge(d, b);
                }
                self.cur = Some(b);
                self.stmt(body);
            }
            StmtKind::Labeled { label, body } => {
                let b = self.new_block();
                self.flow_from_current(b);
                self.labels.insert(label.name.clone(), b);
                self.cur = Some(b);
                self.stmt(body);
            }
            StmtKind::Goto(label) => {
                self.push(Atom::Stmt(s));
                let c = self.current();
                self.gotos.push((c, label.name.clone()));
                self.cur = None;
            }
            StmtKind::Break => {
                self.push(Atom::Stmt(s));
                let c = self.current();
                if let Some(j) = self.jumps.last_mut() {
                    j.breaks.push(c);
                }
                self.cur = None;
            }
            StmtKind::Continue => {
                self.push(Atom::Stmt(s));
                let c = self.current();
                if let Some(j) = self.jumps.iter_mut().rev().find(|j| j.is_loop) {
                    j.continues.push(c);
                }
                self.cur = None;
            }
            StmtKind::Return(_) => {
                self.push(Atom::Stmt(s));
                self.cur = None;
            }
        }
    }
}

/// Build the flow graph of a function body, pruning unreachable blocks and
/// numbering the rest in creation order.
pub(crate) fn build_flow(body: &super::ast::Block) -> Flow<'_> {
    let mut b = Builder {
        blocks: vec![Vec::new()],
        edges: Vec::new(),
        cur: Some(0),
        jumps: Vec::new(),
        labels: HashMap::new(),
        gotos: Vec::new(),
    };
    for s in &body.stmts {
        b.stmt(s);
    }
    for (from, label) in std::mem::take(&mut b.gotos) {
        if let Some(&to) = b.labels.get(&label) {
            b.edge(from, to);
        }
    }
    let mut seen = vec![false; b.blocks.len()];
    let mut stack = vec![0];
    while let Some(x) = stack.pop() {
        if std::mem::replace(&mut seen[x], true) {
            continue;
        }
        stack.extend(b.edges.iter().filter(|e| e.0 == x).map(|e| e.1));
    }
    let mut remap = vec![usize::MAX; b.blocks.len()];
    let mut blocks = Vec::new();
    for (i, atoms) in b.blocks.into_iter().enumerate() {
        if seen[i] {
            remap[i] = blocks.len();
            blocks.push(atoms);
        }
    }
    let edges = b
        .edges
        .iter()
        .filter(|(x, y)| seen[*x] && seen[*y])
        .map(|(x, y)| (remap[*x], remap[*y]))
        .collect();
    Flow { blocks, edges }
}

/// Control-flow graph of a defined function. Declarations yield an empty graph.
pub fn build_cfg(unit: &FunctionUnit) -> Cfg {
    match &unit.def {
        Some(def) => build_flow(&def.body).to_cfg(unit),
        None => Cfg::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_c;
    use super::super::structure::extract_structure;
    use super::*;

    fn cfg_of(src: &str) -> Cfg {
        let (_, fns) = extract_structure(&parse_c(src).unwrap());
        build_cfg(&fns[0])
    }

    #[test]
    fn straight_line_is_one_block() {
        let g = cfg_of("int f(void){ return 0; }");
        assert_eq!(g.blocks.len(), 1);
        assert!(g.edges.is_empty());
        assert_eq!(g.blocks[0].stmts, vec!["return 0;"]);
    }

    #[test]
    fn if_else_diamond() {
        let g = cfg_of("void f(int c){ int x; if (c) x=1; else x=2; }");
        assert_eq!(g.blocks.len(), 4);
        assert_eq!(g.edges, vec![(1, 2), (1, 3), (2, 4), (3, 4)]);
        assert_eq!(g.blocks[0].stmts, vec!["int x;", "if (c)"]);
    }

    #[test]
    fn while_has_back_edge() {
        let g = cfg_of("void f(int c){ int x = 0; while (c) { x++; } }");
        assert!(g.edges.contains(&(3, 2)));
        assert_eq!(g.blocks[1].stmts, vec!["while (c)"]);
        assert_eq!(g.reachable().len(), g.blocks.len());
    }

    #[test]
    fn for_loop_with_break_and_continue() {
        let g = cfg_of(
            "int f(int n){ int s = 0; for (int i = 0; i < n; i++) { if (i == 3) continue; if (i > 8) break; s += i; } return s; }",
        );
        assert_eq!(g.reachable().len(), g.blocks.len());
        let step = g.blocks.iter().find(|b| b.stmts == ["i++;"]).unwrap().id;
        let header = g.blocks.iter().find(|b| b.stmts == ["for (; i < n; )"]).unwrap().id;
        assert!(g.edges.contains(&(step, header)));
    }

    #[test]
    fn code_after_return_is_pruned() {
        let g = cfg_of("int f(void){ return 1; f(); }");
        assert_eq!(g.blocks.len(), 1);
    }

    #[test]
    fn switch_and_goto() {
        let g = cfg_of(
            "int f(int k){ switch (k) { case 1: k++; case 2: k--; break; default: k = 0; } again: if (k) goto again; return k; }",
        );
        assert_eq!(g.reachable().len(), g.blocks.len());
        let sw = g.blocks.iter().find(|b| b.stmts.last().is_some_and(|s| s.starts_with("switch"))).unwrap().id;
        assert_eq!(g.successors(sw).count(), 3);
    }
}
