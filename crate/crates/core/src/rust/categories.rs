//! Language-neutral statement categories.

use serde::{Deserialize, Serialize};
use syn::{Expr, Stmt};

use crate::c::ast::{self, ExprKind, StmtKind, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatementCategory {
    ControlFlow,
    Assignment,
    Declaration,
    Call,
    Return,
    Other,
}

impl StatementCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            StatementCategory::ControlFlow => "control-flow",
            StatementCategory::Assignment => "assignment",
            StatementCategory::Declaration => "declaration",
            StatementCategory::Call => "call",
            StatementCategory::Return => "return",
            StatementCategory::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    C,
    Rust,
}

use StatementCategory::*;

/// Categories of a statement sequence given as source text (the inside of a
/// function body, without braces).
pub fn normalize_statements(body: &str, language: Language) -> Result<Vec<StatementCategory>, String> {
    match language {
        Language::C => {
            let src = format!("void __body(void) {{\n{body}\n}}\n");
            let ast = crate::c::parse_c(&src).map_err(|e| e.to_string())?;
            let def = ast
                .unit
                .items
                .iter()
                .find_map(|d| match d {
                    ast::ExternalDecl::Func(f) => Some(f),
                    _ => None,
                })
                .ok_or("no function body")?;
            Ok(normalize_c_block(&def.body))
        }
        Language::Rust => {
            let block: syn::Block =
                syn::parse_str(&format!("{{\n{body}\n}}")).map_err(|e| e.to_string())?;
            Ok(normalize_rust_block(&block, false))
        }
    }
}

pub fn normalize_c_block(block: &ast::Block) -> Vec<StatementCategory> {
    let mut out = Vec::new();
    for s in &block.stmts {
        c_stmt(s, false, &mut out);
    }
    out
}

fn c_stmt(s: &ast::Stmt, in_switch: bool, out: &mut Vec<StatementCategory>) {
    match &s.kind {
        StmtKind::Compound(b) => {
            for s in &b.stmts {
                c_stmt(s, in_switch, out);
            }
        }
        StmtKind::Expr(Some(e)) => out.push(c_expr(e)),
        StmtKind::Expr(None) | StmtKind::Asm => out.push(Other),
        StmtKind::Decl(_) => out.push(Declaration),
        StmtKind::If { then, els, .. } => {
            out.push(ControlFlow);
            c_stmt(then, false, out);
            if let Some(e) = els {
                c_stmt(e, false, out);
            }
        }
        StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } | StmtKind::For { body, .. } => {
            out.push(ControlFlow);
            c_stmt(body, false, out);
        }
        StmtKind::Switch { body, .. } => {
            out.push(ControlFlow);
            c_stmt(body, true, out);
        }
        StmtKind::Case { body, .. } | StmtKind::Default(body) => c_stmt(body, in_switch, out),
        StmtKind::Labeled { body, .. } => c_stmt(body, in_switch, out),
        StmtKind::Break if in_switch => {}
        StmtKind::Goto(_) | StmtKind::Break | StmtKind::Continue => out.push(ControlFlow),
        StmtKind::Return(_) => out.push(Return),
    }
}

fn c_expr(e: &ast::Expr) -> StatementCategory {
    match &e.kind {
        ExprKind::Assign { .. } => Assignment,
        ExprKind::Unary {
            op: UnaryOp::PreInc | UnaryOp::PreDec | UnaryOp::PostInc | UnaryOp::PostDec,
            ..
        } => Assignment,
        ExprKind::Call { .. } => Call,
        ExprKind::Cast { expr, .. } => c_expr(expr),
        ExprKind::Comma(items) => items.last().map_or(Other, c_expr),
        _ => Other,
    }
}

/// Categories of a Rust block. With `tail_is_return`, a trailing value
/// expression counts as a return, and the same holds inside the branches of
/// a trailing `if` or `match`.
pub fn normalize_rust_block(block: &syn::Block, tail_is_return: bool) -> Vec<StatementCategory> {
    let mut out = Vec::new();
    rust_block(block, tail_is_return, &mut out);
    out
}

fn rust_block(block: &syn::Block, tail_is_return: bool, out: &mut Vec<StatementCategory>) {
    let n = block.stmts.len();
    for (i, s) in block.stmts.iter().enumerate() {
        match s {
            Stmt::Local(_) => out.push(Declaration),
            Stmt::Item(_) => out.push(Declaration),
            Stmt::Macro(_) => out.push(Call),
            Stmt::Expr(e, semi) => {
                let tail = semi.is_none() && i + 1 == n && tail_is_return;
                rust_expr(e, tail, out)
            }
        }
    }
}

fn rust_expr(e: &Expr, tail: bool, out: &mut Vec<StatementCategory>) {
    match e {
        Expr::If(i) => {
            out.push(ControlFlow);
            rust_block(&i.then_branch, tail, out);
            if let Some((_, els)) = &i.else_branch {
                match &**els {
                    Expr::Block(b) => rust_block(&b.block, tail, out),
                    other => rust_expr(other, tail, out),
                }
            }
        }
        Expr::While(w) => {
            out.push(ControlFlow);
            rust_block(&w.body, false, out);
        }
        Expr::ForLoop(f) => {
            out.push(ControlFlow);
            rust_block(&f.body, false, out);
        }
        Expr::Loop(l) => {
            out.push(ControlFlow);
            rust_block(&l.body, false, out);
        }
        Expr::Match(m) => {
            out.push(ControlFlow);
            for arm in &m.arms {
                match &*arm.body {
                    Expr::Block(b) => rust_block(&b.block, tail, out),
                    Expr::Tuple(t) if t.elems.is_empty() => {}
                    body => rust_expr(body, tail, out),
                }
            }
        }
        Expr::Block(b) => rust_block(&b.block, tail, out),
        Expr::Unsafe(u) => rust_block(&u.block, tail, out),
        Expr::Paren(p) => rust_expr(&p.expr, tail, out),
        Expr::Break(_) | Expr::Continue(_) => out.push(ControlFlow),
        Expr::Return(_) => out.push(Return),
        _ if tail => out.push(Return),
        Expr::Assign(_) => out.push(Assignment),
        Expr::Binary(b) if is_compound_assign(&b.op) => out.push(Assignment),
        Expr::Call(_) | Expr::MethodCall(_) | Expr::Macro(_) => out.push(Call),
        Expr::Cast(c) => rust_expr(&c.expr, false, out),
        _ => out.push(Other),
    }
}

fn is_compound_assign(op: &syn::BinOp) -> bool {
    use syn::BinOp::*;
    matches!(
        op,
        AddAssign(_)
            | SubAssign(_)
            | MulAssign(_)
            | DivAssign(_)
            | RemAssign(_)
            | BitXorAssign(_)
            | BitAndAssign(_)
            | BitOrAssign(_)
            | ShlAssign(_)
            | ShrAssign(_)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_three_statements() {
        assert_eq!(
            normalize_statements("int x = 0; x++; return x;", Language::C).unwrap(),
            vec![Declaration, Assignment, Return]
        );
    }

    #[test]
    fn rust_three_statements() {
        assert_eq!(
            normalize_statements("let mut x = 0; x += 1; return x;", Language::Rust).unwrap(),
            vec![Declaration, Assignment, Return]
        );
    }

    #[test]
    fn empty_bodies() {
        assert!(normalize_statements("", Language::C).unwrap().is_empty());
        assert!(normalize_statements("", Language::Rust).unwrap().is_empty());
    }

    #[test]
    fn nested_bodies_flatten_alike() {
        let c = "int s = 0;\nfor (int i = 0; i < n; i++) { if (i % 2) s += i; else continue; }\nswitch (s) { case 1: printf(\"one\"); break; default: s = 0; }\nreturn s;";
        let r = "let mut s = 0;\nfor i in 0..n { if i % 2 != 0 { s += i; } else { continue; } }\nmatch s { 1 => { print!(\"one\"); } _ => { s = 0; } }\nreturn s;";
        let cc = normalize_statements(c, Language::C).unwrap();
        assert_eq!(cc, normalize_statements(r, Language::Rust).unwrap());
        assert_eq!(
            cc,
            vec![Declaration, ControlFlow, ControlFlow, Assignment, ControlFlow, ControlFlow, Call, Assignment, Return]
        );
    }

    #[test]
    fn tail_expression_is_return() {
        let b: syn::Block = syn::parse_str("{ let y = x * 2; if y > 3 { y } else { 0 } }").unwrap();
        assert_eq!(
            normalize_rust_block(&b, true),
            vec![Declaration, ControlFlow, Return, Return]
        );
        assert_eq!(
            normalize_rust_block(&b, false),
            vec![Declaration, ControlFlow, Other, Other]
        );
    }
}
