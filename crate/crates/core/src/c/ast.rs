//! C abstract syntax tree. Every node keeps the span of the source it came
//! from so later stages can quote original text.

use super::source::Span;

#[derive(Debug, Clone, Default)]
pub struct TranslationUnit {
    pub items: Vec<ExternalDecl>,
}

#[derive(Debug, Clone)]
pub enum ExternalDecl {
    Decl(Declaration),
    Func(FunctionDef),
}

impl ExternalDecl {
    pub fn span(&self) -> Span {
        match self {
            ExternalDecl::Decl(d) => d.span,
            ExternalDecl::Func(f) => f.span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    Typedef,
    Extern,
    Static,
    Auto,
    Register,
    ThreadLocal,
}

#[derive(Debug, Clone)]
pub struct DeclSpecs {
    pub storage: Option<Storage>,
    pub inline: bool,
    pub ty: TypeSpec,
    pub span: Span,
}

impl DeclSpecs {
    pub fn is_typedef(&self) -> bool {
        self.storage == Some(Storage::Typedef)
    }
}

#[derive(Debug, Clone)]
pub enum TypeSpec {
    /// Builtin words in source order, e.g. `unsigned long`.
    Builtin(String),
    Named(Ident),
    Record(Box<RecordSpec>),
    Enum(Box<EnumSpec>),
    /// `typeof(...)` and other constructs kept opaque.
    Opaque,
}

#[derive(Debug, Clone)]
pub struct RecordSpec {
    pub is_union: bool,
    pub tag: Option<Ident>,
    pub fields: Option<Vec<FieldDecl>>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct FieldDecl {
    pub specs: DeclSpecs,
    pub declarators: Vec<Declarator>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct EnumSpec {
    pub tag: Option<Ident>,
    pub variants: Option<Vec<Enumerator>>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Enumerator {
    pub name: Ident,
    pub value: Option<Expr>,
}

#[derive(Debug, Clone)]
pub struct Declarator {
    pub name: Option<Ident>,
    /// Type derivations from the name outwards.
    pub derived: Vec<Derived>,
    pub span: Span,
}

impl Declarator {
    pub fn function_params(&self) -> Option<&FnParams> {
        match self.derived.first() {
            Some(Derived::Function(p)) => Some(p),
            _ => None,
        }
    }

    pub fn is_function(&self) -> bool {
        self.function_params().is_some()
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self.derived.first(), Some(Derived::Pointer))
    }
}

#[derive(Debug, Clone)]
pub enum Derived {
    Pointer,
    Array(Option<Box<Expr>>),
    Function(FnParams),
}

#[derive(Debug, Clone, Default)]
pub struct FnParams {
    pub params: Vec<ParamDecl>,
    pub variadic: bool,
}

#[derive(Debug, Clone)]
pub struct ParamDecl {
    pub specs: DeclSpecs,
    pub declarator: Option<Declarator>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Declaration {
    pub specs: DeclSpecs,
    pub declarators: Vec<InitDeclarator>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct InitDeclarator {
    pub declarator: Declarator,
    pub init: Option<Initializer>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum Initializer {
    Expr(Expr),
    List(Vec<InitItem>, Span),
}

#[derive(Debug, Clone)]
pub struct InitItem {
    pub designators: Vec<Designator>,
    pub init: Initializer,
}

#[derive(Debug, Clone)]
pub enum Designator {
    Index(Expr),
    Range(Expr, Expr),
    Field(Ident),
}

#[derive(Debug, Clone)]
pub struct TypeName {
    pub specs: DeclSpecs,
    pub declarator: Option<Declarator>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub specs: DeclSpecs,
    pub declarator: Declarator,
    pub body: Block,
    pub span: Span,
}

impl FunctionDef {
    pub fn name(&self) -> &str {
        self.declarator.name.as_ref().map_or("", |n| n.name.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum StmtKind {
    Compound(Block),
    Expr(Option<Expr>),
    Decl(Declaration),
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    DoWhile {
        body: Box<Stmt>,
        cond: Expr,
    },
    For {
        init: Option<ForInit>,
        cond: Option<Expr>,
        step: Option<Expr>,
        body: Box<Stmt>,
    },
    Switch {
        expr: Expr,
        body: Box<Stmt>,
    },
    Case {
        value: Expr,
        body: Box<Stmt>,
    },
    Default(Box<Stmt>),
    Labeled {
        label: Ident,
        body: Box<Stmt>,
    },
    Goto(Ident),
    Break,
    Continue,
    Return(Option<Expr>),
    Asm,
}

#[derive(Debug, Clone)]
pub enum ForInit {
    Decl(Declaration),
    Expr(Expr),
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    PreInc,
    PreDec,
    PostInc,
    PostDec,
    AddrOf,
    Deref,
    Plus,
    Neg,
    BitNot,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Mul,
    Div,
    Rem,
    Add,
    Sub,
    Shl,
    Shr,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitOr,
    And,
    Or,
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Ident(String),
    Int(String),
    Float(String),
    Char(String),
    Str(String),
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Member {
        base: Box<Expr>,
        field: Ident,
        arrow: bool,
    },
    Unary {
        op: UnaryOp,
        expr: Box<Expr>,
    },
    SizeofExpr(Box<Expr>),
    SizeofType(Box<TypeName>),
    Cast {
        ty: Box<TypeName>,
        expr: Box<Expr>,
    },
    CompoundLit {
        ty: Box<TypeName>,
        items: Vec<InitItem>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// `op` is the arithmetic part of a compound assignment.
    Assign {
        op: Option<BinOp>,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Cond {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
    Comma(Vec<Expr>),
    VaArg {
        expr: Box<Expr>,
        ty: Box<TypeName>,
    },
    Offsetof {
        ty: Box<TypeName>,
        member: String,
    },
    StmtExpr(Block),
}

impl Expr {
    /// Name of the variable this expression denotes, if it is a plain identifier.
    pub fn as_ident(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident(n) => Some(n),
            _ => None,
        }
    }
}
