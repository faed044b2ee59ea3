//! Recursive-descent parser for preprocessed C (C11 plus common GNU forms).

use std::collections::HashMap;

use thiserror::Error;

use super::ast::*;
use super::lexer::{TokKind, Token};
use super::source::{SourceMap, Span};
use super::stdlib;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{location}: {message}")]
pub struct ParseError {
    /// `file:line:col`
    pub location: String,
    pub message: String,
    pub span: Option<Span>,
}

type PResult<T> = Result<T, ParseError>;

const TYPE_WORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool",
    "_Complex", "__signed__", "__signed", "__int128", "_Float128", "__unsigned",
];
const QUALIFIERS: &[&str] = &[
    "const", "volatile", "restrict", "__restrict", "__restrict__", "__const", "__volatile__",
    "__volatile",
];
const STORAGE: &[&str] = &[
    "typedef", "extern", "static", "auto", "register", "_Thread_local", "__thread",
];
const FN_SPECS: &[&str] = &["inline", "__inline", "__inline__", "_Noreturn"];
const ATTRIBUTES: &[&str] = &["__attribute__", "__attribute", "__declspec", "_Alignas", "__asm__", "__asm", "asm"];

pub struct Parser<'s> {
    toks: Vec<Token>,
    pos: usize,
    sm: &'s SourceMap,
    /// Innermost last; `true` marks a typedef name, `false` an ordinary
    /// identifier that shadows one.
    scopes: Vec<HashMap<String, bool>>,
}

impl<'s> Parser<'s> {
    pub fn new(toks: Vec<Token>, sm: &'s SourceMap) -> Self {
        let mut global = HashMap::new();
        for name in stdlib::type_names() {
            global.insert(name.to_string(), true);
        }
        Parser {
            toks,
            pos: 0,
            sm,
            scopes: vec![global],
        }
    }

    pub fn parse_unit(mut self) -> PResult<TranslationUnit> {
        let mut items = Vec::new();
        while self.peek().is_some() {
            if self.eat(";") || self.eat("__extension__") {
                continue;
            }
            if self.at("_Static_assert") || self.at("asm") || self.at("__asm__") {
                self.bump();
                self.skip_group()?;
                self.eat(";");
                continue;
            }
            items.push(self.external_decl()?);
        }
        Ok(TranslationUnit { items })
    }

    // ---- token helpers ----

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.toks.get(self.pos + n)
    }

    fn at(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.is(s))
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.at(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }

    fn cur_span(&self) -> Span {
        match self.peek() {
            Some(t) => t.span,
            None => self.eof_span(),
        }
    }

    fn eof_span(&self) -> Span {
        match self.toks.last() {
            Some(t) => Span {
                file: t.span.file,
                lo: t.span.hi,
                hi: t.span.hi,
            },
            None => Span::new(super::source::FileId(0), 0, 0),
        }
    }

    fn prev_span(&self) -> Span {
        if self.pos == 0 {
            return self.cur_span();
        }
        self.toks[self.pos - 1].span
    }

    fn span_from(&self, start: Span) -> Span {
        start.to(self.prev_span())
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let span = self.cur_span();
        let found = match self.peek() {
            Some(t) => format!(", found `{}`", t.text),
            None => ", found end of input".to_string(),
        };
        ParseError {
            location: if self.sm.files().next().is_some() {
                self.sm.describe(span)
            } else {
                "<input>".into()
            },
            message: format!("{}{}", message.into(), found),
            span: Some(span),
        }
    }

    fn expect(&mut self, s: &str) -> PResult<Token> {
        if self.at(s) {
            Ok(self.bump())
        } else {
            Err(self.error(format!("expected `{s}`")))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek() {
            Some(t) if t.is_ident() && !is_keyword(&t.text) => {
                let t = self.bump();
                Ok(Ident {
                    name: t.text.to_string(),
                    span: t.span,
                })
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    /// Skip a balanced parenthesised group starting at the current `(`.
    fn skip_group(&mut self) -> PResult<()> {
        self.expect("(")?;
        let mut depth = 1;
        while depth > 0 {
            let Some(t) = self.peek() else {
                return Err(self.error("unbalanced parentheses"));
            };
            if t.is("(") {
                depth += 1;
            } else if t.is(")") {
                depth -= 1;
            }
            self.pos += 1;
        }
        Ok(())
    }

    fn skip_attributes(&mut self) -> PResult<()> {
        while let Some(t) = self.peek() {
            if ATTRIBUTES.iter().any(|a| t.is(a)) {
                self.bump();
                if self.at("(") {
                    self.skip_group()?;
                }
            } else if t.is("__extension__") {
                self.bump();
            } else {
                break;
            }
        }
        Ok(())
    }

    // ---- scopes ----

    fn push_scope(&mut self) {
        self.scopes.push(HashMap::new());
    }

    fn pop_scope(&mut self) {
        self.scopes.pop();
    }

    fn declare(&mut self, name: &str, is_typedef: bool) {
        self.scopes
            .last_mut()
            .unwrap()
            .insert(name.to_string(), is_typedef);
    }

    fn is_typedef_name(&self, name: &str) -> bool {
        for scope in self.scopes.iter().rev() {
            if let Some(&t) = scope.get(name) {
                return t;
            }
        }
        false
    }

    fn starts_type(&self, t: &Token) -> bool {
        if t.kind != TokKind::Ident {
            return false;
        }
        let s = &*t.text;
        TYPE_WORDS.contains(&s)
            || QUALIFIERS.contains(&s)
            || matches!(s, "struct" | "union" | "enum" | "typeof" | "__typeof__" | "__typeof" | "_Atomic")
            || self.is_typedef_name(s)
    }

    fn starts_declaration(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        if t.kind != TokKind::Ident {
            return false;
        }
        let s = &*t.text;
        if self.is_typedef_name(s) && self.peek_at(1).is_some_and(|n| n.is(":")) {
            return false;
        }
        self.starts_type(t)
            || STORAGE.contains(&s)
            || FN_SPECS.contains(&s)
            || matches!(s, "__extension__" | "_Static_assert" | "__attribute__" | "_Alignas")
    }

    // ---- declarations ----

    fn external_decl(&mut self) -> PResult<ExternalDecl> {
        let start = self.cur_span();
        let specs = self.decl_specs()?;
        if self.eat(";") {
            return Ok(ExternalDecl::Decl(Declaration {
                specs,
                declarators: Vec::new(),
                span: self.span_from(start),
            }));
        }
        let decl = self.declarator(DeclMode::Concrete)?;
        if decl.is_function() && self.at("{") {
            let name = decl.name.clone().map(|n| n.name).unwrap_or_default();
            self.declare(&name, false);
            self.push_scope();
            if let Some(params) = decl.function_params() {
                for p in &params.params {
                    if let Some(n) = p.declarator.as_ref().and_then(|d| d.name.as_ref()) {
                        let n = n.name.clone();
                        self.declare(&n, false);
                    }
                }
            }
            let body = self.block();
            self.pop_scope();
            let body = body?;
            return Ok(ExternalDecl::Func(FunctionDef {
                specs,
                declarator: decl,
                body,
                span: self.span_from(start),
            }));
        }
        let d = self.declaration_rest(specs, start, Some(decl))?;
        Ok(ExternalDecl::Decl(d))
    }

    fn declaration(&mut self) -> PResult<Declaration> {
        let start = self.cur_span();
        if self.at("_Static_assert") {
            self.bump();
            self.skip_group()?;
            self.expect(";")?;
            return Ok(Declaration {
                specs: DeclSpecs {
                    storage: None,
                    inline: false,
                    ty: TypeSpec::Opaque,
                    span: start,
                },
                declarators: Vec::new(),
                span: self.span_from(start),
            });
        }
        let specs = self.decl_specs()?;
        self.declaration_rest(specs, start, None)
    }

    fn declaration_rest(
        &mut self,
        specs: DeclSpecs,
        start: Span,
        first: Option<Declarator>,
    ) -> PResult<Declaration> {
        let mut declarators = Vec::new();
        if first.is_none() && self.eat(";") {
            return Ok(Declaration {
                specs,
                declarators,
                span: self.span_from(start),
            });
        }
        let mut next = first;
        loop {
            let d = match next.take() {
                Some(d) => d,
                None => self.declarator(DeclMode::Concrete)?,
            };
            let dstart = d.span;
            if let Some(n) = &d.name {
                let n = n.name.clone();
                self.declare(&n, specs.is_typedef());
            }
            let init = if self.eat("=") {
                Some(self.initializer()?)
            } else {
                None
            };
            declarators.push(InitDeclarator {
                declarator: d,
                init,
                span: self.span_from(dstart),
            });
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")?;
        Ok(Declaration {
            specs,
            declarators,
            span: self.span_from(start),
        })
    }

    fn decl_specs(&mut self) -> PResult<DeclSpecs> {
        let start = self.cur_span();
        let mut storage = None;
        let mut inline = false;
        let mut words: Vec<String> = Vec::new();
        let mut ty: Option<TypeSpec> = None;
        let mut consumed = false;
        loop {
            self.skip_attributes()?;
            let Some(t) = self.peek() else { break };
            if t.kind != TokKind::Ident {
                break;
            }
            let s = t.text.to_string();
            if STORAGE.contains(&s.as_str()) {
                storage = Some(match s.as_str() {
                    "typedef" => Storage::Typedef,
                    "extern" => Storage::Extern,
                    "static" => Storage::Static,
                    "auto" => Storage::Auto,
                    "register" => Storage::Register,
                    _ => Storage::ThreadLocal,
                });
                self.bump();
            } else if FN_SPECS.contains(&s.as_str()) {
                inline = true;
                self.bump();
            } else if QUALIFIERS.contains(&s.as_str()) {
                self.bump();
            } else if s == "_Atomic" {
                self.bump();
                if self.at("(") {
                    self.skip_group()?;
                    ty = Some(TypeSpec::Opaque);
                }
            } else if TYPE_WORDS.contains(&s.as_str()) {
                words.push(s);
                self.bump();
            } else if s == "struct" || s == "union" {
                ty = Some(TypeSpec::Record(Box::new(self.record_spec()?)));
            } else if s == "enum" {
                ty = Some(TypeSpec::Enum(Box::new(self.enum_spec()?)));
            } else if matches!(s.as_str(), "typeof" | "__typeof__" | "__typeof") {
                self.bump();
                self.skip_group()?;
                ty = Some(TypeSpec::Opaque);
            } else if ty.is_none() && words.is_empty() && self.is_typedef_name(&s) {
                let t = self.bump();
                ty = Some(TypeSpec::Named(Ident {
                    name: s,
                    span: t.span,
                }));
            } else {
                break;
            }
            consumed = true;
        }
        if !consumed {
            return Err(self.error("expected declaration specifiers"));
        }
        let ty = match ty {
            Some(t) => t,
            None if words.is_empty() => TypeSpec::Builtin("int".into()),
            None => TypeSpec::Builtin(words.join(" ")),
        };
        Ok(DeclSpecs {
            storage,
            inline,
            ty,
            span: self.span_from(start),
        })
    }

    fn record_spec(&mut self) -> PResult<RecordSpec> {
        let start = self.cur_span();
        let is_union = self.bump().is("union");
        self.skip_attributes()?;
        let tag = if self.peek().is_some_and(|t| t.is_ident() && !is_keyword(&t.text)) {
            Some(self.ident()?)
        } else {
            None
        };
        let mut fields = None;
        if self.eat("{") {
            let mut fs = Vec::new();
            while !self.at("}") {
                if self.peek().is_none() {
                    return Err(self.error("unterminated struct body"));
                }
                if self.eat(";") {
                    continue;
                }
                if self.at("_Static_assert") {
                    self.declaration()?;
                    continue;
                }
                let fstart = self.cur_span();
                let specs = self.decl_specs()?;
                let mut declarators = Vec::new();
                if !self.at(";") {
                    loop {
                        if self.eat(":") {
                            self.conditional()?;
                        } else {
                            declarators.push(self.declarator(DeclMode::Concrete)?);
                            if self.eat(":") {
                                self.conditional()?;
                            }
                        }
                        self.skip_attributes()?;
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect(";")?;
                fs.push(FieldDecl {
                    specs,
                    declarators,
                    span: self.span_from(fstart),
                });
            }
            self.expect("}")?;
            self.skip_attributes()?;
            fields = Some(fs);
        } else if tag.is_none() {
            return Err(self.error("expected struct tag or body"));
        }
        Ok(RecordSpec {
            is_union,
            tag,
            fields,
            span: self.span_from(start),
        })
    }

    fn enum_spec(&mut self) -> PResult<EnumSpec> {
        let start = self.cur_span();
        self.bump();
        self.skip_attributes()?;
        let tag = if self.peek().is_some_and(|t| t.is_ident() && !is_keyword(&t.text)) {
            Some(self.ident()?)
        } else {
            None
        };
        let mut variants = None;
        if self.eat("{") {
            let mut vs = Vec::new();
            while !self.at("}") {
                let name = self.ident()?;
                self.declare(&name.name, false);
                let value = if self.eat("=") {
                    Some(self.conditional()?)
                } else {
                    None
                };
                vs.push(Enumerator { name, value });
                if !self.eat(",") {
                    break;
                }
            }
            self.expect("}")?;
            variants = Some(vs);
        } else if tag.is_none() {
            return Err(self.error("expected enum tag or body"));
        }
        Ok(EnumSpec {
            tag,
            variants,
            span: self.span_from(start),
        })
    }

    fn declarator(&mut self, mode: DeclMode) -> PResult<Declarator> {
        let start = self.cur_span();
        let mut pointers = 0;
        loop {
            self.skip_attributes()?;
            if self.eat("*") {
                pointers += 1;
                while self.peek().is_some_and(|t| QUALIFIERS.contains(&&*t.text) || t.is("_Atomic")) {
                    self.bump();
                }
            } else {
                break;
            }
        }
        let mut name = None;
        let mut inner: Option<Declarator> = None;
        match self.peek() {
            Some(t) if t.is_ident() && !is_keyword(&t.text) && mode != DeclMode::Abstract => {
                name = Some(self.ident()?);
            }
            Some(t) if t.is("(") => {
                let nested = match self.peek_at(1) {
                    Some(n) if n.is("*") || n.is("(") || n.is("[") || n.is("^") => true,
                    Some(n) if ATTRIBUTES.iter().any(|a| n.is(a)) => true,
                    Some(n) => {
                        mode != DeclMode::Abstract
                            && n.is_ident()
                            && !is_keyword(&n.text)
                            && !self.is_typedef_name(&n.text)
                    }
                    None => false,
                };
                if nested {
                    self.bump();
                    inner = Some(self.declarator(mode)?);
                    self.expect(")")?;
                }
            }
            _ => {}
        }
        let mut suffixes = Vec::new();
        loop {
            if self.eat("[") {
                while self
                    .peek()
                    .is_some_and(|t| QUALIFIERS.contains(&&*t.text) || t.is("static"))
                {
                    self.bump();
                }
                if self.eat("]") {
                    suffixes.push(Derived::Array(None));
                } else if self.at("*") && self.peek_at(1).is_some_and(|t| t.is("]")) {
                    self.pos += 2;
                    suffixes.push(Derived::Array(None));
                } else {
                    let e = self.assign()?;
                    self.expect("]")?;
                    suffixes.push(Derived::Array(Some(Box::new(e))));
                }
            } else if self.at("(") {
                suffixes.push(Derived::Function(self.params()?));
            } else {
                break;
            }
        }
        self.skip_attributes()?;
        let mut derived = Vec::new();
        if let Some(i) = inner {
            name = i.name;
            derived.extend(i.derived);
        }
        derived.extend(suffixes);
        derived.extend(std::iter::repeat_n(Derived::Pointer, pointers));
        if mode == DeclMode::Concrete && name.is_none() {
            return Err(self.error("expected declarator name"));
        }
        let span = if self.prev_span().lo >= start.lo || self.prev_span().file != start.file {
            self.span_from(start)
        } else {
            start
        };
        Ok(Declarator {
            name,
            derived,
            span,
        })
    }

    fn params(&mut self) -> PResult<FnParams> {
        self.expect("(")?;
        let mut out = FnParams::default();
        if self.eat(")") {
            return Ok(out);
        }
        if self.at("void") && self.peek_at(1).is_some_and(|t| t.is(")")) {
            self.pos += 2;
            return Ok(out);
        }
        self.push_scope();
        let res = (|| {
            loop {
                if self.eat("...") {
                    out.variadic = true;
                    break;
                }
                let start = self.cur_span();
                let specs = self
                    .decl_specs()
                    .map_err(|e| ParseError {
                        message: format!("malformed parameter list: {}", e.message),
                        ..e
                    })?;
                let declarator = if self.at(",") || self.at(")") {
                    None
                } else {
                    let d = self.declarator(DeclMode::Either)?;
                    if let Some(n) = &d.name {
                        let n = n.name.clone();
                        self.declare(&n, false);
                    }
                    Some(d)
                };
                out.params.push(ParamDecl {
                    specs,
                    declarator,
                    span: self.span_from(start),
                });
                if !self.eat(",") {
                    break;
                }
            }
            self.expect(")")?;
            Ok(())
        })();
        self.pop_scope();
        res?;
        Ok(out)
    }

    fn type_name(&mut self) -> PResult<TypeName> {
        let start = self.cur_span();
        let specs = self.decl_specs()?;
        let declarator = if self.at(")") || self.at(",") {
            None
        } else {
            Some(self.declarator(DeclMode::Abstract)?)
        };
        Ok(TypeName {
            specs,
            declarator,
            span: self.span_from(start),
        })
    }

    fn initializer(&mut self) -> PResult<Initializer> {
        if self.at("{") {
            let start = self.cur_span();
            let items = self.init_list()?;
            Ok(Initializer::List(items, self.span_from(start)))
        } else {
            Ok(Initializer::Expr(self.assign()?))
        }
    }

    fn init_list(&mut self) -> PResult<Vec<InitItem>> {
        self.expect("{")?;
        let mut items = Vec::new();
        while !self.at("}") {
            let mut designators = Vec::new();
            loop {
                if self.eat("[") {
                    let lo = self.conditional()?;
                    if self.eat("...") {
                        let hi = self.conditional()?;
                        designators.push(Designator::Range(lo, hi));
                    } else {
                        designators.push(Designator::Index(lo));
                    }
                    self.expect("]")?;
                } else if self.at(".") && self.peek_at(1).is_some_and(|t| t.is_ident()) {
                    self.bump();
                    designators.push(Designator::Field(self.ident()?));
                } else {
                    break;
                }
            }
            if !designators.is_empty() {
                self.expect("=")?;
            }
            let init = self.initializer()?;
            items.push(InitItem { designators, init });
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        Ok(items)
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<Block> {
        let start = self.cur_span();
        self.expect("{")?;
        self.push_scope();
        let mut stmts = Vec::new();
        let res = (|| {
            while !self.at("}") {
                if self.peek().is_none() {
                    return Err(self.error("expected `}`"));
                }
                stmts.push(self.stmt()?);
            }
            self.expect("}")?;
            Ok(())
        })();
        self.pop_scope();
        res?;
        Ok(Block {
            stmts,
            span: self.span_from(start),
        })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.cur_span();
        let Some(t) = self.peek() else {
            return Err(self.error("expected statement"));
        };
        let word = if t.kind == TokKind::Ident {
            t.text.to_string()
        } else {
            String::new()
        };
        let kind = match word.as_str() {
            "if" => {
                self.bump();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let then = Box::new(self.stmt()?);
                let els = if self.eat("else") {
                    Some(Box::new(self.stmt()?))
                } else {
                    None
                };
                StmtKind::If { cond, then, els }
            }
            "while" => {
                self.bump();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                StmtKind::While {
                    cond,
                    body: Box::new(self.stmt()?),
                }
            }
            "do" => {
                self.bump();
                let body = Box::new(self.stmt()?);
                self.expect("while")?;
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                self.expect(";")?;
                StmtKind::DoWhile { body, cond }
            }
            "for" => {
                self.bump();
                self.expect("(")?;
                self.push_scope();
                let res = (|| {
                    let init = if self.eat(";") {
                        None
                    } else if self.starts_declaration() {
                        Some(ForInit::Decl(self.declaration()?))
                    } else {
                        let e = self.expr()?;
                        self.expect(";")?;
                        Some(ForInit::Expr(e))
                    };
                    let cond = if self.at(";") { None } else { Some(self.expr()?) };
                    self.expect(";")?;
                    let step = if self.at(")") { None } else { Some(self.expr()?) };
                    self.expect(")")?;
                    let body = Box::new(self.stmt()?);
                    Ok(StmtKind::For {
                        init,
                        cond,
                        step,
                        body,
                    })
                })();
                self.pop_scope();
                res?
            }
            "switch" => {
                self.bump();
                self.expect("(")?;
                let expr = self.expr()?;
                self.expect(")")?;
                StmtKind::Switch {
                    expr,
                    body: Box::new(self.stmt()?),
                }
            }
            "case" => {
                self.bump();
                let value = self.conditional()?;
                if self.eat("...") {
                    self.conditional()?;
                }
                self.expect(":")?;
                StmtKind::Case {
                    value,
                    body: Box::new(self.case_body()?),
                }
            }
            "default" => {
                self.bump();
                self.expect(":")?;
                StmtKind::Default(Box::new(self.case_body()?))
            }
            "break" => {
                self.bump();
                self.expect(";")?;
                StmtKind::Break
            }
            "continue" => {
                self.bump();
                self.expect(";")?;
                StmtKind::Continue
            }
            "return" => {
                self.bump();
                let e = if self.at(";") { None } else { Some(self.expr()?) };
                self.expect(";")?;
                StmtKind::Return(e)
            }
            "goto" => {
                self.bump();
                let l = self.ident()?;
                self.expect(";")?;
                StmtKind::Goto(l)
            }
            "asm" | "__asm__" | "__asm" => {
                self.bump();
                while self.peek().is_some_and(|t| QUALIFIERS.contains(&&*t.text) || t.is("goto")) {
                    self.bump();
                }
                self.skip_group()?;
                self.expect(";")?;
                StmtKind::Asm
            }
            _ if t.is("{") => StmtKind::Compound(self.block()?),
            _ if t.is(";") => {
                self.bump();
                StmtKind::Expr(None)
            }
            _ if t.is_ident()
                && !is_keyword(&t.text)
                && self.peek_at(1).is_some_and(|n| n.is(":")) =>
            {
                let label = self.ident()?;
                self.bump();
                if self.at("}") {
                    StmtKind::Labeled {
                        label,
                        body: Box::new(Stmt {
                            kind: StmtKind::Expr(None),
                            span: self.prev_span(),
                        }),
                    }
                } else {
                    StmtKind::Labeled {
                        label,
                        body: Box::new(self.stmt()?),
                    }
                }
            }
            _ if self.starts_declaration() => StmtKind::Decl(self.declaration()?),
            _ => {
                let e = self.expr()?;
                self.expect(";")?;
                StmtKind::Expr(Some(e))
            }
        };
        Ok(Stmt {
            kind,
            span: self.span_from(start),
        })
    }

    /// Statement after a case label; an immediately closing brace yields an empty statement.
    fn case_body(&mut self) -> PResult<Stmt> {
        if self.at("}") {
            return Ok(Stmt {
                kind: StmtKind::Expr(None),
                span: self.prev_span(),
            });
        }
        self.stmt()
    }

    // ---- expressions ----

    pub fn expr(&mut self) -> PResult<Expr> {
        let start = self.cur_span();
        let first = self.assign()?;
        if !self.at(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat(",") {
            items.push(self.assign()?);
        }
        Ok(Expr {
            kind: ExprKind::Comma(items),
            span: self.span_from(start),
        })
    }

    fn assign(&mut self) -> PResult<Expr> {
        let start = self.cur_span();
        let lhs = self.conditional()?;
        let op = match self.peek().map(|t| t.text.to_string()).as_deref() {
            Some("=") => None,
            Some("+=") => Some(BinOp::Add),
            Some("-=") => Some(BinOp::Sub),
            Some("*=") => Some(BinOp::Mul),
            Some("/=") => Some(BinOp::Div),
            Some("%=") => Some(BinOp::Rem),
            Some("<<=") => Some(BinOp::Shl),
            Some(">>=") => Some(BinOp::Shr),
            Some("&=") => Some(BinOp::BitAnd),
            Some("^=") => Some(BinOp::BitXor),
            Some("|=") => Some(BinOp::BitOr),
            _ => return Ok(lhs),
        };
        if self.peek().is_some_and(|t| t.kind != TokKind::Punct) {
            return Ok(lhs);
        }
        self.bump();
        let rhs = self.assign()?;
        Ok(Expr {
            kind: ExprKind::Assign {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            span: self.span_from(start),
        })
    }

    fn conditional(&mut self) -> PResult<Expr> {
        let start = self.cur_span();
        let cond = self.binary(1)?;
        if !self.eat("?") {
            return Ok(cond);
        }
        let then = if self.at(":") {
            cond.clone()
        } else {
            self.expr()?
        };
        self.expect(":")?;
        let els = self.conditional()?;
        Ok(Expr {
            kind: ExprKind::Cond {
                cond: Box::new(cond),
                then: Box::new(then),
                els: Box::new(els),
            },
            span: self.span_from(start),
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let start = self.cur_span();
        let mut lhs = self.cast_expr()?;
        loop {
            let Some(t) = self.peek() else { break };
            if t.kind != TokKind::Punct {
                break;
            }
            let Some((op, prec)) = binop(&t.text) else { break };
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr {
                kind: ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span: self.span_from(start),
            };
        }
        Ok(lhs)
    }

    fn paren_type_follows(&self) -> bool {
        self.at("(") && self.peek_at(1).is_some_and(|t| self.starts_type(t))
    }

    fn cast_expr(&mut self) -> PResult<Expr> {
        if self.paren_type_follows() {
            let start = self.cur_span();
            self.bump();
            let ty = Box::new(self.type_name()?);
            self.expect(")")?;
            if self.at("{") {
                let items = self.init_list()?;
                let lit = Expr {
                    kind: ExprKind::CompoundLit { ty, items },
                    span: self.span_from(start),
                };
                return self.postfix(lit, start);
            }
            let expr = Box::new(self.cast_expr()?);
            return Ok(Expr {
                kind: ExprKind::Cast { ty, expr },
                span: self.span_from(start),
            });
        }
        self.unary()
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.cur_span();
        let Some(t) = self.peek() else {
            return Err(self.error("expected expression"));
        };
        let op = if t.kind == TokKind::Punct {
            match &*t.text {
                "++" => Some(UnaryOp::PreInc),
                "--" => Some(UnaryOp::PreDec),
                "&" => Some(UnaryOp::AddrOf),
                "*" => Some(UnaryOp::Deref),
                "+" => Some(UnaryOp::Plus),
                "-" => Some(UnaryOp::Neg),
                "~" => Some(UnaryOp::BitNot),
                "!" => Some(UnaryOp::Not),
                _ => None,
            }
        } else {
            None
        };
        if let Some(op) = op {
            self.bump();
            let expr = if matches!(op, UnaryOp::PreInc | UnaryOp::PreDec) {
                self.unary()?
            } else {
                self.cast_expr()?
            };
            return Ok(Expr {
                kind: ExprKind::Unary {
                    op,
                    expr: Box::new(expr),
                },
                span: self.span_from(start),
            });
        }
        if t.is("sizeof") || t.is("_Alignof") || t.is("__alignof__") || t.is("alignof") {
            self.bump();
            if self.paren_type_follows() {
                self.bump();
                let ty = self.type_name()?;
                self.expect(")")?;
                return Ok(Expr {
                    kind: ExprKind::SizeofType(Box::new(ty)),
                    span: self.span_from(start),
                });
            }
            let e = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::SizeofExpr(Box::new(e)),
                span: self.span_from(start),
            });
        }
        let p = self.primary()?;
        self.postfix(p, start)
    }

    fn postfix(&mut self, mut e: Expr, start: Span) -> PResult<Expr> {
        loop {
            let kind = if self.eat("[") {
                let index = self.expr()?;
                self.expect("]")?;
                ExprKind::Index {
                    base: Box::new(e),
                    index: Box::new(index),
                }
            } else if self.eat("(") {
                let mut args = Vec::new();
                if !self.at(")") {
                    loop {
                        args.push(self.assign()?);
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect(")")?;
                ExprKind::Call {
                    callee: Box::new(e),
                    args,
                }
            } else if self.at(".") || self.at("->") {
                let arrow = self.bump().is("->");
                let field = self.ident()?;
                ExprKind::Member {
                    base: Box::new(e),
                    field,
                    arrow,
                }
            } else if self.at("++") || self.at("--") {
                let op = if self.bump().is("++") {
                    UnaryOp::PostInc
                } else {
                    UnaryOp::PostDec
                };
                ExprKind::Unary {
                    op,
                    expr: Box::new(e),
                }
            } else {
                return Ok(e);
            };
            e = Expr {
                kind,
                span: self.span_from(start),
            };
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.cur_span();
        let Some(t) = self.peek().cloned() else {
            return Err(self.error("expected expression"));
        };
        let kind = match t.kind {
            TokKind::Ident if !is_keyword(&t.text) || is_expr_keyword(&t.text) => {
                self.bump();
                match &*t.text {
                    "va_arg" | "__builtin_va_arg" if self.at("(") => {
                        self.bump();
                        let expr = Box::new(self.assign()?);
                        self.expect(",")?;
                        let ty = Box::new(self.type_name()?);
                        self.expect(")")?;
                        ExprKind::VaArg { expr, ty }
                    }
                    "offsetof" | "__builtin_offsetof" if self.at("(") => {
                        self.bump();
                        let ty = Box::new(self.type_name()?);
                        self.expect(",")?;
                        let mut member = String::new();
                        while !self.at(")") {
                            if self.peek().is_none() {
                                return Err(self.error("expected `)`"));
                            }
                            member.push_str(&self.bump().text);
                        }
                        self.bump();
                        ExprKind::Offsetof { ty, member }
                    }
                    "_Generic" if self.at("(") => {
                        self.skip_group()?;
                        ExprKind::Ident("_Generic".into())
                    }
                    _ => ExprKind::Ident(t.text.to_string()),
                }
            }
            TokKind::Number => {
                self.bump();
                if is_float_literal(&t.text) {
                    ExprKind::Float(t.text.to_string())
                } else {
                    ExprKind::Int(t.text.to_string())
                }
            }
            TokKind::Char => {
                self.bump();
                ExprKind::Char(t.text.to_string())
            }
            TokKind::Str => {
                let mut s = String::new();
                while self.peek().is_some_and(|t| t.kind == TokKind::Str) {
                    if !s.is_empty() {
                        s.push(' ');
                    }
                    s.push_str(&self.bump().text);
                }
                ExprKind::Str(s)
            }
            TokKind::Punct if t.is("(") => {
                self.bump();
                if self.at("{") {
                    let b = self.block()?;
                    self.expect(")")?;
                    ExprKind::StmtExpr(b)
                } else {
                    let inner = self.expr()?;
                    self.expect(")")?;
                    return Ok(Expr {
                        kind: inner.kind,
                        span: self.span_from(start),
                    });
                }
            }
            _ => return Err(self.error("expected expression")),
        };
        Ok(Expr {
            kind,
            span: self.span_from(start),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DeclMode {
    Concrete,
    Abstract,
    Either,
}

fn binop(op: &str) -> Option<(BinOp, u8)> {
    Some(match op {
        "||" => (BinOp::Or, 1),
        "&&" => (BinOp::And, 2),
        "|" => (BinOp::BitOr, 3),
        "^" => (BinOp::BitXor, 4),
        "&" => (BinOp::BitAnd, 5),
        "==" => (BinOp::Eq, 6),
        "!=" => (BinOp::Ne, 6),
        "<" => (BinOp::Lt, 7),
        ">" => (BinOp::Gt, 7),
        "<=" => (BinOp::Le, 7),
        ">=" => (BinOp::Ge, 7),
        "<<" => (BinOp::Shl, 8),
        ">>" => (BinOp::Shr, 8),
        "+" => (BinOp::Add, 9),
        "-" => (BinOp::Sub, 9),
        "*" => (BinOp::Mul, 10),
        "/" => (BinOp::Div, 10),
        "%" => (BinOp::Rem, 10),
        _ => return None,
    })
}

fn is_float_literal(text: &str) -> bool {
    let lower = text.to_ascii_lowercase();
    if lower.starts_with("0x") {
        return lower.contains('.') || lower.contains('p');
    }
    lower.contains('.') || lower.contains('e') || lower.ends_with('f')
}

const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "_Bool", "_Complex", "_Alignas",
    "_Alignof", "_Atomic", "_Generic", "_Noreturn", "_Static_assert", "_Thread_local",
    "__attribute__", "__extension__", "__inline", "__inline__", "__restrict", "__restrict__",
    "__asm__", "asm", "typeof", "__typeof__",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn is_expr_keyword(s: &str) -> bool {
    s == "_Generic"
}
