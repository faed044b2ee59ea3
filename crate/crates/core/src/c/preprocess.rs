//! A C preprocessor sufficient for structural extraction.
//!
//! Project headers are expanded in place; `<...>` headers and standard
//! headers named with quotes are recorded but not read. Expansion follows
//! the hide-set algorithm, so recursive macros terminate.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexer::{lex, TokKind, Token};
use super::source::{FileId, SourceFile, SourceMap, Span};
use super::stdlib;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PreprocessError {
    #[error("{location}: {message}")]
    Lex { location: String, message: String },
    #[error("{file}: cannot resolve include \"{include}\"")]
    MissingInclude { file: String, include: String },
    #[error("{location}: {message}")]
    Directive { location: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone)]
pub struct Macro {
    pub name: String,
    pub params: Option<Vec<String>>,
    pub variadic: bool,
    pub body: Vec<Token>,
    /// Directive text as written, e.g. `#define N 100`.
    pub text: String,
    pub span: Span,
}

impl Macro {
    pub fn is_object_like(&self) -> bool {
        self.params.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum IncludeTarget {
    Project(FileId),
    System(String),
}

#[derive(Debug, Clone)]
pub struct IncludeRecord {
    pub from: FileId,
    pub target: IncludeTarget,
}

/// A macro invocation written in source (not produced by another expansion).
#[derive(Debug, Clone)]
pub struct MacroUse {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessOutput {
    pub tokens: Vec<Token>,
    pub includes: Vec<IncludeRecord>,
    /// Every `#define` seen in an active region, in order.
    pub defines: Vec<Macro>,
    pub uses: Vec<MacroUse>,
}

#[derive(Debug, Clone, Copy)]
struct Cond {
    parent_active: bool,
    active: bool,
    taken: bool,
}

pub struct Preprocessor<'a> {
    sm: &'a mut SourceMap,
    root: Option<PathBuf>,
    include_paths: Vec<PathBuf>,
    macros: HashMap<String, Rc<Macro>>,
    once: HashSet<FileId>,
    depth: usize,
    record_uses: bool,
    out: PreprocessOutput,
}

const MAX_INCLUDE_DEPTH: usize = 64;

impl<'a> Preprocessor<'a> {
    pub fn new(sm: &'a mut SourceMap, root: Option<PathBuf>, include_paths: Vec<PathBuf>) -> Self {
        Preprocessor {
            sm,
            root,
            include_paths,
            macros: HashMap::new(),
            once: HashSet::new(),
            depth: 0,
            record_uses: true,
            out: PreprocessOutput::default(),
        }
    }

    /// Load a file from disk (or reuse it if already in the map).
    pub fn load(&mut self, path: &Path) -> Result<FileId, PreprocessError> {
        let canon = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        if let Some(id) = self.sm.find_path(&canon) {
            return Ok(id);
        }
        let text = fs::read_to_string(&canon).map_err(|e| PreprocessError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let name = self
            .root
            .as_ref()
            .and_then(|r| fs::canonicalize(r).ok())
            .and_then(|r| canon.strip_prefix(&r).ok().map(|p| p.display().to_string()))
            .unwrap_or_else(|| path.display().to_string());
        Ok(self.sm.add(SourceFile::new(name, canon, text)))
    }

    pub fn run(mut self, file: FileId) -> Result<PreprocessOutput, PreprocessError> {
        self.process(file)?;
        Ok(self.out)
    }

    fn location(&self, span: Span) -> String {
        self.sm.describe(span)
    }

    fn process(&mut self, file: FileId) -> Result<(), PreprocessError> {
        if self.once.contains(&file) {
            return Ok(());
        }
        self.depth += 1;
        if self.depth > MAX_INCLUDE_DEPTH {
            return Err(PreprocessError::Directive {
                location: self.sm.file(file).name.clone(),
                message: "include nesting too deep".into(),
            });
        }
        let toks = lex(&self.sm.file(file).text, file).map_err(|e| PreprocessError::Lex {
            location: self.location(Span::new(file, e.offset, e.offset)),
            message: e.message,
        })?;
        let mut conds: Vec<Cond> = Vec::new();
        let mut pending: Vec<Token> = Vec::new();
        let mut i = 0;
        while i < toks.len() {
            let t = &toks[i];
            if t.bol && t.is("#") {
                let mut j = i + 1;
                while j < toks.len() && !toks[j].bol {
                    j += 1;
                }
                let active = conds.iter().all(|c| c.active);
                if active && !pending.is_empty() {
                    let chunk = std::mem::take(&mut pending);
                    let expanded = self.expand(chunk);
                    self.out.tokens.extend(expanded);
                }
                self.directive(file, &toks[i], &toks[i + 1..j], &mut conds, active)?;
                i = j;
                continue;
            }
            if conds.iter().all(|c| c.active) {
                pending.push(t.clone());
            }
            i += 1;
        }
        if !pending.is_empty() {
            let expanded = self.expand(pending);
            self.out.tokens.extend(expanded);
        }
        if !conds.is_empty() {
            return Err(PreprocessError::Directive {
                location: self.sm.file(file).name.clone(),
                message: "unterminated conditional directive".into(),
            });
        }
        self.depth -= 1;
        Ok(())
    }

    fn directive(
        &mut self,
        file: FileId,
        hash: &Token,
        line: &[Token],
        conds: &mut Vec<Cond>,
        active: bool,
    ) -> Result<(), PreprocessError> {
        let Some(name) = line.first() else {
            return Ok(());
        };
        let rest = &line[1..];
        match &*name.text {
            "if" | "ifdef" | "ifndef" => {
                let value = if active {
                    match &*name.text {
                        "ifdef" => rest.first().is_some_and(|t| self.macros.contains_key(&*t.text)),
                        "ifndef" => !rest.first().is_some_and(|t| self.macros.contains_key(&*t.text)),
                        _ => self.eval_condition(rest, hash.span)?,
                    }
                } else {
                    false
                };
                conds.push(Cond {
                    parent_active: active,
                    active: value,
                    taken: value,
                });
            }
            "elif" => {
                let Some(top) = conds.last().copied() else {
                    return Err(self.directive_error(hash.span, "#elif without #if"));
                };
                let value = if top.parent_active && !top.taken {
                    self.eval_condition(rest, hash.span)?
                } else {
                    false
                };
                let top = conds.last_mut().unwrap();
                top.active = value;
                top.taken |= value;
            }
            "else" => {
                let Some(top) = conds.last_mut() else {
                    return Err(self.directive_error(hash.span, "#else without #if"));
                };
                top.active = top.parent_active && !top.taken;
                top.taken = true;
            }
            "endif" => {
                if conds.pop().is_none() {
                    return Err(self.directive_error(hash.span, "#endif without #if"));
                }
            }
            _ if !active => {}
            "define" => self.define(rest, hash.span)?,
            "undef" => {
                if let Some(t) = rest.first() {
                    self.macros.remove(&*t.text);
                }
            }
            "include" | "include_next" => self.include(file, rest, hash.span)?,
            "pragma" => {
                if rest.first().is_some_and(|t| t.is("once")) {
                    self.once.insert(file);
                }
            }
            "error" => {
                let msg: Vec<_> = rest.iter().map(|t| t.text.to_string()).collect();
                return Err(self.directive_error(hash.span, &format!("#error {}", msg.join(" "))));
            }
            _ => {}
        }
        Ok(())
    }

    fn directive_error(&self, span: Span, message: &str) -> PreprocessError {
        PreprocessError::Directive {
            location: self.location(span),
            message: message.to_string(),
        }
    }

    fn define(&mut self, rest: &[Token], hash: Span) -> Result<(), PreprocessError> {
        let Some(name) = rest.first().filter(|t| t.is_ident()) else {
            return Err(self.directive_error(hash, "macro name missing"));
        };
        let mut k = 1;
        let mut params = None;
        let mut variadic = false;
        if rest.get(1).is_some_and(|t| t.is("(") && !t.space_before) {
            let mut ps = Vec::new();
            k = 2;
            loop {
                let Some(t) = rest.get(k) else {
                    return Err(self.directive_error(hash, "unterminated macro parameter list"));
                };
                k += 1;
                if t.is(")") {
                    break;
                } else if t.is(",") {
                    continue;
                } else if t.is("...") {
                    variadic = true;
                    ps.push("__VA_ARGS__".to_string());
                } else if t.is_ident() {
                    if rest.get(k).is_some_and(|n| n.is("...")) {
                        variadic = true;
                        k += 1;
                    }
                    ps.push(t.text.to_string());
                } else {
                    return Err(self.directive_error(t.span, "bad macro parameter"));
                }
            }
            params = Some(ps);
        }
        let last = rest.last().unwrap();
        let text = format!("#define {}", self.sm.slice(name.span.to(last.span)));
        let m = Macro {
            name: name.text.to_string(),
            params,
            variadic,
            body: rest[k..].to_vec(),
            text,
            span: hash.to(last.span),
        };
        self.out.defines.push(m.clone());
        self.macros.insert(m.name.clone(), Rc::new(m));
        Ok(())
    }

    fn include(&mut self, file: FileId, rest: &[Token], hash: Span) -> Result<(), PreprocessError> {
        let mut toks = rest.to_vec();
        if !toks.first().is_some_and(|t| t.kind == TokKind::Str || t.is("<")) {
            toks = self.expand(toks);
        }
        let (target, quoted) = match toks.first() {
            Some(t) if t.kind == TokKind::Str => (t.text[1..t.text.len() - 1].to_string(), true),
            Some(t) if t.is("<") => {
                let inner: String = toks[1..]
                    .iter()
                    .take_while(|t| !t.is(">"))
                    .map(|t| t.text.to_string())
                    .collect();
                (inner, false)
            }
            _ => return Err(self.directive_error(hash, "malformed #include")),
        };
        match self.resolve_include(file, &target, quoted) {
            Some(path) => {
                let id = self.load(&path)?;
                self.out.includes.push(IncludeRecord {
                    from: file,
                    target: IncludeTarget::Project(id),
                });
                self.process(id)
            }
            None if !quoted || stdlib::is_std_header(&target) => {
                self.out.includes.push(IncludeRecord {
                    from: file,
                    target: IncludeTarget::System(target),
                });
                Ok(())
            }
            None => Err(PreprocessError::MissingInclude {
                file: self.sm.file(file).name.clone(),
                include: target,
            }),
        }
    }

    fn resolve_include(&self, from: FileId, target: &str, quoted: bool) -> Option<PathBuf> {
        let mut dirs = Vec::new();
        if quoted {
            if let Some(dir) = self.sm.file(from).path.parent() {
                dirs.push(dir.to_path_buf());
            }
        }
        dirs.extend(self.include_paths.iter().cloned());
        if quoted {
            dirs.extend(self.root.iter().cloned());
        }
        dirs.into_iter().map(|d| d.join(target)).find(|p| p.is_file())
    }

    fn eval_condition(&mut self, line: &[Token], at: Span) -> Result<bool, PreprocessError> {
        let mut toks = Vec::new();
        let mut i = 0;
        while i < line.len() {
            let t = &line[i];
            if t.is("defined") {
                let (name, next) = if line.get(i + 1).is_some_and(|t| t.is("(")) {
                    (line.get(i + 2), i + 4)
                } else {
                    (line.get(i + 1), i + 2)
                };
                let defined = name.is_some_and(|n| self.macros.contains_key(&*n.text));
                toks.push(number_token(if defined { "1" } else { "0" }, t));
                i = next;
            } else {
                toks.push(t.clone());
                i += 1;
            }
        }
        let saved = self.record_uses;
        self.record_uses = false;
        let expanded = self.expand(toks);
        self.record_uses = saved;
        // Remaining identifiers (and calls such as __has_include(...)) evaluate to 0.
        let mut flat = Vec::new();
        let mut i = 0;
        while i < expanded.len() {
            let t = &expanded[i];
            if t.is_ident() {
                if expanded.get(i + 1).is_some_and(|n| n.is("(")) {
                    let mut depth = 0;
                    i += 1;
                    while i < expanded.len() {
                        if expanded[i].is("(") {
                            depth += 1;
                        } else if expanded[i].is(")") {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        i += 1;
                    }
                }
                flat.push(number_token("0", t));
            } else {
                flat.push(t.clone());
            }
            i += 1;
        }
        let mut ev = ConstEval { toks: &flat, pos: 0 };
        let v = ev.ternary().ok_or_else(|| self.directive_error(at, "invalid #if expression"))?;
        Ok(v != 0)
    }

    fn expand(&mut self, input: Vec<Token>) -> Vec<Token> {
        let mut input: VecDeque<Token> = input.into();
        let mut out = Vec::new();
        while let Some(t) = input.pop_front() {
            if t.kind != TokKind::Ident || t.hidden(&t.text) {
                out.push(t);
                continue;
            }
            if let Some(tok) = self.builtin(&t) {
                out.push(tok);
                continue;
            }
            let Some(m) = self.macros.get(&*t.text).cloned() else {
                out.push(t);
                continue;
            };
            let (args, span) = match &m.params {
                None => (Vec::new(), t.span),
                Some(_) => {
                    if !input.front().is_some_and(|n| n.is("(")) {
                        out.push(t);
                        continue;
                    }
                    match collect_args(&mut input, &m) {
                        Some((args, rparen)) => (args, t.span.to(rparen)),
                        None => {
                            out.push(t);
                            continue;
                        }
                    }
                }
            };
            if self.record_uses && t.origin.is_none() {
                self.out.uses.push(MacroUse {
                    name: m.name.clone(),
                    span,
                });
            }
            let body = self.substitute(&m, args, &t, span);
            for tok in body.into_iter().rev() {
                input.push_front(tok);
            }
        }
        out
    }

    fn builtin(&self, t: &Token) -> Option<Token> {
        let (kind, text) = match &*t.text {
            "__LINE__" => {
                let (line, _) = self.sm.file(t.span.file).line_col(t.span.lo as usize);
                (TokKind::Number, line.to_string())
            }
            "__FILE__" => (TokKind::Str, format!("\"{}\"", self.sm.file(t.span.file).name)),
            "__DATE__" => (TokKind::Str, "\"Jan  1 1970\"".to_string()),
            "__TIME__" => (TokKind::Str, "\"00:00:00\"".to_string()),
            "__STDC__" | "__STDC_HOSTED__" => (TokKind::Number, "1".to_string()),
            "__STDC_VERSION__" => (TokKind::Number, "201112L".to_string()),
            _ => return None,
        };
        Some(Token {
            kind,
            text: Rc::from(text.as_str()),
            ..t.clone()
        })
    }

    fn substitute(&mut self, m: &Macro, args: Vec<Vec<Token>>, inv: &Token, span: Span) -> Vec<Token> {
        enum Piece {
            Tok(Token),
            Paste,
            Empty { va: bool },
        }
        let params = m.params.as_deref().unwrap_or(&[]);
        let param_index = |t: &Token| {
            if t.is_ident() {
                params.iter().position(|p| *p == *t.text)
            } else {
                None
            }
        };
        let mut expanded: Vec<Option<Vec<Token>>> = vec![None; args.len()];
        let mut pieces: Vec<Piece> = Vec::new();
        let body = &m.body;
        let mut k = 0;
        while k < body.len() {
            let b = &body[k];
            if m.params.is_some() && b.is("#") {
                if let Some(p) = body.get(k + 1).and_then(param_index) {
                    let raw = args.get(p).cloned().unwrap_or_default();
                    pieces.push(Piece::Tok(Token {
                        kind: TokKind::Str,
                        text: Rc::from(stringify(&raw).as_str()),
                        ..b.clone()
                    }));
                    k += 2;
                    continue;
                }
            }
            if let Some(p) = param_index(b) {
                let next_paste = body.get(k + 1).is_some_and(|n| n.is("##"));
                let prev_paste = matches!(pieces.last(), Some(Piece::Paste));
                let raw = args.get(p).cloned().unwrap_or_default();
                let toks = if next_paste || prev_paste {
                    raw
                } else {
                    if expanded.get(p).is_some_and(|e| e.is_none()) {
                        expanded[p] = Some(self.expand(raw));
                    }
                    expanded.get(p).cloned().flatten().unwrap_or_default()
                };
                if toks.is_empty() {
                    pieces.push(Piece::Empty {
                        va: params[p] == "__VA_ARGS__" || (m.variadic && p + 1 == params.len()),
                    });
                } else {
                    pieces.extend(toks.into_iter().map(Piece::Tok));
                }
                k += 1;
                continue;
            }
            if b.is("##") {
                pieces.push(Piece::Paste);
            } else {
                let mut tok = b.clone();
                tok.span = span;
                tok.origin = Some(inv.origin.clone().unwrap_or_else(|| Rc::from(m.name.as_str())));
                pieces.push(Piece::Tok(tok));
            }
            k += 1;
        }
        // Resolve `##`.
        let mut res: Vec<Piece> = Vec::new();
        let mut it = pieces.into_iter().peekable();
        while let Some(p) = it.next() {
            match p {
                Piece::Paste => {
                    let right = it.next();
                    let left = res.pop();
                    match (left, right) {
                        (Some(Piece::Tok(l)), Some(Piece::Empty { va: true })) if l.is(",") => {}
                        (Some(Piece::Tok(l)), Some(Piece::Tok(r))) => {
                            let joined = format!("{}{}", l.text, r.text);
                            match lex(&joined, l.span.file) {
                                Ok(v) if v.len() == 1 => res.push(Piece::Tok(Token {
                                    kind: v[0].kind,
                                    text: v[0].text.clone(),
                                    ..l
                                })),
                                _ => {
                                    res.push(Piece::Tok(l));
                                    res.push(Piece::Tok(r));
                                }
                            }
                        }
                        (Some(l), Some(Piece::Empty { .. })) => res.push(l),
                        (Some(Piece::Empty { .. }), Some(r)) => res.push(r),
                        (l, r) => {
                            res.extend(l);
                            res.extend(r);
                        }
                    }
                }
                other => res.push(other),
            }
        }
        let mut hide: Vec<Rc<str>> = inv.hide.to_vec();
        hide.push(Rc::from(m.name.as_str()));
        let hide = Rc::new(hide);
        res.into_iter()
            .filter_map(|p| match p {
                Piece::Tok(mut t) => {
                    let mut h = t.hide.to_vec();
                    for x in hide.iter() {
                        if !h.contains(x) {
                            h.push(x.clone());
                        }
                    }
                    t.hide = Rc::new(h);
                    t.bol = false;
                    Some(t)
                }
                _ => None,
            })
            .collect()
    }
}

fn number_token(text: &str, like: &Token) -> Token {
    Token {
        kind: TokKind::Number,
        text: Rc::from(text),
        ..like.clone()
    }
}

fn collect_args(input: &mut VecDeque<Token>, m: &Macro) -> Option<(Vec<Vec<Token>>, Span)> {
    let nparams = m.params.as_ref().map_or(0, |p| p.len());
    let mut consumed = Vec::new();
    let open = input.pop_front()?;
    consumed.push(open);
    let mut args: Vec<Vec<Token>> = vec![Vec::new()];
    let mut depth = 0usize;
    loop {
        let Some(a) = input.pop_front() else {
            for t in consumed.into_iter().rev() {
                input.push_front(t);
            }
            return None;
        };
        consumed.push(a.clone());
        if a.is("(") {
            depth += 1;
        } else if a.is(")") {
            if depth == 0 {
                if nparams == 0 && args.len() == 1 && args[0].is_empty() {
                    args.clear();
                }
                return Some((args, a.span));
            }
            depth -= 1;
        } else if a.is(",") && depth == 0 && !(m.variadic && args.len() >= nparams) {
            args.push(Vec::new());
            continue;
        }
        args.last_mut().unwrap().push(a);
    }
}

fn stringify(toks: &[Token]) -> String {
    let mut s = String::from("\"");
    for (i, t) in toks.iter().enumerate() {
        if i > 0 && t.space_before {
            s.push(' ');
        }
        if matches!(t.kind, TokKind::Str | TokKind::Char) {
            for ch in t.text.chars() {
                if ch == '"' || ch == '\\' {
                    s.push('\\');
                }
                s.push(ch);
            }
        } else {
            s.push_str(&t.text);
        }
    }
    s.push('"');
    s
}

/// Value of a C integer literal (suffixes ignored).
pub fn parse_int_literal(text: &str) -> Option<i64> {
    let t = text.trim_end_matches(['u', 'U', 'l', 'L']);
    let (digits, radix) = if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        (h, 16)
    } else if let Some(b) = t.strip_prefix("0b").or_else(|| t.strip_prefix("0B")) {
        (b, 2)
    } else if t.len() > 1 && t.starts_with('0') {
        (&t[1..], 8)
    } else {
        (t, 10)
    };
    u64::from_str_radix(digits, radix).ok().map(|v| v as i64)
}

/// Value of a simple C character literal such as `'a'` or `'\n'`.
pub fn parse_char_literal(text: &str) -> Option<i64> {
    let inner = text.trim_start_matches(['L', 'u', 'U', '8']);
    let inner = inner.strip_prefix('\'')?.strip_suffix('\'')?;
    let mut chars = inner.chars();
    let c = chars.next()?;
    if c != '\\' {
        return Some(c as i64);
    }
    let e = chars.next()?;
    Some(match e {
        'n' => 10,
        't' => 9,
        'r' => 13,
        '0'..='7' => {
            let oct: String = std::iter::once(e).chain(chars.take_while(|c| c.is_digit(8))).collect();
            i64::from_str_radix(&oct, 8).ok()?
        }
        'x' => i64::from_str_radix(chars.as_str(), 16).ok()?,
        'a' => 7,
        'b' => 8,
        'f' => 12,
        'v' => 11,
        other => other as i64,
    })
}

struct ConstEval<'t> {
    toks: &'t [Token],
    pos: usize,
}

impl ConstEval<'_> {
    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(|t| &*t.text)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.peek() == Some(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ternary(&mut self) -> Option<i64> {
        let c = self.binary(0)?;
        if self.eat("?") {
            let a = self.ternary()?;
            if !self.eat(":") {
                return None;
            }
            let b = self.ternary()?;
            return Some(if c != 0 { a } else { b });
        }
        Some(c)
    }

    fn binary(&mut self, min_prec: u8) -> Option<i64> {
        let mut lhs = self.unary()?;
        loop {
            let Some(op) = self.peek() else { break };
            let Some(prec) = binop_prec(op) else { break };
            if prec < min_prec {
                break;
            }
            let op = op.to_string();
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = match op.as_str() {
                "||" => ((lhs != 0) || (rhs != 0)) as i64,
                "&&" => ((lhs != 0) && (rhs != 0)) as i64,
                "|" => lhs | rhs,
                "^" => lhs ^ rhs,
                "&" => lhs & rhs,
                "==" => (lhs == rhs) as i64,
                "!=" => (lhs != rhs) as i64,
                "<" => (lhs < rhs) as i64,
                ">" => (lhs > rhs) as i64,
                "<=" => (lhs <= rhs) as i64,
                ">=" => (lhs >= rhs) as i64,
                "<<" => lhs.wrapping_shl(rhs as u32),
                ">>" => lhs.wrapping_shr(rhs as u32),
                "+" => lhs.wrapping_add(rhs),
                "-" => lhs.wrapping_sub(rhs),
                "*" => lhs.wrapping_mul(rhs),
                "/" => lhs.checked_div(rhs)?,
                "%" => lhs.checked_rem(rhs)?,
                _ => return None,
            };
        }
        Some(lhs)
    }

    fn unary(&mut self) -> Option<i64> {
        if self.eat("!") {
            return Some((self.unary()? == 0) as i64);
        }
        if self.eat("~") {
            return Some(!self.unary()?);
        }
        if self.eat("-") {
            return Some(self.unary()?.wrapping_neg());
        }
        if self.eat("+") {
            return self.unary();
        }
        if self.eat("(") {
            let v = self.ternary()?;
            return self.eat(")").then_some(v);
        }
        let t = self.toks.get(self.pos)?;
        self.pos += 1;
        match t.kind {
            TokKind::Number => parse_int_literal(&t.text),
            TokKind::Char => parse_char_literal(&t.text),
            _ => None,
        }
    }
}

fn binop_prec(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" => 4,
        "&" => 5,
        "==" | "!=" => 6,
        "<" | ">" | "<=" | ">=" => 7,
        "<<" | ">>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        _ => return None,
    })
}

/// Preprocess in-memory text as a single virtual file.
pub fn preprocess_text(
    sm: &mut SourceMap,
    name: &str,
    text: &str,
) -> Result<(FileId, PreprocessOutput), PreprocessError> {
    let id = sm.add(SourceFile::new(name, PathBuf::from(name), text.to_string()));
    let out = Preprocessor::new(sm, None, Vec::new()).run(id)?;
    Ok((id, out))
}
