use std::rc::Rc;

use super::source::{FileId, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    Number,
    Char,
    Str,
    Punct,
    Other,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokKind,
    pub text: Rc<str>,
    pub span: Span,
    /// First token on its logical line.
    pub bol: bool,
    pub space_before: bool,
    /// Macros that must not be re-expanded on this token.
    pub hide: Rc<Vec<Rc<str>>>,
    /// Name of the outermost macro this token was produced by, if any.
    pub origin: Option<Rc<str>>,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        &*self.text == text && self.kind != TokKind::Str && self.kind != TokKind::Char
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokKind::Ident
    }

    pub fn hidden(&self, name: &str) -> bool {
        self.hide.iter().any(|h| &**h == name)
    }
}

const PUNCTS: &[&str] = &[
    "...", "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "*=",
    "/=", "%=", "+=", "-=", "&=", "^=", "|=", "##",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

/// Tokenize one file. Comments and line splices are whitespace; newlines
/// are reported through `Token::bol`.
pub fn lex(text: &str, file: FileId) -> Result<Vec<Token>, LexError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut bol = true;
    let mut space = false;
    let empty: Rc<Vec<Rc<str>>> = Rc::new(Vec::new());
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'\n' => {
                bol = true;
                space = true;
                i += 1;
                continue;
            }
            b' ' | b'\t' | b'\r' | 0x0b | 0x0c => {
                space = true;
                i += 1;
                continue;
            }
            b'\\' if bytes.get(i + 1) == Some(&b'\n') => {
                i += 2;
                space = true;
                continue;
            }
            b'\\' if bytes.get(i + 1) == Some(&b'\r') && bytes.get(i + 2) == Some(&b'\n') => {
                i += 3;
                space = true;
                continue;
            }
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    if bytes[i] == b'\\' && bytes.get(i + 1) == Some(&b'\n') {
                        i += 1;
                    }
                    i += 1;
                }
                space = true;
                continue;
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let start = i;
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(LexError {
                            offset: start,
                            message: "unterminated comment".into(),
                        });
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    i += 1;
                }
                space = true;
                continue;
            }
            _ => {}
        }
        let start = i;
        let kind;
        if is_ident_start(c) {
            // String/char prefixes: L"", u"", U"", u8"".
            let mut j = i;
            while j < bytes.len() && is_ident_char(bytes[j]) {
                j += 1;
            }
            let word = &text[i..j];
            if matches!(word, "L" | "u" | "U" | "u8")
                && j < bytes.len()
                && (bytes[j] == b'"' || bytes[j] == b'\'')
            {
                let quote = bytes[j];
                i = scan_quoted(bytes, j, quote).ok_or_else(|| LexError {
                    offset: start,
                    message: "unterminated literal".into(),
                })?;
                kind = if quote == b'"' { TokKind::Str } else { TokKind::Char };
            } else {
                i = j;
                kind = TokKind::Ident;
            }
        } else if c.is_ascii_digit()
            || (c == b'.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit()))
        {
            i += 1;
            while i < bytes.len() {
                let b = bytes[i];
                if matches!(b, b'+' | b'-')
                    && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P')
                {
                    i += 1;
                } else if is_ident_char(b) || b == b'.' {
                    i += 1;
                } else {
                    break;
                }
            }
            kind = TokKind::Number;
        } else if c == b'"' || c == b'\'' {
            i = scan_quoted(bytes, i, c).ok_or_else(|| LexError {
                offset: start,
                message: "unterminated literal".into(),
            })?;
            kind = if c == b'"' { TokKind::Str } else { TokKind::Char };
        } else if c.is_ascii_punctuation() {
            let rest = &text[i..];
            let len = PUNCTS
                .iter()
                .find(|p| rest.starts_with(**p))
                .map(|p| p.len())
                .unwrap_or(1);
            i += len;
            kind = TokKind::Punct;
        } else {
            // Non-ASCII or control byte: take the whole UTF-8 character.
            let ch = text[i..].chars().next().unwrap();
            i += ch.len_utf8();
            kind = TokKind::Other;
        }
        out.push(Token {
            kind,
            text: Rc::from(&text[start..i]),
            span: Span::new(file, start, i),
            bol,
            space_before: space,
            hide: empty.clone(),
            origin: None,
        });
        bol = false;
        space = false;
    }
    Ok(out)
}

fn scan_quoted(bytes: &[u8], open: usize, quote: u8) -> Option<usize> {
    let mut i = open + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'\n' => return None,
            b if b == quote => return Some(i + 1),
            _ => i += 1,
        }
    }
    None
}

pub fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_' || c == b'$'
}

pub fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$'
}
