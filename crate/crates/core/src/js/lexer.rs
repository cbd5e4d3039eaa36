//! Tokenizer for the supported JavaScript subset.

use std::fmt;

use thiserror::Error;

use super::ast::Span;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Identifiers and keywords alike; the parser decides which is which.
    Ident(String),
    Num(f64),
    Str(String),
    Template(Template),
    Regex { pattern: String, flags: String },
    Punct(&'static str),
    Error(String),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    /// Cooked string pieces; always one more than `exprs`.
    pub quasis: Vec<String>,
    /// Byte ranges of the `${...}` interpolation sources.
    pub exprs: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
    /// A line terminator appears between the previous token and this one.
    pub nl_before: bool,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.kind, TokenKind::Punct(q) if q == p)
    }

    pub fn is_ident(&self, name: &str) -> bool {
        matches!(&self.kind, TokenKind::Ident(n) if n == name)
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Num(n) => write!(f, "number {n}"),
            TokenKind::Str(_) => f.write_str("string"),
            TokenKind::Template(_) => f.write_str("template"),
            TokenKind::Regex { .. } => f.write_str("regex"),
            TokenKind::Punct(p) => write!(f, "`{p}`"),
            TokenKind::Error(e) => write!(f, "invalid token ({e})"),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("lex error at byte {offset}: {message}")]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

// Longest first within each leading character is handled by trying longer
// lengths before shorter ones.
const PUNCTS: &[&str] = &[
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=", "??=", "=>", "==", "!=",
    "<=", ">=", "&&", "||", "??", "?.", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "**", "<<", ">>", "{", "}", "(", ")", "[", "]", ";", ",", "<", ">", "+", "-", "*", "/", "%",
    "&", "|", "^", "!", "~", "?", ":", "=", ".", "@", "#",
];

const REGEX_PRECEDING_KEYWORDS: &[&str] = &[
    "return", "typeof", "instanceof", "in", "of", "new", "delete", "void", "throw", "case", "do",
    "else", "yield", "await",
];

pub struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    /// Offset added to all reported spans (for sub-lexing template interpolations).
    base: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Self::with_base(src, 0)
    }

    pub fn with_base(src: &'a str, base: usize) -> Self {
        Lexer { src, bytes: src.as_bytes(), pos: 0, base }
    }

    /// Tokenizes the whole input. Lexical problems become `Error` tokens; the
    /// returned vector always ends with `Eof`.
    pub fn tokenize(mut self) -> Vec<Token> {
        let mut out: Vec<Token> = Vec::new();
        loop {
            let nl_before = match self.skip_trivia() {
                Ok(nl) => nl,
                Err(msg) => {
                    let start = self.pos;
                    self.pos = self.bytes.len();
                    out.push(self.token(TokenKind::Error(msg), start, false));
                    continue;
                }
            };
            let start = self.pos;
            if start >= self.bytes.len() {
                out.push(self.token(TokenKind::Eof, start, nl_before));
                return out;
            }
            let regex_ok = regex_allowed(out.last());
            let kind = self.next_kind(regex_ok);
            out.push(self.token(kind, start, nl_before));
        }
    }

    fn token(&self, kind: TokenKind, start: usize, nl_before: bool) -> Token {
        Token {
            kind,
            span: Span::new(self.base + start, self.base + self.pos),
            nl_before,
        }
    }

    fn peek(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.pos + off).copied()
    }

    /// Skips whitespace and comments, reporting whether a line break was crossed.
    fn skip_trivia(&mut self) -> Result<bool, String> {
        let mut nl = false;
        while let Some(c) = self.peek(0) {
            match c {
                b'\n' | b'\r' => {
                    nl = true;
                    self.pos += 1;
                }
                b' ' | b'\t' | 0x0b | 0x0c => self.pos += 1,
                b'/' if self.peek(1) == Some(b'/') => {
                    while let Some(c) = self.peek(0) {
                        if c == b'\n' || c == b'\r' {
                            break;
                        }
                        self.pos += 1;
                    }
                }
                b'/' if self.peek(1) == Some(b'*') => {
                    let rest = &self.src[self.pos + 2..];
                    match rest.find("*/") {
                        Some(end) => {
                            if rest[..end].contains(['\n', '\r']) {
                                nl = true;
                            }
                            self.pos += end + 4;
                        }
                        None => return Err("unterminated block comment".into()),
                    }
                }
                _ if self.src[self.pos..].starts_with('\u{a0}')
                    || self.src[self.pos..].starts_with('\u{feff}') =>
                {
                    self.pos += self.src[self.pos..].chars().next().map_or(1, char::len_utf8);
                }
                _ if self.src[self.pos..].starts_with('\u{2028}')
                    || self.src[self.pos..].starts_with('\u{2029}') =>
                {
                    nl = true;
                    self.pos += 3;
                }
                _ => break,
            }
        }
        Ok(nl)
    }

    fn next_kind(&mut self, regex_ok: bool) -> TokenKind {
        let c = self.bytes[self.pos];
        if is_ident_start(c) {
            return self.ident();
        }
        if c.is_ascii_digit() || (c == b'.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) {
            return self.number();
        }
        match c {
            b'"' | b'\'' => self.string(c),
            b'`' => self.template(),
            b'/' if regex_ok => self.regex(),
            _ => {
                let rest = &self.src[self.pos..];
                for p in PUNCTS {
                    if rest.starts_with(p) {
                        // `?.5` is a conditional followed by a number.
                        if *p == "?." && self.peek(2).is_some_and(|d| d.is_ascii_digit()) {
                            continue;
                        }
                        self.pos += p.len();
                        return TokenKind::Punct(p);
                    }
                }
                let len = rest.chars().next().map_or(1, char::len_utf8);
                self.pos += len;
                TokenKind::Error(format!("unexpected character {:?}", &rest[..len]))
            }
        }
    }

    fn ident(&mut self) -> TokenKind {
        let start = self.pos;
        while self.peek(0).is_some_and(is_ident_part) {
            self.pos += 1;
        }
        TokenKind::Ident(self.src[start..self.pos].to_string())
    }

    fn number(&mut self) -> TokenKind {
        let start = self.pos;
        let radix = match (self.peek(0), self.peek(1).map(|b| b.to_ascii_lowercase())) {
            (Some(b'0'), Some(b'x')) => 16,
            (Some(b'0'), Some(b'o')) => 8,
            (Some(b'0'), Some(b'b')) => 2,
            _ => 10,
        };
        if radix != 10 {
            self.pos += 2;
            let digits_start = self.pos;
            while self.peek(0).is_some_and(|b| b.is_ascii_alphanumeric() || b == b'_') {
                self.pos += 1;
            }
            let digits: String = self.src[digits_start..self.pos]
                .chars()
                .filter(|&c| c != '_' && c != 'n')
                .collect();
            return match u64::from_str_radix(&digits, radix) {
                Ok(v) => TokenKind::Num(v as f64),
                Err(_) => TokenKind::Error(format!("bad numeric literal {}", &self.src[start..self.pos])),
            };
        }
        while self.peek(0).is_some_and(|b| b.is_ascii_digit() || b == b'_') {
            self.pos += 1;
        }
        if self.peek(0) == Some(b'.') {
            self.pos += 1;
            while self.peek(0).is_some_and(|b| b.is_ascii_digit() || b == b'_') {
                self.pos += 1;
            }
        }
        if matches!(self.peek(0), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(0), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.peek(0).is_some_and(|b| b.is_ascii_digit()) {
                while self.peek(0).is_some_and(|b| b.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.src[start..self.pos].chars().filter(|&c| c != '_').collect();
        // BigInt suffix is accepted and dropped.
        if self.peek(0) == Some(b'n') {
            self.pos += 1;
        }
        if self.peek(0).is_some_and(is_ident_start) {
            while self.peek(0).is_some_and(is_ident_part) {
                self.pos += 1;
            }
            return TokenKind::Error(format!("identifier directly after number {}", &self.src[start..self.pos]));
        }
        match text.parse::<f64>() {
            Ok(v) => TokenKind::Num(v),
            Err(_) => TokenKind::Error(format!("bad numeric literal {text}")),
        }
    }

    /// Reads one escape sequence after a backslash, appending to `out`.
    fn escape(&mut self, out: &mut String) -> Result<(), String> {
        let Some(c) = self.peek(0) else {
            return Err("unterminated escape".into());
        };
        self.pos += 1;
        match c {
            b'n' => out.push('\n'),
            b't' => out.push('\t'),
            b'r' => out.push('\r'),
            b'b' => out.push('\u{8}'),
            b'f' => out.push('\u{c}'),
            b'v' => out.push('\u{b}'),
            b'0' if !self.peek(0).is_some_and(|d| d.is_ascii_digit()) => out.push('\0'),
            b'\r' => {
                if self.peek(0) == Some(b'\n') {
                    self.pos += 1;
                }
            }
            b'\n' => {}
            b'x' => {
                let hex = self.src.get(self.pos..self.pos + 2).ok_or("bad \\x escape")?;
                let v = u32::from_str_radix(hex, 16).map_err(|_| "bad \\x escape")?;
                self.pos += 2;
                out.push(char::from_u32(v).unwrap_or('\u{fffd}'));
            }
            b'u' => {
                let v = if self.peek(0) == Some(b'{') {
                    let close = self.src[self.pos..].find('}').ok_or("bad \\u escape")?;
                    let hex = &self.src[self.pos + 1..self.pos + close];
                    self.pos += close + 1;
                    u32::from_str_radix(hex, 16).map_err(|_| "bad \\u escape")?
                } else {
                    let hex = self.src.get(self.pos..self.pos + 4).ok_or("bad \\u escape")?;
                    let v = u32::from_str_radix(hex, 16).map_err(|_| "bad \\u escape")?;
                    self.pos += 4;
                    v
                };
                out.push(char::from_u32(v).unwrap_or('\u{fffd}'));
            }
            _ => {
                // Non-ASCII escaped characters: copy the whole code point.
                self.pos -= 1;
                let ch = self.src[self.pos..].chars().next().unwrap_or('\u{fffd}');
                self.pos += ch.len_utf8();
                out.push(ch);
            }
        }
        Ok(())
    }

    fn string(&mut self, quote: u8) -> TokenKind {
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek(0) else {
                return TokenKind::Error("unterminated string".into());
            };
            match c {
                _ if c == quote => {
                    self.pos += 1;
                    return TokenKind::Str(out);
                }
                b'\\' => {
                    self.pos += 1;
                    if let Err(e) = self.escape(&mut out) {
                        return TokenKind::Error(e);
                    }
                }
                b'\n' | b'\r' => return TokenKind::Error("unterminated string".into()),
                _ => {
                    let ch = self.src[self.pos..].chars().next().unwrap_or('\u{fffd}');
                    self.pos += ch.len_utf8();
                    out.push(ch);
                }
            }
        }
    }

    fn template(&mut self) -> TokenKind {
        self.pos += 1;
        let mut quasis = Vec::new();
        let mut exprs = Vec::new();
        let mut cur = String::new();
        loop {
            let Some(c) = self.peek(0) else {
                return TokenKind::Error("unterminated template".into());
            };
            match c {
                b'`' => {
                    self.pos += 1;
                    quasis.push(cur);
                    return TokenKind::Template(Template { quasis, exprs });
                }
                b'\\' => {
                    self.pos += 1;
                    if let Err(e) = self.escape(&mut cur) {
                        return TokenKind::Error(e);
                    }
                }
                b'$' if self.peek(1) == Some(b'{') => {
                    self.pos += 2;
                    let start = self.pos;
                    match self.skip_balanced_braces() {
                        Some(end) => {
                            exprs.push(Span::new(self.base + start, self.base + end));
                            quasis.push(std::mem::take(&mut cur));
                        }
                        None => return TokenKind::Error("unterminated template interpolation".into()),
                    }
                }
                _ => {
                    let ch = self.src[self.pos..].chars().next().unwrap_or('\u{fffd}');
                    self.pos += ch.len_utf8();
                    cur.push(ch);
                }
            }
        }
    }

    /// Advances past a `${ ... }` body, returning the offset of the closing brace.
    fn skip_balanced_braces(&mut self) -> Option<usize> {
        let mut depth = 0usize;
        while let Some(c) = self.peek(0) {
            match c {
                b'{' => depth += 1,
                b'}' if depth == 0 => {
                    let end = self.pos;
                    self.pos += 1;
                    return Some(end);
                }
                b'}' => depth -= 1,
                b'"' | b'\'' => {
                    if let TokenKind::Error(_) = self.string(c) {
                        return None;
                    }
                    continue;
                }
                b'`' => {
                    if let TokenKind::Error(_) = self.template() {
                        return None;
                    }
                    continue;
                }
                _ => {}
            }
            self.pos += 1;
        }
        None
    }

    fn regex(&mut self) -> TokenKind {
        self.pos += 1;
        let start = self.pos;
        let mut in_class = false;
        loop {
            match self.peek(0) {
                None | Some(b'\n') | Some(b'\r') => {
                    return TokenKind::Error("unterminated regex".into());
                }
                Some(b'\\') => {
                    self.pos += 1;
                    match self.src[self.pos..].chars().next() {
                        Some('\n' | '\r') | None => {
                            return TokenKind::Error("unterminated regex".into());
                        }
                        Some(ch) => self.pos += ch.len_utf8(),
                    }
                }
                Some(b'[') => {
                    in_class = true;
                    self.pos += 1;
                }
                Some(b']') => {
                    in_class = false;
                    self.pos += 1;
                }
                Some(b'/') if !in_class => break,
                Some(_) => self.pos += 1,
            }
        }
        let pattern = self.src[start..self.pos].to_string();
        self.pos += 1;
        let fstart = self.pos;
        while self.peek(0).is_some_and(is_ident_part) {
            self.pos += 1;
        }
        let flags = self.src[fstart..self.pos].to_string();
        TokenKind::Regex { pattern, flags }
    }
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_' || c == b'$' || c >= 0x80
}

fn is_ident_part(c: u8) -> bool {
    is_ident_start(c) || c.is_ascii_digit()
}

fn regex_allowed(prev: Option<&Token>) -> bool {
    match prev.map(|t| &t.kind) {
        None => true,
        Some(TokenKind::Punct(p)) => !matches!(*p, ")" | "]" | "++" | "--"),
        Some(TokenKind::Ident(name)) => REGEX_PRECEDING_KEYWORDS.contains(&name.as_str()),
        Some(TokenKind::Error(_)) => true,
        _ => false,
    }
}

/// Tokenizes strictly, failing on the first lexical error.
pub fn tokenize_strict(src: &str) -> Result<Vec<Token>, LexError> {
    let toks = Lexer::new(src).tokenize();
    for t in &toks {
        if let TokenKind::Error(msg) = &t.kind {
            return Err(LexError { offset: t.span.start, message: msg.clone() });
        }
    }
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        Lexer::new(src).tokenize().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn punctuation_longest_match() {
        assert_eq!(
            kinds("a===b>>>=c?.d"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Punct("==="),
                TokenKind::Ident("b".into()),
                TokenKind::Punct(">>>="),
                TokenKind::Ident("c".into()),
                TokenKind::Punct("?."),
                TokenKind::Ident("d".into()),
                TokenKind::Eof,
            ]
        );
        assert_eq!(kinds("a?.5:1")[1], TokenKind::Punct("?"));
    }

    #[test]
    fn strings_and_escapes() {
        assert_eq!(kinds(r#"'a\x41B\u{43}\n'"#)[0], TokenKind::Str("aABC\n".into()));
        assert!(matches!(kinds("'abc")[0], TokenKind::Error(_)));
        assert!(matches!(kinds("'ab\nc'")[0], TokenKind::Error(_)));
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("0x1F")[0], TokenKind::Num(31.0));
        assert_eq!(kinds("1e3")[0], TokenKind::Num(1000.0));
        assert_eq!(kinds(".5")[0], TokenKind::Num(0.5));
        assert_eq!(kinds("1_000")[0], TokenKind::Num(1000.0));
    }

    #[test]
    fn regex_versus_division() {
        assert!(matches!(kinds("x = /ab+c/gi")[2], TokenKind::Regex { .. }));
        assert_eq!(kinds("a / b / c")[1], TokenKind::Punct("/"));
        assert_eq!(kinds("(a) / 2")[3], TokenKind::Punct("/"));
    }

    #[test]
    fn template_interpolations() {
        let src = "`a${x + `n${y}`}b`";
        let TokenKind::Template(t) = &kinds(src)[0] else { panic!() };
        assert_eq!(t.quasis, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(&src[t.exprs[0].start..t.exprs[0].end], "x + `n${y}`");
    }

    #[test]
    fn newline_tracking() {
        let toks = Lexer::new("a /* x\n */ b\nc").tokenize();
        assert!(!toks[0].nl_before);
        assert!(toks[1].nl_before);
        assert!(toks[2].nl_before);
    }

    #[test]
    fn strict_tokenize_reports_offset() {
        let err = tokenize_strict("a = 'x").unwrap_err();
        assert_eq!(err.offset, 4);
    }
}
