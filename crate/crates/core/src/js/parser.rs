//! Recursive-descent parser for the traceable JavaScript subset.
//!
//! Unsupported constructs (classes, generators, async functions, exotic
//! regex flags, ...) fail the enclosing top-level statement, which is then
//! skipped. Parsing as a whole never fails.

use std::sync::Arc;

use serde::Serialize;

use super::ast::*;
use super::lexer::{Lexer, Token, TokenKind};
use super::number_to_string;

const MAX_DEPTH: usize = 256;
const PARSE_STACK: usize = 64 << 20;

const RESERVED: &[&str] = &[
    "break", "case", "catch", "class", "const", "continue", "debugger", "default", "delete", "do",
    "else", "export", "extends", "finally", "for", "function", "if", "import", "in", "instanceof",
    "new", "return", "super", "switch", "this", "throw", "try", "typeof", "var", "void", "while",
    "with", "null", "true", "false", "enum",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    /// Absent only when nothing at all could be salvaged from non-empty input.
    pub ast: Option<Program>,
    pub errors: Vec<ParseError>,
    /// Fraction of input bytes not inside a skipped statement region.
    pub coverage: f64,
    /// Byte regions of skipped top-level statements, in order.
    pub skipped: Vec<Span>,
}

impl ParseOutcome {
    pub fn program(&self) -> Option<&Program> {
        self.ast.as_ref()
    }
}

type PResult<T> = Result<T, ParseError>;

/// Parses source text. With `module_mode` off, import/export declarations
/// are reported as errors and skipped like any other unsupported statement.
pub fn parse_program(source: &str, module_mode: bool) -> ParseOutcome {
    // Deeply nested input recurses far; give it a dedicated stack.
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(PARSE_STACK)
            .spawn_scoped(s, || parse_on_current_thread(source, module_mode))
            .expect("spawn parser thread")
            .join()
            .expect("parser thread panicked")
    })
}

fn parse_on_current_thread(source: &str, module_mode: bool) -> ParseOutcome {
    let toks = Lexer::new(source).tokenize();
    let mut p = Parser::new(source, toks, module_mode);
    let mut body = Vec::new();
    let mut errors = Vec::new();
    let mut skipped = Vec::new();
    while !p.at_eof() {
        let start = p.pos;
        match p.statement() {
            Ok(stmt) => body.push(stmt),
            Err(err) => {
                errors.push(err);
                p.depth = 0;
                p.no_in = false;
                p.recover_from(start);
                let region = Span::new(p.toks[start].span.start, p.peek().span.start);
                skipped.push(region);
            }
        }
    }
    let total = source.len();
    let skipped_bytes: usize = skipped.iter().map(Span::len).sum();
    let coverage = if total == 0 { 1.0 } else { 1.0 - skipped_bytes as f64 / total as f64 };
    let ast = if body.is_empty() && !errors.is_empty() {
        None
    } else {
        Some(Program { body, span: Span::new(0, total) })
    };
    ParseOutcome { ast, errors, coverage: coverage.clamp(0.0, 1.0), skipped }
}

/// Parses a standalone expression (used for `Function` bodies' parameter lists
/// and similar runtime-built code).
pub fn parse_expression(source: &str) -> PResult<Expr> {
    let toks = Lexer::new(source).tokenize();
    let mut p = Parser::new(source, toks, false);
    let e = p.expression()?;
    if !p.at_eof() {
        return Err(p.unexpected());
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
    module_mode: bool,
    no_in: bool,
    prev_end: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, toks: Vec<Token>, module_mode: bool) -> Self {
        Parser { src, toks, pos: 0, depth: 0, module_mode, no_in: false, prev_end: 0 }
    }

    // ---- token helpers ----

    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_at(&self, n: usize) -> &Token {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)]
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek().kind, TokenKind::Eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        self.prev_end = t.span.end;
        t
    }

    fn at(&self, p: &str) -> bool {
        self.peek().is_punct(p)
    }

    fn at_word(&self, w: &str) -> bool {
        self.peek().is_ident(w)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.at(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.at_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`, found {}", self.peek().kind)))
        }
    }

    fn error(&self, message: String) -> ParseError {
        ParseError { span: self.peek().span, message }
    }

    fn unexpected(&self) -> ParseError {
        match &self.peek().kind {
            TokenKind::Error(e) => self.error(e.clone()),
            k => self.error(format!("unexpected {k}")),
        }
    }

    fn unsupported(&self, what: &str) -> ParseError {
        self.error(format!("unsupported syntax: {what}"))
    }

    fn span_from(&self, start: usize) -> Span {
        Span::new(start, self.prev_end.max(start))
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("nesting too deep".into()));
        }
        Ok(())
    }

    fn binding_ident(&mut self) -> PResult<String> {
        match &self.peek().kind {
            TokenKind::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                let name = name.clone();
                self.bump();
                Ok(name)
            }
            _ => Err(self.unexpected()),
        }
    }

    fn consume_semicolon(&mut self) -> PResult<()> {
        if self.eat(";") || self.at("}") || self.at_eof() || self.peek().nl_before {
            Ok(())
        } else {
            Err(self.error(format!("expected `;`, found {}", self.peek().kind)))
        }
    }

    /// Skips tokens after a failed top-level statement until a plausible
    /// statement boundary. Always consumes at least one token.
    fn recover_from(&mut self, start: usize) {
        let mut i = start;
        let mut depth = 0usize;
        let last = self.toks.len() - 1;
        while i < last {
            let t = &self.toks[i];
            match t.kind {
                TokenKind::Punct("{" | "(" | "[") => depth += 1,
                TokenKind::Punct("}" | ")" | "]") => depth = depth.saturating_sub(1),
                TokenKind::Punct(";") if depth == 0 => {
                    i += 1;
                    break;
                }
                _ => {}
            }
            i += 1;
            let next = &self.toks[i];
            if depth == 0 && next.nl_before && !continues(t, next) {
                break;
            }
        }
        self.pos = i.min(last);
    }

    // ---- statements ----

    fn statement(&mut self) -> PResult<Stmt> {
        self.enter()?;
        let r = self.statement_inner();
        self.depth -= 1;
        r
    }

    fn statement_inner(&mut self) -> PResult<Stmt> {
        let start = self.peek().span.start;
        let tok = self.peek().clone();
        let kind = match &tok.kind {
            TokenKind::Punct("{") => StmtKind::Block(self.block()?),
            TokenKind::Punct(";") => {
                self.bump();
                StmtKind::Empty
            }
            TokenKind::Ident(word) => match word.as_str() {
                "var" | "const" => StmtKind::VarDecl(self.var_statement()?),
                "let" if self.let_is_declaration() => StmtKind::VarDecl(self.var_statement()?),
                "function" => {
                    self.bump();
                    if self.at("*") {
                        return Err(self.unsupported("generator function"));
                    }
                    let name = self.binding_ident()?;
                    StmtKind::FuncDecl(Arc::new(self.function_rest(Some(name), start)?))
                }
                "async" if !self.peek_at(1).nl_before && self.peek_at(1).is_ident("function") => {
                    return Err(self.unsupported("async function"));
                }
                "class" => return Err(self.unsupported("class")),
                "with" => return Err(self.unsupported("with statement")),
                "if" => self.if_statement()?,
                "for" => self.for_statement()?,
                "while" => {
                    self.bump();
                    let test = self.paren_expression()?;
                    let body = Box::new(self.statement()?);
                    StmtKind::While { test, body }
                }
                "do" => {
                    self.bump();
                    let body = Box::new(self.statement()?);
                    if !self.eat_word("while") {
                        return Err(self.unexpected());
                    }
                    let test = self.paren_expression()?;
                    self.eat(";");
                    StmtKind::DoWhile { body, test }
                }
                "return" => {
                    self.bump();
                    let arg = if self.at(";") || self.at("}") || self.at_eof() || self.peek().nl_before {
                        None
                    } else {
                        Some(self.expression()?)
                    };
                    self.consume_semicolon()?;
                    StmtKind::Return(arg)
                }
                "break" | "continue" => {
                    let is_break = word == "break";
                    self.bump();
                    let label = match &self.peek().kind {
                        TokenKind::Ident(l) if !self.peek().nl_before && !RESERVED.contains(&l.as_str()) => {
                            let l = l.clone();
                            self.bump();
                            Some(l)
                        }
                        _ => None,
                    };
                    self.consume_semicolon()?;
                    if is_break {
                        StmtKind::Break(label)
                    } else {
                        StmtKind::Continue(label)
                    }
                }
                "throw" => {
                    self.bump();
                    if self.peek().nl_before {
                        return Err(self.error("line break after throw".into()));
                    }
                    let e = self.expression()?;
                    self.consume_semicolon()?;
                    StmtKind::Throw(e)
                }
                "try" => self.try_statement()?,
                "switch" => self.switch_statement()?,
                "debugger" => {
                    self.bump();
                    self.consume_semicolon()?;
                    StmtKind::Empty
                }
                "import" if !self.peek_at(1).is_punct("(") && !self.peek_at(1).is_punct(".") => {
                    if !self.module_mode {
                        return Err(self.error("import declaration outside module".into()));
                    }
                    StmtKind::Import(self.import_decl()?)
                }
                "export" => {
                    if !self.module_mode {
                        return Err(self.error("export declaration outside module".into()));
                    }
                    StmtKind::Export(self.export_decl(start)?)
                }
                w if !RESERVED.contains(&w) && self.peek_at(1).is_punct(":") => {
                    let label = w.to_string();
                    self.bump();
                    self.bump();
                    StmtKind::Labeled(label, Box::new(self.statement()?))
                }
                _ => self.expression_statement()?,
            },
            _ => self.expression_statement()?,
        };
        Ok(Stmt::new(kind, self.span_from(start)))
    }

    fn expression_statement(&mut self) -> PResult<StmtKind> {
        let e = self.expression()?;
        self.consume_semicolon()?;
        Ok(StmtKind::Expr(e))
    }

    fn let_is_declaration(&self) -> bool {
        let next = self.peek_at(1);
        matches!(&next.kind, TokenKind::Ident(n) if n != "in" && n != "instanceof" && n != "of")
            || next.is_punct("[")
            || next.is_punct("{")
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect("{")?;
        let mut body = Vec::new();
        while !self.at("}") {
            if self.at_eof() {
                return Err(self.error("unterminated block".into()));
            }
            body.push(self.statement()?);
        }
        self.bump();
        Ok(body)
    }

    fn var_kind(&mut self) -> PResult<VarKind> {
        let kind = match &self.peek().kind {
            TokenKind::Ident(w) if w == "var" => VarKind::Var,
            TokenKind::Ident(w) if w == "let" => VarKind::Let,
            TokenKind::Ident(w) if w == "const" => VarKind::Const,
            _ => return Err(self.unexpected()),
        };
        self.bump();
        Ok(kind)
    }

    fn var_statement(&mut self) -> PResult<VarDecl> {
        let kind = self.var_kind()?;
        let decl = self.var_declarators(kind, None)?;
        self.consume_semicolon()?;
        Ok(decl)
    }

    fn var_declarators(&mut self, kind: VarKind, first: Option<Pattern>) -> PResult<VarDecl> {
        let mut decls = Vec::new();
        let mut first = first;
        loop {
            let target = match first.take() {
                Some(p) => p,
                None => self.binding_pattern()?,
            };
            let init = if self.eat("=") { Some(self.assign()?) } else { None };
            decls.push((target, init));
            if !self.eat(",") {
                break;
            }
        }
        Ok(VarDecl { kind, decls })
    }

    fn if_statement(&mut self) -> PResult<StmtKind> {
        self.bump();
        let test = self.paren_expression()?;
        let cons = Box::new(self.statement()?);
        let alt = if self.eat_word("else") { Some(Box::new(self.statement()?)) } else { None };
        Ok(StmtKind::If { test, cons, alt })
    }

    fn paren_expression(&mut self) -> PResult<Expr> {
        self.expect("(")?;
        let e = self.expression()?;
        self.expect(")")?;
        Ok(e)
    }

    fn for_statement(&mut self) -> PResult<StmtKind> {
        self.bump();
        if self.at_word("await") {
            return Err(self.unsupported("for await"));
        }
        self.expect("(")?;
        let saved_no_in = std::mem::replace(&mut self.no_in, true);
        let head = self.for_head();
        self.no_in = saved_no_in;
        let init = match head? {
            Some(Ok((left, of))) => {
                let right = if of { self.assign()? } else { self.expression()? };
                self.expect(")")?;
                let body = Box::new(self.statement()?);
                return Ok(StmtKind::ForIn { left, right, body, of });
            }
            Some(Err(init)) => Some(init),
            None => None,
        };
        self.expect(";")?;
        let test = if self.at(";") { None } else { Some(self.expression()?) };
        self.expect(";")?;
        let update = if self.at(")") { None } else { Some(self.expression()?) };
        self.expect(")")?;
        let body = Box::new(self.statement()?);
        Ok(StmtKind::For { init, test, update, body })
    }

    /// Parses the part of a `for` head before `;`/`in`/`of`.
    /// `Ok(Some(Ok(..)))` is a for-in/of head; `Ok(Some(Err(init)))` a classic initializer.
    #[allow(clippy::type_complexity)]
    fn for_head(&mut self) -> PResult<Option<Result<(ForHead, bool), ForInit>>> {
        if self.at(";") {
            return Ok(None);
        }
        let is_decl = self.at_word("var") || self.at_word("const") || (self.at_word("let") && self.let_is_declaration());
        if is_decl {
            let kind = self.var_kind()?;
            let pattern = self.binding_pattern()?;
            if self.at_word("in") || self.at_word("of") {
                let of = self.bump().kind == TokenKind::Ident("of".into());
                return Ok(Some(Ok((ForHead::Var(kind, pattern), of))));
            }
            return Ok(Some(Err(ForInit::Var(self.var_declarators(kind, Some(pattern))?))));
        }
        let e = self.expression()?;
        if self.at_word("in") || self.at_word("of") {
            if !is_assign_target(&e) {
                return Err(self.unsupported("destructuring for-in target"));
            }
            let of = self.bump().kind == TokenKind::Ident("of".into());
            return Ok(Some(Ok((ForHead::Target(e), of))));
        }
        Ok(Some(Err(ForInit::Expr(e))))
    }

    fn try_statement(&mut self) -> PResult<StmtKind> {
        self.bump();
        let block = self.block()?;
        let mut param = None;
        let mut handler = None;
        if self.eat_word("catch") {
            if self.eat("(") {
                param = Some(self.binding_pattern()?);
                self.expect(")")?;
            }
            handler = Some(self.block()?);
        }
        let finalizer = if self.eat_word("finally") { Some(self.block()?) } else { None };
        if handler.is_none() && finalizer.is_none() {
            return Err(self.error("try without catch or finally".into()));
        }
        Ok(StmtKind::Try { block, param, handler, finalizer })
    }

    fn switch_statement(&mut self) -> PResult<StmtKind> {
        self.bump();
        let discriminant = self.paren_expression()?;
        self.expect("{")?;
        let mut cases = Vec::new();
        while !self.eat("}") {
            let test = if self.eat_word("case") {
                Some(self.expression()?)
            } else if self.eat_word("default") {
                None
            } else {
                return Err(self.unexpected());
            };
            self.expect(":")?;
            let mut body = Vec::new();
            while !self.at_word("case") && !self.at_word("default") && !self.at("}") {
                if self.at_eof() {
                    return Err(self.error("unterminated switch".into()));
                }
                body.push(self.statement()?);
            }
            cases.push(SwitchCase { test, body });
        }
        Ok(StmtKind::Switch { discriminant, cases })
    }

    fn module_specifier(&mut self) -> PResult<String> {
        match &self.peek().kind {
            TokenKind::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected()),
        }
    }

    fn module_name(&mut self) -> PResult<String> {
        match &self.peek().kind {
            TokenKind::Ident(s) | TokenKind::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected()),
        }
    }

    fn import_decl(&mut self) -> PResult<ImportDecl> {
        self.bump();
        let mut decl = ImportDecl { source: String::new(), default: None, namespace: None, named: Vec::new() };
        if let TokenKind::Str(_) = self.peek().kind {
            decl.source = self.module_specifier()?;
            self.consume_semicolon()?;
            return Ok(decl);
        }
        if !self.at("{") && !self.at("*") {
            decl.default = Some(self.binding_ident()?);
            if !self.eat(",") {
                return self.import_from(decl);
            }
        }
        if self.eat("*") {
            if !self.eat_word("as") {
                return Err(self.unexpected());
            }
            decl.namespace = Some(self.binding_ident()?);
        } else {
            self.expect("{")?;
            while !self.eat("}") {
                let imported = self.module_name()?;
                let local = if self.eat_word("as") { self.binding_ident()? } else { imported.clone() };
                decl.named.push((imported, local));
                if !self.eat(",") {
                    self.expect("}")?;
                    break;
                }
            }
        }
        self.import_from(decl)
    }

    fn import_from(&mut self, mut decl: ImportDecl) -> PResult<ImportDecl> {
        if !self.eat_word("from") {
            return Err(self.unexpected());
        }
        decl.source = self.module_specifier()?;
        self.consume_semicolon()?;
        Ok(decl)
    }

    fn export_decl(&mut self, start: usize) -> PResult<ExportDecl> {
        self.bump();
        if self.eat_word("default") {
            if self.at_word("function") && !self.peek_at(1).is_punct("(") {
                let fstart = self.peek().span.start;
                self.bump();
                if self.at("*") {
                    return Err(self.unsupported("generator function"));
                }
                let name = self.binding_ident()?;
                let f = self.function_rest(Some(name), fstart)?;
                let stmt = Stmt::new(StmtKind::FuncDecl(Arc::new(f)), self.span_from(fstart));
                return Ok(ExportDecl::Decl(Box::new(stmt)));
            }
            let e = self.assign()?;
            self.consume_semicolon()?;
            return Ok(ExportDecl::Default(e));
        }
        if self.eat("*") {
            if self.eat_word("as") {
                self.module_name()?;
            }
            if !self.eat_word("from") {
                return Err(self.unexpected());
            }
            let source = self.module_specifier()?;
            self.consume_semicolon()?;
            return Ok(ExportDecl::All { source });
        }
        if self.eat("{") {
            let mut specifiers = Vec::new();
            while !self.eat("}") {
                let local = self.module_name()?;
                let exported = if self.eat_word("as") { self.module_name()? } else { local.clone() };
                specifiers.push((local, exported));
                if !self.eat(",") {
                    self.expect("}")?;
                    break;
                }
            }
            let source = if self.eat_word("from") { Some(self.module_specifier()?) } else { None };
            self.consume_semicolon()?;
            return Ok(ExportDecl::Named { specifiers, source });
        }
        let _ = start;
        let stmt = self.statement()?;
        match stmt.kind {
            StmtKind::VarDecl(_) | StmtKind::FuncDecl(_) => Ok(ExportDecl::Decl(Box::new(stmt))),
            _ => Err(ParseError { span: stmt.span, message: "invalid export".into() }),
        }
    }

    // ---- functions and patterns ----

    /// Parses `(params) { body }` after the `function` keyword and optional name.
    fn function_rest(&mut self, name: Option<String>, start: usize) -> PResult<Function> {
        let params = self.params()?;
        let body = self.function_body()?;
        Ok(Function { name, params, body: FuncBody::Block(body), is_arrow: false, span: self.span_from(start) })
    }

    fn function_body(&mut self) -> PResult<Vec<Stmt>> {
        let saved = std::mem::replace(&mut self.no_in, false);
        let r = self.block();
        self.no_in = saved;
        r
    }

    fn params(&mut self) -> PResult<Vec<Pattern>> {
        self.expect("(")?;
        let mut params = Vec::new();
        while !self.eat(")") {
            if self.eat("...") {
                params.push(Pattern::Rest(Box::new(self.binding_pattern()?)));
                self.expect(")")?;
                break;
            }
            params.push(self.binding_element()?);
            if !self.eat(",") {
                self.expect(")")?;
                break;
            }
        }
        Ok(params)
    }

    fn binding_element(&mut self) -> PResult<Pattern> {
        let p = self.binding_pattern()?;
        if self.eat("=") {
            let saved = std::mem::replace(&mut self.no_in, false);
            let d = self.assign();
            self.no_in = saved;
            return Ok(Pattern::Default(Box::new(p), Box::new(d?)));
        }
        Ok(p)
    }

    fn binding_pattern(&mut self) -> PResult<Pattern> {
        self.enter()?;
        let r = self.binding_pattern_inner();
        self.depth -= 1;
        r
    }

    fn binding_pattern_inner(&mut self) -> PResult<Pattern> {
        if self.eat("[") {
            let mut items = Vec::new();
            while !self.eat("]") {
                if self.eat(",") {
                    items.push(None);
                    continue;
                }
                if self.eat("...") {
                    items.push(Some(Pattern::Rest(Box::new(self.binding_pattern()?))));
                    self.expect("]")?;
                    break;
                }
                items.push(Some(self.binding_element()?));
                if !self.eat(",") {
                    self.expect("]")?;
                    break;
                }
            }
            return Ok(Pattern::Array(items));
        }
        if self.eat("{") {
            let mut props = Vec::new();
            while !self.eat("}") {
                if self.eat("...") {
                    let rest = Pattern::Rest(Box::new(Pattern::Ident(self.binding_ident()?)));
                    props.push(PatternProp { key: PropKey::Named(String::new()), value: rest });
                    self.expect("}")?;
                    break;
                }
                let shorthand = matches!(&self.peek().kind, TokenKind::Ident(_)) && !self.peek_at(1).is_punct(":");
                let key = self.prop_key()?;
                let value = if shorthand {
                    let PropKey::Named(name) = &key else { unreachable!() };
                    if RESERVED.contains(&name.as_str()) {
                        return Err(self.error(format!("reserved word `{name}` as binding")));
                    }
                    let mut v = Pattern::Ident(name.clone());
                    if self.eat("=") {
                        v = Pattern::Default(Box::new(v), Box::new(self.assign()?));
                    }
                    v
                } else {
                    self.expect(":")?;
                    self.binding_element()?
                };
                props.push(PatternProp { key, value });
                if !self.eat(",") {
                    self.expect("}")?;
                    break;
                }
            }
            return Ok(Pattern::Object(props));
        }
        Ok(Pattern::Ident(self.binding_ident()?))
    }

    fn prop_key(&mut self) -> PResult<PropKey> {
        let tok = self.bump();
        match tok.kind {
            TokenKind::Ident(s) | TokenKind::Str(s) => Ok(PropKey::Named(s)),
            TokenKind::Num(n) => Ok(PropKey::Named(number_to_string(n))),
            TokenKind::Punct("[") => {
                let saved = std::mem::replace(&mut self.no_in, false);
                let e = self.assign();
                self.no_in = saved;
                let e = e?;
                self.expect("]")?;
                Ok(PropKey::Computed(Box::new(e)))
            }
            TokenKind::Punct("#") => Err(ParseError { span: tok.span, message: "unsupported syntax: private name".into() }),
            k => Err(ParseError { span: tok.span, message: format!("unexpected {k} in property key") }),
        }
    }

    // ---- expressions ----

    fn expression(&mut self) -> PResult<Expr> {
        let start = self.peek().span.start;
        let first = self.assign()?;
        if !self.at(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat(",") {
            items.push(self.assign()?);
        }
        Ok(Expr::new(ExprKind::Sequence(items), self.span_from(start)))
    }

    fn assign(&mut self) -> PResult<Expr> {
        self.enter()?;
        let r = self.assign_inner();
        self.depth -= 1;
        r
    }

    fn assign_inner(&mut self) -> PResult<Expr> {
        let start = self.peek().span.start;
        if let Some(arrow) = self.try_arrow(start)? {
            return Ok(arrow);
        }
        if self.at_word("yield") {
            return Err(self.unsupported("yield"));
        }
        let lhs = self.conditional()?;
        let op = match self.peek().kind {
            TokenKind::Punct(p) => assign_op(p),
            _ => None,
        };
        let Some(op) = op else { return Ok(lhs) };
        if !is_assign_target(&lhs) {
            return Err(self.unsupported("destructuring or invalid assignment target"));
        }
        self.bump();
        let rhs = self.assign()?;
        Ok(Expr::new(ExprKind::Assign(op, Box::new(lhs), Box::new(rhs)), self.span_from(start)))
    }

    fn try_arrow(&mut self, start: usize) -> PResult<Option<Expr>> {
        let tok = self.peek();
        if tok.is_ident("async") {
            let next = self.peek_at(1);
            if !next.nl_before
                && (next.is_punct("(") && self.arrow_after_parens(self.pos + 1)
                    || matches!(next.kind, TokenKind::Ident(_)) && self.peek_at(2).is_punct("=>"))
            {
                return Err(self.unsupported("async arrow function"));
            }
            return Ok(None);
        }
        let params = match &tok.kind {
            TokenKind::Ident(name)
                if !RESERVED.contains(&name.as_str())
                    && self.peek_at(1).is_punct("=>")
                    && !self.peek_at(1).nl_before =>
            {
                let name = name.clone();
                self.bump();
                vec![Pattern::Ident(name)]
            }
            TokenKind::Punct("(") if self.arrow_after_parens(self.pos) => self.params()?,
            _ => return Ok(None),
        };
        self.expect("=>")?;
        let body = if self.at("{") {
            FuncBody::Block(self.function_body()?)
        } else {
            FuncBody::Expr(Box::new(self.assign()?))
        };
        let f = Function { name: None, params, body, is_arrow: true, span: self.span_from(start) };
        Ok(Some(Expr::new(ExprKind::Function(Arc::new(f)), self.span_from(start))))
    }

    /// True when the parenthesized group starting at token `open` is followed by `=>`.
    fn arrow_after_parens(&self, open: usize) -> bool {
        let mut depth = 0usize;
        let mut i = open;
        while i < self.toks.len() {
            match self.toks[i].kind {
                TokenKind::Punct("(" | "[" | "{") => depth += 1,
                TokenKind::Punct(")" | "]" | "}") => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        return self.toks.get(i + 1).is_some_and(|t| t.is_punct("=>") && !t.nl_before);
                    }
                }
                TokenKind::Eof => return false,
                _ => {}
            }
            i += 1;
        }
        false
    }

    fn conditional(&mut self) -> PResult<Expr> {
        let start = self.peek().span.start;
        let test = self.binary(0)?;
        if !self.eat("?") {
            return Ok(test);
        }
        let saved = std::mem::replace(&mut self.no_in, false);
        let cons = self.assign();
        self.no_in = saved;
        let cons = cons?;
        self.expect(":")?;
        let alt = self.assign()?;
        Ok(Expr::new(
            ExprKind::Conditional(Box::new(test), Box::new(cons), Box::new(alt)),
            self.span_from(start),
        ))
    }

    fn current_binary_op(&self) -> Option<(BinOrLogical, u8)> {
        let t = self.peek();
        let op = match &t.kind {
            TokenKind::Punct(p) => binary_op(p)?,
            TokenKind::Ident(w) if w == "instanceof" => (BinOrLogical::Bin(BinaryOp::InstanceOf), 8),
            TokenKind::Ident(w) if w == "in" && !self.no_in => (BinOrLogical::Bin(BinaryOp::In), 8),
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let start = self.peek().span.start;
        let mut left = self.unary()?;
        while let Some((op, prec)) = self.current_binary_op() {
            if prec < min_prec {
                break;
            }
            self.bump();
            // `**` is right-associative.
            let next_min = if matches!(op, BinOrLogical::Bin(BinaryOp::Exp)) { prec } else { prec + 1 };
            self.enter()?;
            let right = self.binary(next_min);
            self.depth -= 1;
            let right = Box::new(right?);
            let kind = match op {
                BinOrLogical::Bin(b) => ExprKind::Binary(b, Box::new(left), right),
                BinOrLogical::Logical(l) => ExprKind::Logical(l, Box::new(left), right),
            };
            left = Expr::new(kind, self.span_from(start));
        }
        Ok(left)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.peek().span.start;
        let op = match &self.peek().kind {
            TokenKind::Punct("!") => Some(UnaryOp::Not),
            TokenKind::Punct("-") => Some(UnaryOp::Neg),
            TokenKind::Punct("+") => Some(UnaryOp::Plus),
            TokenKind::Punct("~") => Some(UnaryOp::BitNot),
            TokenKind::Ident(w) if w == "typeof" => Some(UnaryOp::Typeof),
            TokenKind::Ident(w) if w == "void" => Some(UnaryOp::Void),
            TokenKind::Ident(w) if w == "delete" => Some(UnaryOp::Delete),
            TokenKind::Ident(w) if w == "await" => return Err(self.unsupported("await")),
            TokenKind::Punct(p @ ("++" | "--")) => {
                let increment = *p == "++";
                self.bump();
                self.enter()?;
                let arg = self.unary();
                self.depth -= 1;
                let arg = arg?;
                if !is_assign_target(&arg) {
                    return Err(self.error("invalid update target".into()));
                }
                return Ok(Expr::new(
                    ExprKind::Update { increment, prefix: true, arg: Box::new(arg) },
                    self.span_from(start),
                ));
            }
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            self.enter()?;
            let arg = self.unary();
            self.depth -= 1;
            return Ok(Expr::new(ExprKind::Unary(op, Box::new(arg?)), self.span_from(start)));
        }
        let e = self.lhs()?;
        if (self.at("++") || self.at("--")) && !self.peek().nl_before {
            if !is_assign_target(&e) {
                return Err(self.error("invalid update target".into()));
            }
            let increment = self.bump().is_punct("++");
            return Ok(Expr::new(
                ExprKind::Update { increment, prefix: false, arg: Box::new(e) },
                self.span_from(start),
            ));
        }
        Ok(e)
    }

    fn arguments(&mut self) -> PResult<Vec<Expr>> {
        self.expect("(")?;
        let saved = std::mem::replace(&mut self.no_in, false);
        let r = self.arguments_inner();
        self.no_in = saved;
        r
    }

    fn arguments_inner(&mut self) -> PResult<Vec<Expr>> {
        let mut args = Vec::new();
        while !self.eat(")") {
            args.push(self.spread_or_assign()?);
            if !self.eat(",") {
                self.expect(")")?;
                break;
            }
        }
        Ok(args)
    }

    fn spread_or_assign(&mut self) -> PResult<Expr> {
        let start = self.peek().span.start;
        if self.eat("...") {
            let e = self.assign()?;
            return Ok(Expr::new(ExprKind::Spread(Box::new(e)), self.span_from(start)));
        }
        self.assign()
    }

    fn member_name(&mut self) -> PResult<String> {
        match &self.peek().kind {
            TokenKind::Ident(n) => {
                let n = n.clone();
                self.bump();
                Ok(n)
            }
            TokenKind::Punct("#") => Err(self.unsupported("private name")),
            _ => Err(self.unexpected()),
        }
    }

    fn computed_member(&mut self) -> PResult<Expr> {
        let saved = std::mem::replace(&mut self.no_in, false);
        let e = self.expression();
        self.no_in = saved;
        let e = e?;
        self.expect("]")?;
        Ok(e)
    }

    fn new_expression(&mut self) -> PResult<Expr> {
        let start = self.peek().span.start;
        self.bump();
        if self.at(".") {
            return Err(self.unsupported("new.target"));
        }
        self.enter()?;
        let callee = if self.at_word("new") { self.new_expression() } else { self.primary() };
        self.depth -= 1;
        let mut callee = callee?;
        loop {
            if self.eat(".") {
                let name = self.member_name()?;
                callee = Expr::new(
                    ExprKind::Member { object: Box::new(callee), prop: MemberProp::Named(name), optional: false },
                    self.span_from(start),
                );
            } else if self.eat("[") {
                let prop = self.computed_member()?;
                callee = Expr::new(
                    ExprKind::Member { object: Box::new(callee), prop: MemberProp::Computed(Box::new(prop)), optional: false },
                    self.span_from(start),
                );
            } else {
                break;
            }
        }
        let args = if self.at("(") { self.arguments()? } else { Vec::new() };
        Ok(Expr::new(ExprKind::New { callee: Box::new(callee), args }, self.span_from(start)))
    }

    fn lhs(&mut self) -> PResult<Expr> {
        let start = self.peek().span.start;
        let mut e = if self.at_word("new") { self.new_expression()? } else { self.primary()? };
        loop {
            if self.eat(".") {
                let name = self.member_name()?;
                e = Expr::new(
                    ExprKind::Member { object: Box::new(e), prop: MemberProp::Named(name), optional: false },
                    self.span_from(start),
                );
            } else if self.eat("?.") {
                if self.at("(") {
                    let args = self.arguments()?;
                    e = Expr::new(ExprKind::Call { callee: Box::new(e), args, optional: true }, self.span_from(start));
                } else if self.eat("[") {
                    let prop = self.computed_member()?;
                    e = Expr::new(
                        ExprKind::Member { object: Box::new(e), prop: MemberProp::Computed(Box::new(prop)), optional: true },
                        self.span_from(start),
                    );
                } else {
                    let name = self.member_name()?;
                    e = Expr::new(
                        ExprKind::Member { object: Box::new(e), prop: MemberProp::Named(name), optional: true },
                        self.span_from(start),
                    );
                }
            } else if self.eat("[") {
                let prop = self.computed_member()?;
                e = Expr::new(
                    ExprKind::Member { object: Box::new(e), prop: MemberProp::Computed(Box::new(prop)), optional: false },
                    self.span_from(start),
                );
            } else if self.at("(") {
                let args = self.arguments()?;
                e = Expr::new(ExprKind::Call { callee: Box::new(e), args, optional: false }, self.span_from(start));
            } else if matches!(self.peek().kind, TokenKind::Template(_)) {
                return Err(self.unsupported("tagged template"));
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let tok = self.peek().clone();
        let start = tok.span.start;
        let kind = match tok.kind {
            TokenKind::Num(n) => {
                self.bump();
                ExprKind::Lit(Literal::Num(n))
            }
            TokenKind::Str(s) => {
                self.bump();
                ExprKind::Lit(Literal::Str(s))
            }
            TokenKind::Regex { pattern, flags } => {
                let mut seen = String::new();
                for f in flags.chars() {
                    if !"gimsy".contains(f) || seen.contains(f) {
                        return Err(self.unsupported(&format!("regex flag `{f}`")));
                    }
                    seen.push(f);
                }
                self.bump();
                ExprKind::Lit(Literal::Regex { pattern, flags })
            }
            TokenKind::Template(t) => {
                self.bump();
                let mut exprs = Vec::with_capacity(t.exprs.len());
                for span in &t.exprs {
                    exprs.push(self.sub_expression(*span)?);
                }
                ExprKind::Template { quasis: t.quasis, exprs }
            }
            TokenKind::Punct("(") => {
                self.bump();
                let saved = std::mem::replace(&mut self.no_in, false);
                let e = self.expression();
                self.no_in = saved;
                let e = e?;
                self.expect(")")?;
                // Parenthesized expressions keep their inner node; span widened.
                return Ok(Expr::new(e.kind, self.span_from(start)));
            }
            TokenKind::Punct("[") => {
                self.bump();
                let saved = std::mem::replace(&mut self.no_in, false);
                let r = self.array_items();
                self.no_in = saved;
                ExprKind::Array(r?)
            }
            TokenKind::Punct("{") => {
                self.bump();
                let saved = std::mem::replace(&mut self.no_in, false);
                let r = self.object_props();
                self.no_in = saved;
                ExprKind::Object(r?)
            }
            TokenKind::Ident(ref w) => match w.as_str() {
                "true" | "false" => {
                    self.bump();
                    ExprKind::Lit(Literal::Bool(w == "true"))
                }
                "null" => {
                    self.bump();
                    ExprKind::Lit(Literal::Null)
                }
                "this" => {
                    self.bump();
                    ExprKind::This
                }
                "function" => {
                    self.bump();
                    if self.at("*") {
                        return Err(self.unsupported("generator function"));
                    }
                    let name = if self.at("(") { None } else { Some(self.binding_ident()?) };
                    ExprKind::Function(Arc::new(self.function_rest(name, start)?))
                }
                "class" => return Err(self.unsupported("class")),
                "super" => return Err(self.unsupported("super")),
                "import" if self.peek_at(1).is_punct("(") => {
                    self.bump();
                    ExprKind::Ident("import".into())
                }
                "async" if self.peek_at(1).is_ident("function") && !self.peek_at(1).nl_before => {
                    return Err(self.unsupported("async function"));
                }
                name if !RESERVED.contains(&name) => {
                    self.bump();
                    ExprKind::Ident(name.to_string())
                }
                _ => return Err(self.unexpected()),
            },
            _ => return Err(self.unexpected()),
        };
        Ok(Expr::new(kind, self.span_from(start)))
    }

    fn sub_expression(&mut self, span: Span) -> PResult<Expr> {
        let text = &self.src[span.start..span.end];
        let toks = Lexer::with_base(text, span.start).tokenize();
        let mut sub = Parser::new(self.src, toks, self.module_mode);
        sub.depth = self.depth;
        let e = sub.expression()?;
        if !sub.at_eof() {
            return Err(sub.unexpected());
        }
        Ok(e)
    }

    fn array_items(&mut self) -> PResult<Vec<Option<Expr>>> {
        let mut items = Vec::new();
        while !self.eat("]") {
            if self.eat(",") {
                items.push(None);
                continue;
            }
            items.push(Some(self.spread_or_assign()?));
            if !self.eat(",") {
                self.expect("]")?;
                break;
            }
        }
        Ok(items)
    }

    fn object_props(&mut self) -> PResult<Vec<Prop>> {
        let mut props = Vec::new();
        while !self.eat("}") {
            let start = self.peek().span.start;
            if self.eat("...") {
                let e = self.assign()?;
                props.push(Prop { key: PropKey::Named(String::new()), value: e, kind: PropKind::Spread });
            } else {
                if self.at("*") || (self.at_word("async") && !self.peek_at(1).is_punct(":") && !self.peek_at(1).is_punct("(") && !self.peek_at(1).is_punct(",") && !self.peek_at(1).is_punct("}")) {
                    return Err(self.unsupported("async or generator method"));
                }
                // Accessors are kept as plain methods.
                if (self.at_word("get") || self.at_word("set"))
                    && !matches!(self.peek_at(1).kind, TokenKind::Punct(":" | "(" | "," | "}" | "="))
                {
                    self.bump();
                }
                let shorthand_name = match &self.peek().kind {
                    TokenKind::Ident(n) => Some(n.clone()),
                    _ => None,
                };
                let key = self.prop_key()?;
                if self.at("(") {
                    let name = match &key {
                        PropKey::Named(n) => Some(n.clone()),
                        PropKey::Computed(_) => None,
                    };
                    let f = self.function_rest(name, start)?;
                    let value = Expr::new(ExprKind::Function(Arc::new(f)), self.span_from(start));
                    props.push(Prop { key, value, kind: PropKind::Method });
                } else if self.eat(":") {
                    let value = self.assign()?;
                    props.push(Prop { key, value, kind: PropKind::Init });
                } else {
                    let name = match shorthand_name {
                        Some(n) if !RESERVED.contains(&n.as_str()) => n,
                        _ => return Err(self.unexpected()),
                    };
                    if self.at("=") {
                        return Err(self.unsupported("destructuring assignment pattern"));
                    }
                    let value = Expr::new(ExprKind::Ident(name), self.span_from(start));
                    props.push(Prop { key, value, kind: PropKind::Shorthand });
                }
            }
            if !self.eat(",") {
                self.expect("}")?;
                break;
            }
        }
        Ok(props)
    }
}

enum BinOrLogical {
    Bin(BinaryOp),
    Logical(LogicalOp),
}

fn binary_op(p: &str) -> Option<(BinOrLogical, u8)> {
    use BinOrLogical::*;
    use BinaryOp::*;
    Some(match p {
        "??" => (Logical(LogicalOp::Nullish), 1),
        "||" => (Logical(LogicalOp::Or), 2),
        "&&" => (Logical(LogicalOp::And), 3),
        "|" => (Bin(BitOr), 4),
        "^" => (Bin(BitXor), 5),
        "&" => (Bin(BitAnd), 6),
        "==" => (Bin(Eq), 7),
        "!=" => (Bin(NotEq), 7),
        "===" => (Bin(StrictEq), 7),
        "!==" => (Bin(StrictNotEq), 7),
        "<" => (Bin(Lt), 8),
        ">" => (Bin(Gt), 8),
        "<=" => (Bin(LtEq), 8),
        ">=" => (Bin(GtEq), 8),
        "<<" => (Bin(Shl), 9),
        ">>" => (Bin(Shr), 9),
        ">>>" => (Bin(UShr), 9),
        "+" => (Bin(Add), 10),
        "-" => (Bin(Sub), 10),
        "*" => (Bin(Mul), 11),
        "/" => (Bin(Div), 11),
        "%" => (Bin(Rem), 11),
        "**" => (Bin(Exp), 12),
        _ => return None,
    })
}

fn assign_op(p: &str) -> Option<AssignOp> {
    use BinaryOp::*;
    Some(match p {
        "=" => AssignOp::Assign,
        "+=" => AssignOp::Binary(Add),
        "-=" => AssignOp::Binary(Sub),
        "*=" => AssignOp::Binary(Mul),
        "/=" => AssignOp::Binary(Div),
        "%=" => AssignOp::Binary(Rem),
        "**=" => AssignOp::Binary(Exp),
        "<<=" => AssignOp::Binary(Shl),
        ">>=" => AssignOp::Binary(Shr),
        ">>>=" => AssignOp::Binary(UShr),
        "&=" => AssignOp::Binary(BitAnd),
        "|=" => AssignOp::Binary(BitOr),
        "^=" => AssignOp::Binary(BitXor),
        "&&=" => AssignOp::Logical(LogicalOp::And),
        "||=" => AssignOp::Logical(LogicalOp::Or),
        "??=" => AssignOp::Logical(LogicalOp::Nullish),
        _ => return None,
    })
}

fn is_assign_target(e: &Expr) -> bool {
    matches!(e.kind, ExprKind::Ident(_) | ExprKind::Member { .. })
}

/// Whether a line break between `prev` and `next` is unlikely to end a statement.
fn continues(prev: &Token, next: &Token) -> bool {
    let prev_continues = match prev.kind {
        TokenKind::Punct(p) => !matches!(p, ")" | "]" | "}" | "++" | "--" | ";"),
        _ => false,
    };
    let next_continues = match &next.kind {
        TokenKind::Punct(p) => !matches!(*p, "(" | "[" | "{" | "!" | "~" | "++" | "--" | "+" | "-" | ";" | "@" | "#"),
        TokenKind::Ident(w) => matches!(w.as_str(), "else" | "catch" | "finally" | "in" | "instanceof"),
        _ => false,
    };
    prev_continues || next_continues
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(src: &str) -> Program {
        let out = parse_program(src, true);
        assert!(out.errors.is_empty(), "errors for {src:?}: {:?}", out.errors);
        out.ast.unwrap()
    }

    fn first_expr(src: &str) -> Expr {
        match parse_ok(src).body.remove(0).kind {
            StmtKind::Expr(e) => e,
            k => panic!("not an expression statement: {k:?}"),
        }
    }

    #[test]
    fn call_on_member_chain() {
        let e = first_expr("chrome.tabs.create({url:'x'})");
        let ExprKind::Call { callee, args, .. } = e.kind else { panic!() };
        assert_eq!(args.len(), 1);
        assert!(matches!(args[0].kind, ExprKind::Object(_)));
        let ExprKind::Member { object, prop: MemberProp::Named(name), .. } = callee.kind else { panic!() };
        assert_eq!(name, "create");
        let ExprKind::Member { object: root, prop: MemberProp::Named(tabs), .. } = object.kind else { panic!() };
        assert_eq!(tabs, "tabs");
        assert_eq!(root.kind, ExprKind::Ident("chrome".into()));
    }

    #[test]
    fn empty_source() {
        let out = parse_program("", false);
        assert_eq!(out.ast.unwrap().body.len(), 0);
        assert_eq!(out.coverage, 1.0);
        assert!(out.errors.is_empty());
    }

    #[test]
    fn class_statement_skipped() {
        let src = "class A{}\nchrome.storage.local.get()";
        let out = parse_program(src, false);
        assert_eq!(out.errors.len(), 1);
        let prog = out.ast.unwrap();
        assert_eq!(prog.body.len(), 1);
        // Hand count: the second statement is 26 of 36 bytes.
        assert_eq!(src.len(), 36);
        assert_eq!(prog.body[0].span, Span::new(10, 36));
        assert!((out.coverage - 26.0 / 36.0).abs() < 1e-12);
        assert_eq!(out.skipped, vec![Span::new(0, 10)]);
    }

    #[test]
    fn precedence_and_associativity() {
        let e = first_expr("a + b * c ** d ** e");
        let ExprKind::Binary(BinaryOp::Add, _, rhs) = e.kind else { panic!() };
        let ExprKind::Binary(BinaryOp::Mul, _, pow) = rhs.kind else { panic!() };
        let ExprKind::Binary(BinaryOp::Exp, _, inner) = pow.kind else { panic!() };
        assert!(matches!(inner.kind, ExprKind::Binary(BinaryOp::Exp, _, _)));
    }

    #[test]
    fn arrows_and_functions() {
        parse_ok("const f = (a, {b, c = 2}, ...rest) => a + b; const g = x => ({x}); function h(){ return }");
        parse_ok("arr.map(function (x) { return x * 2 }).filter(x => x > 1)");
    }

    #[test]
    fn asi_on_newlines() {
        let p = parse_ok("a = 1\nb = 2\nreturnValue()\n");
        assert_eq!(p.body.len(), 3);
        let p = parse_ok("function f(){ return\n 1 }");
        let StmtKind::FuncDecl(f) = &p.body[0].kind else { panic!() };
        let FuncBody::Block(b) = &f.body else { panic!() };
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn statements_cover_control_flow() {
        parse_ok(
            "for (var i = 0; i < 3; i++) { if (i) continue; else break }\n\
             for (const k in o) {}\nfor (let v of xs) {}\nwhile (x) x--\ndo { y() } while (z)\n\
             try { a() } catch (e) { b() } finally { c() }\n\
             switch (x) { case 1: f(); break; default: g() }\nouter: for (;;) { break outer }\n\
             var re = /a[/]b/gi; x = typeof y === 'string' ? `t${y}` : void 0;",
        );
    }

    #[test]
    fn modules() {
        let p = parse_ok("import a, {b as c} from './x.js'; import * as ns from './y'; export default 1; export {c}; export * from './z'");
        let StmtKind::Import(i) = &p.body[0].kind else { panic!() };
        assert_eq!(i.default.as_deref(), Some("a"));
        assert_eq!(i.named, vec![("b".to_string(), "c".to_string())]);
        let out = parse_program("import x from './x'", false);
        assert_eq!(out.errors.len(), 1);
    }

    #[test]
    fn unsupported_constructs_recorded() {
        for src in [
            "async function f(){}",
            "function* g(){}",
            "x = /a/u",
            "[a, b] = c",
            "const f = async () => 1",
            "tag`x`",
        ] {
            let out = parse_program(src, false);
            assert_eq!(out.errors.len(), 1, "{src}");
            assert!(out.coverage < 1.0);
        }
    }

    #[test]
    fn recovery_keeps_following_statements() {
        let src = "a();\nclass X extends Y {\n  m() { return 1 }\n}\nb();\nx = /re/v\nc()";
        let out = parse_program(src, false);
        assert_eq!(out.errors.len(), 2);
        assert_eq!(out.ast.unwrap().body.len(), 3);
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!("x = {}1{}", "(".repeat(5000), ")".repeat(5000));
        let out = parse_program(&src, false);
        assert_eq!(out.errors.len(), 1);
        assert!(out.ast.is_none());
        assert!(out.coverage < 1.0);
    }

    #[test]
    fn spans_nest() {
        fn check(e: &Expr, parent: Span) {
            assert!(parent.contains(e.span), "{:?} not in {:?}", e.span, parent);
            if let ExprKind::Call { callee, args, .. } = &e.kind {
                check(callee, e.span);
                args.iter().for_each(|a| check(a, e.span));
            }
            if let ExprKind::Member { object, .. } = &e.kind {
                check(object, e.span);
            }
        }
        let src = "  foo.bar(baz.qux(1), (a.b))  ";
        let p = parse_ok(src);
        let StmtKind::Expr(e) = &p.body[0].kind else { panic!() };
        check(e, p.body[0].span);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::js::fold::fold_constants;
    use proptest::prelude::*;

    fn js_fragment() -> impl Strategy<Value = String> {
        let atoms = prop::sample::select(vec![
            "chrome", ".", "tabs", "(", ")", "{", "}", "[", "]", ";", "\n", "'s'", "1", "+", "=", "var x",
            "function", "=>", "class", "if", "else", ",", "/", "`a${b}`", "?", ":", "//c\n", "/*x*/", "return",
        ]);
        prop::collection::vec(atoms, 0..40).prop_map(|v| v.join(" "))
    }

    fn stmt_concat() -> impl Strategy<Value = String> {
        let leaves = prop::sample::select(vec!["'a'", "'bc'", "x", "`t`", "1"]);
        leaves
            .prop_map(str::to_string)
            .prop_recursive(4, 32, 2, |inner| (inner.clone(), inner).prop_map(|(a, b)| format!("({a} + {b})")))
    }

    proptest! {
        #[test]
        fn never_panics_on_bytes(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
            let src = String::from_utf8_lossy(&bytes);
            let out = parse_program(&src, true);
            prop_assert!((0.0..=1.0).contains(&out.coverage));
        }

        #[test]
        fn spans_partition_input(src in js_fragment()) {
            let out = parse_program(&src, false);
            prop_assert!((0.0..=1.0).contains(&out.coverage));
            if out.ast.is_none() {
                prop_assert!(out.coverage < 1.0);
            }
            let mut regions: Vec<Span> = out.skipped.clone();
            if let Some(p) = &out.ast {
                regions.extend(p.body.iter().map(|s| s.span));
            }
            regions.sort_by_key(|s| s.start);
            let mut cursor = 0;
            for r in &regions {
                prop_assert!(r.start >= cursor, "overlap at {:?}", r);
                let gap = &src[cursor..r.start];
                prop_assert!(Lexer::new(gap).tokenize().len() == 1, "non-trivia gap {:?}", gap);
                cursor = r.end;
            }
            prop_assert!(cursor <= src.len());
            prop_assert!(Lexer::new(&src[cursor..]).tokenize().len() == 1);
        }

        #[test]
        fn deterministic(src in js_fragment()) {
            prop_assert_eq!(parse_program(&src, true), parse_program(&src, true));
        }

        #[test]
        fn fold_is_idempotent(e in stmt_concat()) {
            let p = parse_program(&e, false).ast.unwrap();
            let once = fold_constants(&p);
            prop_assert_eq!(fold_constants(&once), once);
        }
    }
}
