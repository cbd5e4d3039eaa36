//! Static API-call extraction over a resolved module graph.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::crx::{normalize_path, FileTree};
use crate::js::ast::*;
use crate::js::{fold_expr, parse_program, ParseOutcome};
use crate::manifest::Entrypoint;

pub const API_ROOTS: &[&str] = &["chrome", "browser", "navigator"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ApiCall {
    pub path: String,
    pub origin: Origin,
    pub count: u32,
}

/// Rewrites a `chrome.` root to `browser.`.
pub fn normalize_api_path(path: &str) -> String {
    match path.strip_prefix("chrome") {
        Some(rest) if rest.is_empty() || rest.starts_with('.') => format!("browser{rest}"),
        _ => path.to_string(),
    }
}

/// Turns a path→count map into sorted [`ApiCall`]s.
pub fn to_calls(counts: &BTreeMap<String, u32>, origin: Origin) -> Vec<ApiCall> {
    counts.iter().map(|(path, &count)| ApiCall { path: path.clone(), origin, count }).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleGraph {
    /// Visited sources in breadth-first order. Inline page scripts appear
    /// under their synthetic `page.html#scriptN` paths.
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub unresolved: Vec<String>,
    /// Source text of inline scripts, keyed by synthetic path.
    pub inline: BTreeMap<String, String>,
}

impl ModuleGraph {
    pub fn source(&self, path: &str, tree: &FileTree) -> Option<String> {
        self.inline.get(path).cloned().or_else(|| tree.get_text(path))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Dependency {
    /// ES import, export-from, `require` or dynamic `import()`.
    Module(String),
    /// `importScripts(...)` argument, resolved like a URL.
    Script(String),
}

fn collect_dependencies(program: &Program) -> Vec<Dependency> {
    struct Collector(Vec<Dependency>);
    impl Visit for Collector {
        fn stmt(&mut self, s: &Stmt) {
            match &s.kind {
                StmtKind::Import(i) => self.0.push(Dependency::Module(i.source.clone())),
                StmtKind::Export(ExportDecl::Named { source: Some(src), .. } | ExportDecl::All { source: src }) => {
                    self.0.push(Dependency::Module(src.clone()))
                }
                _ => {}
            }
        }
        fn expr(&mut self, e: &Expr) {
            if let ExprKind::Call { callee, args, .. } = &e.kind {
                if let ExprKind::Ident(name) = &callee.kind {
                    let strs = args.iter().filter_map(|a| fold_expr(a).as_str_lit().map(str::to_string));
                    match name.as_str() {
                        "require" | "import" => self.0.extend(strs.take(1).map(Dependency::Module)),
                        "importScripts" => self.0.extend(strs.map(Dependency::Script)),
                        _ => {}
                    }
                }
            }
        }
    }
    let mut c = Collector(Vec::new());
    walk_program(program, &mut c);
    c.0
}

fn importer_dir(importer: &str) -> &str {
    let base = importer.split('#').next().unwrap_or(importer);
    base.rfind('/').map_or("", |i| &base[..i])
}

fn join(dir: &str, spec: &str) -> Option<String> {
    let joined = if let Some(abs) = spec.strip_prefix('/') {
        abs.to_string()
    } else if dir.is_empty() {
        spec.to_string()
    } else {
        format!("{dir}/{spec}")
    };
    normalize_path(&joined).ok()
}

fn resolve(importer: &str, dep: &Dependency, tree: &FileTree) -> Option<String> {
    let dir = importer_dir(importer);
    match dep {
        Dependency::Module(spec) => {
            if !(spec.starts_with("./") || spec.starts_with("../") || spec.starts_with('/')) {
                return None;
            }
            let base = join(dir, spec)?;
            [base.clone(), format!("{base}.js"), format!("{base}/index.js")]
                .into_iter()
                .find(|c| tree.contains(c))
        }
        Dependency::Script(spec) => {
            let spec = spec.split(['?', '#']).next().unwrap_or("");
            if spec.contains("://") || spec.starts_with("//") {
                return None;
            }
            join(dir, spec).filter(|p| tree.contains(p))
        }
    }
}

/// Breadth-first module resolution from the given entrypoints.
pub fn resolve_modules(entrypoints: &[Entrypoint], tree: &FileTree) -> ModuleGraph {
    let mut graph = ModuleGraph::default();
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    for ep in entrypoints {
        if let Some(src) = &ep.inline_source {
            graph.inline.insert(ep.path.clone(), src.clone());
        } else if ep.missing_file {
            continue;
        }
        if seen.insert(ep.path.clone()) {
            queue.push_back(ep.path.clone());
        }
    }
    while let Some(path) = queue.pop_front() {
        let Some(src) = graph.source(&path, tree) else { continue };
        graph.nodes.push(path.clone());
        let Some(program) = parse_program(&src, true).ast else { continue };
        for dep in collect_dependencies(&program) {
            match resolve(&path, &dep, tree) {
                Some(target) => {
                    graph.edges.push((path.clone(), target.clone()));
                    if seen.insert(target.clone()) {
                        queue.push_back(target);
                    }
                }
                None => graph.unresolved.push(match dep {
                    Dependency::Module(s) | Dependency::Script(s) => s,
                }),
            }
        }
    }
    graph
}

/// Per-file parse result of a static pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileParse {
    pub path: String,
    pub bytes: usize,
    pub coverage: f64,
    pub errors: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StaticTrace {
    pub calls: Vec<ApiCall>,
    /// `navigator.X` property reads that were not themselves invoked.
    pub navigator_reads: Vec<ApiCall>,
    pub files: Vec<FileParse>,
}

impl StaticTrace {
    /// Byte-weighted parse coverage over all traced files (1 when none).
    pub fn coverage(&self) -> f64 {
        let total: usize = self.files.iter().map(|f| f.bytes).sum();
        if total == 0 {
            return 1.0;
        }
        self.files.iter().map(|f| f.coverage * f.bytes as f64).sum::<f64>() / total as f64
    }
}

/// Invoked API paths found in the graph's sources, aggregated per path.
pub fn extract_api_calls_static(graph: &ModuleGraph, tree: &FileTree) -> Vec<ApiCall> {
    trace_static(graph, tree).calls
}

pub fn trace_static(graph: &ModuleGraph, tree: &FileTree) -> StaticTrace {
    let mut calls = BTreeMap::new();
    let mut reads = BTreeMap::new();
    let mut files = Vec::new();
    for path in &graph.nodes {
        let Some(src) = graph.source(path, tree) else { continue };
        let outcome = parse_program(&src, true);
        files.push(FileParse { path: path.clone(), bytes: src.len(), coverage: outcome.coverage, errors: outcome.errors.len() });
        scan_outcome(&outcome, &mut calls, &mut reads);
    }
    StaticTrace { calls: to_calls(&calls, Origin::Static), navigator_reads: to_calls(&reads, Origin::Static), files }
}

/// Scans one parsed source, adding invoked paths to `calls` and navigator
/// property reads to `reads`.
pub fn scan_outcome(outcome: &ParseOutcome, calls: &mut BTreeMap<String, u32>, reads: &mut BTreeMap<String, u32>) {
    if let Some(program) = &outcome.ast {
        let mut s = Scanner { scopes: Vec::new(), calls, reads };
        s.program(program);
    }
}

/// Renders a member chain rooted at an identifier as path segments.
/// Returns `(root, segments, truncated)`; on a non-constant computed key
/// the chain stops there and `truncated` is set.
pub fn member_chain(e: &Expr) -> Option<(String, Vec<String>, bool)> {
    match &e.kind {
        ExprKind::Ident(name) => Some((name.clone(), Vec::new(), false)),
        ExprKind::Member { object, prop, .. } => {
            let (root, mut segs, truncated) = member_chain(object)?;
            if truncated {
                return Some((root, segs, true));
            }
            match prop {
                MemberProp::Named(n) => segs.push(n.clone()),
                MemberProp::Computed(k) => match fold_expr(k).as_str_lit() {
                    Some(s) => segs.push(s.to_string()),
                    None => return Some((root, segs, true)),
                },
            }
            Some((root, segs, false))
        }
        _ => None,
    }
}

/// Dotted API path for a call through `chain`, if it qualifies.
fn call_path(root: &str, segs: &[String], truncated: bool) -> Option<String> {
    // Root plus at least one segment, also before a wildcard.
    if segs.is_empty() {
        return None;
    }
    let mut path = normalize_api_path(root);
    for s in segs {
        path.push('.');
        path.push_str(s);
    }
    if truncated {
        path.push_str(".*");
    }
    Some(path)
}

struct Scanner<'m> {
    scopes: Vec<HashSet<String>>,
    calls: &'m mut BTreeMap<String, u32>,
    reads: &'m mut BTreeMap<String, u32>,
}

impl Scanner<'_> {
    fn bound(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.contains(name))
    }

    fn is_api_root(&self, name: &str) -> bool {
        API_ROOTS.contains(&name) && !self.bound(name)
    }

    fn program(&mut self, p: &Program) {
        let mut scope = HashSet::new();
        hoisted_names(&p.body, &mut scope);
        lexical_names(&p.body, &mut scope);
        self.scopes.push(scope);
        p.body.iter().for_each(|s| self.stmt(s));
        self.scopes.pop();
    }

    fn with_scope(&mut self, scope: HashSet<String>, f: impl FnOnce(&mut Self)) {
        self.scopes.push(scope);
        f(self);
        self.scopes.pop();
    }

    fn block(&mut self, body: &[Stmt]) {
        let mut scope = HashSet::new();
        lexical_names(body, &mut scope);
        self.with_scope(scope, |s| body.iter().for_each(|st| s.stmt(st)));
    }

    fn function(&mut self, f: &Function, expr_name: bool) {
        let mut scope = HashSet::new();
        if expr_name {
            scope.extend(f.name.clone());
        }
        let mut names = Vec::new();
        f.params.iter().for_each(|p| p.bound_names(&mut names));
        scope.extend(names);
        if let FuncBody::Block(body) = &f.body {
            hoisted_names(body, &mut scope);
            lexical_names(body, &mut scope);
        }
        self.with_scope(scope, |s| {
            f.params.iter().for_each(|p| s.pattern(p));
            match &f.body {
                FuncBody::Block(body) => body.iter().for_each(|st| s.stmt(st)),
                FuncBody::Expr(e) => s.expr(e),
            }
        });
    }

    fn pattern(&mut self, p: &Pattern) {
        match p {
            Pattern::Ident(_) => {}
            Pattern::Object(props) => props.iter().for_each(|pp| {
                if let PropKey::Computed(k) = &pp.key {
                    self.expr(k);
                }
                self.pattern(&pp.value);
            }),
            Pattern::Array(items) => items.iter().flatten().for_each(|i| self.pattern(i)),
            Pattern::Default(p, d) => {
                self.pattern(p);
                self.expr(d);
            }
            Pattern::Rest(p) => self.pattern(p),
        }
    }

    fn var_decl(&mut self, d: &VarDecl) {
        for (p, init) in &d.decls {
            self.pattern(p);
            if let Some(e) = init {
                self.expr(e);
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::VarDecl(d) => self.var_decl(d),
            StmtKind::FuncDecl(f) => self.function(f, false),
            StmtKind::Block(b) => self.block(b),
            StmtKind::If { test, cons, alt } => {
                self.expr(test);
                self.stmt(cons);
                if let Some(a) = alt {
                    self.stmt(a);
                }
            }
            StmtKind::For { init, test, update, body } => {
                let mut scope = HashSet::new();
                if let Some(ForInit::Var(d)) = init {
                    if d.kind != VarKind::Var {
                        let mut names = Vec::new();
                        d.decls.iter().for_each(|(p, _)| p.bound_names(&mut names));
                        scope.extend(names);
                    }
                }
                self.with_scope(scope, |sc| {
                    match init {
                        Some(ForInit::Var(d)) => sc.var_decl(d),
                        Some(ForInit::Expr(e)) => sc.expr(e),
                        None => {}
                    }
                    test.iter().chain(update.iter()).for_each(|e| sc.expr(e));
                    sc.stmt(body);
                });
            }
            StmtKind::ForIn { left, right, body, .. } => {
                let mut scope = HashSet::new();
                if let ForHead::Var(kind, p) = left {
                    if *kind != VarKind::Var {
                        let mut names = Vec::new();
                        p.bound_names(&mut names);
                        scope.extend(names);
                    }
                }
                self.with_scope(scope, |sc| {
                    match left {
                        ForHead::Var(_, p) => sc.pattern(p),
                        ForHead::Target(e) => sc.expr(e),
                    }
                    sc.expr(right);
                    sc.stmt(body);
                });
            }
            StmtKind::While { test, body } | StmtKind::DoWhile { body, test } => {
                self.expr(test);
                self.stmt(body);
            }
            StmtKind::Return(e) => e.iter().for_each(|e| self.expr(e)),
            StmtKind::Throw(e) | StmtKind::Expr(e) => self.expr(e),
            StmtKind::Try { block, param, handler, finalizer } => {
                self.block(block);
                if let Some(h) = handler {
                    let mut names = Vec::new();
                    param.iter().for_each(|p| p.bound_names(&mut names));
                    self.with_scope(names.into_iter().collect(), |sc| {
                        param.iter().for_each(|p| sc.pattern(p));
                        sc.block(h);
                    });
                }
                if let Some(f) = finalizer {
                    self.block(f);
                }
            }
            StmtKind::Switch { discriminant, cases } => {
                self.expr(discriminant);
                let all: Vec<Stmt> = cases.iter().flat_map(|c| c.body.iter().cloned()).collect();
                let mut scope = HashSet::new();
                lexical_names(&all, &mut scope);
                self.with_scope(scope, |sc| {
                    for c in cases {
                        c.test.iter().for_each(|t| sc.expr(t));
                        c.body.iter().for_each(|st| sc.stmt(st));
                    }
                });
            }
            StmtKind::Labeled(_, b) => self.stmt(b),
            StmtKind::Export(ExportDecl::Decl(d)) => self.stmt(d),
            StmtKind::Export(ExportDecl::Default(e)) => self.expr(e),
            StmtKind::Break(_) | StmtKind::Continue(_) | StmtKind::Empty | StmtKind::Import(_) | StmtKind::Export(_) => {}
        }
    }

    fn record_call(&mut self, callee: &Expr) {
        if let Some((root, segs, truncated)) = member_chain(callee) {
            if self.is_api_root(&root) {
                if let Some(path) = call_path(&root, &segs, truncated) {
                    *self.calls.entry(path).or_default() += 1;
                }
            }
        }
    }

    /// Visits a member expression; `is_callee` suppresses the navigator read.
    fn member(&mut self, e: &Expr, is_callee: bool) {
        let ExprKind::Member { object, prop, .. } = &e.kind else { return };
        if !is_callee {
            if let (ExprKind::Ident(root), MemberProp::Named(name)) = (&object.kind, prop) {
                if root == "navigator" && self.is_api_root(root) {
                    *self.reads.entry(format!("navigator.{name}")).or_default() += 1;
                }
            }
        }
        match &object.kind {
            ExprKind::Member { .. } => self.member(object, false),
            _ => self.expr(object),
        }
        if let MemberProp::Computed(k) = prop {
            self.expr(k);
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Ident(_) | ExprKind::This | ExprKind::Lit(_) => {}
            ExprKind::Template { exprs, .. } => exprs.iter().for_each(|x| self.expr(x)),
            ExprKind::Array(items) => items.iter().flatten().for_each(|x| self.expr(x)),
            ExprKind::Object(props) => props.iter().for_each(|p| {
                if let PropKey::Computed(k) = &p.key {
                    self.expr(k);
                }
                match (&p.value.kind, p.kind) {
                    (ExprKind::Function(f), PropKind::Method) => self.function(f, false),
                    _ => self.expr(&p.value),
                }
            }),
            ExprKind::Function(f) => self.function(f, !f.is_arrow),
            ExprKind::Unary(_, a) | ExprKind::Spread(a) => self.expr(a),
            ExprKind::Update { arg, .. } => self.expr(arg),
            ExprKind::Binary(_, l, r) | ExprKind::Logical(_, l, r) => {
                self.expr(l);
                self.expr(r);
            }
            ExprKind::Assign(op, l, r) => {
                match (&l.kind, op) {
                    // A plain store is not a read of the target.
                    (ExprKind::Member { object, prop, .. }, AssignOp::Assign) => {
                        match &object.kind {
                            ExprKind::Member { .. } => self.member(object, false),
                            _ => self.expr(object),
                        }
                        if let MemberProp::Computed(k) = prop {
                            self.expr(k);
                        }
                    }
                    _ => self.expr(l),
                }
                self.expr(r);
            }
            ExprKind::Conditional(t, c, a) => {
                self.expr(t);
                self.expr(c);
                self.expr(a);
            }
            ExprKind::Call { callee, args, .. } => {
                self.record_call(callee);
                match &callee.kind {
                    ExprKind::Member { .. } => self.member(callee, true),
                    _ => self.expr(callee),
                }
                args.iter().for_each(|a| self.expr(a));
            }
            ExprKind::New { callee, args } => {
                self.expr(callee);
                args.iter().for_each(|a| self.expr(a));
            }
            ExprKind::Member { .. } => self.member(e, false),
            ExprKind::Sequence(items) => items.iter().for_each(|x| self.expr(x)),
        }
    }
}

/// `var` and function-declaration names hoisted to the enclosing function.
pub fn hoisted_names(body: &[Stmt], out: &mut HashSet<String>) {
    fn visit(s: &Stmt, out: &mut HashSet<String>) {
        let mut names = Vec::new();
        match &s.kind {
            StmtKind::VarDecl(d) if d.kind == VarKind::Var => d.decls.iter().for_each(|(p, _)| p.bound_names(&mut names)),
            StmtKind::FuncDecl(f) => names.extend(f.name.clone()),
            StmtKind::Block(b) => b.iter().for_each(|x| visit(x, out)),
            StmtKind::If { cons, alt, .. } => {
                visit(cons, out);
                alt.iter().for_each(|a| visit(a, out));
            }
            StmtKind::For { init, body, .. } => {
                if let Some(ForInit::Var(d)) = init {
                    if d.kind == VarKind::Var {
                        d.decls.iter().for_each(|(p, _)| p.bound_names(&mut names));
                    }
                }
                visit(body, out);
            }
            StmtKind::ForIn { left, body, .. } => {
                if let ForHead::Var(VarKind::Var, p) = left {
                    p.bound_names(&mut names);
                }
                visit(body, out);
            }
            StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } | StmtKind::Labeled(_, body) => visit(body, out),
            StmtKind::Try { block, handler, finalizer, .. } => {
                block.iter().chain(handler.iter().flatten()).chain(finalizer.iter().flatten()).for_each(|x| visit(x, out));
            }
            StmtKind::Switch { cases, .. } => cases.iter().flat_map(|c| &c.body).for_each(|x| visit(x, out)),
            StmtKind::Export(ExportDecl::Decl(d)) => visit(d, out),
            _ => {}
        }
        out.extend(names);
    }
    body.iter().for_each(|s| visit(s, out));
}

/// `let`/`const`/function/import names declared directly in a statement list.
pub fn lexical_names(body: &[Stmt], out: &mut HashSet<String>) {
    for s in body {
        let mut names = Vec::new();
        let kind = match &s.kind {
            StmtKind::Export(ExportDecl::Decl(d)) => &d.kind,
            k => k,
        };
        match kind {
            StmtKind::VarDecl(d) if d.kind != VarKind::Var => d.decls.iter().for_each(|(p, _)| p.bound_names(&mut names)),
            StmtKind::FuncDecl(f) => names.extend(f.name.clone()),
            StmtKind::Import(i) => {
                names.extend(i.default.clone());
                names.extend(i.namespace.clone());
                names.extend(i.named.iter().map(|(_, local)| local.clone()));
            }
            _ => {}
        }
        out.extend(names);
    }
}

/// Read-only pre-order AST visitor; [`walk_program`] descends everywhere,
/// including nested functions.
pub trait Visit {
    fn stmt(&mut self, _s: &Stmt) {}
    fn expr(&mut self, _e: &Expr) {}
}

pub fn walk_program(p: &Program, v: &mut impl Visit) {
    p.body.iter().for_each(|s| walk_stmt(s, v));
}

fn walk_function(f: &Function, v: &mut impl Visit) {
    f.params.iter().for_each(|p| walk_pattern(p, v));
    match &f.body {
        FuncBody::Block(b) => b.iter().for_each(|s| walk_stmt(s, v)),
        FuncBody::Expr(e) => walk_expr(e, v),
    }
}

fn walk_pattern(p: &Pattern, v: &mut impl Visit) {
    match p {
        Pattern::Ident(_) => {}
        Pattern::Object(props) => props.iter().for_each(|pp| {
            if let PropKey::Computed(k) = &pp.key {
                walk_expr(k, v);
            }
            walk_pattern(&pp.value, v);
        }),
        Pattern::Array(items) => items.iter().flatten().for_each(|i| walk_pattern(i, v)),
        Pattern::Default(p, d) => {
            walk_pattern(p, v);
            walk_expr(d, v);
        }
        Pattern::Rest(p) => walk_pattern(p, v),
    }
}

fn walk_var(d: &VarDecl, v: &mut impl Visit) {
    for (p, init) in &d.decls {
        walk_pattern(p, v);
        init.iter().for_each(|e| walk_expr(e, v));
    }
}

pub fn walk_stmt(s: &Stmt, v: &mut impl Visit) {
    v.stmt(s);
    match &s.kind {
        StmtKind::VarDecl(d) => walk_var(d, v),
        StmtKind::FuncDecl(f) => walk_function(f, v),
        StmtKind::Block(b) => b.iter().for_each(|x| walk_stmt(x, v)),
        StmtKind::If { test, cons, alt } => {
            walk_expr(test, v);
            walk_stmt(cons, v);
            alt.iter().for_each(|a| walk_stmt(a, v));
        }
        StmtKind::For { init, test, update, body } => {
            match init {
                Some(ForInit::Var(d)) => walk_var(d, v),
                Some(ForInit::Expr(e)) => walk_expr(e, v),
                None => {}
            }
            test.iter().chain(update.iter()).for_each(|e| walk_expr(e, v));
            walk_stmt(body, v);
        }
        StmtKind::ForIn { left, right, body, .. } => {
            match left {
                ForHead::Var(_, p) => walk_pattern(p, v),
                ForHead::Target(e) => walk_expr(e, v),
            }
            walk_expr(right, v);
            walk_stmt(body, v);
        }
        StmtKind::While { test, body } | StmtKind::DoWhile { body, test } => {
            walk_expr(test, v);
            walk_stmt(body, v);
        }
        StmtKind::Return(e) => e.iter().for_each(|e| walk_expr(e, v)),
        StmtKind::Throw(e) | StmtKind::Expr(e) => walk_expr(e, v),
        StmtKind::Try { block, param, handler, finalizer } => {
            block.iter().for_each(|x| walk_stmt(x, v));
            param.iter().for_each(|p| walk_pattern(p, v));
            handler.iter().flatten().chain(finalizer.iter().flatten()).for_each(|x| walk_stmt(x, v));
        }
        StmtKind::Switch { discriminant, cases } => {
            walk_expr(discriminant, v);
            for c in cases {
                c.test.iter().for_each(|t| walk_expr(t, v));
                c.body.iter().for_each(|x| walk_stmt(x, v));
            }
        }
        StmtKind::Labeled(_, b) => walk_stmt(b, v),
        StmtKind::Export(ExportDecl::Decl(d)) => walk_stmt(d, v),
        StmtKind::Export(ExportDecl::Default(e)) => walk_expr(e, v),
        _ => {}
    }
}

pub fn walk_expr(e: &Expr, v: &mut impl Visit) {
    v.expr(e);
    match &e.kind {
        ExprKind::Ident(_) | ExprKind::This | ExprKind::Lit(_) => {}
        ExprKind::Template { exprs, .. } | ExprKind::Sequence(exprs) => exprs.iter().for_each(|x| walk_expr(x, v)),
        ExprKind::Array(items) => items.iter().flatten().for_each(|x| walk_expr(x, v)),
        ExprKind::Object(props) => props.iter().for_each(|p| {
            if let PropKey::Computed(k) = &p.key {
                walk_expr(k, v);
            }
            walk_expr(&p.value, v);
        }),
        ExprKind::Function(f) => walk_function(f, v),
        ExprKind::Unary(_, a) | ExprKind::Spread(a) | ExprKind::Update { arg: a, .. } => walk_expr(a, v),
        ExprKind::Binary(_, l, r) | ExprKind::Logical(_, l, r) | ExprKind::Assign(_, l, r) => {
            walk_expr(l, v);
            walk_expr(r, v);
        }
        ExprKind::Conditional(t, c, a) => {
            walk_expr(t, v);
            walk_expr(c, v);
            walk_expr(a, v);
        }
        ExprKind::Call { callee, args, .. } | ExprKind::New { callee, args } => {
            walk_expr(callee, v);
            args.iter().for_each(|a| walk_expr(a, v));
        }
        ExprKind::Member { object, prop, .. } => {
            walk_expr(object, v);
            if let MemberProp::Computed(k) = prop {
                walk_expr(k, v);
            }
        }
    }
}

/// Distinct call paths, for quick set comparisons.
pub fn call_paths(calls: &[ApiCall]) -> BTreeSet<String> {
    calls.iter().map(|c| c.path.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::EntrypointKind;
    use proptest::prelude::*;

    fn tree(files: &[(&str, &str)]) -> FileTree {
        let mut t = FileTree::default();
        for (p, c) in files {
            t.insert(p, c.as_bytes().to_vec()).unwrap();
        }
        t
    }

    fn ep(path: &str) -> Entrypoint {
        Entrypoint {
            kind: EntrypointKind::Background,
            path: path.into(),
            match_patterns: vec![],
            missing_file: false,
            inline_source: None,
        }
    }

    fn calls_of(src: &str) -> Vec<(String, u32)> {
        let t = tree(&[("a.js", src)]);
        let g = resolve_modules(&[ep("a.js")], &t);
        extract_api_calls_static(&g, &t).into_iter().map(|c| (c.path, c.count)).collect()
    }

    fn reads_of(src: &str) -> Vec<String> {
        let t = tree(&[("a.js", src)]);
        let g = resolve_modules(&[ep("a.js")], &t);
        trace_static(&g, &t).navigator_reads.into_iter().map(|c| c.path).collect()
    }

    fn owned(v: &[(&str, u32)]) -> Vec<(String, u32)> {
        v.iter().map(|(p, c)| (p.to_string(), *c)).collect()
    }

    #[test]
    fn spec_examples() {
        assert_eq!(calls_of("chrome.tabs.create({})"), owned(&[("browser.tabs.create", 1)]));
        assert_eq!(calls_of("const chrome = {tabs:{create(){}}}; chrome.tabs.create()"), owned(&[]));
        assert_eq!(calls_of("chrome[\"sto\"+\"rage\"].local.get()"), owned(&[("browser.storage.local.get", 1)]));
        assert_eq!(calls_of("navigator.userAgent"), owned(&[]));
    }

    #[test]
    fn navigator_reads_are_separate() {
        assert_eq!(reads_of("navigator.userAgent"), vec!["navigator.userAgent"]);
        assert_eq!(reads_of("var ua = navigator.userAgent.toLowerCase(); navigator.sendBeacon('x')"), vec!["navigator.userAgent"]);
        assert_eq!(calls_of("navigator.userAgent.indexOf('x')"), owned(&[("navigator.userAgent.indexOf", 1)]));
        assert_eq!(reads_of("function f(navigator){ return navigator.language }"), Vec::<String>::new());
    }

    #[test]
    fn computed_members() {
        assert_eq!(calls_of("chrome.tabs[k]()"), owned(&[("browser.tabs.*", 1)]));
        assert_eq!(calls_of("chrome.tabs[k].x.y()"), owned(&[("browser.tabs.*", 1)]));
        assert_eq!(calls_of("chrome[k].get()"), owned(&[]));
        assert_eq!(calls_of("chrome[`tabs`].query()"), owned(&[("browser.tabs.query", 1)]));
        assert_eq!(calls_of("chrome()"), owned(&[]));
    }

    #[test]
    fn counts_and_scoping() {
        let src = "chrome.tabs.query({}, function(tabs){ chrome.tabs.query({}) });\n\
                   function f(browser){ browser.tabs.remove(1) }\n\
                   try { x() } catch (chrome) { chrome.foo.bar() }\n\
                   { let chrome = 1; chrome.a.b() }\n\
                   chrome.a.b(); browser.runtime.sendMessage(); chrome.tabs.query().then(x => x)";
        assert_eq!(
            calls_of(src),
            owned(&[("browser.a.b", 1), ("browser.runtime.sendMessage", 1), ("browser.tabs.query", 3)])
        );
        // `var` hoisting shadows before the declaration is reached.
        assert_eq!(calls_of("function g(){ chrome.x.y(); var chrome; }"), owned(&[]));
        assert_eq!(calls_of("var f = function chrome(){ chrome.x.y() }"), owned(&[]));
    }

    #[test]
    fn module_resolution() {
        let t = tree(&[("bg.js", "import {u} from './util.js'; chrome.a.b()"), ("util.js", "export const u = 1")]);
        let g = resolve_modules(&[ep("bg.js")], &t);
        assert_eq!(g.nodes, vec!["bg.js", "util.js"]);
        assert_eq!(g.edges, vec![("bg.js".to_string(), "util.js".to_string())]);

        let t = tree(&[("bg.js", "const _ = require('lodash')")]);
        let g = resolve_modules(&[ep("bg.js")], &t);
        assert_eq!(g.nodes, vec!["bg.js"]);
        assert_eq!(g.unresolved, vec!["lodash"]);

        let t = tree(&[("a.js", "import './b'"), ("b.js", "import './a.js'")]);
        let g = resolve_modules(&[ep("a.js")], &t);
        assert_eq!(g.nodes, vec!["a.js", "b.js"]);
        assert_eq!(g.edges.len(), 2);

        let t = tree(&[
            ("js/sw.js", "importScripts('lib.js', '../x/y.js'); const m = require('./m')"),
            ("js/lib.js", ""),
            ("x/y.js", ""),
            ("js/m/index.js", ""),
        ]);
        let g = resolve_modules(&[ep("js/sw.js")], &t);
        assert_eq!(g.nodes, vec!["js/sw.js", "js/lib.js", "x/y.js", "js/m/index.js"]);
        assert!(g.unresolved.is_empty());
        assert!(g.edges.iter().all(|(_, to)| t.contains(to)));
    }

    #[test]
    fn inline_sources_are_traced() {
        let t = tree(&[]);
        let mut e = ep("p.html#script0");
        e.inline_source = Some("chrome.tabs.create({})".into());
        let g = resolve_modules(&[e, ep("missing.js")], &t);
        assert_eq!(g.nodes, vec!["p.html#script0"]);
        assert_eq!(extract_api_calls_static(&g, &t)[0].path, "browser.tabs.create");
    }

    fn api_stmt() -> impl Strategy<Value = String> {
        (prop::sample::select(vec!["chrome", "browser"]), prop::sample::select(vec!["tabs", "storage", "runtime"]), prop::sample::select(vec!["get", "set", "query"]))
            .prop_map(|(r, a, b)| format!("{r}.{a}.{b}();"))
    }

    proptest! {
        #[test]
        fn shadowing_removes_scope_results(inner in prop::collection::vec(api_stmt(), 1..6), outer in prop::collection::vec(api_stmt(), 0..4)) {
            let body = inner.concat();
            let shadowed = format!("{}\nfunction f(){{ let browser = {{}}; let chrome = {{}}; {body} }}", outer.concat());
            let plain = outer.concat();
            prop_assert_eq!(calls_of(&shadowed), calls_of(&plain));
        }

        #[test]
        fn adding_a_file_adds_its_calls(a in prop::collection::vec(api_stmt(), 0..6), b in prop::collection::vec(api_stmt(), 0..6)) {
            let total = |calls: &[ApiCall]| calls.iter().map(|c| c.count as usize).sum::<usize>();
            let t1 = tree(&[("a.js", &a.concat())]);
            let before = total(&extract_api_calls_static(&resolve_modules(&[ep("a.js")], &t1), &t1));
            let t2 = tree(&[("a.js", &a.concat()), ("b.js", &b.concat())]);
            let after = total(&extract_api_calls_static(&resolve_modules(&[ep("a.js"), ep("b.js")], &t2), &t2));
            prop_assert_eq!(after - before, b.len());
        }
    }
}
