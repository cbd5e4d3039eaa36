//! Bottom-up folding of constant string concatenations.

use super::ast::*;

/// Folds `"a" + "b"` and interpolation-free templates into string literals
/// throughout a program. Idempotent.
pub fn fold_constants(program: &Program) -> Program {
    let mut p = program.clone();
    p.body.iter_mut().for_each(fold_stmt);
    p
}

/// Folds a single expression tree.
pub fn fold_expr(e: &Expr) -> Expr {
    let mut e = e.clone();
    fold_in_place(&mut e);
    e
}

fn fold_block(body: &mut [Stmt]) {
    body.iter_mut().for_each(fold_stmt);
}

fn fold_pattern(p: &mut Pattern) {
    match p {
        Pattern::Ident(_) => {}
        Pattern::Object(props) => props.iter_mut().for_each(|pp| {
            if let PropKey::Computed(k) = &mut pp.key {
                fold_in_place(k);
            }
            fold_pattern(&mut pp.value);
        }),
        Pattern::Array(items) => items.iter_mut().flatten().for_each(fold_pattern),
        Pattern::Default(p, d) => {
            fold_pattern(p);
            fold_in_place(d);
        }
        Pattern::Rest(p) => fold_pattern(p),
    }
}

fn fold_var(d: &mut VarDecl) {
    for (pat, init) in &mut d.decls {
        fold_pattern(pat);
        if let Some(e) = init {
            fold_in_place(e);
        }
    }
}

fn fold_function(f: &mut std::sync::Arc<Function>) {
    let f = std::sync::Arc::make_mut(f);
    f.params.iter_mut().for_each(fold_pattern);
    match &mut f.body {
        FuncBody::Block(b) => fold_block(b),
        FuncBody::Expr(e) => fold_in_place(e),
    }
}

fn fold_stmt(s: &mut Stmt) {
    match &mut s.kind {
        StmtKind::VarDecl(d) => fold_var(d),
        StmtKind::FuncDecl(f) => fold_function(f),
        StmtKind::Block(b) => fold_block(b),
        StmtKind::If { test, cons, alt } => {
            fold_in_place(test);
            fold_stmt(cons);
            if let Some(a) = alt {
                fold_stmt(a);
            }
        }
        StmtKind::For { init, test, update, body } => {
            match init {
                Some(ForInit::Var(d)) => fold_var(d),
                Some(ForInit::Expr(e)) => fold_in_place(e),
                None => {}
            }
            test.iter_mut().chain(update.iter_mut()).for_each(fold_in_place);
            fold_stmt(body);
        }
        StmtKind::ForIn { left, right, body, .. } => {
            match left {
                ForHead::Var(_, p) => fold_pattern(p),
                ForHead::Target(e) => fold_in_place(e),
            }
            fold_in_place(right);
            fold_stmt(body);
        }
        StmtKind::While { test, body } | StmtKind::DoWhile { body, test } => {
            fold_in_place(test);
            fold_stmt(body);
        }
        StmtKind::Return(e) => e.iter_mut().for_each(fold_in_place),
        StmtKind::Throw(e) | StmtKind::Expr(e) => fold_in_place(e),
        StmtKind::Try { block, param, handler, finalizer } => {
            fold_block(block);
            param.iter_mut().for_each(fold_pattern);
            handler.iter_mut().for_each(|b| fold_block(b));
            finalizer.iter_mut().for_each(|b| fold_block(b));
        }
        StmtKind::Switch { discriminant, cases } => {
            fold_in_place(discriminant);
            for c in cases {
                c.test.iter_mut().for_each(fold_in_place);
                fold_block(&mut c.body);
            }
        }
        StmtKind::Labeled(_, b) => fold_stmt(b),
        StmtKind::Export(ExportDecl::Decl(d)) => fold_stmt(d),
        StmtKind::Export(ExportDecl::Default(e)) => fold_in_place(e),
        StmtKind::Break(_) | StmtKind::Continue(_) | StmtKind::Empty | StmtKind::Import(_) | StmtKind::Export(_) => {}
    }
}

fn fold_in_place(e: &mut Expr) {
    match &mut e.kind {
        ExprKind::Ident(_) | ExprKind::This | ExprKind::Lit(_) => {}
        ExprKind::Template { quasis, exprs } => {
            exprs.iter_mut().for_each(fold_in_place);
            if exprs.is_empty() {
                let s = quasis.concat();
                e.kind = ExprKind::Lit(Literal::Str(s));
            }
        }
        ExprKind::Array(items) => items.iter_mut().flatten().for_each(fold_in_place),
        ExprKind::Object(props) => props.iter_mut().for_each(|p| {
            if let PropKey::Computed(k) = &mut p.key {
                fold_in_place(k);
            }
            fold_in_place(&mut p.value);
        }),
        ExprKind::Function(f) => fold_function(f),
        ExprKind::Unary(_, a) | ExprKind::Spread(a) => fold_in_place(a),
        ExprKind::Update { arg, .. } => fold_in_place(arg),
        ExprKind::Binary(op, l, r) => {
            fold_in_place(l);
            fold_in_place(r);
            if *op == BinaryOp::Add {
                if let (Some(a), Some(b)) = (l.as_str_lit(), r.as_str_lit()) {
                    let s = format!("{a}{b}");
                    e.kind = ExprKind::Lit(Literal::Str(s));
                }
            }
        }
        ExprKind::Logical(_, l, r) | ExprKind::Assign(_, l, r) => {
            fold_in_place(l);
            fold_in_place(r);
        }
        ExprKind::Conditional(t, c, a) => {
            fold_in_place(t);
            fold_in_place(c);
            fold_in_place(a);
        }
        ExprKind::Call { callee, args, .. } | ExprKind::New { callee, args } => {
            fold_in_place(callee);
            args.iter_mut().for_each(fold_in_place);
        }
        ExprKind::Member { object, prop, .. } => {
            fold_in_place(object);
            if let MemberProp::Computed(p) = prop {
                fold_in_place(p);
            }
        }
        ExprKind::Sequence(items) => items.iter_mut().for_each(fold_in_place),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    fn folded_expr(src: &str) -> ExprKind {
        let p = fold_constants(&parse_program(src, false).ast.unwrap());
        match &p.body[0].kind {
            StmtKind::Expr(e) => e.kind.clone(),
            _ => panic!(),
        }
    }

    fn s(v: &str) -> ExprKind {
        ExprKind::Lit(Literal::Str(v.into()))
    }

    #[test]
    fn folds_string_concat() {
        assert_eq!(folded_expr("'ta' + 'bs'"), s("tabs"));
        assert_eq!(folded_expr("'sto' + 'ra' + 'ge'"), s("storage"));
        assert_eq!(folded_expr("`plain`"), s("plain"));
        assert!(matches!(folded_expr("'a' + x"), ExprKind::Binary(BinaryOp::Add, _, _)));
        assert!(matches!(folded_expr("'a' + 1"), ExprKind::Binary(BinaryOp::Add, _, _)));
    }

    #[test]
    fn folds_computed_member_keys() {
        let k = folded_expr("chrome['ta' + 'bs'].query()");
        let ExprKind::Call { callee, .. } = k else { panic!() };
        let ExprKind::Member { prop: MemberProp::Named(_) | MemberProp::Computed(_), object, .. } = callee.kind else { panic!() };
        let ExprKind::Member { prop: MemberProp::Computed(key), .. } = object.kind else { panic!() };
        assert_eq!(key.kind, s("tabs"));
    }

    #[test]
    fn idempotent() {
        let src = "var a = 'x' + ('y' + `z`); f(function(){ return 'p' + 'q' + r })";
        let once = fold_constants(&parse_program(src, false).ast.unwrap());
        assert_eq!(fold_constants(&once), once);
    }
}
