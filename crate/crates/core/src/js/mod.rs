//! JavaScript subset: lexer, AST, parser and constant folding.

pub mod ast;
pub mod fold;
pub mod lexer;
pub mod parser;

pub use ast::{Expr, ExprKind, Program, Span, Stmt, StmtKind};
pub use fold::{fold_constants, fold_expr};
pub use parser::{parse_expression, parse_program, ParseError, ParseOutcome};

/// JavaScript `Number.prototype.toString()` for the common cases.
pub fn number_to_string(n: f64) -> String {
    if n.is_nan() {
        return "NaN".into();
    }
    if n.is_infinite() {
        return if n > 0.0 { "Infinity".into() } else { "-Infinity".into() };
    }
    if n == 0.0 {
        return "0".into();
    }
    let abs = n.abs();
    if n.fract() == 0.0 && abs < 1e21 {
        return format!("{n:.0}");
    }
    if !(1e-7..1e21).contains(&abs) {
        let s = format!("{n:e}");
        return match s.split_once('e') {
            Some((m, e)) if !e.starts_with('-') => format!("{m}e+{e}"),
            _ => s,
        };
    }
    format!("{n}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(number_to_string(3.0), "3");
        assert_eq!(number_to_string(-0.5), "-0.5");
        assert_eq!(number_to_string(0.1 + 0.2), "0.30000000000000004");
        assert_eq!(number_to_string(1e21), "1e+21");
        assert_eq!(number_to_string(1.5e-9), "1.5e-9");
        assert_eq!(number_to_string(f64::NAN), "NaN");
    }
}
