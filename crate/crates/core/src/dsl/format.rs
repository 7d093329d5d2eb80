use std::fmt::{self, Write};

use super::Expr;

// Binding strength, loosest first.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const ATOM: u8 = 5;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => SUM,
        Expr::Mul(..) | Expr::Div(..) => PRODUCT,
        Expr::Neg(_) => UNARY,
        Expr::Pow(..) => 4,
        Expr::Var | Expr::Real(_) | Expr::Imag(_) | Expr::Exp(_) => ATOM,
    }
}

/// Shortest text that parses back to the same `f64`.
pub(crate) fn write_number(out: &mut impl Write, v: f64) -> fmt::Result {
    if v == 0.0 || (1e-4..1e16).contains(&v) {
        write!(out, "{}", v + 0.0)
    } else {
        write!(out, "{v:e}")
    }
}

fn write_at(out: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if level(e) < min {
        out.write_char('(')?;
        write_expr(out, e)?;
        out.write_char(')')
    } else {
        write_expr(out, e)
    }
}

fn write_expr(out: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Var => out.write_char('z'),
        Expr::Real(v) => write_number(out, *v),
        Expr::Imag(v) if *v == 1.0 => out.write_char('i'),
        Expr::Imag(v) => {
            write_number(out, *v)?;
            out.write_char('i')
        }
        Expr::Neg(a) => {
            out.write_char('-')?;
            write_at(out, a, UNARY)
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            write_at(out, a, SUM)?;
            out.write_str(if matches!(e, Expr::Add(..)) { " + " } else { " - " })?;
            write_at(out, b, PRODUCT)
        }
        Expr::Mul(a, b) | Expr::Div(a, b) => {
            write_at(out, a, PRODUCT)?;
            out.write_char(if matches!(e, Expr::Mul(..)) { '*' } else { '/' })?;
            write_at(out, b, UNARY)
        }
        Expr::Pow(a, k) => {
            write_at(out, a, ATOM)?;
            write!(out, "^{k}")
        }
        Expr::Exp(a) => {
            out.write_str("exp(")?;
            write_expr(out, a)?;
            out.write_char(')')
        }
    }
}

/// Canonical text: ` + ` and ` - ` are spaced, `*`, `/` and `^` are not,
/// and parentheses appear only where precedence requires them.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}
