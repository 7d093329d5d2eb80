//! Map expressions: parsing, canonical formatting, compilation to an
//! overflow-aware evaluator, and the symbolic `log |f|` transform.
//!
//! The grammar covers the variable `z`, real and imaginary decimal literals,
//! `+ - * /`, unary minus, integer powers `^k` with `|k| <= 64`, `exp(..)`
//! and parentheses. That is enough for `z^k exp(g(z) + h(1/z))` with
//! polynomial `g`, `h`, and for compositions such as `exp(exp(1/z) + z)`.

mod eval;
mod format;
mod log_abs;
mod parse;
mod radstrom;

use thiserror::Error;

pub use eval::{compile, compose_power, CompiledMap, Evaluation, Image, EXP_ARG_CAP, OVERFLOW_CAP};
pub use log_abs::{derive_log_abs, LogAbsExpr};
pub use parse::{parse, ParseError};
pub use radstrom::{constant_value, polynomial_coefficients, radstrom, RadstromParams};

/// Largest accepted `|k|` in `u^k`.
pub const MAX_EXPONENT: i32 = 64;

/// Expression tree. Literals are stored as non-negative magnitudes; signs
/// are always explicit [`Expr::Neg`] nodes so that every tree has exactly
/// one canonical text form.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var,
    Real(f64),
    Imag(f64),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Exp(Box<Expr>),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }
    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }
    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }
    pub fn pow(a: Expr, k: i32) -> Expr {
        Expr::Pow(Box::new(a), k)
    }
    pub fn exp(a: Expr) -> Expr {
        Expr::Exp(Box::new(a))
    }

    /// Literal for an arbitrary complex constant, using `Neg`/`Add`/`Sub`
    /// around non-negative parts.
    pub fn constant(c: num_complex::Complex64) -> Expr {
        let signed = |v: f64, node: fn(f64) -> Expr| {
            if v < 0.0 {
                Expr::neg(node(-v))
            } else {
                node(v + 0.0)
            }
        };
        match (c.re != 0.0, c.im != 0.0) {
            (_, false) => signed(c.re, Expr::Real),
            (false, true) => signed(c.im, Expr::Imag),
            (true, true) => {
                let re = signed(c.re, Expr::Real);
                if c.im < 0.0 {
                    Expr::sub(re, Expr::Imag(-c.im))
                } else {
                    Expr::add(re, Expr::Imag(c.im))
                }
            }
        }
    }

    pub fn contains_exp(&self) -> bool {
        match self {
            Expr::Var | Expr::Real(_) | Expr::Imag(_) => false,
            Expr::Exp(_) => true,
            Expr::Neg(a) | Expr::Pow(a, _) => a.contains_exp(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.contains_exp() || b.contains_exp()
            }
        }
    }

    pub fn contains_var(&self) -> bool {
        match self {
            Expr::Var => true,
            Expr::Real(_) | Expr::Imag(_) => false,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) => a.contains_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.contains_var() || b.contains_var()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Var | Expr::Real(_) | Expr::Imag(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) => 1 + a.depth(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DslError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("expression is not a polynomial in z: {0}")]
    NotPolynomial(String),
    #[error("g and h are both constant; the map has no essential singularities")]
    DegenerateRadstrom,
    #[error("exponent {0} is outside -64..=64")]
    ExponentOutOfRange(i32),
    #[error("expression `{0}` is not a constant")]
    NotConstant(String),
}
