use std::fmt;

use num_complex::Complex64;

use super::eval::{Flags, Program};
use super::Expr;
use crate::dsl::Image;
use crate::sphere::SpherePoint;

#[derive(Debug, Clone, PartialEq)]
enum Leaf {
    /// `Re(u)`, from `log |exp(u)|`.
    Re(Expr, Program),
    /// `log |u|` for an exp-free `u`.
    LogNorm(Expr, Program),
}

impl Leaf {
    fn eval(&self, z: Complex64) -> Option<f64> {
        let mut flags = Flags::default();
        match self {
            Leaf::Re(_, p) => match p.run(SpherePoint::Finite(z), &mut flags) {
                Image::Finite(u) => Some(u.re),
                _ => None,
            },
            Leaf::LogNorm(Expr::Var, _) => Some(z.norm().ln()),
            Leaf::LogNorm(_, p) => match p.run(SpherePoint::Finite(z), &mut flags) {
                Image::Finite(u) => Some(u.norm().ln()),
                _ => None,
            },
        }
    }
}

/// `log |f|` as a weighted sum of `Re(u)` and `log |u|` terms, each of which
/// stays within double range long after `f` itself has overflowed.
#[derive(Debug, Clone, PartialEq)]
pub struct LogAbsExpr {
    terms: Vec<(f64, Leaf)>,
    constant: f64,
}

impl LogAbsExpr {
    /// `log |f(z)|`, or `None` when some term is not representable.
    pub fn eval(&self, z: Complex64) -> Option<f64> {
        let mut sum = self.constant;
        for (c, leaf) in &self.terms {
            sum += c * leaf.eval(z)?;
        }
        (!sum.is_nan()).then_some(sum)
    }
}

fn collect(e: &Expr, coeff: f64, terms: &mut Vec<(f64, Leaf)>, constant: &mut f64) -> bool {
    match e {
        Expr::Exp(u) => {
            terms.push((coeff, Leaf::Re((**u).clone(), Program::new(u))));
            true
        }
        Expr::Mul(a, b) => collect(a, coeff, terms, constant) && collect(b, coeff, terms, constant),
        Expr::Div(a, b) => collect(a, coeff, terms, constant) && collect(b, -coeff, terms, constant),
        Expr::Pow(a, k) => *k == 0 || collect(a, coeff * f64::from(*k), terms, constant),
        Expr::Neg(a) => collect(a, coeff, terms, constant),
        _ if e.contains_exp() => false,
        _ if !e.contains_var() => {
            let mut flags = Flags::default();
            match Program::new(e).run(SpherePoint::Infinity, &mut flags) {
                Image::Finite(c) if c.norm() > 0.0 => {
                    *constant += coeff * c.norm().ln();
                    true
                }
                _ => false,
            }
        }
        _ => {
            terms.push((coeff, Leaf::LogNorm(e.clone(), Program::new(e))));
            true
        }
    }
}

/// Structural transform `log|exp(u)| = Re u`, `log|uv| = log|u| + log|v|`,
/// `log|u/v| = log|u| - log|v|`, `log|u^k| = k log|u|`, `log|-u| = log|u|`,
/// with exp-free subtrees as leaves. `None` when a sum or difference that
/// contains `exp` sits outside every `exp`.
pub fn derive_log_abs(expr: &Expr) -> Option<LogAbsExpr> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    if !collect(expr, 1.0, &mut terms, &mut constant) {
        return None;
    }
    terms.retain(|(c, _)| *c != 0.0);
    Some(LogAbsExpr { terms, constant })
}

fn write_term(f: &mut fmt::Formatter<'_>, first: bool, c: f64, body: &dyn fmt::Display) -> fmt::Result {
    let sep = match (first, c < 0.0) {
        (true, false) => "",
        (true, true) => "-",
        (false, false) => " + ",
        (false, true) => " - ",
    };
    if c.abs() == 1.0 {
        write!(f, "{sep}{body}")
    } else {
        write!(f, "{sep}{}*{body}", c.abs())
    }
}

impl fmt::Display for LogAbsExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (c, leaf)) in self.terms.iter().enumerate() {
            match leaf {
                Leaf::Re(u, _) => write_term(f, i == 0, *c, &format_args!("Re({u})"))?,
                Leaf::LogNorm(u, _) => write_term(f, i == 0, *c, &format_args!("log|{u}|"))?,
            }
        }
        if self.constant != 0.0 || self.terms.is_empty() {
            let sep = match (self.terms.is_empty(), self.constant < 0.0) {
                (true, false) => "",
                (true, true) => "-",
                (false, false) => " + ",
                (false, true) => " - ",
            };
            write!(f, "{sep}{}", self.constant.abs())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn la(text: &str) -> Option<LogAbsExpr> {
        derive_log_abs(&parse(text).unwrap())
    }

    #[test]
    fn transform_examples() {
        assert_eq!(la("exp(z+1/z)").unwrap().to_string(), "Re(z + 1/z)");
        assert_eq!(la("z^2*exp(z)").unwrap().to_string(), "2*log|z| + Re(z)");
        assert_eq!(la("exp(exp(1/z)+z)").unwrap().to_string(), "Re(exp(1/z) + z)");
        assert_eq!(la("-3*exp(z)/z").unwrap().to_string(), "Re(z) - log|z| + 1.0986122886681098");
        assert!(la("exp(z) + 1").is_none());
        assert!(la("z + 1").is_some());
    }

    #[test]
    fn values() {
        let f = la("exp(exp(1/z)+z)").unwrap();
        let w = Complex64::new(0.0399071721970326, 0.0);
        assert!((f.eval(w).unwrap() - 76316296020.495).abs() < 1e-2);
        let g = la("z^2*exp(z)").unwrap();
        assert_eq!(g.eval(Complex64::new(0.0, 0.0)), Some(f64::NEG_INFINITY));
        assert!((g.eval(Complex64::new(4.0, 0.0)).unwrap() - (4.0 + 2.0 * 4f64.ln())).abs() < 1e-14);
        // exp(1/z) overflows for tiny positive z
        assert_eq!(f.eval(Complex64::new(1e-3, 0.0)), None);
    }
}
