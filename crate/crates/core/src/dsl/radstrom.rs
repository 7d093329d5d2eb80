use num_complex::Complex64;

use super::{DslError, Expr, MAX_EXPONENT};

/// `z^k exp(g(z) + h(1/z))` with polynomial `g`, `h` (ascending coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct RadstromParams {
    k: i32,
    g: Vec<Complex64>,
    h: Vec<Complex64>,
}

fn trim(mut c: Vec<Complex64>) -> Vec<Complex64> {
    while c.len() > 1 && c.last().is_some_and(|v| *v == Complex64::new(0.0, 0.0)) {
        c.pop();
    }
    if c.is_empty() {
        c.push(Complex64::new(0.0, 0.0));
    }
    c
}

impl RadstromParams {
    pub fn new(k: i32, g: Vec<Complex64>, h: Vec<Complex64>) -> Result<Self, DslError> {
        if k.abs() > MAX_EXPONENT {
            return Err(DslError::ExponentOutOfRange(k));
        }
        let (g, h) = (trim(g), trim(h));
        if g.len() == 1 && h.len() == 1 {
            return Err(DslError::DegenerateRadstrom);
        }
        Ok(Self { k, g, h })
    }

    /// Takes `g` and `h` as polynomial expressions in `z`; `h` is then
    /// evaluated at `1/z`.
    pub fn from_exprs(k: i32, g: &Expr, h: &Expr) -> Result<Self, DslError> {
        Self::new(k, polynomial_coefficients(g)?, polynomial_coefficients(h)?)
    }

    pub fn k(&self) -> i32 {
        self.k
    }

    pub fn g(&self) -> &[Complex64] {
        &self.g
    }

    pub fn h(&self) -> &[Complex64] {
        &self.h
    }
}

fn add_constant(acc: Expr, c: Complex64) -> Expr {
    if c == Complex64::new(0.0, 0.0) {
        acc
    } else if c.im == 0.0 && c.re < 0.0 {
        Expr::sub(acc, Expr::Real(-c.re))
    } else if c.re == 0.0 && c.im < 0.0 {
        Expr::sub(acc, Expr::Imag(-c.im))
    } else {
        Expr::add(acc, Expr::constant(c))
    }
}

/// Horner form of `sum c_i x^i` with `x = z` or `x = 1/z`; zero terms and
/// unit factors are dropped. `None` for the zero polynomial.
fn horner(c: &[Complex64], reciprocal: bool) -> Option<Expr> {
    let one = Complex64::new(1.0, 0.0);
    let (&top, rest) = c.split_last()?;
    if rest.is_empty() {
        return (top != Complex64::new(0.0, 0.0)).then(|| Expr::constant(top));
    }
    // `None` stands for the literal 1 so that `1*x` is written `x`.
    let mut acc = (top != one).then(|| Expr::constant(top));
    for &ci in rest.iter().rev() {
        let times_x = match (acc, reciprocal) {
            (None, false) => Expr::Var,
            (None, true) => Expr::div(Expr::Real(1.0), Expr::Var),
            (Some(a), false) => Expr::mul(a, Expr::Var),
            (Some(a), true) => Expr::div(a, Expr::Var),
        };
        acc = Some(add_constant(times_x, ci));
    }
    acc
}

pub fn radstrom(params: &RadstromParams) -> Expr {
    let exponent = match (horner(&params.g, false), horner(&params.h, true)) {
        (Some(g), Some(h)) => Expr::add(g, h),
        (Some(g), None) => g,
        (None, Some(h)) => h,
        (None, None) => Expr::Real(0.0),
    };
    let e = Expr::exp(exponent);
    match params.k {
        0 => e,
        1 => Expr::mul(Expr::Var, e),
        k => Expr::mul(Expr::pow(Expr::Var, k), e),
    }
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[Complex64], b: &[Complex64], sign: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] += y * sign;
    }
    out
}

/// Ascending coefficients of a polynomial expression in `z`.
pub fn polynomial_coefficients(expr: &Expr) -> Result<Vec<Complex64>, DslError> {
    let not_poly = || DslError::NotPolynomial(expr.to_string());
    let c = match expr {
        Expr::Var => vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        Expr::Real(v) => vec![Complex64::new(*v, 0.0)],
        Expr::Imag(v) => vec![Complex64::new(0.0, *v)],
        Expr::Neg(a) => polynomial_coefficients(a)?.into_iter().map(|v| -v).collect(),
        Expr::Add(a, b) => poly_add(&polynomial_coefficients(a)?, &polynomial_coefficients(b)?, 1.0),
        Expr::Sub(a, b) => poly_add(&polynomial_coefficients(a)?, &polynomial_coefficients(b)?, -1.0),
        Expr::Mul(a, b) => poly_mul(&polynomial_coefficients(a)?, &polynomial_coefficients(b)?),
        Expr::Div(a, b) => {
            let d = trim(polynomial_coefficients(b).map_err(|_| not_poly())?);
            if d.len() != 1 || d[0] == Complex64::new(0.0, 0.0) {
                return Err(not_poly());
            }
            polynomial_coefficients(a)?.into_iter().map(|v| v / d[0]).collect()
        }
        Expr::Pow(a, k) if *k >= 0 => {
            let base = polynomial_coefficients(a)?;
            let mut acc = vec![Complex64::new(1.0, 0.0)];
            for _ in 0..*k {
                acc = poly_mul(&acc, &base);
            }
            acc
        }
        Expr::Pow(..) | Expr::Exp(_) => return Err(not_poly()),
    };
    Ok(trim(c))
}

/// Value of a constant expression such as `-1 + 2i`.
pub fn constant_value(expr: &Expr) -> Result<Complex64, DslError> {
    let c = polynomial_coefficients(expr).map_err(|_| DslError::NotConstant(expr.to_string()))?;
    if c.len() == 1 {
        Ok(c[0])
    } else {
        Err(DslError::NotConstant(expr.to_string()))
    }
}
