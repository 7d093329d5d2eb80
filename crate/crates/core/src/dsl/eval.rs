use std::fmt;

use num_complex::Complex64;

use super::log_abs::{derive_log_abs, LogAbsExpr};
use super::{parse, Expr, ParseError};
use crate::sphere::{PunctureSet, SpherePoint};

/// Magnitudes above this are treated as infinite.
pub const OVERFLOW_CAP: f64 = 1e300;
/// `exp(u)` with `Re u > EXP_ARG_CAP` overflows; with `Re u < -EXP_ARG_CAP`
/// it underflows to an exact zero.
pub const EXP_ARG_CAP: f64 = 690.0;

/// Result of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Image {
    Finite(Complex64),
    Infinity,
    /// The value depends on a direction lost to overflow, e.g. `exp(inf)`
    /// or `inf - inf`.
    Indeterminate,
}

impl Image {
    pub fn point(self) -> Option<SpherePoint> {
        match self {
            Image::Finite(z) => Some(SpherePoint::Finite(z)),
            Image::Infinity => Some(SpherePoint::Infinity),
            Image::Indeterminate => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub image: Image,
    /// Some intermediate exceeded the overflow cap or divided by zero.
    pub overflow: bool,
    /// Some intermediate was flushed to zero.
    pub underflow: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Flags {
    pub overflow: bool,
    pub underflow: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Var,
    Const(Complex64),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow(i32),
    Exp,
}

/// Postfix form of an expression.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Program {
    ops: Vec<Op>,
    max_stack: usize,
}

const INLINE_STACK: usize = 32;

impl Program {
    pub fn new(expr: &Expr) -> Self {
        let mut ops = Vec::new();
        emit(expr, &mut ops);
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        for op in &ops {
            match op {
                Op::Var | Op::Const(_) => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div => depth -= 1,
                Op::Neg | Op::Pow(_) | Op::Exp => {}
            }
            max_stack = max_stack.max(depth);
        }
        Self { ops, max_stack }
    }

    pub fn run(&self, x: SpherePoint, flags: &mut Flags) -> Image {
        let input = match x {
            SpherePoint::Finite(z) => Val::Finite(z),
            SpherePoint::Infinity => Val::Infinity(None),
        };
        if self.max_stack <= INLINE_STACK {
            let mut stack = [Val::Indeterminate; INLINE_STACK];
            self.run_on(input, &mut stack, flags)
        } else {
            let mut stack = vec![Val::Indeterminate; self.max_stack];
            self.run_on(input, &mut stack, flags)
        }
    }

    fn run_on(&self, input: Val, stack: &mut [Val], flags: &mut Flags) -> Image {
        let mut top = 0usize;
        for &op in &self.ops {
            match op {
                Op::Var => {
                    stack[top] = input;
                    top += 1;
                }
                Op::Const(c) => {
                    stack[top] = Val::Finite(c);
                    top += 1;
                }
                Op::Neg | Op::Pow(_) | Op::Exp => {
                    let a = stack[top - 1];
                    stack[top - 1] = unary(op, a, flags);
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let b = stack[top - 1];
                    let a = stack[top - 2];
                    top -= 1;
                    stack[top - 1] = binary(op, a, b, flags);
                }
            }
        }
        stack[0].image()
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e {
        Expr::Var => ops.push(Op::Var),
        Expr::Real(v) => ops.push(Op::Const(Complex64::new(*v, 0.0))),
        Expr::Imag(v) => ops.push(Op::Const(Complex64::new(0.0, *v))),
        Expr::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Expr::Pow(a, k) => {
            emit(a, ops);
            ops.push(Op::Pow(*k));
        }
        Expr::Exp(a) => {
            emit(a, ops);
            ops.push(Op::Exp);
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(match e {
                Expr::Add(..) => Op::Add,
                Expr::Sub(..) => Op::Sub,
                Expr::Mul(..) => Op::Mul,
                _ => Op::Div,
            });
        }
    }
}

/// Working value of the evaluator. An overflowed value keeps its argument
/// while that argument is still known to within `DIR_TOLERANCE`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Val {
    Finite(Complex64),
    Infinity(Option<f64>),
    Indeterminate,
}

impl Val {
    fn image(self) -> Image {
        match self {
            Val::Finite(z) => Image::Finite(z),
            Val::Infinity(_) => Image::Infinity,
            Val::Indeterminate => Image::Indeterminate,
        }
    }
}

/// `exp(u)` keeps the direction `Im u` only while `|Im u|` is below this;
/// past it the rounding error of `Im u` is no longer small against `2 pi`.
const DIR_IM_LIMIT: f64 = 1e12;
/// `exp` of a directed infinity resolves only when `|cos arg|` exceeds this.
const DIR_TOLERANCE: f64 = 1e-2;

fn turn(d: Option<f64>, by: f64) -> Option<f64> {
    d.map(|t| (t + by).rem_euclid(std::f64::consts::TAU))
}

fn direction(v: Complex64) -> Option<f64> {
    let t = v.im.atan2(v.re);
    t.is_finite().then(|| t.rem_euclid(std::f64::consts::TAU))
}

/// Applies the overflow cap to a freshly computed finite-operand result.
fn capped(v: Complex64, flags: &mut Flags) -> Val {
    if !(v.re.is_finite() && v.im.is_finite()) {
        flags.overflow = true;
        return Val::Infinity(direction(v));
    }
    let m = v.re.abs().max(v.im.abs());
    if m > OVERFLOW_CAP * std::f64::consts::FRAC_1_SQRT_2 && v.norm() > OVERFLOW_CAP {
        flags.overflow = true;
        return Val::Infinity(direction(v));
    }
    Val::Finite(v)
}

/// Flags a product or quotient of nonzero values that came out as zero.
fn product(v: Complex64, operands_nonzero: bool, flags: &mut Flags) -> Val {
    let out = capped(v, flags);
    if operands_nonzero && out == Val::Finite(Complex64::new(0.0, 0.0)) {
        flags.underflow = true;
    }
    out
}

fn is_zero(z: Complex64) -> bool {
    z.re == 0.0 && z.im == 0.0
}

/// Smith's complex division; avoids the spurious overflow of `|b|^2`.
pub(crate) fn cdiv(a: Complex64, b: Complex64) -> Complex64 {
    if b.re.abs() >= b.im.abs() {
        let r = b.im / b.re;
        let d = b.re + b.im * r;
        Complex64::new((a.re + a.im * r) / d, (a.im - a.re * r) / d)
    } else {
        let r = b.re / b.im;
        let d = b.re * r + b.im;
        Complex64::new((a.re * r + a.im) / d, (a.im * r - a.re) / d)
    }
}

fn divide(a: Val, b: Val, flags: &mut Flags) -> Val {
    use Val::*;
    match (a, b) {
        (Indeterminate, _) | (_, Indeterminate) | (Infinity(_), Infinity(_)) => Indeterminate,
        (Infinity(d), Finite(z)) if !is_zero(z) => Infinity(turn(d, -z.arg())),
        (Infinity(_), Finite(_)) => Infinity(None),
        (Finite(_), Infinity(_)) => Finite(Complex64::new(0.0, 0.0)),
        (Finite(x), Finite(y)) if is_zero(y) => {
            if is_zero(x) {
                Indeterminate
            } else {
                flags.overflow = true;
                Infinity(None)
            }
        }
        (Finite(x), Finite(y)) => product(cdiv(x, y), !is_zero(x), flags),
    }
}

fn power(a: Val, k: i32, flags: &mut Flags) -> Val {
    use Val::*;
    match a {
        Indeterminate => Indeterminate,
        Infinity(_) if k == 0 => Indeterminate,
        Infinity(d) if k > 0 => Infinity(d.and_then(|t| turn(Some(t * f64::from(k)), 0.0))),
        Infinity(_) => Finite(Complex64::new(0.0, 0.0)),
        Finite(_) if k == 0 => Finite(Complex64::new(1.0, 0.0)),
        Finite(z) => {
            // Binary exponentiation with the cap applied after every product.
            let mut acc = Finite(Complex64::new(1.0, 0.0));
            let mut base = Finite(z);
            let mut n = k.unsigned_abs();
            while n > 0 {
                if n & 1 == 1 {
                    acc = binary(Op::Mul, acc, base, flags);
                }
                n >>= 1;
                if n > 0 {
                    base = binary(Op::Mul, base, base, flags);
                }
            }
            if k > 0 {
                acc
            } else {
                divide(Finite(Complex64::new(1.0, 0.0)), acc, flags)
            }
        }
    }
}

fn unary(op: Op, a: Val, flags: &mut Flags) -> Val {
    use Val::*;
    match op {
        Op::Neg => match a {
            Finite(z) => Finite(-z),
            Infinity(d) => Infinity(turn(d, std::f64::consts::PI)),
            Indeterminate => Indeterminate,
        },
        Op::Pow(k) => power(a, k, flags),
        Op::Exp => match a {
            Finite(u) if u.re > EXP_ARG_CAP => {
                flags.overflow = true;
                Infinity((u.im.abs() < DIR_IM_LIMIT).then(|| u.im.rem_euclid(std::f64::consts::TAU)))
            }
            Finite(u) if u.re < -EXP_ARG_CAP => {
                flags.underflow = true;
                Finite(Complex64::new(0.0, 0.0))
            }
            Finite(u) => capped(u.exp(), flags),
            Infinity(Some(t)) if t.cos() < -DIR_TOLERANCE => {
                flags.underflow = true;
                Finite(Complex64::new(0.0, 0.0))
            }
            Infinity(Some(t)) if t.cos() > DIR_TOLERANCE => {
                flags.overflow = true;
                Infinity(None)
            }
            _ => Indeterminate,
        },
        _ => unreachable!("not a unary op"),
    }
}

fn binary(op: Op, a: Val, b: Val, flags: &mut Flags) -> Val {
    use Val::*;
    match op {
        Op::Add | Op::Sub => match (a, b) {
            (Finite(x), Finite(y)) => capped(if op == Op::Add { x + y } else { x - y }, flags),
            (Infinity(d), Finite(_)) => Infinity(d),
            (Finite(_), Infinity(d)) if op == Op::Add => Infinity(d),
            (Finite(_), Infinity(d)) => Infinity(turn(d, std::f64::consts::PI)),
            _ => Indeterminate,
        },
        Op::Mul => match (a, b) {
            (Finite(x), Finite(y)) => product(x * y, !is_zero(x) && !is_zero(y), flags),
            (Infinity(d), Infinity(e)) => Infinity(d.zip(e).and_then(|(d, e)| turn(Some(d), e))),
            (Infinity(d), Finite(z)) | (Finite(z), Infinity(d)) if !is_zero(z) => Infinity(turn(d, z.arg())),
            _ => Indeterminate,
        },
        Op::Div => divide(a, b, flags),
        _ => unreachable!("not a binary op"),
    }
}

/// A parsed map, compiled for evaluation, possibly iterated.
///
/// `eval` of an iterate `f^p` applies `f` repeatedly and stops early at
/// `Infinity`, at an indeterminate value, or on landing exactly on a declared
/// puncture: `f` is undefined there, so the orbit's terminal value is
/// returned as is.
#[derive(Debug, Clone)]
pub struct CompiledMap {
    expr: Expr,
    program: Program,
    log_abs: Option<LogAbsExpr>,
    punctures: PunctureSet,
    power: u32,
}

pub fn compile(expr: Expr, punctures: PunctureSet) -> CompiledMap {
    CompiledMap::new(expr, punctures)
}

/// The iterate `f^p` of `map` (composes with any existing power).
pub fn compose_power(map: &CompiledMap, p: u32) -> CompiledMap {
    assert!(p >= 1, "compose_power needs p >= 1");
    CompiledMap { power: map.power * p, ..map.clone() }
}

impl CompiledMap {
    pub fn new(expr: Expr, punctures: PunctureSet) -> Self {
        let program = Program::new(&expr);
        let log_abs = derive_log_abs(&expr);
        Self { expr, program, log_abs, punctures, power: 1 }
    }

    pub fn parse(text: &str, punctures: PunctureSet) -> Result<Self, ParseError> {
        Ok(Self::new(parse(text)?, punctures))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn punctures(&self) -> &PunctureSet {
        &self.punctures
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn log_abs_expr(&self) -> Option<&LogAbsExpr> {
        self.log_abs.as_ref()
    }

    pub fn has_log_abs(&self) -> bool {
        self.log_abs.is_some()
    }

    /// One application of the underlying expression, ignoring `power`.
    pub fn eval_once(&self, x: SpherePoint) -> Evaluation {
        let mut flags = Flags::default();
        let image = self.program.run(x, &mut flags);
        Evaluation { image, overflow: flags.overflow, underflow: flags.underflow }
    }

    pub fn eval(&self, x: SpherePoint) -> Evaluation {
        let mut out = self.eval_once(x);
        for _ in 1..self.power {
            let next = match out.image {
                Image::Finite(z) if !self.punctures.contains(SpherePoint::Finite(z)) => {
                    self.eval_once(SpherePoint::Finite(z))
                }
                _ => break,
            };
            out = Evaluation {
                image: next.image,
                overflow: out.overflow || next.overflow,
                underflow: out.underflow || next.underflow,
            };
        }
        out
    }

    pub fn eval_complex(&self, z: Complex64) -> Evaluation {
        self.eval(SpherePoint::Finite(z))
    }

    /// `log |f(z)|` through the symbolic transform, without forming `f(z)`.
    /// For an iterate the transform is applied to the last step, which
    /// needs the penultimate value to be finite and off the punctures.
    pub fn log_abs(&self, z: Complex64) -> Option<f64> {
        let la = self.log_abs.as_ref()?;
        let mut w = z;
        for _ in 1..self.power {
            match self.eval_once(SpherePoint::Finite(w)).image {
                Image::Finite(v) if !self.punctures.contains(SpherePoint::Finite(v)) => w = v,
                _ => return None,
            }
        }
        la.eval(w)
    }
}

impl fmt::Display for CompiledMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.power == 1 {
            write!(f, "{}", self.expr)
        } else {
            write!(f, "({})^[{}]", self.expr, self.power)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(text: &str) -> CompiledMap {
        CompiledMap::parse(text, PunctureSet::punctured_plane()).unwrap()
    }

    fn finite(e: Evaluation) -> Complex64 {
        match e.image {
            Image::Finite(z) => z,
            other => panic!("expected a finite value, got {other:?}"),
        }
    }

    #[test]
    fn exp_of_directed_overflow_resolves_by_sign_of_cosine() {
        let f = map("exp(exp(z))");
        let left = f.eval_complex(Complex64::new(700.0, std::f64::consts::PI));
        assert_eq!(left.image, Image::Finite(Complex64::new(0.0, 0.0)));
        assert!(left.overflow && left.underflow);
        assert_eq!(f.eval_complex(Complex64::new(700.0, 0.0)).image, Image::Infinity);
        assert_eq!(f.eval_complex(Complex64::new(700.0, std::f64::consts::FRAC_PI_2)).image, Image::Indeterminate);
        assert_eq!(f.eval_complex(Complex64::new(700.0, 2e12)).image, Image::Indeterminate);
        // Sign and scaling carry the direction.
        assert_eq!(map("exp(-exp(z))").eval_complex(Complex64::new(700.0, 0.0)).image, Image::Finite(Complex64::new(0.0, 0.0)));
        assert_eq!(map("exp(exp(z)*2i*1i + 3)").eval_complex(Complex64::new(700.0, 0.0)).image, Image::Finite(Complex64::new(0.0, 0.0)));
        assert_eq!(map("exp(exp(z)^2)").eval_complex(Complex64::new(700.0, std::f64::consts::FRAC_PI_2)).image, Image::Finite(Complex64::new(0.0, 0.0)));
        assert_eq!(map("exp(1 - exp(z))").eval_complex(Complex64::new(700.0, 0.0)).image, Image::Finite(Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn tiny_orbit_point_underflows_instead_of_going_indeterminate() {
        let f = map("exp(exp(1/z) + z)");
        let e = f.eval_complex(Complex64::new(6.6e-13, -4.8e-13));
        assert_eq!(e.image, Image::Finite(Complex64::new(0.0, 0.0)));
        assert!(e.underflow);
    }

    #[test]
    fn exp_z_plus_inverse_examples() {
        let f = map("exp(z+1/z)");
        let v = finite(f.eval_complex(Complex64::new(1.0, 0.0)));
        assert!((v.re - 7.38905609893065).abs() < 1e-12 && v.im == 0.0);
        let e = f.eval_complex(Complex64::new(800.0, 0.0));
        assert_eq!(e.image, Image::Infinity);
        assert!(e.overflow);
        let v = finite(f.eval_complex(Complex64::new(0.0, 1.0)));
        assert_eq!(v, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn exp_argument_caps() {
        let f = map("exp(z)");
        let e = f.eval_complex(Complex64::new(-700.0, 0.0));
        assert_eq!(e.image, Image::Finite(Complex64::new(0.0, 0.0)));
        assert!(e.underflow && !e.overflow);
        assert_eq!(f.eval_complex(Complex64::new(690.5, 0.0)).image, Image::Infinity);
        let ok = finite(f.eval_complex(Complex64::new(689.0, 0.0)));
        assert!(ok.re > 1e299);
    }

    #[test]
    fn infinity_rules() {
        let f = map("exp(z+1/z)");
        assert_eq!(f.eval(SpherePoint::Infinity).image, Image::Indeterminate);
        assert_eq!(map("1/z").eval(SpherePoint::Infinity).image, Image::Finite(Complex64::new(0.0, 0.0)));
        assert_eq!(map("1/z").eval_complex(Complex64::new(0.0, 0.0)).image, Image::Infinity);
        assert_eq!(map("z - z").eval(SpherePoint::Infinity).image, Image::Indeterminate);
        assert_eq!(map("0*z").eval(SpherePoint::Infinity).image, Image::Indeterminate);
        assert_eq!(map("z/z").eval_complex(Complex64::new(0.0, 0.0)).image, Image::Indeterminate);
        assert_eq!(map("z^2").eval(SpherePoint::Infinity).image, Image::Infinity);
        assert_eq!(map("z^-2").eval(SpherePoint::Infinity).image, Image::Finite(Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn intermediate_cap() {
        let e = map("z*z/z").eval_complex(Complex64::new(1e200, 0.0));
        assert_eq!(e.image, Image::Infinity);
        assert!(e.overflow);
        let e = map("z^-2").eval_complex(Complex64::new(1e200, 0.0));
        assert_eq!(e.image, Image::Finite(Complex64::new(0.0, 0.0)));
        let v = finite(map("1/z").eval_complex(Complex64::new(1e-200, 1e-200)));
        assert!((v - Complex64::new(0.5e200, -0.5e200)).norm() / 1e200 < 1e-15);
    }

    #[test]
    fn powers_match_repeated_products() {
        let z = Complex64::new(0.7, -1.3);
        let mut p = Complex64::new(1.0, 0.0);
        for k in 1..=10 {
            p *= z;
            let got = finite(map(&format!("z^{k}")).eval_complex(z));
            assert!((got - p).norm() <= 1e-14 * p.norm(), "k = {k}");
            let inv = finite(map(&format!("z^-{k}")).eval_complex(z));
            assert!((inv * p - 1.0).norm() < 1e-13);
        }
    }

    #[test]
    fn second_iterate() {
        let f = map("exp(z+1/z)");
        let f2 = compose_power(&f, 2);
        let v = finite(f2.eval_complex(Complex64::new(1.0, 0.0)));
        assert!((v.re - 1852.6853055744).abs() < 1e-8);
        assert!(compose_power(&f, 1).eval_complex(Complex64::new(0.3, 0.2)) == f.eval_complex(Complex64::new(0.3, 0.2)));
        // f(800) = inf; the iterate stops there instead of evaluating f(inf).
        assert_eq!(f2.eval_complex(Complex64::new(800.0, 0.0)).image, Image::Infinity);
        // f(-800) underflows onto the puncture 0; the iterate stops there too.
        let e = f2.eval_complex(Complex64::new(-800.0, 0.0));
        assert_eq!(e.image, Image::Finite(Complex64::new(0.0, 0.0)));
        assert!(e.underflow);
    }

    #[test]
    fn log_abs_of_iterate_beyond_range() {
        let f = map("exp(exp(1/z)+z)");
        let f2 = compose_power(&f, 2);
        assert_eq!(f2.eval_complex(Complex64::new(-4.0, 0.0)).image, Image::Infinity);
        let l = f2.log_abs(Complex64::new(-4.0, 0.0)).unwrap();
        assert!((l - 76316296020.495).abs() / l < 1e-12);
    }
}
