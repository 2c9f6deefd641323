//! Scalar basis expressions.
//!
//! An [`Expr`] is a small tree over the state variables `x1..xn` with the
//! operations needed to write down the dictionaries used for quadratic
//! embeddings: sums, products, integer powers, reciprocals, `sin`, `cos` and
//! `exp`. Values are computed by a tree walk; derivatives by forward-mode
//! dual numbers, so gradients are exact up to rounding.
//!
//! The text form is 1-indexed (`x1` is the first coordinate) while
//! [`Expr::Var`] is 0-indexed.

use std::fmt;
use std::ops::{Add, Mul};

use thiserror::Error;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Integer power; a negative exponent is a fused repeated reciprocal.
    Pow(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    /// `Inv(e) = 1/e`.
    Inv(Box<Expr>),
}

// `add`, `mul`, ... are node constructors, not operator impls
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn var(index: usize) -> Self {
        Expr::Var(index)
    }

    pub fn constant(value: f64) -> Self {
        Expr::Const(value)
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn pow(self, k: i32) -> Self {
        Expr::Pow(Box::new(self), k)
    }

    pub fn sin(self) -> Self {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Self {
        Expr::Cos(Box::new(self))
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn inv(self) -> Self {
        Expr::Inv(Box::new(self))
    }

    /// `-e`, folding literal constants.
    pub fn neg(self) -> Self {
        match self {
            Expr::Const(c) => Expr::Const(-c),
            other => Expr::mul(Expr::Const(-1.0), other),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::add(a, b.neg())
    }

    /// `c * e`.
    pub fn scale(c: f64, e: Expr) -> Self {
        Expr::mul(Expr::Const(c), e)
    }

    /// Largest variable index plus one (0 for constant expressions).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Add(a, b) | Expr::Mul(a, b) => a.arity().max(b.arity()),
            Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Inv(a) => {
                a.arity()
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_vars(x.len())?;
        self.walk::<f64>(&|i| x[i])
    }

    /// Gradient by one dual-number pass per input coordinate.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_vars(x.len())?;
        (0..x.len())
            .map(|j| {
                self.walk::<Dual>(&|i| Dual::new(x[i], if i == j { 1.0 } else { 0.0 }))
                    .map(|d| d.eps)
            })
            .collect()
    }

    /// Value and directional derivative `∇e(x)·v` in a single pass.
    pub fn eval_directional(&self, x: &[f64], v: &[f64]) -> Result<(f64, f64)> {
        if x.len() != v.len() {
            return Err(Error::input(format!(
                "direction has length {}, point has length {}",
                v.len(),
                x.len()
            )));
        }
        self.check_vars(x.len())?;
        let d = self.walk::<Dual>(&|i| Dual::new(x[i], v[i]))?;
        Ok((d.re, d.eps))
    }

    fn check_vars(&self, dim: usize) -> Result<()> {
        let arity = self.arity();
        if arity > dim {
            return Err(Error::VariableOutOfRange {
                index: arity - 1,
                dim,
            });
        }
        Ok(())
    }

    fn walk<T: Scalar>(&self, var: &impl Fn(usize) -> T) -> Result<T> {
        Ok(match self {
            Expr::Const(c) => T::constant(*c),
            Expr::Var(i) => var(*i),
            Expr::Add(a, b) => a.walk(var)? + b.walk(var)?,
            Expr::Mul(a, b) => a.walk(var)? * b.walk(var)?,
            Expr::Pow(a, k) => {
                let base = a.walk(var)?;
                if *k < 0 && base.value() == 0.0 {
                    return Err(self.domain("negative power of zero"));
                }
                base.powi(*k)
            }
            Expr::Sin(a) => a.walk(var)?.sin(),
            Expr::Cos(a) => a.walk(var)?.cos(),
            Expr::Exp(a) => a.walk(var)?.exp(),
            Expr::Inv(a) => {
                let d = a.walk(var)?;
                if d.value() == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                d.recip()
            }
        })
    }

    fn domain(&self, reason: &'static str) -> Error {
        Error::Domain {
            node: self.to_string(),
            reason,
        }
    }
}

/// Rendering is fully parenthesised so that `parse(render(e)) == e` for every tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if c.is_sign_negative() => write!(f, "(-{:?})", -c),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Add(a, b) => write!(f, "({a})+({b})"),
            Expr::Mul(a, b) => write!(f, "({a})*({b})"),
            Expr::Pow(a, k) => write!(f, "({a})^{k}"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Inv(a) => write!(f, "1/({a})"),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse(s)
    }
}

trait Scalar: Copy + Add<Output = Self> + Mul<Output = Self> {
    fn constant(c: f64) -> Self;
    fn value(self) -> f64;
    fn powi(self, k: i32) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn recip(self) -> Self;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(self) -> f64 {
        self
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn recip(self) -> Self {
        f64::recip(self)
    }
}

/// `re + eps·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub fn new(re: f64, eps: f64) -> Self {
        Dual { re, eps }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.re + rhs.re, self.eps + rhs.eps)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(self.re * rhs.re, self.re * rhs.eps + self.eps * rhs.re)
    }
}

impl Scalar for Dual {
    fn constant(c: f64) -> Self {
        Dual::new(c, 0.0)
    }
    fn value(self) -> f64 {
        self.re
    }
    fn powi(self, k: i32) -> Self {
        match k {
            0 => Dual::new(1.0, 0.0),
            1 => self,
            _ => Dual::new(
                self.re.powi(k),
                f64::from(k) * self.re.powi(k.saturating_sub(1)) * self.eps,
            ),
        }
    }
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.re.cos() * self.eps)
    }
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -self.re.sin() * self.eps)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, e * self.eps)
    }
    fn recip(self) -> Self {
        let r = self.re.recip();
        Dual::new(r, -r * r * self.eps)
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

/// Syntax error with the byte offset where parsing stopped.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at byte {offset}: expected {expected}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
}

const MAX_DEPTH: usize = 200;
const MAX_EXPONENT: i64 = 1 << 20;

/// Parses the textual grammar
///
/// ```text
/// expr   := term (('+' | '-') term)*
/// term   := factor (('*' | '/') factor)*
/// factor := '-' factor | base ('^' int)?
/// base   := number | 'x' int | fn '(' expr ')' | '(' expr ')'
/// fn     := sin | cos | exp
/// ```
///
/// Division has no node of its own: `a/b^k` lowers to `a * b^-k`, any other
/// `a/b` to `a * Inv(b)`, and a literal numerator `1` is dropped.
pub fn parse(text: &str) -> std::result::Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("operator or end of input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

/// A factor plus whether it was written as `base ^ int` at top level.
struct Factor {
    expr: Expr,
    powered: bool,
}

impl Parser<'_> {
    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            offset: self.pos,
            expected: expected.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn enter(&mut self) -> std::result::Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("shallower nesting"));
        }
        Ok(())
    }

    fn expr(&mut self) -> std::result::Result<Expr, ParseError> {
        self.enter()?;
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = Expr::add(acc, self.term()?);
            } else if self.eat(b'-') {
                acc = Expr::sub(acc, self.term()?);
            } else {
                break;
            }
        }
        self.depth -= 1;
        Ok(acc)
    }

    fn term(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut acc = self.factor()?.expr;
        loop {
            if self.eat(b'*') {
                acc = Expr::mul(acc, self.factor()?.expr);
            } else if self.eat(b'/') {
                let den = self.factor()?;
                let recip = match den.expr {
                    Expr::Pow(base, k) if den.powered => Expr::Pow(base, -k),
                    other => other.inv(),
                };
                acc = match acc {
                    Expr::Const(c) if c == 1.0 && c.is_sign_positive() => recip,
                    num => Expr::mul(num, recip),
                };
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> std::result::Result<Factor, ParseError> {
        if self.eat(b'-') {
            self.enter()?;
            let inner = self.factor()?;
            self.depth -= 1;
            return Ok(Factor {
                expr: inner.expr.neg(),
                powered: false,
            });
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let k = self.signed_int()?;
            Ok(Factor {
                expr: base.pow(k),
                powered: true,
            })
        } else {
            Ok(Factor {
                expr: base,
                powered: false,
            })
        }
    }

    fn signed_int(&mut self) -> std::result::Result<i32, ParseError> {
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        let digits = self.digits();
        if digits.is_empty() {
            self.pos = start;
            return Err(self.error("integer exponent"));
        }
        let value: i64 = digits
            .parse()
            .ok()
            .filter(|v: &i64| *v <= MAX_EXPONENT)
            .ok_or_else(|| ParseError {
                offset: start,
                expected: format!("exponent of magnitude at most {MAX_EXPONENT}"),
            })?;
        Ok((if neg { -value } else { value }) as i32)
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn base(&mut self) -> std::result::Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(b'x') => {
                self.pos += 1;
                let start = self.pos;
                let digits = self.digits();
                match digits.parse::<usize>() {
                    Ok(i) if i >= 1 && i <= MAX_EXPONENT as usize => Ok(Expr::Var(i - 1)),
                    _ => {
                        self.pos = start;
                        Err(self.error("variable index >= 1 after 'x'"))
                    }
                }
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                let build: fn(Expr) -> Expr = match name {
                    b"sin" => Expr::sin,
                    b"cos" => Expr::cos,
                    b"exp" => Expr::exp,
                    _ => {
                        self.pos = start;
                        return Err(self.error("one of sin, cos, exp, x<int>"));
                    }
                };
                if !self.eat(b'(') {
                    return Err(self.error("'(' after function name"));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("')'"));
                }
                Ok(build(arg))
            }
            _ => Err(self.error("number, variable, function or '('")),
        }
    }

    fn number(&mut self) -> std::result::Result<Expr, ParseError> {
        let start = self.pos;
        let s = self.src;
        let mut end = start;
        while end < s.len() && (s[end].is_ascii_digit() || s[end] == b'.') {
            end += 1;
        }
        if end < s.len() && (s[end] == b'e' || s[end] == b'E') {
            let mut k = end + 1;
            if k < s.len() && (s[k] == b'+' || s[k] == b'-') {
                k += 1;
            }
            if k < s.len() && s[k].is_ascii_digit() {
                while k < s.len() && s[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let text = std::str::from_utf8(&s[start..end]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = end;
                Ok(Expr::Const(v))
            }
            _ => Err(self.error("finite number")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Expr::Var(0).eval(&[3.5]).unwrap(), 3.5);
        let e = Expr::mul(
            Expr::Var(0),
            Expr::add(Expr::Const(1.0), Expr::Var(0)).pow(-2),
        );
        assert_eq!(e.eval(&[1.0]).unwrap(), 0.25);
        assert_eq!(Expr::Var(0).sin().eval(&[0.0, 7.0]).unwrap(), 0.0);
    }

    #[test]
    fn grad_examples() {
        let e = p("x1/(1+x1)^2");
        assert!(e.grad(&[1.0]).unwrap()[0].abs() < 1e-15);
        assert_eq!(Expr::Var(0).cos().grad(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let e = Expr::Var(1).pow(4);
        assert_eq!(e.grad(&[2.0, 3.0]).unwrap(), vec![0.0, 108.0]);
    }

    #[test]
    fn parse_examples() {
        assert_eq!(p("x1"), Expr::Var(0));
        assert_eq!(p("sin(x1)*x2"), Expr::mul(Expr::Var(0).sin(), Expr::Var(1)));
        assert_eq!(
            p("x1/(1+x1)^2"),
            Expr::mul(
                Expr::Var(0),
                Expr::add(Expr::Const(1.0), Expr::Var(0)).pow(-2)
            )
        );
    }

    #[test]
    fn division_lowering() {
        assert_eq!(p("1/(1+x1)"), Expr::add(Expr::Const(1.0), Expr::Var(0)).inv());
        assert_eq!(p("1/x1^3"), Expr::Var(0).pow(-3));
        // parenthesised power is an opaque denominator
        assert_eq!(p("1/(x1^3)"), Expr::Var(0).pow(3).inv());
        assert_eq!(p("x1 - 2"), Expr::add(Expr::Var(0), Expr::Const(-2.0)));
        assert_eq!(p("-x2"), Expr::mul(Expr::Const(-1.0), Expr::Var(1)));
    }

    #[test]
    fn parse_errors_carry_offset() {
        let err = parse("sin(x1").unwrap_err();
        assert_eq!(err.offset, 6);
        let err = parse("x0").unwrap_err();
        assert_eq!(err.offset, 1);
        let err = parse("tan(x1)").unwrap_err();
        assert_eq!(err.offset, 0);
        assert!(parse("x1 +").is_err());
        assert!(parse("x1^").is_err());
        assert!(parse("x1^99999999999").is_err());
        assert!(parse("1e999").is_err());
        assert!(parse("").is_err());
        assert!(parse("x1 x2").is_err());
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let s = "(".repeat(100_000);
        assert!(parse(&s).is_err());
        let s = "-".repeat(100_000) + "x1";
        assert!(parse(&s).is_err());
    }

    #[test]
    fn inv_at_zero_is_domain_error() {
        let e = p("1/x1");
        match e.eval(&[0.0]) {
            Err(Error::Domain { node, .. }) => assert_eq!(node, "1/(x1)"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(p("x1^-2").grad(&[0.0]).is_err());
    }

    #[test]
    fn variable_out_of_range() {
        assert!(matches!(
            p("x3").eval(&[1.0, 2.0]),
            Err(Error::VariableOutOfRange { index: 2, dim: 2 })
        ));
    }

    #[test]
    fn render_round_trips() {
        for s in [
            "x1/(1+x1)^2",
            "-0.5*sin(x2)-x1",
            "1/(x1^2)",
            "exp(-x1)*cos(x1+x2)^-3",
            "1e-7*x1",
            "-0",
        ] {
            let e = p(s);
            assert_eq!(p(&e.to_string()), e, "{s} -> {e}");
        }
    }

    #[test]
    fn directional_matches_grad() {
        let e = p("sin(x1)*x2^3 + exp(x1/(2+x2))");
        let x = [0.3, -0.7];
        let v = [1.5, -2.0];
        let g = e.grad(&x).unwrap();
        let (val, dd) = e.eval_directional(&x, &v).unwrap();
        assert_eq!(val, e.eval(&x).unwrap());
        assert!((dd - (g[0] * v[0] + g[1] * v[1])).abs() < 1e-14);
    }
}
