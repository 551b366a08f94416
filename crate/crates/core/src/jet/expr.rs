//! Small arithmetic expression language for regressors and plant signals.
//!
//! Variables are `x1 .. xn` and `t`; the constant `pi` is predefined.
//! Supported functions: `sin cos tan exp ln sqrt tanh atan abs sign psi`,
//! where `psi(s) = s / sqrt(1 + s^2)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::real::{sign, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Tanh,
    Atan,
    Abs,
    Sign,
    Psi,
}

impl Func {
    const ALL: [(Func, &'static str); 11] = [
        (Func::Sin, "sin"),
        (Func::Cos, "cos"),
        (Func::Tan, "tan"),
        (Func::Exp, "exp"),
        (Func::Ln, "ln"),
        (Func::Sqrt, "sqrt"),
        (Func::Tanh, "tanh"),
        (Func::Atan, "atan"),
        (Func::Abs, "abs"),
        (Func::Sign, "sign"),
        (Func::Psi, "psi"),
    ];

    fn lookup(name: &str) -> Option<Func> {
        Func::ALL.iter().find(|(_, n)| *n == name).map(|(f, _)| *f)
    }

    pub fn name(self) -> &'static str {
        Func::ALL.iter().find(|(f, _)| *f == self).unwrap().1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based state index.
    State(usize),
    Time,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some(tok) => Err(Error::Parse {
                column: tok.column,
                message: format!("unexpected `{}`", tok.kind),
            }),
        }
    }

    pub fn state(index: usize) -> Expr {
        Expr::State(index)
    }

    /// Highest zero-based state index referenced, if any.
    pub fn max_state_index(&self) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Time => None,
            Expr::State(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_state_index(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.max_state_index().max(b.max_state_index())
            }
        }
    }

    pub fn uses_time(&self) -> bool {
        match self {
            Expr::Time => true,
            Expr::Const(_) | Expr::State(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses_time(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.uses_time() || b.uses_time()
            }
        }
    }

    pub fn eval<S: Real>(&self, x: &[S], t: &S) -> Result<S> {
        Ok(match self {
            Expr::Const(c) => S::constant(*c),
            Expr::State(i) => x
                .get(*i)
                .cloned()
                .ok_or_else(|| Error::dim(format!("x{} requested, state has {} entries", i + 1, x.len())))?,
            Expr::Time => t.clone(),
            Expr::Neg(a) => -a.eval(x, t)?,
            Expr::Add(a, b) => a.eval(x, t)? + b.eval(x, t)?,
            Expr::Sub(a, b) => a.eval(x, t)? - b.eval(x, t)?,
            Expr::Mul(a, b) => a.eval(x, t)? * b.eval(x, t)?,
            Expr::Div(a, b) => a.eval(x, t)?.try_div(b.eval(x, t)?)?,
            Expr::Pow(a, b) => pow(a.eval(x, t)?, b, x, t)?,
            Expr::Call(f, a) => call(*f, a.eval(x, t)?)?,
        })
    }

    pub fn eval_f64(&self, x: &[f64], t: f64) -> Result<f64> {
        self.eval(x, &t)
    }

    /// Conservative enclosure of the expression over a box.
    pub fn bounds(&self, x: &[Interval], t: Interval) -> Interval {
        match self {
            Expr::Const(c) => Interval::point(*c),
            Expr::State(i) => x.get(*i).copied().unwrap_or(Interval::ENTIRE),
            Expr::Time => t,
            Expr::Neg(a) => a.bounds(x, t).neg(),
            Expr::Add(a, b) => a.bounds(x, t).add(b.bounds(x, t)),
            Expr::Sub(a, b) => a.bounds(x, t).add(b.bounds(x, t).neg()),
            Expr::Mul(a, b) => a.bounds(x, t).mul(b.bounds(x, t)),
            Expr::Div(a, b) => a.bounds(x, t).div(b.bounds(x, t)),
            Expr::Pow(a, b) => {
                let base = a.bounds(x, t);
                match integer_exponent(b) {
                    Some(k) => base.powi(k),
                    None => match constant_value(b) {
                        Some(c) if c > 0.0 => base.monotone(|v| v.max(0.0).powf(c)),
                        _ => Interval::ENTIRE,
                    },
                }
            }
            Expr::Call(f, a) => {
                let v = a.bounds(x, t);
                match f {
                    Func::Sin | Func::Cos => Interval::new(-1.0, 1.0),
                    Func::Tan => Interval::ENTIRE,
                    Func::Exp => v.monotone(f64::exp),
                    Func::Ln => v.monotone(|s| if s <= 0.0 { f64::NEG_INFINITY } else { s.ln() }),
                    Func::Sqrt => v.monotone(|s| s.max(0.0).sqrt()),
                    Func::Tanh => v.monotone(f64::tanh),
                    Func::Atan => v.monotone(f64::atan),
                    Func::Psi => v.monotone(psi_f64),
                    Func::Sign => v.monotone(sign),
                    Func::Abs => v.abs(),
                }
            }
        }
    }
}

impl FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Expr> {
        Expr::parse(s)
    }
}

fn psi_f64(s: f64) -> f64 {
    if s.is_infinite() {
        return s.signum();
    }
    s / (1.0 + s * s).sqrt()
}

fn constant_value(e: &Expr) -> Option<f64> {
    if e.max_state_index().is_some() || e.uses_time() {
        return None;
    }
    e.eval_f64(&[], 0.0).ok()
}

fn integer_exponent(e: &Expr) -> Option<i32> {
    constant_value(e)
        .filter(|c| c.fract() == 0.0 && c.abs() <= 64.0)
        .map(|c| c as i32)
}

fn pow<S: Real>(base: S, exponent: &Expr, x: &[S], t: &S) -> Result<S> {
    if let Some(k) = integer_exponent(exponent) {
        if k < 0 && base.primal() == 0.0 {
            return Err(Error::DivisionByZero);
        }
        return Ok(base.powi(k));
    }
    if base.primal() <= 0.0 {
        return Err(Error::Domain {
            what: "non-integer power",
            value: base.primal(),
        });
    }
    if let Some(c) = constant_value(exponent) {
        return Ok(base.powf(c));
    }
    Ok((exponent.eval(x, t)? * base.ln()).exp())
}

fn call<S: Real>(f: Func, v: S) -> Result<S> {
    let p = v.primal();
    Ok(match f {
        Func::Sin => v.sin(),
        Func::Cos => v.cos(),
        Func::Tan => {
            if p.cos() == 0.0 {
                return Err(Error::Domain { what: "tan", value: p });
            }
            v.tan()
        }
        Func::Exp => v.exp(),
        Func::Ln => {
            if p <= 0.0 {
                return Err(Error::Domain { what: "ln", value: p });
            }
            v.ln()
        }
        Func::Sqrt => {
            if p < 0.0 {
                return Err(Error::Domain { what: "sqrt", value: p });
            }
            v.sqrt()
        }
        Func::Tanh => v.tanh(),
        Func::Atan => v.atan(),
        Func::Abs => v.abs(),
        Func::Sign => S::constant(sign(p)),
        Func::Psi => v.clone().try_div((v.square() + 1.0).sqrt())?,
    })
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 => write!(f, "(-{})", -c),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::State(i) => write!(f, "x{}", i + 1),
            Expr::Time => f.write_str("t"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn neg(self) -> Self {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    fn add(self, o: Self) -> Self {
        let lo = self.lo + o.lo;
        let hi = self.hi + o.hi;
        if lo.is_nan() || hi.is_nan() {
            return Interval::ENTIRE;
        }
        Interval { lo, hi }
    }

    fn mul(self, o: Self) -> Self {
        let prod = |a: f64, b: f64| if a == 0.0 || b == 0.0 { 0.0 } else { a * b };
        let c = [
            prod(self.lo, o.lo),
            prod(self.lo, o.hi),
            prod(self.hi, o.lo),
            prod(self.hi, o.hi),
        ];
        Interval {
            lo: c.iter().copied().fold(f64::INFINITY, f64::min),
            hi: c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn div(self, o: Self) -> Self {
        if o.contains(0.0) {
            return Interval::ENTIRE;
        }
        self.mul(Interval {
            lo: 1.0 / o.hi,
            hi: 1.0 / o.lo,
        })
    }

    fn abs(self) -> Self {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            Interval {
                lo: 0.0,
                hi: self.hi.max(-self.lo),
            }
        }
    }

    fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Interval::point(1.0);
        }
        if k < 0 {
            return Interval::point(1.0).div(self.powi(-k));
        }
        if k % 2 == 1 {
            return self.monotone(|v| v.powi(k));
        }
        let a = self.abs();
        a.monotone(|v| v.powi(k))
    }

    /// Image under a non-decreasing function.
    fn monotone(self, f: impl Fn(f64) -> f64) -> Self {
        Interval {
            lo: f(self.lo),
            hi: f(self.hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(v) => write!(f, "{v}"),
            TokenKind::Ident(s) => f.write_str(s),
            TokenKind::Op(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                column,
                message: format!("malformed number `{text}`"),
            })?;
            out.push(Token {
                kind: TokenKind::Num(v),
                column,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(chars[start..i].iter().collect()),
                column,
            });
        } else if "+-*/^()".contains(c) {
            out.push(Token {
                kind: TokenKind::Op(c),
                column,
            });
            i += 1;
        } else {
            return Err(Error::Parse {
                column,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn end_column(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.column + 1)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if matches!(self.peek(), Some(Token { kind: TokenKind::Op(c), .. }) if *c == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat_op('^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(Error::Parse {
                column: self.end_column(),
                message: "unexpected end of expression".into(),
            });
        };
        self.pos += 1;
        match tok.kind {
            TokenKind::Num(v) => Ok(Expr::Const(v)),
            TokenKind::Op('(') => {
                let e = self.expr()?;
                self.expect_close(tok.column)?;
                Ok(e)
            }
            TokenKind::Op(c) => Err(Error::Parse {
                column: tok.column,
                message: format!("unexpected `{c}`"),
            }),
            TokenKind::Ident(name) => self.identifier(&name, tok.column),
        }
    }

    fn expect_close(&mut self, open_column: usize) -> Result<()> {
        if self.eat_op(')') {
            Ok(())
        } else {
            Err(Error::Parse {
                column: self.peek().map_or(self.end_column(), |t| t.column),
                message: format!("missing `)` for `(` at column {open_column}"),
            })
        }
    }

    fn identifier(&mut self, name: &str, column: usize) -> Result<Expr> {
        if name == "t" {
            return Ok(Expr::Time);
        }
        if name == "pi" {
            return Ok(Expr::Const(PI));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if let Ok(i) = digits.parse::<usize>() {
                if i == 0 {
                    return Err(Error::Parse {
                        column,
                        message: "states are numbered from x1".into(),
                    });
                }
                return Ok(Expr::State(i - 1));
            }
        }
        if matches!(self.peek(), Some(Token { kind: TokenKind::Op('('), .. })) {
            let Some(func) = Func::lookup(name) else {
                return Err(Error::UnsupportedFunction(name.to_string()));
            };
            let open = self.peek().unwrap().column;
            self.pos += 1;
            let arg = self.expr()?;
            self.expect_close(open)?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        Err(Error::Parse {
            column,
            message: format!("unknown identifier `{name}`"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{evaluate_with_gradient, Seed, SeedRegistry};

    fn eval(src: &str, x: &[f64], t: f64) -> f64 {
        Expr::parse(src).unwrap().eval_f64(x, t).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[], 0.0), 7.0);
        assert_eq!(eval("-2^2", &[], 0.0), -4.0);
        assert_eq!(eval("2^3^2", &[], 0.0), 512.0);
        assert_eq!(eval("8 / 4 / 2", &[], 0.0), 1.0);
        assert_eq!(eval("2 * -x1", &[3.0], 0.0), -6.0);
        assert_eq!(eval("1.5e-1 * 2E1", &[], 0.0), 3.0);
    }

    #[test]
    fn showcase_signals() {
        let theta = "2 + 0.8 * sin(t) + sin(x1 * x2) + 0.2 * sin(x1 * t) + sign(sin(t))";
        assert!((eval(theta, &[1.0, -1.0], 0.0) - 1.158_529_015_192_103_4).abs() < 1e-15);
        let b = "2 + 0.1 * cos(x1) + sign(x1 * x2)";
        assert!((eval(b, &[1.0, -1.0], 0.0) - (1.0 + 0.1 * 1f64.cos())).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_columns() {
        match Expr::parse("1 + * 2") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Expr::parse("(x1 + 2"), Err(Error::Parse { .. })));
        assert_eq!(
            Expr::parse("erf(x1)"),
            Err(Error::UnsupportedFunction("erf".into()))
        );
        assert!(matches!(Expr::parse("y + 1"), Err(Error::Parse { column: 1, .. })));
    }

    #[test]
    fn domain_errors_instead_of_nan() {
        let e = Expr::parse("ln(x1)").unwrap();
        assert!(matches!(e.eval_f64(&[-1.0], 0.0), Err(Error::Domain { .. })));
        let d = Expr::parse("1 / x1").unwrap();
        assert_eq!(d.eval_f64(&[0.0], 0.0), Err(Error::DivisionByZero));
        let s = Expr::parse("x3").unwrap();
        assert!(matches!(s.eval_f64(&[1.0], 0.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn display_round_trips() {
        for src in ["-x1^2 + 3 * sin(t) / (1 + x2)", "psi(x1) - (-2)", "x1^-2"] {
            let e = Expr::parse(src).unwrap();
            assert_eq!(Expr::parse(&e.to_string()).unwrap(), e, "{src}");
        }
    }

    #[test]
    fn gradient_through_expressions() {
        let e = Expr::parse("x1 * exp(x2) + psi(x1)").unwrap();
        let reg = SeedRegistry::new([Seed::State(0), Seed::State(1)]).unwrap();
        let (_, g) = evaluate_with_gradient(&reg, &[0.5, 0.2], |s| {
            e.eval(s, &crate::jet::J1::constant(0.0))
        })
        .unwrap();
        let dpsi = (1.0f64 + 0.25).powf(-1.5);
        assert!((g[0] - (0.2f64.exp() + dpsi)).abs() < 1e-14);
        assert!((g[1] - 0.5 * 0.2f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn interval_bounds_enclose_showcase_gain() {
        let b = Expr::parse("2 + 0.1 * cos(x1) + sign(x1 * x2)").unwrap();
        let r = b.bounds(&[Interval::ENTIRE, Interval::ENTIRE], Interval::ENTIRE);
        assert!((r.lo - 0.9).abs() < 1e-12 && (r.hi - 3.1).abs() < 1e-12, "{r:?}");
        let sq = Expr::parse("x1^2 - 1").unwrap();
        let r = sq.bounds(&[Interval::new(-2.0, 1.0)], Interval::point(0.0));
        assert_eq!((r.lo, r.hi), (-1.0, 3.0));
    }

    #[test]
    fn dependency_queries() {
        let e = Expr::parse("x1 * x3 + t").unwrap();
        assert_eq!(e.max_state_index(), Some(2));
        assert!(e.uses_time());
        assert_eq!(Expr::parse("pi").unwrap().max_state_index(), None);
    }
}
