//! Radial potentials `V`, `K` given as expression strings.
//!
//! Grammar: numbers, the variable `r`, the constant `e`, `+ - * /`, `^`
//! (right associative, binds tighter than unary minus on its left), the
//! functions `exp`, `min`, `max`, `sqrt`, `ln` and parentheses, e.g.
//! `"r^-2"`, `"min(r^3, 1)"`, `"max(r^6, r^9)"`, `"exp(-1/r)"`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::DomainError;
use crate::exponents::{approximate, Envelope, Rational};

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Num(f64),
    R,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Ln,
    Sqrt,
    Min,
    Max,
}

impl Expr {
    fn eval(&self, r: f64) -> f64 {
        match self {
            Expr::Num(x) => *x,
            Expr::R => r,
            Expr::Neg(a) => -a.eval(r),
            Expr::Add(a, b) => a.eval(r) + b.eval(r),
            Expr::Sub(a, b) => a.eval(r) - b.eval(r),
            Expr::Mul(a, b) => a.eval(r) * b.eval(r),
            Expr::Div(a, b) => a.eval(r) / b.eval(r),
            Expr::Pow(a, b) => {
                let (x, y) = (a.eval(r), b.eval(r));
                if y == y.round() && y.abs() < 64.0 {
                    x.powi(y as i32)
                } else {
                    x.powf(y)
                }
            }
            Expr::Call(f, args) => {
                let mut vals = args.iter().map(|a| a.eval(r));
                match f {
                    Func::Exp => vals.next().unwrap_or(f64::NAN).exp(),
                    Func::Ln => vals.next().unwrap_or(f64::NAN).ln(),
                    Func::Sqrt => vals.next().unwrap_or(f64::NAN).sqrt(),
                    Func::Min => vals.fold(f64::INFINITY, f64::min),
                    Func::Max => vals.fold(f64::NEG_INFINITY, f64::max),
                }
            }
        }
    }
}

/// Parse failure with a byte column (1-based).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("column {column}: {message}")]
pub struct ParseError {
    pub column: usize,
    pub message: String,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { column: self.pos + 1, message: message.into() })
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

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else if self.eat(b'+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => self.err("unexpected end of expression"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                let func = match name {
                    "r" => return Ok(Expr::R),
                    "e" => return Ok(Expr::Num(std::f64::consts::E)),
                    "exp" => Func::Exp,
                    "ln" => Func::Ln,
                    "sqrt" => Func::Sqrt,
                    "min" => Func::Min,
                    "max" => Func::Max,
                    _ => {
                        self.pos = start;
                        return self.err(format!("unknown identifier {name:?}"));
                    }
                };
                if !self.eat(b'(') {
                    return self.err(format!("expected '(' after {name}"));
                }
                let mut args = vec![self.expr()?];
                while self.eat(b',') {
                    args.push(self.expr()?);
                }
                if !self.eat(b')') {
                    return self.err("expected ')' or ','");
                }
                let unary = matches!(func, Func::Exp | Func::Ln | Func::Sqrt);
                if unary && args.len() != 1 {
                    return self.err(format!("{name} takes one argument"));
                }
                Ok(Expr::Call(func, args))
            }
            Some(c) => self.err(format!("unexpected character {:?}", c as char)),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match text.parse::<f64>() {
            Ok(x) => Ok(Expr::Num(x)),
            Err(_) => {
                self.pos = start;
                self.err(format!("bad number {text:?}"))
            }
        }
    }
}

/// A radial potential parsed from an expression string.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    source: String,
    expr: Expr,
}

impl Potential {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let mut p = Parser { src: source.as_bytes(), pos: 0 };
        let expr = p.expr()?;
        if p.peek().is_some() {
            return p.err("trailing input");
        }
        Ok(Self { source: source.to_string(), expr })
    }

    /// Constant potential.
    pub fn constant(c: f64) -> Self {
        Self { source: format!("{c}"), expr: Expr::Num(c) }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.expr.eval(r)
    }

    /// Potential multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            source: format!("{c}*({})", self.source),
            expr: Expr::Mul(Box::new(Expr::Num(c)), Box::new(self.expr.clone())),
        }
    }

    /// Whether this is the zero function on the sampled range.
    pub fn is_zero(&self) -> bool {
        log_samples(1e-6, 1e6, 121).all(|r| self.eval(r) == 0.0)
    }

    /// Check `V(r) >= 0` (or `K(r) > 0` when `strict`) on a log sample of
    /// `(1e-6, 1e6)`.
    pub fn check_sign(&self, strict: bool) -> Result<(), DomainError> {
        for r in log_samples(1e-6, 1e6, 241) {
            let v = self.eval(r);
            let ok = if strict { v > 0.0 } else { v >= 0.0 };
            if !(ok || v.is_infinite() && v > 0.0) {
                let want = if strict { "positive" } else { "nonnegative" };
                return Err(DomainError::Other(format!(
                    "potential {:?} is not {want} at r = {r:e} (value {v})",
                    self.source
                )));
            }
        }
        Ok(())
    }

    /// `sup_{0<r<1} r^2 V(r)` on a log sample; finite iff `V <= C / r^2`
    /// near the origin is plausible.
    pub fn hypothesis_h_constant(&self) -> f64 {
        log_samples(1e-12, 1.0, 241).map(|r| r * r * self.eval(r)).fold(0.0, f64::max)
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl std::str::FromStr for Potential {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for Potential {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Potential {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn log_samples(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

/// Slope of `log h` against `log r` between `r0` and `r1`.
fn log_slope(h: impl Fn(f64) -> f64, r0: f64, r1: f64) -> Option<f64> {
    let (a, b) = (h(r0), h(r1));
    (a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()).then(|| (b.ln() - a.ln()) / (r1.ln() - r0.ln()))
}

/// Candidate envelopes for `K / (r^α V^β)` with `β ∈ {0, 1/2, 1}`, read off
/// from log-log slopes at `r = 1e-6` (origin) and `r = 1e6` (infinity).
/// These are suggestions for the user to confirm.
pub fn suggest_envelopes(v: &Potential, k: &Potential) -> (Vec<Envelope>, Vec<Envelope>) {
    let betas = [Rational::new(0, 1), Rational::new(1, 2), Rational::new(1, 1)];
    let mut zero = Vec::new();
    let mut infinity = Vec::new();
    for beta in betas {
        let b = crate::exponents::to_f64(beta);
        let ratio = |r: f64| k.eval(r) / v.eval(r).powf(b);
        if let Some(s) = log_slope(ratio, 1e-7, 1e-6) {
            if let Ok(e) = Envelope::new(approximate(s, 12), beta) {
                zero.push(e);
            }
        }
        if let Some(s) = log_slope(ratio, 1e6, 1e7) {
            if let Ok(e) = Envelope::new(approximate(s, 12), beta) {
                infinity.push(e);
            }
        }
    }
    (zero, infinity)
}
