//! Coefficient expressions: a small complex-valued grammar over one variable `x`.
//!
//! Grammar (precedence low to high): `+ -`, `* /`, unary `-`, `^` (right
//! associative). Primaries are numeric literals (an optional `j` suffix marks
//! an imaginary literal), `x`, `pi`, `e`, `j`, parenthesised expressions and
//! the calls `sin cos tan sinh cosh exp log sqrt abs`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn apply(self, z: Complex64) -> std::result::Result<Complex64, String> {
        Ok(match self {
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Tan => {
                let c = z.cos();
                if c == Complex64::new(0.0, 0.0) {
                    return Err("tan pole".into());
                }
                z.sin() / c
            }
            Func::Sinh => z.sinh(),
            Func::Cosh => z.cosh(),
            Func::Exp => z.exp(),
            Func::Log => {
                if z == Complex64::new(0.0, 0.0) {
                    return Err("log of zero".into());
                }
                z.ln()
            }
            Func::Sqrt => z.sqrt(),
            Func::Abs => Complex64::new(z.norm(), 0.0),
        })
    }
}

/// Definite integral `∫_lower^x integrand(t) dt`, evaluated by composite
/// Gauss-Legendre quadrature along the straight path from `lower` to `x`.
/// Not part of the surface grammar; produced by coefficient transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub integrand: Expr,
    pub lower: f64,
    pub panel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Complex64),
    X,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Integral(Box<Integral>),
}

const INTEGRAL_NODES: usize = 8;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl Expr {
    pub fn constant(z: Complex64) -> Expr {
        Expr::Const(z)
    }

    pub fn real(v: f64) -> Expr {
        Expr::Const(c(v))
    }

    pub fn zero() -> Expr {
        Expr::real(0.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(z) if *z == c(0.0))
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(z) if *z == c(1.0))
    }

    fn as_const(&self) -> Option<Complex64> {
        match self {
            Expr::Const(z) => Some(*z),
            _ => None,
        }
    }

    /// Whether the expression depends on `x` at all.
    pub fn depends_on_x(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::X | Expr::Integral(_) => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on_x(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.depends_on_x() || b.depends_on_x(),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(z) => Expr::Const(c(0.0) - z),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return Expr::neg(b);
        }
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if a.is_zero() && !b.is_zero() {
            return Expr::zero();
        }
        if b.is_one() {
            return a;
        }
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != c(0.0) => Expr::Const(x / y),
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return Expr::real(1.0);
        }
        if b.is_one() {
            return a;
        }
        Expr::Pow(Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    pub fn integral(integrand: Expr, lower: f64, panel: f64) -> Expr {
        Expr::Integral(Box::new(Integral {
            integrand,
            lower,
            panel,
        }))
    }

    /// Evaluates at `x`. Every intermediate must be finite.
    pub fn eval(&self, x: Complex64) -> std::result::Result<Complex64, String> {
        let v = match self {
            Expr::Const(z) => *z,
            Expr::X => x,
            // 0 - z keeps a +0 imaginary part on real inputs, so that
            // sqrt(-x) and log(-x) land on the upper side of the cut.
            Expr::Neg(a) => c(0.0) - a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let num = a.eval(x)?;
                let den = b.eval(x)?;
                if den == c(0.0) {
                    return Err("division by zero".into());
                }
                num / den
            }
            Expr::Pow(a, b) => power(a.eval(x)?, b.eval(x)?)?,
            Expr::Call(f, a) => f.apply(a.eval(x)?)?,
            Expr::Integral(int) => int.eval(x)?,
        };
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err("non-finite result".into())
        }
    }

    /// Symbolic derivative with respect to `x`.
    pub fn derivative(&self) -> Result<Expr> {
        Ok(match self {
            Expr::Const(_) => Expr::zero(),
            Expr::X => Expr::real(1.0),
            Expr::Neg(a) => Expr::neg(a.derivative()?),
            Expr::Add(a, b) => Expr::add(a.derivative()?, b.derivative()?),
            Expr::Sub(a, b) => Expr::sub(a.derivative()?, b.derivative()?),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.derivative()?, (**b).clone()),
                Expr::mul((**a).clone(), b.derivative()?),
            ),
            Expr::Div(a, b) => {
                let num = Expr::sub(
                    Expr::mul(a.derivative()?, (**b).clone()),
                    Expr::mul((**a).clone(), b.derivative()?),
                );
                Expr::div(num, Expr::pow((**b).clone(), Expr::real(2.0)))
            }
            Expr::Pow(a, b) => {
                let da = a.derivative()?;
                if !b.depends_on_x() {
                    // d(u^p) = p u^(p-1) u'
                    let pm1 = Expr::sub((**b).clone(), Expr::real(1.0));
                    Expr::mul(
                        Expr::mul((**b).clone(), Expr::pow((**a).clone(), pm1)),
                        da,
                    )
                } else {
                    // d(u^v) = u^v (v' log u + v u'/u)
                    let db = b.derivative()?;
                    let t1 = Expr::mul(db, Expr::call(Func::Log, (**a).clone()));
                    let t2 = Expr::div(Expr::mul((**b).clone(), da), (**a).clone());
                    Expr::mul(self.clone(), Expr::add(t1, t2))
                }
            }
            Expr::Call(f, a) => {
                let u = (**a).clone();
                let du = a.derivative()?;
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, u),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, u)),
                    Func::Tan => Expr::div(
                        Expr::real(1.0),
                        Expr::pow(Expr::call(Func::Cos, u), Expr::real(2.0)),
                    ),
                    Func::Sinh => Expr::call(Func::Cosh, u),
                    Func::Cosh => Expr::call(Func::Sinh, u),
                    Func::Exp => Expr::call(Func::Exp, u),
                    Func::Log => Expr::div(Expr::real(1.0), u),
                    Func::Sqrt => Expr::div(
                        Expr::real(0.5),
                        Expr::call(Func::Sqrt, u),
                    ),
                    Func::Abs => {
                        return Err(Error::Unsupported(format!(
                            "abs({a}) is not analytic and has no symbolic derivative"
                        )))
                    }
                };
                Expr::mul(outer, du)
            }
            Expr::Integral(int) => int.integrand.clone(),
        })
    }

    fn fmt_into(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(z) => fmt_const(*z, f),
            Expr::X => f.write_str("x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Integral(int) => {
                write!(f, "integral({}, {:?}, x)", int.integrand, int.lower)
            }
        }
    }
}

fn fmt_const(z: Complex64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    // Negative values are printed as unary minus so that the output reparses
    // to a value with identical bits.
    let real = |v: f64, f: &mut fmt::Formatter<'_>| {
        if v < 0.0 {
            write!(f, "(-{:?})", -v)
        } else {
            write!(f, "{v:?}")
        }
    };
    if z.im == 0.0 {
        return real(z.re, f);
    }
    let imag = |v: f64, f: &mut fmt::Formatter<'_>| {
        if v < 0.0 {
            write!(f, "(-{:?}j)", -v)
        } else {
            write!(f, "{v:?}j")
        }
    };
    if z.re == 0.0 {
        return imag(z.im, f);
    }
    f.write_str("(")?;
    real(z.re, f)?;
    f.write_str(" + ")?;
    imag(z.im, f)?;
    f.write_str(")")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_into(f)
    }
}

impl Integral {
    fn eval(&self, x: Complex64) -> std::result::Result<Complex64, String> {
        let lo = c(self.lower);
        let span = x - lo;
        if span == c(0.0) {
            return Ok(c(0.0));
        }
        let panels = ((span.norm() / self.panel).ceil() as usize).max(1);
        let rule = quad::GaussLegendre::new(INTEGRAL_NODES);
        let width = span / panels as f64;
        let mut acc = c(0.0);
        for p in 0..panels {
            let start = lo + width * p as f64;
            for (t, w) in rule.nodes_on(0.0, 1.0) {
                acc += self.integrand.eval(start + width * t)? * w;
            }
        }
        Ok(acc * width)
    }
}

fn power(base: Complex64, exp: Complex64) -> std::result::Result<Complex64, String> {
    if exp.im == 0.0 && exp.re.fract() == 0.0 && exp.re.abs() <= 1024.0 {
        let n = exp.re as i32;
        if n < 0 {
            if base == c(0.0) {
                return Err("division by zero".into());
            }
            return Ok(c(1.0) / base.powi(-n));
        }
        return Ok(base.powi(n));
    }
    if base == c(0.0) {
        if exp.re > 0.0 {
            return Ok(c(0.0));
        }
        return Err("zero raised to a non-positive power".into());
    }
    Ok(base.powc(exp))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Num(v, _) => write!(f, "number {v}"),
            Tok::Ident(name) => write!(f, "'{name}'"),
            Tok::Op(c) => write!(f, "'{c}'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

struct Lexer<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    src: &'a str,
}

/// Parse failure with a 1-based character column.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseFailure {
    pub column: usize,
    pub message: String,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.char_indices().collect(),
            pos: 0,
            src,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, ch)| ch)
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).map(|&(_, ch)| ch)
    }

    fn byte(&self, pos: usize) -> usize {
        self.chars.get(pos).map_or(self.src.len(), |&(b, _)| b)
    }

    fn next(&mut self) -> std::result::Result<(usize, Tok), ParseFailure> {
        while matches!(self.peek(), Some(ch) if ch.is_whitespace()) {
            self.pos += 1;
        }
        let col = self.pos + 1;
        let Some(ch) = self.peek() else {
            return Ok((col, Tok::End));
        };
        if ch.is_ascii_digit() || ch == '.' {
            return self.number(col).map(|t| (col, t));
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let start = self.pos;
            while matches!(self.peek(), Some(ch) if ch.is_ascii_alphanumeric() || ch == '_') {
                self.pos += 1;
            }
            let text = &self.src[self.byte(start)..self.byte(self.pos)];
            return Ok((col, Tok::Ident(text.to_string())));
        }
        self.pos += 1;
        let tok = match ch {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(ch),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            other => {
                return Err(ParseFailure {
                    column: col,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        Ok((col, tok))
    }

    fn number(&mut self, col: usize) -> std::result::Result<Tok, ParseFailure> {
        let start = self.pos;
        while matches!(self.peek(), Some(ch) if ch.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some('.') {
            self.pos += 1;
            while matches!(self.peek(), Some(ch) if ch.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let signed = matches!(self.peek_at(1), Some('+' | '-'));
            let digit_at = if signed { 2 } else { 1 };
            if matches!(self.peek_at(digit_at), Some(ch) if ch.is_ascii_digit()) {
                self.pos += digit_at;
                while matches!(self.peek(), Some(ch) if ch.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text = &self.src[self.byte(start)..self.byte(self.pos)];
        let value: f64 = text.parse().map_err(|_| ParseFailure {
            column: col,
            message: format!("malformed number '{text}'"),
        })?;
        let imaginary = self.peek() == Some('j')
            && !matches!(self.peek_at(1), Some(ch) if ch.is_ascii_alphanumeric() || ch == '_');
        if imaginary {
            self.pos += 1;
        }
        Ok(Tok::Num(value, imaginary))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    col: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> std::result::Result<Self, ParseFailure> {
        let mut lexer = Lexer::new(src);
        let (col, tok) = lexer.next()?;
        Ok(Parser { lexer, tok, col })
    }

    fn bump(&mut self) -> std::result::Result<(), ParseFailure> {
        let (col, tok) = self.lexer.next()?;
        self.tok = tok;
        self.col = col;
        Ok(())
    }

    fn fail<T>(&self, message: impl Into<String>) -> std::result::Result<T, ParseFailure> {
        Err(ParseFailure {
            column: self.col,
            message: message.into(),
        })
    }

    fn expr(&mut self) -> std::result::Result<Expr, ParseFailure> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Op('+') => {
                    self.bump()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> std::result::Result<Expr, ParseFailure> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Tok::Op('*') => {
                    self.bump()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.bump()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> std::result::Result<Expr, ParseFailure> {
        match self.tok {
            Tok::Op('-') => {
                self.bump()?;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> std::result::Result<Expr, ParseFailure> {
        let base = self.primary()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> std::result::Result<Expr, ParseFailure> {
        match self.tok.clone() {
            Tok::Num(v, imaginary) => {
                self.bump()?;
                Ok(Expr::Const(if imaginary {
                    Complex64::new(0.0, v)
                } else {
                    c(v)
                }))
            }
            Tok::Ident(name) => {
                let col = self.col;
                self.bump()?;
                match name.as_str() {
                    "x" => Ok(Expr::X),
                    "pi" => Ok(Expr::real(std::f64::consts::PI)),
                    "e" => Ok(Expr::real(std::f64::consts::E)),
                    "j" => Ok(Expr::Const(Complex64::new(0.0, 1.0))),
                    other => {
                        let Some(func) = Func::from_name(other) else {
                            return Err(ParseFailure {
                                column: col,
                                message: format!("unknown identifier '{other}'"),
                            });
                        };
                        if self.tok != Tok::LParen {
                            return self.fail(format!("expected '(' after {other}"));
                        }
                        self.bump()?;
                        let arg = self.expr()?;
                        if self.tok != Tok::RParen {
                            return self.fail("expected ')'");
                        }
                        self.bump()?;
                        Ok(Expr::Call(func, Box::new(arg)))
                    }
                }
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                if self.tok != Tok::RParen {
                    return self.fail("expected ')'");
                }
                self.bump()?;
                Ok(inner)
            }
            Tok::End => self.fail("unexpected end of expression"),
            other => self.fail(format!("unexpected {other}")),
        }
    }
}

/// Parses an expression; trailing input is an error.
pub fn parse_expr(src: &str) -> std::result::Result<Expr, ParseFailure> {
    let mut parser = Parser::new(src)?;
    let expr = parser.expr()?;
    if parser.tok != Tok::End {
        return parser.fail("unexpected trailing input");
    }
    Ok(expr)
}

/// One coefficient function `a_m(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffFn {
    expr: Expr,
    source_text: String,
}

impl CoeffFn {
    pub fn parse(text: &str) -> Result<CoeffFn> {
        let expr = parse_expr(text).map_err(|e| Error::Syntax {
            line: 1,
            column: e.column,
            message: e.message,
        })?;
        Ok(CoeffFn {
            expr,
            source_text: text.trim().to_string(),
        })
    }

    pub fn from_expr(expr: Expr) -> CoeffFn {
        let source_text = expr.to_string();
        CoeffFn { expr, source_text }
    }

    /// Keeps `text` as the source form of an already parsed `expr`.
    pub fn from_parts(expr: Expr, text: &str) -> CoeffFn {
        CoeffFn {
            expr,
            source_text: text.trim().to_string(),
        }
    }

    pub fn constant(z: Complex64) -> CoeffFn {
        CoeffFn::from_expr(Expr::Const(z))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    /// Canonical, fully parenthesised text that reparses to the same tree.
    pub fn canonical_text(&self) -> String {
        self.expr.to_string()
    }

    pub fn is_identically_zero(&self) -> bool {
        self.expr.is_zero()
    }

    pub fn eval(&self, x: Complex64) -> Result<Complex64> {
        self.expr.eval(x).map_err(|message| Error::Eval {
            index: None,
            x,
            message,
        })
    }

    pub fn eval_real(&self, x: f64) -> Result<Complex64> {
        self.eval(c(x))
    }

    pub fn derivative(&self) -> Result<CoeffFn> {
        Ok(CoeffFn::from_expr(self.expr.derivative()?))
    }
}

impl fmt::Display for CoeffFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(src: &str, x: f64) -> Complex64 {
        parse_expr(src).unwrap().eval(c(x)).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("2^3^2", 0.0), c(512.0));
        assert_eq!(ev("-x^2", 3.0), c(-9.0));
        assert_eq!(ev("2^-1", 0.0), c(0.5));
        assert_eq!(ev("1 - 2 - 3", 0.0), c(-4.0));
        assert_eq!(ev("8 / 4 / 2", 0.0), c(1.0));
        assert_eq!(ev("2 + 3 * x", 2.0), c(8.0));
    }

    #[test]
    fn constants_and_imaginary_literals() {
        assert_eq!(ev("j*j", 0.0), c(-1.0));
        assert_eq!(ev("2j", 0.0), Complex64::new(0.0, 2.0));
        assert_eq!(ev("1.5e-3j + 1", 0.0), Complex64::new(1.0, 1.5e-3));
        assert_eq!(ev("pi", 0.0), c(std::f64::consts::PI));
        assert_eq!(ev("e", 0.0), c(std::f64::consts::E));
        assert_eq!(ev("2*e", 0.0), c(2.0 * std::f64::consts::E));
        assert!(parse_expr("2e").is_err());
    }

    #[test]
    fn functions_use_principal_branches() {
        let z = ev("sqrt(-4)", 0.0);
        assert!((z - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        let l = ev("log(-1)", 0.0);
        assert!((l - Complex64::new(0.0, std::f64::consts::PI)).norm() < 1e-15);
        assert_eq!(ev("2 + sin(x)", 0.0), c(2.0));
        assert_eq!(ev("abs(3 - 4j)", 0.0), c(5.0));
    }

    #[test]
    fn domain_errors_are_reported() {
        let e = parse_expr("1/x").unwrap();
        assert!(e.eval(c(0.0)).is_err());
        let e = parse_expr("log(x)").unwrap();
        assert!(e.eval(c(0.0)).is_err());
        let e = parse_expr("x^-2").unwrap();
        assert!(e.eval(c(0.0)).is_err());
        let e = parse_expr("exp(x)").unwrap();
        assert!(e.eval(c(1000.0)).is_err());
    }

    #[test]
    fn syntax_errors_carry_columns() {
        let err = parse_expr("1 + foo(x)").unwrap_err();
        assert_eq!(err.column, 5);
        let err = parse_expr("(1 + x").unwrap_err();
        assert_eq!(err.column, 7);
        let err = parse_expr("1 $ 2").unwrap_err();
        assert_eq!(err.column, 3);
        assert!(parse_expr("sin x").is_err());
        assert!(parse_expr("").is_err());
        assert!(parse_expr("1 2").is_err());
    }

    #[test]
    fn derivatives_match_central_differences() {
        let cases = [
            "x^3 - 2*x",
            "sin(x)*exp(-x)",
            "1/(1 + x^2)",
            "sqrt(2 + x)",
            "log(3 + x)",
            "tan(x/3)",
            "sinh(x) + cosh(2*x)",
            "(1 + x)^x",
            "-1/x^4",
            "2^x",
        ];
        for src in cases {
            let e = parse_expr(src).unwrap();
            let d = e.derivative().unwrap();
            let x = 0.7;
            let h = 1e-5;
            let fd = (e.eval(c(x + h)).unwrap() - e.eval(c(x - h)).unwrap()) / (2.0 * h);
            let an = d.eval(c(x)).unwrap();
            assert!((fd - an).norm() < 1e-8 * (1.0 + an.norm()), "{src}: {fd} vs {an}");
        }
    }

    #[test]
    fn abs_has_no_symbolic_derivative() {
        let e = parse_expr("abs(x)").unwrap();
        assert!(matches!(e.derivative(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn integral_node_evaluates_and_differentiates() {
        let int = Expr::integral(parse_expr("x").unwrap(), 0.0, 0.1);
        let v = int.eval(c(2.0)).unwrap();
        assert!((v - c(2.0)).norm() < 1e-13);
        assert_eq!(int.derivative().unwrap(), Expr::X);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let e = parse_expr("sin(x)^2 + exp(j*x)/3").unwrap();
        let a = e.eval(Complex64::new(0.3, 0.1)).unwrap();
        let b = e.eval(Complex64::new(0.3, 0.1)).unwrap();
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            Just(Expr::X),
            (-5.0f64..5.0).prop_map(Expr::real),
            ((-3.0f64..3.0), (-3.0f64..3.0)).prop_map(|(a, b)| Expr::Const(Complex64::new(a, b))),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                (inner.clone(), 0u8..4).prop_map(|(a, p)| Expr::Pow(Box::new(a), Box::new(Expr::real(p as f64)))),
                (inner.clone(), 0usize..8).prop_map(|(a, k)| {
                    let f = [Func::Sin, Func::Cos, Func::Sinh, Func::Cosh, Func::Exp, Func::Log, Func::Sqrt, Func::Abs][k];
                    Expr::Call(f, Box::new(a))
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn printed_expressions_reparse_to_identical_values(e in arb_expr()) {
            let text = e.to_string();
            let back = parse_expr(&text).unwrap();
            for x in [-1.3, -0.2, 0.0, 0.5, 2.25] {
                match (e.eval(c(x)), back.eval(c(x))) {
                    (Ok(a), Ok(b)) => {
                        prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                        prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
                    }
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "{} vs {:?} / {:?}", text, a, b),
                }
            }
        }
    }
}
