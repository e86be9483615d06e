//! A small parser/evaluator for scalar coefficient expressions in one
//! variable `x`.
//!
//! Supported syntax: numeric literals (including scientific notation), the
//! variable `x`, binary `+ - * / ^` with the usual precedence (`^` binds
//! tightest and associates right), unary minus, parentheses, and the
//! functions `ln`, `log` (natural), `exp`, `sqrt`, `abs`.
//!
//! Parsed expressions are compiled into a fast form when they match one of
//! a few templates (constant, `c*x`, `c*x^gamma`); everything else falls
//! back to tree walking. The template recognition doubles as the family
//! detector for drift/diffusion coefficients.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Ln,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Ln => v.ln(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Expr::Call(f, e) => f.apply(e.eval(x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Var,
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            '^' => {
                tokens.push(Token::Caret);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // Scientific notation: 1e-3, 2.5E+4.
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mark = i;
                    i += 1;
                    if i < bytes.len() && matches!(bytes[i] as char, '+' | '-') {
                        i += 1;
                    }
                    if i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        i = mark;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number literal '{text}'")))?;
                tokens.push(Token::Num(value));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                let name = &src[start..i];
                if name == "x" {
                    tokens.push(Token::Var);
                } else {
                    tokens.push(Token::Ident(name.to_string()));
                }
            }
            other => {
                return Err(Error::Parse(format!(
                    "unexpected character '{other}' at byte {i}"
                )))
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            other => Err(Error::Parse(format!("expected {want:?}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op) = self.peek().cloned() {
            match op {
                Token::Plus => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(op) = self.peek().cloned() {
            match op {
                Token::Star => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Token::Slash => {
                    self.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        // Unary minus binds looser than '^' (so -x^2 means -(x^2)), but a
        // signed exponent like x^-2 still parses.
        if let Some(Token::Minus) = self.peek() {
            self.next();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.primary()?;
        if let Some(Token::Caret) = self.peek() {
            self.next();
            // Right-associative: x^2^3 parses as x^(2^3).
            let exponent = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::Var) => Ok(Expr::Var),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                let func = match name.as_str() {
                    "ln" | "log" => Func::Ln,
                    "exp" => Func::Exp,
                    "sqrt" => Func::Sqrt,
                    "abs" => Func::Abs,
                    other => {
                        return Err(Error::Parse(format!("unknown function '{other}'")));
                    }
                };
                self.expect(Token::LParen)?;
                let arg = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

/// Recognized shape of an expression, used both as an evaluation fast path
/// and as the template detector for coefficient families.
#[derive(Debug, Clone)]
pub enum Shape {
    /// f(x) = c
    Const(f64),
    /// f(x) = c * x
    Linear(f64),
    /// f(x) = c * x^gamma with gamma not in {0, 1}
    Power { coeff: f64, gamma: f64 },
    /// Anything else; evaluated by tree walk.
    Generic(Arc<Expr>),
}

/// A parsed expression together with its compiled shape and source text.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    source: String,
    expr: Arc<Expr>,
    shape: Shape,
}

const SHAPE_TOL: f64 = 1e-12;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Probe abscissas for shape detection. All strictly positive so that
/// power templates are well defined; spread over several orders of
/// magnitude to make accidental fits implausible.
fn probes() -> [f64; 9] {
    [0.013, 0.09, 0.4, 1.0, 1.7, 3.2, 11.0, 170.0, 4096.0]
}

fn detect_shape(expr: &Arc<Expr>) -> Shape {
    let xs = probes();
    let ys: Vec<f64> = xs.iter().map(|&x| expr.eval(x)).collect();
    if ys.iter().any(|v| !v.is_finite()) {
        return Shape::Generic(expr.clone());
    }

    // Constant: same value everywhere.
    if ys.iter().all(|&y| rel_close(y, ys[0], SHAPE_TOL)) {
        return Shape::Const(ys[0]);
    }

    // Linear through the origin: y/x constant.
    let c_lin = ys[3] / xs[3];
    if ys
        .iter()
        .zip(xs.iter())
        .all(|(&y, &x)| rel_close(y, c_lin * x, SHAPE_TOL))
    {
        return Shape::Linear(c_lin);
    }

    // Power law c * x^gamma: fit on two probes, verify on the rest.
    // Requires a consistent sign; fold it into the coefficient.
    let sign = ys[3].signum();
    if ys.iter().all(|&y| y != 0.0 && y.signum() == sign) {
        let (x1, x2) = (xs[2], xs[6]);
        let (y1, y2) = (ys[2].abs(), ys[6].abs());
        let gamma = (y2.ln() - y1.ln()) / (x2.ln() - x1.ln());
        let coeff = sign * y1 / x1.powf(gamma);
        if gamma.is_finite()
            && coeff.is_finite()
            && ys
                .iter()
                .zip(xs.iter())
                .all(|(&y, &x)| rel_close(y, coeff * x.powf(gamma), 1e-9))
        {
            if rel_close(gamma, 0.0, 1e-9) {
                return Shape::Const(coeff);
            }
            if rel_close(gamma, 1.0, 1e-9) {
                return Shape::Linear(coeff);
            }
            return Shape::Power { coeff, gamma };
        }
    }

    Shape::Generic(expr.clone())
}

impl CompiledExpr {
    /// Parse and compile an expression in the variable `x`.
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        if tokens.is_empty() {
            return Err(Error::Parse("empty expression".into()));
        }
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Parse(format!(
                "trailing input after position {}",
                parser.pos
            )));
        }
        let expr = Arc::new(expr);
        let shape = detect_shape(&expr);
        Ok(CompiledExpr {
            source: src.trim().to_string(),
            expr,
            shape,
        })
    }

    /// Build a compiled constant without going through the parser.
    pub fn constant(value: f64) -> Self {
        CompiledExpr {
            source: format!("{value}"),
            expr: Arc::new(Expr::Const(value)),
            shape: Shape::Const(value),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Const(c) => *c,
            Shape::Linear(c) => c * x,
            Shape::Power { coeff, gamma } => coeff * x.powf(*gamma),
            Shape::Generic(e) => e.eval(x),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl fmt::Display for CompiledExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}
