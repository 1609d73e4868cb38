//! A small expression language for weights and densities.
//!
//! Supported: numbers, variables `x` (alias of `x1`), `x1`, `x2`, `x3`, the operators
//! `+ - * / ^`, absolute value as `|e|` or `abs(e)`, and the functions `exp`, `log`, `sqrt`.
//! Gradients are exact (forward-mode dual numbers); `|e|` has derivative `sign(e)`, zero at 0.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Func(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Abs,
    Exp,
    Log,
    Sqrt,
}

/// A parsed scalar expression in up to three variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    arity: usize,
}

#[derive(Clone, Copy)]
struct Dual {
    v: f64,
    d: [f64; MAX_DIM],
}

impl Dual {
    fn constant(v: f64) -> Self {
        Dual { v, d: [0.0; MAX_DIM] }
    }
    fn map(self, v: f64, slope: f64) -> Self {
        let mut d = self.d;
        d.iter_mut().for_each(|x| *x *= slope);
        Dual { v, d }
    }
    fn combine(a: Dual, b: Dual, v: f64, da: f64, db: f64) -> Self {
        let mut d = [0.0; MAX_DIM];
        for i in 0..MAX_DIM {
            d[i] = da * a.d[i] + db * b.d[i];
        }
        Dual { v, d }
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let mut p = Parser {
            chars: source.chars().collect(),
            pos: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.err("unexpected trailing input"));
        }
        let arity = max_var(&root).map_or(0, |v| v + 1);
        Ok(Expr {
            source: source.trim().to_string(),
            root,
            arity,
        })
    }

    /// Number of variables referenced (highest index + 1).
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Errors unless the expression only uses variables available in dimension `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.arity > dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.arity,
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        eval(&self.root, x)
    }

    /// Value and gradient (length `x.len()`).
    pub fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut vars = [Dual::constant(0.0); MAX_DIM];
        for (i, &xi) in x.iter().enumerate().take(MAX_DIM) {
            vars[i] = Dual::constant(xi);
            vars[i].d[i] = 1.0;
        }
        let out = eval_dual(&self.root, &vars);
        (out.v, out.d[..x.len().min(MAX_DIM)].to_vec())
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.eval_grad(x).1
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Expr::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn max_var(n: &Node) -> Option<usize> {
    match n {
        Node::Num(_) => None,
        Node::Var(i) => Some(*i),
        Node::Neg(a) | Node::Func(_, a) => max_var(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            max_var(a).max(max_var(b))
        }
    }
}

fn eval(n: &Node, x: &[f64]) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(i) => x.get(*i).copied().unwrap_or(f64::NAN),
        Node::Neg(a) => -eval(a, x),
        Node::Add(a, b) => eval(a, x) + eval(b, x),
        Node::Sub(a, b) => eval(a, x) - eval(b, x),
        Node::Mul(a, b) => eval(a, x) * eval(b, x),
        Node::Div(a, b) => eval(a, x) / eval(b, x),
        Node::Pow(a, b) => {
            let base = eval(a, x);
            match integer_exponent(b) {
                Some(k) => base.powi(k),
                None => base.powf(eval(b, x)),
            }
        }
        Node::Func(f, a) => {
            let v = eval(a, x);
            match f {
                Func::Abs => v.abs(),
                Func::Exp => v.exp(),
                Func::Log => v.ln(),
                Func::Sqrt => v.sqrt(),
            }
        }
    }
}

fn integer_exponent(n: &Node) -> Option<i32> {
    match n {
        Node::Num(v) if v.fract() == 0.0 && v.abs() < 1e6 => Some(*v as i32),
        _ => None,
    }
}

fn eval_dual(n: &Node, vars: &[Dual; MAX_DIM]) -> Dual {
    match n {
        Node::Num(v) => Dual::constant(*v),
        Node::Var(i) => vars[*i],
        Node::Neg(a) => {
            let a = eval_dual(a, vars);
            a.map(-a.v, -1.0)
        }
        Node::Add(a, b) => {
            let (a, b) = (eval_dual(a, vars), eval_dual(b, vars));
            Dual::combine(a, b, a.v + b.v, 1.0, 1.0)
        }
        Node::Sub(a, b) => {
            let (a, b) = (eval_dual(a, vars), eval_dual(b, vars));
            Dual::combine(a, b, a.v - b.v, 1.0, -1.0)
        }
        Node::Mul(a, b) => {
            let (a, b) = (eval_dual(a, vars), eval_dual(b, vars));
            Dual::combine(a, b, a.v * b.v, b.v, a.v)
        }
        Node::Div(a, b) => {
            let (a, b) = (eval_dual(a, vars), eval_dual(b, vars));
            Dual::combine(a, b, a.v / b.v, 1.0 / b.v, -a.v / (b.v * b.v))
        }
        Node::Pow(a, e) => {
            let base = eval_dual(a, vars);
            match integer_exponent(e) {
                Some(0) => Dual::constant(1.0),
                Some(k) => base.map(base.v.powi(k), k as f64 * base.v.powi(k - 1)),
                None => {
                    let ex = eval_dual(e, vars);
                    let v = base.v.powf(ex.v);
                    Dual::combine(base, ex, v, ex.v * base.v.powf(ex.v - 1.0), v * base.v.ln())
                }
            }
        }
        Node::Func(f, a) => {
            let a = eval_dual(a, vars);
            match f {
                Func::Abs => {
                    let s = if a.v > 0.0 {
                        1.0
                    } else if a.v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    a.map(a.v.abs(), s)
                }
                Func::Exp => {
                    let e = a.v.exp();
                    a.map(e, e)
                }
                Func::Log => a.map(a.v.ln(), 1.0 / a.v),
                Func::Sqrt => {
                    let s = a.v.sqrt();
                    a.map(s, 0.5 / s)
                }
            }
        }
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn err(&self, msg: &str) -> Error {
        Error::Expr {
            pos: self.pos + 1,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.err("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some('|') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat('|') {
                    return Err(self.err("expected closing '|'"));
                }
                Ok(Node::Func(Func::Abs, Box::new(e)))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.err(&format!("unexpected character '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            let exp_sign = (c == '+' || c == '-')
                && self.pos > start
                && matches!(self.chars[self.pos - 1], 'e' | 'E');
            if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| Error::Expr {
                pos: start + 1,
                msg: format!("invalid number '{text}'"),
            })
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        let func = match name.as_str() {
            "x" => return Ok(Node::Var(0)),
            "x1" => return Ok(Node::Var(0)),
            "x2" => return Ok(Node::Var(1)),
            "x3" => return Ok(Node::Var(2)),
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => {
                return Err(Error::Expr {
                    pos: start + 1,
                    msg: format!("unknown identifier '{name}'"),
                })
            }
        };
        if !self.eat('(') {
            return Err(self.err("expected '(' after function name"));
        }
        let arg = self.expr()?;
        if !self.eat(')') {
            return Err(self.err("expected ')'"));
        }
        Ok(Node::Func(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_polynomials_and_abs() {
        let e = Expr::parse("x^2/2 + 3*|x| - 1").unwrap();
        assert_eq!(e.eval(&[2.0]), 2.0 + 6.0 - 1.0);
        assert_eq!(e.eval(&[-2.0]), 7.0);
        let e = Expr::parse("x1^2 + 2*x2 - exp(0)").unwrap();
        assert_eq!(e.arity(), 2);
        assert_eq!(e.eval(&[1.0, 3.0]), 6.0);
        assert_eq!(Expr::parse("-x^2").unwrap().eval(&[3.0]), -9.0);
        assert_eq!(Expr::parse("2^3^2").unwrap().eval(&[]), 512.0);
        assert!((Expr::parse("1.5e-1*x").unwrap().eval(&[2.0]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let e = Expr::parse("exp(x1)*x2^3 + sqrt(1 + x1^2) - log(2 + x2) + |x1 - x2|").unwrap();
        let x = [0.3, -0.7];
        let g = e.grad(&x);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (e.eval(&xp) - e.eval(&xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn reports_errors_with_positions() {
        assert!(matches!(Expr::parse("x +"), Err(Error::Expr { .. })));
        assert!(matches!(Expr::parse("y"), Err(Error::Expr { pos: 1, .. })));
        assert!(matches!(Expr::parse("(x"), Err(Error::Expr { .. })));
        assert!(Expr::parse("x2").unwrap().check_dim(1).is_err());
    }
}
