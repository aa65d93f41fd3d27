//! Infix expressions: `+ - * / ^`, unary minus, parentheses, `log(..)`,
//! `exp(..)`, numbers and variables.
//!
//! Precedence from tightest: `^` (right-associative), unary `-`, `* /`,
//! `+ -`. Exponents must fold to an integer constant.

use std::collections::HashMap;
use std::fmt;

use adgraph::{Domain, Graph, NodeId, Value};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Num(Value),
    Var(String),
    Neg(Box<ExprAst>),
    Add(Box<ExprAst>, Box<ExprAst>),
    Sub(Box<ExprAst>, Box<ExprAst>),
    Mul(Box<ExprAst>, Box<ExprAst>),
    Div(Box<ExprAst>, Box<ExprAst>),
    PowInt(Box<ExprAst>, i64),
    Log(Box<ExprAst>),
    Exp(Box<ExprAst>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    /// `position` is a byte offset into the source text.
    #[error("syntax error at position {position}: {message}")]
    SyntaxError { position: usize, message: String },
    #[error("exponent at position {position} is not an integer constant")]
    NonIntegerExponent { position: usize },
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Num(v) => write!(f, "{v}"),
            ExprAst::Var(name) => f.write_str(name),
            ExprAst::Neg(a) => write!(f, "(-{a})"),
            ExprAst::Add(a, b) => write!(f, "({a} + {b})"),
            ExprAst::Sub(a, b) => write!(f, "({a} - {b})"),
            ExprAst::Mul(a, b) => write!(f, "({a} * {b})"),
            ExprAst::Div(a, b) => write!(f, "({a} / {b})"),
            ExprAst::PowInt(a, k) => write!(f, "({a} ^ ({k}))"),
            ExprAst::Log(a) => write!(f, "log({a})"),
            ExprAst::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Sym(char),
    End,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            out.push((start, Tok::Num(text[start..i].to_string())));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(ExprError::SyntaxError {
                position: i,
                message: format!("unexpected character '{}'", text[i..].chars().next().unwrap()),
            });
        }
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

/// Exact value of a decimal literal such as `12`, `0.25` or `1e-3`.
fn decimal_to_rational(lit: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match lit.find(['e', 'E']) {
        Some(p) => (&lit[..p], lit[p + 1..].parse::<i32>().ok()?),
        None => (lit, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = exponent - frac.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    let factor = if scale >= 0 {
        Pow::pow(&ten, scale as u32)
    } else {
        BigRational::one() / Pow::pow(&ten, (-scale) as u32)
    };
    Some(BigRational::from_integer(digits) * factor)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    domain: Domain,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::SyntaxError {
            position: self.offset(),
            message: message.into(),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == &Tok::Sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    fn sum(&mut self) -> Result<ExprAst, ExprError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat('+') {
                lhs = ExprAst::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat('-') {
                lhs = ExprAst::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<ExprAst, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = ExprAst::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = ExprAst::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<ExprAst, ExprError> {
        if self.eat('-') {
            Ok(ExprAst::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<ExprAst, ExprError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let position = self.offset();
        // The exponent may itself carry a sign or another `^`.
        let exponent = self.unary()?;
        let k = fold_integer(&exponent).ok_or(ExprError::NonIntegerExponent { position })?;
        Ok(ExprAst::PowInt(Box::new(base), k))
    }

    fn atom(&mut self) -> Result<ExprAst, ExprError> {
        let tok = self.peek().clone();
        match tok {
            Tok::Num(lit) => {
                let value = match self.domain {
                    Domain::Float => lit.parse::<f64>().ok().map(Value::Float),
                    Domain::Rational => decimal_to_rational(&lit).map(Value::Rational),
                };
                let value = value.ok_or_else(|| self.error(format!("malformed number '{lit}'")))?;
                self.pos += 1;
                Ok(ExprAst::Num(value))
            }
            Tok::Ident(name) => {
                self.pos += 1;
                match name.as_str() {
                    "log" | "exp" => {
                        self.expect('(')?;
                        let arg = Box::new(self.sum()?);
                        self.expect(')')?;
                        Ok(if name == "log" { ExprAst::Log(arg) } else { ExprAst::Exp(arg) })
                    }
                    _ => Ok(ExprAst::Var(name)),
                }
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let inner = self.sum()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Sym(c) => Err(self.error(format!("unexpected '{c}'"))),
            Tok::End => Err(self.error("unexpected end of input")),
        }
    }
}

/// The integer an exponent expression denotes, if it is free of variables
/// and functions and evaluates exactly to an integer.
fn fold_integer(ast: &ExprAst) -> Option<i64> {
    fn fold(ast: &ExprAst) -> Option<BigRational> {
        Some(match ast {
            ExprAst::Num(Value::Rational(r)) => r.clone(),
            ExprAst::Num(Value::Float(x)) => BigRational::from_float(*x)?,
            ExprAst::Neg(a) => -fold(a)?,
            ExprAst::Add(a, b) => fold(a)? + fold(b)?,
            ExprAst::Sub(a, b) => fold(a)? - fold(b)?,
            ExprAst::Mul(a, b) => fold(a)? * fold(b)?,
            ExprAst::Div(a, b) => {
                let d = fold(b)?;
                if d.is_zero() {
                    return None;
                }
                fold(a)? / d
            }
            ExprAst::PowInt(a, k) => {
                let base = fold(a)?;
                if base.is_zero() && *k < 0 {
                    return None;
                }
                Pow::pow(&base, i32::try_from(*k).ok()?)
            }
            ExprAst::Var(_) | ExprAst::Log(_) | ExprAst::Exp(_) => return None,
        })
    }
    let r = fold(ast)?;
    if r.is_integer() {
        r.to_integer().to_i64()
    } else {
        None
    }
}

/// Parses `text`, reading numeric literals in `domain`: as `f64` for
/// [`Domain::Float`] and as exact decimals for [`Domain::Rational`].
pub fn parse_expr(text: &str, domain: Domain) -> Result<ExprAst, ExprError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        domain,
    };
    let ast = p.sum()?;
    if p.peek() != &Tok::End {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(ast)
}

impl ExprAst {
    /// Lowers into `graph`, creating an input for each variable on first use.
    /// Subtraction, division and negation become add, mul and pow edges.
    pub fn lower(&self, graph: &mut Graph) -> adgraph::Result<NodeId> {
        Ok(match self {
            ExprAst::Num(v) => graph.constant(v.clone())?,
            ExprAst::Var(name) => match graph.find_input(name) {
                Some(id) => id,
                None => graph.input(name)?,
            },
            ExprAst::Neg(a) => {
                let a = a.lower(graph)?;
                let m = graph.int(-1);
                graph.mul(m, a)?
            }
            ExprAst::Add(a, b) => {
                let (a, b) = (a.lower(graph)?, b.lower(graph)?);
                graph.add(a, b)?
            }
            ExprAst::Sub(a, b) => {
                let (a, b) = (a.lower(graph)?, b.lower(graph)?);
                let m = graph.int(-1);
                let nb = graph.mul(m, b)?;
                graph.add(a, nb)?
            }
            ExprAst::Mul(a, b) => {
                let (a, b) = (a.lower(graph)?, b.lower(graph)?);
                graph.mul(a, b)?
            }
            ExprAst::Div(a, b) => {
                let (a, b) = (a.lower(graph)?, b.lower(graph)?);
                let inv = graph.pow(-1, b)?;
                graph.mul(a, inv)?
            }
            ExprAst::PowInt(a, k) => {
                let a = a.lower(graph)?;
                graph.pow(*k, a)?
            }
            ExprAst::Log(a) => {
                let a = a.lower(graph)?;
                graph.log(a)?
            }
            ExprAst::Exp(a) => {
                let a = a.lower(graph)?;
                graph.exp(a)?
            }
        })
    }

    /// Direct floating-point evaluation, without building a graph.
    pub fn eval_f64(&self, env: &HashMap<String, f64>) -> Option<f64> {
        Some(match self {
            ExprAst::Num(v) => v.to_f64(),
            ExprAst::Var(name) => *env.get(name)?,
            ExprAst::Neg(a) => -a.eval_f64(env)?,
            ExprAst::Add(a, b) => a.eval_f64(env)? + b.eval_f64(env)?,
            ExprAst::Sub(a, b) => a.eval_f64(env)? - b.eval_f64(env)?,
            ExprAst::Mul(a, b) => a.eval_f64(env)? * b.eval_f64(env)?,
            ExprAst::Div(a, b) => a.eval_f64(env)? / b.eval_f64(env)?,
            ExprAst::PowInt(a, k) => a.eval_f64(env)?.powi(i32::try_from(*k).ok()?),
            ExprAst::Log(a) => a.eval_f64(env)?.ln(),
            ExprAst::Exp(a) => a.eval_f64(env)?.exp(),
        })
    }

    /// Variable names in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        fn go(e: &ExprAst, out: &mut Vec<String>) {
            match e {
                ExprAst::Num(_) => {}
                ExprAst::Var(n) => {
                    if !out.contains(n) {
                        out.push(n.clone());
                    }
                }
                ExprAst::Neg(a) | ExprAst::PowInt(a, _) | ExprAst::Log(a) | ExprAst::Exp(a) => go(a, out),
                ExprAst::Add(a, b) | ExprAst::Sub(a, b) | ExprAst::Mul(a, b) | ExprAst::Div(a, b) => {
                    go(a, out);
                    go(b, out);
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }
}

/// Parses a number in `domain`: a decimal literal, or `p/q` in the rational
/// domain. A leading `-` is allowed.
pub fn parse_number(text: &str, domain: Domain) -> Option<Value> {
    let text = text.trim();
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let v = match domain {
        Domain::Float => Value::Float(body.parse::<f64>().ok()?),
        Domain::Rational => {
            let r = match body.split_once('/') {
                Some((n, d)) => {
                    let (n, d) = (decimal_to_rational(n)?, decimal_to_rational(d)?);
                    if d.is_zero() {
                        return None;
                    }
                    n / d
                }
                None => decimal_to_rational(body)?,
            };
            Value::Rational(r)
        }
    };
    Some(if negative { v.mul(&Value::int(domain, -1)).ok()? } else { v })
}
