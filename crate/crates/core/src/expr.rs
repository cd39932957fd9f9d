//! Analytic scalar expressions over named coordinates.
//!
//! Metric components, warping functions and vector fields are all written as
//! small infix expressions (`"1 + 0.3*sin(2*pi*x1)"`). This module parses them
//! into an immutable tree, evaluates them, and differentiates them exactly.
//!
//! Powers take integer exponents only. Fractional powers go through `sqrt` or
//! `exp(a*log(x))`. The identifier `pi` is the constant π; every other
//! identifier is a free variable.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::ExprError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(String),
    Neg(FieldExpr),
    Add(FieldExpr, FieldExpr),
    Sub(FieldExpr, FieldExpr),
    Mul(FieldExpr, FieldExpr),
    Div(FieldExpr, FieldExpr),
    Pow(FieldExpr, i32),
    Call(Func, FieldExpr),
}

/// Immutable expression tree. Cloning is cheap (shared nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExpr(Arc<Node>);

/// Variable bindings for [`FieldExpr::eval`].
#[derive(Debug, Clone, Default)]
pub struct EvalContext {
    bindings: HashMap<String, f64>,
}

impl EvalContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.bindings.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.bindings.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.bindings.get(name).copied()
    }

    fn describe(&self) -> String {
        let mut pairs: Vec<_> = self.bindings.iter().collect();
        pairs.sort_by(|a, b| a.0.cmp(b.0));
        pairs
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl FieldExpr {
    fn new(node: Node) -> Self {
        FieldExpr(Arc::new(node))
    }

    pub fn constant(value: f64) -> Self {
        FieldExpr::new(Node::Const(value))
    }

    pub fn var(name: &str) -> Self {
        FieldExpr::new(Node::Var(name.to_string()))
    }

    pub fn zero() -> Self {
        FieldExpr::constant(0.0)
    }

    pub fn one() -> Self {
        FieldExpr::constant(1.0)
    }

    /// Parse infix text. Errors carry the byte offset of the offending token.
    pub fn parse(text: &str) -> Result<FieldExpr, ExprError> {
        if text.trim().is_empty() {
            return Err(ExprError::Syntax {
                offset: 0,
                message: "empty expression".into(),
            });
        }
        let mut parser = Parser::new(text);
        let expr = parser.expr()?;
        parser.skip_ws();
        if parser.pos < parser.src.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(expr)
    }

    /// The constant value if this node is a literal.
    pub fn as_constant(&self) -> Option<f64> {
        match &*self.0 {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// True when the tree is literally the constant zero (no evaluation).
    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match &*self.0 {
            Node::Const(_) => {}
            Node::Var(v) => {
                out.insert(v.clone());
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.collect_vars(out),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Evaluate with named bindings.
    pub fn eval(&self, ctx: &EvalContext) -> Result<f64, ExprError> {
        let lookup = |name: &str| ctx.get(name);
        self.eval_with(&lookup, &|| ctx.describe())
    }

    fn eval_with(
        &self,
        lookup: &dyn Fn(&str) -> Option<f64>,
        describe: &dyn Fn() -> String,
    ) -> Result<f64, ExprError> {
        Ok(match &*self.0 {
            Node::Const(c) => *c,
            Node::Var(v) => lookup(v).ok_or_else(|| ExprError::Unbound(v.clone()))?,
            Node::Neg(a) => -a.eval_with(lookup, describe)?,
            Node::Add(a, b) => a.eval_with(lookup, describe)? + b.eval_with(lookup, describe)?,
            Node::Sub(a, b) => a.eval_with(lookup, describe)? - b.eval_with(lookup, describe)?,
            Node::Mul(a, b) => a.eval_with(lookup, describe)? * b.eval_with(lookup, describe)?,
            Node::Div(a, b) => {
                let num = a.eval_with(lookup, describe)?;
                let den = b.eval_with(lookup, describe)?;
                if den == 0.0 {
                    return Err(ExprError::Domain {
                        what: "division by zero".into(),
                        at: describe(),
                    });
                }
                num / den
            }
            Node::Pow(a, k) => {
                let base = a.eval_with(lookup, describe)?;
                if base == 0.0 && *k < 0 {
                    return Err(ExprError::Domain {
                        what: format!("zero raised to negative power {k}"),
                        at: describe(),
                    });
                }
                base.powi(*k)
            }
            Node::Call(f, a) => apply(*f, a.eval_with(lookup, describe)?, describe)?,
        })
    }

    /// Resolve variable names against an ordered coordinate list.
    pub fn bind(&self, names: &[String]) -> Result<BoundExpr, ExprError> {
        let tree = compile(self, names)?;
        Ok(BoundExpr {
            tree,
            names: names.to_vec().into(),
        })
    }

    /// Exact symbolic derivative. No simplification beyond folding zeros,
    /// ones and literal constants.
    pub fn differentiate(&self, var: &str) -> FieldExpr {
        match &*self.0 {
            Node::Const(_) => FieldExpr::zero(),
            Node::Var(v) => {
                if v == var {
                    FieldExpr::one()
                } else {
                    FieldExpr::zero()
                }
            }
            Node::Neg(a) => neg(a.differentiate(var)),
            Node::Add(a, b) => add(a.differentiate(var), b.differentiate(var)),
            Node::Sub(a, b) => sub(a.differentiate(var), b.differentiate(var)),
            Node::Mul(a, b) => add(
                mul(a.differentiate(var), b.clone()),
                mul(a.clone(), b.differentiate(var)),
            ),
            Node::Div(a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                if db.is_zero() {
                    div(da, b.clone())
                } else {
                    div(
                        sub(mul(da, b.clone()), mul(a.clone(), db)),
                        pow(b.clone(), 2),
                    )
                }
            }
            Node::Pow(a, k) => {
                if *k == 0 {
                    return FieldExpr::zero();
                }
                let da = a.differentiate(var);
                mul(
                    mul(FieldExpr::constant(*k as f64), pow(a.clone(), k - 1)),
                    da,
                )
            }
            Node::Call(f, a) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return FieldExpr::zero();
                }
                let outer = match f {
                    Func::Sin => call(Func::Cos, a.clone()),
                    Func::Cos => neg(call(Func::Sin, a.clone())),
                    Func::Tan => pow(call(Func::Cos, a.clone()), -2),
                    Func::Exp => call(Func::Exp, a.clone()),
                    Func::Log => return div(da, a.clone()),
                    Func::Sqrt => {
                        return div(da, mul(FieldExpr::constant(2.0), call(Func::Sqrt, a.clone())))
                    }
                };
                mul(outer, da)
            }
        }
    }
}

fn apply(f: Func, x: f64, describe: &dyn Fn() -> String) -> Result<f64, ExprError> {
    Ok(match f {
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Tan => x.tan(),
        Func::Exp => x.exp(),
        Func::Log => {
            if x <= 0.0 {
                return Err(ExprError::Domain {
                    what: format!("log of nonpositive value {x}"),
                    at: describe(),
                });
            }
            x.ln()
        }
        Func::Sqrt => {
            if x < 0.0 {
                return Err(ExprError::Domain {
                    what: format!("sqrt of negative value {x}"),
                    at: describe(),
                });
            }
            x.sqrt()
        }
    })
}

// Smart constructors: fold the trivial cases so derivative trees stay small.

pub(crate) fn neg(a: FieldExpr) -> FieldExpr {
    match a.as_constant() {
        Some(c) => FieldExpr::constant(-c),
        None => FieldExpr::new(Node::Neg(a)),
    }
}

pub(crate) fn add(a: FieldExpr, b: FieldExpr) -> FieldExpr {
    match (a.as_constant(), b.as_constant()) {
        (Some(x), Some(y)) => FieldExpr::constant(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => FieldExpr::new(Node::Add(a, b)),
    }
}

pub(crate) fn sub(a: FieldExpr, b: FieldExpr) -> FieldExpr {
    match (a.as_constant(), b.as_constant()) {
        (Some(x), Some(y)) => FieldExpr::constant(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => FieldExpr::new(Node::Sub(a, b)),
    }
}

pub(crate) fn mul(a: FieldExpr, b: FieldExpr) -> FieldExpr {
    match (a.as_constant(), b.as_constant()) {
        (Some(x), Some(y)) => FieldExpr::constant(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => FieldExpr::zero(),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        _ => FieldExpr::new(Node::Mul(a, b)),
    }
}

pub(crate) fn div(a: FieldExpr, b: FieldExpr) -> FieldExpr {
    match (a.as_constant(), b.as_constant()) {
        (Some(x), _) if x == 0.0 => FieldExpr::zero(),
        (Some(x), Some(y)) if y != 0.0 => FieldExpr::constant(x / y),
        (_, Some(y)) if y == 1.0 => a,
        _ => FieldExpr::new(Node::Div(a, b)),
    }
}

pub(crate) fn pow(a: FieldExpr, k: i32) -> FieldExpr {
    match (a.as_constant(), k) {
        (_, 0) => FieldExpr::one(),
        (_, 1) => a,
        (Some(x), _) if x != 0.0 || k > 0 => FieldExpr::constant(x.powi(k)),
        _ => FieldExpr::new(Node::Pow(a, k)),
    }
}

pub(crate) fn call(f: Func, a: FieldExpr) -> FieldExpr {
    FieldExpr::new(Node::Call(f, a))
}

impl std::ops::Add for FieldExpr {
    type Output = FieldExpr;
    fn add(self, rhs: FieldExpr) -> FieldExpr {
        add(self, rhs)
    }
}

impl std::ops::Sub for FieldExpr {
    type Output = FieldExpr;
    fn sub(self, rhs: FieldExpr) -> FieldExpr {
        sub(self, rhs)
    }
}

impl std::ops::Mul for FieldExpr {
    type Output = FieldExpr;
    fn mul(self, rhs: FieldExpr) -> FieldExpr {
        mul(self, rhs)
    }
}

impl std::ops::Neg for FieldExpr {
    type Output = FieldExpr;
    fn neg(self) -> FieldExpr {
        neg(self)
    }
}

/// Fully parenthesized printing; re-parses to an equivalent tree.
impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Node::Var(v) => write!(f, "{v}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, k) => write!(f, "({a}^({k}))"),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// An expression whose variables are resolved to slots of a coordinate
/// vector; evaluation does no string lookups.
#[derive(Debug, Clone)]
pub struct BoundExpr {
    tree: Compiled,
    names: Arc<[String]>,
}

#[derive(Debug, Clone)]
enum Compiled {
    Const(f64),
    Var(usize),
    Neg(Box<Compiled>),
    Add(Box<Compiled>, Box<Compiled>),
    Sub(Box<Compiled>, Box<Compiled>),
    Mul(Box<Compiled>, Box<Compiled>),
    Div(Box<Compiled>, Box<Compiled>),
    Pow(Box<Compiled>, i32),
    Call(Func, Box<Compiled>),
}

fn compile(expr: &FieldExpr, names: &[String]) -> Result<Compiled, ExprError> {
    let c = |e: &FieldExpr| compile(e, names).map(Box::new);
    Ok(match &*expr.0 {
        Node::Const(v) => Compiled::Const(*v),
        Node::Var(v) => Compiled::Var(
            names
                .iter()
                .position(|n| n == v)
                .ok_or_else(|| ExprError::Unbound(v.clone()))?,
        ),
        Node::Neg(a) => Compiled::Neg(c(a)?),
        Node::Add(a, b) => Compiled::Add(c(a)?, c(b)?),
        Node::Sub(a, b) => Compiled::Sub(c(a)?, c(b)?),
        Node::Mul(a, b) => Compiled::Mul(c(a)?, c(b)?),
        Node::Div(a, b) => Compiled::Div(c(a)?, c(b)?),
        Node::Pow(a, k) => Compiled::Pow(c(a)?, *k),
        Node::Call(f, a) => Compiled::Call(*f, c(a)?),
    })
}

impl BoundExpr {
    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        let describe = || {
            self.names
                .iter()
                .zip(point)
                .map(|(n, v)| format!("{n}={v}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        eval_compiled(&self.tree, point, &describe)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.tree, Compiled::Const(_))
    }
}

fn eval_compiled(c: &Compiled, p: &[f64], describe: &dyn Fn() -> String) -> Result<f64, ExprError> {
    Ok(match c {
        Compiled::Const(v) => *v,
        Compiled::Var(i) => p[*i],
        Compiled::Neg(a) => -eval_compiled(a, p, describe)?,
        Compiled::Add(a, b) => eval_compiled(a, p, describe)? + eval_compiled(b, p, describe)?,
        Compiled::Sub(a, b) => eval_compiled(a, p, describe)? - eval_compiled(b, p, describe)?,
        Compiled::Mul(a, b) => eval_compiled(a, p, describe)? * eval_compiled(b, p, describe)?,
        Compiled::Div(a, b) => {
            let num = eval_compiled(a, p, describe)?;
            let den = eval_compiled(b, p, describe)?;
            if den == 0.0 {
                return Err(ExprError::Domain {
                    what: "division by zero".into(),
                    at: describe(),
                });
            }
            num / den
        }
        Compiled::Pow(a, k) => {
            let base = eval_compiled(a, p, describe)?;
            if base == 0.0 && *k < 0 {
                return Err(ExprError::Domain {
                    what: format!("zero raised to negative power {k}"),
                    at: describe(),
                });
            }
            base.powi(*k)
        }
        Compiled::Call(f, a) => apply(*f, eval_compiled(a, p, describe)?, describe)?,
    })
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message: message.into(),
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

    fn eat(&mut self, byte: u8) -> bool {
        if self.peek() == Some(byte) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<FieldExpr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = FieldExpr::new(Node::Add(lhs, self.term()?));
            } else if self.eat(b'-') {
                lhs = FieldExpr::new(Node::Sub(lhs, self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<FieldExpr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = FieldExpr::new(Node::Mul(lhs, self.unary()?));
            } else if self.eat(b'/') {
                lhs = FieldExpr::new(Node::Div(lhs, self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<FieldExpr, ExprError> {
        if self.eat(b'-') {
            return Ok(FieldExpr::new(Node::Neg(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<FieldExpr, ExprError> {
        let base = self.primary()?;
        if self.eat(b'^') {
            let k = self.integer_exponent()?;
            return Ok(FieldExpr::new(Node::Pow(base, k)));
        }
        Ok(base)
    }

    fn integer_exponent(&mut self) -> Result<i32, ExprError> {
        let paren = self.eat(b'(');
        let negative = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("exponent must be an integer literal"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'.' | b'e' | b'E') {
            return Err(self.error("exponent must be an integer literal"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mut k: i32 = digits
            .parse()
            .map_err(|_| ExprError::Syntax {
                offset: start,
                message: "exponent out of range".into(),
            })?;
        if negative {
            k = -k;
        }
        if paren && !self.eat(b')') {
            return Err(self.error("expected ')'"));
        }
        Ok(k)
    }

    fn primary(&mut self) -> Result<FieldExpr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if self.peek() == Some(b'(') {
                    let func = Func::from_name(name).ok_or_else(|| ExprError::UnknownFunction {
                        name: name.to_string(),
                        offset: start,
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    if !self.eat(b')') {
                        return Err(self.error("expected ')'"));
                    }
                    return Ok(call(func, arg));
                }
                if name == "pi" {
                    return Ok(FieldExpr::constant(std::f64::consts::PI));
                }
                Ok(FieldExpr::var(name))
            }
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<FieldExpr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            digits(self);
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if exp_start == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(FieldExpr::constant)
            .map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number '{text}'"),
            })
    }
}
