//! Arithmetic expressions in one free variable.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' unary)?          right-associative
//! atom    := number | var | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | tan | exp | log | sqrt | abs
//! ```
//!
//! `^` binds tighter than unary minus, so `-t^2` is `-(t^2)`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at offset {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("domain error in `{subexpr}`: {message}")]
    Domain { subexpr: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
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
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var,
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with its source text and variable name.
#[derive(Clone)]
pub struct TimeExpr {
    source: Arc<str>,
    var: Arc<str>,
    ast: Arc<Node>,
}

impl fmt::Debug for TimeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TimeExpr({:?} in {})", &*self.source, &*self.var)
    }
}

impl PartialEq for TimeExpr {
    fn eq(&self, other: &Self) -> bool {
        self.var == other.var && self.ast == other.ast
    }
}

impl TimeExpr {
    /// Parses `text` with free variable `var_name`.
    pub fn parse(text: &str, var_name: &str) -> Result<Self, ExprError> {
        let ast = Parser::new(text, var_name).parse_all()?;
        Ok(Self { source: text.into(), var: var_name.into(), ast: Arc::new(ast) })
    }

    /// A literal constant.
    pub fn constant(value: f64, var_name: &str) -> Self {
        let node = Node::Num(value);
        let source = Printer(&node, var_name).to_string();
        Self { source: source.into(), var: var_name.into(), ast: Arc::new(node) }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn var_name(&self) -> &str {
        &self.var
    }

    pub fn ast(&self) -> &Node {
        &self.ast
    }

    /// Evaluates at `value` of the free variable.
    pub fn eval(&self, value: f64) -> Result<f64, ExprError> {
        eval_node(&self.ast, value, &self.var)
    }

    /// Fully parenthesized rendering that parses back to the same tree.
    pub fn print(&self) -> String {
        Printer(&self.ast, &self.var).to_string()
    }

    /// True when the tree does not mention the free variable.
    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Num(_) => true,
                Node::Var => false,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Bin(_, a, b) => walk(a) && walk(b),
            }
        }
        walk(&self.ast)
    }
}

impl fmt::Display for TimeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for TimeExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

/// Deserializes an expression in `t`; use [`TimeExpr::parse`] for other variables.
impl<'de> Deserialize<'de> for TimeExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        TimeExpr::parse(&text, "t").map_err(serde::de::Error::custom)
    }
}

struct Printer<'a>(&'a Node, &'a str);

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let var = self.1;
        match self.0 {
            // `{:?}` on f64 is the shortest string that round-trips
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var => f.write_str(var),
            Node::Neg(a) => write!(f, "(-{})", Printer(a, var)),
            Node::Bin(op, a, b) => {
                write!(f, "({} {} {})", Printer(a, var), op.symbol(), Printer(b, var))
            }
            Node::Call(func, a) => write!(f, "{}({})", func.name(), Printer(a, var)),
        }
    }
}

fn domain(node: &Node, var: &str, message: impl Into<String>) -> ExprError {
    ExprError::Domain { subexpr: Printer(node, var).to_string(), message: message.into() }
}

fn eval_node(node: &Node, x: f64, var: &str) -> Result<f64, ExprError> {
    let v = match node {
        Node::Num(v) => *v,
        Node::Var => x,
        Node::Neg(a) => -eval_node(a, x, var)?,
        Node::Bin(op, a, b) => {
            let l = eval_node(a, x, var)?;
            let r = eval_node(b, x, var)?;
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => {
                    if r == 0.0 {
                        return Err(domain(node, var, "division by zero"));
                    }
                    l / r
                }
                BinOp::Pow => {
                    if l < 0.0 && r.fract() != 0.0 {
                        return Err(domain(node, var, "negative base with fractional exponent"));
                    }
                    if l == 0.0 && r < 0.0 {
                        return Err(domain(node, var, "zero raised to a negative power"));
                    }
                    l.powf(r)
                }
            }
        }
        Node::Call(func, a) => {
            let u = eval_node(a, x, var)?;
            match func {
                Func::Sin => u.sin(),
                Func::Cos => u.cos(),
                Func::Tan => u.tan(),
                Func::Exp => u.exp(),
                Func::Log => {
                    if u <= 0.0 {
                        return Err(domain(node, var, format!("log of nonpositive value {u}")));
                    }
                    u.ln()
                }
                Func::Sqrt => {
                    if u < 0.0 {
                        return Err(domain(node, var, format!("sqrt of negative value {u}")));
                    }
                    u.sqrt()
                }
                Func::Abs => u.abs(),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(node, var, "non-finite result"))
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    var: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, var: &'a str) -> Self {
        Self { src, bytes: src.as_bytes(), pos: 0, var }
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax { pos: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_all(mut self) -> Result<Node, ExprError> {
        if self.src.trim().is_empty() {
            return Err(self.error("empty expression"));
        }
        let node = self.expr()?;
        if self.peek().is_some() {
            return Err(self.error(format!("unexpected `{}`", self.src[self.pos..].chars().next().unwrap_or('?'))));
        }
        Ok(node)
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.error(format!("unexpected `{}`", self.src[self.pos..].chars().next().unwrap_or('?')))),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let b = self.bytes;
        let digits = |p: &mut usize| {
            let s = *p;
            while *p < b.len() && b[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > s
        };
        let mut p = self.pos;
        let int_part = digits(&mut p);
        let mut frac_part = false;
        if p < b.len() && b[p] == b'.' {
            p += 1;
            frac_part = digits(&mut p);
        }
        if !int_part && !frac_part {
            return Err(self.error("malformed number"));
        }
        if p < b.len() && (b[p] == b'e' || b[p] == b'E') {
            let mut q = p + 1;
            if q < b.len() && (b[q] == b'+' || b[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            } else {
                self.pos = p;
                return Err(self.error("malformed exponent"));
            }
        }
        let text = &self.src[start..p];
        self.pos = p;
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| ExprError::Syntax { pos: start, message: format!("bad number `{text}`") })
    }

    fn identifier(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if name == self.var {
            return Ok(Node::Var);
        }
        match Func::from_name(name) {
            Some(func) => {
                if !self.eat(b'(') {
                    return Err(self.error(format!("expected `(` after `{name}`")));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(Node::Call(func, Box::new(arg)))
            }
            None => Err(ExprError::UnknownIdentifier { name: name.to_string(), pos: start }),
        }
    }
}
