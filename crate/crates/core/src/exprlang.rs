//! A small infix expression language for kernels, sources, nonlinearities and
//! boundary data.
//!
//! Grammar, lowest to highest precedence:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          (right-associative)
//! primary := number | constant | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Constants are `pi` and `e`; functions are `sin cos tan exp log sqrt abs`
//! (`log` is the natural logarithm). There is no implicit multiplication and
//! no unary plus.
//!
//! ```
//! use fredholm_core::exprlang::{parse, Bindings};
//!
//! let expr = parse("3*p/(p+x^2)^2").unwrap();
//! let env = Bindings::new().with("p", 3.2).with("x", 0.0);
//! assert_eq!(expr.eval(&env).unwrap(), 0.9375);
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// Binary operators.
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

/// Built-in single-argument functions.
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
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
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

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Named constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn name(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::E => "e",
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }

    fn from_name(name: &str) -> Option<Constant> {
        match name {
            "pi" => Some(Constant::Pi),
            "e" => Some(Constant::E),
            _ => None,
        }
    }
}

/// Returns true if `name` is a constant or function name and therefore cannot
/// be used as a variable.
pub fn is_reserved(name: &str) -> bool {
    Constant::from_name(name).is_some() || Func::from_name(name).is_some()
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Parse failure. Offsets are byte offsets into the source text.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownFunction { offset, .. } => {
                *offset
            }
        }
    }
}

/// Evaluation failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("domain error: {what} at argument {arg}")]
    Domain { what: String, arg: f64 },
    #[error("non-finite result from {what}")]
    NonFinite { what: String },
}

/// Variable bindings for [`Expr::eval`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(HashMap<String, f64>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_owned(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }
}

impl<'a> FromIterator<(&'a str, f64)> for Bindings {
    fn from_iter<T: IntoIterator<Item = (&'a str, f64)>>(iter: T) -> Self {
        Bindings(iter.into_iter().map(|(k, v)| (k.to_owned(), v)).collect())
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                i = scan_number(bytes, i);
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                    offset: start,
                    expected: "a well-formed number".into(),
                })?;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_owned()), start));
                continue;
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: "a number, identifier, operator or parenthesis".into(),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    // exponent only when digits follow, so "2e" stays a number then an ident
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
    i
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset(),
            expected: format!("{expected}, found {}", self.peek().describe()),
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let offset = self.offset();
                self.bump();
                if let Some(c) = Constant::from_name(&name) {
                    return Ok(Expr::Const(c));
                }
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or(ParseError::UnknownFunction { name, offset })?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if Func::from_name(&name).is_some() {
                    return self.fail(&format!("`(` after function `{name}`"));
                }
                Ok(Expr::Var(name))
            }
            _ => self.fail("a number, identifier, `-` or `(`"),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            self.fail("`)`")
        }
    }
}

/// Parses `source` into an expression tree.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(source)?,
        pos: 0,
    };
    let expr = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail("an operator or end of input");
    }
    Ok(expr)
}

// ---------------------------------------------------------------------------
// Evaluation

fn apply_binary(op: BinOp, a: f64, b: f64) -> Result<f64, EvalError> {
    let v = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return Err(EvalError::Domain {
                    what: "division by zero".into(),
                    arg: a,
                });
            }
            a / b
        }
        BinOp::Pow => {
            if a == 0.0 && b < 0.0 {
                return Err(EvalError::Domain {
                    what: "zero raised to a negative power".into(),
                    arg: b,
                });
            }
            if a < 0.0 && b.fract() != 0.0 {
                return Err(EvalError::Domain {
                    what: "negative base with non-integer exponent".into(),
                    arg: a,
                });
            }
            a.powf(b)
        }
    };
    finite(v, || format!("`{}`", op.symbol()))
}

fn apply_func(f: Func, x: f64) -> Result<f64, EvalError> {
    let v = match f {
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Tan => x.tan(),
        Func::Exp => x.exp(),
        Func::Log => {
            if x <= 0.0 {
                return Err(EvalError::Domain {
                    what: "log of non-positive value".into(),
                    arg: x,
                });
            }
            x.ln()
        }
        Func::Sqrt => {
            if x < 0.0 {
                return Err(EvalError::Domain {
                    what: "sqrt of negative value".into(),
                    arg: x,
                });
            }
            x.sqrt()
        }
        Func::Abs => x.abs(),
    };
    finite(v, || f.name().to_owned())
}

fn finite(v: f64, what: impl FnOnce() -> String) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { what: what() })
    }
}

impl Expr {
    /// Evaluates the expression with the given variable bindings.
    pub fn eval(&self, env: &Bindings) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Const(c) => Ok(c.value()),
            Expr::Var(name) => env
                .get(name)
                .ok_or_else(|| EvalError::UnboundVariable(name.clone())),
            Expr::Neg(inner) => Ok(-inner.eval(env)?),
            Expr::Binary(op, a, b) => apply_binary(*op, a.eval(env)?, b.eval(env)?),
            Expr::Call(f, arg) => apply_func(*f, arg.eval(env)?),
        }
    }

    /// The set of variable names appearing in the expression.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) | Expr::Const(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(inner) | Expr::Call(_, inner) => inner.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Resolves variables to argument slots for fast repeated evaluation.
    ///
    /// `slots[i]` names the variable read from `args[i]` in
    /// [`CompiledExpr::eval`]. Fails if a free variable has no slot.
    pub fn compile(&self, slots: &[&str]) -> Result<CompiledExpr, EvalError> {
        Ok(CompiledExpr {
            root: lower(self, slots)?,
            arity: slots.len(),
        })
    }

    /// Fully parenthesised rendering; re-parsing yields an identical tree.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 => write!(f, "(-{})", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Const(c) => f.write_str(c.name()),
            Expr::Var(name) => f.write_str(name),
            Expr::Neg(inner) => write!(f, "(-{inner})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

/// Convenience: parse and evaluate in one step.
pub fn eval_str(source: &str, env: &Bindings) -> Result<f64, crate::Error> {
    Ok(parse(source)?.eval(env)?)
}

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Slot(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

fn lower(expr: &Expr, slots: &[&str]) -> Result<Node, EvalError> {
    Ok(match expr {
        Expr::Num(v) => Node::Num(*v),
        Expr::Const(c) => Node::Num(c.value()),
        Expr::Var(name) => Node::Slot(
            slots
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| EvalError::UnboundVariable(name.clone()))?,
        ),
        Expr::Neg(inner) => Node::Neg(Box::new(lower(inner, slots)?)),
        Expr::Binary(op, a, b) => {
            Node::Bin(*op, Box::new(lower(a, slots)?), Box::new(lower(b, slots)?))
        }
        Expr::Call(f, arg) => Node::Call(*f, Box::new(lower(arg, slots)?)),
    })
}

/// An expression with variables resolved to positional arguments.
///
/// Produces bitwise the same values as [`Expr::eval`] with matching bindings.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    root: Node,
    arity: usize,
}

impl CompiledExpr {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, args: &[f64]) -> Result<f64, EvalError> {
        debug_assert_eq!(args.len(), self.arity);
        eval_node(&self.root, args)
    }
}

fn eval_node(node: &Node, args: &[f64]) -> Result<f64, EvalError> {
    match node {
        Node::Num(v) => Ok(*v),
        Node::Slot(i) => Ok(args[*i]),
        Node::Neg(inner) => Ok(-eval_node(inner, args)?),
        Node::Bin(op, a, b) => apply_binary(*op, eval_node(a, args)?, eval_node(b, args)?),
        Node::Call(f, arg) => apply_func(*f, eval_node(arg, args)?),
    }
}
