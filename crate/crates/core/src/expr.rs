//! Symbolic binary cost expressions.
//!
//! Cost functions are stored as small expression trees over two slots, `x0`
//! and `x1`, which are bound to the first and second variable of a function's
//! scope. Trees serialize as prefix s-expressions:
//!
//! ```text
//! expr   := number | "x0" | "x1" | "(" op expr+ ")"
//! op     := "+" | "*"          ; two or more operands, folded left
//!         | "-"                ; one operand (negation) or two or more (folded left)
//!         | "/"                ; exactly two operands
//!         | "neg"              ; exactly one operand
//!         | "^"                ; "(^ expr n)" with n a non-negative integer literal
//! number := any literal accepted by `f64::from_str` that is finite
//! ```
//!
//! For example `(- (^ x0 2) (^ x1 2))` is `x0² − x1²`.

use std::fmt;
use std::ops;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// One of the two argument positions of a binary cost function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    X0,
    X1,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Slot),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Neg(Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unexpected end of input")]
    UnexpectedEof,
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("operator `{op}` does not accept {got} operand(s)")]
    Arity { op: String, got: usize },
    #[error("invalid number `{0}`")]
    InvalidNumber(String),
    #[error("exponent must be a non-negative integer literal, got `{0}`")]
    InvalidExponent(String),
    #[error("trailing input after expression: `{0}`")]
    Trailing(String),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn x0() -> Expr {
        Expr::Var(Slot::X0)
    }

    pub fn x1() -> Expr {
        Expr::Var(Slot::X1)
    }

    pub fn pow(self, exponent: u32) -> Expr {
        Expr::Pow(Box::new(self), exponent)
    }

    /// `a·x0² + b·x0·x1 + c·x1²`
    pub fn quadratic(a: f64, b: f64, c: f64) -> Expr {
        Expr::constant(a) * Expr::x0().pow(2)
            + Expr::constant(b) * Expr::x0() * Expr::x1()
            + Expr::constant(c) * Expr::x1().pow(2)
    }

    /// Evaluates the tree with `x0 = a` and `x1 = b`.
    pub fn eval(&self, a: f64, b: f64) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(Slot::X0) => a,
            Expr::Var(Slot::X1) => b,
            Expr::Add(l, r) => l.eval(a, b)? + r.eval(a, b)?,
            Expr::Sub(l, r) => l.eval(a, b)? - r.eval(a, b)?,
            Expr::Mul(l, r) => l.eval(a, b)? * r.eval(a, b)?,
            Expr::Div(l, r) => {
                let num = l.eval(a, b)?;
                let den = r.eval(a, b)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                num / den
            }
            Expr::Pow(base, n) => powi(base.eval(a, b)?, *n),
            Expr::Neg(e) => -e.eval(a, b)?,
        })
    }

    /// Returns which slots the tree references, as `(x0, x1)`.
    pub fn slots(&self) -> (bool, bool) {
        let mut seen = (false, false);
        self.visit(&mut |e| match e {
            Expr::Var(Slot::X0) => seen.0 = true,
            Expr::Var(Slot::X1) => seen.1 = true,
            _ => {}
        });
        seen
    }

    /// True if every constant in the tree is finite.
    pub fn constants_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |e| {
            if let Expr::Const(c) = e {
                ok &= c.is_finite();
            }
        });
        ok
    }

    pub fn contains_div(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, Expr::Div(..)));
        found
    }

    fn visit<F: FnMut(&Expr)>(&self, f: &mut F) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
                l.visit(f);
                r.visit(f);
            }
            Expr::Pow(e, _) | Expr::Neg(e) => e.visit(f),
        }
    }

    /// Flattens the tree into a postfix program for fast repeated evaluation.
    pub fn compile(&self) -> Program {
        let mut ops = Vec::new();
        self.emit(&mut ops);
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::X0 | Op::X1 => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div => depth -= 1,
                Op::Pow(_) | Op::Neg => {}
            }
            max_depth = max_depth.max(depth);
        }
        let shape = match ops[..] {
            [Op::Const(a), Op::X0, Op::Pow(2), Op::Mul, Op::Const(b), Op::X0, Op::Mul, Op::X1, Op::Mul, Op::Add, Op::Const(c), Op::X1, Op::Pow(2), Op::Mul, Op::Add] => {
                Shape::Quadratic(a, b, c)
            }
            _ => Shape::General,
        };
        Program { ops, max_depth, shape }
    }

    fn emit(&self, ops: &mut Vec<Op>) {
        match self {
            Expr::Const(c) => ops.push(Op::Const(*c)),
            Expr::Var(Slot::X0) => ops.push(Op::X0),
            Expr::Var(Slot::X1) => ops.push(Op::X1),
            Expr::Add(l, r) => emit_binary(l, r, Op::Add, ops),
            Expr::Sub(l, r) => emit_binary(l, r, Op::Sub, ops),
            Expr::Mul(l, r) => emit_binary(l, r, Op::Mul, ops),
            Expr::Div(l, r) => emit_binary(l, r, Op::Div, ops),
            Expr::Pow(e, n) => {
                e.emit(ops);
                ops.push(Op::Pow(*n));
            }
            Expr::Neg(e) => {
                e.emit(ops);
                ops.push(Op::Neg);
            }
        }
    }
}

fn emit_binary(l: &Expr, r: &Expr, op: Op, ops: &mut Vec<Op>) {
    l.emit(ops);
    r.emit(ops);
    ops.push(op);
}

fn powi(base: f64, n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => base,
        2 => base * base,
        _ => base.powi(n as i32),
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}

binary_op!(Add, add, Add);
binary_op!(Sub, sub, Sub);
binary_op!(Mul, mul, Mul);
binary_op!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    X0,
    X1,
    Add,
    Sub,
    Mul,
    Div,
    Pow(u32),
    Neg,
}

/// Postfix form of an [`Expr`]. Produces bit-identical results to
/// [`Expr::eval`] since it applies the same operations in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    max_depth: usize,
    shape: Shape,
}

/// Recognized program layouts with a direct evaluation path.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    General,
    /// The exact layout produced by [`Expr::quadratic`].
    Quadratic(f64, f64, f64),
}

const INLINE_STACK: usize = 16;

impl Program {
    #[inline]
    pub fn eval(&self, a: f64, b: f64) -> Result<f64, EvalError> {
        if self.max_depth <= INLINE_STACK {
            let mut stack = [0.0f64; INLINE_STACK];
            self.run(a, b, &mut stack)
        } else {
            let mut stack = vec![0.0f64; self.max_depth];
            self.run(a, b, &mut stack)
        }
    }

    /// Evaluates the program for every pair `(a[i], b[i])` and adds
    /// `scale` times the result to `acc[i]`. `scratch` is reused between
    /// calls to avoid allocation. Each element sees exactly the operations
    /// of [`Program::eval`], so results are bit-identical.
    pub fn eval_add_batch(
        &self,
        a: &[f64],
        b: &[f64],
        scale: f64,
        acc: &mut [f64],
        scratch: &mut Vec<f64>,
    ) -> Result<(), EvalError> {
        let k = acc.len();
        assert!(a.len() == k && b.len() == k, "batch lengths differ");
        if k == 0 {
            return Ok(());
        }
        if let Shape::Quadratic(qa, qb, qc) = self.shape {
            // same operation order as the general path
            for ((s, &x), &y) in acc.iter_mut().zip(a).zip(b) {
                *s += scale * (qa * (x * x) + qb * x * y + qc * (y * y));
            }
            return Ok(());
        }
        scratch.resize(self.max_depth.max(1) * k, 0.0);
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(c) => {
                    scratch[sp * k..(sp + 1) * k].fill(c);
                    sp += 1;
                }
                Op::X0 => {
                    scratch[sp * k..(sp + 1) * k].copy_from_slice(a);
                    sp += 1;
                }
                Op::X1 => {
                    scratch[sp * k..(sp + 1) * k].copy_from_slice(b);
                    sp += 1;
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    sp -= 1;
                    let (lo, hi) = scratch.split_at_mut(sp * k);
                    let lhs = &mut lo[(sp - 1) * k..];
                    let rhs = &hi[..k];
                    match *op {
                        Op::Add => lhs.iter_mut().zip(rhs).for_each(|(l, r)| *l += r),
                        Op::Sub => lhs.iter_mut().zip(rhs).for_each(|(l, r)| *l -= r),
                        Op::Mul => lhs.iter_mut().zip(rhs).for_each(|(l, r)| *l *= r),
                        _ => {
                            if rhs.contains(&0.0) {
                                return Err(EvalError::DivisionByZero);
                            }
                            lhs.iter_mut().zip(rhs).for_each(|(l, r)| *l /= r);
                        }
                    }
                }
                Op::Pow(n) => scratch[(sp - 1) * k..sp * k].iter_mut().for_each(|v| *v = powi(*v, n)),
                Op::Neg => scratch[(sp - 1) * k..sp * k].iter_mut().for_each(|v| *v = -*v),
            }
        }
        acc.iter_mut().zip(&scratch[..k]).for_each(|(s, v)| *s += scale * v);
        Ok(())
    }

    #[inline]
    fn run(&self, a: f64, b: f64, stack: &mut [f64]) -> Result<f64, EvalError> {
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(c) => {
                    stack[sp] = c;
                    sp += 1;
                }
                Op::X0 => {
                    stack[sp] = a;
                    sp += 1;
                }
                Op::X1 => {
                    stack[sp] = b;
                    sp += 1;
                }
                Op::Add => {
                    sp -= 1;
                    stack[sp - 1] += stack[sp];
                }
                Op::Sub => {
                    sp -= 1;
                    stack[sp - 1] -= stack[sp];
                }
                Op::Mul => {
                    sp -= 1;
                    stack[sp - 1] *= stack[sp];
                }
                Op::Div => {
                    sp -= 1;
                    if stack[sp] == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    stack[sp - 1] /= stack[sp];
                }
                Op::Pow(n) => stack[sp - 1] = powi(stack[sp - 1], n),
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
            }
        }
        Ok(stack[0])
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Slot::X0) => f.write_str("x0"),
            Expr::Var(Slot::X1) => f.write_str("x1"),
            Expr::Add(l, r) => write!(f, "(+ {l} {r})"),
            Expr::Sub(l, r) => write!(f, "(- {l} {r})"),
            Expr::Mul(l, r) => write!(f, "(* {l} {r})"),
            Expr::Div(l, r) => write!(f, "(/ {l} {r})"),
            Expr::Pow(e, n) => write!(f, "(^ {e} {n})"),
            Expr::Neg(e) => write!(f, "(neg {e})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(src: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                tokens.push(Token::Open);
                i += 1;
            }
            b')' => {
                tokens.push(Token::Close);
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'(' && bytes[i] != b')' {
                    i += 1;
                }
                tokens.push(Token::Atom(&src[start..i]));
            }
        }
    }
    tokens
}

struct Parser<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn next(&mut self) -> Result<Token<'a>, ParseError> {
        let tok = self.tokens.get(self.pos).cloned().ok_or(ParseError::UnexpectedEof)?;
        self.pos += 1;
        Ok(tok)
    }

    fn peek(&self) -> Option<&Token<'a>> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        match self.next()? {
            Token::Atom(atom) => atom_expr(atom),
            Token::Close => Err(ParseError::UnexpectedToken(")".into())),
            Token::Open => {
                let op = match self.next()? {
                    Token::Atom(op) => op,
                    Token::Open => return Err(ParseError::UnexpectedToken("(".into())),
                    Token::Close => return Err(ParseError::UnexpectedToken(")".into())),
                };
                if op == "^" {
                    let base = self.expr()?;
                    let exponent = match self.next()? {
                        Token::Atom(n) => n.parse::<u32>().map_err(|_| ParseError::InvalidExponent(n.to_string()))?,
                        Token::Open => return Err(ParseError::InvalidExponent("(".into())),
                        Token::Close => return Err(ParseError::Arity { op: "^".into(), got: 1 }),
                    };
                    self.close("^", 2)?;
                    return Ok(base.pow(exponent));
                }
                let mut args = Vec::new();
                while !matches!(self.peek(), Some(Token::Close) | None) {
                    args.push(self.expr()?);
                }
                self.next()?;
                build_operator(op, args)
            }
        }
    }

    fn close(&mut self, op: &str, got: usize) -> Result<(), ParseError> {
        match self.next()? {
            Token::Close => Ok(()),
            _ => Err(ParseError::Arity { op: op.into(), got: got + 1 }),
        }
    }
}

fn atom_expr(atom: &str) -> Result<Expr, ParseError> {
    match atom {
        "x0" => Ok(Expr::x0()),
        "x1" => Ok(Expr::x1()),
        _ => {
            let value: f64 = atom.parse().map_err(|_| ParseError::InvalidNumber(atom.to_string()))?;
            if !value.is_finite() {
                return Err(ParseError::InvalidNumber(atom.to_string()));
            }
            Ok(Expr::Const(value))
        }
    }
}

fn build_operator(op: &str, args: Vec<Expr>) -> Result<Expr, ParseError> {
    let arity = |ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(ParseError::Arity { op: op.to_string(), got: args.len() })
        }
    };
    match op {
        "+" | "*" => {
            arity(args.len() >= 2)?;
            let fold = if op == "+" { ops::Add::add } else { ops::Mul::mul };
            Ok(fold_left(args, fold))
        }
        "-" => {
            arity(!args.is_empty())?;
            if args.len() == 1 {
                Ok(-args.into_iter().next().unwrap())
            } else {
                Ok(fold_left(args, ops::Sub::sub))
            }
        }
        "/" => {
            arity(args.len() == 2)?;
            Ok(fold_left(args, ops::Div::div))
        }
        "neg" => {
            arity(args.len() == 1)?;
            Ok(-args.into_iter().next().unwrap())
        }
        _ => Err(ParseError::UnknownOperator(op.to_string())),
    }
}

fn fold_left(args: Vec<Expr>, f: fn(Expr, Expr) -> Expr) -> Expr {
    let mut it = args.into_iter();
    let first = it.next().expect("non-empty operand list");
    it.fold(first, f)
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parser = Parser { tokens: tokenize(s), pos: 0 };
        let expr = parser.expr()?;
        if parser.pos < parser.tokens.len() {
            let rest = parser.tokens[parser.pos..]
                .iter()
                .map(|t| match t {
                    Token::Open => "(",
                    Token::Close => ")",
                    Token::Atom(a) => a,
                })
                .collect::<Vec<_>>()
                .join(" ");
            return Err(ParseError::Trailing(rest));
        }
        Ok(expr)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
