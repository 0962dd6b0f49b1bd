//! Scalar expressions over `x1..xn` with exact second-order derivatives.
//!
//! The grammar accepted by [`parse`] is
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" unary)?
//! primary := number | "pi" | "e" | var | func "(" expr ")" | "(" expr ")"
//! var     := "x" digits                      (1 <= index <= n)
//! func    := "sin" | "cos" | "exp" | "log" | "sqrt" | "tanh"
//! number  := digits ["." digits] [("e" | "E") ["+" | "-"] digits]
//!          | "." digits [("e" | "E") ["+" | "-"] digits]
//! ```
//!
//! `^` binds tighter than unary minus and is right-associative, so `-x1^2`
//! is `-(x1^2)` and `x1^2^3` is `x1^(2^3)`.
//!
//! Values, gradients and Hessians are computed by forward-mode automatic
//! differentiation with second-order jets ([`Jet2`]).

mod eval;
mod jet;
mod parser;

use std::fmt;

use crate::error::{ParseError, Result};

pub use jet::Jet2;

/// Elementary functions accepted in call position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 6] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Named constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

/// Expression tree node. Variables are stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    Var(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Largest 0-based variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            Expr::Num(c) if c.is_sign_negative() => 0,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let parens = self.precedence() < min_prec;
        if parens {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(c) => write!(f, "{c:?}")?,
            Expr::Const(Constant::Pi) => f.write_str("pi")?,
            Expr::Const(Constant::E) => f.write_str("e")?,
            Expr::Var(i) => write!(f, "x{}", i + 1)?,
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_at(f, 3)?;
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_at(f, 0)?;
                f.write_str(")")?;
            }
            Expr::Binary(op, a, b) => {
                let (lhs, rhs) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                    BinOp::Pow => (5, 3),
                };
                a.write_at(f, lhs)?;
                if *op == BinOp::Pow {
                    f.write_str("^")?;
                } else {
                    write!(f, " {} ", op.symbol())?;
                }
                b.write_at(f, rhs)?;
            }
        }
        if parens {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

/// A parsed scalar expression in a fixed dimension `n`.
///
/// Immutable once built; cloning is cheap relative to evaluation and the
/// type is `Send + Sync`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Expr,
    n: usize,
}

impl Expression {
    /// Wraps an already-built tree, checking variable indices against `n`.
    pub fn from_tree(root: Expr, n: usize) -> Result<Self, ParseError> {
        if let Some(k) = root.max_var() {
            if k >= n {
                return Err(ParseError::VariableOutOfRange {
                    index: k + 1,
                    n,
                    offset: 0,
                });
            }
        }
        Ok(Expression { root, n })
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval_value(&self, x: &[f64]) -> Result<f64> {
        eval_value(self, x)
    }

    pub fn eval_jet2(&self, x: &[f64]) -> Result<Jet2> {
        eval_jet2(self, x)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

/// Parses `source` as an expression over `x1..xn`.
pub fn parse(source: &str, n: usize) -> Result<Expression, ParseError> {
    let root = parser::Parser::new(source, n).parse()?;
    Ok(Expression { root, n })
}

/// Value, gradient and Hessian of `e` at `x`.
pub fn eval_jet2(e: &Expression, x: &[f64]) -> Result<Jet2> {
    eval::check_point(e.n, x)?;
    eval::eval::<Jet2>(&e.root, x)
}

/// Value-only evaluation; bit-identical to `eval_jet2(e, x)?.value()`.
pub fn eval_value(e: &Expression, x: &[f64]) -> Result<f64> {
    eval::check_point(e.n, x)?;
    eval::eval::<f64>(&e.root, x)
}
