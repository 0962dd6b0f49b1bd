use super::{BinOp, Expr, Func, Jet2};
use crate::error::{DomainError, Error, Result};

/// Arithmetic shared by the value-only and the jet evaluators. Both paths
/// perform the same `f64` operations on the value component, which keeps
/// `eval_value` bit-identical to `eval_jet2(..).value()`.
pub(super) trait Scalar: Clone {
    fn constant(c: f64, n: usize) -> Self;
    fn variable(x: f64, index: usize, n: usize) -> Self;
    fn value(&self) -> f64;
    fn finite(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn powf(&self, o: &Self) -> Self;
    fn apply(&self, f: Func) -> Self;
}

fn func_value(f: Func, u: f64) -> f64 {
    match f {
        Func::Sin => u.sin(),
        Func::Cos => u.cos(),
        Func::Exp => u.exp(),
        Func::Log => u.ln(),
        Func::Sqrt => u.sqrt(),
        Func::Tanh => u.tanh(),
    }
}

impl Scalar for f64 {
    fn constant(c: f64, _n: usize) -> Self {
        c
    }
    fn variable(x: f64, _index: usize, _n: usize) -> Self {
        x
    }
    fn value(&self) -> f64 {
        *self
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn powf(&self, o: &Self) -> Self {
        f64::powf(*self, *o)
    }
    fn apply(&self, f: Func) -> Self {
        func_value(f, *self)
    }
}

impl Scalar for Jet2 {
    fn constant(c: f64, n: usize) -> Self {
        Jet2::constant(c, n)
    }
    fn variable(x: f64, index: usize, n: usize) -> Self {
        Jet2::variable(x, index, n)
    }
    fn value(&self) -> f64 {
        Jet2::value(self)
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
    fn add(&self, o: &Self) -> Self {
        Jet2::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        Jet2::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        Jet2::mul(self, o)
    }
    fn div(&self, o: &Self) -> Self {
        Jet2::div(self, o)
    }
    fn neg(&self) -> Self {
        Jet2::neg(self)
    }
    fn powf(&self, o: &Self) -> Self {
        Jet2::powf(self, o)
    }
    fn apply(&self, f: Func) -> Self {
        let u = Jet2::value(self);
        let f0 = func_value(f, u);
        let (f1, f2) = match f {
            Func::Sin => (u.cos(), -f0),
            Func::Cos => (-u.sin(), -f0),
            Func::Exp => (f0, f0),
            Func::Log => (1.0 / u, -1.0 / (u * u)),
            Func::Sqrt => (0.5 / f0, -0.25 / (f0 * u)),
            Func::Tanh => {
                let d = 1.0 - f0 * f0;
                (d, -2.0 * f0 * d)
            }
        };
        self.chain(f0, f1, f2)
    }
}

pub(super) fn check_point(n: usize, x: &[f64]) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, expression dimension is {n}",
            x.len()
        )));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "coordinate x{} is not finite",
            i + 1
        )));
    }
    Ok(())
}

fn domain(node: &Expr, reason: impl Into<String>) -> Error {
    Error::Domain(DomainError {
        subexpr: node.to_string(),
        reason: reason.into(),
    })
}

/// Small integer exponent written as a literal, possibly negated.
fn integer_exponent(e: &Expr) -> Option<i32> {
    let (v, sign) = match e {
        Expr::Num(v) => (*v, 1),
        Expr::Neg(inner) => match **inner {
            Expr::Num(v) => (v, -1),
            _ => return None,
        },
        _ => return None,
    };
    (v.fract() == 0.0 && v.abs() <= 1024.0).then(|| sign * v as i32)
}

fn powi<T: Scalar>(base: &T, k: u32, n: usize) -> T {
    let mut acc: Option<T> = None;
    let mut sq = base.clone();
    let mut k = k;
    loop {
        if k & 1 == 1 {
            acc = Some(match acc {
                Some(a) => a.mul(&sq),
                None => sq.clone(),
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        sq = sq.mul(&sq);
    }
    acc.unwrap_or_else(|| T::constant(1.0, n))
}

pub(super) fn eval<T: Scalar>(node: &Expr, x: &[f64]) -> Result<T> {
    let n = x.len();
    let out = match node {
        Expr::Num(c) => T::constant(*c, n),
        Expr::Const(c) => T::constant(c.value(), n),
        Expr::Var(i) => T::variable(x[*i], *i, n),
        Expr::Neg(a) => eval::<T>(a, x)?.neg(),
        Expr::Call(f, a) => {
            let u = eval::<T>(a, x)?;
            let v = u.value();
            match f {
                Func::Log if v <= 0.0 => {
                    return Err(domain(node, format!("logarithm of non-positive value {v}")))
                }
                Func::Sqrt if v < 0.0 => {
                    return Err(domain(node, format!("square root of negative value {v}")))
                }
                _ => {}
            }
            u.apply(*f)
        }
        Expr::Binary(op, a, b) => {
            if *op == BinOp::Pow {
                if let Some(k) = integer_exponent(b) {
                    let base = eval::<T>(a, x)?;
                    let p = powi(&base, k.unsigned_abs(), n);
                    if k < 0 {
                        if p.value() == 0.0 {
                            return Err(domain(node, "zero raised to a negative power"));
                        }
                        T::constant(1.0, n).div(&p)
                    } else {
                        p
                    }
                } else {
                    let base = eval::<T>(a, x)?;
                    let exp = eval::<T>(b, x)?;
                    if base.value() <= 0.0 {
                        return Err(domain(
                            node,
                            format!(
                                "non-integer power requires a positive base, got {}",
                                base.value()
                            ),
                        ));
                    }
                    base.powf(&exp)
                }
            } else {
                let lhs = eval::<T>(a, x)?;
                let rhs = eval::<T>(b, x)?;
                match op {
                    BinOp::Add => lhs.add(&rhs),
                    BinOp::Sub => lhs.sub(&rhs),
                    BinOp::Mul => lhs.mul(&rhs),
                    BinOp::Div => {
                        if rhs.value() == 0.0 {
                            return Err(domain(node, "division by zero"));
                        }
                        lhs.div(&rhs)
                    }
                    BinOp::Pow => unreachable!(),
                }
            }
        }
    };
    if !out.finite() {
        return Err(domain(node, "non-finite value or derivative"));
    }
    Ok(out)
}
