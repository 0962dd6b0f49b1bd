//! Equality-constrained problem `min f(x) s.t. g(x) = 0`.

use crate::error::{Error, Result};
use crate::expr::{self, Expression};
use crate::geometry::DerivativeBundle;

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    n: usize,
    objective: Expression,
    constraints: Vec<Expression>,
}

impl Problem {
    /// Parses the objective and constraint sources in dimension `n`.
    pub fn parse(n: usize, objective: &str, constraints: &[&str]) -> Result<Self> {
        let f = expr::parse(objective, n)?;
        let g = constraints
            .iter()
            .map(|src| expr::parse(src, n))
            .collect::<Result<Vec<_>, _>>()?;
        Problem::new(f, g)
    }

    pub fn new(objective: Expression, constraints: Vec<Expression>) -> Result<Self> {
        let n = objective.dim();
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if constraints.is_empty() {
            return Err(Error::InvalidInput(
                "at least one constraint is required".into(),
            ));
        }
        if constraints.len() > n {
            return Err(Error::DimensionMismatch(format!(
                "{} constraints exceed dimension {n}",
                constraints.len()
            )));
        }
        if let Some(g) = constraints.iter().find(|g| g.dim() != n) {
            return Err(Error::DimensionMismatch(format!(
                "constraint `{g}` has dimension {}, objective has {n}",
                g.dim()
            )));
        }
        Ok(Problem {
            n,
            objective,
            constraints,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &Expression {
        &self.objective
    }

    pub fn constraints(&self) -> &[Expression] {
        &self.constraints
    }

    pub fn constraint_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.constraints.iter().map(|g| g.eval_value(x)).collect()
    }

    /// Exact first and second derivatives of `f` and every `g_i` at `x`.
    pub fn bundle(&self, x: &[f64]) -> Result<DerivativeBundle> {
        let f = self.objective.eval_jet2(x)?;
        let g = self
            .constraints
            .iter()
            .map(|g| g.eval_jet2(x))
            .collect::<Result<Vec<_>>>()?;
        DerivativeBundle::from_jets(x, &f, &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Problem::parse(2, "x1", &[]).is_err());
        assert!(matches!(
            Problem::parse(1, "x1", &["x1", "x1 - 1"]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            Problem::parse(2, "x1", &["x3"]),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn bundle_shapes() {
        let p = Problem::parse(3, "x1", &["x3", "x1^2 + x2^2 - 1"]).unwrap();
        let b = p.bundle(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!((b.n(), b.m()), (3, 2));
        assert_eq!(b.jac_g()[(1, 0)], 2.0);
        assert_eq!(b.hess_g()[1][(1, 1)], 2.0);
        assert_eq!(b.gvals().as_slice(), &[0.0, 0.0]);
    }
}
