use nalgebra::{DMatrix, DVector};

/// Second-order jet: value, gradient and Hessian of a scalar function at a
/// point.
///
/// The Hessian is stored as its packed lower triangle, so it is symmetric
/// by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

impl Jet2 {
    pub fn constant(value: f64, n: usize) -> Self {
        Jet2 {
            value,
            grad: vec![0.0; n],
            hess: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        let mut j = Jet2::constant(value, n);
        j.grad[index] = 1.0;
        j
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[tri(i, j)]
    }

    pub fn gradient(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.grad)
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.hess(i, j))
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().all(|h| h.is_finite())
    }

    /// Jet of `phi(self)` given `phi`, `phi'`, `phi''` at `self.value`.
    pub(crate) fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.dim();
        let mut hess = Vec::with_capacity(self.hess.len());
        for i in 0..n {
            for j in 0..=i {
                hess.push(f1 * self.hess[tri(i, j)] + f2 * self.grad[i] * self.grad[j]);
            }
        }
        Jet2 {
            value: f0,
            grad: self.grad.iter().map(|g| f1 * g).collect(),
            hess,
        }
    }

    pub(crate) fn add(&self, o: &Self) -> Self {
        Jet2 {
            value: self.value + o.value,
            grad: zip_map(&self.grad, &o.grad, |a, b| a + b),
            hess: zip_map(&self.hess, &o.hess, |a, b| a + b),
        }
    }

    pub(crate) fn sub(&self, o: &Self) -> Self {
        Jet2 {
            value: self.value - o.value,
            grad: zip_map(&self.grad, &o.grad, |a, b| a - b),
            hess: zip_map(&self.hess, &o.hess, |a, b| a - b),
        }
    }

    pub(crate) fn neg(&self) -> Self {
        Jet2 {
            value: -self.value,
            grad: self.grad.iter().map(|g| -g).collect(),
            hess: self.hess.iter().map(|h| -h).collect(),
        }
    }

    pub(crate) fn mul(&self, o: &Self) -> Self {
        let n = self.dim();
        let (a, b) = (self.value, o.value);
        let mut hess = Vec::with_capacity(self.hess.len());
        for i in 0..n {
            for j in 0..=i {
                let k = tri(i, j);
                hess.push(
                    a * o.hess[k]
                        + b * self.hess[k]
                        + self.grad[i] * o.grad[j]
                        + o.grad[i] * self.grad[j],
                );
            }
        }
        Jet2 {
            value: a * b,
            grad: zip_map(&self.grad, &o.grad, |ga, gb| a * gb + b * ga),
            hess,
        }
    }

    /// Quotient; the caller guarantees `o.value != 0`.
    pub(crate) fn div(&self, o: &Self) -> Self {
        let n = self.dim();
        let b = o.value;
        let q = self.value / b;
        let grad: Vec<f64> = zip_map(&self.grad, &o.grad, |ga, gb| (ga - q * gb) / b);
        let mut hess = Vec::with_capacity(self.hess.len());
        for i in 0..n {
            for j in 0..=i {
                let k = tri(i, j);
                hess.push(
                    (self.hess[k] - q * o.hess[k] - grad[i] * o.grad[j] - o.grad[i] * grad[j]) / b,
                );
            }
        }
        Jet2 {
            value: q,
            grad,
            hess,
        }
    }

    /// `self^o` for a positive base, as `exp(o * ln self)` with the value
    /// taken from `powf`.
    pub(crate) fn powf(&self, o: &Self) -> Self {
        let a = self.value;
        let ln = self.chain(a.ln(), 1.0 / a, -1.0 / (a * a));
        let w = o.mul(&ln);
        let q = a.powf(o.value);
        w.chain(q, q, q)
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}
