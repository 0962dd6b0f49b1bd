//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, QR};

use crate::error::{Error, Result};

/// Relative threshold on `sigma_min / sigma_max` below which a Jacobian is
/// treated as rank deficient.
pub const RANK_EPS: f64 = 1e-8;

/// Singular values of `a`, in ascending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(f64::total_cmp);
    s
}

/// Checks that the `m x n` matrix `j` (with `m <= n`) has full row rank and
/// returns `(sigma_min, sigma_max)`.
pub fn full_row_rank(j: &DMatrix<f64>) -> Result<(f64, f64)> {
    if j.nrows() > j.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} constraints exceed dimension {}",
            j.nrows(),
            j.ncols()
        )));
    }
    let s = singular_values(j);
    let (lo, hi) = match (s.first(), s.last()) {
        (Some(lo), Some(hi)) => (*lo, *hi),
        _ => return Err(Error::DimensionMismatch("empty Jacobian".into())),
    };
    if !(hi > 0.0) || lo <= RANK_EPS * hi {
        return Err(Error::RankDeficientJacobian {
            sigma_min: lo,
            sigma_max: hi,
        });
    }
    Ok((lo, hi))
}

/// Cholesky factor of the Gram matrix `J J^T` after a rank check.
pub struct Gram {
    chol: Cholesky<f64, Dyn>,
}

impl Gram {
    pub fn new(j: &DMatrix<f64>) -> Result<Self> {
        let (lo, hi) = full_row_rank(j)?;
        let g = j * j.transpose();
        let chol = Cholesky::new(g).ok_or(Error::RankDeficientJacobian {
            sigma_min: lo,
            sigma_max: hi,
        })?;
        Ok(Gram { chol })
    }

    /// Solves `(J J^T) y = rhs`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }
}

/// Orthonormal basis of `Ker(j)` for a full-row-rank `m x n` matrix,
/// taken from the trailing columns of the full Householder `Q` of `j^T`.
///
/// Each column is oriented so that its first entry with magnitude above
/// `1e-12` is positive.
pub fn kernel_basis(j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    full_row_rank(j)?;
    let (m, n) = j.shape();
    let qr = QR::new(j.transpose());
    let mut qt = DMatrix::<f64>::identity(n, n);
    qr.q_tr_mul(&mut qt);
    let mut basis = qt.transpose().columns(m, n - m).into_owned();
    for mut col in basis.column_iter_mut() {
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-12) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(basis)
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues ascending.
/// Eigenvectors are the matching columns of the returned matrix.
pub fn sym_eigen(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let k = h.nrows();
    if k == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(k, k);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Symmetrizes in place by averaging with the transpose.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_axis_constraint() {
        let j = DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0]);
        let v = kernel_basis(&j).unwrap();
        assert_eq!(v.shape(), (3, 2));
        assert!((&j * &v).amax() < 1e-14);
        assert!((v.transpose() * &v - DMatrix::identity(2, 2)).amax() < 1e-14);
        // spans the x1-x2 plane with the documented orientation
        for c in v.column_iter() {
            assert!(c[2].abs() < 1e-14);
            let first = c.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn kernel_of_aligned_and_square() {
        let j = DMatrix::from_row_slice(1, 3, &[-2.0, 0.0, 0.0]);
        let v = kernel_basis(&j).unwrap();
        assert!((&j * &v).amax() < 1e-14);
        assert!((v.transpose() * &v - DMatrix::identity(2, 2)).amax() < 1e-14);

        let sq = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(kernel_basis(&sq).unwrap().ncols(), 0);
    }

    #[test]
    fn rank_deficiency_detected() {
        let j = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        assert!(matches!(
            full_row_rank(&j),
            Err(Error::RankDeficientJacobian { .. })
        ));
        assert!(Gram::new(&j).is_err());
        assert!(matches!(
            full_row_rank(&DMatrix::zeros(1, 2)),
            Err(Error::RankDeficientJacobian { .. })
        ));
    }

    #[test]
    fn eigen_sorted() {
        let h = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -1.0]);
        let (vals, vecs) = sym_eigen(&h);
        assert_eq!(vals, vec![-1.0, 3.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }
}
