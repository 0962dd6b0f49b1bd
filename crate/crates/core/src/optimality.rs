//! First- and second-order optimality conditions and the curvature
//! comparison `<ν_f, h_f(v,v)> <= <ν_f, h_g(v,v)>`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, DerivativeBundle, PlanarCurvatureReport, Quadrant, TangentBasis};
use crate::linalg::{self, Gram};

/// Relative tolerance of the first-order gate in front of the curvature
/// comparison.
pub const FIRST_ORDER_GATE: f64 = 1e-6;

/// Relative scale of the default verdict tolerance.
pub const VERDICT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierSet {
    pub lambda: Vec<f64>,
    /// `∇f - Jg^T λ`.
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub grad_f_norm: f64,
}

impl MultiplierSet {
    pub fn lambda_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.lambda)
    }
}

/// Least-squares multipliers `λ = (Jg Jg^T)^{-1} Jg ∇f`.
pub fn multipliers(b: &DerivativeBundle) -> Result<MultiplierSet> {
    let j = b.jac_g();
    let gram = Gram::new(j)?;
    let lambda = gram.solve(&(j * b.grad_f()));
    let residual = b.grad_f() - j.transpose() * &lambda;
    Ok(MultiplierSet {
        lambda: lambda.iter().copied().collect(),
        residual_norm: residual.norm(),
        residual: residual.iter().copied().collect(),
        grad_f_norm: b.grad_f().norm(),
    })
}

/// `residual_norm <= tol (1 + ‖∇f‖)`.
pub fn check_first_order(ms: &MultiplierSet, tol: f64) -> bool {
    ms.residual_norm <= tol * (1.0 + ms.grad_f_norm)
}

/// `∇²f - Σ λ_i ∇²g_i`.
pub fn lagrangian_hessian(b: &DerivativeBundle, lambda: &[f64]) -> Result<DMatrix<f64>> {
    if lambda.len() != b.m() {
        return Err(Error::DimensionMismatch(format!(
            "{} multipliers for {} constraints",
            lambda.len(),
            b.m()
        )));
    }
    let mut h = b.hess_f().clone();
    for (l, hg) in lambda.iter().zip(b.hess_g()) {
        h -= hg * *l;
    }
    Ok(h)
}

/// `1e-8 (1 + ‖H‖_max)`.
pub fn default_tol(hess_l: &DMatrix<f64>) -> f64 {
    VERDICT_TOL * (1.0 + linalg::max_abs(hess_l))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondOrderReport {
    /// Row-major `V^T ∇²L V`.
    pub projected_hessian: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub necessary_holds: bool,
    pub sufficient_holds: bool,
    /// Smallest eigenvalue strictly inside `(-tol, tol)`.
    pub indeterminate: bool,
    pub first_order_ok: bool,
    pub tol: f64,
    #[serde(skip)]
    eigenvectors: DMatrix<f64>,
}

impl SecondOrderReport {
    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }

    pub fn projected_hessian_matrix(&self) -> DMatrix<f64> {
        let k = self.projected_hessian.len();
        DMatrix::from_fn(k, k, |i, j| self.projected_hessian[i][j])
    }

    /// Eigenvectors of the projected Hessian in tangent coordinates,
    /// column `i` matching `eigenvalues[i]`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }
}

/// Eigen-analysis of `V^T ∇²L V`. A first-order defect does not fail the
/// call; it is reported through `first_order_ok`.
pub fn second_order_report(
    b: &DerivativeBundle,
    ms: &MultiplierSet,
    v: &TangentBasis,
    tol: Option<f64>,
) -> Result<SecondOrderReport> {
    if v.ambient_dim() != b.n() || v.dim() != b.n() - b.m() {
        return Err(Error::DimensionMismatch(format!(
            "tangent basis is {}x{}, expected {}x{}",
            v.ambient_dim(),
            v.dim(),
            b.n(),
            b.n() - b.m()
        )));
    }
    let hl = lagrangian_hessian(b, &ms.lambda)?;
    let tol = tol.unwrap_or_else(|| default_tol(&hl));
    let vm = v.matrix();
    let mut ph = vm.transpose() * &hl * vm;
    linalg::symmetrize(&mut ph);
    let (eigenvalues, eigenvectors) = linalg::sym_eigen(&ph);
    let min = eigenvalues.first().copied();
    let necessary_holds = min.is_none_or(|e| e >= -tol);
    let sufficient_holds = min.is_none_or(|e| e >= tol);
    Ok(SecondOrderReport {
        projected_hessian: ph.row_iter().map(|r| r.iter().copied().collect()).collect(),
        indeterminate: necessary_holds && !sufficient_holds,
        eigenvalues,
        necessary_holds,
        sufficient_holds,
        first_order_ok: check_first_order(ms, FIRST_ORDER_GATE),
        tol,
        eigenvectors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureComparisonReport {
    pub directions: Vec<Vec<f64>>,
    /// `<ν_f, h_f(v,v)>`.
    pub lhs: Vec<f64>,
    /// `<ν_f, h_g(v,v)>`.
    pub rhs: Vec<f64>,
    pub gaps: Vec<f64>,
    /// `|gap - v^T ∇²L v / ‖∇f‖|`.
    pub identity_residuals: Vec<f64>,
    pub holds: bool,
    pub tol: f64,
}

impl CurvatureComparisonReport {
    pub fn min_gap(&self) -> Option<f64> {
        self.gaps.iter().copied().reduce(f64::min)
    }
}

/// Eigenvectors of the projected Lagrangian Hessian pushed through `V`.
pub fn default_directions(so: &SecondOrderReport, v: &TangentBasis) -> Vec<DVector<f64>> {
    let lifted = v.matrix() * so.eigenvectors();
    lifted.column_iter().map(|c| c.into_owned()).collect()
}

/// Per-direction curvature comparison.
///
/// `tol` is in curvature units; it defaults to the verdict tolerance of
/// the projected Hessian divided by `‖∇f‖`, so that `holds` agrees with
/// `necessary_holds` over the eigen-directions.
pub fn curvature_comparison(
    b: &DerivativeBundle,
    ms: &MultiplierSet,
    directions: &[DVector<f64>],
    tol: Option<f64>,
) -> Result<CurvatureComparisonReport> {
    if !check_first_order(ms, FIRST_ORDER_GATE) {
        return Err(Error::FirstOrderViolated {
            residual_norm: ms.residual_norm,
            tolerance: FIRST_ORDER_GATE * (1.0 + ms.grad_f_norm),
        });
    }
    geometry::unit_normal_f(b)?;
    let gnorm = b.grad_f().norm();
    let hl = lagrangian_hessian(b, &ms.lambda)?;
    let tol = tol.unwrap_or_else(|| default_tol(&hl) / gnorm);
    let mut out = CurvatureComparisonReport {
        directions: Vec::with_capacity(directions.len()),
        lhs: Vec::with_capacity(directions.len()),
        rhs: Vec::with_capacity(directions.len()),
        gaps: Vec::with_capacity(directions.len()),
        identity_residuals: Vec::with_capacity(directions.len()),
        holds: true,
        tol,
    };
    for d in directions {
        let norm = d.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput(
                "direction must be nonzero and finite".into(),
            ));
        }
        let v = d / norm;
        let lhs = geometry::sff_f(b, &v)?.along_nu_f;
        let rhs = geometry::sff_g(b, &v)?.along_nu_f;
        let gap = rhs - lhs;
        let quad = v.dot(&(&hl * &v)) / gnorm;
        out.directions.push(v.iter().copied().collect());
        out.lhs.push(lhs);
        out.rhs.push(rhs);
        out.gaps.push(gap);
        out.identity_residuals.push((gap - quad).abs());
    }
    out.holds = out.min_gap().is_none_or(|g| g >= -tol);
    Ok(out)
}

/// Quadrant label of a planar curvature report.
pub fn figure1_quadrant(report: &PlanarCurvatureReport) -> Quadrant {
    Quadrant::classify(report.kappa_f, report.kappa_g)
}
