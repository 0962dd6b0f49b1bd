//! Point-local geometry of the level set `M_{f,x}` and the constraint
//! manifold `M_g`: unit normals, tangent projectors, tangent bases, second
//! fundamental forms and planar algebraic curvatures.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Jet2;
use crate::implicit::TracedCurve;
use crate::linalg::{self, Gram};

/// Threshold on `‖∇f‖` below which a point is not regular for `f`.
pub const REGULARITY_EPS: f64 = 1e-10;

/// Relative tolerance for tangency of a direction.
pub const TANGENCY_TOL: f64 = 1e-8;

/// Curvatures at or below this magnitude are zero for the quadrant tie rule.
pub const CURVATURE_ZERO: f64 = 1e-10;

/// Maximal angle (radians) between `∇f` and `∇g` accepted as parallel in
/// the planar comparison.
pub const PARALLEL_ANGLE_TOL: f64 = 1e-6;

/// Values of `f`, `g` and their first and second derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    x: DVector<f64>,
    fval: f64,
    grad_f: DVector<f64>,
    hess_f: DMatrix<f64>,
    gvals: DVector<f64>,
    jac_g: DMatrix<f64>,
    hess_g: Vec<DMatrix<f64>>,
}

impl DerivativeBundle {
    pub fn from_jets(x: &[f64], f: &Jet2, g: &[Jet2]) -> Result<Self> {
        let n = x.len();
        if f.dim() != n || g.iter().any(|j| j.dim() != n) {
            return Err(Error::DimensionMismatch(
                "jet dimension differs from point".into(),
            ));
        }
        let mut jac_g = DMatrix::zeros(g.len(), n);
        for (i, gi) in g.iter().enumerate() {
            for (k, d) in gi.grad().iter().enumerate() {
                jac_g[(i, k)] = *d;
            }
        }
        DerivativeBundle::new(
            DVector::from_column_slice(x),
            f.value(),
            f.gradient(),
            f.hessian(),
            DVector::from_iterator(g.len(), g.iter().map(Jet2::value)),
            jac_g,
            g.iter().map(Jet2::hessian).collect(),
        )
    }

    /// Builds a bundle from raw parts, checking shapes, finiteness,
    /// symmetry and `m <= n`.
    pub fn new(
        x: DVector<f64>,
        fval: f64,
        grad_f: DVector<f64>,
        hess_f: DMatrix<f64>,
        gvals: DVector<f64>,
        jac_g: DMatrix<f64>,
        hess_g: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = x.len();
        let m = gvals.len();
        let shapes_ok = grad_f.len() == n
            && hess_f.shape() == (n, n)
            && jac_g.shape() == (m, n)
            && hess_g.len() == m
            && hess_g.iter().all(|h| h.shape() == (n, n));
        if !shapes_ok {
            return Err(Error::DimensionMismatch(
                "inconsistent bundle shapes".into(),
            ));
        }
        if m > n {
            return Err(Error::DimensionMismatch(format!(
                "{m} constraints exceed dimension {n}"
            )));
        }
        let finite = x.iter().all(|v| v.is_finite())
            && fval.is_finite()
            && grad_f.iter().all(|v| v.is_finite())
            && hess_f.iter().all(|v| v.is_finite())
            && gvals.iter().all(|v| v.is_finite())
            && jac_g.iter().all(|v| v.is_finite())
            && hess_g.iter().flat_map(|h| h.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite derivative data".into()));
        }
        if hess_f != hess_f.transpose() || hess_g.iter().any(|h| *h != h.transpose()) {
            return Err(Error::InvalidInput("Hessians must be symmetric".into()));
        }
        Ok(DerivativeBundle {
            x,
            fval,
            grad_f,
            hess_f,
            gvals,
            jac_g,
            hess_g,
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn m(&self) -> usize {
        self.gvals.len()
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn fval(&self) -> f64 {
        self.fval
    }

    pub fn grad_f(&self) -> &DVector<f64> {
        &self.grad_f
    }

    pub fn hess_f(&self) -> &DMatrix<f64> {
        &self.hess_f
    }

    pub fn gvals(&self) -> &DVector<f64> {
        &self.gvals
    }

    pub fn jac_g(&self) -> &DMatrix<f64> {
        &self.jac_g
    }

    pub fn hess_g(&self) -> &[DMatrix<f64>] {
        &self.hess_g
    }

    /// `(v^T ∇²g_i v)_i`, or more generally `(u^T ∇²g_i v)_i`.
    pub fn constraint_curvatures(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.m(), self.hess_g.iter().map(|h| u.dot(&(h * v))))
    }
}

/// Orthonormal basis of `Ker(Jg(x))` stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentBasis {
    v: DMatrix<f64>,
}

impl TangentBasis {
    pub fn from_matrix(v: DMatrix<f64>) -> Result<Self> {
        let k = v.ncols();
        let defect = (v.transpose() * &v - DMatrix::<f64>::identity(k, k)).amax();
        if k > 0 && defect > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "basis columns are not orthonormal (defect {defect:e})"
            )));
        }
        Ok(TangentBasis { v })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Number of columns, i.e. `n - m`.
    pub fn dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.v.column(i).into_owned()
    }

    /// `V a`.
    pub fn lift(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.v * a
    }
}

/// Orthogonal projector onto a tangent space.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    p: DMatrix<f64>,
    rank: usize,
}

impl Projector {
    fn new(p: DMatrix<f64>, rank: usize) -> Self {
        debug_assert!(
            (&p - p.transpose()).amax() <= 1e-10,
            "projector not symmetric"
        );
        debug_assert!((&p * &p - &p).amax() <= 1e-10, "projector not idempotent");
        debug_assert!(
            (p.trace() - rank as f64).abs() <= 1e-8,
            "projector trace mismatch"
        );
        Projector { p, rank }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Dimension of the tangent space.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.p * v
    }
}

/// Value of a second fundamental form on a diagonal pair `(v, v)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SffValue {
    /// The normal vector `h(v, v)`.
    pub vector_part: Vec<f64>,
    /// `<ν_f, h(v, v)>`.
    pub along_nu_f: f64,
}

/// Quadrants of the planar curvature picture, by sign of `(κ_f, κ_g)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrant {
    /// `κ_f >= 0`, `κ_g >= 0`
    A,
    /// `κ_f <= 0`, `κ_g <= 0`
    B,
    /// `κ_f >= 0`, `κ_g <= 0`
    C,
    /// `κ_f <= 0`, `κ_g >= 0`
    D,
}

impl Quadrant {
    /// Sign-pattern classification. A curvature with magnitude at most
    /// [`CURVATURE_ZERO`] takes the sign of its partner; two zeros give `A`.
    pub fn classify(kappa_f: f64, kappa_g: f64) -> Quadrant {
        let zf = kappa_f.abs() <= CURVATURE_ZERO;
        let zg = kappa_g.abs() <= CURVATURE_ZERO;
        if zf && zg {
            return Quadrant::A;
        }
        let pf = if zf { kappa_g > 0.0 } else { kappa_f > 0.0 };
        let pg = if zg { kappa_f > 0.0 } else { kappa_g > 0.0 };
        match (pf, pg) {
            (true, true) => Quadrant::A,
            (false, false) => Quadrant::B,
            (true, false) => Quadrant::C,
            (false, true) => Quadrant::D,
        }
    }

    pub fn label(self) -> char {
        match self {
            Quadrant::A => 'a',
            Quadrant::B => 'b',
            Quadrant::C => 'c',
            Quadrant::D => 'd',
        }
    }
}

/// Signed curvatures of the two planar curves through `x*` and the
/// comparison `κ_f <= ±κ_g`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarCurvatureReport {
    pub kappa_f: f64,
    pub kappa_g: f64,
    /// `+1` when `∇f` and `∇g` point the same way, `-1` otherwise.
    pub sign: i8,
    pub u_f: [f64; 2],
    pub u_g: [f64; 2],
    pub holds: bool,
    pub quadrant: Quadrant,
    pub tol: f64,
}

/// `∇f / ‖∇f‖`.
pub fn unit_normal_f(b: &DerivativeBundle) -> Result<DVector<f64>> {
    let norm = b.grad_f().norm();
    if !(norm > REGULARITY_EPS) {
        return Err(Error::DegeneratePoint {
            grad_norm: norm,
            threshold: REGULARITY_EPS,
        });
    }
    Ok(b.grad_f() / norm)
}

/// `Π_f = I - ν_f ν_f^T`.
pub fn projector_hypersurface(b: &DerivativeBundle) -> Result<Projector> {
    let nu = unit_normal_f(b)?;
    let n = b.n();
    let p = DMatrix::identity(n, n) - &nu * nu.transpose();
    Ok(Projector::new(p, n - 1))
}

/// `Π_g = I - Jg^T (Jg Jg^T)^{-1} Jg`, with the Gram system solved by
/// Cholesky.
pub fn projector_constraint(b: &DerivativeBundle) -> Result<Projector> {
    let j = b.jac_g();
    let gram = Gram::new(j)?;
    let n = b.n();
    let mut p = DMatrix::identity(n, n);
    for k in 0..n {
        let y = gram.solve(&j.column(k).into_owned());
        let col = j.transpose() * y;
        for i in 0..n {
            p[(i, k)] -= col[i];
        }
    }
    linalg::symmetrize(&mut p);
    Ok(Projector::new(p, n - b.m()))
}

/// Orthonormal basis of `T_x M_g = Ker(Jg(x))`.
pub fn tangent_basis(b: &DerivativeBundle) -> Result<TangentBasis> {
    Ok(TangentBasis {
        v: linalg::kernel_basis(b.jac_g())?,
    })
}

/// Orthonormal basis of `T_x M_{f,x} = ∇f(x)^⊥`.
pub fn tangent_basis_f(b: &DerivativeBundle) -> Result<TangentBasis> {
    unit_normal_f(b)?;
    let row = DMatrix::from_row_slice(1, b.n(), b.grad_f().as_slice());
    Ok(TangentBasis {
        v: linalg::kernel_basis(&row)?,
    })
}

fn check_tangent_f(b: &DerivativeBundle, v: &DVector<f64>) -> Result<()> {
    let g = b.grad_f();
    let defect = g.dot(v).abs();
    let tolerance = TANGENCY_TOL * g.norm() * v.norm();
    if defect > tolerance {
        return Err(Error::NotTangent { defect, tolerance });
    }
    Ok(())
}

fn check_tangent_g(b: &DerivativeBundle, v: &DVector<f64>) -> Result<()> {
    let (_, sigma_max) = linalg::full_row_rank(b.jac_g())?;
    let defect = (b.jac_g() * v).norm();
    let tolerance = TANGENCY_TOL * sigma_max * v.norm();
    if defect > tolerance {
        return Err(Error::NotTangent { defect, tolerance });
    }
    Ok(())
}

fn check_len(b: &DerivativeBundle, v: &DVector<f64>) -> Result<()> {
    if v.len() != b.n() {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} entries, expected {}",
            v.len(),
            b.n()
        )));
    }
    Ok(())
}

/// Bilinear second fundamental form of `M_{f,x}`:
/// `h_f(u, v) = -ν_f (u^T ∇²f v) / ‖∇f‖`.
pub fn sff_f_bilinear(
    b: &DerivativeBundle,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len(b, u)?;
    check_len(b, v)?;
    let nu = unit_normal_f(b)?;
    check_tangent_f(b, u)?;
    check_tangent_f(b, v)?;
    let q = u.dot(&(b.hess_f() * v));
    Ok(-&nu * (q / b.grad_f().norm()))
}

/// Bilinear second fundamental form of `M_g`:
/// `h_g(u, v) = -Jg^T (Jg Jg^T)^{-1} (u^T ∇²g_i v)_i`.
pub fn sff_g_bilinear(
    b: &DerivativeBundle,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len(b, u)?;
    check_len(b, v)?;
    check_tangent_g(b, u)?;
    check_tangent_g(b, v)?;
    let gram = Gram::new(b.jac_g())?;
    let y = gram.solve(&b.constraint_curvatures(u, v));
    Ok(-(b.jac_g().transpose() * y))
}

/// `h_{f,x}(v, v)` and its component along `ν_f`.
pub fn sff_f(b: &DerivativeBundle, v: &DVector<f64>) -> Result<SffValue> {
    let h = sff_f_bilinear(b, v, v)?;
    let nu = unit_normal_f(b)?;
    let value = SffValue {
        along_nu_f: -v.dot(&(b.hess_f() * v)) / b.grad_f().norm(),
        vector_part: h.iter().copied().collect(),
    };
    debug_assert!(normal_defect(&projector_hypersurface(b)?, &h) <= 1e-8 * (1.0 + h.norm()));
    debug_assert!((nu.dot(&h) - value.along_nu_f).abs() <= 1e-12 * (1.0 + h.norm()));
    Ok(value)
}

/// `h_{g,x}(v, v)` and its component along `ν_f`.
pub fn sff_g(b: &DerivativeBundle, v: &DVector<f64>) -> Result<SffValue> {
    let h = sff_g_bilinear(b, v, v)?;
    let nu = unit_normal_f(b)?;
    debug_assert!(normal_defect(&projector_constraint(b)?, &h) <= 1e-8 * (1.0 + h.norm()));
    Ok(SffValue {
        along_nu_f: nu.dot(&h),
        vector_part: h.iter().copied().collect(),
    })
}

/// `‖Π h‖`: how far `h` is from the normal space of `Π`.
pub fn normal_defect(p: &Projector, h: &DVector<f64>) -> f64 {
    p.apply(h).norm()
}

/// Finite-difference estimate of `(dΠ(x) v) v` along a traced curve with
/// `γ(0) = x`, `γ'(0) = v`, using the nearest samples on either side of 0.
///
/// Only meant as an independent check of [`sff_f`] and [`sff_g`].
pub fn sff_fd_oracle<P>(projector_fn: P, curve: &TracedCurve) -> Result<DVector<f64>>
where
    P: Fn(&[f64]) -> Result<Projector>,
{
    let i0 = curve.origin_index();
    if i0 == 0 || i0 + 1 >= curve.len() {
        return Err(Error::InsufficientSamples {
            need: 3,
            have: curve.len(),
        });
    }
    let (tm, tp) = (curve.ts[i0 - 1], curve.ts[i0 + 1]);
    let (pm, pp) = (&curve.points[i0 - 1], &curve.points[i0 + 1]);
    let width = tp - tm;
    let v = (DVector::from_column_slice(pp) - DVector::from_column_slice(pm)) / width;
    let dp = (projector_fn(pp)?.matrix() - projector_fn(pm)?.matrix()) / width;
    Ok(dp * v)
}

/// Algebraic curvatures `κ = -u^T ∇²(·) u / ‖∇(·)‖` of the planar curves
/// `M_{f,x*}` and `M_g` with `u` the normalized `(∂₂·, -∂₁·)`, and the
/// verdict `κ_f <= sign · κ_g + tol`.
///
/// `tol` defaults to `1e-8 (1 + ‖∇²L‖_max) / ‖∇f‖`, the verdict tolerance
/// of the projected Lagrangian Hessian expressed in curvature units.
pub fn planar_curvatures(b: &DerivativeBundle, tol: Option<f64>) -> Result<PlanarCurvatureReport> {
    if b.n() != 2 || b.m() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "planar curvatures need n = 2, m = 1 (got n = {}, m = {})",
            b.n(),
            b.m()
        )));
    }
    let gf = b.grad_f();
    let gg = b.jac_g().row(0).transpose();
    unit_normal_f(b)?;
    let ng = gg.norm();
    if !(ng > REGULARITY_EPS) {
        return Err(Error::DegeneratePoint {
            grad_norm: ng,
            threshold: REGULARITY_EPS,
        });
    }
    let nf = gf.norm();
    let sin_angle = (gf[0] * gg[1] - gf[1] * gg[0]).abs() / (nf * ng);
    if sin_angle > PARALLEL_ANGLE_TOL {
        return Err(Error::FirstOrderViolated {
            residual_norm: sin_angle,
            tolerance: PARALLEL_ANGLE_TOL,
        });
    }
    let u_f = DVector::from_column_slice(&[gf[1], -gf[0]]) / nf;
    let u_g = DVector::from_column_slice(&[gg[1], -gg[0]]) / ng;
    let kappa_f = -u_f.dot(&(b.hess_f() * &u_f)) / nf;
    let kappa_g = -u_g.dot(&(&b.hess_g()[0] * &u_g)) / ng;
    let sign: i8 = if gf.dot(&gg) >= 0.0 { 1 } else { -1 };
    let tol = tol.unwrap_or_else(|| {
        let lambda = gg.dot(gf) / (ng * ng);
        let hl = b.hess_f() - &b.hess_g()[0] * lambda;
        1e-8 * (1.0 + linalg::max_abs(&hl)) / nf
    });
    Ok(PlanarCurvatureReport {
        kappa_f,
        kappa_g,
        sign,
        u_f: [u_f[0], u_f[1]],
        u_g: [u_g[0], u_g[1]],
        holds: kappa_f <= f64::from(sign) * kappa_g + tol,
        quadrant: Quadrant::classify(kappa_f, kappa_g),
        tol,
    })
}
