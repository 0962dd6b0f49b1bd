//! Normal-section curves on `M_{f,x*}` and `M_g`.
//!
//! A curve is traced by marching the parameter `t` outward from 0 in both
//! directions and solving, at each `t`, for the normal coordinates `b` in
//!
//! * `f(x* + t v + b ∇f(x*)) = f(x*)` for the level set, or
//! * `g(x* + t v + Jg(x*)^T b) = 0` for the constraint manifold,
//!
//! by Newton's method warm-started from the previous `b`. Newton failure
//! truncates the curve symmetrically; it only errors when not even the
//! first step converges.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::geometry::{DerivativeBundle, REGULARITY_EPS, TANGENCY_TOL};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceParams {
    /// The curve parameter ranges over `[-half_width, half_width]`.
    pub half_width: f64,
    pub step: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl TraceParams {
    pub fn new(
        half_width: f64,
        step: f64,
        newton_tol: f64,
        newton_max_iter: usize,
    ) -> Result<Self> {
        let p = TraceParams {
            half_width,
            step,
            newton_tol,
            newton_max_iter,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.half_width.is_finite()
            && self.step > 0.0
            && self.step < self.half_width
            && self.newton_tol > 0.0
            && self.newton_max_iter > 0;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "trace parameters need 0 < step < half_width, newton_tol > 0 and max_iter > 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// Defaults from the local feature scale `grad_norm / (1 + hess_max)`:
    /// half width is half the scale, 200 steps per side.
    pub fn from_feature_scale(grad_norm: f64, hess_max: f64) -> Self {
        let half_width = 0.5 * grad_norm / (1.0 + hess_max);
        TraceParams {
            half_width,
            step: half_width / 200.0,
            newton_tol: 1e-12,
            newton_max_iter: 50,
        }
    }

    /// Defaults for the level set `M_{f,x*}`.
    pub fn default_level(b: &DerivativeBundle) -> Self {
        TraceParams::from_feature_scale(b.grad_f().norm(), linalg::max_abs(b.hess_f()))
    }

    /// Defaults for `M_g`, using `sigma_min(Jg)` as the gradient scale.
    pub fn default_constraint(b: &DerivativeBundle) -> Self {
        let sigma = linalg::singular_values(b.jac_g())
            .first()
            .copied()
            .unwrap_or(0.0);
        let hess = b.hess_g().iter().map(linalg::max_abs).fold(0.0, f64::max);
        TraceParams::from_feature_scale(sigma, hess)
    }

    /// Same half width, with the step chosen explicitly.
    pub fn with_step(self, step: f64) -> Self {
        TraceParams { step, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    LevelSetF,
    ConstraintG,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    /// `t` is the coordinate along the tangent direction `v`.
    Section,
    ArcLength,
}

/// Samples `γ(t)` of a traced curve on a grid symmetric about 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracedCurve {
    pub ts: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// Largest `|t|` reached on both sides.
    pub converged_extent: f64,
    pub kind: CurveKind,
    pub parametrization: Parametrization,
    /// Parameter at which Newton failed first, if it did.
    pub stopped_at: Option<f64>,
}

impl TracedCurve {
    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn origin_index(&self) -> usize {
        self.ts.len() / 2
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.points[i])
    }

    /// CSV with header `t,x1,...,xn`, rows in increasing `t`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for k in 1..=self.dim() {
            out.push_str(&format!(",x{k}"));
        }
        out.push('\n');
        for (t, p) in self.ts.iter().zip(&self.points) {
            out.push_str(&t.to_string());
            for x in p {
                out.push(',');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Residual `G(base + N b) - target` and its Jacobian `J_G N` with respect
/// to `b`.
fn section_system(
    funcs: &[Expression],
    targets: &[f64],
    point: &DVector<f64>,
    normal: &DMatrix<f64>,
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let k = funcs.len();
    let n = point.len();
    let mut r = DVector::zeros(k);
    let mut jac = DMatrix::zeros(k, n);
    for (i, f) in funcs.iter().enumerate() {
        let j = f.eval_jet2(point.as_slice()).ok()?;
        r[i] = j.value() - targets[i];
        for (c, d) in j.grad().iter().enumerate() {
            jac[(i, c)] = *d;
        }
    }
    Some((r, jac * normal))
}

/// Smallest accepted ratio of the reduced Jacobian determinant to its value
/// at `x*`.
const CHART_DET_RATIO: f64 = 1e-6;

/// Newton solve in the normal coordinates. Returns `None` on divergence,
/// singular steps, or when the solution leaves the chart: the reduced
/// Jacobian determinant changes sign or nearly vanishes relative to its
/// value at `x*`.
pub(crate) fn newton_normal(
    funcs: &[Expression],
    targets: &[f64],
    base: &DVector<f64>,
    normal: &DMatrix<f64>,
    start: &DVector<f64>,
    params: &TraceParams,
) -> Option<DVector<f64>> {
    // J_G(x*) = N^T in both uses, so N^T N is the reference Jacobian
    let det_ref = (normal.transpose() * normal).determinant();
    let in_chart = |jac: &DMatrix<f64>| jac.determinant() > CHART_DET_RATIO * det_ref;
    let converged = |r: &DVector<f64>| {
        r.iter()
            .zip(targets)
            .all(|(ri, ti)| ri.abs() <= params.newton_tol * (1.0 + ti.abs()))
    };
    let mut b = start.clone();
    for iter in 0..params.newton_max_iter {
        let (r, jac) = section_system(funcs, targets, &(base + normal * &b), normal)?;
        if converged(&r) && iter == 0 {
            // an exact start (flat manifolds) is kept as is
            return in_chart(&jac).then_some(b);
        }
        if converged(&r) {
            // polish to rounding level while the residual keeps shrinking
            let mut best = (r.amax(), b.clone(), jac);
            for _ in 0..2 {
                let step = best.2.clone().lu().solve(&(-(&r)))?;
                let cand = &best.1 + step;
                match section_system(funcs, targets, &(base + normal * &cand), normal) {
                    Some((rc, jc)) if rc.amax() < best.0 => best = (rc.amax(), cand, jc),
                    _ => break,
                }
            }
            return in_chart(&best.2).then_some(best.1);
        }
        let step = jac.lu().solve(&(-r))?;
        if !step.iter().all(|s| s.is_finite()) {
            return None;
        }
        b += step;
    }
    None
}

fn march(
    funcs: &[Expression],
    targets: &[f64],
    x_star: &DVector<f64>,
    v: &DVector<f64>,
    normal: &DMatrix<f64>,
    params: &TraceParams,
    kind: CurveKind,
) -> Result<TracedCurve> {
    params.validate()?;
    let steps = (params.half_width / params.step + 1e-9).floor() as usize;
    let mut sides: Vec<Vec<DVector<f64>>> = Vec::with_capacity(2);
    let mut stopped_at: Option<f64> = None;
    for side in [1.0, -1.0] {
        let mut b = DVector::zeros(normal.ncols());
        let mut pts = Vec::with_capacity(steps);
        for k in 1..=steps {
            let t = side * k as f64 * params.step;
            let base = x_star + v * t;
            match newton_normal(funcs, targets, &base, normal, &b, params) {
                Some(sol) => {
                    pts.push(&base + normal * &sol);
                    b = sol;
                }
                None => {
                    if stopped_at.is_none_or(|s| t.abs() < s.abs()) {
                        stopped_at = Some(t);
                    }
                    break;
                }
            }
        }
        sides.push(pts);
    }
    let reach = sides[0].len().min(sides[1].len());
    if reach == 0 {
        return Err(Error::NewtonDivergence {
            at: stopped_at.unwrap_or(params.step),
        });
    }
    let mut ts = Vec::with_capacity(2 * reach + 1);
    let mut points = Vec::with_capacity(2 * reach + 1);
    for k in (1..=reach).rev() {
        ts.push(-(k as f64) * params.step);
        points.push(sides[1][k - 1].iter().copied().collect());
    }
    ts.push(0.0);
    points.push(x_star.iter().copied().collect());
    for k in 1..=reach {
        ts.push(k as f64 * params.step);
        points.push(sides[0][k - 1].iter().copied().collect());
    }
    Ok(TracedCurve {
        ts,
        points,
        converged_extent: reach as f64 * params.step,
        kind,
        parametrization: Parametrization::Section,
        stopped_at,
    })
}

fn check_unit(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} entries, expected {n}",
            v.len()
        )));
    }
    if (v.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "direction must have unit norm (got {})",
            v.norm()
        )));
    }
    Ok(())
}

/// Traces `M_{f,x*} ∩ {x* + t v + b ∇f(x*)}`.
pub fn trace_level_section(
    f: &Expression,
    x_star: &[f64],
    v: &[f64],
    params: &TraceParams,
) -> Result<TracedCurve> {
    let n = f.dim();
    let x = DVector::from_column_slice(x_star);
    let v = DVector::from_column_slice(v);
    check_unit(&v, n)?;
    let jet = f.eval_jet2(x_star)?;
    let grad = jet.gradient();
    let norm = grad.norm();
    if !(norm > REGULARITY_EPS) {
        return Err(Error::DegeneratePoint {
            grad_norm: norm,
            threshold: REGULARITY_EPS,
        });
    }
    let defect = grad.dot(&v).abs();
    if defect > TANGENCY_TOL * norm {
        return Err(Error::NotTangent {
            defect,
            tolerance: TANGENCY_TOL * norm,
        });
    }
    let normal = DMatrix::from_column_slice(n, 1, grad.as_slice());
    march(
        std::slice::from_ref(f),
        &[jet.value()],
        &x,
        &v,
        &normal,
        params,
        CurveKind::LevelSetF,
    )
}

/// Traces `M_g ∩ {x* + t v + Jg(x*)^T b}`. `x*` must satisfy `g(x*) = 0`
/// within `newton_tol`.
pub fn trace_constraint_section(
    g: &[Expression],
    x_star: &[f64],
    v: &[f64],
    params: &TraceParams,
) -> Result<TracedCurve> {
    let n = x_star.len();
    let x = DVector::from_column_slice(x_star);
    let v = DVector::from_column_slice(v);
    check_unit(&v, n)?;
    let m = g.len();
    let mut jac = DMatrix::zeros(m, n);
    for (i, gi) in g.iter().enumerate() {
        let jet = gi.eval_jet2(x_star)?;
        if jet.value().abs() > params.newton_tol {
            return Err(Error::InvalidInput(format!(
                "point is not on the constraint manifold: g{} = {:e}",
                i + 1,
                jet.value()
            )));
        }
        for (c, d) in jet.grad().iter().enumerate() {
            jac[(i, c)] = *d;
        }
    }
    let (_, sigma_max) = linalg::full_row_rank(&jac)?;
    let defect = (&jac * &v).norm();
    if defect > TANGENCY_TOL * sigma_max {
        return Err(Error::NotTangent {
            defect,
            tolerance: TANGENCY_TOL * sigma_max,
        });
    }
    let normal = jac.transpose();
    march(
        g,
        &vec![0.0; m],
        &x,
        &v,
        &normal,
        params,
        CurveKind::ConstraintG,
    )
}

fn uniform_step(ts: &[f64]) -> Result<f64> {
    if ts.len() < 5 {
        return Err(Error::InsufficientSamples {
            need: 5,
            have: ts.len(),
        });
    }
    let h = ts[1] - ts[0];
    let uniform = ts
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300));
    if !(h > 0.0) || !uniform {
        return Err(Error::InvalidInput("curve grid is not uniform".into()));
    }
    Ok(h)
}

/// Piecewise cubic Hermite interpolant of the samples with fourth-order
/// finite-difference tangents.
struct Hermite<'a> {
    ts: &'a [f64],
    points: Vec<DVector<f64>>,
    slopes: Vec<DVector<f64>>,
    h: f64,
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

impl<'a> Hermite<'a> {
    fn new(c: &'a TracedCurve, h: f64) -> Self {
        let points: Vec<DVector<f64>> = (0..c.len()).map(|i| c.point(i)).collect();
        let last = points.len() - 1;
        let slopes = (0..points.len())
            .map(|i| {
                let p = |j: usize| &points[j];
                if i >= 2 && i + 2 <= last {
                    (p(i - 2) - p(i - 1) * 8.0 + p(i + 1) * 8.0 - p(i + 2)) / (12.0 * h)
                } else if i >= 1 && i < last {
                    (p(i + 1) - p(i - 1)) / (2.0 * h)
                } else if i == 0 {
                    (p(0) * -3.0 + p(1) * 4.0 - p(2)) / (2.0 * h)
                } else {
                    (p(last) * 3.0 - p(last - 1) * 4.0 + p(last - 2)) / (2.0 * h)
                }
            })
            .collect();
        Hermite {
            ts: &c.ts,
            points,
            slopes,
            h,
        }
    }

    fn eval(&self, seg: usize, tau: f64) -> DVector<f64> {
        let (t2, t3) = (tau * tau, tau * tau * tau);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + tau;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        &self.points[seg] * h00
            + &self.slopes[seg] * (h10 * self.h)
            + &self.points[seg + 1] * h01
            + &self.slopes[seg + 1] * (h11 * self.h)
    }

    fn speed(&self, seg: usize, tau: f64) -> f64 {
        let t2 = tau * tau;
        let d00 = 6.0 * t2 - 6.0 * tau;
        let d10 = 3.0 * t2 - 4.0 * tau + 1.0;
        let d01 = -6.0 * t2 + 6.0 * tau;
        let d11 = 3.0 * t2 - 2.0 * tau;
        let d = (&self.points[seg] * d00
            + &self.slopes[seg] * (d10 * self.h)
            + &self.points[seg + 1] * d01
            + &self.slopes[seg + 1] * (d11 * self.h))
            / self.h;
        d.norm()
    }

    /// Arc length of segment `seg` from `tau = 0` to `tau = upto`.
    fn length(&self, seg: usize, upto: f64) -> f64 {
        let half = 0.5 * upto;
        GAUSS5
            .iter()
            .map(|(x, w)| w * self.speed(seg, half * (x + 1.0)))
            .sum::<f64>()
            * half
            * self.h
    }

    fn segments(&self) -> usize {
        self.ts.len() - 1
    }
}

/// Resamples the curve on a uniform arc-length grid with the same spacing
/// as the input grid, `s = 0` at `x*`.
///
/// Arc length comes from Gauss-Legendre quadrature of a cubic Hermite
/// interpolant with fourth-order tangents; each new sample is the
/// interpolant at the exact inverse of the arc-length map.
pub fn arclength_reparametrize(c: &TracedCurve) -> Result<TracedCurve> {
    let h = uniform_step(&c.ts)?;
    let origin = c.origin_index();
    if c.ts[origin] != 0.0 || c.len().is_multiple_of(2) {
        return Err(Error::InvalidInput(
            "curve grid must be symmetric about 0".into(),
        ));
    }
    let herm = Hermite::new(c, h);
    let segs = herm.segments();
    let seg_len: Vec<f64> = (0..segs).map(|i| herm.length(i, 1.0)).collect();
    // cumulative arc length at each node, zero at the origin
    let mut s = vec![0.0; c.len()];
    for i in origin + 1..c.len() {
        s[i] = s[i - 1] + seg_len[i - 1];
    }
    for i in (0..origin).rev() {
        s[i] = s[i + 1] - seg_len[i];
    }
    let s_max = s[c.len() - 1].min(-s[0]);
    let reach = (s_max / h + 1e-9).floor() as usize;
    if reach < 2 {
        return Err(Error::InsufficientSamples {
            need: 5,
            have: 2 * reach + 1,
        });
    }
    let locate = |target: f64| -> DVector<f64> {
        let seg = match s.partition_point(|si| *si <= target) {
            0 => 0,
            k => (k - 1).min(segs - 1),
        };
        let want = target - s[seg];
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if herm.length(seg, mid) < want {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        herm.eval(seg, 0.5 * (lo + hi))
    };
    let mut ts = Vec::with_capacity(2 * reach + 1);
    let mut points = Vec::with_capacity(2 * reach + 1);
    for k in -(reach as i64)..=(reach as i64) {
        let target = k as f64 * h;
        ts.push(target);
        if k == 0 {
            points.push(c.points[origin].clone());
        } else {
            points.push(locate(target).iter().copied().collect());
        }
    }
    Ok(TracedCurve {
        ts,
        points,
        converged_extent: reach as f64 * h,
        kind: c.kind,
        parametrization: Parametrization::ArcLength,
        stopped_at: c.stopped_at,
    })
}

/// The two samples on each side of the origin and the spacing.
fn stencil(c: &TracedCurve) -> Result<([DVector<f64>; 5], f64)> {
    let i0 = c.origin_index();
    if c.len() < 5 || i0 < 2 || i0 + 2 >= c.len() || c.ts[i0] != 0.0 {
        return Err(Error::InsufficientSamples {
            need: 5,
            have: c.len(),
        });
    }
    let h = c.ts[i0 + 1];
    let symmetric = (0..=2).all(|k| {
        let k = k as f64;
        (c.ts[i0 + k as usize] - k * h).abs() <= 1e-9 * h
            && (c.ts[i0 - k as usize] + k * h).abs() <= 1e-9 * h
    });
    if !(h > 0.0) || !symmetric {
        return Err(Error::InvalidInput(
            "samples are not symmetric about 0".into(),
        ));
    }
    Ok((
        [
            c.point(i0 - 2),
            c.point(i0 - 1),
            c.point(i0),
            c.point(i0 + 1),
            c.point(i0 + 2),
        ],
        h,
    ))
}

fn fd1(p: &[DVector<f64>; 5], h: f64) -> DVector<f64> {
    (&p[0] - &p[1] * 8.0 + &p[3] * 8.0 - &p[4]) / (12.0 * h)
}

fn fd2(p: &[DVector<f64>; 5], h: f64) -> DVector<f64> {
    (-&p[0] + &p[1] * 16.0 - &p[2] * 30.0 + &p[3] * 16.0 - &p[4]) / (12.0 * h * h)
}

/// Five-point central estimate of `γ'(0)`.
pub fn first_derivative_at_zero(c: &TracedCurve) -> Result<DVector<f64>> {
    let (p, h) = stencil(c)?;
    Ok(fd1(&p, h))
}

/// Five-point central estimate of `γ''(0)`.
pub fn second_derivative_at_zero(c: &TracedCurve) -> Result<DVector<f64>> {
    let (p, h) = stencil(c)?;
    Ok(fd2(&p, h))
}

/// Chain-rule consistency along a curve through `x*` on `M_g`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainRuleResidual {
    /// Finite-difference `(f∘γ)''(0)`.
    pub f_second: f64,
    /// `γ'(0)^T ∇²f γ'(0) + ∇f^T γ''(0)`.
    pub f_chain: f64,
    /// `|f_second - f_chain|`.
    pub residual_f: f64,
    /// `‖((g_i∘γ)''(0))_i‖`, zero on the constraint manifold.
    pub residual_g: f64,
}

fn compose_second(e: &Expression, p: &[DVector<f64>; 5], h: f64) -> Result<f64> {
    let v: Vec<f64> = p
        .iter()
        .map(|x| e.eval_value(x.as_slice()))
        .collect::<Result<_>>()?;
    Ok((-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h))
}

pub fn chain_rule_checks(
    f: &Expression,
    g: &[Expression],
    c: &TracedCurve,
    b: &DerivativeBundle,
) -> Result<ChainRuleResidual> {
    let (p, h) = stencil(c)?;
    let d1 = fd1(&p, h);
    let d2 = fd2(&p, h);
    let f_second = compose_second(f, &p, h)?;
    let f_chain = d1.dot(&(b.hess_f() * &d1)) + b.grad_f().dot(&d2);
    let residual_g = g
        .iter()
        .map(|gi| compose_second(gi, &p, h))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    Ok(ChainRuleResidual {
        f_second,
        f_chain,
        residual_f: (f_second - f_chain).abs(),
        residual_g,
    })
}

/// The planar curvature inequality rebuilt from a traced constraint curve:
/// `-γ'^T ∇²f γ' / ‖∇f‖ <= -(λ/|λ|) γ'^T ∇²g γ' / ‖∇g‖`, where
/// `γ'^T ∇²g γ'` is taken as `-∇g^T γ''(0)` from `(g∘γ)''(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveInequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn planar_curve_inequality(
    c: &TracedCurve,
    b: &DerivativeBundle,
    lambda: f64,
    tol: f64,
) -> Result<CurveInequality> {
    if b.n() != 2 || b.m() != 1 {
        return Err(Error::DimensionMismatch(
            "planar inequality needs n = 2, m = 1".into(),
        ));
    }
    let (p, h) = stencil(c)?;
    let d1 = fd1(&p, h);
    let d2 = fd2(&p, h);
    let grad_g = b.jac_g().row(0).transpose();
    let q_f = d1.dot(&(b.hess_f() * &d1));
    let q_g = -grad_g.dot(&d2);
    let lhs = -q_f / b.grad_f().norm();
    let rhs = -lambda.signum() * q_g / grad_g.norm();
    Ok(CurveInequality {
        lhs,
        rhs,
        holds: lhs <= rhs + tol,
    })
}
