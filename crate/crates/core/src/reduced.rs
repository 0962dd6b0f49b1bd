//! The reduced functional `F(a) = f(x* + V a + Jg(x*)^T ψ(a))` on tangent
//! coordinates `a`, where `ψ` solves `g(x* + V a + Jg(x*)^T ψ(a)) = 0`.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, DerivativeBundle, TangentBasis};
use crate::implicit::{newton_normal, TraceParams};
use crate::linalg::{self, Gram};
use crate::optimality::{self, MultiplierSet, SecondOrderReport};
use crate::problem::Problem;

/// Largest `‖g(x*)‖_∞` accepted as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Margins above this value count as passing.
pub const MARGIN_TOL: f64 = 1e-12;

/// Relative decrease of `F` below `F(0)` that refutes minimality.
pub const REFUTE_TOL: f64 = 1e-10;

pub struct ReducedFunctional {
    problem: Problem,
    x_star: DVector<f64>,
    basis: TangentBasis,
    normal: DMatrix<f64>,
    params: TraceParams,
    cache: Mutex<HashMap<Vec<u64>, DVector<f64>>>,
}

impl std::fmt::Debug for ReducedFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReducedFunctional")
            .field("x_star", &self.x_star.as_slice())
            .field("dim", &self.basis.dim())
            .finish_non_exhaustive()
    }
}

impl ReducedFunctional {
    /// Uses the default tangent basis at `x*`.
    pub fn new(problem: &Problem, x_star: &[f64]) -> Result<Self> {
        let b = problem.bundle(x_star)?;
        let basis = geometry::tangent_basis(&b)?;
        ReducedFunctional::with_basis(problem, x_star, basis)
    }

    pub fn with_basis(problem: &Problem, x_star: &[f64], basis: TangentBasis) -> Result<Self> {
        let b = problem.bundle(x_star)?;
        let (n, m) = (b.n(), b.m());
        if basis.ambient_dim() != n || basis.dim() != n - m {
            return Err(Error::DimensionMismatch(format!(
                "tangent basis is {}x{}, expected {n}x{}",
                basis.ambient_dim(),
                basis.dim(),
                n - m
            )));
        }
        let (_, sigma_max) = linalg::full_row_rank(b.jac_g())?;
        let defect = (b.jac_g() * basis.matrix()).amax();
        if defect > geometry::TANGENCY_TOL * sigma_max {
            return Err(Error::NotTangent {
                defect,
                tolerance: geometry::TANGENCY_TOL * sigma_max,
            });
        }
        let infeasible = b.gvals().amax();
        if infeasible > FEASIBILITY_TOL {
            return Err(Error::InvalidInput(format!(
                "point is not on the constraint manifold: max |g| = {infeasible:e}"
            )));
        }
        Ok(ReducedFunctional {
            problem: problem.clone(),
            x_star: b.x().clone(),
            normal: b.jac_g().transpose(),
            params: TraceParams::default_constraint(&b),
            basis,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Overrides the Newton tolerance and iteration cap used for `ψ`.
    pub fn with_newton(mut self, tol: f64, max_iter: usize) -> Self {
        self.params.newton_tol = tol;
        self.params.newton_max_iter = max_iter;
        self
    }

    pub fn basis(&self) -> &TangentBasis {
        &self.basis
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.x_star
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// Number of tangent coordinates, `n - m`.
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn newton_tol(&self) -> f64 {
        self.params.newton_tol
    }

    fn check_a(&self, a: &DVector<f64>) -> Result<()> {
        if a.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "tangent coordinates have {} entries, expected {}",
                a.len(),
                self.dim()
            )));
        }
        if !a.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "tangent coordinates must be finite".into(),
            ));
        }
        Ok(())
    }

    /// `ψ(a)`. Newton from `b = 0`, falling back to a continuation in `a`
    /// when the direct solve fails. `ψ(0) = 0` exactly.
    pub fn solve_psi(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_a(a)?;
        let m = self.problem.m();
        if a.iter().all(|v| *v == 0.0) {
            return Ok(DVector::zeros(m));
        }
        let key: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
        if let Some(b) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(b.clone());
        }
        let targets = vec![0.0; m];
        let g = self.problem.constraints();
        let solve = |a: &DVector<f64>, start: &DVector<f64>| {
            let base = &self.x_star + self.basis.lift(a);
            newton_normal(g, &targets, &base, &self.normal, start, &self.params)
        };
        let zero = DVector::zeros(m);
        let b = match solve(a, &zero) {
            Some(b) => b,
            None => {
                const STAGES: usize = 16;
                let mut b = zero;
                for k in 1..=STAGES {
                    let ak = a * (k as f64 / STAGES as f64);
                    b = solve(&ak, &b).ok_or(Error::NewtonDivergence { at: ak.norm() })?;
                }
                b
            }
        };
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(key, b.clone());
        Ok(b)
    }

    /// The feasible point `x* + V a + Jg(x*)^T ψ(a)`.
    pub fn lift(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
        let b = self.solve_psi(a)?;
        Ok(&self.x_star + self.basis.lift(a) + &self.normal * b)
    }

    /// `F(a)`.
    pub fn reduced_value(&self, a: &DVector<f64>) -> Result<f64> {
        let x = self.lift(a)?;
        self.problem.objective().eval_value(x.as_slice())
    }

    fn axis(&self, k: usize, h: f64) -> DVector<f64> {
        let mut a = DVector::zeros(self.dim());
        a[k] = h;
        a
    }

    fn check_step(h: f64) -> Result<()> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!(
                "finite-difference step must be positive (got {h})"
            )));
        }
        Ok(())
    }

    /// Central-difference gradient of `F` at 0.
    pub fn reduced_gradient_zero(&self, fd_step: f64) -> Result<DVector<f64>> {
        Self::check_step(fd_step)?;
        let k = self.dim();
        let mut g = DVector::zeros(k);
        for i in 0..k {
            let fp = self.reduced_value(&self.axis(i, fd_step))?;
            let fm = self.reduced_value(&self.axis(i, -fd_step))?;
            g[i] = (fp - fm) / (2.0 * fd_step);
        }
        Ok(g)
    }

    /// Second-order central differences of a vector-valued map at 0, one
    /// `k x k` matrix per output component.
    fn fd_hessians<F>(&self, h: f64, outputs: usize, eval: F) -> Result<Vec<DMatrix<f64>>>
    where
        F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    {
        let k = self.dim();
        let mut out = vec![DMatrix::zeros(k, k); outputs];
        let c = eval(&DVector::zeros(k))?;
        for i in 0..k {
            let p = eval(&self.axis(i, h))?;
            let m = eval(&self.axis(i, -h))?;
            for (o, mat) in out.iter_mut().enumerate() {
                mat[(i, i)] = (p[o] - 2.0 * c[o] + m[o]) / (h * h);
            }
            for j in i + 1..k {
                let ei = self.axis(i, h);
                let ej = self.axis(j, h);
                let pp = eval(&(&ei + &ej))?;
                let pm = eval(&(&ei - &ej))?;
                let mp = eval(&(-&ei + &ej))?;
                let mm = eval(&(-&ei - &ej))?;
                for (o, mat) in out.iter_mut().enumerate() {
                    let v = (pp[o] - pm[o] - mp[o] + mm[o]) / (4.0 * h * h);
                    mat[(i, j)] = v;
                    mat[(j, i)] = v;
                }
            }
        }
        Ok(out)
    }

    /// Central-difference Hessian of `F` at 0, symmetric by construction.
    pub fn reduced_hessian_zero(&self, fd_step: f64) -> Result<DMatrix<f64>> {
        Self::check_step(fd_step)?;
        let mut h = self
            .fd_hessians(fd_step, 1, |a| {
                self.reduced_value(a).map(|v| DVector::from_element(1, v))
            })?
            .remove(0);
        linalg::symmetrize(&mut h);
        Ok(h)
    }

    /// Central-difference `∇²ψ_j(0)` for each `j`.
    pub fn psi_hessians_zero(&self, fd_step: f64) -> Result<Vec<DMatrix<f64>>> {
        Self::check_step(fd_step)?;
        self.fd_hessians(fd_step, self.problem.m(), |a| self.solve_psi(a))
    }
}

/// `‖∇²F(0) - V^T ∇²L V‖_max` with the finite-difference Hessian.
pub fn lemma1_check(
    rf: &ReducedFunctional,
    b: &DerivativeBundle,
    ms: &MultiplierSet,
    fd_step: f64,
) -> Result<f64> {
    if !optimality::check_first_order(ms, optimality::FIRST_ORDER_GATE) {
        return Err(Error::FirstOrderViolated {
            residual_norm: ms.residual_norm,
            tolerance: optimality::FIRST_ORDER_GATE * (1.0 + ms.grad_f_norm),
        });
    }
    let hl = optimality::lagrangian_hessian(b, &ms.lambda)?;
    let v = rf.basis().matrix();
    let exact = v.transpose() * hl * v;
    let fd = rf.reduced_hessian_zero(fd_step)?;
    Ok(if exact.is_empty() {
        0.0
    } else {
        (fd - exact).amax()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiIdentityResidual {
    /// `max_i ‖V^T ∇²g_i V + Σ_j (∇g_i^T ∇g_j) ∇²ψ_j(0)‖_max`.
    pub second_derivative: f64,
    /// Largest defect of
    /// `a^T ∇²ψ(0) a = -(Jg Jg^T)^{-1} (a^T V^T ∇²g_i V a)_i` over sampled
    /// unit `a`.
    pub quadratic_form: f64,
}

/// Number of random directions in the quadratic-form check.
const PSI_DIRECTIONS: usize = 8;

pub fn psi_identities_check(
    rf: &ReducedFunctional,
    b: &DerivativeBundle,
    fd_step: f64,
    seed: u64,
) -> Result<PsiIdentityResidual> {
    let hpsi = rf.psi_hessians_zero(fd_step)?;
    let v = rf.basis().matrix();
    let j = b.jac_g();
    let gram_m = j * j.transpose();
    let projected: Vec<DMatrix<f64>> = b.hess_g().iter().map(|h| v.transpose() * h * v).collect();
    let mut second_derivative: f64 = 0.0;
    for (i, pg) in projected.iter().enumerate() {
        let mut lhs = pg.clone();
        for (jj, hp) in hpsi.iter().enumerate() {
            lhs += hp * gram_m[(i, jj)];
        }
        if !lhs.is_empty() {
            second_derivative = second_derivative.max(lhs.amax());
        }
    }
    let gram = Gram::new(j)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quadratic_form: f64 = 0.0;
    let k = rf.dim();
    for _ in 0..if k == 0 { 0 } else { PSI_DIRECTIONS } {
        let mut a = DVector::from_fn(k, |_, _| rng.random::<f64>() - 0.5);
        if a.norm() == 0.0 {
            continue;
        }
        a /= a.norm();
        let lhs = DVector::from_iterator(hpsi.len(), hpsi.iter().map(|h| a.dot(&(h * &a))));
        let q = DVector::from_iterator(projected.len(), projected.iter().map(|p| a.dot(&(p * &a))));
        let rhs = -gram.solve(&q);
        quadratic_form = quadratic_form.max((lhs - rhs).amax());
    }
    Ok(PsiIdentityResidual {
        second_derivative,
        quadratic_form,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingParams {
    /// Fraction of the certified radius `R` that is sampled.
    pub radius_factor: f64,
    pub count: usize,
    pub seed: u64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            radius_factor: 0.5,
            count: 512,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

/// A sampled feasible point with `F(a) < F(0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub a: Vec<f64>,
    pub x: Vec<f64>,
    pub value: f64,
}

/// Sampled evidence for `F(a) >= F(0) + μ ‖a‖² / 4` on a ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficiencyCertificate {
    /// Smallest eigenvalue of the projected Lagrangian Hessian; absent when
    /// there are no tangent directions.
    pub mu: Option<f64>,
    /// `sigma_min(Jg(x*)^T)`.
    pub nu: f64,
    /// Largest `‖a‖` for which `ψ` was found along the basis axes.
    pub chart_extent: f64,
    /// Largest `‖b_0‖` from which Newton at `a = 0` returns to `b = 0`.
    pub psi_attraction_radius: f64,
    /// `min(chart_extent, nu * psi_attraction_radius)`.
    pub radius: f64,
    pub radius_factor: f64,
    pub sampled_radius: f64,
    pub samples: usize,
    pub failed_samples: usize,
    /// `min (F(a) - F(0) - mu/4 ‖a‖²)` over the successful samples.
    pub min_margin: Option<f64>,
    pub seed: u64,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub diagnostics: Vec<String>,
}

/// Probing cap, in multiples of the constraint feature scale.
const PROBE_DOUBLINGS: usize = 7;
const PROBE_BISECTIONS: usize = 30;

/// Largest `s` in `(0, cap]` with `ok(s)`, by doubling from `s0` then
/// bisection. Zero when `ok(s0)` already fails and so do its halvings.
fn probe_radius<F: Fn(f64) -> bool>(s0: f64, ok: F) -> f64 {
    let mut lo = 0.0;
    let mut hi = s0;
    let mut found_fail = false;
    for _ in 0..PROBE_DOUBLINGS {
        if ok(hi) {
            lo = hi;
            hi *= 2.0;
        } else {
            found_fail = true;
            break;
        }
    }
    if !found_fail {
        return lo;
    }
    for _ in 0..PROBE_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn first_primes(k: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(k);
    let mut c = 2u64;
    while out.len() < k {
        if out
            .iter()
            .take_while(|p| *p * *p <= c)
            .all(|p| !c.is_multiple_of(*p))
        {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Low-discrepancy points in the `k`-ball of radius `radius`: a randomly
/// shifted Halton sequence, mapped through Box-Muller for the direction and
/// `u^{1/k}` for the radius.
pub fn ball_samples(k: usize, radius: f64, count: usize, seed: u64) -> Vec<DVector<f64>> {
    if k == 0 {
        return Vec::new();
    }
    let pairs = k.div_ceil(2);
    let dims = 2 * pairs + 1;
    let primes = first_primes(dims);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(count);
    let mut index = 1u64;
    while out.len() < count {
        let u: Vec<f64> = (0..dims)
            .map(|d| (radical_inverse(index, primes[d]) + shift[d]).fract())
            .collect();
        index += 1;
        let mut dir = DVector::zeros(k);
        for p in 0..pairs {
            let r = (-2.0 * (1.0 - u[2 * p]).ln()).sqrt();
            let th = std::f64::consts::TAU * u[2 * p + 1];
            dir[2 * p] = r * th.cos();
            if 2 * p + 1 < k {
                dir[2 * p + 1] = r * th.sin();
            }
        }
        let norm = dir.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            continue;
        }
        let rad = radius * u[dims - 1].powf(1.0 / k as f64);
        out.push(dir * (rad / norm));
    }
    out
}

/// Sampled sufficiency check of the local bound `F(a) >= F(0) + μ‖a‖²/4`.
///
/// The verdict is evidence on finitely many points, not a proof: `refuted`
/// means a sampled feasible point has `F(a) < F(0) - 1e-10 (1 + |F(0)|)`;
/// `certified` means the projected Hessian is positive definite beyond its
/// tolerance and every sample satisfies the bound within `1e-12`.
pub fn certify(
    rf: &ReducedFunctional,
    so: &SecondOrderReport,
    sampling: &SamplingParams,
) -> Result<SufficiencyCertificate> {
    if !(sampling.radius_factor > 0.0) || !sampling.radius_factor.is_finite() {
        return Err(Error::InvalidInput("radius factor must be positive".into()));
    }
    let b = rf.problem().bundle(rf.x_star().as_slice())?;
    let k = rf.dim();
    let m = rf.problem().m();
    let mu = so.min_eigenvalue();
    let nu = linalg::singular_values(b.jac_g())
        .first()
        .copied()
        .unwrap_or(0.0);
    let mut diagnostics = Vec::new();
    if !so.first_order_ok {
        diagnostics.push("first-order conditions do not hold at x*".to_string());
    }

    let scale = TraceParams::default_constraint(&b).half_width;
    let chart_extent = if k == 0 {
        0.0
    } else {
        (0..k)
            .flat_map(|i| [1.0, -1.0].map(|s| (i, s)))
            .map(|(i, s)| probe_radius(scale, |r| rf.solve_psi(&rf.axis(i, s * r)).is_ok()))
            .fold(f64::INFINITY, f64::min)
    };

    let params = TraceParams {
        newton_max_iter: rf.params.newton_max_iter,
        ..rf.params
    };
    let targets = vec![0.0; m];
    let back_to_zero = |start: &DVector<f64>| {
        newton_normal(
            rf.problem().constraints(),
            &targets,
            rf.x_star(),
            &rf.normal,
            start,
            &params,
        )
        .is_some_and(|sol| sol.amax() <= 1e-8 * (1.0 + start.amax()))
    };
    let b_scale = scale / nu.max(f64::MIN_POSITIVE);
    let psi_attraction_radius = (0..m)
        .flat_map(|j| [1.0, -1.0].map(|s| (j, s)))
        .map(|(j, s)| {
            probe_radius(b_scale, |r| {
                let mut start = DVector::zeros(m);
                start[j] = s * r;
                back_to_zero(&start)
            })
        })
        .fold(f64::INFINITY, f64::min);
    let radius = chart_extent.min(nu * psi_attraction_radius);
    let sampled_radius = sampling.radius_factor * radius;

    let f0 = rf.reduced_value(&DVector::zeros(k))?;
    let refute_below = f0 - REFUTE_TOL * (1.0 + f0.abs());
    let points = ball_samples(k, sampled_radius, sampling.count, sampling.seed);
    let mut failed_samples = 0;
    let mut min_margin: Option<f64> = None;
    let mut witness: Option<Witness> = None;
    let quarter_mu = mu.unwrap_or(0.0) / 4.0;
    for a in &points {
        let (x, fa) = match rf.lift(a).and_then(|x| {
            let v = rf.problem().objective().eval_value(x.as_slice())?;
            Ok((x, v))
        }) {
            Ok(r) => r,
            Err(_) => {
                failed_samples += 1;
                continue;
            }
        };
        let margin = fa - f0 - quarter_mu * a.norm_squared();
        min_margin = Some(min_margin.map_or(margin, |mm: f64| mm.min(margin)));
        if fa < refute_below && witness.as_ref().is_none_or(|w| fa < w.value) {
            witness = Some(Witness {
                a: a.iter().copied().collect(),
                x: x.iter().copied().collect(),
                value: fa,
            });
        }
    }
    if failed_samples > 0 {
        diagnostics.push(format!("{failed_samples} samples left the chart"));
    }
    if k > 0 && !(sampled_radius > 0.0) {
        diagnostics.push("no usable chart radius around x*".to_string());
    }
    if k == 0 {
        diagnostics.push("x* is an isolated feasible point".to_string());
    }
    let verdict = if witness.is_some() {
        Verdict::Refuted
    } else if k == 0
        || (so.sufficient_holds
            && so.first_order_ok
            && sampled_radius > 0.0
            && failed_samples == 0
            && min_margin.is_some_and(|mm| mm >= -MARGIN_TOL))
    {
        Verdict::Certified
    } else {
        if !so.sufficient_holds {
            diagnostics.push("projected Hessian is not positive definite beyond tolerance".into());
        }
        if min_margin.is_some_and(|mm| mm < -MARGIN_TOL) {
            diagnostics.push("quadratic lower bound violated on some samples".into());
        }
        Verdict::Inconclusive
    };
    Ok(SufficiencyCertificate {
        mu,
        nu,
        chart_extent,
        psi_attraction_radius,
        radius,
        radius_factor: sampling.radius_factor,
        sampled_radius,
        samples: points.len(),
        failed_samples,
        min_margin,
        seed: sampling.seed,
        verdict,
        witness,
        diagnostics,
    })
}
