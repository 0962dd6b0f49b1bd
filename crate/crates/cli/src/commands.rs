//! Subcommand implementations. Each returns the text for standard output,
//! summary lines for standard error and the exit status; files named by
//! `--out` and `--json` are written here.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;
use socurv_core::geometry::{self, Projector};
use socurv_core::implicit;
use socurv_core::optimality::{self, FIRST_ORDER_GATE};
use socurv_core::reduced::{self, FEASIBILITY_TOL};
use socurv_core::{
    DerivativeBundle, MultiplierSet, Problem, ReducedFunctional, SamplingParams, TangentBasis,
    TraceParams, TracedCurve, Verdict,
};

use crate::args::{CertifyArgs, CheckArgs, Common, Figure1Args, Manifold, TraceArgs};
use crate::error::{CliError, Exit};
use crate::problem_file::ProblemFile;
use crate::report::{self, FirstOrder, Outcome, Planar, Report, SCHEMA};

pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Largest direction defect that is projected away rather than rejected.
pub const DIRECTION_PROJECT_MAX: f64 = 1e-3;
/// Bound on `‖γ''(0) - h(v,v)‖` for `trace --verify`.
pub const VERIFY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub summary: Vec<String>,
    pub exit: Exit,
}

struct Loaded {
    file: ProblemFile,
    problem: Problem,
    bundle: DerivativeBundle,
}

fn load(common: &Common) -> Result<Loaded, CliError> {
    let file = ProblemFile::load(&common.file)?;
    let problem = file.problem()?;
    let bundle = problem.bundle(&file.x_star)?;
    Ok(Loaded {
        file,
        problem,
        bundle,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Sends `text` to `--json PATH` when given, else returns it for stdout.
fn emit_json(common: &Common, text: String) -> Result<String, CliError> {
    match &common.json {
        Some(path) => {
            write_file(path, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn trace_params(
    base: TraceParams,
    file: &ProblemFile,
    half_width: Option<f64>,
    step: Option<f64>,
) -> Result<TraceParams, CliError> {
    let o = &file.options;
    let half_width = half_width.or(o.half_width).unwrap_or(base.half_width);
    // Keep 200 steps per side when only the half width changes.
    let step = step.or(o.step).unwrap_or(half_width / 200.0);
    Ok(TraceParams::new(
        half_width,
        step,
        o.newton_tol.unwrap_or(base.newton_tol),
        o.newton_max_iter.unwrap_or(base.newton_max_iter),
    )?)
}

fn first_order(b: &DerivativeBundle, r: &mut Report) -> Result<(MultiplierSet, bool), CliError> {
    let ms = optimality::multipliers(b)?;
    let violation = b.gvals().amax();
    let stationary = optimality::check_first_order(&ms, FIRST_ORDER_GATE);
    if !stationary {
        r.diagnostics.push(format!(
            "gradient of f is not in the row space of Jg: residual {:e}",
            ms.residual_norm
        ));
    }
    if violation > FEASIBILITY_TOL {
        r.diagnostics.push(format!(
            "x_star violates the constraints: max |g| = {violation:e}"
        ));
    }
    let holds = stationary && violation <= FEASIBILITY_TOL;
    r.first_order = Some(FirstOrder::new(&ms, violation, holds));
    Ok((ms, holds))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn check(args: &CheckArgs) -> Result<Output, CliError> {
    let l = load(&args.common)?;
    let b = &l.bundle;
    let opts = &l.file.options;
    let tol = args.common.tol.or(opts.tol);
    let fd_step = args.fd_step.or(opts.fd_step).unwrap_or(DEFAULT_FD_STEP);
    let mut r = Report::new("check", &l.file);
    let mut summary = Vec::new();

    let (ms, fo_holds) = first_order(b, &mut r)?;
    summary.push(format!(
        "first order: {} (lambda = {}, residual {:.2e})",
        if fo_holds { "holds" } else { "fails" },
        fmt_vec(&ms.lambda),
        ms.residual_norm
    ));

    let basis = geometry::tangent_basis(b)?;
    let so = optimality::second_order_report(b, &ms, &basis, tol)?;
    if so.indeterminate {
        r.diagnostics.push(
            "smallest projected eigenvalue is within tolerance of zero; sufficiency undecided"
                .into(),
        );
    }
    summary.push(format!(
        "second order: min eigenvalue {}, necessary {}, sufficient {}",
        so.min_eigenvalue()
            .map_or("n/a".to_string(), |e| format!("{e:.6e}")),
        so.necessary_holds,
        so.sufficient_holds
    ));

    let grad_norm = b.grad_f().norm();
    let curv_tol = tol.map(|t| t / grad_norm);
    if fo_holds {
        let dirs = optimality::default_directions(&so, &basis);
        match optimality::curvature_comparison(b, &ms, &dirs, curv_tol) {
            Ok(c) => {
                summary.push(format!(
                    "curvature comparison: {} (min gap {})",
                    if c.holds { "holds" } else { "fails" },
                    c.min_gap().map_or("n/a".into(), |g| format!("{g:.6e}"))
                ));
                r.curvature = Some(c);
            }
            Err(e) => r
                .diagnostics
                .push(format!("curvature comparison skipped: {e}")),
        }
    } else {
        r.diagnostics
            .push("curvature comparison skipped: first-order conditions fail".into());
    }

    if b.n() == 2 && b.m() == 1 {
        match geometry::planar_curvatures(b, curv_tol) {
            Ok(p) => {
                let consistent = r.curvature.as_ref().map(|c| c.holds == p.holds);
                if consistent == Some(false) {
                    r.diagnostics.push(
                        "planar curvature inequality disagrees with the curvature comparison"
                            .into(),
                    );
                }
                summary.push(format!(
                    "planar: kappa_f = {:.6}, kappa_g = {:.6}, sign {:+}, quadrant {}, {}",
                    p.kappa_f,
                    p.kappa_g,
                    p.sign,
                    p.quadrant.label(),
                    if p.holds { "holds" } else { "fails" }
                ));
                r.planar = Some(Planar {
                    curvatures: p,
                    consistent,
                });
            }
            Err(e) => r
                .diagnostics
                .push(format!("planar curvatures skipped: {e}")),
        }
    }

    if fo_holds {
        let lemma = ReducedFunctional::new(&l.problem, &l.file.x_star)
            .map(|rf| with_newton(rf, &l.file))
            .and_then(|rf| reduced::lemma1_check(&rf, b, &ms, fd_step));
        match lemma {
            Ok(res) => {
                summary.push(format!("reduced Hessian residual: {res:.2e}"));
                r.lemma1_residual = Some(res);
            }
            Err(e) => r
                .diagnostics
                .push(format!("reduced Hessian check skipped: {e}")),
        }
    }

    let pass = fo_holds
        && so.necessary_holds
        && r.curvature.as_ref().is_some_and(|c| c.holds)
        && r.planar.as_ref().is_none_or(|p| p.curvatures.holds);
    r.outcome = if pass { Outcome::Pass } else { Outcome::Fail };
    r.second_order = Some(so);
    summary.push(format!("check: {}", if pass { "pass" } else { "fail" }));
    summary.extend(r.diagnostics.iter().map(|d| format!("warning: {d}")));
    Ok(Output {
        stdout: emit_json(&args.common, report::render(&r))?,
        summary,
        exit: if pass { Exit::Pass } else { Exit::Fail },
    })
}

fn with_newton(rf: ReducedFunctional, file: &ProblemFile) -> ReducedFunctional {
    let o = &file.options;
    if o.newton_tol.is_none() && o.newton_max_iter.is_none() {
        return rf;
    }
    let tol = o.newton_tol.unwrap_or(rf.newton_tol());
    rf.with_newton(tol, o.newton_max_iter.unwrap_or(50))
}

/// Parses `k` (1-based basis index) or a comma-separated vector and returns
/// a unit tangent vector, projecting small defects with a warning.
pub fn resolve_direction(
    text: &str,
    basis: &TangentBasis,
    projector: &Projector,
    warnings: &mut Vec<String>,
) -> Result<DVector<f64>, CliError> {
    let text = text.trim();
    let n = basis.ambient_dim();
    if !text.contains(',') {
        if let Ok(k) = text.parse::<usize>() {
            if k == 0 || k > basis.dim() {
                return Err(CliError::Invalid(format!(
                    "direction index {k} out of range 1..={}",
                    basis.dim()
                )));
            }
            return Ok(basis.column(k - 1));
        }
    }
    let comps = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Invalid(format!("cannot parse direction `{text}`")))?;
    if comps.len() != n {
        return Err(CliError::Invalid(format!(
            "direction has {} components, expected {n}",
            comps.len()
        )));
    }
    let v = DVector::from_vec(comps);
    let norm = v.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(CliError::Invalid(
            "direction must be finite and nonzero".into(),
        ));
    }
    let v = v / norm;
    let p = projector.apply(&v);
    let defect = (&v - &p).norm();
    if defect > DIRECTION_PROJECT_MAX {
        return Err(CliError::Invalid(format!(
            "direction is not tangent: normal component {defect:e} exceeds {DIRECTION_PROJECT_MAX:e}"
        )));
    }
    if defect > geometry::TANGENCY_TOL {
        warnings.push(format!(
            "direction projected onto the tangent space (normal component {defect:e})"
        ));
    }
    let pn = p.norm();
    Ok(p / pn)
}

#[derive(Debug, Serialize)]
pub struct Verification {
    pub schema: u32,
    pub manifold: Manifold,
    pub direction: Vec<f64>,
    pub rows: usize,
    pub converged_extent: f64,
    pub stopped_at: Option<f64>,
    pub second_derivative: Vec<f64>,
    pub second_fundamental_form: Vec<f64>,
    pub residual: f64,
    pub holds: bool,
    pub diagnostics: Vec<String>,
}

fn trace_curve(
    l: &Loaded,
    manifold: Manifold,
    v: &DVector<f64>,
    p: &TraceParams,
) -> Result<TracedCurve, CliError> {
    let x = &l.file.x_star;
    Ok(match manifold {
        Manifold::F => implicit::trace_level_section(l.problem.objective(), x, v.as_slice(), p)?,
        Manifold::G => {
            implicit::trace_constraint_section(l.problem.constraints(), x, v.as_slice(), p)?
        }
    })
}

pub fn trace(args: &TraceArgs) -> Result<Output, CliError> {
    let l = load(&args.common)?;
    let b = &l.bundle;
    let (basis, projector, base) = match args.manifold {
        Manifold::F => (
            geometry::tangent_basis_f(b)?,
            geometry::projector_hypersurface(b)?,
            TraceParams::default_level(b),
        ),
        Manifold::G => (
            geometry::tangent_basis(b)?,
            geometry::projector_constraint(b)?,
            TraceParams::default_constraint(b),
        ),
    };
    if basis.dim() == 0 {
        return Err(CliError::Invalid(
            "the manifold is zero-dimensional at x_star; nothing to trace".into(),
        ));
    }
    let mut warnings = Vec::new();
    let v = resolve_direction(&args.direction, &basis, &projector, &mut warnings)?;
    let params = trace_params(base, &l.file, args.half_width, args.step)?;
    let curve = trace_curve(&l, args.manifold, &v, &params)?;
    if let Some(s) = curve.stopped_at {
        warnings.push(format!(
            "chart left or Newton failed near t = {s:e}; curve truncated to |t| <= {:e}",
            curve.converged_extent
        ));
    }
    let csv = curve.to_csv();
    let mut summary = vec![format!(
        "trace {}: {} rows, converged extent {:e}",
        args.manifold.label(),
        curve.len(),
        curve.converged_extent
    )];
    let stdout = match &args.out {
        Some(path) => {
            write_file(path, &csv)?;
            String::new()
        }
        None => csv,
    };
    let mut exit = Exit::Pass;
    if args.verify {
        let ver = verify(b, args.manifold, &v, &curve, warnings.clone())?;
        summary.push(format!(
            "verify: |gamma''(0) - h(v,v)| = {:.3e} ({})",
            ver.residual,
            if ver.holds { "ok" } else { "exceeds 1e-3" }
        ));
        if !ver.holds {
            exit = Exit::Fail;
        }
        let text = report::render(&ver);
        let path = args
            .common
            .json
            .clone()
            .or_else(|| args.out.as_ref().map(|p| sidecar_path(p)));
        match path {
            Some(p) => write_file(&p, &text)?,
            None => summary.push(format!(
                "sidecar: {}",
                serde_json::to_string(&ver).expect("serializes")
            )),
        }
    }
    summary.extend(warnings.iter().map(|d| format!("warning: {d}")));
    Ok(Output {
        stdout,
        summary,
        exit,
    })
}

/// `curve.csv` -> `curve.verify.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("verify.json")
}

fn verify(
    b: &DerivativeBundle,
    manifold: Manifold,
    v: &DVector<f64>,
    curve: &TracedCurve,
    diagnostics: Vec<String>,
) -> Result<Verification, CliError> {
    let arc = implicit::arclength_reparametrize(curve)?;
    let gamma2 = implicit::second_derivative_at_zero(&arc)?;
    let h = match manifold {
        Manifold::F => geometry::sff_f(b, v)?,
        Manifold::G => geometry::sff_g(b, v)?,
    };
    let h = DVector::from_column_slice(&h.vector_part);
    let residual = (&gamma2 - &h).norm();
    Ok(Verification {
        schema: SCHEMA,
        manifold,
        direction: v.as_slice().to_vec(),
        rows: curve.len(),
        converged_extent: curve.converged_extent,
        stopped_at: curve.stopped_at,
        second_derivative: gamma2.as_slice().to_vec(),
        second_fundamental_form: h.as_slice().to_vec(),
        residual,
        holds: residual <= VERIFY_TOL,
        diagnostics,
    })
}

#[derive(Debug, Serialize)]
pub struct CurveSummary {
    pub rows: usize,
    pub converged_extent: f64,
    pub path: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Figure1Report {
    pub schema: u32,
    pub command: &'static str,
    pub problem: report::ProblemEcho,
    pub lambda: Vec<f64>,
    #[serde(flatten)]
    pub planar: socurv_core::PlanarCurvatureReport,
    pub curves: Figure1Curves,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Figure1Curves {
    pub f: Option<CurveSummary>,
    pub g: Option<CurveSummary>,
}

pub fn figure1(args: &Figure1Args) -> Result<Output, CliError> {
    let l = load(&args.common)?;
    let b = &l.bundle;
    if b.n() != 2 || b.m() != 1 {
        return Err(socurv_core::Error::DimensionMismatch(format!(
            "figure1 needs n = 2 and m = 1, got n = {}, m = {}",
            b.n(),
            b.m()
        ))
        .into());
    }
    let tol = args.common.tol.or(l.file.options.tol);
    let ms = optimality::multipliers(b)?;
    if !optimality::check_first_order(&ms, FIRST_ORDER_GATE) {
        return Err(socurv_core::Error::FirstOrderViolated {
            residual_norm: ms.residual_norm,
            tolerance: FIRST_ORDER_GATE * (1.0 + ms.grad_f_norm),
        }
        .into());
    }
    let planar = geometry::planar_curvatures(b, tol.map(|t| t / b.grad_f().norm()))?;
    let mut diagnostics = Vec::new();
    let mut curve = |manifold: Manifold,
                     u: [f64; 2],
                     base: TraceParams|
     -> Result<Option<CurveSummary>, CliError> {
        let v = DVector::from_column_slice(&u);
        let params = trace_params(base, &l.file, None, None)?;
        match trace_curve(&l, manifold, &v, &params) {
            Ok(c) => {
                let path = match &args.out {
                    Some(prefix) => {
                        let p =
                            PathBuf::from(format!("{}_{}.csv", prefix.display(), manifold.label()));
                        write_file(&p, &c.to_csv())?;
                        Some(p.display().to_string())
                    }
                    None => None,
                };
                Ok(Some(CurveSummary {
                    rows: c.len(),
                    converged_extent: c.converged_extent,
                    path,
                }))
            }
            Err(e) => {
                diagnostics.push(format!("trace of {} failed: {e}", manifold.label()));
                Ok(None)
            }
        }
    };
    let curves = Figure1Curves {
        f: curve(Manifold::F, planar.u_f, TraceParams::default_level(b))?,
        g: curve(Manifold::G, planar.u_g, TraceParams::default_constraint(b))?,
    };
    let holds = planar.holds;
    let summary = vec![format!(
        "figure1: kappa_f = {:.6}, kappa_g = {:.6}, sign {:+}, quadrant {}, inequality {}",
        planar.kappa_f,
        planar.kappa_g,
        planar.sign,
        optimality::figure1_quadrant(&planar).label(),
        if holds { "holds" } else { "fails" }
    )];
    let rep = Figure1Report {
        schema: SCHEMA,
        command: "figure1",
        problem: (&l.file).into(),
        lambda: ms.lambda,
        planar,
        curves,
        diagnostics,
    };
    Ok(Output {
        stdout: emit_json(&args.common, report::render(&rep))?,
        summary,
        exit: if holds { Exit::Pass } else { Exit::Fail },
    })
}

pub fn certify(args: &CertifyArgs) -> Result<Output, CliError> {
    let l = load(&args.common)?;
    let b = &l.bundle;
    let o = &l.file.options;
    let tol = args.common.tol.or(o.tol);
    let defaults = SamplingParams::default();
    let sampling = SamplingParams {
        radius_factor: args
            .radius_factor
            .or(o.radius_factor)
            .unwrap_or(defaults.radius_factor),
        count: args.samples.or(o.samples).unwrap_or(defaults.count),
        seed: args.seed.or(o.seed).unwrap_or(defaults.seed),
    };
    let mut r = Report::new("certify", &l.file);
    let (ms, fo_holds) = first_order(b, &mut r)?;
    let basis = geometry::tangent_basis(b)?;
    let so = optimality::second_order_report(b, &ms, &basis, tol)?;
    let mut summary = Vec::new();
    if fo_holds {
        let rf = with_newton(
            ReducedFunctional::with_basis(&l.problem, &l.file.x_star, basis)?,
            &l.file,
        );
        let cert = reduced::certify(&rf, &so, &sampling)?;
        summary.push(format!(
            "certify: {:?} on radius {:.3e} ({} samples, {} failed, seed {})",
            cert.verdict, cert.sampled_radius, cert.samples, cert.failed_samples, cert.seed
        ));
        r.outcome = match cert.verdict {
            Verdict::Certified => Outcome::Pass,
            Verdict::Refuted => Outcome::Fail,
            Verdict::Inconclusive => Outcome::Inconclusive,
        };
        r.certificate = Some(cert);
    } else {
        summary.push("certify: first-order conditions fail; nothing to certify".into());
        r.outcome = Outcome::Fail;
    }
    r.second_order = Some(so);
    summary.extend(r.diagnostics.iter().map(|d| format!("warning: {d}")));
    let exit = if r.outcome == Outcome::Pass {
        Exit::Pass
    } else {
        Exit::Fail
    };
    Ok(Output {
        stdout: emit_json(&args.common, report::render(&r))?,
        summary,
        exit,
    })
}
