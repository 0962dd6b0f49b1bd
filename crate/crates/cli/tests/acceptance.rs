//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use socurv_core::battery::{
    planar_quadrant_cases, planar_violating_case, quadric_battery, random_expression,
    random_stationary, BatteryCase, RandomOptions,
};
use socurv_core::geometry::{self, DerivativeBundle};
use socurv_core::implicit::{
    arclength_reparametrize, second_derivative_at_zero, trace_constraint_section,
    trace_level_section, TraceParams,
};
use socurv_core::optimality::{self, curvature_comparison, default_directions, multipliers};
use socurv_core::reduced::{lemma1_check, psi_identities_check};
use socurv_core::{parse, Expression, Problem, ReducedFunctional};
use tempfile::TempDir;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "automatic differentiation vs finite differences",
            ad_correctness,
        ),
        (
            "curvature gap identity and verdict equivalence",
            curvature_identity,
        ),
        (
            "normal-section second derivative vs second fundamental form",
            normal_sections,
        ),
        (
            "reduced Hessian vs projected Lagrangian Hessian",
            reduced_hessian,
        ),
        ("implicit-map derivative identities", psi_identities),
        ("sphere with linear objective", sphere_instance),
        ("planar quadrants", planar_quadrants),
        ("objective scaling", scaling),
        ("certify determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail}; {secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({detail}; {secs:.1}s)", i + 1)
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

// ---------------------------------------------------------------- helpers

fn bundle(c: &BatteryCase) -> DerivativeBundle {
    c.problem.bundle(&c.x_star).unwrap()
}

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn problem_json(p: &Problem, x: &[f64]) -> String {
    let g: Vec<String> = p.constraints().iter().map(|g| g.to_string()).collect();
    serde_json::json!({
        "n": p.n(),
        "m": p.m(),
        "f": p.objective().to_string(),
        "g": g,
        "x_star": x,
    })
    .to_string()
}

struct Cli {
    code: i32,
    stdout: String,
}

fn socurv(dir: &Path, file_text: &str, args: &[&str]) -> Cli {
    let p = dir.join("problem.json");
    std::fs::write(&p, file_text).unwrap();
    let mut full = vec![args[0], p.to_str().unwrap()];
    full.extend_from_slice(&args[1..]);
    full.push("--quiet");
    let out = Command::new(env!("CARGO_BIN_EXE_socurv"))
        .args(&full)
        .output()
        .unwrap();
    Cli {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
    }
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

// ------------------------------------------------------------- criterion 1

fn value(e: &Expression, x: &[f64]) -> Option<f64> {
    e.eval_value(x).ok().filter(|v| v.is_finite())
}

fn fd_gradient(e: &Expression, x: &[f64], h: f64) -> Option<Vec<f64>> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            Some((value(e, &p)? - value(e, &m)?) / (2.0 * h))
        })
        .collect()
}

fn fd_hessian(e: &Expression, x: &[f64], h: f64) -> Option<Vec<Vec<f64>>> {
    let n = x.len();
    let at = |d: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for (i, s) in d {
            y[*i] += s * h;
        }
        value(e, &y)
    };
    let f0 = at(&[])?;
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        out[i][i] = (at(&[(i, 1.0)])? - 2.0 * f0 + at(&[(i, -1.0)])?) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, 1.0), (j, 1.0)])?
                - at(&[(i, 1.0), (j, -1.0)])?
                - at(&[(i, -1.0), (j, 1.0)])?
                + at(&[(i, -1.0), (j, -1.0)])?)
                / (4.0 * h * h);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Some(out)
}

/// 200 random expressions of depth at most 6 in 3 variables. Points where
/// the expression leaves its domain, or where any derivative exceeds 1e3
/// (a nearby pole makes difference quotients meaningless), are redrawn.
fn ad_correctness() -> Outcome {
    const N: usize = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut accepted, mut redrawn) = (0, 0);
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    while accepted < 200 {
        let depth = rng.random_range(1..=6);
        let src = random_expression(&mut rng, N, depth);
        let e = parse(&src, N).map_err(|err| format!("generator produced `{src}`: {err}"))?;
        let mut done = false;
        for _ in 0..20 {
            let x: Vec<f64> = (0..N).map(|_| rng.random_range(-1.5..1.5)).collect();
            let Ok(jet) = e.eval_jet2(&x) else {
                redrawn += 1;
                continue;
            };
            let v = e.eval_value(&x).map_err(|err| format!("`{src}`: {err}"))?;
            ensure(v.to_bits() == jet.value().to_bits(), || {
                format!("value mismatch on `{src}` at {x:?}")
            })?;
            let hess = jet.hessian();
            ensure(hess == hess.transpose(), || {
                format!("asymmetric Hessian on `{src}`")
            })?;
            let scale = v.abs().max(hess.amax()).max(jet.gradient().amax());
            let (Some(g), Some(h)) = (fd_gradient(&e, &x, 1e-5), fd_hessian(&e, &x, 1e-4)) else {
                redrawn += 1;
                continue;
            };
            if !(scale < 1e3) {
                redrawn += 1;
                continue;
            }
            for i in 0..N {
                let ad = jet.grad()[i];
                worst_g = worst_g.max((ad - g[i]).abs() / (1.0 + ad.abs()));
                for j in 0..N {
                    let ad = hess[(i, j)];
                    worst_h = worst_h.max((ad - h[i][j]).abs() / (1.0 + ad.abs()));
                }
            }
            ensure(worst_g <= 1e-5 && worst_h <= 1e-3, || {
                format!("`{src}` at {x:?}: gradient {worst_g:e}, Hessian {worst_h:e}")
            })?;
            accepted += 1;
            done = true;
            break;
        }
        if !done {
            redrawn += 1;
        }
    }
    Ok(format!(
        "200 expressions, {redrawn} points redrawn, max rel error gradient {worst_g:.1e} Hessian {worst_h:.1e}"
    ))
}

// ------------------------------------------------------------- criterion 2

fn curvature_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let opts = RandomOptions {
        quartic: true,
        curved_constraints: true,
    };
    let (mut worst, mut holding, mut total) = (0.0f64, 0, 0);
    for _ in 0..60 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..n);
        let case = random_stationary(&mut rng, n, m, opts);
        let b = bundle(&case);
        let ms = multipliers(&b).unwrap();
        let basis = geometry::tangent_basis(&b).unwrap();
        let so = optimality::second_order_report(&b, &ms, &basis, None).unwrap();
        let eig_dirs = default_directions(&so, &basis);
        let mut dirs = eig_dirs.clone();
        for _ in 0..4 {
            let a = DVector::from_fn(basis.dim(), |_, _| rng.random_range(-1.0..1.0));
            dirs.push(basis.lift(&a).normalize());
        }
        let all = curvature_comparison(&b, &ms, &dirs, None).map_err(|e| e.to_string())?;
        worst = all.identity_residuals.iter().copied().fold(worst, f64::max);
        let eig = curvature_comparison(&b, &ms, &eig_dirs, None).map_err(|e| e.to_string())?;
        ensure(eig.holds == so.necessary_holds, || {
            format!(
                "{} (n={n}, m={m}): curvature verdict {} vs necessary {}",
                case.name, eig.holds, so.necessary_holds
            )
        })?;
        holding += so.necessary_holds as usize;
        total += 1;
    }
    ensure(worst <= 1e-8, || format!("identity residual {worst:e}"))?;
    Ok(format!(
        "{total} problems ({holding} satisfy the necessary condition), max identity residual {worst:.1e}"
    ))
}

// ------------------------------------------------------------- criterion 3

fn battery_errors(step: f64, half_width: f64) -> Vec<(String, f64)> {
    let tp = TraceParams::new(half_width, step, 1e-12, 50).unwrap();
    let mut out = Vec::new();
    for case in quadric_battery() {
        let b = bundle(&case);
        let basis = geometry::tangent_basis(&b).unwrap();
        for k in 0..basis.dim() {
            let v = basis.column(k);
            let c = trace_constraint_section(
                case.problem.constraints(),
                &case.x_star,
                v.as_slice(),
                &tp,
            )
            .unwrap();
            let c = arclength_reparametrize(&c).unwrap();
            let h = dv(&geometry::sff_g(&b, &v).unwrap().vector_part);
            out.push((
                format!("{} g v{k}", case.name),
                (second_derivative_at_zero(&c).unwrap() - h).norm(),
            ));
        }
        let fbasis = geometry::tangent_basis_f(&b).unwrap();
        for k in 0..fbasis.dim() {
            let v = fbasis.column(k);
            let c = trace_level_section(case.problem.objective(), &case.x_star, v.as_slice(), &tp)
                .unwrap();
            let c = arclength_reparametrize(&c).unwrap();
            let h = dv(&geometry::sff_f(&b, &v).unwrap().vector_part);
            out.push((
                format!("{} f v{k}", case.name),
                (second_derivative_at_zero(&c).unwrap() - h).norm(),
            ));
        }
    }
    out
}

/// Errors at step 1e-3 over a half width of 0.02 (20 steps per side), and
/// observed order on steps 0.02, 0.01, 0.005 over a half width of 0.2.
fn normal_sections() -> Outcome {
    let fine = battery_errors(1e-3, 0.02);
    let worst = fine.iter().map(|e| e.1).fold(0.0, f64::max);
    if let Some((name, err)) = fine.iter().find(|e| e.1 > 1e-3) {
        return Err(format!("{name}: error {err:e} at step 1e-3"));
    }
    let e1 = battery_errors(0.02, 0.2);
    let e2 = battery_errors(0.01, 0.2);
    let e3 = battery_errors(0.005, 0.2);
    let (mut min_order, mut curved) = (f64::INFINITY, 0);
    for ((a, b), c) in e1.iter().zip(&e2).zip(&e3) {
        // flat sections are exact to rounding and carry no order
        if a.1 < 1e-9 {
            continue;
        }
        let o = (a.1 / b.1).log2().min((b.1 / c.1).log2());
        ensure(o >= 1.8, || {
            format!(
                "{}: order {o:.2} (errors {:e} {:e} {:e})",
                a.0, a.1, b.1, c.1
            )
        })?;
        min_order = min_order.min(o);
        curved += 1;
    }
    ensure(curved >= 10, || format!("only {curved} curved sections"))?;
    Ok(format!(
        "{} sections, max error {worst:.1e}; {curved} curved, min order {min_order:.2}",
        fine.len()
    ))
}

// ------------------------------------------------------------- criterion 4

fn reduced_hessian() -> Outcome {
    let mut worst = 0.0f64;
    for case in quadric_battery() {
        let b = bundle(&case);
        let ms = multipliers(&b).unwrap();
        let rf = ReducedFunctional::new(&case.problem, &case.x_star).unwrap();
        let r = lemma1_check(&rf, &b, &ms, 1e-4).map_err(|e| format!("{}: {e}", case.name))?;
        ensure(r <= 1e-4, || format!("{}: residual {r:e}", case.name))?;
        worst = worst.max(r);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let opts = RandomOptions {
        quartic: false,
        curved_constraints: false,
    };
    let mut worst_flat = 0.0f64;
    for _ in 0..12 {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..n);
        let case = random_stationary(&mut rng, n, m, opts);
        let b = bundle(&case);
        let ms = multipliers(&b).unwrap();
        let rf = ReducedFunctional::new(&case.problem, &case.x_star).unwrap();
        let r = lemma1_check(&rf, &b, &ms, 1e-4).map_err(|e| format!("{}: {e}", case.name))?;
        ensure(r <= 1e-6, || {
            format!("quadratic/affine {}: residual {r:e}", case.name)
        })?;
        worst_flat = worst_flat.max(r);
    }
    Ok(format!(
        "battery max {worst:.1e}, 12 quadratic/affine instances max {worst_flat:.1e}"
    ))
}

// ------------------------------------------------------------- criterion 5

fn psi_identities() -> Outcome {
    let mut worst = 0.0f64;
    for (seed, case) in quadric_battery().into_iter().enumerate() {
        let b = bundle(&case);
        let rf = ReducedFunctional::new(&case.problem, &case.x_star).unwrap();
        let r = psi_identities_check(&rf, &b, 1e-4, seed as u64).map_err(|e| e.to_string())?;
        let e = r.second_derivative.max(r.quadratic_form);
        ensure(e <= 1e-4, || format!("{}: residual {e:e}", case.name))?;
        worst = worst.max(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = RandomOptions {
        quartic: true,
        curved_constraints: false,
    };
    let mut worst_affine = 0.0f64;
    for k in 0..12 {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..n);
        let case = random_stationary(&mut rng, n, m, opts);
        let b = bundle(&case);
        let rf = ReducedFunctional::new(&case.problem, &case.x_star).unwrap();
        let r = psi_identities_check(&rf, &b, 1e-4, k).map_err(|e| e.to_string())?;
        let e = r.second_derivative.max(r.quadratic_form);
        ensure(e <= 1e-12, || {
            format!("affine {}: residual {e:e}", case.name)
        })?;
        worst_affine = worst_affine.max(e);
    }
    Ok(format!(
        "battery max {worst:.1e}, 12 affine instances max {worst_affine:.1e}"
    ))
}

// ------------------------------------------------------------- criterion 6

fn sphere_instance() -> Outcome {
    let dir = TempDir::new().unwrap();
    let file = |x: [f64; 3]| {
        serde_json::json!({"n": 3, "m": 1, "f": "x1", "g": ["x1^2 + x2^2 + x3^2 - 1"], "x_star": x})
            .to_string()
    };
    let min = file([-1.0, 0.0, 0.0]);
    let max = file([1.0, 0.0, 0.0]);

    let r = socurv(dir.path(), &min, &["check"]);
    let v = json(&r.stdout);
    ensure(r.code == 0, || format!("check exit {}", r.code))?;
    let lambda = v["first_order"]["lambda"][0].as_f64().unwrap();
    ensure((lambda + 0.5).abs() <= 1e-15, || format!("lambda {lambda}"))?;
    let ph = &v["second_order"]["projected_hessian"];
    for i in 0..2 {
        for j in 0..2 {
            let want = if i == j { 1.0 } else { 0.0 };
            let got = ph[i][j].as_f64().unwrap();
            ensure((got - want).abs() <= 1e-12, || {
                format!("projected Hessian [{i}][{j}] = {got}")
            })?;
        }
    }
    for k in 0..2 {
        let lhs = v["curvature"]["lhs"][k].as_f64().unwrap();
        let rhs = v["curvature"]["rhs"][k].as_f64().unwrap();
        ensure(lhs.abs() <= 1e-12 && (rhs - 1.0).abs() <= 1e-12, || {
            format!("curvature pair ({lhs}, {rhs})")
        })?;
    }
    let r = socurv(dir.path(), &min, &["certify"]);
    let verdict = json(&r.stdout)["certificate"]["verdict"].clone();
    ensure(r.code == 0 && verdict == "certified", || {
        format!("minimizer certify: {verdict}")
    })?;

    let r = socurv(dir.path(), &max, &["check"]);
    let v = json(&r.stdout);
    ensure(r.code == 1, || format!("maximizer check exit {}", r.code))?;
    let lambda = v["first_order"]["lambda"][0].as_f64().unwrap();
    ensure((lambda - 0.5).abs() <= 1e-15, || {
        format!("maximizer lambda {lambda}")
    })?;
    for key in ["necessary_holds", "sufficient_holds"] {
        ensure(v["second_order"][key] == false, || {
            format!("maximizer {key} true")
        })?;
    }
    ensure(v["curvature"]["holds"] == false, || {
        "maximizer curvature holds".into()
    })?;
    let r = socurv(dir.path(), &max, &["certify"]);
    let verdict = json(&r.stdout)["certificate"]["verdict"].clone();
    ensure(r.code == 1 && verdict == "refuted", || {
        format!("maximizer certify: {verdict}")
    })?;

    // 10^4 points on the sphere within geodesic distance 0.5 of each
    // candidate, checked against the problem's own expressions
    let p = Problem::parse(3, "x1", &["x1^2 + x2^2 + x3^2 - 1"]).unwrap();
    let (f, g) = (p.objective(), &p.constraints()[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut below_min, mut below_max) = (0, 0);
    for _ in 0..10_000 {
        let theta = 0.5 * rng.random::<f64>().sqrt();
        let phi = std::f64::consts::TAU * rng.random::<f64>();
        let (s, c) = theta.sin_cos();
        for (x0, below) in [(-1.0, &mut below_min), (1.0, &mut below_max)] {
            let q = [x0 * c, s * phi.cos(), s * phi.sin()];
            let gq = g.eval_value(&q).unwrap();
            ensure(gq.abs() <= 1e-14, || {
                format!("scan point off the sphere: {gq:e}")
            })?;
            let fx = f.eval_value(&[x0, 0.0, 0.0]).unwrap();
            *below += (f.eval_value(&q).unwrap() < fx - 1e-15) as usize;
        }
    }
    ensure(below_min == 0, || {
        format!("{below_min} scan points below f(x*) at the minimizer")
    })?;
    ensure(below_max > 9_000, || {
        format!("only {below_max} descent points at the maximizer")
    })?;
    Ok(format!(
        "lambda -1/2, projected Hessian I, pairs (0,1), certified; flipped at (1,0,0); scan: 0 / {below_max} of 10^4 lower points"
    ))
}

// ------------------------------------------------------------- criterion 7

/// Smallest `f(x) - f(x*)` over feasible points on circles of radius
/// `rho <= 0.3` around `x*`, located by bisection on sign changes of `g`.
fn feasible_scan(p: &Problem, x: &[f64]) -> f64 {
    let f = p.objective();
    let g = &p.constraints()[0];
    let f0 = f.eval_value(x).unwrap();
    let at = |rho: f64, th: f64| [x[0] + rho * th.cos(), x[1] + rho * th.sin()];
    let gv = |q: [f64; 2]| g.eval_value(&q).unwrap();
    let mut lowest = f64::INFINITY;
    const ANGLES: usize = 3600;
    for k in 1..=60 {
        let rho = 0.3 * k as f64 / 60.0;
        for j in 0..ANGLES {
            let (mut a, mut b) = (
                std::f64::consts::TAU * j as f64 / ANGLES as f64,
                std::f64::consts::TAU * (j + 1) as f64 / ANGLES as f64,
            );
            let (ga, gb) = (gv(at(rho, a)), gv(at(rho, b)));
            if ga.signum() == gb.signum() && ga != 0.0 {
                continue;
            }
            let ga_sign = ga.signum();
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if gv(at(rho, mid)).signum() == ga_sign {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            lowest = lowest.min(f.eval_value(&at(rho, 0.5 * (a + b))).unwrap() - f0);
        }
    }
    lowest
}

fn planar_quadrants() -> Outcome {
    let dir = TempDir::new().unwrap();
    let mut labels = String::new();
    for case in planar_quadrant_cases() {
        let want = case.name.trim_start_matches("quadrant-").to_string();
        let r = socurv(
            dir.path(),
            &problem_json(&case.problem, &case.x_star),
            &["figure1"],
        );
        let v = json(&r.stdout);
        ensure(r.code == 0 && v["holds"] == true, || {
            format!("{}: exit {}, holds {}", case.name, r.code, v["holds"])
        })?;
        ensure(v["quadrant"] == want.as_str(), || {
            format!("{}: labelled {}", case.name, v["quadrant"])
        })?;
        let low = feasible_scan(&case.problem, &case.x_star);
        ensure(low >= -1e-12, || {
            format!("{}: feasible point {low:e} below f(x*)", case.name)
        })?;
        labels.push_str(&want);
    }
    let bad = planar_violating_case();
    let r = socurv(
        dir.path(),
        &problem_json(&bad.problem, &bad.x_star),
        &["figure1"],
    );
    let v = json(&r.stdout);
    ensure(r.code == 1 && v["holds"] == false, || {
        format!("violating instance: exit {}, holds {}", r.code, v["holds"])
    })?;
    let low = feasible_scan(&bad.problem, &bad.x_star);
    ensure(low < 0.0, || {
        "scan found no lower point for the violating instance".into()
    })?;
    Ok(format!(
        "labels {labels} all holding and locally minimal; violating instance fails with descent {low:.2e}"
    ))
}

// ------------------------------------------------------------- criterion 8

struct Verdicts {
    lambda: Vec<f64>,
    eigenvalues: Vec<f64>,
    bools: Vec<bool>,
    gap_signs: Vec<bool>,
    quadrant: Option<char>,
    planar_sign: Option<i8>,
}

fn verdicts(p: &Problem, x: &[f64]) -> Verdicts {
    let b = p.bundle(x).unwrap();
    let ms = multipliers(&b).unwrap();
    let basis = geometry::tangent_basis(&b).unwrap();
    let so = optimality::second_order_report(&b, &ms, &basis, None).unwrap();
    let cc = curvature_comparison(&b, &ms, &default_directions(&so, &basis), None).unwrap();
    let mut bools = vec![
        so.necessary_holds,
        so.sufficient_holds,
        so.indeterminate,
        so.first_order_ok,
        cc.holds,
    ];
    let (mut quadrant, mut planar_sign) = (None, None);
    if p.n() == 2 && p.m() == 1 {
        let pc = geometry::planar_curvatures(&b, None).unwrap();
        bools.push(pc.holds);
        quadrant = Some(optimality::figure1_quadrant(&pc).label());
        planar_sign = Some(pc.sign);
    }
    Verdicts {
        lambda: ms.lambda,
        eigenvalues: so.eigenvalues,
        bools,
        gap_signs: cc.gaps.iter().map(|g| *g >= 0.0).collect(),
        quadrant,
        planar_sign,
    }
}

fn scaled(p: &Problem, c: f64) -> Problem {
    let g: Vec<String> = p.constraints().iter().map(|g| g.to_string()).collect();
    let g: Vec<&str> = g.iter().map(String::as_str).collect();
    Problem::parse(p.n(), &format!("{c:?} * ({})", p.objective()), &g).unwrap()
}

/// `max |a_i - c b_i| / max |c b_i|`.
fn rel_scaled(a: &[f64], b: &[f64], c: f64) -> f64 {
    let scale = b.iter().map(|v| (c * v).abs()).fold(0.0, f64::max);
    let err = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - c * y).abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

fn scaling() -> Outcome {
    let mut cases: Vec<BatteryCase> = planar_quadrant_cases();
    cases.push(planar_violating_case());
    cases.extend(quadric_battery());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..n);
        let opts = RandomOptions {
            quartic: true,
            curved_constraints: true,
        };
        cases.push(random_stationary(&mut rng, n, m, opts));
    }
    let mut worst = 0.0f64;
    for case in &cases {
        let base = verdicts(&case.problem, &case.x_star);
        for c in [0.1, 10.0] {
            let s = verdicts(&scaled(&case.problem, c), &case.x_star);
            let tag = || format!("{} c={c}", case.name);
            ensure(s.bools == base.bools, || {
                format!("{}: verdicts {:?} vs {:?}", tag(), s.bools, base.bools)
            })?;
            ensure(s.gap_signs == base.gap_signs, || {
                format!("{}: gap signs changed", tag())
            })?;
            ensure(
                s.quadrant == base.quadrant && s.planar_sign == base.planar_sign,
                || {
                    format!(
                        "{}: quadrant {:?} vs {:?}",
                        tag(),
                        s.quadrant,
                        base.quadrant
                    )
                },
            )?;
            let e = rel_scaled(&s.lambda, &base.lambda, c).max(rel_scaled(
                &s.eigenvalues,
                &base.eigenvalues,
                c,
            ));
            ensure(e <= 1e-12, || {
                format!("{}: relative scaling error {e:e}", tag())
            })?;
            worst = worst.max(e);
        }
    }
    Ok(format!(
        "{} problems x 2 factors, verdicts unchanged, max relative scaling error {worst:.1e}",
        cases.len()
    ))
}

// ------------------------------------------------------------- criterion 9

fn determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let opts = RandomOptions {
        quartic: true,
        curved_constraints: true,
    };
    let mut files = vec![serde_json::json!({
        "n": 3, "m": 1, "f": "x1", "g": ["x1^2 + x2^2 + x3^2 - 1"], "x_star": [-1, 0, 0]
    })
    .to_string()];
    for (n, m) in [(4, 2), (6, 3)] {
        let case = random_stationary(&mut rng, n, m, opts);
        files.push(problem_json(&case.problem, &case.x_star));
    }
    for text in &files {
        let d1 = TempDir::new().unwrap();
        let d2 = TempDir::new().unwrap();
        let a = socurv(d1.path(), text, &["certify", "--seed", "42"]);
        let b = socurv(d2.path(), text, &["certify", "--seed", "42"]);
        ensure(a.code == b.code && a.stdout == b.stdout, || {
            "outputs differ".into()
        })?;
        ensure(a.stdout.len() > 100, || "empty report".into())?;
        json(&a.stdout);
    }
    Ok(format!("{} files, byte-identical reports", files.len()))
}
