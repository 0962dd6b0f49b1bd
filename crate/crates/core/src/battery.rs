//! Test problems: a fixed battery of quadric constraint surfaces and random
//! problems with a constructed stationary point.
//!
//! Every case has a feasible `x*` with `∇f(x*) = Jg(x*)^T λ` for a known
//! nonzero `λ`.

use nalgebra::DVector;
use rand::Rng;

use crate::error::Result;
use crate::linalg;
use crate::problem::Problem;

#[derive(Debug, Clone)]
pub struct BatteryCase {
    pub name: String,
    pub problem: Problem,
    pub x_star: Vec<f64>,
    /// Multipliers used in the construction.
    pub lambda: Vec<f64>,
}

/// Parenthesized round-trip literal.
fn lit(v: f64) -> String {
    format!("({v:?})")
}

fn linear(w: &[f64]) -> String {
    w.iter()
        .enumerate()
        .map(|(k, c)| format!("{}*x{}", lit(*c), k + 1))
        .collect::<Vec<_>>()
        .join(" + ")
}

fn shifted_square(k: usize, c: f64) -> String {
    format!("(x{} - {})^2", k + 1, lit(c))
}

/// Adds `Σ λ_i g_i` plus a positive-definite quadratic in `x - x*`, which
/// keeps `x*` stationary with multipliers `λ`.
fn stationary_objective(g: &[String], lambda: &[f64], x_star: &[f64], weights: &[f64]) -> String {
    let mut terms: Vec<String> = g
        .iter()
        .zip(lambda)
        .map(|(gi, l)| format!("{} * ({gi})", lit(*l)))
        .collect();
    for (k, w) in weights.iter().enumerate() {
        terms.push(format!("{} * {}", lit(*w), shifted_square(k, x_star[k])));
    }
    terms.join(" + ")
}

fn case(
    name: String,
    n: usize,
    g: Vec<String>,
    x_star: Vec<f64>,
    lambda: Vec<f64>,
) -> Result<BatteryCase> {
    let weights: Vec<f64> = (0..n).map(|k| 0.5 + 0.25 * k as f64).collect();
    let f = stationary_objective(&g, &lambda, &x_star, &weights);
    let refs: Vec<&str> = g.iter().map(String::as_str).collect();
    Ok(BatteryCase {
        name,
        problem: Problem::parse(n, &f, &refs)?,
        x_star,
        lambda,
    })
}

fn add(
    out: &mut Vec<BatteryCase>,
    name: String,
    n: usize,
    g: Vec<String>,
    x: Vec<f64>,
    lambda: Vec<f64>,
) {
    out.push(case(name, n, g, x, lambda).expect("battery case parses"));
}

/// Sphere, cylinder, ellipsoid, paraboloid and hyperplane constraints in
/// dimensions 2, 3 and 5, plus two codimension-2 intersections.
pub fn quadric_battery() -> Vec<BatteryCase> {
    let mut out = Vec::new();
    for n in [2usize, 3, 5] {
        let unit = {
            let mut u: Vec<f64> = (0..n).map(|k| 1.0 + 0.5 * k as f64).collect();
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            u.iter_mut().for_each(|v| *v /= norm);
            u
        };

        let r = 1.5;
        let g = (0..n)
            .map(|k| format!("x{}^2", k + 1))
            .collect::<Vec<_>>()
            .join(" + ");
        let x: Vec<f64> = unit.iter().map(|u| r * u).collect();
        add(
            &mut out,
            format!("sphere-{n}"),
            n,
            vec![format!("{g} - {}", lit(r * r))],
            x,
            vec![0.8],
        );

        let x: Vec<f64> = (0..n)
            .map(|k| match k {
                0 => 0.6,
                1 => 0.8,
                _ => 0.3 * k as f64,
            })
            .collect();
        add(
            &mut out,
            format!("cylinder-{n}"),
            n,
            vec!["x1^2 + x2^2 - 1".into()],
            x,
            vec![-1.3],
        );

        let axes: Vec<f64> = (0..n).map(|k| 1.0 + 0.7 * k as f64).collect();
        let g = (0..n)
            .map(|k| format!("x{}^2 / {}", k + 1, lit(axes[k] * axes[k])))
            .collect::<Vec<_>>()
            .join(" + ");
        let x: Vec<f64> = unit.iter().zip(&axes).map(|(u, a)| u * a).collect();
        add(
            &mut out,
            format!("ellipsoid-{n}"),
            n,
            vec![format!("{g} - 1")],
            x,
            vec![2.0],
        );

        let curv: Vec<f64> = (0..n - 1).map(|k| 0.5 + 0.4 * k as f64).collect();
        let bowl = (0..n - 1)
            .map(|k| format!("{} * x{}^2", lit(curv[k]), k + 1))
            .collect::<Vec<_>>()
            .join(" + ");
        let mut x: Vec<f64> = (0..n - 1).map(|k| 0.3 - 0.2 * k as f64).collect();
        let top: f64 = x.iter().zip(&curv).map(|(xi, c)| c * xi * xi).sum();
        x.push(top);
        add(
            &mut out,
            format!("paraboloid-{n}"),
            n,
            vec![format!("x{n} - ({bowl})")],
            x,
            vec![1.1],
        );

        let w: Vec<f64> = (0..n).map(|k| 1.0 - 0.3 * k as f64).collect();
        let x: Vec<f64> = (0..n).map(|k| 0.1 * k as f64).collect();
        let c: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
        add(
            &mut out,
            format!("hyperplane-{n}"),
            n,
            vec![format!("{} - {}", linear(&w), lit(c))],
            x,
            vec![-0.7],
        );
    }
    for n in [3usize, 5] {
        let g = vec![
            (0..n)
                .map(|k| format!("x{}^2", k + 1))
                .collect::<Vec<_>>()
                .join(" + ")
                + " - 1",
            format!("x{n}"),
        ];
        let mut x = vec![0.0; n];
        x[0] = 0.6;
        x[1] = 0.8;
        add(
            &mut out,
            format!("sphere-slice-{n}"),
            n,
            g,
            x,
            vec![1.2, 0.4],
        );
    }
    out
}

fn planar(name: &str, f: &str, g: &str, x: [f64; 2], lambda: f64) -> BatteryCase {
    BatteryCase {
        name: name.to_string(),
        problem: Problem::parse(2, f, &[g]).expect("planar case parses"),
        x_star: x.to_vec(),
        lambda: vec![lambda],
    }
}

/// One local minimizer per sign quadrant of `(κ_f, κ_g)`, in the order
/// a, b, c, d. The constraint is the circle of radius 2 about `(3, 0)`,
/// written with either orientation.
pub fn planar_quadrant_cases() -> Vec<BatteryCase> {
    let inward = "4 - (x1 - 3)^2 - x2^2";
    let outward = "(x1 - 3)^2 + x2^2 - 4";
    vec![
        planar("quadrant-a", "-(x1^2 + x2^2)", inward, [5.0, 0.0], 2.5),
        planar("quadrant-b", "x1^2 + x2^2", outward, [1.0, 0.0], -0.5),
        planar("quadrant-c", "-(x1^2 + x2^2)", outward, [5.0, 0.0], -2.5),
        planar("quadrant-d", "x1^2 + x2^2", inward, [1.0, 0.0], 0.5),
    ]
}

/// A stationary point of the same circle that is a local maximizer, so the
/// planar curvature inequality fails.
pub fn planar_violating_case() -> BatteryCase {
    planar(
        "violating",
        "x1^2 + x2^2",
        "(x1 - 3)^2 + x2^2 - 4",
        [5.0, 0.0],
        2.5,
    )
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Options of the random generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomOptions {
    /// Include quartic terms in `f`.
    pub quartic: bool,
    /// Allow quadric constraints; otherwise all constraints are affine.
    pub curved_constraints: bool,
}

/// Random problem with a constructed stationary point:
/// `f = (x-x*)^T A (x-x*)/2 + Σ e_k x_k^4 + w^T x` with `w` chosen so that
/// `∇f(x*) = Jg(x*)^T λ`, and constraints that are a random mix of affine
/// `a^T (x - x*)` and quadric `Σ d_k (x_k - c_k)^2 - r` passing through
/// `x*`. Resamples until `Jg(x*)` is well conditioned.
pub fn random_stationary<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    opts: RandomOptions,
) -> BatteryCase {
    assert!(m >= 1 && m <= n, "need 1 <= m <= n");
    loop {
        let x: Vec<f64> = (0..n).map(|_| uniform(rng, -1.0, 1.0)).collect();
        let mut g = Vec::with_capacity(m);
        for _ in 0..m {
            if opts.curved_constraints && rng.random::<bool>() {
                let c: Vec<f64> = (0..n).map(|_| uniform(rng, -1.5, 1.5)).collect();
                let d: Vec<f64> = (0..n)
                    .map(|_| {
                        let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        s * uniform(rng, 0.3, 1.5)
                    })
                    .collect();
                let r: f64 = (0..n).map(|k| d[k] * (x[k] - c[k]).powi(2)).sum();
                let body = (0..n)
                    .map(|k| format!("{} * {}", lit(d[k]), shifted_square(k, c[k])))
                    .collect::<Vec<_>>()
                    .join(" + ");
                g.push(format!("{body} - {}", lit(r)));
            } else {
                let a: Vec<f64> = (0..n).map(|_| uniform(rng, -1.0, 1.0)).collect();
                let body = (0..n)
                    .map(|k| format!("{} * (x{} - {})", lit(a[k]), k + 1, lit(x[k])))
                    .collect::<Vec<_>>()
                    .join(" + ");
                g.push(body);
            }
        }
        let refs: Vec<&str> = g.iter().map(String::as_str).collect();
        // constraint Jacobian conditioning
        let Ok(probe) = Problem::parse(n, "x1", &refs).and_then(|p| p.bundle(&x)) else {
            continue;
        };
        let s = linalg::singular_values(probe.jac_g());
        if s[0] < 1e-2 * s[s.len() - 1] || s[0] < 1e-2 {
            continue;
        }

        let mut terms = Vec::new();
        for i in 0..n {
            for j in i..n {
                let a = uniform(rng, -1.0, 1.0);
                let scale = if i == j { 0.5 } else { 1.0 };
                terms.push(format!(
                    "{} * (x{} - {}) * (x{} - {})",
                    lit(a * scale),
                    i + 1,
                    lit(x[i]),
                    j + 1,
                    lit(x[j])
                ));
            }
        }
        if opts.quartic {
            for k in 0..n {
                terms.push(format!("{} * x{}^4", lit(uniform(rng, -0.5, 0.5)), k + 1));
            }
        }
        let base = terms.join(" + ");
        let lambda: Vec<f64> = (0..m)
            .map(|_| {
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                s * uniform(rng, 0.3, 2.0)
            })
            .collect();
        let Ok(base_problem) = Problem::parse(n, &base, &refs) else {
            continue;
        };
        let Ok(bb) = base_problem.bundle(&x) else {
            continue;
        };
        let target = probe.jac_g().transpose() * DVector::from_column_slice(&lambda);
        let w = target - bb.grad_f();
        let f = format!("{base} + {}", linear(w.as_slice()));
        let Ok(problem) = Problem::parse(n, &f, &refs) else {
            continue;
        };
        return BatteryCase {
            name: format!("random-{n}-{m}"),
            problem,
            x_star: x,
            lambda,
        };
    }
}

/// Random expression over `x1..xn` with tree depth at most `depth`, using
/// every operator and function of the grammar. Leaves are variables,
/// literals in `[-2, 2]` and the named constants.
pub fn random_expression<R: Rng + ?Sized>(rng: &mut R, n: usize, depth: usize) -> String {
    if depth == 0 || rng.random_bool(0.25) {
        return match rng.random_range(0..10) {
            0..=5 => format!("x{}", rng.random_range(1..=n)),
            6..=8 => format!("{:.3}", uniform(rng, -2.0, 2.0)),
            _ => (if rng.random_bool(0.5) { "pi" } else { "e" }).to_string(),
        };
    }
    let sub = |rng: &mut R| random_expression(rng, n, depth - 1);
    match rng.random_range(0..13) {
        0 => format!("({} + {})", sub(rng), sub(rng)),
        1 => format!("({} - {})", sub(rng), sub(rng)),
        2 => format!("({} * {})", sub(rng), sub(rng)),
        3 => format!("({} / {})", sub(rng), sub(rng)),
        4 => format!("({})^{}", sub(rng), rng.random_range(2..=3)),
        5 => format!("({})^(-1)", sub(rng)),
        6 => format!("(exp({}))^({:.2})", sub(rng), uniform(rng, -1.5, 1.5)),
        7 => format!("-({})", sub(rng)),
        8 => format!("sin({})", sub(rng)),
        9 => format!("cos({})", sub(rng)),
        10 => format!("tanh({})", sub(rng)),
        11 => format!("log(1 + ({})^2)", sub(rng)),
        _ => format!("sqrt(2 + sin({}))", sub(rng)),
    }
}
