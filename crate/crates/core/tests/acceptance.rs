//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::time::Instant;

use common::*;
use halanay_core::expr::TimeExpr;
use halanay_core::fdde::{self, NormKind, SolverConfig};
use halanay_core::halanay::{self, CaseTag, HalanayCertificate, ScanGrid};
use halanay_core::lmi::{self, LmiInput};
use halanay_core::mlf::{mittag_leffler, MlQuery};
use halanay_core::positivity::{self, PositivityOptions};
use halanay_core::system::{DelaySystem, DelayTerm};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ml(alpha: f64, x: f64) -> f64 {
    mittag_leffler(MlQuery::new(alpha, 1.0, x)).unwrap()
}

fn ml_constants() -> Outcome {
    let v1 = ml(0.65, -0.05 * 2f64.powf(0.65));
    let v2 = ml(0.75, -0.02);
    let v3 = ml(0.45, -0.075 * 2f64.powf(0.45));
    ensure((v1 - 0.9179).abs() <= 5e-4, || format!("E_0.65 = {v1}"))?;
    ensure(v2 > 0.97, || format!("E_0.75 = {v2}"))?;
    ensure(v3 > 0.8, || format!("E_0.45 = {v3}"))?;
    Ok(format!("{v1:.6}, {v2:.6}, {v3:.6}"))
}

fn sub_semigroup() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let a = rng.gen_range(0.05..=1.0f64);
        let lam = rng.gen_range(1e-3..10.0f64);
        let t = rng.gen_range(0.0..20.0f64);
        let s = rng.gen_range(0.0..20.0f64);
        let lhs = ml(a, -lam * t.powf(a)) * ml(a, -lam * s.powf(a));
        let rhs = ml(a, -lam * (t + s).powf(a));
        worst = worst.max(lhs - rhs);
        ensure(lhs <= rhs + 1e-12, || format!("α={a} λ={lam} t={t} s={s}: {lhs} > {rhs}"))?;
    }
    Ok(format!("max(lhs - rhs) = {worst:.3e}"))
}

fn scan() -> ScanGrid {
    ScanGrid::new(100.0, 2001).unwrap()
}

/// `h(λ) < 0` at every scan point for the single-delay column-sum data.
fn residual_negative(sys: &DelaySystem, lambda: f64, a: &[f64], b: &[Vec<f64>], t: &[f64]) -> Result<f64, String> {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..t.len() {
        let q = sys.q_at(0, t[i]).unwrap();
        let h = halanay::residual(sys.alpha, lambda, a[i], &b[i], &[q]).unwrap();
        worst = worst.max(h);
    }
    Ok(worst)
}

fn simulate_envelope<F: Fn(f64) -> f64>(
    sys: &DelaySystem,
    t_end: f64,
    norm: NormKind,
    env: F,
) -> Result<fdde::EnvelopeCheck, String> {
    let traj = fdde::solve(sys, &SolverConfig::new(t_end, 1e-2).unwrap()).map_err(|e| e.to_string())?;
    Ok(fdde::check_envelope(&traj, norm, env, fdde::DEFAULT_ENVELOPE_TOL))
}

fn example_unbounded_end_to_end() -> Outcome {
    let sys = example_unbounded();
    let grid = scan();
    // the printed initial function has sup ℓ1 norm below 1.2; the stated bound is used as amplitude
    let opts = PositivityOptions { amplitude: Some(1.2), ..Default::default() };
    let (verdict, cert) = positivity::certify_positive(&sys, &grid, &opts).map_err(|e| e.to_string())?;
    for (i, &t) in verdict.t.iter().enumerate() {
        let (a, b) = (0.2 + 0.002 * t, 0.1 + 0.0015 * t);
        ensure((verdict.a_fun[i] - a).abs() <= 1e-12 && (verdict.b_fun[i][0] - b).abs() <= 1e-12, || {
            format!("column sums at t={t}: {} {:?}", verdict.a_fun[i], verdict.b_fun[i])
        })?;
    }
    let cert = cert.ok_or("no certificate")?;
    ensure(cert.verdict.case_tag == CaseTag::Ratio, || format!("verdict {:?}", cert.verdict.case_tag))?;
    ensure((cert.verdict.a0 - 0.2).abs() <= 1e-12 && cert.verdict.p <= 0.75, || {
        format!("a0={} p={}", cert.verdict.a0, cert.verdict.p)
    })?;
    let h_max = residual_negative(&sys, 0.075, &verdict.a_fun, &verdict.b_fun, &verdict.t)?;
    ensure(h_max <= 0.0, || format!("h(0.075) reaches {h_max}"))?;
    ensure(cert.lambda_star >= 0.075, || format!("λ* = {}", cert.lambda_star))?;
    let alpha = sys.alpha;
    let check = simulate_envelope(&sys, 20.0, NormKind::L1, |t| 1.2 * alpha.ml(-0.075 * t.powf(0.45)).unwrap())?;
    ensure(check.passed, || format!("envelope ratio {} at t={}", check.max_ratio, check.worst_t))?;
    Ok(format!(
        "λ*={:.5} p={:.4} max h(0.075)={h_max:.2e} sampled sup|φ|₁={:.4} max ratio={:.4}",
        cert.lambda_star, cert.verdict.p, verdict.phi_sup_l1, check.max_ratio
    ))
}

fn example_bounded_end_to_end() -> Outcome {
    let sys = example_bounded();
    let grid = scan();
    let (verdict, cert) =
        positivity::certify_positive(&sys, &grid, &PositivityOptions::default()).map_err(|e| e.to_string())?;
    let cert = cert.ok_or("no certificate")?;
    ensure(cert.verdict.case_tag == CaseTag::BoundedGap, || format!("verdict {:?}", cert.verdict.case_tag))?;
    ensure(cert.verdict.sigma >= 0.1, || format!("σ = {}", cert.verdict.sigma))?;
    let h_max = residual_negative(&sys, 0.02, &verdict.a_fun, &verdict.b_fun, &verdict.t)?;
    ensure(h_max < 0.0, || format!("h(0.02) reaches {h_max}"))?;
    let alpha = sys.alpha;
    let m = cert.m;
    let check = simulate_envelope(&sys, 20.0, NormKind::L1, |t| m * alpha.ml(-0.02 * t.powf(0.75)).unwrap())?;
    ensure(check.passed, || format!("envelope ratio {} at t={}", check.max_ratio, check.worst_t))?;
    let own = simulate_envelope(&sys, 20.0, NormKind::L1, |t| halanay::envelope(&cert, alpha, t))?;
    ensure(own.passed, || format!("certified envelope ratio {} at t={}", own.max_ratio, own.worst_t))?;
    Ok(format!(
        "σ={:.4} λ*={:.5} M={:.4} max h(0.02)={h_max:.2e} max ratio {:.4} with λ=0.02, {:.4} with λ*",
        cert.verdict.sigma, cert.lambda_star, m, check.max_ratio, own.max_ratio
    ))
}

fn example_scalar_end_to_end() -> Outcome {
    let sys = example_scalar();
    let grid = scan();
    let input = LmiInput {
        sys: sys.clone(),
        gamma: TimeExpr::parse("0.3", "t").unwrap(),
        sigma: TimeExpr::parse("0.2", "t").unwrap(),
        grid,
        tol: lmi::DEFAULT_TOL,
    };
    let m2 = lmi::phi_sup_sq(&sys).map_err(|e| e.to_string())?;
    let report = lmi::certify_lmi(&input, m2).map_err(|e| e.to_string())?;
    ensure(report.feasible, || format!("infeasible, worst eigenvalue {} at t={}", report.worst_eigen, report.worst_t))?;
    for (i, &t) in grid.points().iter().enumerate() {
        let a = sys.a_at(t).unwrap()[(0, 0)];
        let b = sys.b_at(0, t).unwrap()[(0, 0)];
        let s = lmi::lmi_block(&sys.a_at(t).unwrap(), &sys.b_at(0, t).unwrap(), 0.3, 0.2).unwrap();
        let expected = [[-0.1 - 0.004 * t, -0.02 * t.sqrt()], [-0.02 * t.sqrt(), -0.2]];
        for r in 0..2 {
            for c in 0..2 {
                ensure((s[(r, c)] - expected[r][c]).abs() <= 1e-12, || format!("block entry ({r},{c}) at t={t}"))?;
            }
        }
        let trace = 2.0 * a + 0.3 - 0.2;
        let det = (2.0 * a + 0.3) * -0.2 - b * b;
        ensure(trace < 0.0 && det > 0.0, || format!("trace/det oracle at t={t}: {trace} {det}"))?;
        ensure((det - (0.02 + 0.0004 * t)).abs() <= 1e-12, || format!("det at t={t}: {det}"))?;
        ensure(report.eigen[i] <= 0.0, || format!("eigenvalue {} at t={t}", report.eigen[i]))?;
    }
    let cert: HalanayCertificate = report.certificate.ok_or("no certificate")?;
    ensure(cert.lambda_star >= 0.05, || format!("λ* = {}", cert.lambda_star))?;
    let alpha = sys.alpha;
    let check = simulate_envelope(&sys, 30.0, NormKind::L2, |t| (m2 * alpha.ml(-0.05 * t.powf(0.65)).unwrap()).sqrt())?;
    ensure(check.passed, || format!("envelope ratio {} at t={}", check.max_ratio, check.worst_t))?;
    Ok(format!(
        "λ*={:.5} M2={m2:.4} worst eigenvalue={:.4} max ratio={:.4}",
        cert.lambda_star, report.worst_eigen, check.max_ratio
    ))
}

fn root_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let alpha = order(rng.gen_range(0.1..=1.0));
        let m = rng.gen_range(1..=3);
        let a = rng.gen_range(0.01..5.0);
        let share = rng.gen_range(0.0..0.99);
        let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.01..1.0)).collect();
        let wsum: f64 = w.iter().sum();
        let b: Vec<f64> = w.iter().map(|x| a * share * x / wsum).collect();
        let q: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..5.0)).collect();
        let lam = halanay::lambda_at(alpha, a, &b, &q).map_err(|e| e.to_string())?;
        let h = |l: f64| {
            l - a + b.iter().zip(&q).map(|(bk, qk)| bk / ml(alpha.get(), -l * qk.powf(alpha.get()))).sum::<f64>()
        };
        let oracle = bisect(h, 0.0, a, 200);
        worst = worst.max((lam - oracle).abs());
        ensure((lam - oracle).abs() <= 1e-8, || format!("α={alpha:?} a={a} b={b:?} q={q:?}: {lam} vs {oracle}"))?;
    }
    Ok(format!("max |λ - oracle| = {worst:.2e}"))
}

/// `(max error over the grid, error at t_end)` for `D^α x = −x`, `x(0) = 1`.
fn relaxation_error(alpha: f64, h: f64) -> (f64, f64) {
    let sys = system(alpha, &[&["-1"]], &[&["0"]], "0", 1.0, &["1"]);
    let traj = fdde::solve(&sys, &SolverConfig::new(5.0, h).unwrap()).unwrap();
    let errs: Vec<f64> =
        (0..traj.len()).map(|n| (traj.state(n)[0] - ml(alpha, -traj.t[n].powf(alpha))).abs()).collect();
    (errs.iter().copied().fold(0.0, f64::max), errs[errs.len() - 1])
}

fn solver_convergence() -> Outcome {
    let mut lines = Vec::new();
    for alpha in [0.45, 0.65, 0.75] {
        let (max_errs, end_errs): (Vec<f64>, Vec<f64>) =
            [1e-2, 5e-3, 2.5e-3].iter().map(|&h| relaxation_error(alpha, h)).unzip();
        let decreasing = |e: &[f64]| e[1] < e[0] && e[2] < e[1];
        ensure(decreasing(&end_errs), || format!("α={alpha}: error at t_end not decreasing {end_errs:?}"))?;
        ensure(decreasing(&max_errs), || format!("α={alpha}: max error not decreasing {max_errs:?}"))?;
        ensure(end_errs[2] < 1e-4, || format!("α={alpha}: error at t_end {:.3e}", end_errs[2]))?;
        lines.push(format!("α={alpha}: {:.2e} at t_end, {:.2e} max", end_errs[2], max_errs[2]));
    }
    Ok(lines.join("; "))
}

fn classical_reduction() -> Outcome {
    let sys = system(
        1.0,
        &[&["-1+0.2*sin(t)", "0.3"], &["0.1*cos(t)", "-0.8"]],
        &[&["0.4", "-0.1*t/(1+t)"], &["0.2", "0.3*exp(-t)"]],
        "0.5+0.25*sin(t)",
        1.0,
        &["1+s", "cos(3*s)"],
    );
    let traj = fdde::solve(&sys, &SolverConfig::new(5.0, 1e-3).unwrap()).map_err(|e| e.to_string())?;
    let oracle = rk4_delay(&sys, 5.0, 1e-3);
    ensure(oracle.len() == traj.len(), || "grid mismatch".into())?;
    let mut worst = 0.0f64;
    for (n, (t, x)) in oracle.iter().enumerate() {
        ensure((t - traj.t[n]).abs() < 1e-9, || format!("node {n} time mismatch"))?;
        for (xi, yi) in x.iter().zip(traj.state(n)) {
            worst = worst.max((xi - yi).abs());
        }
    }
    ensure(worst < 1e-5, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("max deviation from RK4 = {worst:.2e}"))
}

/// Trusted solver accuracy for the sign and order checks.
const SOLVER_TOL: f64 = 1e-6;

fn random_positive_system(rng: &mut ChaCha8Rng) -> (DelaySystem, Vec<String>, Vec<String>) {
    let d = rng.gen_range(1..=4);
    let alpha = rng.gen_range(0.3..=1.0);
    let mut a = vec![vec![String::new(); d]; d];
    let mut b = vec![vec![String::new(); d]; d];
    for i in 0..d {
        for j in 0..d {
            a[i][j] = if i == j {
                format!("-{:.6}-{:.6}*sin(t)^2", rng.gen_range(0.5..3.0), rng.gen_range(0.0..0.5))
            } else {
                format!("{:.6}*(1+cos({:.3}*t))", rng.gen_range(0.0..0.5), rng.gen_range(0.1..2.0))
            };
            b[i][j] = format!("{:.6}", rng.gen_range(0.0..0.5));
        }
    }
    let phi: Vec<String> = (0..d)
        .map(|_| {
            format!(
                "{:.6}+{:.6}*(1+sin({:.3}*s))",
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.5..3.0)
            )
        })
        .collect();
    let bump: Vec<String> =
        phi.iter().map(|p| format!("{p}+{:.6}+{:.6}*s^2", rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5))).collect();
    let q = format!("{:.4}+{:.4}*cos(t)^2", rng.gen_range(0.05..0.5), rng.gen_range(0.0..0.5));
    let parse = |m: &Vec<Vec<String>>| halanay_core::system::parse_matrix(m, "t").unwrap();
    let sys = DelaySystem::new(
        order(alpha),
        parse(&a),
        vec![DelayTerm { b: parse(&b), q: TimeExpr::parse(&q, "t").unwrap() }],
        None,
        1.0,
        phi.iter().map(|s| TimeExpr::parse(s, "s").unwrap()).collect(),
    )
    .unwrap();
    (sys, phi, bump)
}

fn positivity_and_order() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = SolverConfig::new(10.0, 1e-2).unwrap();
    let mut min_state = f64::INFINITY;
    let mut min_gap = f64::INFINITY;
    for case in 0..20 {
        let (sys, _, bump) = random_positive_system(&mut rng);
        let grid = ScanGrid::new(cfg.t_end, 501).unwrap();
        let (metzler, nonneg) = positivity::structure_check(&sys, &grid).unwrap();
        ensure(metzler && nonneg, || format!("case {case} is not order preserving"))?;
        let mut upper = sys.clone();
        upper.phi = bump.iter().map(|s| TimeExpr::parse(s, "s").unwrap()).collect();
        let lo = fdde::solve(&sys, &cfg).map_err(|e| e.to_string())?;
        let hi = fdde::solve(&upper, &cfg).map_err(|e| e.to_string())?;
        for n in 0..lo.len() {
            for i in 0..sys.dim {
                let (x, y) = (lo.state(n)[i], hi.state(n)[i]);
                min_state = min_state.min(x);
                min_gap = min_gap.min(y - x);
                ensure(x >= -10.0 * SOLVER_TOL, || format!("case {case}: x{i}({}) = {x}", lo.t[n]))?;
                ensure(y - x >= -10.0 * SOLVER_TOL, || format!("case {case}: order lost at t={}", lo.t[n]))?;
            }
        }
    }
    Ok(format!("min state {min_state:.3e}, min ordered gap {min_gap:.3e}"))
}

fn eigen_oracle_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6);
        let mut s = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.gen_range(-1.0..1.0);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        let got = lmi::max_eigen_sym(&s).map_err(|e| e.to_string())?;
        let want = eigen_oracle(&s);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-8, || format!("{s}: {got} vs {want}"))?;
    }
    Ok(format!("max deviation {worst:.2e}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("Mittag-Leffler constants", ml_constants),
        ("sub-semigroup inequality", sub_semigroup),
        ("unbounded positive example", example_unbounded_end_to_end),
        ("bounded positive example", example_bounded_end_to_end),
        ("scalar LMI example", example_scalar_end_to_end),
        ("root finder vs bisection", root_oracle),
        ("solver convergence", solver_convergence),
        ("classical reduction vs RK4", classical_reduction),
        ("positivity and order", positivity_and_order),
        ("eigenvalues vs characteristic polynomial", eigen_oracle_agreement),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2} {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
