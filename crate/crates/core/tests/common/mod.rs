//! Example systems and independent oracles shared by the integration tests.
#![allow(dead_code)]

use halanay_core::expr::TimeExpr;
use halanay_core::mlf::FractionalOrder;
use halanay_core::system::{parse_matrix, DelaySystem, DelayTerm};
use nalgebra::DMatrix;

pub fn order(alpha: f64) -> FractionalOrder {
    FractionalOrder::new(alpha).unwrap()
}

pub fn system(alpha: f64, a: &[&[&str]], b: &[&[&str]], q: &str, tau: f64, phi: &[&str]) -> DelaySystem {
    DelaySystem::new(
        order(alpha),
        parse_matrix(a, "t").unwrap(),
        vec![DelayTerm { b: parse_matrix(b, "t").unwrap(), q: TimeExpr::parse(q, "t").unwrap() }],
        None,
        tau,
        phi.iter().map(|s| TimeExpr::parse(s, "s").unwrap()).collect(),
    )
    .unwrap()
}

/// Three-dimensional positive system with unbounded coefficients; the
/// matrix is stored as printed, which already has the Metzler sign pattern.
pub fn example_unbounded() -> DelaySystem {
    system(
        0.45,
        &[
            &["-0.7-1/sqrt(1+t)-0.005*t", "1-1/sqrt(1+t)", "0.3+0.2*sin(t)"],
            &["0.1+0.003*t", "-3-0.8/(1+t)-0.003*t", "0.15+0.001*t"],
            &["0.4+1/sqrt(1+t)", "1+0.8/(1+t)+0.001*t", "-1-0.004*t"],
        ],
        &[
            &["0.002*t^2*sin(t)^2/(1+t^2)", "0.0015*t", "0"],
            &["0.0005*t", "0.05+0.1/(2+t)", "0.001*t"],
            &["0.1", "0.05-0.1/(2+t)", "0.12/(3+t)"],
        ],
        "2-cos(t)^4",
        2.0,
        &["0.2-0.4*cos(s)", "0.1+0.1*s", "log(s+3)-0.5"],
    )
}

/// Two-dimensional positive system with bounded coefficients.
pub fn example_bounded() -> DelaySystem {
    system(
        0.75,
        &[&["-3-1/sqrt(1+t)", "5-1/sqrt(1+t)"], &["0.2+1/(1+t)", "-6.6-0.2/sqrt(1+t)"]],
        &[&["t*sin(t)^2/(1+t^2)", "1.15+0.1/(2+t)"], &["1.5", "0.1+0.2/(2+t)"]],
        "(1+exp(-t))/2",
        1.0,
        &["0.3+0.4*sin(s)", "0.1+0.5*s"],
    )
}

/// Scalar system with a sign-changing delayed coefficient, certified by the LMI.
pub fn example_scalar() -> DelaySystem {
    system(0.65, &[&["-(0.2+0.002*t)"]], &[&["-0.02*sqrt(t)"]], "1+1/(2+sin(t))", 2.0, &["0.3-0.5*cos(2*s)"])
}

/// Plain bisection for the root of an increasing function on `[lo, hi]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Coefficients `c_0..c_n` of `det(xI − S) = Σ c_k x^{n−k}` by Faddeev–LeVerrier.
pub fn char_poly(s: &DMatrix<f64>) -> Vec<f64> {
    let n = s.nrows();
    let mut c = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = s * &m + DMatrix::identity(n, n) * c[k - 1];
        let ck = -(s * &m).trace() / k as f64;
        c.push(ck);
    }
    c
}

/// Largest root of a real-rooted polynomial by Newton iteration started
/// above every root, where the iteration decreases monotonically.
pub fn largest_root(c: &[f64], upper: f64) -> f64 {
    let eval = |x: f64| {
        let mut p = 0.0;
        let mut dp = 0.0;
        for &ck in c {
            dp = dp * x + p;
            p = p * x + ck;
        }
        (p, dp)
    };
    let mut x = upper;
    for _ in 0..100_000 {
        let (p, dp) = eval(x);
        if p == 0.0 || dp <= 0.0 {
            break;
        }
        let next = x - p / dp;
        if next >= x || next.is_nan() {
            break;
        }
        x = next;
    }
    x
}

/// Largest eigenvalue through the characteristic polynomial.
pub fn eigen_oracle(s: &DMatrix<f64>) -> f64 {
    let n = s.nrows();
    let gersh = (0..n)
        .map(|i| s[(i, i)] + (0..n).filter(|&j| j != i).map(|j| s[(i, j)].abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    largest_root(&char_poly(s), gersh + 1e-9 * (1.0 + gersh.abs()))
}

/// Classical RK4 for `x' = A(t)x + B(t)x(t − q(t))` by the method of steps,
/// reading the history through cubic Hermite interpolation.
pub fn rk4_delay(sys: &DelaySystem, t_end: f64, h: f64) -> Vec<(f64, Vec<f64>)> {
    let d = sys.dim;
    let n = (t_end / h).round() as usize;
    let mut ts = vec![0.0];
    let mut xs = vec![sys.phi_at(0.0).unwrap().iter().copied().collect::<Vec<f64>>()];
    let mut fs: Vec<Vec<f64>> = Vec::new();

    let history = |s: f64, ts: &[f64], xs: &[Vec<f64>], fs: &[Vec<f64>]| -> Vec<f64> {
        if s <= 0.0 {
            return sys.phi_at(s).unwrap().iter().copied().collect();
        }
        assert!(s <= ts[ts.len() - 1] + 1e-12, "delay shorter than the step");
        let k = ((s / h).floor() as usize).min(fs.len().saturating_sub(2));
        let u = (s - ts[k]) / h;
        let (h00, h10, h01, h11) = (
            2.0 * u.powi(3) - 3.0 * u * u + 1.0,
            u.powi(3) - 2.0 * u * u + u,
            -2.0 * u.powi(3) + 3.0 * u * u,
            u.powi(3) - u * u,
        );
        (0..d).map(|i| h00 * xs[k][i] + h10 * h * fs[k][i] + h01 * xs[k + 1][i] + h11 * h * fs[k + 1][i]).collect()
    };
    let rhs = |t: f64, x: &[f64], ts: &[f64], xs: &[Vec<f64>], fs: &[Vec<f64>]| -> Vec<f64> {
        let a = sys.a_at(t).unwrap();
        let b = sys.b_at(0, t).unwrap();
        let y = history(t - sys.q_at(0, t).unwrap(), ts, xs, fs);
        (0..d).map(|i| (0..d).map(|j| a[(i, j)] * x[j] + b[(i, j)] * y[j]).sum()).collect()
    };

    for step in 0..n {
        let t = step as f64 * h;
        let x = xs[step].clone();
        let k1 = rhs(t, &x, &ts, &xs, &fs);
        fs.push(k1.clone());
        let add = |v: &[f64], k: &[f64], c: f64| v.iter().zip(k).map(|(a, b)| a + c * b).collect::<Vec<f64>>();
        let k2 = rhs(t + h / 2.0, &add(&x, &k1, h / 2.0), &ts, &xs, &fs);
        let k3 = rhs(t + h / 2.0, &add(&x, &k2, h / 2.0), &ts, &xs, &fs);
        let k4 = rhs(t + h, &add(&x, &k3, h), &ts, &xs, &fs);
        let next = (0..d).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        ts.push(t + h);
        xs.push(next);
    }
    ts.into_iter().zip(xs).collect()
}
