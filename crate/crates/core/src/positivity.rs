//! Order-preserving systems: Metzler `A`, nonnegative `B`.
//!
//! Column sums reduce the matrix system to the scalar data
//! `a(t) = −max_j Σ_i A_ij(t)` and `b_k(t) = max_j Σ_i (B_k)_ij(t)`, and the
//! ℓ1 norm of the solution then obeys the Halanay inequality with those
//! coefficients.

use serde::Serialize;
use thiserror::Error;

use crate::halanay::{self, HalanayCertificate, HalanayError, SampledInput, ScanGrid, SIGN_SLACK};
use crate::system::{DelaySystem, SystemError};

/// Points used to approximate `sup_{s∈[−τ,0]} ‖φ(s)‖`.
pub const PHI_SAMPLES: usize = 10_000;

#[derive(Debug, Error)]
pub enum PositivityError {
    #[error("A(t) is not Metzler on the grid")]
    NotMetzler,
    #[error("B(t) has negative entries on the grid")]
    NotNonnegative,
    #[error("amplitude {given} is below the sampled sup-norm {sampled} of the initial function")]
    Amplitude { given: f64, sampled: f64 },
    #[error("the positivity route does not handle a forcing term")]
    Forcing,
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Halanay(#[from] HalanayError),
}

impl From<crate::expr::ExprError> for PositivityError {
    fn from(e: crate::expr::ExprError) -> Self {
        Self::System(e.into())
    }
}

#[derive(Debug, Clone, Default)]
pub struct PositivityOptions {
    /// Treat `a(t)` as bounded instead of testing it on the grid.
    pub assume_bounded: bool,
    /// Envelope amplitude to use instead of the sampled sup-norm of `φ`.
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityVerdict {
    pub metzler_ok: bool,
    pub nonneg_ok: bool,
    #[serde(skip)]
    pub t: Vec<f64>,
    #[serde(skip)]
    pub a_fun: Vec<f64>,
    /// `b_fun[i][k]` is `b_k(t_i)`.
    #[serde(skip)]
    pub b_fun: Vec<Vec<f64>>,
    pub a0: f64,
    pub p: f64,
    pub sigma: f64,
    pub a_bounded: bool,
    pub ratio_ok: bool,
    pub bounded_gap_ok: bool,
    /// `sup ‖φ(s)‖₁` over the sampled history.
    pub phi_sup_l1: f64,
}

/// `(metzler_ok, nonneg_ok)` over the grid, with a small negative slack.
pub fn structure_check(sys: &DelaySystem, grid: &ScanGrid) -> Result<(bool, bool), SystemError> {
    let mut metzler = true;
    let mut nonneg = true;
    for i in 0..grid.n_points {
        let t = grid.at(i);
        let a = sys.a_at(t)?;
        for r in 0..sys.dim {
            for c in 0..sys.dim {
                if r != c && a[(r, c)] < -SIGN_SLACK {
                    metzler = false;
                }
            }
        }
        for k in 0..sys.delays.len() {
            if sys.b_at(k, t)?.iter().any(|&v| v < -SIGN_SLACK) {
                nonneg = false;
            }
        }
        if !metzler && !nonneg {
            break;
        }
    }
    Ok((metzler, nonneg))
}

fn max_column_sum(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.sum()).fold(f64::NEG_INFINITY, f64::max)
}

/// Sampled `a(t)` and `b_k(t)` (one entry per delay term) at each grid point.
pub fn column_sums(sys: &DelaySystem, grid: &ScanGrid) -> Result<(Vec<f64>, Vec<Vec<f64>>), SystemError> {
    let mut a_fun = Vec::with_capacity(grid.n_points);
    let mut b_fun = Vec::with_capacity(grid.n_points);
    for i in 0..grid.n_points {
        let t = grid.at(i);
        a_fun.push(-max_column_sum(&sys.a_at(t)?));
        let bs =
            (0..sys.delays.len()).map(|k| sys.b_at(k, t).map(|b| max_column_sum(&b))).collect::<Result<Vec<_>, _>>()?;
        b_fun.push(bs);
    }
    Ok((a_fun, b_fun))
}

/// `sup ‖φ(s)‖₁` on a uniform grid of the history interval.
pub fn phi_sup_l1(sys: &DelaySystem) -> Result<f64, SystemError> {
    Ok(sys.sample_phi(PHI_SAMPLES)?.iter().map(|(_, v)| v.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max))
}

/// Runs the column-sum criteria and, when one holds, the Halanay scan.
///
/// A failed condition yields a verdict without certificate; structural
/// failures are errors since the reduction is meaningless without them.
pub fn certify_positive(
    sys: &DelaySystem,
    grid: &ScanGrid,
    opts: &PositivityOptions,
) -> Result<(PositivityVerdict, Option<HalanayCertificate>), PositivityError> {
    if sys.forcing.is_some() {
        return Err(PositivityError::Forcing);
    }
    sys.check_delays(grid)?;
    let (metzler_ok, nonneg_ok) = structure_check(sys, grid)?;
    if !metzler_ok {
        return Err(PositivityError::NotMetzler);
    }
    if !nonneg_ok {
        return Err(PositivityError::NotNonnegative);
    }
    let (a_fun, b_fun) = column_sums(sys, grid)?;
    let t = grid.points();
    let mut q = Vec::with_capacity(t.len());
    for &ti in &t {
        q.push(
            (0..sys.delays.len())
                .map(|k| sys.q_at(k, ti).map(|v| v.clamp(0.0, sys.tau)))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    let sampled = SampledInput {
        alpha: sys.alpha,
        t: t.clone(),
        a: a_fun.clone(),
        b: b_fun.clone(),
        q,
        c: vec![0.0; t.len()],
        assume_bounded: opts.assume_bounded,
    };
    let cond = halanay::classify_sampled(&sampled);
    let phi_sup = phi_sup_l1(sys)?;
    let verdict = PositivityVerdict {
        metzler_ok,
        nonneg_ok,
        t,
        a_fun,
        b_fun,
        a0: cond.a0,
        p: cond.p,
        sigma: cond.sigma,
        a_bounded: cond.a_bounded,
        ratio_ok: cond.a0 > 0.0 && cond.p < 1.0,
        bounded_gap_ok: cond.sigma > 0.0 && cond.a_bounded,
        phi_sup_l1: phi_sup,
    };
    if !(verdict.ratio_ok || verdict.bounded_gap_ok) {
        return Ok((verdict, None));
    }
    let m = match opts.amplitude {
        Some(given) if given < phi_sup => return Err(PositivityError::Amplitude { given, sampled: phi_sup }),
        Some(given) => given,
        None => phi_sup,
    };
    let cert = halanay::certify_sampled(&sampled, m)?;
    Ok((verdict, Some(cert)))
}

/// Componentwise bounds `φ⁻ = −|φ| ⪯ φ ⪯ |φ| = φ⁺`.
pub fn split_initial(phi: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let plus: Vec<Vec<f64>> = phi.iter().map(|v| v.iter().map(|x| x.abs()).collect()).collect();
    let minus = plus.iter().map(|v| v.iter().map(|x| -x).collect()).collect();
    (plus, minus)
}
