//! Time-parametrized LMI test for general (not necessarily positive) systems.
//!
//! If `[[Aᵀ+A+γI, B], [Bᵀ, −σI]] ⪯ 0` for all `t` with `γ ≥ a₀ > 0` and
//! `σ/γ ≤ p < 1`, then `V = xᵀx` obeys the Halanay inequality with `a = γ`,
//! `b = σ`, giving `‖x(t)‖₂ ≤ √(M₂ E_α(−λ* t^α))` with `M₂ = sup φᵀφ`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{ExprError, TimeExpr};
use crate::halanay::{self, HalanayCertificate, HalanayError, SampledInput, ScanGrid};
use crate::mlf::FractionalOrder;
use crate::system::{DelaySystem, SystemError};

pub const DEFAULT_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-12;
const OFF_DIAGONAL_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Error)]
pub enum LmiError {
    #[error("A is {a_rows}x{a_cols} but B is {b_rows}x{b_cols}")]
    Dimension { a_rows: usize, a_cols: usize, b_rows: usize, b_cols: usize },
    #[error("matrix is not symmetric: entries ({i},{j}) differ by {diff}")]
    Asymmetric { i: usize, j: usize, diff: f64 },
    #[error("{name}({t}) = {value} is negative")]
    Negative { name: &'static str, t: f64, value: f64 },
    #[error("the LMI route does not handle a forcing term")]
    Forcing,
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Halanay(#[from] HalanayError),
}

impl From<ExprError> for LmiError {
    fn from(e: ExprError) -> Self {
        Self::System(e.into())
    }
}

#[derive(Debug, Clone)]
pub struct LmiInput {
    pub sys: DelaySystem,
    pub gamma: TimeExpr,
    pub sigma: TimeExpr,
    pub grid: ScanGrid,
    /// Largest eigenvalue still accepted as "≤ 0".
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LmiReport {
    pub feasible: bool,
    pub worst_eigen: f64,
    pub worst_t: f64,
    pub a0: f64,
    pub p: f64,
    #[serde(skip)]
    pub eigen: Vec<f64>,
    pub certificate: Option<HalanayCertificate>,
}

/// `[[Aᵀ+A+γI, B], [Bᵀ, −σI]]`.
pub fn lmi_block(a: &DMatrix<f64>, b: &DMatrix<f64>, gamma: f64, sigma: f64) -> Result<DMatrix<f64>, LmiError> {
    let d = a.nrows();
    if !a.is_square() || a.shape() != b.shape() {
        return Err(LmiError::Dimension { a_rows: a.nrows(), a_cols: a.ncols(), b_rows: b.nrows(), b_cols: b.ncols() });
    }
    let mut s = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            s[(i, j)] = a[(i, j)] + a[(j, i)];
            s[(i, d + j)] = b[(i, j)];
            s[(d + j, i)] = b[(i, j)];
        }
        s[(i, i)] += gamma;
        s[(d + i, d + i)] = -sigma;
    }
    Ok(s)
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, unsorted.
pub fn jacobi_eigenvalues(s: &DMatrix<f64>) -> Result<Vec<f64>, LmiError> {
    let n = s.nrows();
    if !s.is_square() {
        return Err(LmiError::Dimension { a_rows: n, a_cols: s.ncols(), b_rows: n, b_cols: s.ncols() });
    }
    for i in 0..n {
        for j in 0..i {
            let diff = (s[(i, j)] - s[(j, i)]).abs();
            if diff > SYMMETRY_TOL {
                return Err(LmiError::Asymmetric { i, j, diff });
            }
        }
    }
    let mut m = s.clone();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)] * m[(i, j)]).sum();
        if off.sqrt() < OFF_DIAGONAL_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // rotation angle zeroing m[p][q], computed the stable way
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - sn * mkq;
                    m[(k, q)] = sn * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - sn * mqk;
                    m[(q, k)] = sn * mpk + c * mqk;
                }
            }
        }
    }
    Ok((0..n).map(|i| m[(i, i)]).collect())
}

pub fn max_eigen_sym(s: &DMatrix<f64>) -> Result<f64, LmiError> {
    Ok(jacobi_eigenvalues(s)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `sup φ(s)ᵀφ(s)` over the sampled history.
pub fn phi_sup_sq(sys: &DelaySystem) -> Result<f64, SystemError> {
    Ok(sys.sample_phi(crate::positivity::PHI_SAMPLES)?.iter().map(|(_, v)| v.norm_squared()).fold(0.0, f64::max))
}

/// Evaluates the LMI on the grid and, when feasible, certifies `V = xᵀx`
/// with amplitude `m2`.
pub fn certify_lmi(input: &LmiInput, m2: f64) -> Result<LmiReport, LmiError> {
    let sys = &input.sys;
    if sys.forcing.is_some() {
        return Err(LmiError::Forcing);
    }
    let term = sys.single_delay()?;
    sys.check_delays(&input.grid)?;
    let t = input.grid.points();

    struct Sample {
        eigen: f64,
        gamma: f64,
        sigma: f64,
        q: f64,
    }
    let samples: Vec<Sample> = t
        .par_iter()
        .map(|&ti| {
            let gamma = input.gamma.eval(ti)?;
            let sigma = input.sigma.eval(ti)?;
            if gamma < 0.0 {
                return Err(LmiError::Negative { name: "gamma", t: ti, value: gamma });
            }
            if sigma < 0.0 {
                return Err(LmiError::Negative { name: "sigma", t: ti, value: sigma });
            }
            let s = lmi_block(&sys.a_at(ti)?, &sys.b_at(0, ti)?, gamma, sigma)?;
            let q = term.q.eval(ti)?.clamp(0.0, sys.tau);
            Ok(Sample { eigen: max_eigen_sym(&s)?, gamma, sigma, q })
        })
        .collect::<Result<_, LmiError>>()?;

    let mut worst_eigen = f64::NEG_INFINITY;
    let mut worst_t = 0.0;
    let mut a0 = f64::INFINITY;
    let mut p = 0.0f64;
    for (s, &ti) in samples.iter().zip(&t) {
        if s.eigen > worst_eigen {
            worst_eigen = s.eigen;
            worst_t = ti;
        }
        a0 = a0.min(s.gamma);
        p = p.max(if s.gamma > 0.0 { s.sigma / s.gamma } else { f64::INFINITY });
    }
    let feasible = worst_eigen <= input.tol && a0 > 0.0 && p < 1.0;
    let mut report = LmiReport {
        feasible,
        worst_eigen,
        worst_t,
        a0,
        p,
        eigen: samples.iter().map(|s| s.eigen).collect(),
        certificate: None,
    };
    if feasible {
        let sampled = SampledInput {
            alpha: sys.alpha,
            a: samples.iter().map(|s| s.gamma).collect(),
            b: samples.iter().map(|s| vec![s.sigma]).collect(),
            q: samples.iter().map(|s| vec![s.q]).collect(),
            c: vec![0.0; t.len()],
            t,
            assume_bounded: false,
        };
        report.certificate = Some(halanay::certify_sampled(&sampled, m2)?);
    }
    Ok(report)
}

/// `√(w₀ + M₂ E_α(−λ* t^α))`, the ℓ2 bound implied by a certificate for `xᵀx`.
pub fn sqrt_envelope(cert: &HalanayCertificate, alpha: FractionalOrder, t: f64) -> f64 {
    halanay::envelope(cert, alpha, t).sqrt()
}
