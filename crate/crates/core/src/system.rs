//! Linear Caputo delay systems
//! `D^α x(t) = A(t) x(t) + Σ_k B_k(t) x(t − q_k(t)) + c(t)`, `x = φ` on `[−τ, 0]`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::{ExprError, TimeExpr};
use crate::halanay::{ScanGrid, SIGN_SLACK};
use crate::mlf::FractionalOrder;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("{what} should be {expected} but is {got}")]
    Shape { what: String, expected: String, got: String },
    #[error("tau must be positive and finite, got {0}")]
    Tau(f64),
    #[error("delay q{k}({t}) = {value} lies outside [0, {tau}]")]
    DelayRange { k: usize, t: f64, value: f64, tau: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// One delayed coupling `B(t) x(t − q(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub b: Vec<Vec<TimeExpr>>,
    pub q: TimeExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySystem {
    pub alpha: FractionalOrder,
    pub dim: usize,
    pub a: Vec<Vec<TimeExpr>>,
    pub delays: Vec<DelayTerm>,
    /// Additive input `c(t)`; absent means zero.
    pub forcing: Option<Vec<TimeExpr>>,
    pub tau: f64,
    /// Initial function in the variable `s`.
    pub phi: Vec<TimeExpr>,
}

/// Parses a row-major grid of expression strings.
pub fn parse_matrix<R, S>(rows: &[R], var: &str) -> Result<Vec<Vec<TimeExpr>>, ExprError>
where
    R: AsRef<[S]>,
    S: AsRef<str>,
{
    rows.iter().map(|r| r.as_ref().iter().map(|s| TimeExpr::parse(s.as_ref(), var)).collect()).collect()
}

fn check_square(what: &str, m: &[Vec<TimeExpr>], d: usize) -> Result<(), SystemError> {
    let shape_err = |got: String| SystemError::Shape { what: what.to_string(), expected: format!("{d}x{d}"), got };
    if m.len() != d {
        return Err(shape_err(format!("{} rows", m.len())));
    }
    if let Some(r) = m.iter().find(|r| r.len() != d) {
        return Err(shape_err(format!("a row of length {}", r.len())));
    }
    Ok(())
}

fn eval_matrix(m: &[Vec<TimeExpr>], t: f64) -> Result<DMatrix<f64>, ExprError> {
    let d = m.len();
    let mut out = DMatrix::zeros(d, d);
    for (i, row) in m.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            out[(i, j)] = e.eval(t)?;
        }
    }
    Ok(out)
}

impl DelaySystem {
    /// Checks shapes and `τ`; delays are range-checked per grid by [`check_delays`](Self::check_delays).
    pub fn new(
        alpha: FractionalOrder,
        a: Vec<Vec<TimeExpr>>,
        delays: Vec<DelayTerm>,
        forcing: Option<Vec<TimeExpr>>,
        tau: f64,
        phi: Vec<TimeExpr>,
    ) -> Result<Self, SystemError> {
        let dim = a.len();
        if dim == 0 {
            return Err(SystemError::Shape { what: "A".into(), expected: "non-empty".into(), got: "empty".into() });
        }
        check_square("A", &a, dim)?;
        for (k, term) in delays.iter().enumerate() {
            check_square(&format!("B{}", k + 1), &term.b, dim)?;
        }
        let vec_shape = |what: &str, len: usize| -> Result<(), SystemError> {
            if len != dim {
                return Err(SystemError::Shape {
                    what: what.into(),
                    expected: format!("length {dim}"),
                    got: format!("length {len}"),
                });
            }
            Ok(())
        };
        if let Some(c) = &forcing {
            vec_shape("c", c.len())?;
        }
        vec_shape("phi", phi.len())?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(SystemError::Tau(tau));
        }
        Ok(Self { alpha, dim, a, delays, forcing, tau, phi })
    }

    pub fn a_at(&self, t: f64) -> Result<DMatrix<f64>, ExprError> {
        eval_matrix(&self.a, t)
    }

    pub fn b_at(&self, k: usize, t: f64) -> Result<DMatrix<f64>, ExprError> {
        eval_matrix(&self.delays[k].b, t)
    }

    pub fn q_at(&self, k: usize, t: f64) -> Result<f64, ExprError> {
        self.delays[k].q.eval(t)
    }

    pub fn forcing_at(&self, t: f64) -> Result<DVector<f64>, ExprError> {
        match &self.forcing {
            None => Ok(DVector::zeros(self.dim)),
            Some(c) => c.iter().map(|e| e.eval(t)).collect::<Result<Vec<_>, _>>().map(DVector::from_vec),
        }
    }

    pub fn phi_at(&self, s: f64) -> Result<DVector<f64>, ExprError> {
        self.phi.iter().map(|e| e.eval(s)).collect::<Result<Vec<_>, _>>().map(DVector::from_vec)
    }

    /// The delay term of a single-delay system.
    pub fn single_delay(&self) -> Result<&DelayTerm, SystemError> {
        match self.delays.as_slice() {
            [term] => Ok(term),
            other => Err(SystemError::Unsupported(format!(
                "this analysis needs exactly one delay term, the system has {}",
                other.len()
            ))),
        }
    }

    /// Verifies `0 ≤ q_k(t) ≤ τ` at every grid point.
    pub fn check_delays(&self, grid: &ScanGrid) -> Result<(), SystemError> {
        for i in 0..grid.n_points {
            let t = grid.at(i);
            for k in 0..self.delays.len() {
                let value = self.q_at(k, t)?;
                if !(value >= -SIGN_SLACK && value <= self.tau + SIGN_SLACK) {
                    return Err(SystemError::DelayRange { k: k + 1, t, value, tau: self.tau });
                }
            }
        }
        Ok(())
    }

    /// `φ` on `n` uniform points of `[−τ, 0]`, returned as `(s, φ(s))`.
    pub fn sample_phi(&self, n: usize) -> Result<Vec<(f64, DVector<f64>)>, ExprError> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let s = if i + 1 == n { 0.0 } else { -self.tau + self.tau * i as f64 / (n - 1) as f64 };
                Ok((s, self.phi_at(s)?))
            })
            .collect()
    }
}
