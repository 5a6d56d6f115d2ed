//! Decay certificates from the generalized fractional Halanay inequality.
//!
//! For nonnegative coefficients with `a(t) > Σ b_k(t)` the scalar function
//!
//! ```text
//! h_t(λ) = λ − a(t) + Σ_k b_k(t) / E_α(−λ q_k(t)^α)
//! ```
//!
//! is strictly increasing with `h_t(0) < 0 ≤ h_t(a(t))`, so it has a unique
//! root `λ(t) ∈ (0, a(t)]`. The certified rate is the infimum of `λ(t)`,
//! approximated by the minimum over a uniform scan grid, and any function
//! obeying the inequality satisfies `w(t) ≤ w₀ + M E_α(−λ* t^α)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{ExprError, TimeExpr};
use crate::mlf::{FractionalOrder, MlError};

/// Coefficients and delays may dip this far below zero from rounding.
pub const SIGN_SLACK: f64 = 1e-12;
/// Growth allowed between the two halves of the grid for `a` to count as bounded.
pub const BOUNDED_SPREAD: f64 = 0.01;

const BRACKET_WIDTH: f64 = 1e-14;
const NEWTON_STEPS: usize = 3;

#[derive(Debug, Error)]
pub enum HalanayError {
    #[error("scan grid needs t_max > 0 and at least 2 points (got t_max={t_max}, n_points={n_points})")]
    Grid { t_max: f64, n_points: usize },
    #[error("{len_b} delayed coefficients but {len_q} delays")]
    Arity { len_b: usize, len_q: usize },
    #[error("{name}({t}) = {value} is outside its admissible range")]
    Range { name: String, t: f64, value: f64 },
    #[error("no positive decay rate at t={t}: a={a} does not exceed Σb={b_sum}")]
    Infeasible { t: f64, a: f64, b_sum: f64 },
    #[error("neither the bounded-gap nor the ratio condition holds on the grid")]
    NoCondition,
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Ml(#[from] MlError),
}

/// Uniform samples of `[0, t_max]` standing in for `t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub t_max: f64,
    pub n_points: usize,
}

impl ScanGrid {
    pub fn new(t_max: f64, n_points: usize) -> Result<Self, HalanayError> {
        if !(t_max > 0.0 && t_max.is_finite()) || n_points < 2 {
            return Err(HalanayError::Grid { t_max, n_points });
        }
        Ok(Self { t_max, n_points })
    }

    pub fn at(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            return self.t_max;
        }
        self.t_max * i as f64 / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.at(i)).collect()
    }
}

/// Coefficient functions of the inequality
/// `D^α w ≤ −a(t) w(t) + Σ_k b_k(t) sup_{[t−q_k(t), t]} w + c(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalanayInput {
    pub alpha: FractionalOrder,
    pub a: TimeExpr,
    pub b: Vec<TimeExpr>,
    pub q: Vec<TimeExpr>,
    pub c: TimeExpr,
    pub tau: f64,
    pub scan: ScanGrid,
    /// Treat `a` as bounded without consulting the grid heuristic.
    pub assume_bounded: bool,
}

/// The same data sampled on a grid; positivity and LMI analyses build these
/// directly from matrix reductions.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledInput {
    pub alpha: FractionalOrder,
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    /// `b[i][k]` is `b_k(t_i)`.
    pub b: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub assume_bounded: bool,
}

impl HalanayInput {
    pub fn sample(&self) -> Result<SampledInput, HalanayError> {
        if self.b.len() != self.q.len() || self.b.is_empty() {
            return Err(HalanayError::Arity { len_b: self.b.len(), len_q: self.q.len() });
        }
        let t = self.scan.points();
        let mut out = SampledInput {
            alpha: self.alpha,
            a: Vec::with_capacity(t.len()),
            b: Vec::with_capacity(t.len()),
            q: Vec::with_capacity(t.len()),
            c: Vec::with_capacity(t.len()),
            assume_bounded: self.assume_bounded,
            t: Vec::new(),
        };
        for &ti in &t {
            out.a.push(checked("a", &self.a, ti, f64::INFINITY)?);
            out.c.push(checked("c", &self.c, ti, f64::INFINITY)?);
            let mut bs = Vec::with_capacity(self.b.len());
            let mut qs = Vec::with_capacity(self.q.len());
            for (k, (b, q)) in self.b.iter().zip(&self.q).enumerate() {
                bs.push(checked(&format!("b{}", k + 1), b, ti, f64::INFINITY)?);
                qs.push(checked(&format!("q{}", k + 1), q, ti, self.tau)?);
            }
            out.b.push(bs);
            out.q.push(qs);
        }
        out.t = t;
        Ok(out)
    }
}

/// Evaluates `e` at `t` and clamps rounding-level negatives to zero.
fn checked(name: &str, e: &TimeExpr, t: f64, upper: f64) -> Result<f64, HalanayError> {
    let v = e.eval(t)?;
    if v < -SIGN_SLACK || v > upper + SIGN_SLACK {
        return Err(HalanayError::Range { name: name.to_string(), t, value: v });
    }
    Ok(v.clamp(0.0, upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CaseTag {
    /// `a − Σb_k ≥ σ > 0` with `a` bounded.
    BoundedGap,
    /// `a ≥ a₀ > 0` and `Σb_k / a ≤ p < 1`.
    Ratio,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub case_tag: CaseTag,
    /// Grid minimum of `a − Σb_k`.
    pub sigma: f64,
    /// Grid minimum of `a`.
    pub a0: f64,
    /// Grid maximum of `Σb_k / a`; infinite when `a` vanishes somewhere.
    pub p: f64,
    pub c_star: f64,
    pub a_bounded: bool,
    /// `c*/σ`, present when the gap is positive.
    pub w0_bounded_gap: Option<f64>,
    /// `c*/((1−p)a₀)`, present when the ratio condition holds.
    pub w0_ratio: Option<f64>,
}

impl ConditionVerdict {
    pub fn w0(&self) -> Option<f64> {
        match self.case_tag {
            CaseTag::BoundedGap => self.w0_bounded_gap,
            CaseTag::Ratio => self.w0_ratio,
            CaseTag::None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalanayCertificate {
    pub lambda_star: f64,
    pub w0: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub residual_max: f64,
    pub grid_argmin: f64,
    pub t_max: f64,
    pub n_points: usize,
    pub verdict: ConditionVerdict,
}

/// `h(λ) = λ − a + Σ_k b_k / E_α(−λ q_k^α)`.
pub fn residual(alpha: FractionalOrder, lambda: f64, a: f64, b: &[f64], q: &[f64]) -> Result<f64, HalanayError> {
    let al = alpha.get();
    let mut h = lambda - a;
    for (&bk, &qk) in b.iter().zip(q) {
        if bk == 0.0 {
            continue;
        }
        h += bk / alpha.ml(-lambda * qk.powf(al))?;
    }
    Ok(h)
}

fn residual_slope(alpha: FractionalOrder, lambda: f64, b: &[f64], q: &[f64]) -> Result<f64, HalanayError> {
    let al = alpha.get();
    let mut d = 1.0;
    for (&bk, &qk) in b.iter().zip(q) {
        if bk == 0.0 || qk == 0.0 {
            continue;
        }
        let qa = qk.powf(al);
        let e = alpha.ml(-lambda * qa)?;
        d += bk * qa * alpha.ml_alpha(-lambda * qa)? / (al * e * e);
    }
    Ok(d)
}

/// The unique positive root of `h`, by bisection on `[0, a]` followed by a
/// short Newton polish that never leaves the bracket.
pub fn lambda_at(alpha: FractionalOrder, a: f64, b: &[f64], q: &[f64]) -> Result<f64, HalanayError> {
    if b.len() != q.len() {
        return Err(HalanayError::Arity { len_b: b.len(), len_q: q.len() });
    }
    let bad = |name: &str, value: f64| HalanayError::Range { name: name.to_string(), t: f64::NAN, value };
    if !(a.is_finite() && a >= 0.0) {
        return Err(bad("a", a));
    }
    if let Some(&v) = b.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(bad("b", v));
    }
    if let Some(&v) = q.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(bad("q", v));
    }
    let b_sum: f64 = b.iter().sum();
    if a <= b_sum {
        return Err(HalanayError::Infeasible { t: f64::NAN, a, b_sum });
    }
    if b_sum == 0.0 {
        return Ok(a);
    }

    let (mut lo, mut hi) = (0.0, a);
    let mut h_lo = residual(alpha, lo, a, b, q)?;
    let mut h_hi = residual(alpha, hi, a, b, q)?;
    if h_hi == 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        if hi - lo <= BRACKET_WIDTH {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let h_mid = residual(alpha, mid, a, b, q)?;
        if h_mid < 0.0 {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
            h_hi = h_mid;
        }
    }

    // start from the secant point, which is already very close for a narrow bracket
    let mut lam = if h_hi > h_lo { lo - h_lo * (hi - lo) / (h_hi - h_lo) } else { 0.5 * (lo + hi) };
    let mut h = residual(alpha, lam, a, b, q)?;
    for _ in 0..NEWTON_STEPS {
        if h == 0.0 {
            break;
        }
        let next = lam - h / residual_slope(alpha, lam, b, q)?;
        if !(next >= lo && next <= hi) {
            break;
        }
        let h_next = residual(alpha, next, a, b, q)?;
        if h_next.abs() >= h.abs() {
            break;
        }
        lam = next;
        h = h_next;
    }
    Ok(lam)
}

/// Checks the two sufficient conditions on sampled data.
pub fn classify_sampled(input: &SampledInput) -> ConditionVerdict {
    let n = input.t.len();
    let mut sigma = f64::INFINITY;
    let mut a0 = f64::INFINITY;
    let mut p = 0.0f64;
    let mut c_star = 0.0f64;
    for i in 0..n {
        let a = input.a[i];
        let b_sum: f64 = input.b[i].iter().sum();
        sigma = sigma.min(a - b_sum);
        a0 = a0.min(a);
        p = p.max(if a > 0.0 { b_sum / a } else { f64::INFINITY });
        c_star = c_star.max(input.c[i]);
    }

    let half = n / 2;
    let max_of = |xs: &[f64]| xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = max_of(&input.a[..half.max(1)]);
    let second = max_of(&input.a[half..]);
    let a_bounded = input.assume_bounded || second <= first * (1.0 + BOUNDED_SPREAD);

    let gap_ok = sigma > 0.0;
    let ratio_ok = a0 > 0.0 && p < 1.0;
    let case_tag = if gap_ok && a_bounded {
        CaseTag::BoundedGap
    } else if ratio_ok {
        CaseTag::Ratio
    } else {
        CaseTag::None
    };
    ConditionVerdict {
        case_tag,
        sigma,
        a0,
        p,
        c_star,
        a_bounded,
        w0_bounded_gap: gap_ok.then(|| c_star / sigma),
        w0_ratio: ratio_ok.then(|| c_star / ((1.0 - p) * a0)),
    }
}

pub fn classify_conditions(input: &HalanayInput) -> Result<ConditionVerdict, HalanayError> {
    Ok(classify_sampled(&input.sample()?))
}

/// Scans `λ(t)` over the grid and assembles the certificate.
///
/// Grid points are solved in parallel; the minimum is taken sequentially in
/// grid order so the result is bit-reproducible.
pub fn certify_sampled(input: &SampledInput, m: f64) -> Result<HalanayCertificate, HalanayError> {
    let verdict = classify_sampled(input);
    let Some(w0) = verdict.w0() else {
        return Err(HalanayError::NoCondition);
    };
    let alpha = input.alpha;
    let solved: Vec<(f64, f64)> = (0..input.t.len())
        .into_par_iter()
        .map(|i| {
            let (a, b, q) = (input.a[i], &input.b[i], &input.q[i]);
            let lam = lambda_at(alpha, a, b, q).map_err(|e| match e {
                HalanayError::Infeasible { a, b_sum, .. } => HalanayError::Infeasible { t: input.t[i], a, b_sum },
                other => other,
            })?;
            Ok((lam, residual(alpha, lam, a, b, q)?.abs()))
        })
        .collect::<Result<_, HalanayError>>()?;

    let mut lambda_star = f64::INFINITY;
    let mut grid_argmin = 0.0;
    let mut residual_max = 0.0f64;
    for (i, &(lam, res)) in solved.iter().enumerate() {
        if lam < lambda_star {
            lambda_star = lam;
            grid_argmin = input.t[i];
        }
        residual_max = residual_max.max(res);
    }
    Ok(HalanayCertificate {
        lambda_star,
        w0,
        m,
        residual_max,
        grid_argmin,
        t_max: input.t.last().copied().unwrap_or(0.0),
        n_points: input.t.len(),
        verdict,
    })
}

pub fn certify(input: &HalanayInput, m: f64) -> Result<HalanayCertificate, HalanayError> {
    certify_sampled(&input.sample()?, m)
}

/// `w₀ + M E_α(−λ* t^α)`.
pub fn envelope(cert: &HalanayCertificate, alpha: FractionalOrder, t: f64) -> f64 {
    if cert.m == 0.0 {
        return cert.w0;
    }
    let e = alpha.ml(-cert.lambda_star * t.powf(alpha.get())).expect("E_α is defined on the whole nonpositive axis");
    cert.w0 + cert.m * e
}
