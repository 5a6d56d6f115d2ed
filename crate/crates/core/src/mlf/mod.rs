//! Two-parameter Mittag-Leffler function on the real line.
//!
//! `E_{α,β}(x) = Σ_k x^k / Γ(αk + β)` for `0 < α ≤ 1`, `β > 0`.
//!
//! Evaluation picks one of four routes:
//!
//! * `α = 1, β = 1`: the exponential.
//! * Taylor series, when no partial term exceeds [`SERIES_TERM_LIMIT`]
//!   (negative arguments) or `x^{1/α} ≤ 40` (positive arguments).
//! * Asymptotic expansions for large `|x|`: the algebraic series
//!   `Σ_{k≥1} (-1)^{k+1} y^{-k} / Γ(β - αk)` at `x = -y`, and the exponential
//!   leading term plus the same algebraic tail for large positive `x`.
//! * The Laplace-type integral representation on the negative axis for
//!   `β ∈ {1, α}` when neither series is accurate:
//!
//!   ```text
//!   E_α(-y)     = sin(απ)/(απ) ∫_0^∞ y e^{-w^{1/α}} / (w² + 2wy cos απ + y²) dw
//!   E_{α,α}(-y) = sin(απ)/(απ) ∫_0^∞ w^{1/α} e^{-w^{1/α}} / (w² + 2wy cos απ + y²) dw
//!   ```
//!
//!   The integrand is positive and the exponential confines it to
//!   `w ≤ 745^α`, so a finite adaptive Gauss–Kronrod rule suffices.

pub mod gamma;
mod quad;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use gamma::{ln_gamma_abs, rgamma};

/// Largest partial-sum term tolerated on the negative axis before the series
/// is abandoned for cancellation.
pub const SERIES_TERM_LIMIT: f64 = 8.0;
/// Hard cap on the number of series terms.
pub const SERIES_MAX_TERMS: usize = 10_000;
const SERIES_REL_TOL: f64 = 1e-16;
const POSITIVE_SERIES_LIMIT: f64 = 40.0;
const NEGATIVE_SERIES_MAX_Y: f64 = 30.0;
const ASYMPTOTIC_REL_TOL: f64 = 1e-15;
const INTEGRAL_REL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlError {
    #[error("fractional order α = {0} is outside (0, 1]")]
    Order(f64),
    #[error("β = {0} must be positive")]
    Beta(f64),
    #[error("argument {0} is not finite")]
    Argument(f64),
    #[error("E_{{{alpha},{beta}}}({x}) overflows f64")]
    Overflow { alpha: f64, beta: f64, x: f64 },
    #[error("series for E_{{{alpha},{beta}}}({x}) did not converge within {SERIES_MAX_TERMS} terms")]
    SeriesCap { alpha: f64, beta: f64, x: f64 },
    #[error("no accurate evaluation route for E_{{{alpha},{beta}}}({x})")]
    Unsupported { alpha: f64, beta: f64, x: f64 },
}

/// Fractional order `α ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self, MlError> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
            Ok(Self(alpha))
        } else {
            Err(MlError::Order(alpha))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `E_α(x)`.
    pub fn ml(self, x: f64) -> Result<f64, MlError> {
        mittag_leffler(MlQuery { alpha: self.0, beta: 1.0, x })
    }

    /// `E_{α,α}(x)`.
    pub fn ml_alpha(self, x: f64) -> Result<f64, MlError> {
        mittag_leffler(MlQuery { alpha: self.0, beta: self.0, x })
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = MlError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(value: FractionalOrder) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlQuery {
    pub alpha: f64,
    pub beta: f64,
    pub x: f64,
}

impl MlQuery {
    pub fn new(alpha: f64, beta: f64, x: f64) -> Self {
        Self { alpha, beta, x }
    }

    fn validate(&self) -> Result<(), MlError> {
        FractionalOrder::new(self.alpha)?;
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(MlError::Beta(self.beta));
        }
        if !self.x.is_finite() {
            return Err(MlError::Argument(self.x));
        }
        Ok(())
    }

    fn overflow(&self) -> MlError {
        MlError::Overflow { alpha: self.alpha, beta: self.beta, x: self.x }
    }

    fn unsupported(&self) -> MlError {
        MlError::Unsupported { alpha: self.alpha, beta: self.beta, x: self.x }
    }
}

/// Evaluates `E_{α,β}(x)`.
pub fn mittag_leffler(q: MlQuery) -> Result<f64, MlError> {
    q.validate()?;
    let MlQuery { alpha, beta, x } = q;
    if x == 0.0 {
        return Ok(rgamma(beta));
    }
    if alpha == 1.0 && beta == 1.0 {
        let v = x.exp();
        return if v.is_finite() { Ok(v) } else { Err(q.overflow()) };
    }
    if x > 0.0 {
        positive_axis(q)
    } else {
        negative_axis(q)
    }
}

/// Derivative of `E_α` at `x`, i.e. `E_{α,α}(x) / α`.
pub fn mittag_leffler_deriv(alpha: f64, x: f64) -> Result<f64, MlError> {
    let order = FractionalOrder::new(alpha)?;
    Ok(order.ml_alpha(x)? / alpha)
}

enum Series {
    Converged(f64),
    Cancelling,
    Cap,
}

fn series(alpha: f64, beta: f64, x: f64, term_limit: f64) -> Series {
    let ln_abs_x = x.abs().ln();
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for k in 0..SERIES_MAX_TERMS {
        let kf = k as f64;
        let arg = alpha * kf + beta;
        let term = if kf * ln_abs_x.abs() < 700.0 && arg < 170.0 {
            x.powi(k as i32) * rgamma(arg)
        } else {
            let sign = if x < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
            sign * (kf * ln_abs_x - ln_gamma_abs(arg)).exp()
        };
        if term.abs() > term_limit {
            return Series::Cancelling;
        }
        sum += term;
        if !sum.is_finite() {
            return Series::Converged(sum);
        }
        if term.abs() <= prev && term.abs() < SERIES_REL_TOL * (sum.abs() + 1.0) {
            return Series::Converged(sum);
        }
        prev = term.abs();
    }
    Series::Cap
}

/// `Σ_{k≥1} -x^{-k} / Γ(β - αk)`, summed while the terms shrink.
/// Returns the sum and the magnitude of the last term used.
fn algebraic_tail(alpha: f64, beta: f64, x: f64) -> (f64, f64) {
    let ln_abs_x = x.abs().ln();
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for k in 1..400 {
        let kf = k as f64;
        let arg = beta - alpha * kf;
        // |1/Γ(β-αk)| ≤ Γ(1-β+αk)/π gives a smooth bound on the term size;
        // the terms themselves dip near the poles and are useless for stopping
        let bound = (-kf * ln_abs_x + gamma::ln_gamma_abs(1.0 - arg) - PI.ln()).exp();
        if bound > last {
            break;
        }
        last = bound;
        let r = rgamma(arg);
        if r != 0.0 {
            let mag = (-kf * ln_abs_x + r.abs().ln()).exp();
            let sign_x = if x < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
            sum -= sign_x * r.signum() * mag;
        }
        if bound <= 1e-17 * sum.abs() {
            break;
        }
    }
    (sum, last)
}

fn positive_axis(q: MlQuery) -> Result<f64, MlError> {
    let MlQuery { alpha, beta, x } = q;
    let scaled = x.powf(1.0 / alpha);
    if scaled <= POSITIVE_SERIES_LIMIT {
        return match series(alpha, beta, x, f64::INFINITY) {
            Series::Converged(v) if v.is_finite() => Ok(v),
            Series::Converged(_) => Err(q.overflow()),
            _ => Err(MlError::SeriesCap { alpha, beta, x }),
        };
    }
    // E_{α,β}(x) ~ x^{(1-β)/α} e^{x^{1/α}} / α + algebraic tail
    let ln_main = (1.0 - beta) / alpha * x.ln() + scaled - alpha.ln();
    if ln_main > 709.0 {
        return Err(q.overflow());
    }
    let (tail, _) = algebraic_tail(alpha, beta, x);
    Ok(ln_main.exp() + tail)
}

fn negative_axis(q: MlQuery) -> Result<f64, MlError> {
    let MlQuery { alpha, beta, x } = q;
    let y = -x;
    if y <= NEGATIVE_SERIES_MAX_Y {
        match series(alpha, beta, x, SERIES_TERM_LIMIT) {
            Series::Converged(v) => return Ok(v),
            Series::Cap => return Err(MlError::SeriesCap { alpha, beta, x }),
            Series::Cancelling => {}
        }
    }
    if alpha < 1.0 {
        let (sum, last) = algebraic_tail(alpha, beta, x);
        if sum != 0.0 && last <= ASYMPTOTIC_REL_TOL * sum.abs() {
            return Ok(sum);
        }
    }
    if alpha < 1.0 && beta == 1.0 {
        return Ok(laplace_e_alpha(alpha, y));
    }
    if alpha < 1.0 && beta == alpha {
        return Ok(laplace_e_alpha_alpha(alpha, y));
    }
    Err(q.unsupported())
}

/// Integrates `numer(w) e^{-w^{1/α}} / (w² + 2wy cos απ + y²)` over the
/// support where the exponential is representable, splitting at `w = y`
/// where the kernel peaks as `α → 1`.
fn laplace_integral<F: Fn(f64) -> f64>(alpha: f64, y: f64, numer: F) -> f64 {
    let c = (alpha * PI).cos();
    let inv = 1.0 / alpha;
    let upper = 745f64.powf(alpha);
    let f = |w: f64| numer(w) * (-w.powf(inv)).exp() / (w * w + 2.0 * w * c * y + y * y);
    let mut cuts = vec![0.0, upper.min(1.0)];
    if y < upper && y > 1.0 {
        cuts.push(y);
    }
    cuts.push(upper);
    cuts.dedup();
    cuts.windows(2).map(|ab| quad::integrate(f, ab[0], ab[1], INTEGRAL_REL_TOL, 0.0)).sum()
}

fn laplace_e_alpha(alpha: f64, y: f64) -> f64 {
    let total = laplace_integral(alpha, y, |_| y);
    gamma::sin_pi(alpha) / (alpha * PI) * total
}

fn laplace_e_alpha_alpha(alpha: f64, y: f64) -> f64 {
    let inv = 1.0 / alpha;
    let total = laplace_integral(alpha, y, |w| w.powf(inv));
    gamma::sin_pi(alpha) / (alpha * PI) * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn e(alpha: f64, beta: f64, x: f64) -> f64 {
        mittag_leffler(MlQuery::new(alpha, beta, x)).unwrap()
    }

    #[test]
    fn trivial_values() {
        assert_eq!(e(0.65, 1.0, 0.0), 1.0);
        assert_relative_eq!(e(1.0, 1.0, 1.0), std::f64::consts::E, max_relative = 1e-15);
        assert_eq!(mittag_leffler_deriv(1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(mittag_leffler_deriv(0.5, 0.0).unwrap(), 2.0 / PI.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn domain_errors() {
        assert_eq!(mittag_leffler(MlQuery::new(1.5, 1.0, 0.0)), Err(MlError::Order(1.5)));
        assert_eq!(mittag_leffler(MlQuery::new(0.0, 1.0, 0.0)), Err(MlError::Order(0.0)));
        assert_eq!(mittag_leffler(MlQuery::new(0.5, 0.0, 1.0)), Err(MlError::Beta(0.0)));
        assert!(matches!(mittag_leffler(MlQuery::new(0.5, 1.0, f64::NAN)), Err(MlError::Argument(_))));
        assert!(matches!(mittag_leffler(MlQuery::new(0.1, 1.0, 5.0)), Err(MlError::Overflow { .. })));
        assert!(matches!(mittag_leffler(MlQuery::new(1.0, 1.0, 800.0)), Err(MlError::Overflow { .. })));
    }

    #[test]
    fn half_order_closed_form() {
        // E_{1/2}(-y) = exp(y²) erfc(y); reference values from erfcx.
        let cases = [(0.5, 0.615_690_344_192_926), (2.0, 0.255_395_676_310_506), (10.0, 0.056_140_992_743_822_6)];
        for (y, want) in cases {
            assert_relative_eq!(e(0.5, 1.0, -y), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn routes_agree_at_the_seams() {
        // integral representation vs. series (small y) and asymptotics (large y)
        for &alpha in &[0.2, 0.45, 0.65, 0.8, 0.95] {
            for &y in &[0.3, 0.9] {
                let s = match series(alpha, 1.0, -y, SERIES_TERM_LIMIT) {
                    Series::Converged(v) => v,
                    _ => panic!("series failed"),
                };
                assert_relative_eq!(s, laplace_e_alpha(alpha, y), max_relative = 1e-12);
                let s = match series(alpha, alpha, -y, SERIES_TERM_LIMIT) {
                    Series::Converged(v) => v,
                    _ => panic!("series failed"),
                };
                assert_relative_eq!(s, laplace_e_alpha_alpha(alpha, y), max_relative = 1e-12);
            }
            let y = 400.0;
            let (a, _) = algebraic_tail(alpha, 1.0, -y);
            assert_relative_eq!(a, laplace_e_alpha(alpha, y), max_relative = 1e-11);
            let (a, _) = algebraic_tail(alpha, alpha, -y);
            assert_relative_eq!(a, laplace_e_alpha_alpha(alpha, y), max_relative = 1e-10);
        }
    }

    #[test]
    fn exponential_reduction() {
        let mut x = -20.0;
        while x <= 5.0 {
            assert!((e(1.0, 1.0, x) - x.exp()).abs() <= 1e-10);
            x += 0.25;
        }
    }

    #[test]
    fn order_newtype_rejects_out_of_range() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(1.0000001).is_err());
        assert!(FractionalOrder::new(f64::NAN).is_err());
        assert_eq!(FractionalOrder::new(1.0).unwrap().get(), 1.0);
    }
}
