//! Fractional Adams–Bashforth–Moulton integration of Caputo delay systems,
//! plus the trajectory-level checks used to validate certificates.
//!
//! The scheme works on the Volterra form
//! `x(t) = φ(0) + Γ(α)⁻¹ ∫₀ᵗ (t−u)^{α−1} f(u) du` with product-rectangle
//! predictor weights and product-trapezoid corrector weights.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::expr::ExprError;
use crate::mlf::gamma::gamma;
use crate::system::DelaySystem;

pub const MAX_NODES: f64 = 1e7;
pub const DEFAULT_ENVELOPE_TOL: f64 = 0.02;

#[derive(Debug, Error)]
pub enum FddeError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("step {h} is too large for the delay at t={t}: the delayed argument {arg} is past the last computed node")]
    StepSize { h: f64, t: f64, arg: f64 },
    #[error("node index {index} is outside 1..={last}")]
    Index { index: usize, last: usize },
    #[error("solution is no longer finite at t={0}")]
    Blowup(f64),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub t_end: f64,
    pub h: f64,
    /// Corrector sweeps per step; one gives the classical PECE scheme.
    pub corrector_iters: usize,
    /// Fail instead of flagging when a delayed argument falls inside the
    /// step being computed.
    pub strict_history: bool,
}

impl SolverConfig {
    pub fn new(t_end: f64, h: f64) -> Result<Self, FddeError> {
        let cfg = Self { t_end, h, corrector_iters: 1, strict_history: false };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FddeError> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(FddeError::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.h > 0.0 && self.h < self.t_end) {
            return Err(FddeError::Config(format!("h must lie in (0, t_end), got {}", self.h)));
        }
        if self.t_end / self.h > MAX_NODES {
            return Err(FddeError::Config(format!(
                "t_end/h = {:.3e} exceeds the {MAX_NODES:e} node limit",
                self.t_end / self.h
            )));
        }
        if self.corrector_iters == 0 {
            return Err(FddeError::Config("corrector_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.h - 1e-9).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub h: f64,
    pub t: Vec<f64>,
    /// Row-major `(node, component)`.
    pub states: Vec<f64>,
    /// Right-hand side `f(t_n, x_n, x(t_n − q(t_n)))` at each node.
    pub rhs: Vec<f64>,
    pub norms_l1: Vec<f64>,
    pub norms_l2: Vec<f64>,
    /// Nodes whose delayed argument fell inside the current step and was
    /// read from the iterate being corrected.
    pub flagged: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n * self.dim..(n + 1) * self.dim]
    }

    pub fn rhs_at(&self, n: usize) -> &[f64] {
        &self.rhs[n * self.dim..(n + 1) * self.dim]
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|n| self.states[n * self.dim + i]).collect()
    }
}

/// `(k+1)^α − k^α` without cancellation.
fn rect_weight(alpha: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let kf = k as f64;
    kf.powf(alpha) * (alpha * (1.0 / kf).ln_1p()).exp_m1()
}

/// `(k+2)^β − 2(k+1)^β + k^β` with `β = α+1`.
fn trap_weight(alpha: f64, k: usize) -> f64 {
    let beta = alpha + 1.0;
    if k == 0 {
        return 2f64.powf(beta) - 2.0;
    }
    let kf = k as f64;
    let u = (beta * (2.0 / kf).ln_1p()).exp_m1();
    let v = (beta * (1.0 / kf).ln_1p()).exp_m1();
    kf.powf(beta) * (u - 2.0 * v)
}

struct Coefficients {
    a: nalgebra::DMatrix<f64>,
    b: Vec<nalgebra::DMatrix<f64>>,
    q: Vec<f64>,
    c: nalgebra::DVector<f64>,
}

impl Coefficients {
    fn at(sys: &DelaySystem, t: f64) -> Result<Self, ExprError> {
        Ok(Self {
            a: sys.a_at(t)?,
            b: (0..sys.delays.len()).map(|k| sys.b_at(k, t)).collect::<Result<_, _>>()?,
            q: (0..sys.delays.len()).map(|k| sys.q_at(k, t)).collect::<Result<_, _>>()?,
            c: sys.forcing_at(t)?,
        })
    }
}

struct History<'a> {
    sys: &'a DelaySystem,
    h: f64,
    dim: usize,
    states: &'a [f64],
}

impl History<'_> {
    /// State at `s`, given that nodes `0..=last` are final and `current`
    /// is the iterate at node `last + 1`. Returns whether `current` was used.
    fn lookup(&self, s: f64, last: usize, current: &[f64], out: &mut [f64]) -> Result<bool, ExprError> {
        if s <= 0.0 {
            for (o, e) in out.iter_mut().zip(&self.sys.phi) {
                *o = e.eval(s)?;
            }
            return Ok(false);
        }
        let pos = s / self.h;
        let lo = (pos.floor() as usize).min(last + 1);
        let w = pos - lo as f64;
        let d = self.dim;
        let node = |n: usize| -> &[f64] {
            if n <= last {
                &self.states[n * d..(n + 1) * d]
            } else {
                current
            }
        };
        if lo > last {
            out.copy_from_slice(current);
            return Ok(true);
        }
        let left = node(lo);
        if w == 0.0 {
            out.copy_from_slice(left);
            return Ok(false);
        }
        let right = node(lo + 1);
        for i in 0..d {
            out[i] = left[i] + w * (right[i] - left[i]);
        }
        Ok(lo + 1 > last)
    }
}

/// Integrates the system on `[0, t_end]` with uniform step `h`.
pub fn solve(sys: &DelaySystem, cfg: &SolverConfig) -> Result<Trajectory, FddeError> {
    cfg.validate()?;
    let d = sys.dim;
    let al = sys.alpha.get();
    let h = cfg.h;
    let n_steps = cfg.n_steps();
    let nodes = n_steps + 1;

    let bw: Vec<f64> = (0..nodes).map(|k| rect_weight(al, k)).collect();
    let aw: Vec<f64> = (0..nodes).map(|k| trap_weight(al, k)).collect();
    let c_pred = h.powf(al) / gamma(al + 1.0);
    let c_corr = h.powf(al) / gamma(al + 2.0);

    let x0: Vec<f64> = sys.phi_at(0.0)?.iter().copied().collect();
    let mut t = Vec::with_capacity(nodes);
    let mut states = Vec::with_capacity(nodes * d);
    let mut rhs = Vec::with_capacity(nodes * d);
    let mut flagged = Vec::new();
    t.push(0.0);
    states.extend_from_slice(&x0);

    let mut delayed = vec![0.0; d];
    let mut f_buf = vec![0.0; d];
    // f at node `last + 1` for iterate `x`
    let eval_rhs = |coef: &Coefficients,
                    tn: f64,
                    last: usize,
                    states: &[f64],
                    x: &[f64],
                    delayed: &mut [f64],
                    f: &mut [f64]|
     -> Result<bool, FddeError> {
        let hist = History { sys, h, dim: d, states };
        let mut used_current = false;
        for (i, fi) in f.iter_mut().enumerate() {
            *fi = coef.c[i] + (0..d).map(|j| coef.a[(i, j)] * x[j]).sum::<f64>();
        }
        for (k, b) in coef.b.iter().enumerate() {
            let arg = tn - coef.q[k];
            if cfg.strict_history && arg > 0.0 && arg > last as f64 * h && tn > 0.0 {
                return Err(FddeError::StepSize { h, t: tn, arg });
            }
            used_current |= hist.lookup(arg, last, x, delayed)?;
            for i in 0..d {
                f[i] += (0..d).map(|j| b[(i, j)] * delayed[j]).sum::<f64>();
            }
        }
        Ok(used_current)
    };

    let coef0 = Coefficients::at(sys, 0.0)?;
    // node 0: every delayed argument is ≤ 0, so `current` is never read
    eval_rhs(&coef0, 0.0, 0, &states, &x0, &mut delayed, &mut f_buf)?;
    rhs.extend_from_slice(&f_buf);

    let mut hist_p = vec![0.0; d];
    let mut hist_c = vec![0.0; d];
    let mut cur = vec![0.0; d];
    for n in 0..n_steps {
        let tn1 = (n + 1) as f64 * h;
        let coef = Coefficients::at(sys, tn1)?;

        let nf = n as f64;
        let a0 = nf.powf(al + 1.0) - (nf - al) * (nf + 1.0).powf(al);
        hist_p.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            hist_c[i] = a0 * rhs[i];
        }
        for j in 0..=n {
            let fj = &rhs[j * d..(j + 1) * d];
            let (wb, wa) = (bw[n - j], if j > 0 { aw[n - j] } else { 0.0 });
            for i in 0..d {
                hist_p[i] += wb * fj[i];
                hist_c[i] += wa * fj[i];
            }
        }
        for i in 0..d {
            cur[i] = x0[i] + c_pred * hist_p[i];
        }
        let mut flag = false;
        for _ in 0..cfg.corrector_iters {
            flag |= eval_rhs(&coef, tn1, n, &states, &cur, &mut delayed, &mut f_buf)?;
            for i in 0..d {
                cur[i] = x0[i] + c_corr * (hist_c[i] + f_buf[i]);
            }
        }
        flag |= eval_rhs(&coef, tn1, n, &states, &cur, &mut delayed, &mut f_buf)?;
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(FddeError::Blowup(tn1));
        }
        if flag {
            flagged.push(n + 1);
        }
        t.push(tn1);
        states.extend_from_slice(&cur);
        rhs.extend_from_slice(&f_buf);
    }

    let norms_l1 = states.chunks(d).map(|x| x.iter().map(|v| v.abs()).sum()).collect();
    let norms_l2 = states.chunks(d).map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    Ok(Trajectory { dim: d, h, t, states, rhs, norms_l1, norms_l2, flagged })
}

/// L1 approximation of the Caputo derivative of uniformly sampled `x` at node `n`.
pub fn caputo_l1(x: &[f64], alpha: f64, h: f64, n: usize) -> Result<f64, FddeError> {
    if n == 0 || n >= x.len() {
        return Err(FddeError::Index { index: n, last: x.len().saturating_sub(1) });
    }
    let e = 1.0 - alpha;
    let mut acc = 0.0;
    for j in 0..n {
        let w = if j == 0 { 1.0 } else { ((j + 1) as f64).powf(e) - (j as f64).powf(e) };
        acc += w * (x[n - j] - x[n - j - 1]);
    }
    Ok(acc / (h.powf(alpha) * gamma(2.0 - alpha)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub norm: NormKind,
    pub max_ratio: f64,
    pub worst_t: f64,
    pub first_violation_t: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip)]
    pub envelope: Vec<f64>,
    #[serde(skip)]
    pub ratio: Vec<f64>,
}

/// Compares the trajectory norm with `envelope(t)` node by node.
pub fn check_envelope<F: Fn(f64) -> f64>(
    traj: &Trajectory,
    norm: NormKind,
    envelope: F,
    tolerance: f64,
) -> EnvelopeCheck {
    let norms = match norm {
        NormKind::L1 => &traj.norms_l1,
        NormKind::L2 => &traj.norms_l2,
    };
    let mut env = Vec::with_capacity(traj.len());
    let mut ratio = Vec::with_capacity(traj.len());
    let mut max_ratio = 0.0f64;
    let mut worst_t = 0.0;
    let mut first_violation_t = None;
    for (&t, &x) in traj.t.iter().zip(norms) {
        let e = envelope(t);
        let r = if x == 0.0 {
            0.0
        } else if e > 0.0 {
            x / e
        } else {
            f64::INFINITY
        };
        if r > max_ratio {
            max_ratio = r;
            worst_t = t;
        }
        if r > 1.0 + tolerance && first_violation_t.is_none() {
            first_violation_t = Some(t);
        }
        env.push(e);
        ratio.push(r);
    }
    EnvelopeCheck {
        norm,
        max_ratio,
        worst_t,
        first_violation_t,
        tolerance,
        passed: first_violation_t.is_none(),
        envelope: env,
        ratio,
    }
}

/// Largest value of `D^α(xᵀx) − 2xᵀ f` over the nodes, with the Caputo
/// derivative from the L1 scheme and `f` the stored right-hand side.
pub fn lyapunov_check(traj: &Trajectory, alpha: f64) -> f64 {
    let w: Vec<f64> = (0..traj.len()).map(|n| traj.state(n).iter().map(|v| v * v).sum()).collect();
    (1..traj.len())
        .map(|n| {
            let dw = caputo_l1(&w, alpha, traj.h, n).expect("node index is in range");
            let xf: f64 = traj.state(n).iter().zip(traj.rhs_at(n)).map(|(x, f)| x * f).sum();
            dw - 2.0 * xf
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Writes `t,x1..xd,norm_l1,norm_l2,envelope,ratio` with 17 significant digits.
/// Without a check the last two columns are `nan`.
pub fn write_csv<W: Write>(mut w: W, traj: &Trajectory, check: Option<&EnvelopeCheck>) -> Result<(), FddeError> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.dim).map(|i| format!("x{i}")));
    header.extend(["norm_l1", "norm_l2", "envelope", "ratio"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for n in 0..traj.len() {
        let (env, ratio) = check.map_or((f64::NAN, f64::NAN), |c| (c.envelope[n], c.ratio[n]));
        let row: Vec<String> = std::iter::once(traj.t[n])
            .chain(traj.state(n).iter().copied())
            .chain([traj.norms_l1[n], traj.norms_l2[n], env, ratio])
            .map(|v| format!("{v:.16e}"))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
