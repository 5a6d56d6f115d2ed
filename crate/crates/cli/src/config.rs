//! JSON run configuration: raw serde form, validation with field paths, and
//! the parsed form the pipelines consume.

use std::fmt;
use std::path::{Path, PathBuf};

use halanay_core::fdde::{SolverConfig, DEFAULT_ENVELOPE_TOL};
use halanay_core::{DelaySystem, DelayTerm, FractionalOrder, HalanayInput, ScanGrid, TimeExpr};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Positive,
    Lmi,
    HalanayScalar,
}

/// A single expression or a list, one per delay term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn items(&self) -> Vec<&str> {
        match self {
            Self::One(s) => vec![s.as_str()],
            Self::Many(v) => v.iter().map(String::as_str).collect(),
        }
    }

    fn from_vec(mut v: Vec<String>) -> Self {
        if v.len() == 1 {
            Self::One(v.remove(0))
        } else {
            Self::Many(v)
        }
    }
}

pub type RawMatrix = Vec<Vec<String>>;

/// One delayed coefficient matrix or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Matrices {
    One(RawMatrix),
    Many(Vec<RawMatrix>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHalanay {
    pub a: String,
    pub b: OneOrMany,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub t_max: f64,
    pub n_points: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self { t_max: 100.0, n_points: 2001 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub t_end: f64,
    pub h: f64,
    /// Relative slack of the envelope check.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_iters")]
    pub corrector_iters: usize,
    #[serde(default)]
    pub strict_history: bool,
}

fn default_tolerance() -> f64 {
    DEFAULT_ENVELOPE_TOL
}

fn default_iters() -> usize {
    1
}

impl SolverSpec {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            t_end: self.t_end,
            h: self.h,
            corrector_iters: self.corrector_iters,
            strict_history: self.strict_history,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_path: Option<PathBuf>,
}

/// The configuration file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub alpha: f64,
    pub dim: usize,
    pub tau: f64,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<RawMatrix>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Matrices>,
    pub q: OneOrMany,
    pub phi: Vec<String>,
    pub analysis: Analysis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halanay: Option<RawHalanay>,
    #[serde(default)]
    pub assume_bounded: bool,
    /// Envelope amplitude overriding the sampled sup-norm of `φ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub issues: Vec<Issue>,
}

impl ConfigError {
    fn single(path: &str, message: impl Into<String>) -> Self {
        Self { issues: vec![Issue { path: path.into(), message: message.into() }] }
    }

    pub fn mentions(&self, path: &str) -> bool {
        self.issues.iter().any(|i| i.path == path)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "invalid configuration ({} issue{})",
            self.issues.len(),
            if self.issues.len() == 1 { "" } else { "s" }
        )?;
        for i in &self.issues {
            write!(f, "\n  {}: {}", i.path, i.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisSpec {
    Positive,
    Lmi {
        gamma: TimeExpr,
        sigma: TimeExpr,
    },
    /// The scalar inequality; its system is `D^α x = −a x + Σ b_k x(t − q_k) + c`.
    HalanayScalar(HalanayInput),
}

impl AnalysisSpec {
    pub fn kind(&self) -> Analysis {
        match self {
            Self::Positive => Analysis::Positive,
            Self::Lmi { .. } => Analysis::Lmi,
            Self::HalanayScalar(_) => Analysis::HalanayScalar,
        }
    }
}

/// A validated configuration with every expression parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: DelaySystem,
    pub analysis: AnalysisSpec,
    pub scan: ScanGrid,
    pub assume_bounded: bool,
    pub amplitude: Option<f64>,
    pub solver: Option<SolverSpec>,
    pub output: OutputSpec,
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::single("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::single("<json>", e.to_string()))?;
    RunConfig::from_raw(&raw)
}

struct Collector {
    issues: Vec<Issue>,
}

impl Collector {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue { path: path.into(), message: message.into() });
    }

    fn expr(&mut self, path: &str, text: &str, var: &str) -> Option<TimeExpr> {
        match TimeExpr::parse(text, var) {
            Ok(e) => Some(e),
            Err(e) => {
                self.push(path, e.to_string());
                None
            }
        }
    }

    fn matrix(&mut self, path: &str, m: &RawMatrix, dim: usize) -> Option<Vec<Vec<TimeExpr>>> {
        if m.len() != dim {
            self.push(path, format!("expected {dim} rows, found {}", m.len()));
            return None;
        }
        let mut ok = true;
        let mut out = Vec::with_capacity(dim);
        for (i, row) in m.iter().enumerate() {
            if row.len() != dim {
                self.push(format!("{path}[{i}]"), format!("expected {dim} entries, found {}", row.len()));
                ok = false;
                continue;
            }
            let parsed: Vec<Option<TimeExpr>> =
                row.iter().enumerate().map(|(j, s)| self.expr(&format!("{path}[{i}][{j}]"), s, "t")).collect();
            ok &= parsed.iter().all(Option::is_some);
            out.push(parsed.into_iter().flatten().collect());
        }
        ok.then_some(out)
    }

    fn unused(&mut self, path: &str, present: bool, analysis: &str) {
        if present {
            self.push(path, format!("not used by analysis {analysis}"));
        }
    }
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let mut c = Collector { issues: Vec::new() };

        let alpha = FractionalOrder::new(raw.alpha).map_err(|e| c.push("alpha", e.to_string())).ok();
        if raw.dim == 0 {
            c.push("dim", "must be at least 1");
        }
        if !(raw.tau > 0.0 && raw.tau.is_finite()) {
            c.push("tau", format!("must be positive and finite, got {}", raw.tau));
        }
        let scan = ScanGrid::new(raw.scan.t_max, raw.scan.n_points).map_err(|e| c.push("scan", e.to_string())).ok();
        if let Some(s) = &raw.solver {
            if let Err(e) = s.solver_config().validate() {
                c.push("solver", e.to_string());
            }
            if !(s.tolerance >= 0.0 && s.tolerance.is_finite()) {
                c.push("solver.tolerance", format!("must be nonnegative, got {}", s.tolerance));
            }
        }
        if let Some(m) = raw.amplitude {
            if !(m > 0.0 && m.is_finite()) {
                c.push("amplitude", format!("must be positive, got {m}"));
            }
        }

        if raw.phi.len() != raw.dim {
            c.push("phi", format!("expected {} entries, found {}", raw.dim, raw.phi.len()));
        }
        let phi: Vec<Option<TimeExpr>> =
            raw.phi.iter().enumerate().map(|(i, s)| c.expr(&format!("phi[{i}]"), s, "s")).collect();
        let q_items = raw.q.items();
        let q: Vec<Option<TimeExpr>> = q_items
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let path = if q_items.len() == 1 { "q".to_string() } else { format!("q[{k}]") };
                c.expr(&path, s, "t")
            })
            .collect();

        let mut a_mat = None;
        let mut b_mats: Vec<Option<Vec<Vec<TimeExpr>>>> = Vec::new();
        let mut forcing = None;
        let mut analysis = None;
        match raw.analysis {
            Analysis::Positive | Analysis::Lmi => {
                let name = if raw.analysis == Analysis::Lmi { "lmi" } else { "positive" };
                match &raw.a {
                    None => c.push("A", "required"),
                    Some(m) => a_mat = c.matrix("A", m, raw.dim),
                }
                match &raw.b {
                    None => c.push("B", "required"),
                    Some(Matrices::One(m)) => b_mats.push(c.matrix("B", m, raw.dim)),
                    Some(Matrices::Many(ms)) => {
                        for (k, m) in ms.iter().enumerate() {
                            b_mats.push(c.matrix(&format!("B[{k}]"), m, raw.dim));
                        }
                    }
                }
                if raw.b.is_some() && b_mats.len() != q.len() {
                    c.push("q", format!("{} delays given for {} delayed matrices", q.len(), b_mats.len()));
                }
                c.unused("halanay", raw.halanay.is_some(), name);
                if raw.analysis == Analysis::Lmi {
                    let gamma = match &raw.gamma {
                        None => {
                            c.push("gamma", "required for analysis lmi");
                            None
                        }
                        Some(s) => c.expr("gamma", s, "t"),
                    };
                    let sigma = match &raw.sigma {
                        None => {
                            c.push("sigma", "required for analysis lmi");
                            None
                        }
                        Some(s) => c.expr("sigma", s, "t"),
                    };
                    if b_mats.len() > 1 {
                        c.push("B", "analysis lmi takes a single delayed matrix");
                    }
                    c.unused("assume_bounded", raw.assume_bounded, name);
                    if let (Some(gamma), Some(sigma)) = (gamma, sigma) {
                        analysis = Some(AnalysisSpec::Lmi { gamma, sigma });
                    }
                } else {
                    c.unused("gamma", raw.gamma.is_some(), name);
                    c.unused("sigma", raw.sigma.is_some(), name);
                    analysis = Some(AnalysisSpec::Positive);
                }
            }
            Analysis::HalanayScalar => {
                let name = "halanay-scalar";
                c.unused("A", raw.a.is_some(), name);
                c.unused("B", raw.b.is_some(), name);
                c.unused("gamma", raw.gamma.is_some(), name);
                c.unused("sigma", raw.sigma.is_some(), name);
                if raw.dim != 1 {
                    c.push("dim", "analysis halanay-scalar is one-dimensional");
                }
                match &raw.halanay {
                    None => c.push("halanay", "required for analysis halanay-scalar"),
                    Some(h) => {
                        let a = c.expr("halanay.a", &h.a, "t");
                        let b_items = h.b.items();
                        let b: Vec<Option<TimeExpr>> = b_items
                            .iter()
                            .enumerate()
                            .map(|(k, s)| {
                                let path = if b_items.len() == 1 {
                                    "halanay.b".to_string()
                                } else {
                                    format!("halanay.b[{k}]")
                                };
                                c.expr(&path, s, "t")
                            })
                            .collect();
                        if b.len() != q.len() {
                            c.push("q", format!("{} delays given for {} delayed coefficients", q.len(), b.len()));
                        }
                        let cf = h.c.as_deref().map(|s| c.expr("halanay.c", s, "t"));
                        if let (Some(a), Some(b), Some(qs), Some(cf), Some(alpha), Some(scan)) = (
                            a,
                            b.into_iter().collect::<Option<Vec<_>>>(),
                            q.iter().cloned().collect::<Option<Vec<_>>>(),
                            cf.unwrap_or_else(|| Some(TimeExpr::constant(0.0, "t"))),
                            alpha,
                            scan,
                        ) {
                            let neg = |e: &TimeExpr| TimeExpr::parse(&format!("-({})", e.source()), "t");
                            match neg(&a) {
                                Ok(na) => a_mat = Some(vec![vec![na]]),
                                Err(e) => c.push("halanay.a", e.to_string()),
                            }
                            b_mats = b.iter().map(|bk| Some(vec![vec![bk.clone()]])).collect();
                            if h.c.is_some() {
                                forcing = Some(vec![cf.clone()]);
                            }
                            analysis = Some(AnalysisSpec::HalanayScalar(HalanayInput {
                                alpha,
                                a,
                                b,
                                q: qs,
                                c: cf,
                                tau: raw.tau,
                                scan,
                                assume_bounded: raw.assume_bounded,
                            }));
                        }
                    }
                }
            }
        }

        if !c.issues.is_empty() {
            return Err(ConfigError { issues: c.issues });
        }
        let (Some(alpha), Some(scan), Some(a), Some(analysis)) = (alpha, scan, a_mat, analysis) else {
            return Err(ConfigError::single("<config>", "incomplete configuration"));
        };
        let delays = b_mats
            .into_iter()
            .zip(q)
            .map(|(b, q)| Some(DelayTerm { b: b?, q: q? }))
            .collect::<Option<Vec<_>>>()
            .expect("parse failures were reported above");
        let phi = phi.into_iter().collect::<Option<Vec<_>>>().expect("parse failures were reported above");
        let system = DelaySystem::new(alpha, a, delays, forcing, raw.tau, phi)
            .map_err(|e| ConfigError::single("<system>", e.to_string()))?;
        Ok(Self {
            system,
            analysis,
            scan,
            assume_bounded: raw.assume_bounded,
            amplitude: raw.amplitude,
            solver: raw.solver,
            output: raw.output.clone(),
        })
    }

    /// The raw form that parses back to `self`.
    pub fn to_raw(&self) -> RawConfig {
        let sys = &self.system;
        let sources = |m: &[Vec<TimeExpr>]| -> RawMatrix {
            m.iter().map(|r| r.iter().map(|e| e.source().to_string()).collect()).collect()
        };
        let q = OneOrMany::from_vec(sys.delays.iter().map(|d| d.q.source().to_string()).collect());
        let mut raw = RawConfig {
            alpha: sys.alpha.get(),
            dim: sys.dim,
            tau: sys.tau,
            a: None,
            b: None,
            q,
            phi: sys.phi.iter().map(|e| e.source().to_string()).collect(),
            analysis: self.analysis.kind(),
            gamma: None,
            sigma: None,
            halanay: None,
            assume_bounded: self.assume_bounded,
            amplitude: self.amplitude,
            scan: ScanSpec { t_max: self.scan.t_max, n_points: self.scan.n_points },
            solver: self.solver,
            output: self.output.clone(),
        };
        match &self.analysis {
            AnalysisSpec::HalanayScalar(h) => {
                raw.halanay = Some(RawHalanay {
                    a: h.a.source().to_string(),
                    b: OneOrMany::from_vec(h.b.iter().map(|e| e.source().to_string()).collect()),
                    c: sys.forcing.as_ref().map(|_| h.c.source().to_string()),
                });
            }
            other => {
                raw.a = Some(sources(&sys.a));
                let mut bs: Vec<RawMatrix> = sys.delays.iter().map(|d| sources(&d.b)).collect();
                raw.b = Some(if bs.len() == 1 { Matrices::One(bs.remove(0)) } else { Matrices::Many(bs) });
                if let AnalysisSpec::Lmi { gamma, sigma } = other {
                    raw.gamma = Some(gamma.source().to_string());
                    raw.sigma = Some(sigma.source().to_string());
                }
            }
        }
        raw
    }
}
