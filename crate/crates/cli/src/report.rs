//! JSON report and its serializer.

use std::io;

use halanay_core::fdde::EnvelopeCheck;
use halanay_core::{ConditionVerdict, HalanayCertificate, LmiReport, NormKind, PositivityVerdict};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::Analysis;

pub const TOOL_NAME: &str = "halanay-certify";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Infeasible,
    Violation,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Pass => 0,
            Self::Infeasible | Self::Violation => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self { name: TOOL_NAME, version: env!("CARGO_PKG_VERSION") }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanInfo {
    pub t_max: f64,
    pub n_points: usize,
    pub grid_relative: bool,
    pub note: String,
}

impl ScanInfo {
    pub fn new(t_max: f64, n_points: usize) -> Self {
        Self {
            t_max,
            n_points,
            grid_relative: true,
            note: format!(
                "conditions and the decay rate are evaluated on {n_points} uniform points of [0, {t_max}], not on all t >= 0"
            ),
        }
    }
}

/// The bound checked against the simulated norm.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeInfo {
    pub norm: NormKind,
    /// `w0 + M E_α(−λ t^α)`, or its square root for the quadratic route.
    pub formula: String,
    pub amplitude: f64,
    pub lambda: f64,
    pub w0: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationInfo {
    pub t_end: f64,
    pub h: f64,
    pub corrector_iters: usize,
    pub nodes: usize,
    /// Nodes whose delayed argument fell inside the step being computed.
    pub flagged_nodes: usize,
    pub csv_path: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub command: String,
    pub analysis: Analysis,
    pub alpha: f64,
    pub status: Status,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub scan: ScanInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positivity: Option<PositivityVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lmi: Option<LmiReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionVerdict>,
    pub certificate: Option<HalanayCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_check: Option<EnvelopeCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationInfo>,
}

/// Pretty JSON with every float in `{:.16e}` form, i.e. 17 significant digits.
struct SigFormatter(PrettyFormatter<'static>);

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes with 17 significant digits per float; non-finite values become `null`.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}
