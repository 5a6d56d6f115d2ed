//! Certify, simulate and verify pipelines.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use halanay_core::fdde::{self, EnvelopeCheck, Trajectory};
use halanay_core::halanay::{self, CaseTag};
use halanay_core::{
    lmi, positivity, HalanayCertificate, HalanayError, LmiInput, NormKind, PositivityError, PositivityOptions,
};

use crate::config::{AnalysisSpec, RunConfig};
use crate::plot;
use crate::report::{EnvelopeInfo, Report, ScanInfo, SimulationInfo, Status, ToolInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Certify,
    Simulate,
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Certify => "certify",
            Self::Simulate => "simulate",
            Self::Verify => "verify",
        }
    }
}

/// Files written by a run, resolved against the output directory.
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub report: PathBuf,
    pub csv: PathBuf,
}

impl OutputPaths {
    pub fn resolve(cfg: &RunConfig, out_dir: Option<&Path>) -> Self {
        let base = out_dir.unwrap_or(Path::new("."));
        let pick = |p: &Option<PathBuf>, default: &str| -> PathBuf {
            match p {
                Some(p) if p.is_absolute() => p.clone(),
                Some(p) => base.join(p),
                None => base.join(default),
            }
        };
        Self { report: pick(&cfg.output.report_path, "report.json"), csv: pick(&cfg.output.csv_path, "trajectory.csv") }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub trajectory: Option<Trajectory>,
    pub warnings: Vec<String>,
}

/// Certificate plus the data needed to evaluate its envelope.
struct Certified {
    cert: HalanayCertificate,
    norm: NormKind,
}

impl Certified {
    fn envelope(&self, alpha: halanay_core::FractionalOrder) -> impl Fn(f64) -> f64 + '_ {
        move |t| match self.norm {
            NormKind::L1 => halanay::envelope(&self.cert, alpha, t),
            NormKind::L2 => lmi::sqrt_envelope(&self.cert, alpha, t),
        }
    }

    fn info(&self, alpha: f64) -> EnvelopeInfo {
        let c = &self.cert;
        let inner = format!("{:.6} + {:.6} E_{alpha}(-{:.6} t^{alpha})", c.w0, c.m, c.lambda_star);
        let formula = match self.norm {
            NormKind::L1 => inner,
            NormKind::L2 => format!("sqrt({inner})"),
        };
        EnvelopeInfo { norm: self.norm, formula, amplitude: c.m, lambda: c.lambda_star, w0: c.w0 }
    }
}

fn blank_report(cfg: &RunConfig, cmd: Command) -> Report {
    Report {
        tool: ToolInfo::default(),
        command: cmd.name().to_string(),
        analysis: cfg.analysis.kind(),
        alpha: cfg.system.alpha.get(),
        status: Status::Pass,
        passed: true,
        message: None,
        scan: ScanInfo::new(cfg.scan.t_max, cfg.scan.n_points),
        positivity: None,
        lmi: None,
        conditions: None,
        certificate: None,
        envelope: None,
        envelope_check: None,
        simulation: None,
    }
}

fn fail(report: &mut Report, status: Status, message: String) {
    report.status = status;
    report.passed = false;
    report.message = Some(message);
}

/// Amplitude from the config, which must dominate the sampled value.
fn amplitude(given: Option<f64>, sampled: f64, what: &str) -> Result<f64> {
    match given {
        Some(m) if m < sampled => bail!("amplitude {m} is below the sampled {what} {sampled} of the initial function"),
        Some(m) => Ok(m),
        None => Ok(sampled),
    }
}

/// Runs the analysis. Infeasibility is a report outcome; other failures are errors.
fn certify(cfg: &RunConfig, report: &mut Report) -> Result<Option<Certified>> {
    let sys = &cfg.system;
    match &cfg.analysis {
        AnalysisSpec::Positive => {
            let opts = PositivityOptions { assume_bounded: cfg.assume_bounded, amplitude: cfg.amplitude };
            match positivity::certify_positive(sys, &cfg.scan, &opts) {
                Ok((verdict, cert)) => {
                    report.positivity = Some(verdict);
                    match cert {
                        Some(cert) => Ok(Some(Certified { cert, norm: NormKind::L1 })),
                        None => {
                            fail(report, Status::Infeasible, "neither column-sum condition holds on the grid".into());
                            Ok(None)
                        }
                    }
                }
                Err(e @ (PositivityError::NotMetzler | PositivityError::NotNonnegative)) => {
                    fail(report, Status::Infeasible, e.to_string());
                    Ok(None)
                }
                Err(PositivityError::Halanay(e @ HalanayError::Infeasible { .. })) => {
                    fail(report, Status::Infeasible, e.to_string());
                    Ok(None)
                }
                Err(e) => Err(e.into()),
            }
        }
        AnalysisSpec::Lmi { gamma, sigma } => {
            let sampled = lmi::phi_sup_sq(sys)?;
            let m2 = amplitude(cfg.amplitude.map(|m| m * m), sampled, "sup of |phi|^2")?;
            let input = LmiInput {
                sys: sys.clone(),
                gamma: gamma.clone(),
                sigma: sigma.clone(),
                grid: cfg.scan,
                tol: lmi::DEFAULT_TOL,
            };
            let mut lr = lmi::certify_lmi(&input, m2)?;
            let cert = lr.certificate.take();
            if !lr.feasible {
                let msg = format!(
                    "LMI infeasible on the grid: largest eigenvalue {:.3e} at t = {}, gamma min {:.4}, sigma/gamma max {:.4}",
                    lr.worst_eigen, lr.worst_t, lr.a0, lr.p
                );
                fail(report, Status::Infeasible, msg);
            }
            report.lmi = Some(lr);
            Ok(cert.map(|cert| Certified { cert, norm: NormKind::L2 }))
        }
        AnalysisSpec::HalanayScalar(input) => {
            let verdict = halanay::classify_conditions(input)?;
            let found = verdict.case_tag != CaseTag::None;
            report.conditions = Some(verdict);
            if !found {
                fail(
                    report,
                    Status::Infeasible,
                    "neither the bounded-gap nor the ratio condition holds on the grid".into(),
                );
                return Ok(None);
            }
            let m = amplitude(cfg.amplitude, positivity::phi_sup_l1(sys)?, "sup of |phi|")?;
            match halanay::certify(input, m) {
                Ok(cert) => Ok(Some(Certified { cert, norm: NormKind::L1 })),
                Err(e @ HalanayError::Infeasible { .. }) => {
                    fail(report, Status::Infeasible, e.to_string());
                    Ok(None)
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn simulate(cfg: &RunConfig, report: &mut Report, csv: Option<&Path>) -> Result<Trajectory> {
    let Some(spec) = cfg.solver else {
        bail!("solver: required for simulation");
    };
    let traj = fdde::solve(&cfg.system, &spec.solver_config())?;
    report.simulation = Some(SimulationInfo {
        t_end: spec.t_end,
        h: spec.h,
        corrector_iters: spec.corrector_iters,
        nodes: traj.len(),
        flagged_nodes: traj.flagged.len(),
        csv_path: csv.map(|p| p.display().to_string()),
    });
    Ok(traj)
}

fn write_csv(path: &Path, traj: &Trajectory, check: Option<&EnvelopeCheck>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    fdde::write_csv(BufWriter::new(file), traj, check)?;
    Ok(())
}

/// Runs one subcommand, writing the CSV and plot script when a trajectory is produced.
pub fn run(cfg: &RunConfig, cmd: Command, paths: &OutputPaths) -> Result<Outcome> {
    let mut report = blank_report(cfg, cmd);
    let mut warnings = Vec::new();
    let alpha = cfg.system.alpha;

    let certified = if cmd == Command::Simulate { None } else { certify(cfg, &mut report)? };
    if let Some(c) = &certified {
        warnings.push(format!(
            "the certificate is grid-relative: lambda* = {:.6} is the minimum over {} points of [0, {}], not an infimum over all t >= 0",
            c.cert.lambda_star, cfg.scan.n_points, cfg.scan.t_max
        ));
        report.envelope = Some(c.info(alpha.get()));
        report.certificate = Some(c.cert.clone());
    }

    let mut trajectory = None;
    let run_solver = match cmd {
        Command::Certify => false,
        Command::Simulate => true,
        Command::Verify => certified.is_some(),
    };
    if run_solver {
        let traj = simulate(cfg, &mut report, Some(&paths.csv))?;
        if !traj.flagged.is_empty() {
            warnings.push(format!(
                "{} nodes read the delayed state from the step being computed; use h below the smallest delay",
                traj.flagged.len()
            ));
        }
        let check = certified.as_ref().map(|c| {
            let tol = cfg.solver.map_or(fdde::DEFAULT_ENVELOPE_TOL, |s| s.tolerance);
            fdde::check_envelope(&traj, c.norm, c.envelope(alpha), tol)
        });
        write_csv(&paths.csv, &traj, check.as_ref())?;
        let label = certified.as_ref().map(|c| c.info(alpha.get()).formula);
        plot::emit_plot_script(&paths.csv, label.as_deref())?;
        if let Some(check) = check {
            if !check.passed {
                let msg = format!(
                    "the {:?} norm exceeds the envelope by more than {} first at t = {}, max ratio {:.6}",
                    check.norm,
                    check.tolerance,
                    check.first_violation_t.unwrap_or(f64::NAN),
                    check.max_ratio
                );
                fail(&mut report, Status::Violation, msg);
            }
            report.envelope_check = Some(check);
        }
        trajectory = Some(traj);
    }
    Ok(Outcome { report, trajectory, warnings })
}
