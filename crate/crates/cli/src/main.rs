use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use halanay_cli::{load_config, run, to_json, Command, OutputPaths};
use halanay_core::{mittag_leffler, MlQuery};

const INPUT_ERROR: u8 = 1;

/// Mittag-Leffler decay certificates and simulation for fractional delay systems.
#[derive(Parser)]
#[command(name = "halanay-certify", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for relative output paths; defaults to the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Check the stability conditions and compute the decay certificate.
    Certify(RunArgs),
    /// Integrate the system and write the trajectory CSV.
    Simulate(RunArgs),
    /// Certify, simulate and check the trajectory against the envelope.
    Verify(RunArgs),
    /// Print E_{alpha,beta}(x).
    #[command(allow_negative_numbers = true)]
    Mlf { alpha: f64, beta: f64, x: f64 },
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("HALANAY_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("HALANAY_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    Ok(())
}

fn execute(cmd: Command, args: &RunArgs) -> Result<u8> {
    let cfg = load_config(&args.config)?;
    let paths = OutputPaths::resolve(&cfg, args.out.as_deref());
    let outcome = run(&cfg, cmd, &paths)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(msg) = &outcome.report.message {
        eprintln!("{msg}");
    }
    if cmd == Command::Simulate {
        eprintln!("wrote {}", paths.csv.display());
    } else {
        let json = to_json(&outcome.report)?;
        if let Some(dir) = paths.report.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(&paths.report, format!("{json}\n"))
            .with_context(|| format!("writing {}", paths.report.display()))?;
        println!("{json}");
    }
    Ok(outcome.report.status.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { INPUT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = init_threads().and_then(|()| match &cli.command {
        Sub::Certify(a) => execute(Command::Certify, a),
        Sub::Simulate(a) => execute(Command::Simulate, a),
        Sub::Verify(a) => execute(Command::Verify, a),
        Sub::Mlf { alpha, beta, x } => {
            let v = mittag_leffler(MlQuery::new(*alpha, *beta, *x))?;
            println!("{v:.16e}");
            Ok(0)
        }
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}
