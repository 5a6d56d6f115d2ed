//! Gnuplot script generation for trajectory CSV files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Writes `<csv stem>.gp` next to the CSV, plotting every state column and,
/// when `envelope` labels one, the envelope column.
pub fn emit_plot_script(csv: &Path, envelope: Option<&str>) -> Result<PathBuf> {
    let text = fs::read_to_string(csv).with_context(|| format!("reading {}", csv.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().map(|h| h.split(',').collect()).unwrap_or_default();
    if header.first() != Some(&"t") || header.len() < 6 {
        bail!("{} is not a trajectory file", csv.display());
    }
    if !lines.any(|l| !l.trim().is_empty()) {
        bail!("{} holds an empty trajectory", csv.display());
    }
    let dim = header.len() - 5;
    let data = csv.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();

    let mut curves: Vec<String> = (0..dim)
        .map(|i| {
            let first = if i == 0 { format!("\"{data}\"") } else { "\"\"".to_string() };
            format!("{first} using 1:{} with lines title \"x{}\"", i + 2, i + 1)
        })
        .collect();
    if let Some(label) = envelope {
        let label = label.replace('"', "'");
        curves.push(format!("\"\" using 1:{} with lines dashtype 2 linewidth 2 title \"envelope {label}\"", dim + 4));
    }
    let script = format!(
        "# plots {data}; run with: gnuplot -p {}\n\
         set datafile separator \",\"\n\
         set key outside right\n\
         set grid\n\
         set xlabel \"t\"\n\
         set ylabel \"state\"\n\
         set title \"Solution components\"\n\
         plot {}\n",
        csv.with_extension("gp").file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        curves.join(", \\\n     ")
    );
    let out = csv.with_extension("gp");
    fs::write(&out, script).with_context(|| format!("writing {}", out.display()))?;
    Ok(out)
}
