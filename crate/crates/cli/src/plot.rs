//! Whitespace-delimited series files and a gnuplot script that draws them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::ExperimentKind;
use crate::error::CliError;
use crate::experiment::write_file;
use crate::records::{summarize, ResultRecord};

fn series_text(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("# x mean std\n");
    for (x, m, s) in rows {
        writeln!(out, "{x} {m} {s}").unwrap();
    }
    out
}

/// Writes `<series>.dat` (and `<series>_baseline.dat` when baselines were
/// recorded) with rows sorted by x, plus `<kind>.gp`. Returns the paths.
pub fn emit_plot_data(records: &[ResultRecord], kind: ExperimentKind, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if records.is_empty() {
        return Err(CliError::Runtime("no records to plot".into()));
    }
    let summary = summarize(records);
    let mut names: Vec<String> = Vec::new();
    for s in &summary {
        if !names.contains(&s.experiment) {
            names.push(s.experiment.clone());
        }
    }

    let mut files = Vec::new();
    let mut plots = Vec::new();
    for name in &names {
        let mut rows: Vec<_> = summary.iter().filter(|s| &s.experiment == name).collect();
        rows.sort_by(|a, b| a.x.total_cmp(&b.x));
        let proposed: Vec<_> = rows.iter().filter_map(|r| Some((r.x, r.mean?, r.std?))).collect();
        let file = format!("{name}.dat");
        write_file(&dir.join(&file), &series_text(&proposed))?;
        files.push(dir.join(&file));
        plots.push((file, name.clone()));
        if rows.iter().any(|r| r.baseline_mean.is_some()) {
            let base: Vec<_> = rows.iter().filter_map(|r| Some((r.x, r.baseline_mean?, r.baseline_std?))).collect();
            let file = format!("{name}_baseline.dat");
            write_file(&dir.join(&file), &series_text(&base))?;
            files.push(dir.join(&file));
            plots.push((file, format!("{name} (random beamforming)")));
        }
    }

    let mut gp = String::new();
    writeln!(gp, "set xlabel \"{}\"", kind.x_label()).unwrap();
    writeln!(gp, "set ylabel \"sum rate (bits/s/Hz)\"").unwrap();
    writeln!(gp, "set key left top").unwrap();
    let parts: Vec<String> = plots
        .iter()
        .map(|(f, t)| format!("\"{f}\" using 1:2:3 with yerrorlines title \"{t}\""))
        .collect();
    writeln!(gp, "plot {}", parts.join(", \\\n     ")).unwrap();
    let script = dir.join(format!("{}.gp", kind.id()));
    write_file(&script, &gp)?;
    files.push(script);
    Ok(files)
}
