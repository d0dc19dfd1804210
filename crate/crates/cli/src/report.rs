use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use polyptych::io::{read_trace_csv, write_json, TraceRow};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceSummary {
    pub label: String,
    pub path: PathBuf,
    /// Rows left after skipping.
    pub rows: usize,
    pub final_outer: usize,
    pub final_objective: f64,
    pub final_l_eps: f64,
    pub final_rel_err_raw: f64,
    pub final_rel_err_aligned: f64,
    pub min_objective: f64,
    pub wall_ms: f64,
}

/// `run/trace.csv` is labelled `run`; any other file by its stem.
fn label(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if stem == "trace" {
        if let Some(parent) = path.parent().and_then(Path::file_name) {
            return parent.to_string_lossy().into_owned();
        }
    }
    stem
}

fn summarize(path: &Path, rows: &[TraceRow]) -> TraceSummary {
    let last = rows.last().expect("nonempty trace");
    TraceSummary {
        label: label(path),
        path: path.to_path_buf(),
        rows: rows.len(),
        final_outer: last.outer,
        final_objective: last.objective,
        final_l_eps: last.l_eps,
        final_rel_err_raw: last.rel_err_raw,
        final_rel_err_aligned: last.rel_err_aligned,
        min_objective: rows
            .iter()
            .map(|r| r.objective)
            .fold(f64::INFINITY, f64::min),
        wall_ms: rows
            .iter()
            .map(|r| r.wall_ms)
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max),
    }
}

#[derive(Serialize)]
struct PlotRow<'a> {
    label: &'a str,
    outer: usize,
    sub: usize,
    var: &'a str,
    objective: f64,
    l_eps: f64,
    rel_err_raw: f64,
    rel_err_aligned: f64,
}

/// Summaries ordered by final objective. Rows with `outer <= skip_first` are
/// dropped first, mirroring plots that leave out the early iterations.
/// Writes `report.json` and the plot-ready `report.csv` when `out` is given.
pub fn report(
    paths: &[PathBuf],
    skip_first: usize,
    out: Option<&Path>,
) -> Result<Vec<TraceSummary>> {
    if paths.is_empty() {
        bail!("report needs at least one trace CSV");
    }
    let mut traces = Vec::new();
    for path in paths {
        let rows =
            read_trace_csv(path).with_context(|| format!("reading trace {}", path.display()))?;
        let kept: Vec<TraceRow> = rows
            .into_iter()
            .filter(|r| skip_first == 0 || r.outer > skip_first)
            .collect();
        if kept.is_empty() {
            bail!(
                "{} has no rows after skipping the first {skip_first} iterations",
                path.display()
            );
        }
        traces.push((path.clone(), kept));
    }
    let mut summaries: Vec<TraceSummary> =
        traces.iter().map(|(p, rows)| summarize(p, rows)).collect();
    summaries.sort_by(|a, b| a.final_objective.total_cmp(&b.final_objective));

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("report.json"), &summaries)?;
        let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
        for (path, rows) in &traces {
            let name = label(path);
            for r in rows {
                w.serialize(PlotRow {
                    label: &name,
                    outer: r.outer,
                    sub: r.sub,
                    var: &r.var,
                    objective: r.objective,
                    l_eps: r.l_eps,
                    rel_err_raw: r.rel_err_raw,
                    rel_err_aligned: r.rel_err_aligned,
                })?;
            }
        }
        w.flush()?;
    }
    Ok(summaries)
}

pub fn print_table(summaries: &[TraceSummary]) {
    println!(
        "{:<24} {:>6} {:>14} {:>14} {:>10} {:>10} {:>10}",
        "trace", "outer", "objective", "L_eps", "err", "err_align", "wall_s"
    );
    for s in summaries {
        println!(
            "{:<24} {:>6} {:>14.6e} {:>14.6e} {:>10.4} {:>10.4} {:>10.2}",
            s.label,
            s.final_outer,
            s.final_objective,
            s.final_l_eps,
            s.final_rel_err_raw,
            s.final_rel_err_aligned,
            s.wall_ms / 1e3
        );
    }
}
