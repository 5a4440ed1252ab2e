//! CSV and JSON writers. Floats use the shortest decimal that round-trips,
//! and every file is written to a temporary sibling and renamed into place.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thermops_core::geometry::ContourQuantity;
use thermops_core::{Alpha, ContourGrid, EnsembleResult, TrajectoryRecord, ViolationReport};

pub const FORMAT_HEADER: &str = "# thermops-sim v1";

/// Shortest round-trip decimal; infinities become `inf` / `-inf`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Inverse of [`fmt_f64`].
pub fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Version comment, header row, then records.
pub fn csv_bytes(header: Vec<String>, rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(FORMAT_HEADER.as_bytes());
    buf.push(b'\n');
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(&header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn prob_columns(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (0..d).map(move |j| format!("{prefix}p_{j}"))
}

pub fn trajectory_csv(traj: &TrajectoryRecord) -> Vec<u8> {
    let d = traj.states[0].dim();
    let mut header = vec!["step".to_string()];
    header.extend(prob_columns("", d));
    header.push("delta".into());
    header.extend(traj.alphas.iter().map(|a| format!("D_{a}")));
    let rows = traj
        .states
        .iter()
        .enumerate()
        .map(|(r, state)| {
            let mut row = vec![r.to_string()];
            row.extend(state.probs().iter().map(|&p| fmt_f64(p)));
            row.push(if r == 0 {
                String::new()
            } else {
                fmt_f64(traj.deltas[r - 1])
            });
            row.extend(traj.divergences[r].iter().map(|&v| fmt_f64(v)));
            row
        })
        .collect();
    csv_bytes(header, rows)
}

pub fn ensemble_csv(res: &EnsembleResult) -> Vec<u8> {
    let d = res.reference.dim();
    let mut header = vec!["step".to_string()];
    header.extend(prob_columns("analytic_", d));
    header.extend(prob_columns("mc_", d));
    header.extend(prob_columns("mc_stderr_", d));
    for a in &res.alphas {
        header.push(format!("Dbar_{a}"));
        header.push(format!("D_mc_mean_{a}"));
        header.push(format!("D_analytic_mean_{a}"));
        header.push(format!("stderr_{a}"));
    }
    let rows = (0..=res.steps())
        .map(|r| {
            let mut row = vec![r.to_string()];
            row.extend(res.analytic_states[r].probs().iter().map(|&p| fmt_f64(p)));
            row.extend(res.mean_states[r].probs().iter().map(|&p| fmt_f64(p)));
            row.extend(res.state_std_errors[r].iter().map(|&p| fmt_f64(p)));
            for i in 0..res.alphas.len() {
                row.push(fmt_f64(res.mean_divergence[r][i]));
                row.push(fmt_f64(res.divergence_of_mc_mean[r][i]));
                row.push(fmt_f64(res.divergence_of_analytic_mean[r][i]));
                row.push(fmt_f64(res.std_errors[r][i]));
            }
            row
        })
        .collect();
    csv_bytes(header, rows)
}

pub fn contour_csv(grid: &ContourGrid) -> Vec<u8> {
    let tag = match grid.quantity {
        ContourQuantity::FreeEnergy => "F",
        ContourQuantity::Divergence => "D",
    };
    let mut header: Vec<String> = ["x", "y", "p0", "p1", "p2"].iter().map(|s| s.to_string()).collect();
    header.extend(grid.alphas.iter().map(|a| format!("{tag}_{a}")));
    let rows = grid
        .points
        .iter()
        .map(|pt| {
            let mut row = vec![fmt_f64(pt.point.x), fmt_f64(pt.point.y)];
            row.extend(pt.probs.iter().map(|&p| fmt_f64(p)));
            row.extend(pt.values.iter().map(|&v| fmt_f64(v)));
            row
        })
        .collect();
    csv_bytes(header, rows)
}

/// `alpha` as JSON: a number, or the token "inf".
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum AlphaJson {
    Finite(f64),
    Token(&'static str),
}

impl From<Alpha> for AlphaJson {
    fn from(a: Alpha) -> Self {
        match a {
            Alpha::Finite(x) => AlphaJson::Finite(x),
            Alpha::Infinity => AlphaJson::Token("inf"),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EventJson {
    pub step: usize,
    pub increase: f64,
}

#[derive(Debug, Serialize)]
pub struct ReportJson {
    pub alpha: AlphaJson,
    pub violated: bool,
    pub max_increase: f64,
    pub first_violation_step: Option<usize>,
    pub events: Vec<EventJson>,
}

impl From<&ViolationReport> for ReportJson {
    fn from(r: &ViolationReport) -> Self {
        ReportJson {
            alpha: r.alpha.into(),
            violated: r.is_violated(),
            max_increase: r.max_increase,
            first_violation_step: r.first_violation_step,
            events: r
                .events
                .iter()
                .map(|e| EventJson {
                    step: e.step,
                    increase: e.increase,
                })
                .collect(),
        }
    }
}

/// One checked series with its tolerance and per-order reports.
#[derive(Debug, Serialize)]
pub struct SeriesJson {
    pub series: &'static str,
    pub tolerance: f64,
    pub reports: Vec<ReportJson>,
}

impl SeriesJson {
    pub fn new(series: &'static str, tolerance: f64, reports: &[ViolationReport]) -> Self {
        SeriesJson {
            series,
            tolerance,
            reports: reports.iter().map(ReportJson::from).collect(),
        }
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("plain data");
    out.push(b'\n');
    out
}
