//! CSV panels, adjacency files and report emission.
//!
//! Floats are written with 17 significant digits so every value re-reads to
//! the identical `f64`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::simulation::SimulationReport;

/// Observation panel: rows are time points, columns are series.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    pub x: DMatrix<f64>,
    pub labels: Option<Vec<String>>,
}

impl PanelData {
    pub fn t(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjFormat {
    /// Two integer columns per line, one edge each.
    Edges,
    /// `p x p` matrix of 0/1.
    Dense,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Raw records of a headerless CSV, with 1-based line numbers.
fn read_records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => io_err(path, io),
            other => parse_err(path, 0, format!("{other:?}")),
        })?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

/// Load a rectangular numeric CSV. With `header`, the first row supplies the
/// series labels.
pub fn load_panel_csv(path: &Path, header: bool) -> Result<PanelData> {
    let mut records = read_records(path)?;
    let labels = if header {
        if records.is_empty() {
            return Err(parse_err(path, 1, "missing header row"));
        }
        Some(records.remove(0).1)
    } else {
        None
    };
    let Some((_, first)) = records.first() else {
        return Err(parse_err(path, 0, "no data rows"));
    };
    let p = first.len();
    if let Some(l) = &labels {
        if l.len() != p {
            return Err(parse_err(
                path,
                1,
                format!("header has {} labels but rows have {p} columns", l.len()),
            ));
        }
    }
    let t = records.len();
    let mut x = DMatrix::zeros(t, p);
    for (row, (line, fields)) in records.iter().enumerate() {
        if fields.len() != p {
            return Err(parse_err(
                path,
                *line,
                format!("row {row} has {} columns, expected {p}", fields.len()),
            ));
        }
        for (col, cell) in fields.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(path, *line, format!("non-numeric cell '{cell}' at ({row}, {col})"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    path,
                    *line,
                    format!("non-finite cell '{cell}' at ({row}, {col})"),
                ));
            }
            x[(row, col)] = v;
        }
    }
    Ok(PanelData { x, labels })
}

/// Load a network over `p` nodes. Edge lists are 0-based unless
/// `one_based` is set.
pub fn load_adjacency(path: &Path, format: AdjFormat, p: usize, one_based: bool) -> Result<Network> {
    let records = read_records(path)?;
    match format {
        AdjFormat::Edges => {
            let mut edges = Vec::with_capacity(records.len());
            for (line, fields) in &records {
                if fields.len() != 2 {
                    return Err(parse_err(path, *line, format!("expected 2 columns, got {}", fields.len())));
                }
                let mut pair = [0usize; 2];
                for (slot, cell) in pair.iter_mut().zip(fields) {
                    let raw: usize = cell
                        .parse()
                        .map_err(|_| parse_err(path, *line, format!("invalid node index '{cell}'")))?;
                    let index = if one_based {
                        raw.checked_sub(1)
                            .ok_or_else(|| parse_err(path, *line, "node index 0 in 1-based list"))?
                    } else {
                        raw
                    };
                    if index >= p {
                        return Err(parse_err(
                            path,
                            *line,
                            format!("node index {raw} out of range for p = {p}"),
                        ));
                    }
                    *slot = index;
                }
                if pair[0] == pair[1] {
                    return Err(parse_err(path, *line, format!("self-loop at node {}", pair[0])));
                }
                edges.push((pair[0], pair[1]));
            }
            Network::from_edges(p, &edges)
        }
        AdjFormat::Dense => {
            if records.len() != p {
                return Err(parse_err(
                    path,
                    records.last().map(|r| r.0).unwrap_or(0),
                    format!("dense adjacency has {} rows, expected {p}", records.len()),
                ));
            }
            let mut a = DMatrix::zeros(p, p);
            for (i, (line, fields)) in records.iter().enumerate() {
                if fields.len() != p {
                    return Err(parse_err(path, *line, format!("expected {p} columns, got {}", fields.len())));
                }
                for (j, cell) in fields.iter().enumerate() {
                    a[(i, j)] = cell
                        .parse()
                        .map_err(|_| parse_err(path, *line, format!("non-numeric cell '{cell}'")))?;
                }
            }
            Network::from_dense(a)
        }
    }
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>, labels: Option<&[String]>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        if let Some(labels) = labels {
            writeln!(w, "{}", labels.join(","))?;
        }
        for row in m.row_iter() {
            let line: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()
    };
    emit().map_err(|e| io_err(path, e))
}

/// Read a headerless numeric CSV written by [`write_matrix_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    Ok(load_panel_csv(path, false)?.x)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| io_err(path, std::io::Error::other(e)))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    Ok(dir.to_path_buf())
}

/// Header of the simulation table.
pub const TABLE_HEADER: &str = "case,p,T,method,mean_mse,sd_mse,mean_r,under,over";

/// One line per method. The `pca` row carries the plain eigenvalue-ratio
/// selection, `lap`/`proj` the one-step-further selections. Cells of a study
/// that was not run are empty.
pub fn simulation_table_rows(report: &SimulationReport) -> Vec<String> {
    use crate::estimator::PenaltyKind;
    let cfg = &report.config;
    [
        (PenaltyKind::None, "er"),
        (PenaltyKind::Laplacian, "lap"),
        (PenaltyKind::Projection, "proj"),
    ]
    .into_iter()
    .map(|(kind, sel)| {
        let (mean, sd) = report
            .mse_for(kind)
            .map(|s| (format_float(s.mean), format_float(s.sd)))
            .unwrap_or_default();
        let (mean_r, under, over) = report
            .selection_for(sel)
            .map(|s| (format_float(s.mean_r), s.under.to_string(), s.over.to_string()))
            .unwrap_or_default();
        format!(
            "{},{},{},{},{mean},{sd},{mean_r},{under},{over}",
            cfg.case,
            cfg.p,
            cfg.t,
            kind.label()
        )
    })
    .collect()
}

pub fn write_simulation_table(path: &Path, reports: &[SimulationReport]) -> Result<()> {
    let mut text = String::from(TABLE_HEADER);
    text.push('\n');
    for report in reports {
        for row in simulation_table_rows(report) {
            text.push_str(&row);
            text.push('\n');
        }
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}
