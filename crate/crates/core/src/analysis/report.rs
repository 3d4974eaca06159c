//! Deterministic JSON and CSV serialization of study results.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CellStatus, CostGrid, Frontier};
use crate::error::{CfeError, Result};
use crate::metrics::Heatmap;
use crate::structurer::{Binding, MultiLoadReport, SolveReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = CfeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(CfeError::invalid(format!("unknown report format '{other}' (json or csv)"))),
        }
    }
}

/// Long-format tabular view of a result.
pub trait Tabular {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<String>>;
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn joined(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn binding_name(b: Binding) -> &'static str {
    match b {
        Binding::Lower => "lower",
        Binding::Upper => "upper",
        Binding::Free => "free",
    }
}

impl Tabular for CostGrid {
    fn header(&self) -> Vec<String> {
        strings(&["alpha", "p_c", "state", "cost_per_mwh_load", "max_attainable", "weights"])
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.cells
            .iter()
            .flatten()
            .map(|cell| {
                let (state, max_attainable) = match &cell.status {
                    CellStatus::Solved { .. } => ("solved", None),
                    CellStatus::Infeasible { max_attainable } => ("infeasible", Some(*max_attainable)),
                    CellStatus::Failed { .. } => ("failed", None),
                };
                vec![
                    cell.alpha.to_string(),
                    cell.p_c.to_string(),
                    state.into(),
                    opt(cell.cost),
                    opt(max_attainable),
                    cell.weights.as_deref().map(joined).unwrap_or_default(),
                ]
            })
            .collect()
    }
}

impl Tabular for Frontier {
    fn header(&self) -> Vec<String> {
        strings(&["n", "size", "assets", "cost_per_mwh_load", "shortfall_var", "beta", "weights"])
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| {
                vec![
                    p.n.to_string(),
                    p.size.to_string(),
                    p.assets.join(";"),
                    p.cost_per_mwh_load.to_string(),
                    p.shortfall_var.to_string(),
                    p.beta.to_string(),
                    joined(&p.weights),
                ]
            })
            .collect()
    }
}

/// Per-asset weights of one solve.
pub struct WeightsTable<'a>(pub &'a SolveReport);

impl Tabular for WeightsTable<'_> {
    fn header(&self) -> Vec<String> {
        strings(&["asset", "weight", "binding"])
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let r = self.0;
        r.asset_ids
            .iter()
            .zip(&r.weights)
            .zip(&r.binding)
            .map(|((id, w), b)| vec![id.clone(), w.to_string(), binding_name(*b).into()])
            .collect()
    }
}

impl Tabular for SolveReport {
    fn header(&self) -> Vec<String> {
        WeightsTable(self).header()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        WeightsTable(self).rows()
    }
}

impl Tabular for MultiLoadReport {
    fn header(&self) -> Vec<String> {
        strings(&["strategy", "load", "asset", "weight", "load_cost"])
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let strategy = serde_json::to_value(self.strategy)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        self.reports
            .iter()
            .flat_map(|r| {
                let strategy = strategy.clone();
                r.asset_ids.iter().zip(&r.weights).map(move |(id, w)| {
                    vec![
                        strategy.clone(),
                        r.load.to_string(),
                        id.clone(),
                        w.to_string(),
                        r.hourly_cost.to_string(),
                    ]
                })
            })
            .collect()
    }
}

impl Tabular for Heatmap {
    fn header(&self) -> Vec<String> {
        std::iter::once("hour".to_string())
            .chain((1..=self.days()).map(|d| format!("d{d}")))
            .collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.values
            .iter()
            .enumerate()
            .map(|(h, row)| std::iter::once(h.to_string()).chain(row.iter().map(f64::to_string)).collect())
            .collect()
    }
}

pub fn write_csv<W: Write>(table: &dyn Tabular, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| CfeError::invalid(format!("csv output failed: {e}"));
    out.write_record(table.header()).map_err(to_err)?;
    for row in table.rows() {
        out.write_record(row).map_err(to_err)?;
    }
    out.flush().map_err(|e| CfeError::invalid(format!("csv output failed: {e}")))
}

/// Heatmap as CSV text: a header row, then 24 hour-of-day rows.
pub fn heatmap_csv(heatmap: &Heatmap) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(heatmap, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

/// `<prefix>_<stamp>.<ext>`, e.g. `grid_20240101T000000Z.csv`.
pub fn report_file_name(prefix: &str, stamp: &str, format: ReportFormat) -> String {
    format!("{prefix}_{stamp}.{}", format.extension())
}

/// Writes `report` to `path` as pretty JSON or long-format CSV.
pub fn emit_report<T>(report: &T, format: ReportFormat, path: &Path) -> Result<()>
where
    T: Serialize + Tabular,
{
    let bytes = match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)
                .map_err(|e| CfeError::invalid(format!("json output failed: {e}")))?;
            s.push('\n');
            s.into_bytes()
        }
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            write_csv(report, &mut buf)?;
            buf
        }
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CfeError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CfeError::io(path, e))
}
