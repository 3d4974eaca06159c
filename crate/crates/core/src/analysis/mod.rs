//! Batch studies on top of the structurer: `(alpha, p_C)` cost grids,
//! diversification sweeps over asset subsets with shortfall VaR, and report
//! emission.

mod report;
mod subsets;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CfeError, Result};
use crate::metrics::{shortfall, shortfall_var, Bounds, CfeTarget};
use crate::scenario::ScenarioSet;
use crate::sqp::SqpStatus;
use crate::structurer::{solve_single, SolveOptions, SolveReport};

pub use report::{
    emit_report, heatmap_csv, report_file_name, write_csv, ReportFormat, Tabular, WeightsTable,
};
pub use subsets::{SubsetTemplate, TemplateTerm, TermCount, MAX_SUBSETS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum CellStatus {
    Solved { solver: SqpStatus },
    Infeasible { max_attainable: f64 },
    Failed { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub alpha: f64,
    pub p_c: f64,
    /// USD per MWh of load; absent unless solved.
    pub cost: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub status: CellStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostGrid {
    pub load: usize,
    pub alphas: Vec<f64>,
    pub pcs: Vec<f64>,
    /// `cells[r][c]` for `alphas[r]`, `pcs[c]`.
    pub cells: Vec<Vec<GridCell>>,
}

impl CostGrid {
    pub fn cost(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row][col].cost
    }

    /// Cost matrix with `None` for unsolved cells.
    pub fn costs(&self) -> Vec<Vec<Option<f64>>> {
        self.cells
            .iter()
            .map(|row| row.iter().map(|c| c.cost).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct GridOptions {
    pub solve: SolveOptions,
    /// Start each cell from its left neighbour's solution, row by row.
    pub warm_start: bool,
}

fn sorted_axis(values: &[f64], name: &str) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(CfeError::invalid(format!("{name} grid is empty")));
    }
    if values.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
        return Err(CfeError::invalid(format!("{name} values must lie in (0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    Ok(sorted)
}

fn solve_cell(
    set: &ScenarioSet,
    k: usize,
    alpha: f64,
    p_c: f64,
    bounds: &Bounds,
    options: &SolveOptions,
) -> Result<GridCell> {
    let target = CfeTarget::new(p_c, alpha)?;
    let (cost, weights, status) = match solve_single(set, k, &target, bounds, options) {
        Ok(report) => (
            Some(report.cost_per_mwh_load),
            Some(report.weights),
            CellStatus::Solved { solver: report.status },
        ),
        Err(CfeError::Infeasible { max_attainable, .. }) => (None, None, CellStatus::Infeasible { max_attainable }),
        Err(e @ (CfeError::Validation(_) | CfeError::Io { .. } | CfeError::Parse { .. })) => return Err(e),
        Err(e) => (None, None, CellStatus::Failed { message: e.to_string() }),
    };
    Ok(GridCell {
        alpha,
        p_c,
        cost,
        weights,
        status,
    })
}

/// One single-load solve per `(alpha, p_C)` pair; axes are sorted ascending.
pub fn cost_grid(
    set: &ScenarioSet,
    k: usize,
    alphas: &[f64],
    pcs: &[f64],
    bounds: &Bounds,
    options: &GridOptions,
) -> Result<CostGrid> {
    set.check_load(k)?;
    bounds.validate(set.asset_count())?;
    let alphas = sorted_axis(alphas, "alpha")?;
    let pcs = sorted_axis(pcs, "p_C")?;

    let cells = if options.warm_start {
        alphas
            .par_iter()
            .map(|&alpha| {
                let mut row = Vec::with_capacity(pcs.len());
                let mut previous: Option<Vec<f64>> = None;
                for &p_c in &pcs {
                    let solve = SolveOptions {
                        sqp: options.solve.sqp.clone(),
                        w0: previous.clone(),
                    };
                    let cell = solve_cell(set, k, alpha, p_c, bounds, &solve)?;
                    if cell.weights.is_some() {
                        previous = cell.weights.clone();
                    }
                    row.push(cell);
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let flat = alphas
            .iter()
            .flat_map(|&a| pcs.iter().map(move |&p| (a, p)))
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(alpha, p_c)| solve_cell(set, k, alpha, p_c, bounds, &options.solve))
            .collect::<Result<Vec<_>>>()?;
        flat.chunks(pcs.len()).map(<[GridCell]>::to_vec).collect()
    };
    Ok(CostGrid {
        load: k,
        alphas,
        pcs,
        cells,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    /// Value of the template's sweep variable.
    pub n: usize,
    pub assets: Vec<String>,
    pub size: usize,
    pub cost_per_mwh_load: f64,
    pub shortfall_var: f64,
    pub beta: f64,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedSubset {
    pub n: usize,
    pub assets: Vec<String>,
    pub reason: String,
    pub max_attainable: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub points: Vec<FrontierPoint>,
    pub skipped: Vec<SkippedSubset>,
}

impl Frontier {
    /// Cheapest feasible cost for each sweep value, in ascending `n`.
    pub fn best_cost_by_n(&self) -> Vec<(usize, Option<f64>)> {
        let mut ns: Vec<usize> = self
            .points
            .iter()
            .map(|p| p.n)
            .chain(self.skipped.iter().map(|s| s.n))
            .collect();
        ns.sort_unstable();
        ns.dedup();
        ns.into_iter()
            .map(|n| {
                let best = self
                    .points
                    .iter()
                    .filter(|p| p.n == n)
                    .map(|p| p.cost_per_mwh_load)
                    .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.min(c))));
                (n, best)
            })
            .collect()
    }
}

/// Solves on every subset generated by `template` and records cost and
/// shortfall VaR at level `beta`. Infeasible subsets are listed in
/// [`Frontier::skipped`].
pub fn diversification_sweep(
    set: &ScenarioSet,
    k: usize,
    target: &CfeTarget,
    template: &SubsetTemplate,
    beta: f64,
    options: &SolveOptions,
) -> Result<Frontier> {
    set.check_load(k)?;
    target.validate()?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(CfeError::invalid(format!("VaR level must lie in [0, 1], got {beta}")));
    }
    let subsets = template.enumerate(set)?;
    let outcomes = subsets
        .par_iter()
        .map(|(n, indices)| -> Result<std::result::Result<FrontierPoint, SkippedSubset>> {
            let sub = set.subset(indices)?;
            let ids: Vec<String> = sub.assets().iter().map(|a| a.id.clone()).collect();
            let bounds = Bounds::unit(indices.len());
            match solve_single(&sub, k, target, &bounds, options) {
                Ok(report) => Ok(Ok(frontier_point(&sub, k, *n, ids, &report, beta)?)),
                Err(CfeError::Infeasible { max_attainable, .. }) => Ok(Err(SkippedSubset {
                    n: *n,
                    assets: ids,
                    reason: "infeasible".into(),
                    max_attainable: Some(max_attainable),
                })),
                Err(CfeError::NonConvergence(message)) => Ok(Err(SkippedSubset {
                    n: *n,
                    assets: ids,
                    reason: message,
                    max_attainable: None,
                })),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut frontier = Frontier {
        points: Vec::new(),
        skipped: Vec::new(),
    };
    for outcome in outcomes {
        match outcome {
            Ok(point) => frontier.points.push(point),
            Err(skipped) => frontier.skipped.push(skipped),
        }
    }
    Ok(frontier)
}

fn frontier_point(
    set: &ScenarioSet,
    k: usize,
    n: usize,
    assets: Vec<String>,
    report: &SolveReport,
    beta: f64,
) -> Result<FrontierPoint> {
    let y = shortfall(set, k, &report.weights)?;
    Ok(FrontierPoint {
        n,
        size: assets.len(),
        assets,
        cost_per_mwh_load: report.cost_per_mwh_load,
        shortfall_var: shortfall_var(&y, beta)?,
        beta,
        weights: report.weights.clone(),
    })
}
