//! Multi-load strategies over a shared asset universe: priority cascade
//! (sequential), equal split, and joint cost minimization.
//!
//! `bounds` is the aggregate box for the summed weights `sum_k w^(k)`; its
//! lower ends must be 0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_report, empirical, solve_single, CostModel, SolveOptions, SolveReport};
use crate::error::{CfeError, Result};
use crate::metrics::{Bounds, CfeTarget};
use crate::scenario::ScenarioSet;
use crate::sqp::{fd_gradient, slsqp_solve, BoxConstraints, NlpProblem, SqpResult, SqpStatus};

/// Tolerance on the per-asset capacity sum.
pub const CAPACITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub load: usize,
    pub target: CfeTarget,
    /// Lower ranks are served first by the sequential strategy.
    #[serde(default)]
    pub priority: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Sequential,
    Split,
    Joint,
}

impl std::str::FromStr for Strategy {
    type Err = CfeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Strategy::Sequential),
            "split" => Ok(Strategy::Split),
            "joint" => Ok(Strategy::Joint),
            other => Err(CfeError::invalid(format!(
                "unknown strategy '{other}' (expected sequential, split or joint)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiLoadReport {
    pub strategy: Strategy,
    /// One report per load, in the order the loads were given.
    pub reports: Vec<SolveReport>,
    /// Hourly cost `v_k` per load.
    pub costs: Vec<f64>,
    pub total_cost: f64,
}

impl MultiLoadReport {
    fn new(strategy: Strategy, reports: Vec<SolveReport>) -> Self {
        let costs: Vec<f64> = reports.iter().map(|r| r.hourly_cost).collect();
        MultiLoadReport {
            strategy,
            total_cost: costs.iter().sum(),
            reports,
            costs,
        }
    }

    /// Largest `sum_k w_i^(k)` over assets.
    pub fn max_asset_usage(&self) -> f64 {
        let dim = self.reports.first().map_or(0, |r| r.weights.len());
        (0..dim)
            .map(|i| self.reports.iter().map(|r| r.weights[i]).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

fn check_loads(set: &ScenarioSet, loads: &[LoadSpec], bounds: &Bounds) -> Result<()> {
    if loads.is_empty() {
        return Err(CfeError::invalid("at least one load is required"));
    }
    bounds.validate(set.asset_count())?;
    if bounds.lower.iter().any(|&lo| lo != 0.0) {
        return Err(CfeError::invalid("multi-load bounds must have zero lower ends"));
    }
    for (pos, spec) in loads.iter().enumerate() {
        set.check_load(spec.load)?;
        spec.target.validate()?;
        if loads[..pos].iter().any(|other| other.load == spec.load) {
            return Err(CfeError::invalid(format!("load {} listed twice", spec.load)));
        }
    }
    Ok(())
}

fn zero_lower(upper: Vec<f64>) -> Bounds {
    Bounds {
        lower: vec![0.0; upper.len()],
        upper,
    }
}

pub fn solve_multi(
    set: &ScenarioSet,
    loads: &[LoadSpec],
    bounds: &Bounds,
    strategy: Strategy,
    options: &SolveOptions,
) -> Result<MultiLoadReport> {
    match strategy {
        Strategy::Sequential => solve_sequential(set, loads, bounds, options),
        Strategy::Split => solve_split(set, loads, bounds, options),
        Strategy::Joint => solve_joint(set, loads, bounds, options),
    }
}

/// Loads are served by ascending priority, each from what earlier loads left.
pub fn solve_sequential(
    set: &ScenarioSet,
    loads: &[LoadSpec],
    bounds: &Bounds,
    options: &SolveOptions,
) -> Result<MultiLoadReport> {
    check_loads(set, loads, bounds)?;
    let mut order: Vec<usize> = (0..loads.len()).collect();
    order.sort_by_key(|&pos| loads[pos].priority);
    let mut used = vec![0.0; set.asset_count()];
    let mut reports: Vec<Option<SolveReport>> = vec![None; loads.len()];
    for pos in order {
        let spec = &loads[pos];
        let remaining = zero_lower(
            bounds
                .upper
                .iter()
                .zip(&used)
                .map(|(&hi, &u)| (hi - u).max(0.0))
                .collect(),
        );
        let report = solve_single(set, spec.load, &spec.target, &remaining, &cold(options))?;
        for (u, &w) in used.iter_mut().zip(&report.weights) {
            *u += w;
        }
        reports[pos] = Some(report);
    }
    Ok(MultiLoadReport::new(
        Strategy::Sequential,
        reports.into_iter().flatten().collect(),
    ))
}

/// Every load gets an equal `1/K` share of each asset's box.
pub fn solve_split(
    set: &ScenarioSet,
    loads: &[LoadSpec],
    bounds: &Bounds,
    options: &SolveOptions,
) -> Result<MultiLoadReport> {
    check_loads(set, loads, bounds)?;
    let share = zero_lower(bounds.upper.iter().map(|hi| hi / loads.len() as f64).collect());
    let options = cold(options);
    let reports = loads
        .par_iter()
        .map(|spec| solve_single(set, spec.load, &spec.target, &share, &options))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiLoadReport::new(Strategy::Split, reports))
}

fn cold(options: &SolveOptions) -> SolveOptions {
    SolveOptions {
        sqp: options.sqp.clone(),
        w0: None,
    }
}

/// SLSQP over the stacked weights `[w^(1), ..., w^(K)]`, started from the
/// sequential solution and, when it is feasible, from the split solution;
/// the cheaper feasible result is kept.
pub fn solve_joint(
    set: &ScenarioSet,
    loads: &[LoadSpec],
    bounds: &Bounds,
    options: &SolveOptions,
) -> Result<MultiLoadReport> {
    check_loads(set, loads, bounds)?;
    let mut starts = vec![solve_sequential(set, loads, bounds, options)?];
    match solve_split(set, loads, bounds, options) {
        Ok(split) => starts.push(split),
        Err(CfeError::Infeasible { .. }) | Err(CfeError::NonConvergence(_)) => {}
        Err(e) => return Err(e),
    }
    let dim = set.asset_count();
    let count = loads.len();
    let cost = CostModel::new(set);
    let objective = |x: &[f64]| x.chunks(dim).map(|w| cost.value(w)).sum::<f64>();
    let feasible = |x: &[f64]| {
        loads.iter().enumerate().all(|(slot, spec)| {
            empirical(set, spec.load, &x[slot * dim..(slot + 1) * dim], spec.target.alpha) >= spec.target.p_c
        })
    };

    let mut best: Option<(Vec<f64>, SqpStatus, usize)> = None;
    for start in &starts {
        let x0: Vec<f64> = start.reports.iter().flat_map(|r| r.weights.iter().copied()).collect();
        let result = stacked_solve(set, loads, bounds, &cost, &x0, options)?;
        let mut x = result.w;
        enforce_capacity(&mut x, dim, &bounds.upper);
        if !feasible(&x) || objective(&x) > objective(&x0) {
            x = x0;
        }
        if best.as_ref().is_none_or(|(b, _, _)| objective(&x) < objective(b)) {
            best = Some((x, result.status, result.iterations));
        }
    }
    let (x, status, iterations) = best.expect("at least one start");

    let mut reports = Vec::with_capacity(count);
    for (slot, spec) in loads.iter().enumerate() {
        let others: Vec<f64> = (0..dim)
            .map(|i| (0..count).filter(|&k| k != slot).map(|k| x[k * dim + i]).sum())
            .collect();
        let own = zero_lower(
            bounds
                .upper
                .iter()
                .zip(&others)
                .map(|(&hi, &o)| (hi - o).max(0.0))
                .collect(),
        );
        let w = x[slot * dim..(slot + 1) * dim]
            .iter()
            .zip(&own.upper)
            .map(|(&v, &hi)| v.min(hi))
            .collect();
        reports.push(build_report(set, spec.load, &spec.target, &own, w, status, iterations, false)?);
    }
    Ok(MultiLoadReport::new(Strategy::Joint, reports))
}

fn stacked_solve(
    set: &ScenarioSet,
    loads: &[LoadSpec],
    bounds: &Bounds,
    cost: &CostModel,
    x0: &[f64],
    options: &SolveOptions,
) -> Result<SqpResult> {
    let dim = set.asset_count();
    let count = loads.len();
    let upper: Vec<f64> = (0..count).flat_map(|_| bounds.upper.iter().copied()).collect();
    let x0: Vec<f64> = x0.iter().zip(&upper).map(|(x, &hi)| x.clamp(0.0, hi)).collect();
    let block_gradient = cost.gradient();
    let stacked_box = BoxConstraints::new(vec![0.0; dim * count], upper);
    let mut problem = NlpProblem::new(
        |x: &[f64]| x.chunks(dim).map(|w| cost.value(w)).sum(),
        stacked_box,
    )
    .with_objective_gradient(move |_| Ok(block_gradient.repeat(count)));

    let fd_step = options.sqp.fd_step;
    for (slot, spec) in loads.iter().enumerate() {
        let block_box = BoxConstraints::new(vec![0.0; dim], bounds.upper.clone());
        let margin = options.sqp.violation_tol;
        let value = move |x: &[f64]| {
            empirical(set, spec.load, &x[slot * dim..(slot + 1) * dim], spec.target.alpha) - spec.target.p_c - margin
        };
        let gradient = move |x: &[f64]| -> Result<Vec<f64>> {
            let block = &x[slot * dim..(slot + 1) * dim];
            let local = fd_gradient(
                |w: &[f64]| empirical(set, spec.load, w, spec.target.alpha),
                block,
                &block_box,
                fd_step,
            )?;
            let mut full = vec![0.0; dim * count];
            full[slot * dim..(slot + 1) * dim].copy_from_slice(&local);
            Ok(full)
        };
        problem = problem.constraint_with_gradient(value, gradient);
    }
    for i in 0..dim {
        let hi = bounds.upper[i];
        problem = problem.constraint_with_gradient(
            move |x: &[f64]| hi - (0..count).map(|k| x[k * dim + i]).sum::<f64>(),
            move |_| {
                let mut g = vec![0.0; dim * count];
                for k in 0..count {
                    g[k * dim + i] = -1.0;
                }
                Ok(g)
            },
        );
    }
    slsqp_solve(&problem, &x0, &options.sqp)
}

/// Scales down over-committed assets so that `sum_k x_{k,i} <= upper_i`.
fn enforce_capacity(x: &mut [f64], dim: usize, upper: &[f64]) {
    let count = x.len() / dim;
    for i in 0..dim {
        let total: f64 = (0..count).map(|k| x[k * dim + i]).sum();
        if total > upper[i] + CAPACITY_TOL && total > 0.0 {
            let factor = upper[i] / total;
            for k in 0..count {
                x[k * dim + i] *= factor;
            }
        }
    }
}
