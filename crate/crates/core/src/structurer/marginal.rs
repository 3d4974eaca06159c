//! Which assets supply the next increment of load.

use serde::{Deserialize, Serialize};

use super::{solve_single, SolveOptions};
use crate::error::{CfeError, Result};
use crate::metrics::{Bounds, CfeTarget};
use crate::scenario::ScenarioSet;

pub const DEFAULT_EPSILON: f64 = 0.01;
const DEGENERATE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalPortfolio {
    pub epsilon: f64,
    pub asset_ids: Vec<String>,
    pub base: Vec<f64>,
    pub bumped: Vec<f64>,
    /// Energy-weighted shares `dw_i g_i / sum_j dw_j g_j`; sums to 1.
    pub shares: Vec<f64>,
    /// `dw_i / epsilon`.
    pub raw: Vec<f64>,
}

/// Solves at load `L` and at `(1 + epsilon) L` and attributes the change.
pub fn marginal_portfolio(
    set: &ScenarioSet,
    k: usize,
    target: &CfeTarget,
    bounds: &Bounds,
    epsilon: f64,
    options: &SolveOptions,
) -> Result<MarginalPortfolio> {
    if !(epsilon > 0.0 && epsilon <= 0.05) {
        return Err(CfeError::invalid(format!("epsilon must lie in (0, 0.05], got {epsilon}")));
    }
    let base = solve_single(set, k, target, bounds, options)?.weights;
    let bumped_set = set.with_scaled_load(k, 1.0 + epsilon)?;
    let bumped = solve_single(&bumped_set, k, target, bounds, options)?.weights;

    let generation = set.average_generation();
    let delta: Vec<f64> = base
        .iter()
        .zip(&bumped)
        .zip(&bounds.upper)
        .map(|((&b, &a), &hi)| {
            let saturated = hi - b <= super::BINDING_TOL && hi - a <= super::BINDING_TOL;
            if saturated {
                0.0
            } else {
                a - b
            }
        })
        .collect();
    let energy: Vec<f64> = delta.iter().zip(&generation).map(|(d, g)| d * g).collect();
    let total: f64 = energy.iter().sum();
    let scale: f64 = generation.iter().sum::<f64>().max(1.0);
    if total.abs() <= DEGENERATE_TOL * scale {
        return Err(CfeError::NonConvergence(
            "marginal portfolio is degenerate: the bumped solve did not change the weights".into(),
        ));
    }
    Ok(MarginalPortfolio {
        epsilon,
        asset_ids: set.assets().iter().map(|a| a.id.clone()).collect(),
        shares: energy.iter().map(|e| e / total).collect(),
        raw: delta.iter().map(|d| d / epsilon).collect(),
        base,
        bumped,
    })
}
