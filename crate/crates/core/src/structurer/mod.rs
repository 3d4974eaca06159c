//! Chance-constrained portfolio structuring.
//!
//! For one load the problem is
//!
//! ```text
//!     minimize    sum_i c_i g_i w_i
//!     subject to  quantile_{1 - alpha}(R(w)) >= p_C,   lower <= w <= upper
//! ```
//!
//! where `R(w)` collects the per-scenario annual CFE scores. [`solve_single`]
//! starts from the Gaussian-surrogate solution of [`solve_approx`] (or from the
//! upper bounds when `alpha = 1`) and runs SLSQP on the empirical quantile.
//! Multi-load strategies live in [`multi`], marginal portfolios in
//! [`marginal`].

pub mod marginal;
pub mod multi;

use serde::{Deserialize, Serialize};

use crate::error::{CfeError, Result};
use crate::metrics::{
    annual_scores, cost_coefficients, over_procurement, quantile_of, scenario_scores, Bounds, CfeTarget,
};
use crate::numeric::{mean, normal_quantile};
use crate::scenario::ScenarioSet;
use crate::sqp::{slsqp_solve, BoxConstraints, NlpProblem, SqpSettings, SqpStatus};

pub use marginal::{marginal_portfolio, MarginalPortfolio, DEFAULT_EPSILON};
pub use multi::{solve_joint, solve_multi, solve_sequential, solve_split, LoadSpec, MultiLoadReport, Strategy};

/// Distance from a bound below which a weight counts as binding.
pub const BINDING_TOL: f64 = 1e-6;
/// Slack below which the quantile constraint counts as active.
pub const ACTIVE_TOL: f64 = 1e-4;
const RESTORATION_STEPS: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub sqp: SqpSettings,
    /// Starting point; replaces the surrogate initializer when set.
    pub w0: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            sqp: SqpSettings::default(),
            w0: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Lower,
    Upper,
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub load: usize,
    pub target: CfeTarget,
    pub asset_ids: Vec<String>,
    pub weights: Vec<f64>,
    /// Expected procurement cost, USD per hour.
    pub hourly_cost: f64,
    pub cost_per_mwh_load: f64,
    pub achieved_quantile: f64,
    pub achieved_mean: f64,
    pub over_procurement: f64,
    pub binding: Vec<Binding>,
    pub quantile_active: bool,
    pub status: SqpStatus,
    pub iterations: usize,
    /// Whether the final iterate had to be pushed toward the upper bounds.
    pub restored: bool,
}

impl SolveReport {
    pub fn any_binding(&self) -> bool {
        self.binding.iter().any(|b| *b != Binding::Free)
    }
}

fn check_inputs(set: &ScenarioSet, k: usize, target: &CfeTarget, bounds: &Bounds) -> Result<()> {
    set.check_load(k)?;
    target.validate()?;
    bounds.validate(set.asset_count())
}

/// Normalized linear cost `sum_i c_i g_i w_i / sum_i c_i g_i`.
struct CostModel {
    coefficients: Vec<f64>,
    scale: f64,
}

impl CostModel {
    fn new(set: &ScenarioSet) -> Self {
        let coefficients = cost_coefficients(set);
        let total: f64 = coefficients.iter().sum();
        let scale = if total > 0.0 { total } else { 1.0 };
        CostModel { coefficients, scale }
    }

    fn value(&self, w: &[f64]) -> f64 {
        self.coefficients.iter().zip(w).map(|(c, x)| c * x).sum::<f64>() / self.scale
    }

    fn gradient(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c / self.scale).collect()
    }
}

fn box_of(bounds: &Bounds) -> BoxConstraints {
    BoxConstraints::new(bounds.lower.clone(), bounds.upper.clone())
}

/// Surrogate quantile `mu + Phi^{-1}(1 - alpha) sigma`; a single scenario has `sigma = 0`.
fn surrogate_quantile(set: &ScenarioSet, k: usize, w: &[f64], z: f64) -> f64 {
    match annual_scores(set, k, w) {
        Ok(dist) => dist.mean + z * dist.std_dev.unwrap_or(0.0),
        Err(_) => f64::NAN,
    }
}

fn empirical(set: &ScenarioSet, k: usize, w: &[f64], alpha: f64) -> f64 {
    scenario_scores(set, k, w)
        .and_then(|s| quantile_of(&s, alpha))
        .unwrap_or(f64::NAN)
}

/// Gaussian-surrogate solve; requires `0 < alpha < 1`.
pub fn solve_approx(
    set: &ScenarioSet,
    k: usize,
    target: &CfeTarget,
    bounds: &Bounds,
    settings: &SqpSettings,
) -> Result<Vec<f64>> {
    check_inputs(set, k, target, bounds)?;
    if target.is_almost_sure() {
        return Err(CfeError::invalid("the Gaussian surrogate needs alpha < 1"));
    }
    let z = normal_quantile(1.0 - target.alpha);
    let best = surrogate_quantile(set, k, &bounds.upper, z);
    if !(best >= target.p_c) {
        return Err(CfeError::Infeasible {
            load: k,
            target: target.p_c,
            measure: "gaussian quantile",
            max_attainable: best,
        });
    }
    let cost = CostModel::new(set);
    let gradient = cost.gradient();
    let problem = NlpProblem::new(|w: &[f64]| cost.value(w), box_of(bounds))
        .with_objective_gradient(move |_| Ok(gradient.clone()))
        .constraint(|w: &[f64]| surrogate_quantile(set, k, w, z) - target.p_c);
    let result = slsqp_solve(&problem, &bounds.upper, settings)?;
    if !result.is_feasible(settings.violation_tol) {
        return Err(CfeError::NonConvergence(format!(
            "surrogate solve ended infeasible ({:?})",
            result.status
        )));
    }
    Ok(result.w)
}

/// Largest empirical quantile over the box (attained at the upper bounds).
pub fn max_attainable_quantile(set: &ScenarioSet, k: usize, alpha: f64, bounds: &Bounds) -> Result<f64> {
    quantile_of(&scenario_scores(set, k, &bounds.upper)?, alpha)
}

/// Single-load solve on the empirical quantile constraint.
pub fn solve_single(
    set: &ScenarioSet,
    k: usize,
    target: &CfeTarget,
    bounds: &Bounds,
    options: &SolveOptions,
) -> Result<SolveReport> {
    check_inputs(set, k, target, bounds)?;
    let best = max_attainable_quantile(set, k, target.alpha, bounds)?;
    if best < target.p_c {
        return Err(CfeError::Infeasible {
            load: k,
            target: target.p_c,
            measure: "empirical quantile",
            max_attainable: best,
        });
    }

    let w0 = match &options.w0 {
        Some(w0) => {
            if !bounds.contains(w0) {
                return Err(CfeError::invalid("starting point lies outside the bounds"));
            }
            w0.clone()
        }
        None if target.is_almost_sure() => bounds.upper.clone(),
        None => match solve_approx(set, k, target, bounds, &options.sqp) {
            Ok(w) => w,
            Err(CfeError::Infeasible { .. }) | Err(CfeError::NonConvergence(_)) => bounds.upper.clone(),
            Err(e) => return Err(e),
        },
    };

    // the solver accepts violations up to its tolerance; shift the constraint by as much
    let margin = options.sqp.violation_tol.min(best - target.p_c);
    let cost = CostModel::new(set);
    let gradient = cost.gradient();
    let problem = NlpProblem::new(|w: &[f64]| cost.value(w), box_of(bounds))
        .with_objective_gradient(move |_| Ok(gradient.clone()))
        .constraint(|w: &[f64]| empirical(set, k, w, target.alpha) - target.p_c - margin);
    let result = slsqp_solve(&problem, &w0, &options.sqp)?;

    let mut w = result.w;
    let mut restored = false;
    if empirical(set, k, &w, target.alpha) < target.p_c {
        w = restore(set, k, target, &w, &bounds.upper);
        restored = true;
    }
    build_report(set, k, target, bounds, w, result.status, result.iterations, restored)
}

/// Bisection on `s` for the smallest feasible `w + s (upper - w)`.
fn restore(set: &ScenarioSet, k: usize, target: &CfeTarget, w: &[f64], upper: &[f64]) -> Vec<f64> {
    let along = |s: f64| -> Vec<f64> {
        w.iter()
            .zip(upper)
            .map(|(&x, &u)| (x + s * (u - x)).min(u))
            .collect()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..RESTORATION_STEPS {
        let mid = 0.5 * (lo + hi);
        if empirical(set, k, &along(mid), target.alpha) >= target.p_c {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    along(hi)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn build_report(
    set: &ScenarioSet,
    k: usize,
    target: &CfeTarget,
    bounds: &Bounds,
    weights: Vec<f64>,
    status: SqpStatus,
    iterations: usize,
    restored: bool,
) -> Result<SolveReport> {
    let scores = scenario_scores(set, k, &weights)?;
    let achieved_quantile = quantile_of(&scores, target.alpha)?;
    let hourly_cost: f64 = cost_coefficients(set).iter().zip(&weights).map(|(c, x)| c * x).sum();
    let binding = weights
        .iter()
        .zip(bounds.lower.iter().zip(&bounds.upper))
        .map(|(&x, (&lo, &hi))| {
            if x - lo <= BINDING_TOL {
                Binding::Lower
            } else if hi - x <= BINDING_TOL {
                Binding::Upper
            } else {
                Binding::Free
            }
        })
        .collect();
    Ok(SolveReport {
        load: k,
        target: *target,
        asset_ids: set.assets().iter().map(|a| a.id.clone()).collect(),
        hourly_cost,
        cost_per_mwh_load: hourly_cost / set.mean_load(k),
        achieved_quantile,
        achieved_mean: mean(&scores),
        over_procurement: over_procurement(set, k, &weights)?,
        binding,
        quantile_active: achieved_quantile - target.p_c <= ACTIVE_TOL,
        status,
        iterations,
        restored,
        weights,
    })
}
