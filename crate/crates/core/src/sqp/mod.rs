//! Sequential least-squares quadratic programming for
//!
//! ```text
//!     minimize    f(w)
//!     subject to  g_j(w) >= 0
//!                 lower <= w <= upper
//! ```
//!
//! Each iteration linearizes the constraints around the current iterate,
//! solves a QP on a quadratic model of the Lagrangian for a search direction
//! and picks a step along it by a Wolfe line search on the l1 exact-penalty
//! merit `f(w) + rho * sum_j max(0, -g_j(w))`. Gradients not supplied by the
//! caller are taken by finite differences. The Hessian model is damped BFGS
//! by default, or a finite-difference Hessian of the Lagrangian.
//!
//! The solver returns the best feasible iterate it visited, never panics, and
//! reports failures through [`SqpStatus`].

mod bfgs;
mod fd;
mod line_search;
mod qp;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CfeError, Result};

pub use bfgs::{DampedBfgs, EIGEN_FLOOR};
pub use fd::fd_gradient;
pub use line_search::{wolfe_line_search, LineSearchOutcome, LineSearchSettings};
pub use qp::{solve_qp_subproblem, LinearConstraint, QpStep, QpSubproblem, ELASTIC_PENALTY};

pub type ScalarFn<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;
pub type GradientFn<'a> = Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a>;

/// Per-coordinate bounds; infinite entries are allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxConstraints {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxConstraints {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        BoxConstraints { lower, upper }
    }

    pub fn unbounded(dim: usize) -> Self {
        BoxConstraints {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&x, (&lo, &hi))| lo <= x && x <= hi)
    }

    pub fn clamp(&self, w: &mut [f64]) {
        for (x, (&lo, &hi)) in w.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(lo, hi);
        }
    }
}

/// Inequality constraint `g(w) >= 0`.
pub struct Constraint<'a> {
    pub value: ScalarFn<'a>,
    pub gradient: Option<GradientFn<'a>>,
}

pub struct NlpProblem<'a> {
    pub objective: ScalarFn<'a>,
    pub objective_gradient: Option<GradientFn<'a>>,
    pub constraints: Vec<Constraint<'a>>,
    pub bounds: BoxConstraints,
}

impl<'a> NlpProblem<'a> {
    pub fn new(objective: impl Fn(&[f64]) -> f64 + 'a, bounds: BoxConstraints) -> Self {
        NlpProblem {
            objective: Box::new(objective),
            objective_gradient: None,
            constraints: Vec::new(),
            bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn with_objective_gradient(mut self, gradient: impl Fn(&[f64]) -> Result<Vec<f64>> + 'a) -> Self {
        self.objective_gradient = Some(Box::new(gradient));
        self
    }

    pub fn constraint(mut self, value: impl Fn(&[f64]) -> f64 + 'a) -> Self {
        self.constraints.push(Constraint {
            value: Box::new(value),
            gradient: None,
        });
        self
    }

    pub fn constraint_with_gradient(
        mut self,
        value: impl Fn(&[f64]) -> f64 + 'a,
        gradient: impl Fn(&[f64]) -> Result<Vec<f64>> + 'a,
    ) -> Self {
        self.constraints.push(Constraint {
            value: Box::new(value),
            gradient: Some(Box::new(gradient)),
        });
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    Bfgs,
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqpSettings {
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Relative objective change regarded as stalled.
    pub objective_tol: f64,
    pub step_tol: f64,
    pub violation_tol: f64,
    pub max_iterations: usize,
    pub c1: f64,
    pub c2: f64,
    pub line_search_trials: usize,
    pub hessian: HessianMode,
    pub elastic_penalty: f64,
    /// Infinity-norm cap on each QP step.
    pub trust_radius: f64,
}

impl Default for SqpSettings {
    fn default() -> Self {
        SqpSettings {
            fd_step: 1e-4,
            objective_tol: 1e-10,
            step_tol: 1e-8,
            violation_tol: 1e-6,
            max_iterations: 200,
            c1: 1e-4,
            c2: 0.9,
            line_search_trials: 30,
            hessian: HessianMode::Bfgs,
            elastic_penalty: ELASTIC_PENALTY,
            trust_radius: f64::INFINITY,
        }
    }
}

impl SqpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(CfeError::invalid("Wolfe parameters need 0 < c1 < c2 < 1"));
        }
        let positive = [
            self.fd_step,
            self.objective_tol,
            self.step_tol,
            self.violation_tol,
            self.elastic_penalty,
            self.trust_radius,
        ];
        if positive.iter().any(|&v| !(v > 0.0)) {
            return Err(CfeError::invalid("SQP tolerances, step sizes and penalties must be positive"));
        }
        if self.max_iterations == 0 || self.line_search_trials == 0 {
            return Err(CfeError::invalid("iteration limits must be positive"));
        }
        Ok(())
    }

    fn line_search(&self) -> LineSearchSettings {
        LineSearchSettings {
            c1: self.c1,
            c2: self.c2,
            max_trials: self.line_search_trials,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqpStatus {
    Converged,
    MaxIter,
    InfeasibleStartUnrepaired,
    LineSearchFailed,
}

/// One accepted iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub max_violation: f64,
    pub step_norm: f64,
    pub step_size: f64,
    pub penalty: f64,
    pub merit_before: f64,
    pub merit_after: f64,
    pub relaxed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqpResult {
    pub w: Vec<f64>,
    pub objective: f64,
    pub constraints: Vec<f64>,
    pub max_violation: f64,
    pub status: SqpStatus,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

impl SqpResult {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }

    /// Iteration trace as CSV with a header row.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from(
            "iteration,objective,max_violation,step_norm,step_size,penalty,merit_before,merit_after,relaxed\n",
        );
        for r in &self.trace {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.iteration,
                r.objective,
                r.max_violation,
                r.step_norm,
                r.step_size,
                r.penalty,
                r.merit_before,
                r.merit_after,
                r.relaxed
            );
        }
        out
    }
}

/// Function values and derivatives at one point.
struct Point {
    w: Vec<f64>,
    f: f64,
    grad_f: Vec<f64>,
    g: Vec<f64>,
    grad_g: Vec<Vec<f64>>,
}

impl Point {
    fn violation(&self) -> f64 {
        self.g.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max)
    }

    fn violation_sum(&self) -> f64 {
        self.g.iter().map(|&v| (-v).max(0.0)).sum()
    }

    fn lagrangian_gradient(&self, multipliers: &[f64]) -> Vec<f64> {
        let mut out = self.grad_f.clone();
        for (lambda, grad) in multipliers.iter().zip(&self.grad_g) {
            for (o, gi) in out.iter_mut().zip(grad) {
                *o -= lambda * gi;
            }
        }
        out
    }
}

struct Evaluator<'p, 'a> {
    problem: &'p NlpProblem<'a>,
    settings: &'p SqpSettings,
}

impl Evaluator<'_, '_> {
    fn values(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let f = (self.problem.objective)(w);
        let g: Vec<f64> = self.problem.constraints.iter().map(|c| (c.value)(w)).collect();
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(CfeError::NonFinite(w.to_vec()));
        }
        Ok((f, g))
    }

    fn point(&self, w: Vec<f64>) -> Result<Point> {
        let (f, g) = self.values(&w)?;
        let bounds = &self.problem.bounds;
        let grad_f = match &self.problem.objective_gradient {
            Some(grad) => grad(&w)?,
            None => fd_gradient(&self.problem.objective, &w, bounds, self.settings.fd_step)?,
        };
        let grad_g = self
            .problem
            .constraints
            .iter()
            .map(|c| match &c.gradient {
                Some(grad) => grad(&w),
                None => fd_gradient(&c.value, &w, bounds, self.settings.fd_step),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Point {
            w,
            f,
            grad_f,
            g,
            grad_g,
        })
    }

    fn merit(&self, w: &[f64], penalty: f64) -> f64 {
        match self.values(w) {
            Ok((f, g)) => f + penalty * g.iter().map(|&v| (-v).max(0.0)).sum::<f64>(),
            Err(_) => f64::NAN,
        }
    }

    /// Central-difference Hessian of the Lagrangian, floored to stay positive definite.
    fn fd_hessian(&self, at: &Point, multipliers: &[f64]) -> Result<DMatrix<f64>> {
        let n = at.w.len();
        let bounds = &self.problem.bounds;
        let mut hess = DMatrix::zeros(n, n);
        for i in 0..n {
            let h = self.settings.fd_step * at.w[i].abs().max(1.0);
            let up = (at.w[i] + h).min(bounds.upper[i]);
            let down = (at.w[i] - h).max(bounds.lower[i]);
            if up - down <= 0.0 {
                continue;
            }
            let mut wp = at.w.clone();
            wp[i] = up;
            let mut wm = at.w.clone();
            wm[i] = down;
            let gp = self.point(wp)?.lagrangian_gradient(multipliers);
            let gm = self.point(wm)?.lagrangian_gradient(multipliers);
            for j in 0..n {
                hess[(i, j)] = (gp[j] - gm[j]) / (up - down);
            }
        }
        Ok(hess)
    }
}

/// Runs SLSQP from `w0`, which must lie inside the box.
pub fn slsqp_solve(problem: &NlpProblem<'_>, w0: &[f64], settings: &SqpSettings) -> Result<SqpResult> {
    settings.validate()?;
    let n = problem.dim();
    if problem.bounds.upper.len() != n || w0.len() != n {
        return Err(CfeError::invalid(format!(
            "starting point has {} entries, problem dimension is {n}",
            w0.len()
        )));
    }
    if problem.bounds.lower.iter().zip(&problem.bounds.upper).any(|(lo, hi)| lo > hi) {
        return Err(CfeError::invalid("box bounds are inverted"));
    }
    if !problem.bounds.contains(w0) {
        return Err(CfeError::invalid(format!("starting point {w0:?} lies outside the box")));
    }

    let eval = Evaluator { problem, settings };
    let m = problem.constraints.len();
    let mut current = eval.point(w0.to_vec())?;
    let mut hessian = DampedBfgs::new(n);
    let mut penalty: f64 = 10.0;
    let mut trace = Vec::new();
    let mut status = SqpStatus::MaxIter;
    let feasible = |p: &Point| p.violation() <= settings.violation_tol;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> =
        feasible(&current).then(|| (current.f, current.w.clone(), current.g.clone()));

    let mut iterations = 0;
    while iterations < settings.max_iterations {
        iterations += 1;
        let linearized: Vec<LinearConstraint> = (0..m)
            .map(|j| LinearConstraint {
                normal: current.grad_g[j].clone(),
                offset: current.g[j],
            })
            .collect();
        let lower: Vec<f64> = (0..n).map(|i| problem.bounds.lower[i] - current.w[i]).collect();
        let upper: Vec<f64> = (0..n).map(|i| problem.bounds.upper[i] - current.w[i]).collect();
        let subproblem = |h: &DMatrix<f64>| {
            solve_qp_subproblem(&QpSubproblem {
                hessian: h,
                gradient: &current.grad_f,
                constraints: &linearized,
                lower: &lower,
                upper: &upper,
                trust_radius: settings.trust_radius,
                elastic_penalty: settings.elastic_penalty,
            })
        };
        let qp = match subproblem(hessian.matrix()) {
            Ok(step) => step,
            Err(_) => {
                hessian.reset();
                match subproblem(hessian.matrix()) {
                    Ok(step) => step,
                    Err(_) => {
                        status = SqpStatus::LineSearchFailed;
                        break;
                    }
                }
            }
        };
        let direction = qp.step;
        let step_norm = direction.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        if step_norm <= settings.step_tol {
            status = if feasible(&current) {
                SqpStatus::Converged
            } else {
                SqpStatus::InfeasibleStartUnrepaired
            };
            break;
        }

        let max_multiplier = qp.multipliers.iter().fold(0.0f64, |a, l| a.max(l.abs()));
        penalty = penalty.max(2.0 * max_multiplier);
        let merit_before = current.f + penalty * current.violation_sum();
        let linear_violation: f64 = linearized
            .iter()
            .map(|c| {
                let v = c.offset + c.normal.iter().zip(&direction).map(|(a, d)| a * d).sum::<f64>();
                (-v).max(0.0)
            })
            .sum();
        let objective_slope: f64 = current.grad_f.iter().zip(&direction).map(|(g, d)| g * d).sum();
        let slope = objective_slope + penalty * (linear_violation - current.violation_sum());
        if slope >= -1e-14 * (1.0 + merit_before.abs()) {
            status = if feasible(&current) {
                SqpStatus::Converged
            } else {
                SqpStatus::LineSearchFailed
            };
            break;
        }

        let outcome = match wolfe_line_search(
            |w: &[f64]| eval.merit(w, penalty),
            &current.w,
            &direction,
            slope,
            &settings.line_search(),
        ) {
            Ok(o) => o,
            Err(_) => {
                status = if feasible(&current) && -slope <= 1e-6 * (1.0 + merit_before.abs()) {
                    SqpStatus::Converged
                } else {
                    SqpStatus::LineSearchFailed
                };
                break;
            }
        };

        let mut next_w: Vec<f64> = current
            .w
            .iter()
            .zip(&direction)
            .map(|(x, d)| x + outcome.step * d)
            .collect();
        problem.bounds.clamp(&mut next_w);
        let next = eval.point(next_w)?;

        let s: Vec<f64> = next.w.iter().zip(&current.w).map(|(a, b)| a - b).collect();
        match settings.hessian {
            HessianMode::Bfgs => {
                let y: Vec<f64> = next
                    .lagrangian_gradient(&qp.multipliers)
                    .iter()
                    .zip(current.lagrangian_gradient(&qp.multipliers))
                    .map(|(a, b)| a - b)
                    .collect();
                hessian.update(&s, &y);
            }
            HessianMode::FiniteDifference => {
                hessian.set(eval.fd_hessian(&next, &qp.multipliers)?);
            }
        }

        let actual_step = s.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        let merit_after = next.f + penalty * next.violation_sum();
        trace.push(IterationRecord {
            iteration: iterations,
            objective: next.f,
            max_violation: next.violation(),
            step_norm: actual_step,
            step_size: outcome.step,
            penalty,
            merit_before,
            merit_after,
            relaxed: qp.relaxed,
        });

        let objective_change = (next.f - current.f).abs();
        if feasible(&next) && best.as_ref().is_none_or(|(f, _, _)| next.f < *f) {
            best = Some((next.f, next.w.clone(), next.g.clone()));
        }
        let stalled = objective_change <= settings.objective_tol * (1.0 + current.f.abs());
        current = next;
        if actual_step <= settings.step_tol {
            status = if feasible(&current) {
                SqpStatus::Converged
            } else {
                SqpStatus::LineSearchFailed
            };
            break;
        }
        if feasible(&current) && stalled {
            status = SqpStatus::Converged;
            break;
        }
    }

    let (w, objective, constraints) = match best {
        Some((f, w, g)) => (w, f, g),
        None => {
            status = SqpStatus::InfeasibleStartUnrepaired;
            (current.w.clone(), current.f, current.g.clone())
        }
    };
    let max_violation = constraints.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
    Ok(SqpResult {
        w,
        objective,
        constraints,
        max_violation,
        status,
        iterations,
        trace,
    })
}
