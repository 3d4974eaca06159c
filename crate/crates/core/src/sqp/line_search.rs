//! Weak-Wolfe line search on a (possibly nonsmooth) merit function.
//!
//! Bracketing by bisection: a step failing sufficient decrease becomes the
//! upper end of the bracket, a step failing the curvature condition the
//! lower end. Steps are capped at 1, the full SQP step; a full step that
//! still shows strong descent is accepted as is. When no Wolfe step turns up
//! within the trial budget, plain Armijo backtracking takes over.

use crate::error::{CfeError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchSettings {
    /// Sufficient-decrease parameter.
    pub c1: f64,
    /// Curvature parameter, `c1 < c2 < 1`.
    pub c2: f64,
    pub max_trials: usize,
}

impl Default for LineSearchSettings {
    fn default() -> Self {
        LineSearchSettings {
            c1: 1e-4,
            c2: 0.9,
            max_trials: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub value: f64,
    pub evaluations: usize,
    /// False when the step came from the backtracking fallback or is a full
    /// step still descending.
    pub curvature_satisfied: bool,
}

/// Finds `gamma in (0, 1]` with
/// `phi(gamma) <= phi(0) + c1 gamma slope` and `phi'(gamma) >= c2 slope`,
/// where `phi(gamma) = merit(w + gamma h)` and `slope` is the directional
/// derivative (or a model upper bound on it) at `gamma = 0`.
pub fn wolfe_line_search<F>(
    mut merit: F,
    w: &[f64],
    direction: &[f64],
    slope: f64,
    settings: &LineSearchSettings,
) -> Result<LineSearchOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(slope < 0.0) {
        return Err(CfeError::NonConvergence(format!(
            "line search needs a descent direction, slope is {slope}"
        )));
    }
    let mut point = w.to_vec();
    let mut evaluations = 0usize;
    let mut phi = |gamma: f64| -> f64 {
        for ((p, &x), &d) in point.iter_mut().zip(w).zip(direction) {
            *p = x + gamma * d;
        }
        evaluations += 1;
        merit(&point)
    };
    let phi0 = phi(0.0);
    if !phi0.is_finite() {
        return Err(CfeError::NonFinite(w.to_vec()));
    }
    let armijo = |gamma: f64, value: f64| value <= phi0 + settings.c1 * gamma * slope;

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut lo_value = phi0;
    let mut gamma = 1.0;
    for _ in 0..settings.max_trials {
        let value = phi(gamma);
        if !value.is_finite() || !armijo(gamma, value) {
            hi = gamma;
        } else {
            // backward difference keeps probes inside the segment
            let delta = 1e-7 * gamma.max(1e-3);
            let before = phi(gamma - delta);
            let derivative = (value - before) / delta;
            if derivative >= settings.c2 * slope {
                return Ok(LineSearchOutcome {
                    step: gamma,
                    value,
                    evaluations,
                    curvature_satisfied: true,
                });
            }
            if gamma >= 1.0 {
                return Ok(LineSearchOutcome {
                    step: 1.0,
                    value,
                    evaluations,
                    curvature_satisfied: false,
                });
            }
            lo = gamma;
            lo_value = value;
        }
        gamma = 0.5 * (lo + hi);
    }
    if lo > 0.0 {
        return Ok(LineSearchOutcome {
            step: lo,
            value: lo_value,
            evaluations,
            curvature_satisfied: false,
        });
    }
    let mut gamma = hi;
    for _ in 0..settings.max_trials {
        gamma *= 0.5;
        let value = phi(gamma);
        if value.is_finite() && armijo(gamma, value) {
            return Ok(LineSearchOutcome {
                step: gamma,
                value,
                evaluations,
                curvature_satisfied: false,
            });
        }
    }
    Err(CfeError::NonConvergence("line search found no acceptable step".into()))
}
