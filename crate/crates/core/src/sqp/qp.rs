//! Primal active-set solver for the SQP search-direction subproblem
//!
//! ```text
//!     minimize    1/2 h' H h + g' h
//!     subject to  a_j' h + b_j >= 0        (linearized constraints)
//!                 lower <= h <= upper      (box, intersected with the trust radius)
//! ```
//!
//! The general constraints are made elastic with one shared slack `t >= 0`
//! priced at a large penalty, which gives a trivially feasible start
//! (`h = 0`, `t = max violation`) and never leaves the solver without a
//! step. A positive slack at the optimum means the linearization was
//! inconsistent and is reported through [`QpStep::relaxed`].

use nalgebra::{DMatrix, DVector};

use crate::error::{CfeError, Result};

/// Default price of the elastic slack.
pub const ELASTIC_PENALTY: f64 = 1e4;
const RELAXED_THRESHOLD: f64 = 1e-10;

/// Linearized inequality `normal' h + offset >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Clone, Debug)]
pub struct QpSubproblem<'a> {
    pub hessian: &'a DMatrix<f64>,
    pub gradient: &'a [f64],
    pub constraints: &'a [LinearConstraint],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    /// Infinity-norm cap on the step; `f64::INFINITY` disables it.
    pub trust_radius: f64,
    pub elastic_penalty: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpStep {
    pub step: Vec<f64>,
    /// Multiplier per linearized constraint (`>= 0`, zero when inactive).
    pub multipliers: Vec<f64>,
    pub elastic: f64,
    pub relaxed: bool,
    pub iterations: usize,
}

struct Row {
    normal: DVector<f64>,
    rhs: f64,
}

/// Solves the subproblem; see the module docs for the formulation.
pub fn solve_qp_subproblem(qp: &QpSubproblem<'_>) -> Result<QpStep> {
    let n = qp.gradient.len();
    if qp.hessian.nrows() != n || qp.hessian.ncols() != n || qp.lower.len() != n || qp.upper.len() != n {
        return Err(CfeError::invalid("QP dimensions disagree"));
    }
    let m = qp.constraints.len();
    if qp.constraints.iter().any(|c| c.normal.len() != n) {
        return Err(CfeError::invalid("QP constraint normal has the wrong length"));
    }
    let elastic = m > 0;
    let dim = if elastic { n + 1 } else { n };

    let mut hess = DMatrix::zeros(dim, dim);
    hess.view_mut((0, 0), (n, n)).copy_from(qp.hessian);
    let mut lin = DVector::zeros(dim);
    lin.rows_mut(0, n).copy_from_slice(qp.gradient);
    if elastic {
        hess[(n, n)] = 1.0;
        lin[n] = qp.elastic_penalty;
    }

    let mut rows: Vec<Row> = Vec::with_capacity(m + 2 * n + 1);
    for c in qp.constraints {
        let mut normal = DVector::zeros(dim);
        normal.rows_mut(0, n).copy_from_slice(&c.normal);
        normal[n] = 1.0;
        rows.push(Row {
            normal,
            rhs: -c.offset,
        });
    }
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        lower[i] = qp.lower[i].max(-qp.trust_radius);
        upper[i] = qp.upper[i].min(qp.trust_radius);
        if lower[i] > upper[i] {
            return Err(CfeError::invalid(format!("QP box is empty in coordinate {i}")));
        }
        if lower[i].is_finite() {
            let mut normal = DVector::zeros(dim);
            normal[i] = 1.0;
            rows.push(Row { normal, rhs: lower[i] });
        }
        if upper[i].is_finite() {
            let mut normal = DVector::zeros(dim);
            normal[i] = -1.0;
            rows.push(Row {
                normal,
                rhs: -upper[i],
            });
        }
    }
    if elastic {
        let mut normal = DVector::zeros(dim);
        normal[n] = 1.0;
        rows.push(Row { normal, rhs: 0.0 });
    }

    // feasible start: h = 0 pulled into the box, slack covering the worst violation
    let mut x = DVector::zeros(dim);
    for i in 0..n {
        x[i] = 0.0f64.clamp(lower[i], upper[i]);
    }
    if elastic {
        let worst = rows[..m]
            .iter()
            .map(|r| r.rhs - r.normal.dot(&x))
            .fold(0.0, f64::max);
        x[n] = worst;
    }

    let scale = 1.0 + hess.amax() + lin.amax();
    let step_tol = 1e-10;
    let mult_tol = 1e-10 * scale;
    let max_iter = 50 * (dim + rows.len()) + 100;
    let mut working: Vec<usize> = Vec::new();
    let mut multipliers = vec![0.0; rows.len()];

    for iteration in 0..max_iter {
        let grad = &hess * &x + &lin;
        let (p, lambda) = solve_equality_qp(&hess, &grad, &rows, &working)?;
        if p.amax() <= step_tol * (1.0 + x.amax()) {
            let most_negative = lambda
                .iter()
                .enumerate()
                .filter(|(_, &l)| l < -mult_tol)
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(pos, _)| pos);
            match most_negative {
                Some(pos) => {
                    working.remove(pos);
                }
                None => {
                    multipliers.iter_mut().for_each(|l| *l = 0.0);
                    for (pos, &row) in working.iter().enumerate() {
                        multipliers[row] = lambda[pos].max(0.0);
                    }
                    let t = if elastic { x[n].max(0.0) } else { 0.0 };
                    let step: Vec<f64> = (0..n).map(|i| x[i].clamp(lower[i], upper[i])).collect();
                    return Ok(QpStep {
                        step,
                        multipliers: multipliers[..m].to_vec(),
                        elastic: t,
                        relaxed: t > RELAXED_THRESHOLD,
                        iterations: iteration + 1,
                    });
                }
            }
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for (j, row) in rows.iter().enumerate() {
            if working.contains(&j) {
                continue;
            }
            let ap = row.normal.dot(&p);
            if ap < -1e-15 {
                let ratio = ((row.rhs - row.normal.dot(&x)) / ap).max(0.0);
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(j);
                }
            }
        }
        x += alpha * &p;
        if let Some(j) = blocking {
            working.push(j);
        }
    }
    Err(CfeError::NonConvergence("active-set QP hit its iteration limit".into()))
}

/// Minimizes the quadratic model along the working set; returns the step and
/// the working-set multipliers (`grad + H p = A_W' lambda`).
fn solve_equality_qp(
    hess: &DMatrix<f64>,
    grad: &DVector<f64>,
    rows: &[Row],
    working: &[usize],
) -> Result<(DVector<f64>, Vec<f64>)> {
    let n = hess.nrows();
    let w = working.len();
    let mut kkt = DMatrix::zeros(n + w, n + w);
    kkt.view_mut((0, 0), (n, n)).copy_from(hess);
    for (pos, &j) in working.iter().enumerate() {
        for i in 0..n {
            kkt[(n + pos, i)] = rows[j].normal[i];
            kkt[(i, n + pos)] = -rows[j].normal[i];
        }
    }
    let mut rhs = DVector::zeros(n + w);
    rhs.rows_mut(0, n).copy_from(&(-grad));
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| CfeError::NonConvergence("singular KKT system in QP subproblem".into()))?;
    let p = sol.rows(0, n).into_owned();
    let lambda = sol.rows(n, w).iter().copied().collect();
    Ok((p, lambda))
}
