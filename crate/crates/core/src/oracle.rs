//! Brute-force verifiers for small instances.
//!
//! Everything here recomputes scores from the raw tensors with plain loops
//! and decides the quantile constraint by counting scenarios, so it shares
//! no arithmetic with [`crate::metrics`] or the solvers.
//!
//! The lattice search exploits that scores never decrease when any weight
//! grows: for fixed leading coordinates the cheapest feasible point along
//! the last axis is the first feasible one, and that index can only fall as
//! the second-to-last coordinate rises. Walking this staircase visits the
//! same optimum as full enumeration in `O(n^{I-1})` evaluations;
//! [`grid_search_exhaustive`] is the literal scan.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CfeError, Result};
use crate::metrics::{Bounds, CfeTarget};
use crate::scenario::ScenarioSet;

pub const MAX_ORACLE_ASSETS: usize = 3;
/// Allowance for summation-order rounding when comparing a score with `p_C`.
pub const SCORE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOptimum {
    pub w: Vec<f64>,
    /// Hourly cost `sum_i c_i g_i w_i`.
    pub cost: f64,
    /// Number of lattice points whose feasibility was evaluated.
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCheck {
    pub feasible: bool,
    pub worst_scenario: usize,
    pub worst_score: f64,
    /// Scenarios with score `>= p_C`.
    pub meeting: usize,
}

/// Annual score of every scenario, computed directly.
pub fn direct_scores(set: &ScenarioSet, k: usize, w: &[f64]) -> Vec<f64> {
    let hours = set.hours();
    (0..set.scenarios())
        .map(|n| {
            let load = set.load(k, n);
            let mut total = 0.0;
            for t in 0..hours {
                let mut pi = 0.0;
                for (i, &wi) in w.iter().enumerate() {
                    pi += wi * set.generation(i, n)[t];
                }
                total += (pi / load[t]).min(1.0);
            }
            total / hours as f64
        })
        .collect()
}

/// Number of scenarios that must meet the target: the least integer `>= alpha N`.
pub fn required_count(n: usize, alpha: f64) -> usize {
    let exact = alpha * n as f64;
    let mut m = exact.floor() as usize;
    while (m as f64) < exact - 1e-9 {
        m += 1;
    }
    m.clamp(1, n)
}

/// Whether every scenario reaches `p_c`; reports the worst scenario either way.
pub fn check_feasible_all(set: &ScenarioSet, k: usize, w: &[f64], p_c: f64) -> Result<FeasibilityCheck> {
    check_feasible(set, k, w, &CfeTarget { p_c, alpha: 1.0 })
}

/// Whether at least `ceil(alpha N)` scenarios reach `p_C`.
pub fn check_feasible(set: &ScenarioSet, k: usize, w: &[f64], target: &CfeTarget) -> Result<FeasibilityCheck> {
    set.check_load(k)?;
    if w.len() != set.asset_count() {
        return Err(CfeError::invalid("weight vector has the wrong length"));
    }
    let scores = direct_scores(set, k, w);
    let (worst_scenario, worst_score) = scores
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (n, s)| if s < acc.1 { (n, s) } else { acc });
    let meeting = scores.iter().filter(|&&s| s >= target.p_c - SCORE_TOL).count();
    Ok(FeasibilityCheck {
        feasible: meeting >= required_count(scores.len(), target.alpha),
        worst_scenario,
        worst_score,
        meeting,
    })
}

/// Precomputed `G_i / L` for fast repeated feasibility tests.
struct RatioTable {
    ratios: Vec<Vec<f64>>,
    scenarios: usize,
    hours: usize,
    needed: usize,
    p_c: f64,
}

impl RatioTable {
    fn new(set: &ScenarioSet, k: usize, target: &CfeTarget) -> Self {
        let (scenarios, hours) = (set.scenarios(), set.hours());
        let ratios = (0..set.asset_count())
            .map(|i| {
                let mut r = Vec::with_capacity(scenarios * hours);
                for n in 0..scenarios {
                    r.extend(set.generation(i, n).iter().zip(set.load(k, n)).map(|(g, l)| g / l));
                }
                r
            })
            .collect();
        RatioTable {
            ratios,
            scenarios,
            hours,
            needed: required_count(scenarios, target.alpha),
            p_c: target.p_c,
        }
    }

    fn feasible(&self, w: &[f64]) -> bool {
        let (mut meeting, mut missing) = (0, 0);
        let allowed_misses = self.scenarios - self.needed;
        for n in 0..self.scenarios {
            let base = n * self.hours;
            let mut total = 0.0;
            for t in base..base + self.hours {
                let mut x = 0.0;
                for (r, &wi) in self.ratios.iter().zip(w) {
                    x += wi * r[t];
                }
                total += x.min(1.0);
            }
            if total / self.hours as f64 >= self.p_c {
                meeting += 1;
                if meeting >= self.needed {
                    return true;
                }
            } else {
                missing += 1;
                if missing > allowed_misses {
                    return false;
                }
            }
        }
        meeting >= self.needed
    }
}

/// Lattice `{lo, lo + res, ...}` capped by `hi`, which is always included.
fn axis(lo: f64, hi: f64, resolution: f64) -> Vec<f64> {
    let mut points = Vec::new();
    let mut j = 0usize;
    loop {
        let x = lo + j as f64 * resolution;
        if x >= hi - 1e-12 {
            break;
        }
        points.push(x);
        j += 1;
    }
    points.push(hi);
    points
}

fn prepare(
    set: &ScenarioSet,
    k: usize,
    target: &CfeTarget,
    bounds: &Bounds,
    resolution: f64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    set.check_load(k)?;
    // a zero target is allowed here: every point qualifies
    if !(0.0..=1.0).contains(&target.p_c) || !(target.alpha > 0.0 && target.alpha <= 1.0) {
        return Err(CfeError::invalid(format!("invalid target {target:?}")));
    }
    bounds.validate(set.asset_count())?;
    let dim = set.asset_count();
    if dim == 0 || dim > MAX_ORACLE_ASSETS {
        return Err(CfeError::invalid(format!(
            "the grid oracle handles 1 to {MAX_ORACLE_ASSETS} assets, got {dim}"
        )));
    }
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(CfeError::invalid(format!("resolution must lie in (0, 0.1], got {resolution}")));
    }
    let axes = (0..dim)
        .map(|i| axis(bounds.lower[i], bounds.upper[i], resolution))
        .collect();
    // independent cost coefficients c_i * mean(G_i)
    let coefficients = set
        .assets()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut sum = 0.0;
            for n in 0..set.scenarios() {
                sum += set.generation(i, n).iter().sum::<f64>();
            }
            a.cost * sum / (set.scenarios() * set.hours()) as f64
        })
        .collect();
    Ok((axes, coefficients))
}

fn cost_of(coefficients: &[f64], w: &[f64]) -> f64 {
    coefficients.iter().zip(w).map(|(c, x)| c * x).sum()
}

/// Keeps the cheaper candidate; earlier (lexicographically smaller) wins ties.
fn better(best: Option<(f64, Vec<f64>)>, candidate: (f64, Vec<f64>)) -> Option<(f64, Vec<f64>)> {
    match best {
        Some((cost, w)) if cost <= candidate.0 + 1e-12 * cost.abs().max(1.0) => Some((cost, w)),
        _ => Some(candidate),
    }
}

fn no_feasible_point(k: usize, target: &CfeTarget) -> CfeError {
    CfeError::Infeasible {
        load: k,
        target: target.p_c,
        measure: "lattice quantile",
        max_attainable: f64::NAN,
    }
}

/// Cheapest feasible lattice point (`I <= 3`).
pub fn grid_search_optimum(
    set: &ScenarioSet,
    k: usize,
    target: &CfeTarget,
    bounds: &Bounds,
    resolution: f64,
) -> Result<OracleOptimum> {
    let (axes, coefficients) = prepare(set, k, target, bounds, resolution)?;
    let table = RatioTable::new(set, k, target);
    let dim = axes.len();
    let last = axes[dim - 1].len();

    if dim == 1 {
        let mut evaluations = 0;
        for &x in &axes[0] {
            evaluations += 1;
            if table.feasible(&[x]) {
                return Ok(OracleOptimum {
                    w: vec![x],
                    cost: cost_of(&coefficients, &[x]),
                    evaluations,
                });
            }
        }
        return Err(no_feasible_point(k, target));
    }

    // leading coordinates for dim == 3; a single empty prefix for dim == 2
    let prefixes: Vec<Vec<f64>> = if dim == 3 {
        axes[0].iter().map(|&x| vec![x]).collect()
    } else {
        vec![Vec::new()]
    };
    let results: Vec<(Option<(f64, Vec<f64>)>, usize)> = prefixes
        .par_iter()
        .map(|prefix| {
            let mut best = None;
            let mut evaluations = 0;
            let mut c = last;
            let mut point = prefix.clone();
            point.extend([0.0, 0.0]);
            for &b in &axes[dim - 2] {
                point[dim - 2] = b;
                while c > 0 {
                    point[dim - 1] = axes[dim - 1][c - 1];
                    evaluations += 1;
                    if table.feasible(&point) {
                        c -= 1;
                    } else {
                        break;
                    }
                }
                if c < last {
                    point[dim - 1] = axes[dim - 1][c];
                    best = better(best, (cost_of(&coefficients, &point), point.clone()));
                }
            }
            (best, evaluations)
        })
        .collect();

    let mut best = None;
    let mut evaluations = 0;
    for (candidate, count) in results {
        evaluations += count;
        if let Some(candidate) = candidate {
            best = better(best, candidate);
        }
    }
    let (cost, w) = best.ok_or_else(|| no_feasible_point(k, target))?;
    Ok(OracleOptimum { w, cost, evaluations })
}

/// Literal scan of every lattice point; for cross-checking on tiny lattices.
pub fn grid_search_exhaustive(
    set: &ScenarioSet,
    k: usize,
    target: &CfeTarget,
    bounds: &Bounds,
    resolution: f64,
) -> Result<OracleOptimum> {
    let (axes, coefficients) = prepare(set, k, target, bounds, resolution)?;
    let mut best = None;
    let mut evaluations = 0;
    let mut index = vec![0usize; axes.len()];
    'outer: loop {
        let point: Vec<f64> = index.iter().zip(&axes).map(|(&j, a)| a[j]).collect();
        evaluations += 1;
        if check_feasible(set, k, &point, target)?.feasible {
            best = better(best, (cost_of(&coefficients, &point), point));
        }
        for d in (0..axes.len()).rev() {
            index[d] += 1;
            if index[d] < axes[d].len() {
                continue 'outer;
            }
            index[d] = 0;
        }
        break;
    }
    let (cost, w) = best.ok_or_else(|| no_feasible_point(k, target))?;
    Ok(OracleOptimum { w, cost, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{AssetKind, AssetSpec};

    fn toy() -> ScenarioSet {
        let asset = AssetSpec {
            id: "a".into(),
            kind: AssetKind::Other,
            capacity: 100.0,
            cost: 10.0,
            deterministic: false,
        };
        ScenarioSet::new(vec![asset], vec!["l".into()], 1, 2, vec![100.0, 50.0], vec![vec![100.0, 100.0]]).unwrap()
    }

    #[test]
    fn toy_lattice_optimum() {
        let target = CfeTarget::new(0.7, 1.0).unwrap();
        let opt = grid_search_optimum(&toy(), 0, &target, &Bounds::unit(1), 0.001).unwrap();
        assert!((opt.w[0] - 0.934).abs() < 1e-9);
        assert!((opt.cost - 700.5).abs() < 1e-6);
    }

    #[test]
    fn zero_target_picks_lower_corner() {
        let target = CfeTarget { p_c: 0.0, alpha: 1.0 };
        let bounds = Bounds {
            lower: vec![0.25],
            upper: vec![1.0],
        };
        let opt = grid_search_optimum(&toy(), 0, &target, &bounds, 0.05).unwrap();
        assert_eq!(opt.w, vec![0.25]);
    }

    #[test]
    fn axis_includes_both_endpoints() {
        let a = axis(0.0, 1.0, 0.3);
        assert_eq!(a.first(), Some(&0.0));
        assert_eq!(a.last(), Some(&1.0));
        assert_eq!(a.len(), 5);
        assert_eq!(axis(0.2, 0.2, 0.1), vec![0.2]);
    }

    #[test]
    fn required_count_matches_ceil() {
        assert_eq!(required_count(20, 0.95), 19);
        assert_eq!(required_count(10, 0.5), 5);
        assert_eq!(required_count(7, 1.0), 7);
        assert_eq!(required_count(3, 0.01), 1);
    }

    #[test]
    fn infeasible_target_is_an_error() {
        let target = CfeTarget::new(0.9, 1.0).unwrap();
        assert!(grid_search_optimum(&toy(), 0, &target, &Bounds::unit(1), 0.01).is_err());
    }

    #[test]
    fn feasibility_reports_worst_scenario() {
        let set = toy();
        let ok = check_feasible_all(&set, 0, &[1.0], 0.7).unwrap();
        assert!(ok.feasible);
        let bad = check_feasible_all(&set, 0, &[0.0], 0.1).unwrap();
        assert!(!bad.feasible);
        assert_eq!(bad.worst_scenario, 0);
    }
}
