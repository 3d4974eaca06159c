//! CFE score arithmetic: capped hourly ratios, annual score distributions,
//! quantiles, cost metrics, procurement shortfall and its value-at-risk.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CfeError, Result};
use crate::numeric::{mean, normal_quantile, pairwise_sum, robust_ceil};
use crate::scenario::ScenarioSet;

/// Below this many (scenario, hour) cells the per-scenario loop stays serial.
const PARALLEL_CELLS: usize = 1 << 16;

/// Target score `p_C` guaranteed with probability `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfeTarget {
    pub p_c: f64,
    pub alpha: f64,
}

impl CfeTarget {
    pub fn new(p_c: f64, alpha: f64) -> Result<Self> {
        let target = CfeTarget { p_c, alpha };
        target.validate()?;
        Ok(target)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_c > 0.0 && self.p_c <= 1.0) {
            return Err(CfeError::invalid(format!("CFE target must lie in (0, 1], got {}", self.p_c)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(CfeError::invalid(format!(
                "guarantee level must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Almost-sure constraint: every scenario must meet the target.
    pub fn is_almost_sure(&self) -> bool {
        self.alpha >= 1.0
    }
}

/// Per-asset procurement box `[lower_i, upper_i]` inside `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unit(dim: usize) -> Self {
        Bounds {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn uniform(dim: usize, upper: f64) -> Self {
        Bounds {
            lower: vec![0.0; dim],
            upper: vec![upper; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.lower.len() != dim || self.upper.len() != dim {
            return Err(CfeError::invalid(format!(
                "bounds have {} / {} entries, expected {dim}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(CfeError::invalid(format!(
                    "bounds for asset {i} must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.len() == self.dim()
            && w
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&lo, &hi))| lo <= x && x <= hi)
    }
}

/// Procured fraction of each asset together with its feasible box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights {
    w: Vec<f64>,
    bounds: Bounds,
}

impl PortfolioWeights {
    pub fn new(w: Vec<f64>, bounds: Bounds) -> Result<Self> {
        bounds.validate(w.len())?;
        if !bounds.contains(&w) {
            return Err(CfeError::invalid(format!("weights {w:?} violate their bounds")));
        }
        Ok(PortfolioWeights { w, bounds })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }
}

/// Annual CFE scores across scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (divisor `N - 1`); absent when `N = 1`.
    pub std_dev: Option<f64>,
}

impl ScoreDistribution {
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(CfeError::invalid("score distribution is empty"));
        }
        let mu = mean(&scores);
        let std_dev = (scores.len() > 1).then(|| {
            let dev: Vec<f64> = scores.iter().map(|s| (s - mu) * (s - mu)).collect();
            (pairwise_sum(&dev) / (scores.len() - 1) as f64).sqrt()
        });
        Ok(ScoreDistribution {
            scores,
            mean: mu,
            std_dev,
        })
    }

    pub fn min(&self) -> f64 {
        self.scores.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `min(pi / load, 1)`.
pub fn hourly_ratio(pi_t: f64, load_t: f64) -> Result<f64> {
    if !(load_t > 0.0) {
        return Err(CfeError::invalid(format!("load must be positive, got {load_t}")));
    }
    if !(pi_t >= 0.0) {
        return Err(CfeError::invalid(format!("procured energy must be nonnegative, got {pi_t}")));
    }
    Ok((pi_t / load_t).min(1.0))
}

fn check_weights(set: &ScenarioSet, k: usize, w: &[f64]) -> Result<()> {
    set.check_load(k)?;
    if w.len() != set.asset_count() {
        return Err(CfeError::invalid(format!(
            "dimension mismatch: {} weights for {} assets",
            w.len(),
            set.asset_count()
        )));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(CfeError::invalid("weights must be finite"));
    }
    Ok(())
}

/// Fills `buf` with `pi(t) = sum_i w_i G_i^(n)(t)` for one scenario.
fn portfolio_into(set: &ScenarioSet, n: usize, w: &[f64], buf: &mut [f64]) {
    buf.fill(0.0);
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for (b, &g) in buf.iter_mut().zip(set.generation(i, n)) {
            *b += wi * g;
        }
    }
}

/// Capped hourly ratios of one scenario, written into `buf`.
fn ratios_into(set: &ScenarioSet, k: usize, n: usize, w: &[f64], buf: &mut [f64]) {
    portfolio_into(set, n, w, buf);
    for (b, &l) in buf.iter_mut().zip(set.load(k, n)) {
        *b = (*b / l).min(1.0);
    }
}

fn per_scenario<F>(set: &ScenarioSet, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut Vec<f64>) -> f64 + Sync,
{
    let hours = set.hours();
    if set.scenarios() * hours < PARALLEL_CELLS {
        let mut buf = vec![0.0; hours];
        (0..set.scenarios()).map(|n| f(n, &mut buf)).collect()
    } else {
        (0..set.scenarios())
            .into_par_iter()
            .map_init(|| vec![0.0; hours], |buf, n| f(n, buf))
            .collect()
    }
}

/// Per-scenario annual scores `(1/T) sum_t min(pi(t)/L(t), 1)`.
pub fn scenario_scores(set: &ScenarioSet, k: usize, w: &[f64]) -> Result<Vec<f64>> {
    check_weights(set, k, w)?;
    let hours = set.hours() as f64;
    Ok(per_scenario(set, |n, buf| {
        ratios_into(set, k, n, w, buf);
        pairwise_sum(buf) / hours
    }))
}

pub fn annual_scores(set: &ScenarioSet, k: usize, w: &[f64]) -> Result<ScoreDistribution> {
    ScoreDistribution::from_scores(scenario_scores(set, k, w)?)
}

/// Order-statistic rank `k = N - ceil(alpha N) + 1`, clamped to `[1, N]`.
pub fn quantile_rank(n: usize, alpha: f64) -> usize {
    let needed = robust_ceil(alpha * n as f64) as i64;
    (n as i64 - needed + 1).clamp(1, n as i64) as usize
}

/// Lower empirical `(1 - alpha)` quantile of a score sample.
///
/// `quantile >= p` holds exactly when at least `ceil(alpha N)` scores are
/// `>= p`.
pub fn quantile_of(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(CfeError::invalid("cannot take a quantile of an empty sample"));
    }
    let rank = quantile_rank(scores.len(), alpha);
    let mut sorted = scores.to_vec();
    let (_, kth, _) = sorted.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*kth)
}

pub fn empirical_quantile(dist: &ScoreDistribution, alpha: f64) -> Result<f64> {
    quantile_of(&dist.scores, alpha)
}

/// Gaussian approximation `mu + Phi^{-1}(1 - alpha) sigma`.
pub fn gaussian_quantile(dist: &ScoreDistribution, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CfeError::invalid(format!(
            "gaussian quantile needs 0 < alpha < 1, got {alpha}"
        )));
    }
    let sigma = dist
        .std_dev
        .ok_or_else(|| CfeError::invalid("gaussian quantile needs at least two scenarios"))?;
    if !sigma.is_finite() {
        return Err(CfeError::invalid("score standard deviation is not finite"));
    }
    if sigma == 0.0 {
        return Ok(dist.mean);
    }
    Ok(dist.mean + normal_quantile(1.0 - alpha) * sigma)
}

/// Expected hourly procurement cost `sum_i c_i g_i w_i` in USD per hour.
pub fn portfolio_cost(set: &ScenarioSet, w: &[f64]) -> f64 {
    cost_coefficients(set)
        .iter()
        .zip(w)
        .map(|(c, x)| c * x)
        .sum()
}

/// `c_i * g_i` per asset.
pub fn cost_coefficients(set: &ScenarioSet) -> Vec<f64> {
    set.assets()
        .iter()
        .zip(set.average_generation())
        .map(|(a, g)| a.cost * g)
        .collect()
}

/// Hourly cost divided by the load's grand mean, USD per MWh of load.
pub fn cost_per_mwh_load(set: &ScenarioSet, k: usize, w: &[f64]) -> Result<f64> {
    check_weights(set, k, w)?;
    Ok(portfolio_cost(set, w) / set.mean_load(k))
}

/// Mean over scenarios and hours of the uncapped ratio `pi(t) / L(t)`.
pub fn over_procurement(set: &ScenarioSet, k: usize, w: &[f64]) -> Result<f64> {
    check_weights(set, k, w)?;
    let per = per_scenario(set, |n, buf| {
        portfolio_into(set, n, w, buf);
        for (b, &l) in buf.iter_mut().zip(set.load(k, n)) {
            *b /= l;
        }
        pairwise_sum(buf)
    });
    Ok(pairwise_sum(&per) / (set.scenarios() * set.hours()) as f64)
}

/// Relative procurement shortfall `Y = sum_t min(pi(t) - L(t), 0) / L(t)`
/// per scenario; always `<= 0`.
pub fn shortfall(set: &ScenarioSet, k: usize, w: &[f64]) -> Result<Vec<f64>> {
    check_weights(set, k, w)?;
    Ok(per_scenario(set, |n, buf| {
        portfolio_into(set, n, w, buf);
        for (b, &l) in buf.iter_mut().zip(set.load(k, n)) {
            *b = ((*b - l) / l).min(0.0);
        }
        pairwise_sum(buf)
    }))
}

/// Value-at-risk of the shortfall: `-Y_(j)` with `j = max(1, ceil((1 - beta) N))`.
pub fn shortfall_var(y: &[f64], beta: f64) -> Result<f64> {
    if y.is_empty() {
        return Err(CfeError::invalid("shortfall sample is empty"));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(CfeError::invalid(format!("VaR level must lie in [0, 1], got {beta}")));
    }
    let rank = (robust_ceil((1.0 - beta) * y.len() as f64) as usize).clamp(1, y.len());
    let mut sorted = y.to_vec();
    let (_, kth, _) = sorted.select_nth_unstable_by(rank - 1, f64::total_cmp);
    let var = -*kth;
    Ok(if var == 0.0 { 0.0 } else { var })
}

/// Scenario-averaged hourly CFE ratio arranged hour-of-day by day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    /// `values[h][d]` for hour of day `h` and day `d`.
    pub values: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn days(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn mean(&self) -> f64 {
        let flat: Vec<f64> = self.values.iter().flatten().copied().collect();
        mean(&flat)
    }
}

pub fn hourly_heatmap(set: &ScenarioSet, k: usize, w: &[f64]) -> Result<Heatmap> {
    check_weights(set, k, w)?;
    let hours = set.hours();
    if hours % 24 != 0 {
        return Err(CfeError::invalid(format!(
            "heatmap needs a whole number of days, horizon is {hours} hours"
        )));
    }
    let days = hours / 24;
    let mut buf = vec![0.0; hours];
    // column per hour, pairwise-summed over scenarios
    let mut per_hour = vec![Vec::with_capacity(set.scenarios()); hours];
    for n in 0..set.scenarios() {
        ratios_into(set, k, n, w, &mut buf);
        for (acc, &r) in per_hour.iter_mut().zip(&buf) {
            acc.push(r);
        }
    }
    let scenarios = set.scenarios() as f64;
    let mut values = vec![vec![0.0; days]; 24];
    for (t, column) in per_hour.iter().enumerate() {
        values[t % 24][t / 24] = pairwise_sum(column) / scenarios;
    }
    Ok(Heatmap { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{AssetKind, AssetSpec};

    fn one_asset(gen: Vec<f64>, load: Vec<f64>, scenarios: usize) -> ScenarioSet {
        let hours = gen.len() / scenarios;
        ScenarioSet::new(
            vec![AssetSpec {
                id: "a".into(),
                kind: AssetKind::Other,
                capacity: 1000.0,
                cost: 10.0,
                deterministic: false,
            }],
            vec!["load".into()],
            scenarios,
            hours,
            gen,
            vec![load],
        )
        .unwrap()
    }

    #[test]
    fn hourly_ratio_examples() {
        assert_eq!(hourly_ratio(50.0, 100.0).unwrap(), 0.5);
        assert_eq!(hourly_ratio(130.0, 100.0).unwrap(), 1.0);
        assert_eq!(hourly_ratio(0.0, 100.0).unwrap(), 0.0);
        assert!(hourly_ratio(1.0, 0.0).is_err());
    }

    #[test]
    fn annual_score_examples() {
        let set = one_asset(vec![100.0, 50.0], vec![100.0, 100.0], 1);
        assert_eq!(annual_scores(&set, 0, &[1.0]).unwrap().scores, vec![0.75]);
        assert_eq!(annual_scores(&set, 0, &[0.0]).unwrap().scores, vec![0.0]);
        // capped sum evaluated by hand: (min(1.5, 1) + min(0.5, 1)) / 2
        let set = one_asset(vec![300.0, 100.0], vec![100.0, 100.0], 1);
        assert_eq!(annual_scores(&set, 0, &[0.5]).unwrap().scores, vec![0.75]);
        assert!(annual_scores(&set, 0, &[0.5, 0.5]).is_err());
        assert!(annual_scores(&set, 1, &[0.5]).is_err());
    }

    #[test]
    fn empirical_quantile_examples() {
        let d = ScoreDistribution::from_scores(vec![1.0, 0.9, 0.8, 0.95]).unwrap();
        assert_eq!(empirical_quantile(&d, 0.75).unwrap(), 0.9);
        assert_eq!(empirical_quantile(&d, 1.0).unwrap(), 0.8);
        let scores: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        let d = ScoreDistribution::from_scores(scores).unwrap();
        assert_eq!(empirical_quantile(&d, 0.95).unwrap(), 51.0);
        assert!(quantile_of(&[], 0.5).is_err());
    }

    #[test]
    fn quantile_rank_agrees_with_counting_definition() {
        // enumerate: the largest threshold met by at least ceil(alpha N) scores
        for n in 1..40usize {
            let scores: Vec<f64> = (0..n).map(|i| ((i * 7919) % n) as f64).collect();
            for a in 1..=20 {
                let alpha = a as f64 / 20.0;
                let needed = (alpha * n as f64 - 1e-9).ceil() as usize;
                let brute = scores
                    .iter()
                    .copied()
                    .filter(|&p| scores.iter().filter(|&&s| s >= p).count() >= needed)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(quantile_of(&scores, alpha).unwrap(), brute, "n={n} alpha={alpha}");
            }
        }
    }

    #[test]
    fn gaussian_quantile_examples() {
        let d = ScoreDistribution {
            scores: vec![0.9],
            mean: 0.9,
            std_dev: Some(0.02),
        };
        assert!((gaussian_quantile(&d, 0.95).unwrap() - 0.86710).abs() < 1e-4);
        assert_eq!(gaussian_quantile(&d, 0.5).unwrap(), 0.9);
        let flat = ScoreDistribution {
            std_dev: Some(0.0),
            ..d.clone()
        };
        assert_eq!(gaussian_quantile(&flat, 0.99).unwrap(), 0.9);
        assert!(gaussian_quantile(&d, 1.0).is_err());
        assert!(gaussian_quantile(&d, 0.0).is_err());
        let single = ScoreDistribution::from_scores(vec![0.5]).unwrap();
        assert!(gaussian_quantile(&single, 0.9).is_err());
    }

    #[test]
    fn cost_examples() {
        let set = one_asset(vec![100.0, 50.0], vec![100.0, 100.0], 1);
        assert!((portfolio_cost(&set, &[0.93333]) - 699.9975).abs() < 1e-6);
        assert!((portfolio_cost(&set, &[14.0 / 15.0]) - 700.0).abs() < 1e-6);
        assert_eq!(portfolio_cost(&set, &[0.0]), 0.0);
        assert!((cost_per_mwh_load(&set, 0, &[1.0]).unwrap() - 7.5).abs() < 1e-12);

        let two = ScenarioSet::new(
            vec![
                AssetSpec {
                    id: "s".into(),
                    kind: AssetKind::Solar,
                    capacity: 100.0,
                    cost: 30.0,
                    deterministic: false,
                },
                AssetSpec {
                    id: "w".into(),
                    kind: AssetKind::Wind,
                    capacity: 100.0,
                    cost: 50.0,
                    deterministic: false,
                },
            ],
            vec!["load".into()],
            1,
            2,
            vec![60.0, 60.0, 10.0, 30.0],
            vec![vec![1.0, 1.0]],
        )
        .unwrap();
        assert!((portfolio_cost(&two, &[1.0, 1.0]) - 2800.0).abs() < 1e-9);
    }

    #[test]
    fn over_procurement_examples() {
        let set = one_asset(vec![90.0, 120.0], vec![100.0, 100.0], 1);
        assert!((over_procurement(&set, 0, &[1.0]).unwrap() - 1.05).abs() < 1e-12);
        assert_eq!(over_procurement(&set, 0, &[0.0]).unwrap(), 0.0);
        let exact = one_asset(vec![100.0, 80.0], vec![100.0, 80.0], 1);
        assert!((over_procurement(&exact, 0, &[1.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shortfall_examples() {
        let set = one_asset(vec![90.0, 120.0], vec![100.0, 100.0], 1);
        assert!((shortfall(&set, 0, &[1.0]).unwrap()[0] + 0.1).abs() < 1e-12);
        assert_eq!(shortfall(&set, 0, &[0.0]).unwrap(), vec![-2.0]);
        let covered = one_asset(vec![100.0, 120.0], vec![100.0, 100.0], 1);
        assert_eq!(shortfall(&covered, 0, &[1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn shortfall_var_examples() {
        // empirical measure: the smallest y with P(Y <= y) >= 1 - beta is the
        // ceil((1 - beta) N)-th order statistic
        assert_eq!(shortfall_var(&[-0.3, -0.2, -0.1, 0.0], 0.95).unwrap(), 0.3);
        assert_eq!(shortfall_var(&[0.0, 0.0], 0.9).unwrap(), 0.0);
        for beta in [0.05, 0.5, 0.95] {
            assert_eq!(shortfall_var(&[-0.05; 7], beta).unwrap(), 0.05);
        }
        assert_eq!(shortfall_var(&[-0.3, -0.2, -0.1, 0.0], 0.0).unwrap(), 0.0);
        assert_eq!(shortfall_var(&[-0.3, -0.2, -0.1, 0.0], 1.0).unwrap(), 0.3);
        assert!(shortfall_var(&[], 0.9).is_err());
    }

    #[test]
    fn heatmap_examples() {
        let gen: Vec<f64> = (0..48).map(|t| if t == 5 { 50.0 } else { 100.0 }).collect();
        let set = one_asset(gen, vec![100.0; 48], 1);
        let full = hourly_heatmap(&set, 0, &[1.0]).unwrap();
        assert_eq!(full.days(), 2);
        assert_eq!(full.values[5][0], 0.5);
        assert_eq!(full.values[5][1], 1.0);
        let none = hourly_heatmap(&set, 0, &[0.0]).unwrap();
        assert!(none.values.iter().flatten().all(|&v| v == 0.0));
        let over = hourly_heatmap(&set, 0, &[1.0]).unwrap();
        assert!(over.values.iter().flatten().filter(|&&v| v == 1.0).count() == 47);
        let odd = one_asset(vec![1.0; 25], vec![1.0; 25], 1);
        assert!(hourly_heatmap(&odd, 0, &[1.0]).is_err());
    }

    #[test]
    fn target_validation() {
        assert!(CfeTarget::new(0.9, 0.95).is_ok());
        assert!(CfeTarget::new(0.0, 0.95).is_err());
        assert!(CfeTarget::new(1.0, 1.0).is_ok());
        assert!(CfeTarget::new(0.9, 1.1).is_err());
    }
}
