//! Correlated factor-model scenario generator.
//!
//! Every stochastic entity (non-deterministic asset or load) owns one
//! coordinate of a latent Gaussian vector. Per scenario the vector follows a
//! stationary AR(1) recursion whose innovations carry the latent correlation
//! matrix, so the lag-0 correlation of the latent process equals that matrix.
//! Each coordinate is mapped through `Phi` to a uniform and then through the
//! entity's marginal transform:
//!
//! * solar: clear-sky diurnal shape times Kumaraswamy cloud noise, exactly 0
//!   at night,
//! * wind: Weibull wind speed with diurnal and seasonal scale, pushed through
//!   a cut-in/rated/cut-out power curve,
//! * load: diurnal, weekly and seasonal shape times lognormal noise,
//! * stochastic hydro/other: seasonal level times lognormal noise.
//!
//! Because the marginal transforms and the deterministic profiles distort
//! correlations, the latent matrix is calibrated on a pilot block of
//! scenarios until the pooled hourly output correlations match the target.
//! Pilot scenarios share random streams with the final run.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::correlation::{empirical_correlation, nearest_correlation};
use super::{AssetKind, AssetSpec, ScenarioSet};
use crate::error::{CfeError, Result};
use crate::numeric::{normal_cdf, round_decimals};

const HOURS_PER_DAY: usize = 24;
const DAYS_PER_YEAR: usize = 365;
const SUMMER_SOLSTICE_DAY: f64 = 171.0;
const MAX_REPAIR_DISTANCE: f64 = 0.1;
const PILOT_SCENARIOS: usize = 16;
const CALIBRATION_TOL: f64 = 0.004;
const CALIBRATION_ROUNDS: usize = 60;
const LATENT_CLAMP: f64 = 0.995;
const QUADRATURE_POINTS: usize = 64;

const WIND_CUT_IN: f64 = 3.0;
const WIND_RATED: f64 = 12.0;
const WIND_CUT_OUT: f64 = 25.0;

fn default_persistence() -> f64 {
    0.9
}

fn default_true() -> bool {
    true
}

/// Per-asset generator parameters. Shape knobs default to values that give
/// plausible hourly profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthAsset {
    pub id: String,
    pub kind: AssetKind,
    pub capacity: f64,
    pub cost: f64,
    #[serde(default)]
    pub deterministic: bool,
    /// Target long-run mean output as a fraction of capacity.
    pub capacity_factor: f64,
    /// Solar: half-amplitude of the seasonal day-length swing in hours.
    #[serde(default = "SynthAsset::default_daylength_swing")]
    pub daylength_swing: f64,
    /// Relative diurnal modulation (wind speed scale).
    #[serde(default = "SynthAsset::default_diurnal")]
    pub diurnal_amplitude: f64,
    /// Hour of day at which the diurnal modulation peaks (wind).
    #[serde(default = "SynthAsset::default_peak_hour")]
    pub peak_hour: f64,
    /// Relative seasonal modulation.
    #[serde(default = "SynthAsset::default_seasonal")]
    pub seasonal_amplitude: f64,
    /// Day of year at which the seasonal modulation peaks.
    #[serde(default = "SynthAsset::default_peak_day")]
    pub peak_day: f64,
    /// Kumaraswamy `(a, b)` for solar cloud attenuation.
    #[serde(default = "SynthAsset::default_cloud_shape")]
    pub cloud_shape: [f64; 2],
    /// Lognormal sigma for stochastic hydro/other.
    #[serde(default = "SynthAsset::default_noise_sigma")]
    pub noise_sigma: f64,
    /// Weibull shape of the wind speed distribution.
    #[serde(default = "SynthAsset::default_weibull_shape")]
    pub weibull_shape: f64,
}

impl SynthAsset {
    fn default_daylength_swing() -> f64 {
        1.8
    }
    fn default_diurnal() -> f64 {
        0.3
    }
    fn default_peak_hour() -> f64 {
        2.0
    }
    fn default_seasonal() -> f64 {
        0.1
    }
    fn default_peak_day() -> f64 {
        100.0
    }
    fn default_cloud_shape() -> [f64; 2] {
        [2.0, 0.8]
    }
    fn default_noise_sigma() -> f64 {
        0.1
    }
    fn default_weibull_shape() -> f64 {
        2.0
    }

    fn spec(&self) -> AssetSpec {
        AssetSpec {
            id: self.id.clone(),
            kind: self.kind,
            capacity: self.capacity,
            cost: self.cost,
            deterministic: self.deterministic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadShape {
    pub id: String,
    /// Mean load level in MW before noise.
    pub mean: f64,
    #[serde(default = "LoadShape::default_diurnal")]
    pub diurnal_amplitude: f64,
    #[serde(default = "LoadShape::default_peak_hour")]
    pub peak_hour: f64,
    /// Relative reduction on weekends.
    #[serde(default = "LoadShape::default_weekly")]
    pub weekly_amplitude: f64,
    #[serde(default = "LoadShape::default_seasonal")]
    pub seasonal_amplitude: f64,
    #[serde(default = "LoadShape::default_peak_day")]
    pub peak_day: f64,
    #[serde(default = "LoadShape::default_noise_sigma")]
    pub noise_sigma: f64,
}

impl LoadShape {
    fn default_diurnal() -> f64 {
        0.12
    }
    fn default_peak_hour() -> f64 {
        16.0
    }
    fn default_weekly() -> f64 {
        0.05
    }
    fn default_seasonal() -> f64 {
        0.1
    }
    fn default_peak_day() -> f64 {
        200.0
    }
    fn default_noise_sigma() -> f64 {
        0.08
    }
}

/// Target pooled hourly correlations among the listed stochastic entities.
/// Stochastic entities that are not listed are drawn independently.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTarget {
    pub entities: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub scenarios: usize,
    pub hours: usize,
    #[serde(default)]
    pub seed: u64,
    pub assets: Vec<SynthAsset>,
    pub loads: Vec<LoadShape>,
    pub correlation: CorrelationTarget,
    /// Hourly AR(1) coefficient of the latent process.
    #[serde(default = "default_persistence")]
    pub persistence: f64,
    #[serde(default = "default_true")]
    pub calibrate: bool,
}

/// Diagnostics from the correlation calibration.
#[derive(Clone, Debug, Serialize)]
pub struct CalibrationReport {
    pub entities: Vec<String>,
    pub target: Vec<Vec<f64>>,
    pub latent: Vec<Vec<f64>>,
    /// Correlations measured on the full synthesized set.
    pub achieved: Vec<Vec<f64>>,
    pub max_deviation: f64,
    pub rounds: usize,
}

/// Builds a scenario set from a generator configuration.
pub fn synthesize(config: &SynthConfig) -> Result<ScenarioSet> {
    synthesize_with_diagnostics(config).map(|(set, _)| set)
}

pub fn synthesize_with_diagnostics(config: &SynthConfig) -> Result<(ScenarioSet, CalibrationReport)> {
    let plan = Plan::new(config)?;
    let target = plan.target_matrix.clone();

    let latent = if config.calibrate {
        plan.calibrate(&target)?
    } else {
        (target.clone(), 0)
    };
    let (latent, rounds) = latent;
    let chol = cholesky(&latent)?;

    let (n_total, hours) = (config.scenarios, config.hours);
    let stochastic = plan.entities.len();
    let block = n_total * hours;
    let mut entity_values = vec![vec![0.0; block]; stochastic];
    let mut latent_buf = vec![0.0; stochastic * hours];
    for n in 0..n_total {
        plan.latent_uniforms(&chol, n, &mut latent_buf);
        for (e, out) in entity_values.iter_mut().enumerate() {
            plan.transform(e, &latent_buf[e * hours..(e + 1) * hours], &mut out[n * hours..(n + 1) * hours]);
        }
    }

    let achieved = plan.measure(&entity_values, n_total);
    let max_deviation = max_deviation(&achieved, &target, &plan.targeted);

    let mut generation = Vec::with_capacity(config.assets.len() * block);
    for (i, asset) in config.assets.iter().enumerate() {
        match plan.asset_entity[i] {
            Some(e) => generation.extend(
                entity_values[e]
                    .iter()
                    .map(|&g| round_decimals(g, 6).clamp(0.0, asset.capacity)),
            ),
            None => {
                let level = round_decimals(asset.capacity * asset.capacity_factor, 6).clamp(0.0, asset.capacity);
                generation.extend(std::iter::repeat_n(level, block));
            }
        }
    }
    let loads = (0..config.loads.len())
        .map(|k| {
            entity_values[plan.load_entity[k]]
                .iter()
                .map(|&l| round_decimals(l, 6).max(1e-6))
                .collect()
        })
        .collect();

    let set = ScenarioSet::new(
        config.assets.iter().map(SynthAsset::spec).collect(),
        config.loads.iter().map(|l| l.id.clone()).collect(),
        n_total,
        hours,
        generation,
        loads,
    )?;
    if max_deviation > 0.05 {
        log::warn!("synthesized correlations deviate from target by up to {max_deviation:.3}");
    }
    let report = CalibrationReport {
        entities: plan.entities.iter().map(|e| e.id.clone()).collect(),
        target: to_rows(&target),
        latent: to_rows(&latent),
        achieved: to_rows(&achieved),
        max_deviation,
        rounds,
    };
    Ok((set, report))
}

#[derive(Clone, Debug)]
enum Marginal {
    Solar {
        scale: f64,
        cloud: [f64; 2],
    },
    Wind {
        speed_scale: f64,
        shape: f64,
    },
    Level {
        level: f64,
        sigma: f64,
        cap: Option<f64>,
    },
}

struct Entity {
    id: String,
    marginal: Marginal,
    capacity: f64,
    /// Deterministic hourly shape over the horizon.
    profile: Vec<f64>,
}

struct Plan<'a> {
    config: &'a SynthConfig,
    entities: Vec<Entity>,
    asset_entity: Vec<Option<usize>>,
    load_entity: Vec<usize>,
    target_matrix: DMatrix<f64>,
    /// Pairs that carry an explicit target.
    targeted: DMatrix<bool>,
    masks: Vec<Option<Vec<bool>>>,
}

impl<'a> Plan<'a> {
    fn new(config: &'a SynthConfig) -> Result<Self> {
        if config.scenarios == 0 || config.hours == 0 {
            return Err(CfeError::invalid("scenario count and horizon must be positive"));
        }
        if config.loads.is_empty() {
            return Err(CfeError::invalid("at least one load is required"));
        }
        if !(0.0..1.0).contains(&config.persistence) {
            return Err(CfeError::invalid("persistence must lie in [0, 1)"));
        }
        let hours = config.hours;
        let mut entities = Vec::new();
        let mut asset_entity = Vec::new();
        for asset in &config.assets {
            if !(asset.capacity > 0.0 && asset.capacity.is_finite()) {
                return Err(CfeError::invalid(format!(
                    "asset `{}` has zero or invalid capacity {}",
                    asset.id, asset.capacity
                )));
            }
            if !(asset.capacity_factor > 0.0 && asset.capacity_factor <= 1.0) {
                return Err(CfeError::invalid(format!(
                    "asset `{}` capacity factor must lie in (0, 1]",
                    asset.id
                )));
            }
            if asset.deterministic {
                asset_entity.push(None);
                continue;
            }
            asset_entity.push(Some(entities.len()));
            entities.push(build_asset_entity(asset, hours)?);
        }
        let mut load_entity = Vec::new();
        for load in &config.loads {
            let swing = load.diurnal_amplitude.abs() + load.seasonal_amplitude.abs() + load.weekly_amplitude.abs();
            if !(load.mean > 0.0) || swing >= 1.0 {
                return Err(CfeError::invalid(format!(
                    "load `{}` needs a positive mean and shape amplitudes summing below 1",
                    load.id
                )));
            }
            load_entity.push(entities.len());
            entities.push(Entity {
                id: load.id.clone(),
                marginal: Marginal::Level {
                    level: load.mean,
                    sigma: load.noise_sigma,
                    cap: None,
                },
                capacity: f64::INFINITY,
                profile: (0..hours).map(|t| load_profile(load, t)).collect(),
            });
        }

        let e = entities.len();
        let mut target_matrix = DMatrix::identity(e, e);
        let mut targeted = DMatrix::from_element(e, e, false);
        let listed = &config.correlation.entities;
        if config.correlation.matrix.len() != listed.len()
            || config.correlation.matrix.iter().any(|r| r.len() != listed.len())
        {
            return Err(CfeError::invalid("correlation matrix shape does not match its entity list"));
        }
        let mut index = Vec::with_capacity(listed.len());
        for id in listed {
            let pos = entities.iter().position(|en| &en.id == id).ok_or_else(|| {
                CfeError::invalid(format!(
                    "correlation entity `{id}` is not a stochastic asset or load"
                ))
            })?;
            if index.contains(&pos) {
                return Err(CfeError::invalid(format!("correlation entity `{id}` listed twice")));
            }
            index.push(pos);
        }
        let given = DMatrix::from_fn(listed.len(), listed.len(), |i, j| config.correlation.matrix[i][j]);
        let repair = nearest_correlation(&given)?;
        if repair.distance > MAX_REPAIR_DISTANCE {
            return Err(CfeError::Correlation {
                distance: repair.distance,
                tolerance: MAX_REPAIR_DISTANCE,
            });
        }
        for (a, &pa) in index.iter().enumerate() {
            for (b, &pb) in index.iter().enumerate() {
                target_matrix[(pa, pb)] = repair.matrix[(a, b)];
                targeted[(pa, pb)] = a != b;
            }
        }

        let masks = entities
            .iter()
            .map(|en| match en.marginal {
                Marginal::Solar { .. } => Some(en.profile.iter().map(|&p| p > 0.0).collect()),
                _ => None,
            })
            .collect();

        Ok(Plan {
            config,
            entities,
            asset_entity,
            load_entity,
            target_matrix,
            targeted,
            masks,
        })
    }

    /// Writes `Phi(z_e(t))` for scenario `n` into `out[e * T + t]`.
    fn latent_uniforms(&self, chol: &DMatrix<f64>, n: usize, out: &mut [f64]) {
        let e = self.entities.len();
        let hours = self.config.hours;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(n as u64);
        let phi = self.config.persistence;
        let innovation = (1.0 - phi * phi).sqrt();
        let mut eps = vec![0.0; e];
        let mut state = vec![0.0; e];
        for t in 0..hours {
            for x in eps.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            for r in 0..e {
                let mut shock = 0.0;
                for c in 0..=r {
                    shock += chol[(r, c)] * eps[c];
                }
                state[r] = if t == 0 { shock } else { phi * state[r] + innovation * shock };
                out[r * hours + t] = normal_cdf(state[r]).clamp(1e-12, 1.0 - 1e-12);
            }
        }
    }

    fn transform(&self, e: usize, uniforms: &[f64], out: &mut [f64]) {
        let entity = &self.entities[e];
        for (t, (&u, o)) in uniforms.iter().zip(out.iter_mut()).enumerate() {
            *o = marginal_value(&entity.marginal, entity.capacity, entity.profile[t], u);
        }
    }

    fn measure(&self, values: &[Vec<f64>], scenarios: usize) -> DMatrix<f64> {
        let e = self.entities.len();
        let repeated_masks: Vec<Option<Vec<bool>>> = self
            .masks
            .iter()
            .map(|m| m.as_ref().map(|m| m.iter().copied().cycle().take(m.len() * scenarios).collect()))
            .collect();
        let mut out = DMatrix::identity(e, e);
        for a in 0..e {
            for b in 0..a {
                if !self.targeted[(a, b)] {
                    continue;
                }
                let mask: Option<Vec<bool>> = match (&repeated_masks[a], &repeated_masks[b]) {
                    (None, None) => None,
                    (Some(m), None) | (None, Some(m)) => Some(m.clone()),
                    (Some(x), Some(y)) => Some(x.iter().zip(y).map(|(p, q)| *p && *q).collect()),
                };
                let c = empirical_correlation(&values[a], &values[b], mask.as_deref());
                out[(a, b)] = c;
                out[(b, a)] = c;
            }
        }
        out
    }

    /// Fixed-point iteration on the latent matrix using a pilot block.
    fn calibrate(&self, target: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
        let e = self.entities.len();
        if self.targeted.iter().all(|t| !t) {
            return Ok((target.clone(), 0));
        }
        let hours = self.config.hours;
        let pilot = self.config.scenarios.min(PILOT_SCENARIOS);
        let mut latent = target.clone();
        let mut best = (f64::INFINITY, latent.clone());
        let mut values = vec![vec![0.0; pilot * hours]; e];
        let mut buf = vec![0.0; e * hours];
        let mut rounds = 0;
        for round in 0..CALIBRATION_ROUNDS {
            rounds = round + 1;
            let chol = cholesky(&latent)?;
            for n in 0..pilot {
                self.latent_uniforms(&chol, n, &mut buf);
                for (k, out) in values.iter_mut().enumerate() {
                    self.transform(k, &buf[k * hours..(k + 1) * hours], &mut out[n * hours..(n + 1) * hours]);
                }
            }
            let achieved = self.measure(&values, pilot);
            let dev = max_deviation(&achieved, target, &self.targeted);
            if dev < best.0 {
                best = (dev, latent.clone());
            }
            if dev < CALIBRATION_TOL {
                break;
            }
            let mut next = latent.clone();
            for a in 0..e {
                for b in 0..e {
                    if self.targeted[(a, b)] {
                        let step = target[(a, b)] - achieved[(a, b)];
                        next[(a, b)] = (latent[(a, b)] + step).clamp(-LATENT_CLAMP, LATENT_CLAMP);
                    }
                }
            }
            latent = nearest_correlation(&next)?.matrix;
        }
        log::debug!("correlation calibration: {rounds} rounds, pilot deviation {:.4}", best.0);
        Ok((best.1, rounds))
    }
}

fn build_asset_entity(asset: &SynthAsset, hours: usize) -> Result<Entity> {
    let (marginal, profile) = match asset.kind {
        AssetKind::Solar => {
            let profile: Vec<f64> = (0..hours).map(|t| solar_profile(asset, t)).collect();
            let cloud = asset.cloud_shape;
            if !(cloud[0] > 0.0 && cloud[1] > 0.0) {
                return Err(CfeError::invalid(format!("asset `{}` cloud shape must be positive", asset.id)));
            }
            let scale = fit_scale(asset, &profile, |s, p, u| {
                (s * p * kumaraswamy_inverse(u, cloud)).min(1.0)
            })?;
            (Marginal::Solar { scale, cloud }, profile)
        }
        AssetKind::Wind => {
            let profile: Vec<f64> = (0..hours).map(|t| wind_profile(asset, t)).collect();
            let shape = asset.weibull_shape;
            if !(shape > 0.0) {
                return Err(CfeError::invalid(format!("asset `{}` Weibull shape must be positive", asset.id)));
            }
            let speed_scale = fit_scale(asset, &profile, |s, p, u| power_curve(s * p * weibull_unit(u, shape)))?;
            (Marginal::Wind { speed_scale, shape }, profile)
        }
        AssetKind::Hydro | AssetKind::Other => {
            let profile: Vec<f64> = (0..hours)
                .map(|t| 1.0 + asset.seasonal_amplitude * seasonal_cos(t, asset.peak_day))
                .collect();
            let sigma = asset.noise_sigma;
            let scale = fit_scale(asset, &profile, |s, p, u| {
                (s * p * lognormal_unit(u, sigma)).min(1.0)
            })?;
            (
                Marginal::Level {
                    level: scale,
                    sigma,
                    cap: Some(1.0),
                },
                profile,
            )
        }
    };
    Ok(Entity {
        id: asset.id.clone(),
        marginal,
        capacity: asset.capacity,
        profile,
    })
}

fn marginal_value(marginal: &Marginal, capacity: f64, profile: f64, u: f64) -> f64 {
    match *marginal {
        Marginal::Solar { scale, cloud } => {
            if profile <= 0.0 {
                0.0
            } else {
                capacity * (scale * profile * kumaraswamy_inverse(u, cloud)).min(1.0)
            }
        }
        Marginal::Wind { speed_scale, shape } => capacity * power_curve(speed_scale * profile * weibull_unit(u, shape)),
        Marginal::Level { level, sigma, cap } => {
            let v = level * profile * lognormal_unit(u, sigma);
            match cap {
                Some(c) => capacity * v.min(c),
                None => v,
            }
        }
    }
}

/// Bisection on the multiplier that makes the mean output hit the target
/// capacity factor, with the noise integrated on a midpoint grid.
fn fit_scale(asset: &SynthAsset, profile: &[f64], cf: impl Fn(f64, f64, f64) -> f64) -> Result<f64> {
    let grid: Vec<f64> = (0..QUADRATURE_POINTS)
        .map(|j| (j as f64 + 0.5) / QUADRATURE_POINTS as f64)
        .collect();
    // one representative year of hours is plenty for the mean
    let hours = profile.len().min(HOURS_PER_DAY * DAYS_PER_YEAR);
    let mean_cf = |s: f64| {
        let mut total = 0.0;
        for &p in &profile[..hours] {
            if p <= 0.0 {
                continue;
            }
            for &u in &grid {
                total += cf(s, p, u);
            }
        }
        total / (hours * grid.len()) as f64
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while mean_cf(hi) < asset.capacity_factor {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(CfeError::invalid(format!(
                "asset `{}` cannot reach capacity factor {} with its profile",
                asset.id, asset.capacity_factor
            )));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mean_cf(mid) < asset.capacity_factor {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn day_and_hour(t: usize) -> (f64, f64) {
    let day = (t / HOURS_PER_DAY) % DAYS_PER_YEAR;
    (day as f64, (t % HOURS_PER_DAY) as f64 + 0.5)
}

fn seasonal_cos(t: usize, peak_day: f64) -> f64 {
    let (day, _) = day_and_hour(t);
    (2.0 * PI * (day - peak_day) / DAYS_PER_YEAR as f64).cos()
}

/// Clear-sky shape: half-sine between sunrise and sunset, zero otherwise.
fn solar_profile(asset: &SynthAsset, t: usize) -> f64 {
    let (_, hour) = day_and_hour(t);
    let season = seasonal_cos(t, SUMMER_SOLSTICE_DAY);
    let daylength = 12.0 + asset.daylength_swing * season;
    let noon = 12.5;
    let offset = hour - (noon - daylength / 2.0);
    if offset <= 0.0 || offset >= daylength {
        return 0.0;
    }
    (PI * offset / daylength).sin() * (1.0 + asset.seasonal_amplitude * season)
}

fn wind_profile(asset: &SynthAsset, t: usize) -> f64 {
    let (_, hour) = day_and_hour(t);
    let diurnal = (2.0 * PI * (hour - asset.peak_hour) / HOURS_PER_DAY as f64).cos();
    (1.0 + asset.diurnal_amplitude * diurnal) * (1.0 + asset.seasonal_amplitude * seasonal_cos(t, asset.peak_day))
}

fn load_profile(load: &LoadShape, t: usize) -> f64 {
    let (day, hour) = day_and_hour(t);
    let diurnal = (2.0 * PI * (hour - load.peak_hour) / HOURS_PER_DAY as f64).cos();
    let weekend = if (day as usize) % 7 >= 5 { 1.0 } else { 0.0 };
    1.0 + load.diurnal_amplitude * diurnal + load.seasonal_amplitude * seasonal_cos(t, load.peak_day)
        - load.weekly_amplitude * weekend
}

fn kumaraswamy_inverse(u: f64, [a, b]: [f64; 2]) -> f64 {
    (1.0 - (1.0 - u).powf(1.0 / b)).powf(1.0 / a)
}

/// Unit-scale Weibull quantile.
fn weibull_unit(u: f64, shape: f64) -> f64 {
    (-(1.0 - u).ln()).powf(1.0 / shape)
}

fn lognormal_unit(u: f64, sigma: f64) -> f64 {
    let z = crate::numeric::normal_quantile(u);
    (sigma * z - 0.5 * sigma * sigma).exp()
}

fn power_curve(speed: f64) -> f64 {
    if !(WIND_CUT_IN..WIND_CUT_OUT).contains(&speed) {
        0.0
    } else if speed >= WIND_RATED {
        1.0
    } else {
        (speed.powi(3) - WIND_CUT_IN.powi(3)) / (WIND_RATED.powi(3) - WIND_CUT_IN.powi(3))
    }
}

fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| CfeError::invalid("latent correlation matrix is not positive definite"))
}

fn max_deviation(achieved: &DMatrix<f64>, target: &DMatrix<f64>, targeted: &DMatrix<bool>) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..target.nrows() {
        for b in 0..target.ncols() {
            if targeted[(a, b)] {
                worst = worst.max((achieved[(a, b)] - target[(a, b)]).abs());
            }
        }
    }
    worst
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn solar(id: &str) -> SynthAsset {
        SynthAsset {
            id: id.into(),
            kind: AssetKind::Solar,
            capacity: 200.0,
            cost: 30.0,
            deterministic: false,
            capacity_factor: 0.28,
            daylength_swing: SynthAsset::default_daylength_swing(),
            diurnal_amplitude: SynthAsset::default_diurnal(),
            peak_hour: SynthAsset::default_peak_hour(),
            seasonal_amplitude: SynthAsset::default_seasonal(),
            peak_day: SynthAsset::default_peak_day(),
            cloud_shape: SynthAsset::default_cloud_shape(),
            noise_sigma: SynthAsset::default_noise_sigma(),
            weibull_shape: SynthAsset::default_weibull_shape(),
        }
    }

    fn load() -> LoadShape {
        LoadShape {
            id: "load".into(),
            mean: 100.0,
            diurnal_amplitude: 0.1,
            peak_hour: 16.0,
            weekly_amplitude: 0.05,
            seasonal_amplitude: 0.1,
            peak_day: 200.0,
            noise_sigma: 0.05,
        }
    }

    fn two_solar(scenarios: usize, hours: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            scenarios,
            hours,
            seed,
            assets: vec![solar("s1"), solar("s2")],
            loads: vec![load()],
            correlation: CorrelationTarget {
                entities: vec!["s1".into(), "s2".into()],
                matrix: vec![vec![1.0, 0.91], vec![0.91, 1.0]],
            },
            persistence: 0.9,
            calibrate: true,
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = two_solar(3, 24 * 10, 7);
        let a = synthesize(&cfg).unwrap();
        let b = synthesize(&cfg).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&SynthConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn solar_is_zero_at_night() {
        let cfg = two_solar(4, 24 * 30, 1);
        let set = synthesize(&cfg).unwrap();
        for n in 0..set.scenarios() {
            let g = set.generation(0, n);
            for t in 0..set.hours() {
                if solar_profile(&cfg.assets[0], t) == 0.0 {
                    assert_eq!(g[t], 0.0, "hour {t}");
                }
            }
            // midnight and 3am are always dark
            for d in 0..30 {
                assert_eq!(g[d * 24], 0.0);
                assert_eq!(g[d * 24 + 3], 0.0);
            }
        }
    }

    #[test]
    fn capacity_factor_close_to_target() {
        let set = synthesize(&two_solar(8, 24 * 365, 3)).unwrap();
        let cf = set.average_generation()[0] / 200.0;
        assert!((cf - 0.28).abs() < 0.02, "cf {cf}");
    }

    #[test]
    fn deterministic_asset_is_constant() {
        let mut hydro = solar("hydro");
        hydro.kind = AssetKind::Hydro;
        hydro.deterministic = true;
        hydro.capacity = 123.7;
        hydro.capacity_factor = 97.8 / 123.7;
        let mut cfg = two_solar(3, 48, 2);
        cfg.assets.push(hydro);
        let set = synthesize(&cfg).unwrap();
        assert!(set.asset_block(2).iter().all(|&g| g == 97.8));
        assert!((set.average_generation()[2] - 97.8).abs() < 1e-9);
    }

    #[test]
    fn rejects_zero_capacity() {
        let mut cfg = two_solar(1, 24, 0);
        cfg.assets[0].capacity = 0.0;
        assert!(synthesize(&cfg).is_err());
    }

    #[test]
    fn rejects_badly_indefinite_target() {
        let mut cfg = two_solar(1, 24, 0);
        let mut wind = solar("w");
        wind.kind = AssetKind::Wind;
        cfg.assets.push(wind);
        cfg.correlation = CorrelationTarget {
            entities: vec!["s1".into(), "s2".into(), "w".into()],
            matrix: vec![
                vec![1.0, 0.99, -0.99],
                vec![0.99, 1.0, 0.99],
                vec![-0.99, 0.99, 1.0],
            ],
        };
        assert!(matches!(synthesize(&cfg), Err(CfeError::Correlation { .. })));
    }

    #[test]
    fn power_curve_shape() {
        assert_eq!(power_curve(2.0), 0.0);
        assert_eq!(power_curve(12.0), 1.0);
        assert_eq!(power_curve(30.0), 0.0);
        assert!(power_curve(8.0) > 0.0 && power_curve(8.0) < 1.0);
    }
}
