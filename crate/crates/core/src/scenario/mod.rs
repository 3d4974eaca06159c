//! Joint hourly scenarios of generation and load.
//!
//! A [`ScenarioSet`] holds the generation tensor `G[i][n][t]` for every asset
//! `i`, scenario `n` and hour `t`, plus one `N x T` matrix per load customer.
//! Sets come either from disk ([`load_scenarios`]) or from the correlated
//! factor generator ([`synthesize`]).

mod correlation;
mod io;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{CfeError, Result};
use crate::numeric::pairwise_sum;

pub use correlation::{empirical_correlation, nearest_correlation, CorrelationRepair};
pub use io::{load_scenarios, save_scenarios, Manifest, ManifestAsset, ManifestLoad};
pub use synth::{
    synthesize, synthesize_with_diagnostics, CalibrationReport, CorrelationTarget, LoadShape,
    SynthAsset, SynthConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssetKind {
    Solar,
    Wind,
    Hydro,
    Other,
}

impl AssetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AssetKind::Solar => "solar",
            AssetKind::Wind => "wind",
            AssetKind::Hydro => "hydro",
            AssetKind::Other => "other",
        }
    }
}

impl std::str::FromStr for AssetKind {
    type Err = CfeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "solar" => Ok(AssetKind::Solar),
            "wind" => Ok(AssetKind::Wind),
            "hydro" => Ok(AssetKind::Hydro),
            "other" => Ok(AssetKind::Other),
            other => Err(CfeError::invalid(format!("unknown asset kind `{other}`"))),
        }
    }
}

/// A carbon-free generator available for procurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub id: String,
    pub kind: AssetKind,
    /// Nameplate capacity in MW.
    pub capacity: f64,
    /// Unit cost in USD per MWh delivered.
    pub cost: f64,
    #[serde(default)]
    pub deterministic: bool,
}

/// Scenario tensor for one asset universe and one or more loads.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet {
    assets: Vec<AssetSpec>,
    load_ids: Vec<String>,
    scenarios: usize,
    hours: usize,
    /// Flattened `[asset][scenario][hour]`.
    generation: Vec<f64>,
    /// One flattened `[scenario][hour]` matrix per load.
    loads: Vec<Vec<f64>>,
}

impl ScenarioSet {
    /// Builds a set and checks every structural invariant.
    pub fn new(
        assets: Vec<AssetSpec>,
        load_ids: Vec<String>,
        scenarios: usize,
        hours: usize,
        generation: Vec<f64>,
        loads: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let set = ScenarioSet {
            assets,
            load_ids,
            scenarios,
            hours,
            generation,
            loads,
        };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        if self.scenarios == 0 || self.hours == 0 {
            return Err(CfeError::invalid("scenario count and horizon must be positive"));
        }
        let block = self.scenarios * self.hours;
        if self.generation.len() != self.assets.len() * block {
            return Err(CfeError::invalid(format!(
                "generation tensor has {} values, expected {} assets x {} scenarios x {} hours",
                self.generation.len(),
                self.assets.len(),
                self.scenarios,
                self.hours
            )));
        }
        if self.loads.len() != self.load_ids.len() {
            return Err(CfeError::invalid("load ids and load matrices differ in count"));
        }
        for (i, asset) in self.assets.iter().enumerate() {
            if self.assets[..i].iter().any(|a| a.id == asset.id) {
                return Err(CfeError::invalid(format!("duplicate asset id `{}`", asset.id)));
            }
            if !(asset.capacity > 0.0 && asset.capacity.is_finite()) {
                return Err(CfeError::invalid(format!(
                    "asset `{}` must have positive capacity, got {}",
                    asset.id, asset.capacity
                )));
            }
            if !(asset.cost >= 0.0 && asset.cost.is_finite()) {
                return Err(CfeError::invalid(format!(
                    "asset `{}` must have nonnegative cost, got {}",
                    asset.id, asset.cost
                )));
            }
            let values = &self.generation[i * block..(i + 1) * block];
            if let Some(pos) = values
                .iter()
                .position(|&g| !(g >= 0.0 && g <= asset.capacity))
            {
                return Err(CfeError::invalid(format!(
                    "asset `{}` scenario {} hour {}: generation {} outside capacity bounds [0, {}]",
                    asset.id,
                    pos / self.hours + 1,
                    pos % self.hours + 1,
                    values[pos],
                    asset.capacity
                )));
            }
            if asset.deterministic {
                let first = &values[..self.hours];
                if values.chunks_exact(self.hours).any(|row| row != first) {
                    return Err(CfeError::invalid(format!(
                        "asset `{}` is flagged deterministic but its scenarios differ",
                        asset.id
                    )));
                }
            }
        }
        for (k, load) in self.loads.iter().enumerate() {
            if load.len() != block {
                return Err(CfeError::invalid(format!(
                    "load `{}` has {} values, expected {} scenarios x {} hours",
                    self.load_ids[k],
                    load.len(),
                    self.scenarios,
                    self.hours
                )));
            }
            if let Some(pos) = load.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
                return Err(CfeError::invalid(format!(
                    "load `{}` scenario {} hour {}: nonpositive load {}",
                    self.load_ids[k],
                    pos / self.hours + 1,
                    pos % self.hours + 1,
                    load[pos]
                )));
            }
        }
        Ok(())
    }

    pub fn assets(&self) -> &[AssetSpec] {
        &self.assets
    }

    pub fn asset_count(&self) -> usize {
        self.assets.len()
    }

    pub fn asset_index(&self, id: &str) -> Option<usize> {
        self.assets.iter().position(|a| a.id == id)
    }

    pub fn load_ids(&self) -> &[String] {
        &self.load_ids
    }

    pub fn load_count(&self) -> usize {
        self.loads.len()
    }

    pub fn scenarios(&self) -> usize {
        self.scenarios
    }

    pub fn hours(&self) -> usize {
        self.hours
    }

    /// Hourly generation of asset `i` in scenario `n`.
    pub fn generation(&self, i: usize, n: usize) -> &[f64] {
        let start = (i * self.scenarios + n) * self.hours;
        &self.generation[start..start + self.hours]
    }

    /// All scenarios of asset `i`, flattened `[scenario][hour]`.
    pub fn asset_block(&self, i: usize) -> &[f64] {
        let block = self.scenarios * self.hours;
        &self.generation[i * block..(i + 1) * block]
    }

    /// Hourly load of customer `k` in scenario `n`.
    pub fn load(&self, k: usize, n: usize) -> &[f64] {
        let start = n * self.hours;
        &self.loads[k][start..start + self.hours]
    }

    /// All scenarios of load `k`, flattened `[scenario][hour]`.
    pub fn load_block(&self, k: usize) -> &[f64] {
        &self.loads[k]
    }

    pub fn check_load(&self, k: usize) -> Result<()> {
        if k >= self.loads.len() {
            return Err(CfeError::invalid(format!(
                "load index {k} out of range ({} loads)",
                self.loads.len()
            )));
        }
        Ok(())
    }

    /// Grand mean of load `k` over all scenarios and hours.
    pub fn mean_load(&self, k: usize) -> f64 {
        pairwise_sum(&self.loads[k]) / self.loads[k].len() as f64
    }

    /// Mean generation of every asset over all scenarios and hours.
    pub fn average_generation(&self) -> Vec<f64> {
        average_generation(self)
    }

    /// Copy restricted to the given assets, in the given order. Loads are kept.
    pub fn subset(&self, indices: &[usize]) -> Result<ScenarioSet> {
        let mut generation = Vec::with_capacity(indices.len() * self.scenarios * self.hours);
        let mut assets = Vec::with_capacity(indices.len());
        for &i in indices {
            let asset = self.assets.get(i).ok_or_else(|| {
                CfeError::invalid(format!("asset index {i} out of range ({})", self.assets.len()))
            })?;
            assets.push(asset.clone());
            generation.extend_from_slice(self.asset_block(i));
        }
        ScenarioSet::new(
            assets,
            self.load_ids.clone(),
            self.scenarios,
            self.hours,
            generation,
            self.loads.clone(),
        )
    }

    /// Copy with load `k` multiplied by `factor`.
    pub fn with_scaled_load(&self, k: usize, factor: f64) -> Result<ScenarioSet> {
        self.check_load(k)?;
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(CfeError::invalid(format!("load scale factor must be positive, got {factor}")));
        }
        let mut scaled = self.clone();
        for l in &mut scaled.loads[k] {
            *l *= factor;
        }
        Ok(scaled)
    }

    /// Copy keeping only the listed loads.
    pub fn with_loads(&self, keep: &[usize]) -> Result<ScenarioSet> {
        for &k in keep {
            self.check_load(k)?;
        }
        ScenarioSet::new(
            self.assets.clone(),
            keep.iter().map(|&k| self.load_ids[k].clone()).collect(),
            self.scenarios,
            self.hours,
            self.generation.clone(),
            keep.iter().map(|&k| self.loads[k].clone()).collect(),
        )
    }
}

/// Per-asset average generation `(1/(N T)) sum_n sum_t G_i^(n)(t)`.
pub fn average_generation(set: &ScenarioSet) -> Vec<f64> {
    let count = (set.scenarios * set.hours) as f64;
    (0..set.asset_count())
        .map(|i| pairwise_sum(set.asset_block(i)) / count)
        .collect()
}
