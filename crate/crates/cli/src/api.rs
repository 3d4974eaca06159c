//! Request types and handlers shared by the command line and the HTTP service.
//!
//! Both front ends parse their input into these requests and call the same
//! functions, so identical inputs yield identical reports.

use std::fmt;

use cfe_core::analysis::{cost_grid, diversification_sweep, CostGrid, Frontier, GridOptions, SubsetTemplate};
use cfe_core::metrics::{hourly_heatmap, Heatmap};
use cfe_core::structurer::{
    marginal_portfolio, solve_multi, solve_single, LoadSpec, MarginalPortfolio, MultiLoadReport, SolveOptions,
    SolveReport, Strategy, DEFAULT_EPSILON,
};
use cfe_core::{AssetSpec, Bounds, CfeError, CfeTarget, ScenarioSet};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("invalid request: {}", describe(.0))]
    Fields(Vec<FieldError>),
    #[error(transparent)]
    Core(#[from] CfeError),
}

fn describe(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("{}: {}", e.field, e.message))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type ApiResult<T> = Result<T, ApiError>;

/// Deserializes a JSON body, naming the offending field on failure.
pub fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "body".to_string() } else { path };
        ApiError::Fields(vec![FieldError::new(field, e.into_inner().to_string())])
    })
}

#[derive(Default)]
struct Checks(Vec<FieldError>);

impl Checks {
    fn unit_interval(&mut self, field: &str, value: f64) {
        if !(value > 0.0 && value <= 1.0) {
            self.0.push(FieldError::new(field, format!("must lie in (0, 1], got {value}")));
        }
    }

    fn load(&mut self, field: &str, set: &ScenarioSet, load: usize) {
        if load >= set.load_count() {
            self.0.push(FieldError::new(
                field,
                format!("load index {load} out of range ({} loads)", set.load_count()),
            ));
        }
    }

    fn bounds(&mut self, set: &ScenarioSet, bounds: &Option<Bounds>) {
        if let Some(b) = bounds {
            if let Err(e) = b.validate(set.asset_count()) {
                self.0.push(FieldError::new("bounds", message_of(e)));
            }
        }
    }

    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.0.push(FieldError::new(field, message));
    }

    fn finish(self) -> ApiResult<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(ApiError::Fields(self.0))
        }
    }
}

fn message_of(e: CfeError) -> String {
    match e {
        CfeError::Validation(m) => m,
        other => other.to_string(),
    }
}

fn bounds_or_unit(set: &ScenarioSet, bounds: &Option<Bounds>) -> Bounds {
    bounds.clone().unwrap_or_else(|| Bounds::unit(set.asset_count()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeRequest {
    #[serde(default)]
    pub load: usize,
    /// CFE target `p_C`.
    pub target: f64,
    pub alpha: f64,
    #[serde(default)]
    pub bounds: Option<Bounds>,
}

impl OptimizeRequest {
    fn check(&self, set: &ScenarioSet) -> ApiResult<()> {
        let mut c = Checks::default();
        c.load("load", set, self.load);
        c.unit_interval("target", self.target);
        c.unit_interval("alpha", self.alpha);
        c.bounds(set, &self.bounds);
        c.finish()
    }
}

pub fn optimize(set: &ScenarioSet, req: &OptimizeRequest, options: &SolveOptions) -> ApiResult<SolveReport> {
    req.check(set)?;
    let target = CfeTarget::new(req.target, req.alpha)?;
    Ok(solve_single(set, req.load, &target, &bounds_or_unit(set, &req.bounds), options)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadRequest {
    pub load: usize,
    pub target: f64,
    pub alpha: f64,
    /// Lower ranks are served first by the sequential strategy; defaults to list order.
    #[serde(default)]
    pub priority: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiloadRequest {
    pub strategy: Strategy,
    pub loads: Vec<LoadRequest>,
    #[serde(default)]
    pub bounds: Option<Bounds>,
}

impl MultiloadRequest {
    fn specs(&self, set: &ScenarioSet) -> ApiResult<Vec<LoadSpec>> {
        let mut c = Checks::default();
        if self.loads.is_empty() {
            c.push("loads", "at least one load is required");
        }
        for (pos, l) in self.loads.iter().enumerate() {
            c.load(&format!("loads[{pos}].load"), set, l.load);
            c.unit_interval(&format!("loads[{pos}].target"), l.target);
            c.unit_interval(&format!("loads[{pos}].alpha"), l.alpha);
            if self.loads[..pos].iter().any(|o| o.load == l.load) {
                c.push(&format!("loads[{pos}].load"), format!("load {} listed twice", l.load));
            }
        }
        c.bounds(set, &self.bounds);
        if let Some(b) = &self.bounds {
            if b.lower.iter().any(|&lo| lo != 0.0) {
                c.push("bounds.lower", "multi-load bounds must have zero lower ends");
            }
        }
        c.finish()?;
        Ok(self
            .loads
            .iter()
            .enumerate()
            .map(|(pos, l)| LoadSpec {
                load: l.load,
                target: CfeTarget {
                    p_c: l.target,
                    alpha: l.alpha,
                },
                priority: l.priority.unwrap_or(pos),
            })
            .collect())
    }
}

pub fn multiload(set: &ScenarioSet, req: &MultiloadRequest, options: &SolveOptions) -> ApiResult<MultiLoadReport> {
    let specs = req.specs(set)?;
    Ok(solve_multi(set, &specs, &bounds_or_unit(set, &req.bounds), req.strategy, options)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRequest {
    #[serde(default)]
    pub load: usize,
    pub alphas: Vec<f64>,
    pub pcs: Vec<f64>,
    #[serde(default)]
    pub bounds: Option<Bounds>,
    #[serde(default)]
    pub warm_start: bool,
}

pub fn grid(set: &ScenarioSet, req: &GridRequest, options: &SolveOptions) -> ApiResult<CostGrid> {
    let mut c = Checks::default();
    c.load("load", set, req.load);
    for (name, values) in [("alphas", &req.alphas), ("pcs", &req.pcs)] {
        if values.is_empty() {
            c.push(name, "must not be empty");
        }
        for (pos, &v) in values.iter().enumerate() {
            c.unit_interval(&format!("{name}[{pos}]"), v);
        }
    }
    c.bounds(set, &req.bounds);
    c.finish()?;
    let grid_options = GridOptions {
        solve: options.clone(),
        warm_start: req.warm_start,
    };
    Ok(cost_grid(
        set,
        req.load,
        &req.alphas,
        &req.pcs,
        &bounds_or_unit(set, &req.bounds),
        &grid_options,
    )?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalRequest {
    #[serde(default)]
    pub load: usize,
    pub target: f64,
    pub alpha: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub bounds: Option<Bounds>,
}

pub fn marginal(set: &ScenarioSet, req: &MarginalRequest, options: &SolveOptions) -> ApiResult<MarginalPortfolio> {
    let mut c = Checks::default();
    c.load("load", set, req.load);
    c.unit_interval("target", req.target);
    c.unit_interval("alpha", req.alpha);
    let epsilon = req.epsilon.unwrap_or(DEFAULT_EPSILON);
    if !(epsilon > 0.0 && epsilon <= 0.05) {
        c.push("epsilon", format!("must lie in (0, 0.05], got {epsilon}"));
    }
    c.bounds(set, &req.bounds);
    c.finish()?;
    let target = CfeTarget::new(req.target, req.alpha)?;
    Ok(marginal_portfolio(
        set,
        req.load,
        &target,
        &bounds_or_unit(set, &req.bounds),
        epsilon,
        options,
    )?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierRequest {
    #[serde(default)]
    pub load: usize,
    pub target: f64,
    pub alpha: f64,
    /// Shortfall VaR level; no default.
    pub beta: f64,
    /// Subset template such as `solar:n,wind:n,hydro:1@1..3`.
    pub subsets: String,
}

pub fn frontier(set: &ScenarioSet, req: &FrontierRequest, options: &SolveOptions) -> ApiResult<Frontier> {
    let mut c = Checks::default();
    c.load("load", set, req.load);
    c.unit_interval("target", req.target);
    c.unit_interval("alpha", req.alpha);
    if !(0.0..=1.0).contains(&req.beta) {
        c.push("beta", format!("must lie in [0, 1], got {}", req.beta));
    }
    let template = match req.subsets.parse::<SubsetTemplate>() {
        Ok(t) => Some(t),
        Err(e) => {
            c.push("subsets", message_of(e));
            None
        }
    };
    c.finish()?;
    let template = template.expect("checked above");
    let target = CfeTarget::new(req.target, req.alpha)?;
    Ok(diversification_sweep(set, req.load, &target, &template, req.beta, options)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRequest {
    #[serde(default)]
    pub load: usize,
    pub weights: Vec<f64>,
}

/// Parses `0.1,0.2,...` into weights.
pub fn parse_weights(text: &str) -> Result<Vec<f64>, FieldError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| FieldError::new("weights", format!("`{}` is not a number", s.trim())))
        })
        .collect()
}

pub fn heatmap(set: &ScenarioSet, req: &HeatmapRequest) -> ApiResult<Heatmap> {
    let mut c = Checks::default();
    c.load("load", set, req.load);
    if req.weights.len() != set.asset_count() {
        c.push(
            "weights",
            format!("expected {} weights, got {}", set.asset_count(), req.weights.len()),
        );
    } else if req.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
        c.push("weights", "weights must lie in [0, 1]");
    }
    c.finish()?;
    Ok(hourly_heatmap(set, req.load, &req.weights)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniverseAsset {
    #[serde(flatten)]
    pub spec: AssetSpec,
    /// Mean generation in MW.
    pub average_generation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniverseLoad {
    pub index: usize,
    pub id: String,
    /// Mean load in MW.
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Universe {
    pub assets: Vec<UniverseAsset>,
    pub loads: Vec<UniverseLoad>,
    pub scenarios: usize,
    pub hours: usize,
}

pub fn universe(set: &ScenarioSet) -> Universe {
    let generation = set.average_generation();
    Universe {
        assets: set
            .assets()
            .iter()
            .zip(generation)
            .map(|(spec, g)| UniverseAsset {
                spec: spec.clone(),
                average_generation: g,
            })
            .collect(),
        loads: set
            .load_ids()
            .iter()
            .enumerate()
            .map(|(index, id)| UniverseLoad {
                index,
                id: id.clone(),
                mean: set.mean_load(index),
            })
            .collect(),
        scenarios: set.scenarios(),
        hours: set.hours(),
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}
