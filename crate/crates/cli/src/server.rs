//! Stateless HTTP+JSON service over a loaded scenario set.
//!
//! Solver work runs on the blocking pool behind a FIFO semaphore; each
//! request is capped by a wall-clock budget that includes queueing time.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use cfe_core::analysis::heatmap_csv;
use cfe_core::structurer::SolveOptions;
use cfe_core::{CfeError, ScenarioSet};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use tokio::sync::Semaphore;

use crate::api::{self, ApiError, ApiResult, FieldError, HeatmapRequest};
use crate::output::{render, Precision};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub precision: Precision,
    /// Wall-clock budget per request.
    pub timeout: Duration,
    /// Solves allowed to run at once.
    pub max_concurrent: usize,
    pub solve: SolveOptions,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            precision: Precision::default(),
            timeout: DEFAULT_TIMEOUT,
            max_concurrent: default_concurrency(),
            solve: SolveOptions::default(),
        }
    }
}

/// Half the hardware threads, at least one.
pub fn default_concurrency() -> usize {
    std::thread::available_parallelism().map_or(1, |n| (n.get() / 2).max(1))
}

struct AppState {
    set: ScenarioSet,
    config: ServiceConfig,
    permits: Arc<Semaphore>,
}

type Shared = Arc<AppState>;

pub fn router(set: ScenarioSet, config: ServiceConfig) -> Router {
    let permits = Arc::new(Semaphore::new(config.max_concurrent.max(1)));
    let state = Arc::new(AppState { set, config, permits });
    Router::new()
        .route("/universe", get(universe))
        .route("/heatmap", get(heatmap))
        .route("/optimize", post(optimize))
        .route("/multiload", post(multiload))
        .route("/grid", post(grid))
        .route("/marginal", post(marginal))
        .route("/frontier", post(frontier))
        .with_state(state)
}

fn json_response<T: Serialize>(status: StatusCode, body: &T, precision: Precision) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "application/json")],
        render(body, precision),
    )
        .into_response()
}

fn error_response(error: ApiError, precision: Precision) -> Response {
    match error {
        ApiError::Fields(fields) => json_response(
            StatusCode::BAD_REQUEST,
            &json!({"error": "validation", "fields": fields}),
            precision,
        ),
        ApiError::Core(CfeError::Infeasible {
            load,
            target,
            measure,
            max_attainable,
        }) => json_response(
            StatusCode::UNPROCESSABLE_ENTITY,
            &json!({
                "error": "infeasible",
                "load": load,
                "target": target,
                "measure": measure,
                "max_attainable": max_attainable,
            }),
            precision,
        ),
        ApiError::Core(e @ (CfeError::NonConvergence(_) | CfeError::NonFinite(_))) => json_response(
            StatusCode::UNPROCESSABLE_ENTITY,
            &json!({"error": "non_convergence", "message": e.to_string()}),
            precision,
        ),
        ApiError::Core(CfeError::Validation(message)) => json_response(
            StatusCode::BAD_REQUEST,
            &json!({"error": "validation", "fields": [FieldError::new("body", message)]}),
            precision,
        ),
        ApiError::Core(e) => json_response(
            StatusCode::INTERNAL_SERVER_ERROR,
            &json!({"error": "internal", "message": e.to_string()}),
            precision,
        ),
    }
}

/// Runs `work` on the blocking pool under the admission limit and time budget.
async fn run<T, F>(state: Shared, work: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce(&ScenarioSet, &SolveOptions) -> ApiResult<T> + Send + 'static,
{
    let precision = state.config.precision;
    let budget = state.config.timeout;
    let task = async move {
        let permit = state.permits.clone().acquire_owned().await.expect("semaphore is never closed");
        // the permit moves into the worker so abandoned work still holds its slot
        tokio::task::spawn_blocking(move || {
            let _permit = permit;
            work(&state.set, &state.config.solve)
        })
        .await
    };
    match tokio::time::timeout(budget, task).await {
        Err(_) => json_response(
            StatusCode::GATEWAY_TIMEOUT,
            &json!({"error": "timeout", "budget_ms": budget.as_millis() as u64}),
            precision,
        ),
        Ok(Err(join)) => json_response(
            StatusCode::INTERNAL_SERVER_ERROR,
            &json!({"error": "internal", "message": join.to_string()}),
            precision,
        ),
        Ok(Ok(Err(e))) => error_response(e, precision),
        Ok(Ok(Ok(body))) => json_response(StatusCode::OK, &body, precision),
    }
}

fn parse<T: DeserializeOwned>(state: &Shared, body: &Bytes) -> Result<T, Response> {
    api::parse_body(body).map_err(|e| error_response(e, state.config.precision))
}

async fn universe(State(state): State<Shared>) -> Response {
    json_response(StatusCode::OK, &api::universe(&state.set), state.config.precision)
}

async fn optimize(State(state): State<Shared>, body: Bytes) -> Response {
    match parse::<api::OptimizeRequest>(&state, &body) {
        Ok(req) => run(state, move |set, opts| api::optimize(set, &req, opts)).await,
        Err(r) => r,
    }
}

async fn multiload(State(state): State<Shared>, body: Bytes) -> Response {
    match parse::<api::MultiloadRequest>(&state, &body) {
        Ok(req) => run(state, move |set, opts| api::multiload(set, &req, opts)).await,
        Err(r) => r,
    }
}

async fn grid(State(state): State<Shared>, body: Bytes) -> Response {
    match parse::<api::GridRequest>(&state, &body) {
        Ok(req) => run(state, move |set, opts| api::grid(set, &req, opts)).await,
        Err(r) => r,
    }
}

async fn marginal(State(state): State<Shared>, body: Bytes) -> Response {
    match parse::<api::MarginalRequest>(&state, &body) {
        Ok(req) => run(state, move |set, opts| api::marginal(set, &req, opts)).await,
        Err(r) => r,
    }
}

async fn frontier(State(state): State<Shared>, body: Bytes) -> Response {
    match parse::<api::FrontierRequest>(&state, &body) {
        Ok(req) => run(state, move |set, opts| api::frontier(set, &req, opts)).await,
        Err(r) => r,
    }
}

/// `GET /heatmap?load=k&weights=w1,w2,...[&format=csv]`.
async fn heatmap(State(state): State<Shared>, Query(query): Query<HashMap<String, String>>) -> Response {
    let precision = state.config.precision;
    let mut fields = Vec::new();
    let load = match query.get("load").map(|s| s.parse::<usize>()) {
        None => 0,
        Some(Ok(k)) => k,
        Some(Err(_)) => {
            fields.push(FieldError::new("load", "must be a nonnegative integer"));
            0
        }
    };
    let weights = match query.get("weights") {
        None => {
            fields.push(FieldError::new("weights", "required, comma-separated"));
            Vec::new()
        }
        Some(text) => api::parse_weights(text).unwrap_or_else(|e| {
            fields.push(e);
            Vec::new()
        }),
    };
    let csv = match query.get("format").map(String::as_str) {
        None | Some("json") => false,
        Some("csv") => true,
        Some(other) => {
            fields.push(FieldError::new("format", format!("`{other}` is not json or csv")));
            false
        }
    };
    if !fields.is_empty() {
        return error_response(ApiError::Fields(fields), precision);
    }
    let req = HeatmapRequest { load, weights };
    match api::heatmap(&state.set, &req) {
        Err(e) => error_response(e, precision),
        Ok(map) if csv => match heatmap_csv(&map) {
            Ok(text) => (StatusCode::OK, [(header::CONTENT_TYPE, "text/csv")], text).into_response(),
            Err(e) => error_response(e.into(), precision),
        },
        Ok(map) => json_response(
            StatusCode::OK,
            &json!({"load": load, "days": map.days(), "values": map.values}),
            precision,
        ),
    }
}

/// Serves until interrupted.
pub async fn serve(set: ScenarioSet, config: ServiceConfig, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(set, config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
