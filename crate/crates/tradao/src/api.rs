//! JSON REST interface.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::ServiceError;
use crate::service::{RunRequest, Service};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { code: code.to_string(), message: message.into() } }
    }

    /// Lookups of a resource named in the URL path report 404 for a missing symbol.
    fn path_lookup(e: ServiceError) -> Self {
        match e {
            ServiceError::UnknownSymbol(_) => ApiError::new(StatusCode::NOT_FOUND, e.code(), e.to_string()),
            other => other.into(),
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::UnknownInstance(_) | ServiceError::UnknownStrategy(_) => StatusCode::NOT_FOUND,
            ServiceError::InvalidQuery(_) => StatusCode::BAD_REQUEST,
            ServiceError::DuplicateId(_) | ServiceError::SecondRoot => StatusCode::CONFLICT,
            ServiceError::StoreUnavailable { .. } => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "InvalidQuery", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Shared = Arc<Service>;

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    Ok(q?.0)
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "SchemaViolation", e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Range {
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrelationQuery {
    window: Option<usize>,
    bins: Option<usize>,
    /// Comma-separated variable names.
    vars: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BinsQuery {
    bins: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CashQuery {
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    warning: Option<f64>,
    danger: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TradesQuery {
    symbol: Option<String>,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketUpload {
    symbol: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestQuery {
    parent_id: Option<String>,
}

async fn strategies(State(s): State<Shared>) -> impl IntoResponse {
    Json(s.strategies())
}

async fn tree(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.tree(&id)?))
}

async fn instance(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.instance(&id)?))
}

async fn record(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.record(&id)?))
}

async fn parallel(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.parallel(&id)?))
}

async fn correlation(
    State(s): State<Shared>,
    Path(id): Path<String>,
    q: Result<Query<CorrelationQuery>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    let q = query(q)?;
    let vars = q.vars.map(|v| v.split(',').map(|x| x.trim().to_string()).collect());
    Ok(Json(s.correlation(&id, q.window, q.bins, vars)?))
}

async fn residuals(
    State(s): State<Shared>,
    Path(id): Path<String>,
    q: Result<Query<BinsQuery>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.residuals(&id, query(q)?.bins)?))
}

async fn cash(
    State(s): State<Shared>,
    Path(id): Path<String>,
    q: Result<Query<CashQuery>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    let q = query(q)?;
    Ok(Json(s.cash(&id, q.from, q.to, q.warning, q.danger)?))
}

async fn trades(
    State(s): State<Shared>,
    Path(id): Path<String>,
    q: Result<Query<TradesQuery>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    let q = query(q)?;
    Ok(Json(s.trades(&id, q.symbol.as_deref(), q.from, q.to)?))
}

async fn market_list(State(s): State<Shared>) -> impl IntoResponse {
    Json(s.market_list())
}

async fn market_bars(
    State(s): State<Shared>,
    Path(symbol): Path<String>,
    q: Result<Query<Range>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    let q = query(q)?;
    Ok(Json(s.market_bars(&symbol, q.from, q.to).map_err(ApiError::path_lookup)?))
}

async fn overlay(
    State(s): State<Shared>,
    Path(symbol): Path<String>,
    q: Result<Query<Range>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    let q = query(q)?;
    Ok(Json(s.overlay(&symbol, q.from, q.to).map_err(ApiError::path_lookup)?))
}

async fn upload_market(
    State(s): State<Shared>,
    q: Result<Query<MarketUpload>, QueryRejection>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let symbol = query(q)?.symbol;
    let (summary, replaced) = blocking(move || s.ingest_market_csv(&symbol, &body)).await?;
    let status = if replaced { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(summary)))
}

async fn ingest(
    State(s): State<Shared>,
    q: Result<Query<IngestQuery>, QueryRejection>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let parent = query(q)?.parent_id;
    let record = parse_body(&body)?;
    let (response, created) = blocking(move || s.ingest_record(record, parent.as_deref())).await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(response)))
}

async fn run(State(s): State<Shared>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: RunRequest = parse_body(&body)?;
    let response = blocking(move || s.run_and_register(req)).await?;
    Ok((StatusCode::CREATED, Json(response)))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint")
}

pub fn router(service: Shared) -> Router {
    let api = Router::new()
        .route("/strategies", get(strategies))
        .route("/strategies/{id}/tree", get(tree))
        .route("/instances", axum::routing::post(ingest))
        .route("/instances/{id}", get(instance))
        .route("/instances/{id}/record", get(record))
        .route("/instances/{id}/parallel", get(parallel))
        .route("/instances/{id}/correlation", get(correlation))
        .route("/instances/{id}/residuals", get(residuals))
        .route("/instances/{id}/cash", get(cash))
        .route("/instances/{id}/trades", get(trades))
        .route("/market", get(market_list).post(upload_market))
        .route("/market/{symbol}", get(market_bars))
        .route("/market/{symbol}/overlay", get(overlay))
        .route("/backtests", axum::routing::post(run))
        .fallback(not_found)
        .with_state(service);
    Router::new().nest("/api", api)
}

/// The API plus static files (e.g. a built front end) served from `dir`.
pub fn router_with_static(service: Shared, dir: PathBuf) -> Router {
    router(service).fallback_service(ServeDir::new(dir))
}
