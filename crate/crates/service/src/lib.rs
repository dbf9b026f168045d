//! HTTP API for interactive matrix refinement. One robot session per process; the
//! browser viewer is served as static files from `/`.
//!
//! Endpoints (JSON bodies):
//!
//! ```text
//! POST /load        {"robot_dir": path}                 open an asset directory
//! GET  /robot                                           model summary
//! GET  /shapes/{type}                                   link-local render meshes
//! POST /config      {"values": [..]} | "random"          pose + sorted pair list
//! GET  /pairs                                           pair list at the current pose
//! POST /select      {"i", "j"}                          closest-point segment
//! POST /skip        {"i", "j", "on"}                    toggle one skip
//! POST /skip/bulk   {"mode": "raw"|"normalized", "threshold"}
//! GET  /skips                                           skip counts per reason
//! POST /export      {"format": "json"|"yaml"|"both"}    write all six matrices
//! POST /shape_type  {"name"}                            switch the active type
//! ```

mod session;

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use skipset::assets::AssetError;
use skipset::geometry::ShapeType;
use skipset::matrix::{BulkMode, ExportFormat, MatrixError};
use skipset::model::{ConfigSampler, ModelError};
use thiserror::Error;
use tower_http::services::ServeDir;

pub use session::{
    ExportResponse, LinkPose, PairsResponse, RenderShape, RobotSummary, Selection, Session,
    ShapesResponse, SkipSummary,
};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("no robot loaded; POST /load first")]
    NoSession,
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest(_) | ServiceError::Matrix(_) | ServiceError::Model(_) => {
                StatusCode::BAD_REQUEST
            }
            ServiceError::NotFound(_) | ServiceError::NoSession => StatusCode::NOT_FOUND,
            ServiceError::Asset(AssetError::Missing(_)) => StatusCode::NOT_FOUND,
            ServiceError::Asset(_) => StatusCode::BAD_REQUEST,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            log::error!("{self}");
        }
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ServiceOptions {
    /// Asset directory to open at startup.
    pub robot_dir: Option<PathBuf>,
    /// Built viewer assets served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Seed of the generator behind `"random"` configurations.
    pub rng_seed: u64,
}

/// Shared server state. Readers share the session lock; every mutating endpoint takes
/// it exclusively, so edits apply in some sequential order.
#[derive(Clone)]
pub struct AppState {
    session: Arc<RwLock<Option<Session>>>,
    sampler: Arc<Mutex<ConfigSampler>>,
}

impl AppState {
    pub fn new(session: Option<Session>, rng_seed: u64) -> Self {
        AppState {
            session: Arc::new(RwLock::new(session)),
            sampler: Arc::new(Mutex::new(ConfigSampler::new(rng_seed))),
        }
    }

    fn read<T: Send + 'static>(
        &self,
        f: impl FnOnce(&Session) -> Result<T, ServiceError> + Send + 'static,
    ) -> impl std::future::Future<Output = Result<T, ServiceError>> {
        let state = self.clone();
        blocking(move || {
            let guard = state.session.read();
            f(guard.as_ref().ok_or(ServiceError::NoSession)?)
        })
    }

    fn write<T: Send + 'static>(
        &self,
        f: impl FnOnce(&mut Session, &Mutex<ConfigSampler>) -> Result<T, ServiceError> + Send + 'static,
    ) -> impl std::future::Future<Output = Result<T, ServiceError>> {
        let state = self.clone();
        blocking(move || {
            let mut guard = state.session.write();
            f(guard.as_mut().ok_or(ServiceError::NoSession)?, &state.sampler)
        })
    }
}

/// Pair queries can take a while on large robots; keep them off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

fn body<T: DeserializeOwned>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

#[derive(Deserialize)]
struct LoadRequest {
    robot_dir: PathBuf,
}

async fn load(
    State(state): State<AppState>,
    payload: Result<Json<LoadRequest>, JsonRejection>,
) -> ApiResult<RobotSummary> {
    let request = body(payload)?;
    let summary = blocking(move || {
        let session = Session::load(&request.robot_dir)?;
        let summary = session.summary();
        *state.session.write() = Some(session);
        Ok(summary)
    })
    .await?;
    Ok(Json(summary))
}

async fn robot(State(state): State<AppState>) -> ApiResult<RobotSummary> {
    Ok(Json(state.read(|s| Ok(s.summary())).await?))
}

async fn shapes(
    State(state): State<AppState>,
    UrlPath(name): UrlPath<String>,
) -> ApiResult<ShapesResponse> {
    let shape_type = parse_shape_type(&name)?;
    Ok(Json(state.read(move |s| s.shapes(shape_type)).await?))
}

fn parse_shape_type(name: &str) -> Result<ShapeType, ServiceError> {
    name.parse()
        .map_err(|e: skipset::geometry::UnknownShapeType| ServiceError::BadRequest(e.to_string()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigRequest {
    Values { values: Vec<f64> },
    Random { random: bool },
    Keyword(String),
}

async fn config(
    State(state): State<AppState>,
    payload: Result<Json<ConfigRequest>, JsonRejection>,
) -> ApiResult<PairsResponse> {
    let values = match body(payload)? {
        ConfigRequest::Values { values } => Some(values),
        ConfigRequest::Random { random: true } => None,
        ConfigRequest::Keyword(k) if k == "random" => None,
        _ => {
            return Err(ServiceError::BadRequest(
                r#"expected {"values": [...]} or "random""#.into(),
            ))
        }
    };
    let response = state
        .write(move |s, sampler| s.set_config(values, &mut sampler.lock()))
        .await?;
    Ok(Json(response))
}

async fn pairs(State(state): State<AppState>) -> ApiResult<PairsResponse> {
    Ok(Json(state.read(|s| s.pairs()).await?))
}

#[derive(Deserialize)]
struct PairRequest {
    i: usize,
    j: usize,
}

async fn select(
    State(state): State<AppState>,
    payload: Result<Json<PairRequest>, JsonRejection>,
) -> ApiResult<Selection> {
    let PairRequest { i, j } = body(payload)?;
    Ok(Json(state.write(move |s, _| s.select(i, j)).await?))
}

#[derive(Deserialize)]
struct SkipRequest {
    i: usize,
    j: usize,
    on: bool,
}

async fn skip(
    State(state): State<AppState>,
    payload: Result<Json<SkipRequest>, JsonRejection>,
) -> ApiResult<SkipSummary> {
    let SkipRequest { i, j, on } = body(payload)?;
    Ok(Json(state.write(move |s, _| s.set_skip(i, j, on)).await?))
}

#[derive(Deserialize)]
struct BulkRequest {
    mode: String,
    threshold: f64,
}

async fn skip_bulk(
    State(state): State<AppState>,
    payload: Result<Json<BulkRequest>, JsonRejection>,
) -> ApiResult<SkipSummary> {
    let request = body(payload)?;
    let mode: BulkMode = request.mode.parse()?;
    let threshold = request.threshold;
    Ok(Json(state.write(move |s, _| s.bulk_skip(mode, threshold)).await?))
}

async fn skips(State(state): State<AppState>) -> ApiResult<SkipSummary> {
    Ok(Json(state.read(|s| Ok(s.skip_summary())).await?))
}

#[derive(Deserialize)]
struct ExportRequest {
    #[serde(default)]
    format: Option<String>,
}

async fn export(
    State(state): State<AppState>,
    payload: Result<Json<ExportRequest>, JsonRejection>,
) -> ApiResult<ExportResponse> {
    let formats = match body(payload)?.format.as_deref() {
        None | Some("both") => ExportFormat::ALL.to_vec(),
        Some(name) => vec![name.parse::<ExportFormat>()?],
    };
    Ok(Json(state.write(move |s, _| s.export(&formats)).await?))
}

#[derive(Deserialize)]
struct ShapeTypeRequest {
    name: String,
}

async fn shape_type(
    State(state): State<AppState>,
    payload: Result<Json<ShapeTypeRequest>, JsonRejection>,
) -> ApiResult<PairsResponse> {
    let shape_type = parse_shape_type(&body(payload)?.name)?;
    Ok(Json(state.write(move |s, _| s.set_shape_type(shape_type)).await?))
}

const PLACEHOLDER: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>skipset</title></head>
<body><h1>skipset refinement service</h1>
<p>The viewer is not installed. Start the service with <code>--static-dir</code> pointing at
the built viewer, or talk to the JSON API directly (<code>GET /robot</code>).</p>
</body></html>
";

async fn placeholder() -> Html<&'static str> {
    Html(PLACEHOLDER)
}

/// The API routes over `state`, with viewer assets from `static_dir` at `/`.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/load", post(load))
        .route("/robot", get(robot))
        .route("/shapes/{shape_type}", get(shapes))
        .route("/config", post(config))
        .route("/pairs", get(pairs))
        .route("/select", post(select))
        .route("/skip", post(skip))
        .route("/skip/bulk", post(skip_bulk))
        .route("/skips", get(skips))
        .route("/export", post(export))
        .route("/shape_type", post(shape_type))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    }
}

/// Build the application, opening `options.robot_dir` when given.
pub fn app(options: &ServiceOptions) -> Result<Router, ServiceError> {
    let session = options
        .robot_dir
        .as_deref()
        .map(Session::load)
        .transpose()?;
    Ok(router(
        AppState::new(session, options.rng_seed),
        options.static_dir.clone(),
    ))
}

/// Serve `app` on `listener` until the process ends.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}
