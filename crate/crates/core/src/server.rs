//! JSON-over-HTTP suggestion service.
//!
//! Endpoints:
//!
//! - `GET  /api/health`: `{status, model_topology, format_version}`, 503 until
//!   the model is loaded
//! - `POST /api/suggest`: `{label, prev_fingering?, k?}` to ranked suggestions
//! - `POST /api/continue`: `{labels, first_fingering}` to a chained sequence
//!
//! Errors are `{"error": {"code", "category", "message", "index"?}}` with
//! status 400 for bad input and 500 (without details) otherwise.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::chords::ChordLabel;
use crate::fretboard::Diagram;
use crate::model::{SuggestionModel, FORMAT_VERSION};
use crate::suggest::{suggest, Annotations, SuggestError, Suggestion};

pub const DEFAULT_K: usize = 5;
pub const MAX_K: usize = 25;

/// Shared service state: the model (set once) and request counters.
#[derive(Clone, Default)]
pub struct ApiSession {
    model: Arc<OnceLock<SuggestionModel>>,
    requests: Arc<AtomicU64>,
}

impl ApiSession {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_model(model: SuggestionModel) -> Self {
        let session = Self::default();
        session.install(model);
        session
    }

    /// Installs the model; later calls are ignored.
    pub fn install(&self, model: SuggestionModel) {
        let _ = self.model.set(model);
    }

    pub fn model(&self) -> Option<&SuggestionModel> {
        self.model.get()
    }

    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    /// Directory with the built web UI, served under `/`.
    pub ui_dir: Option<PathBuf>,
    pub permissive_cors: bool,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    category: &'static str,
    message: String,
    index: Option<usize>,
}

impl ApiError {
    fn bad_request(code: &'static str, category: &'static str, message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, code, category, message: message.into(), index: None }
    }

    fn at(mut self, index: usize) -> Self {
        self.index = Some(index);
        self
    }

    fn internal() -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "Internal",
            category: "Internal",
            message: "internal error".into(),
            index: None,
        }
    }

    fn not_ready() -> Self {
        ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            code: "ModelNotLoaded",
            category: "Unavailable",
            message: "model is still loading".into(),
            index: None,
        }
    }

    fn label(e: crate::chords::LabelError) -> Self {
        ApiError::bad_request(e.code(), "MalformedLabel", e.to_string())
    }

    fn fingering(e: crate::fretboard::DiagramError) -> Self {
        ApiError::bad_request(e.code(), "MalformedFingering", e.to_string())
    }
}

impl From<SuggestError> for ApiError {
    fn from(e: SuggestError) -> Self {
        match e {
            SuggestError::MissingContext => ApiError::bad_request("MissingContext", "MissingContext", e.to_string()),
            SuggestError::InvalidK => ApiError::bad_request("InvalidK", "MalformedRequest", e.to_string()),
            SuggestError::Model(_) => ApiError::internal(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "category": self.category, "message": self.message });
        if let Some(i) = self.index {
            error["index"] = json!(i);
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestRequest {
    pub label: String,
    #[serde(default)]
    pub prev_fingering: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionBody {
    pub fingering: String,
    pub score: f64,
    pub playability: f64,
    pub unplayable: bool,
    pub pitch_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chord_change_ease: Option<f64>,
}

impl From<&Suggestion> for SuggestionBody {
    fn from(s: &Suggestion) -> Self {
        SuggestionBody {
            fingering: s.diagram.to_string(),
            score: s.score,
            playability: s.annotations.playability,
            unplayable: s.annotations.unplayable,
            pitch_f1: s.annotations.pitch_f1,
            chord_change_ease: s.annotations.chord_change_ease,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub suggestions: Vec<SuggestionBody>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinueRequest {
    pub labels: Vec<String>,
    pub first_fingering: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepBody {
    pub label: String,
    pub fingering: String,
    pub playability: f64,
    pub unplayable: bool,
    pub pitch_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chord_change_ease: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinueResponse {
    pub fingerings: Vec<String>,
    pub steps: Vec<StepBody>,
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request("MalformedRequest", "MalformedRequest", e.to_string()))
}

fn loaded(session: &ApiSession) -> Result<&SuggestionModel, ApiError> {
    session.requests.fetch_add(1, Ordering::Relaxed);
    session.model().ok_or_else(ApiError::not_ready)
}

async fn health(State(session): State<ApiSession>) -> Response {
    match session.model() {
        Some(m) => Json(json!({
            "status": "ok",
            "model_topology": m.topology.as_str(),
            "format_version": FORMAT_VERSION,
        }))
        .into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({ "status": "loading" }))).into_response(),
    }
}

pub fn handle_suggest(model: &SuggestionModel, req: &SuggestRequest) -> Result<SuggestResponse, ApiError> {
    let label = ChordLabel::parse(&req.label).map_err(ApiError::label)?;
    let prev = req.prev_fingering.as_deref().map(Diagram::parse).transpose().map_err(ApiError::fingering)?;
    let k = req.k.unwrap_or(DEFAULT_K);
    if k == 0 || k > MAX_K {
        return Err(ApiError::bad_request("InvalidK", "MalformedRequest", format!("k must be in 1..={MAX_K}")));
    }
    let suggestions = suggest(model, &label, prev.as_ref(), k)?;
    Ok(SuggestResponse { suggestions: suggestions.iter().map(SuggestionBody::from).collect() })
}

pub fn handle_continue(model: &SuggestionModel, req: &ContinueRequest) -> Result<ContinueResponse, ApiError> {
    if req.labels.is_empty() {
        return Err(ApiError::bad_request("EmptySequence", "MalformedRequest", "labels must not be empty"));
    }
    let labels = req
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| ChordLabel::parse(l).map_err(|e| ApiError::label(e).at(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let first = Diagram::parse(&req.first_fingering).map_err(ApiError::fingering)?;
    let diagrams = crate::suggest::continue_sequence(model, &labels, first)?;

    let steps = diagrams
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let prev = i.checked_sub(1).map(|p| &diagrams[p]);
            let a = Annotations::compute(d, &labels[i], prev);
            StepBody {
                label: labels[i].to_string(),
                fingering: d.to_string(),
                playability: a.playability,
                unplayable: a.unplayable,
                pitch_f1: a.pitch_f1,
                chord_change_ease: a.chord_change_ease,
            }
        })
        .collect();
    Ok(ContinueResponse { fingerings: diagrams.iter().map(|d| d.to_string()).collect(), steps })
}

async fn suggest_route(State(session): State<ApiSession>, body: Bytes) -> Result<Json<SuggestResponse>, ApiError> {
    let model = loaded(&session)?;
    let req: SuggestRequest = parse_body(&body)?;
    handle_suggest(model, &req).map(Json)
}

async fn continue_route(State(session): State<ApiSession>, body: Bytes) -> Result<Json<ContinueResponse>, ApiError> {
    let model = loaded(&session)?;
    let req: ContinueRequest = parse_body(&body)?;
    handle_continue(model, &req).map(Json)
}

pub fn router(session: ApiSession, opts: &ServerOptions) -> Router {
    let mut app = Router::new()
        .route("/api/health", get(health))
        .route("/api/suggest", post(suggest_route))
        .route("/api/continue", post(continue_route))
        .with_state(session);
    if let Some(dir) = &opts.ui_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    if opts.permissive_cors {
        app = app.layer(CorsLayer::permissive());
    }
    app
}

/// Binds `addr`, loads the model in the background and serves until
/// interrupted. Health reports 503 until the model is ready.
pub async fn serve(addr: SocketAddr, model_path: &Path, opts: ServerOptions) -> anyhow::Result<()> {
    let session = ApiSession::new();
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);

    let loader = session.clone();
    let path = model_path.to_path_buf();
    let load = tokio::task::spawn_blocking(move || -> anyhow::Result<()> {
        let model = SuggestionModel::load(&path)?;
        eprintln!("loaded {} model from {}", model.topology.as_str(), path.display());
        loader.install(model);
        Ok(())
    });

    let app = router(session, &opts);
    let server = axum::serve(listener, app).with_graceful_shutdown(async {
        let _ = tokio::signal::ctrl_c().await;
    });
    let (served, loaded) = tokio::join!(server, load);
    loaded??;
    served?;
    Ok(())
}
