//! JSON session API.

use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use wavcraft_core::dsp::read_wav;
use wavcraft_core::orchestrator::{add_input, run_round, Engine, FailureKind, LlmClient, RoundRecord, SessionState};

use crate::workspace::{Workspace, WorkspaceError};

/// Upload limit for input audio.
pub const MAX_UPLOAD_BYTES: usize = 512 << 20;

pub struct AppState {
    pub workspace: Workspace,
    pub engine: Engine,
    pub llm: Arc<dyn LlmClient>,
    pub default_seed: u64,
    busy: Mutex<HashSet<String>>,
}

impl AppState {
    pub fn new(workspace: Workspace, engine: Engine, llm: Arc<dyn LlmClient>, default_seed: u64) -> AppState {
        AppState { workspace, engine, llm, default_seed, busy: Mutex::default() }
    }

    /// Marks session `id` busy until the guard drops, or fails with 409.
    fn claim(self: &Arc<Self>, id: &str) -> Result<Claim, ApiError> {
        let mut busy = self.busy.lock().expect("busy set poisoned");
        if !busy.insert(id.to_string()) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "conflict",
                format!("session {id} is busy with another request"),
            ));
        }
        Ok(Claim { state: Arc::clone(self), id: id.to_string() })
    }
}

struct Claim {
    state: Arc<AppState>,
    id: String,
}

impl Drop for Claim {
    fn drop(&mut self) {
        self.state.busy.lock().expect("busy set poisoned").remove(&self.id);
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub round: Option<Box<RoundRecord>>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError { status, code, message: message.into(), round: None }
    }

    fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<WorkspaceError> for ApiError {
    fn from(err: WorkspaceError) -> ApiError {
        match err {
            WorkspaceError::NotFound(_) | WorkspaceError::InvalidId(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "not_found", err.to_string())
            }
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": { "code": self.code, "message": self.message } });
        if let Some(round) = self.round {
            body["round"] = serde_json::to_value(round).expect("round serializes");
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Default, Deserialize)]
struct CreateSession {
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
    pub session_seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UploadedInput {
    pub input_name: String,
    pub caption: String,
    pub artifact_id: String,
}

#[derive(Debug, Deserialize)]
struct RoundRequest {
    instruction: String,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session).get(list_sessions))
        .route("/v1/sessions/{id}", get(get_session).delete(delete_session))
        .route("/v1/sessions/{id}/inputs", post(upload_input))
        .route("/v1/sessions/{id}/rounds", post(post_round))
        .route("/v1/artifacts/{id}", get(get_artifact))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(work: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(work).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<CreatedSession>)> {
    let request: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        serde_json::from_slice::<Option<CreateSession>>(&body)
            .map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))?
            .unwrap_or_default()
    };
    let session = SessionState::new(uuid::Uuid::new_v4().to_string(), request.seed.unwrap_or(state.default_seed));
    let created = CreatedSession { session_id: session.session_id.clone(), session_seed: session.session_seed };
    blocking(move || state.workspace.save(&session).map_err(ApiError::from)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let list = blocking(move || Ok(state.workspace.list())).await?;
    Ok(Json(list).into_response())
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionState>> {
    Ok(Json(blocking(move || state.workspace.load(&id).map_err(ApiError::from)).await?))
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let claim = state.claim(&id)?;
    blocking(move || {
        let _claim = claim;
        state.workspace.delete(&id).map_err(ApiError::from)
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn upload_input(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<UploadedInput>)> {
    let claim = state.claim(&id)?;
    let uploaded = blocking(move || {
        let _claim = claim;
        let mut session = state.workspace.load(&id)?;
        let wav = read_wav(&body).map_err(|e| ApiError::bad_request(format!("not a readable WAV file: {e}")))?;
        let store = state.workspace.store(&id)?;
        let record = add_input(&mut session, &wav, &state.engine.backends, &store)
            .map_err(|e| ApiError::internal(format!("storing input: {e}")))?;
        let uploaded = UploadedInput {
            input_name: record.name.clone(),
            caption: record.caption.clone(),
            artifact_id: record.artifact_id.clone(),
        };
        state.workspace.save(&session)?;
        Ok(uploaded)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(uploaded)))
}

async fn post_round(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<RoundRecord>> {
    let request: RoundRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("expected {{\"instruction\": ...}}: {e}")))?;
    if request.instruction.trim().is_empty() {
        return Err(ApiError::bad_request("instruction is empty"));
    }
    if !state.workspace.exists(&id) {
        return Err(WorkspaceError::NotFound(id).into());
    }
    let claim = state.claim(&id)?;
    let record = blocking(move || {
        let _claim = claim;
        let mut session = state.workspace.load(&id)?;
        let store = state.workspace.store(&id)?;
        let record = run_round(&mut session, &request.instruction, state.llm.as_ref(), &state.engine, &store).clone();
        state.workspace.save(&session)?;
        Ok(record)
    })
    .await?;
    let failure = |code, message: &Option<String>| ApiError {
        status: StatusCode::BAD_GATEWAY,
        code,
        message: message.clone().unwrap_or_default(),
        round: Some(Box::new(record.clone())),
    };
    match record.failure {
        Some(FailureKind::Llm) => Err(failure("llm_error", &record.error)),
        Some(FailureKind::Backend) => Err(failure("backend_error", &record.error)),
        _ => Ok(Json(record)),
    }
}

async fn get_artifact(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = blocking(move || {
        let path = state
            .workspace
            .find_artifact(&id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("artifact {id} not found")))?;
        std::fs::read(&path).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}
