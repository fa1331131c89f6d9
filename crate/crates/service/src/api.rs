//! HTTP API (JSON bodies, CSV for exports).
//!
//! | method | path | |
//! |---|---|---|
//! | GET  | `/campaigns` | campaign list |
//! | GET  | `/campaigns/{id}/next?annotator=` | next task, `task: null` when none remain |
//! | POST | `/campaigns/{id}/judgments` | record one or more judgments |
//! | GET  | `/campaigns/{id}/progress` | per-annotator counts |
//! | GET  | `/campaigns/{id}/export?view=annotator\|analysis` | CSV |
//! | POST | `/auth/session` | exchange an access code for a session token |
//!
//! Errors are `{"error": "<code>", "message": "..."}` with a 4xx/5xx status.

use std::net::SocketAddr;
use std::sync::Arc;

use a2t_core::annotation::{export_csv, next_task, AnnotatorTask, CampaignKind, ExportView, Judgment, Receipt};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::config::{AuthConfig, ServiceConfig};
use crate::session::{constant_time_eq, now_ms, SessionToken, Sessions};
use crate::store::{AnnotatorProgress, CampaignHandle, CampaignStore};
use crate::{Result, ServiceError};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<CampaignStore>,
    pub sessions: Arc<Sessions>,
    pub auth: Arc<AuthConfig>,
}

impl AppState {
    pub fn new(store: CampaignStore, auth: AuthConfig) -> Self {
        AppState {
            store: Arc::new(store),
            sessions: Arc::new(Sessions::new(auth.session_ttl_secs)),
            auth: Arc::new(auth),
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn unauthorized(msg: &str) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", msg)
    }

    fn forbidden(msg: impl Into<String>) -> Self {
        Self::new(StatusCode::FORBIDDEN, "forbidden", msg)
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        use a2t_core::Error as E;
        let status = match &e {
            ServiceError::Core(E::InvalidJudgment { code: "unassigned_annotator", .. }) => StatusCode::FORBIDDEN,
            ServiceError::Core(E::InvalidJudgment { .. } | E::Arity { .. } | E::Unknown { .. }) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::Core(E::Parse { .. }) | ServiceError::Data(_) => StatusCode::BAD_REQUEST,
            ServiceError::Core(E::DuplicateId(_)) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let code = match &e {
            ServiceError::Core(c) => c.code(),
            ServiceError::Data(_) => "bad_request",
            _ => "internal",
        };
        if status.is_server_error() {
            log::error!("{e}");
        }
        ApiError::new(status, code, e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code,
            message: &self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/campaigns", get(list_campaigns))
        .route("/campaigns/{id}/next", get(next))
        .route("/campaigns/{id}/judgments", post(submit))
        .route("/campaigns/{id}/progress", get(progress))
        .route("/campaigns/{id}/export", get(export))
        .route("/auth/session", post(open_session))
        .with_state(state)
}

fn campaign(state: &AppState, id: &str) -> ApiResult<Arc<CampaignHandle>> {
    state
        .store
        .get(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_campaign", format!("no campaign {id:?}")))
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

fn session(state: &AppState, headers: &HeaderMap, campaign_id: &str) -> ApiResult<Option<SessionToken>> {
    let Some(token) = bearer(headers) else {
        return if state.auth.required {
            Err(ApiError::unauthorized("missing bearer token"))
        } else {
            Ok(None)
        };
    };
    let s = state
        .sessions
        .validate(token, now_ms())
        .ok_or_else(|| ApiError::unauthorized("unknown or expired session"))?;
    if s.campaign_id != campaign_id {
        return Err(ApiError::forbidden("session belongs to another campaign"));
    }
    Ok(Some(s))
}

fn is_admin(state: &AppState, headers: &HeaderMap) -> bool {
    match (&state.auth.admin_token, bearer(headers)) {
        (Some(admin), Some(given)) => constant_time_eq(admin, given),
        _ => false,
    }
}

/// The acting annotator: the session's when authenticated, else the one named.
fn acting_annotator(session: &Option<SessionToken>, named: Option<&str>) -> ApiResult<String> {
    match (session, named) {
        (Some(s), Some(n)) if s.annotator_id != n => {
            Err(ApiError::forbidden(format!("session is for annotator {:?}", s.annotator_id)))
        }
        (Some(s), _) => Ok(s.annotator_id.clone()),
        (None, Some(n)) if !n.is_empty() => Ok(n.to_string()),
        (None, _) => Err(ApiError::new(StatusCode::BAD_REQUEST, "missing_annotator", "annotator is required")),
    }
}

#[derive(Serialize, Deserialize)]
pub struct CampaignSummary {
    pub id: String,
    pub kind: CampaignKind,
    pub instances: usize,
    pub annotators: Vec<String>,
}

#[derive(Serialize, Deserialize)]
pub struct CampaignList {
    pub campaigns: Vec<CampaignSummary>,
}

async fn list_campaigns(State(state): State<AppState>) -> Json<CampaignList> {
    let campaigns = state
        .store
        .list()
        .iter()
        .map(|h| {
            let c = h.campaign();
            CampaignSummary {
                id: c.id.clone(),
                kind: c.kind,
                instances: c.instances.len(),
                annotators: c.annotators().into_iter().map(str::to_string).collect(),
            }
        })
        .collect();
    Json(CampaignList { campaigns })
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub struct NextResponse {
    /// `None` once every assigned instance is judged (or nothing is assigned).
    pub task: Option<AnnotatorTask>,
    pub remaining: usize,
    pub progress: AnnotatorProgress,
}

async fn next(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<NextQuery>,
    headers: HeaderMap,
) -> ApiResult<Json<NextResponse>> {
    let handle = campaign(&state, &id)?;
    let session = session(&state, &headers, &id)?;
    let annotator = acting_annotator(&session, q.annotator.as_deref())?;
    let c = handle.campaign();
    let (task, remaining) = next_task(c, &handle.state(), &annotator);
    let assigned = c.assigned_instances(&annotator).count();
    Ok(Json(NextResponse {
        task,
        remaining,
        progress: AnnotatorProgress {
            assigned,
            done: assigned - remaining,
        },
    }))
}

/// Either `judgment` or `judgments`. The idempotency key may also come from the
/// `Idempotency-Key` header; in a batch item `i` uses `<key>#<i>`.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgment: Option<Judgment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub judgments: Vec<Judgment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub receipts: Vec<Receipt>,
}

async fn submit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<SubmitResponse>> {
    let handle = campaign(&state, &id)?;
    let session = session(&state, &headers, &id)?;
    let req: SubmitRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.to_string()))?;
    let key = headers
        .get("idempotency-key")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
        .or(req.idempotency_key);
    let single = req.judgment.is_some();
    let mut judgments: Vec<Judgment> = req.judgment.into_iter().chain(req.judgments).collect();
    if judgments.is_empty() || (single && judgments.len() > 1) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "malformed_body",
            "send exactly one of `judgment` or a non-empty `judgments`",
        ));
    }
    let now = now_ms();
    for j in &mut judgments {
        acting_annotator(&session, Some(j.annotator_id()))?;
        if j.timestamp_ms() == 0 {
            j.set_timestamp_ms(now);
        }
    }
    let batch: Vec<(Judgment, Option<String>)> = judgments
        .into_iter()
        .enumerate()
        .map(|(i, j)| {
            let k = key.as_ref().map(|k| if single { k.clone() } else { format!("{k}#{i}") });
            (j, k)
        })
        .collect();
    let receipts = tokio::task::spawn_blocking(move || handle.record(batch))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(SubmitResponse { receipts }))
}

async fn progress(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let handle = campaign(&state, &id)?;
    Ok(Json(handle.progress()).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    view: Option<String>,
}

async fn export(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let handle = campaign(&state, &id)?;
    let view: ExportView = q
        .view
        .as_deref()
        .unwrap_or("annotator")
        .parse()
        .map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, "bad_view", e))?;
    let admin = is_admin(&state, &headers);
    match view {
        ExportView::Analysis if state.auth.required && !admin => {
            return Err(ApiError::forbidden("the analysis export needs the admin token"));
        }
        ExportView::Annotator if !admin => {
            session(&state, &headers, &id)?;
        }
        _ => {}
    }
    let csv = export_csv(handle.campaign(), &handle.state(), view).map_err(ServiceError::from)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionRequest {
    pub annotator_id: String,
    pub campaign_id: String,
    #[serde(default)]
    pub access_code: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionResponse {
    pub token: String,
    pub annotator_id: String,
    pub campaign_id: String,
    pub expires_at_ms: u64,
}

async fn open_session(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<SessionResponse>> {
    let req: SessionRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.to_string()))?;
    let handle = campaign(&state, &req.campaign_id)?;
    if state.auth.required {
        let ok = state
            .auth
            .access_codes
            .get(&req.annotator_id)
            .is_some_and(|code| constant_time_eq(code, &req.access_code));
        if !ok {
            return Err(ApiError::unauthorized("unknown annotator or wrong access code"));
        }
    }
    if !handle.campaign().annotators().contains(req.annotator_id.as_str()) {
        return Err(ApiError::forbidden(format!(
            "annotator {:?} has no assignments in {:?}",
            req.annotator_id, req.campaign_id
        )));
    }
    let (token, s) = state.sessions.issue(&req.annotator_id, &req.campaign_id, now_ms());
    Ok(Json(SessionResponse {
        token,
        annotator_id: s.annotator_id,
        campaign_id: s.campaign_id,
        expires_at_ms: s.expires_at_ms,
    }))
}

/// Open the store and bind. The store is replayed before the port is taken, so
/// a corrupt store never accepts connections.
pub async fn bind(cfg: &ServiceConfig) -> Result<(tokio::net::TcpListener, AppState)> {
    let store = CampaignStore::open(&cfg.data_dir, cfg.snapshot_every)?;
    let addr = format!("{}:{}", cfg.host, cfg.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| ServiceError::Data(format!("cannot listen on {addr}: {e}")))?;
    Ok((listener, AppState::new(store, cfg.auth.clone())))
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> Result<()> {
    let addr: SocketAddr = listener.local_addr()?;
    log::info!("listening on http://{addr}");
    // Printed for supervisors and tests that bind port 0.
    println!("listening on {addr}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
