//! Routes and handlers.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cef_analytics::report::{analyze, AnalysisOptions, StudyData};
use cef_study::engine::{AnswerAck, CreateSession, QuestionnaireAck, QuestionnaireSubmission, SessionCreated, SubmitAnswer};
use cef_study::export::{questionnaire_rows, session_rows, trial_rows};
use cef_study::session::{SessionStatus, TaskView};
use cef_study::{Engine, StudyError};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::BalanceMode;
use crate::error::ApiError;
use crate::schemas;

/// Shared handler state.
#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub balance: BalanceMode,
    pub admin_token: Option<String>,
    pub finish_secret: String,
    pub analysis: AnalysisOptions,
}

/// `Json` whose rejections become 400 responses in the API error format.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let json = req
            .headers()
            .get(header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v.split(';').next().is_some_and(|m| m.trim().eq_ignore_ascii_case("application/json")));
        if !json {
            return Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type", "expected `Content-Type: application/json`"));
        }
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::schema(e.body_text(), None))?;
        // serde accepts a sequence for a struct; the wire format is objects only
        if bytes.iter().find(|b| !b.is_ascii_whitespace()) != Some(&b'{') {
            return Err(ApiError::schema("request body must be a JSON object", None));
        }
        match Json::<T>::from_bytes(&bytes) {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(rejection) => Err(rejection_error(&rejection)),
        }
    }
}

fn rejection_error(rejection: &JsonRejection) -> ApiError {
    let text = rejection.body_text();
    ApiError::schema(text.clone(), field_in(&text))
}

/// Field named by a serde message: a backticked name after "field", or the
/// path prefix axum adds before the first ": ".
fn field_in(text: &str) -> Option<String> {
    if let Some(rest) = text.split("field `").nth(1) {
        return rest.split('`').next().map(str::to_string);
    }
    let detail = text.split_once("target type: ")?.1;
    let (path, _) = detail.split_once(": ")?;
    (!path.contains(' ')).then(|| path.to_string())
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn bearer(headers: &HeaderMap) -> Result<String, ApiError> {
    let value = headers
        .get(header::AUTHORIZATION)
        .ok_or_else(|| ApiError::unauthorized("missing bearer token"))?
        .to_str()
        .map_err(|_| ApiError::unauthorized("malformed authorization header"))?;
    let token = value
        .strip_prefix("Bearer ")
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| ApiError::unauthorized("expected `Authorization: Bearer <token>`"))?;
    Ok(token.to_string())
}

/// Short code shown to a participant who finished, for crowdsourcing payouts.
pub fn finish_code(secret: &str, session_id: &str) -> String {
    let mut h = Sha256::new();
    h.update(secret.as_bytes());
    h.update(b"\0finish\0");
    h.update(session_id.as_bytes());
    hex::encode(h.finalize())[..10].to_ascii_uppercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum DoneView {
    Completed { session_id: String, finish_code: String },
    Closed { session_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum NextView {
    Task(TaskView),
    Done(DoneView),
}

async fn create_session(State(st): State<AppState>, ApiJson(req): ApiJson<CreateSession>) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    if st.balance == BalanceMode::Auto && req.condition.is_some() {
        return Err(ApiError::schema("condition is assigned by the server", Some("condition".into())));
    }
    let created = blocking(move || Ok(st.engine.create_session(req)?)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn next_task(State(st): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> Result<Json<NextView>, ApiError> {
    let token = bearer(&headers)?;
    blocking(move || {
        st.engine.authorize(&id, &token)?;
        match st.engine.next_task(&id) {
            Ok(view) => Ok(Json(NextView::Task(view))),
            Err(StudyError::Completed(_)) => {
                let done = match st.engine.session(&id)?.status {
                    SessionStatus::Excluded => DoneView::Closed { session_id: id },
                    _ => DoneView::Completed {
                        finish_code: finish_code(&st.finish_secret, &id),
                        session_id: id,
                    },
                };
                Ok(Json(NextView::Done(done)))
            }
            Err(e) => Err(e.into()),
        }
    })
    .await
}

async fn submit_answer(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    ApiJson(req): ApiJson<SubmitAnswer>,
) -> Result<Json<AnswerAck>, ApiError> {
    let token = bearer(&headers)?;
    blocking(move || {
        st.engine.authorize(&id, &token)?;
        Ok(Json(st.engine.submit_answer(&id, req)?))
    })
    .await
}

async fn submit_questionnaire(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    ApiJson(req): ApiJson<QuestionnaireSubmission>,
) -> Result<Json<QuestionnaireAck>, ApiError> {
    let token = bearer(&headers)?;
    blocking(move || {
        st.engine.authorize(&id, &token)?;
        Ok(Json(st.engine.record_questionnaire(&id, req)?))
    })
    .await
}

fn require_admin(st: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let Some(expected) = &st.admin_token else {
        return Err(ApiError::unauthorized("admin access is not configured"));
    };
    let token = bearer(headers)?;
    // compare digests so the comparison time does not depend on the prefix match
    if Sha256::digest(token.as_bytes()) == Sha256::digest(expected.as_bytes()) {
        Ok(())
    } else {
        Err(ApiError::unauthorized("invalid admin token"))
    }
}

fn study_data(engine: &Engine) -> StudyData {
    let sessions = engine.sessions();
    StudyData {
        sessions: session_rows(&sessions),
        trials: trial_rows(&sessions),
        questionnaires: questionnaire_rows(&sessions, &engine.context().instruments),
    }
}

async fn admin_summary(State(st): State<AppState>, headers: HeaderMap) -> Result<Response, ApiError> {
    require_admin(&st, &headers)?;
    blocking(move || {
        let data = study_data(&st.engine);
        let report = analyze(&data, &st.engine.context().instruments, &st.analysis)?;
        Ok(Json(report.summary).into_response())
    })
    .await
}

fn csv_body<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, ApiError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| ApiError::internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| ApiError::internal(e.to_string()))
}

async fn admin_export(State(st): State<AppState>, Path(file): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    require_admin(&st, &headers)?;
    blocking(move || {
        let data = study_data(&st.engine);
        let body = match file.as_str() {
            "trials.csv" => csv_body(&data.trials)?,
            "questionnaires.csv" => csv_body(&data.questionnaires)?,
            "sessions.csv" => csv_body(&data.sessions)?,
            _ => return Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no export named `{file}`"))),
        };
        Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("text/csv; charset=utf-8"))], body).into_response())
    })
    .await
}

async fn healthz(State(st): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok", "sessions": st.engine.count_by_status()}))
}

async fn schema(Path(name): Path<String>) -> Result<Response, ApiError> {
    let name = name.strip_suffix(".json").unwrap_or(&name);
    let text = schemas::get(name).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no schema named `{name}`")))?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("application/schema+json"))], text).into_response())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

/// API routes without static assets or CORS.
pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/next", get(next_task))
        .route("/api/sessions/{id}/answers", post(submit_answer))
        .route("/api/sessions/{id}/questionnaires", post(submit_questionnaire))
        .route("/api/admin/summary", get(admin_summary))
        .route("/api/admin/export/{file}", get(admin_export))
        .route("/api/schemas/{name}", get(schema))
        .route("/healthz", get(healthz))
        .fallback(not_found)
        .with_state(state)
}
