//! JSON-over-HTTP front end for [`AnnotationService`].
//!
//! Every request except `GET /health` and `GET /sections` must carry an
//! `x-annotator-id` header.
//!
//! | method | path                                   | body                                  |
//! |--------|----------------------------------------|---------------------------------------|
//! | POST   | `/sessions`                            | `{"section_ids": [..]}`               |
//! | GET    | `/sessions/{id}`                       |                                       |
//! | GET    | `/sessions/{id}/next`                  |                                       |
//! | GET    | `/sessions/{id}/items/{item}`          |                                       |
//! | PUT    | `/sessions/{id}/items/{item}`          | `{"base_version": n, "paragraph": ..}` |
//! | POST   | `/sessions/{id}/items/{item}/skip`     |                                       |
//! | GET    | `/export?annotator_id=&section_ids=`   |                                       |
//! | GET    | `/export/paired?first=&second=`        |                                       |

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use corwa_core::annotation::{
    Agreement, AnnotationError, AnnotationService, AnnotationSession, CorrectionRecord, Export, ExportFilter, PairedExport,
    Pretagged,
};
use corwa_core::LabeledParagraph;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const ANNOTATOR_HEADER: &str = "x-annotator-id";

type Shared = Arc<AnnotationService>;

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sections", get(sections))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/items/{item}", get(fetch_item).put(put_correction))
        .route("/sessions/{id}/items/{item}/skip", post(skip_item))
        .route("/export", get(export))
        .route("/export/paired", get(paired_export))
        .with_state(service)
}

#[derive(Debug)]
pub enum ApiError {
    MissingAnnotator,
    BadRequest(String),
    Service(AnnotationError),
    Internal(String),
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        ApiError::Service(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::MissingAnnotator => (
                StatusCode::UNAUTHORIZED,
                json!({"error": "missing_annotator", "message": format!("missing {ANNOTATOR_HEADER} header")}),
            ),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({"error": "bad_request", "message": m})),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "internal", "message": m})),
            ApiError::Service(e) => {
                let message = e.to_string();
                match e {
                    AnnotationError::EmptySectionList => {
                        (StatusCode::UNPROCESSABLE_ENTITY, json!({"error": "empty_section_list", "message": message}))
                    }
                    AnnotationError::UnknownSection(_) => {
                        (StatusCode::NOT_FOUND, json!({"error": "unknown_section", "message": message}))
                    }
                    AnnotationError::UnknownSession(_) => {
                        (StatusCode::NOT_FOUND, json!({"error": "unknown_session", "message": message}))
                    }
                    AnnotationError::UnknownItem { .. } => {
                        (StatusCode::NOT_FOUND, json!({"error": "unknown_item", "message": message}))
                    }
                    AnnotationError::WrongAnnotator { .. } => {
                        (StatusCode::FORBIDDEN, json!({"error": "wrong_annotator", "message": message}))
                    }
                    AnnotationError::ParagraphMismatch => {
                        (StatusCode::UNPROCESSABLE_ENTITY, json!({"error": "paragraph_mismatch", "message": message}))
                    }
                    AnnotationError::Invalid(violations) => (
                        StatusCode::UNPROCESSABLE_ENTITY,
                        json!({"error": "invalid", "message": message, "violations": violations}),
                    ),
                    AnnotationError::Conflict { based_on, current } => (
                        StatusCode::CONFLICT,
                        json!({"error": "conflict", "message": message, "based_on": based_on, "current": current}),
                    ),
                    _ => {
                        log::error!("{message}");
                        (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "internal", "message": message}))
                    }
                }
            }
        };
        (status, Json(body)).into_response()
    }
}

fn annotator(headers: &HeaderMap) -> Result<String, ApiError> {
    headers
        .get(ANNOTATOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(str::to_string)
        .ok_or(ApiError::MissingAnnotator)
}

/// Runs a service call off the async executor; pre-tagging and log appends
/// can block.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, AnnotationError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(ApiError::from)
}

async fn sections(State(svc): State<Shared>) -> Json<Vec<String>> {
    Json(svc.section_ids())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSession {
    pub section_ids: Vec<String>,
}

async fn create_session(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<AnnotationSession>), ApiError> {
    let who = annotator(&headers)?;
    let session = blocking(move || svc.create_session(&who, &req.section_ids)).await?;
    Ok((StatusCode::CREATED, Json(session)))
}

async fn get_session(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Json<AnnotationSession>, ApiError> {
    let who = annotator(&headers)?;
    let session = svc.session(&id)?;
    if session.annotator_id != who {
        return Err(AnnotationError::WrongAnnotator { session: id }.into());
    }
    Ok(Json(session))
}

#[derive(Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextItem {
    /// `None` once every item is corrected or skipped.
    pub item: Option<usize>,
}

async fn next_item(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Json<NextItem>, ApiError> {
    let who = annotator(&headers)?;
    Ok(Json(NextItem {
        item: svc.next_item(&id, &who)?,
    }))
}

async fn fetch_item(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path((id, item)): Path<(String, usize)>,
) -> Result<Json<Pretagged>, ApiError> {
    let who = annotator(&headers)?;
    Ok(Json(blocking(move || svc.fetch_pretagged(&id, &who, item)).await?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Correction {
    pub base_version: u64,
    pub paragraph: LabeledParagraph,
}

async fn put_correction(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path((id, item)): Path<(String, usize)>,
    Json(req): Json<Correction>,
) -> Result<Json<CorrectionRecord>, ApiError> {
    let who = annotator(&headers)?;
    let record = blocking(move || svc.submit_correction(&id, &who, item, req.paragraph, req.base_version)).await?;
    Ok(Json(record))
}

async fn skip_item(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path((id, item)): Path<(String, usize)>,
) -> Result<StatusCode, ApiError> {
    let who = annotator(&headers)?;
    blocking(move || svc.skip_item(&id, &who, item)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    annotator_id: Option<String>,
    /// Comma-separated.
    section_ids: Option<String>,
}

async fn export(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<ExportQuery>,
) -> Result<Json<Export>, ApiError> {
    annotator(&headers)?;
    let section_ids = q.section_ids.map(|s| {
        s.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect::<BTreeSet<_>>()
    });
    let filter = ExportFilter {
        annotator_id: q.annotator_id,
        section_ids,
    };
    Ok(Json(svc.export_corrected(&filter)))
}

#[derive(Debug, Deserialize)]
struct PairedQuery {
    first: String,
    second: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairedResponse {
    #[serde(flatten)]
    pub export: PairedExport,
    /// Absent when there are no shared items or agreement is undefined.
    pub agreement: Option<Agreement>,
}

async fn paired_export(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<PairedQuery>,
) -> Result<Json<PairedResponse>, ApiError> {
    annotator(&headers)?;
    if q.first == q.second {
        return Err(ApiError::BadRequest("paired export needs two different annotators".into()));
    }
    let export = svc.paired_export(&q.first, &q.second)?;
    let agreement = export.kappas().ok();
    Ok(Json(PairedResponse { export, agreement }))
}
