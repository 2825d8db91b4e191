// SPDX-License-Identifier: Apache-2.0

//! Routes and handlers.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde_json::json;

use pvil_core::metrics::{f1_report, EvalReport};
use pvil_session::{SelectionRegion, Session};

use crate::datasets::{carries_truth, CatalogPayload};
use crate::error::{ApiError, Result};
use crate::payload::{
    active_ranges, export_csv, export_token, ApiSession, BackResponse, CommitResponse, CreateSession, ExportPayload,
    FinishResponse, FinishSummary, SelectionPreview, SelectionRequest, ViewPayload,
};
use crate::store::AppState;

type AppResult<T> = Result<Json<T>>;
type Shared = State<Arc<AppState>>;

/// `Json` whose rejections use the API error body.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(rej) => {
                let code = match &rej {
                    JsonRejection::JsonDataError(_) => "invalid_request",
                    JsonRejection::JsonSyntaxError(_) => "malformed_json",
                    JsonRejection::MissingJsonContentType(_) => "unsupported_media_type",
                    _ => "bad_request",
                };
                Err(ApiError::new(rej.status(), code, rej.body_text()))
            }
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/datasets", get(list_datasets))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/view", get(view))
        .route("/sessions/{id}/selection", post(selection))
        .route("/sessions/{id}/commit", post(commit))
        .route("/sessions/{id}/back", post(back))
        .route("/sessions/{id}/finish", post(finish))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/score", get(score))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

async fn list_datasets(State(st): Shared) -> Json<CatalogPayload> {
    Json(st.catalog().listing())
}

async fn list_sessions(State(st): Shared) -> Json<serde_json::Value> {
    let sessions: Vec<ApiSession> = st.entries().iter().map(|e| e.api(&e.snapshot())).collect();
    Json(json!({ "sessions": sessions }))
}

async fn create_session(State(st): Shared, ApiJson(req): ApiJson<CreateSession>) -> Result<(StatusCode, Json<ApiSession>)> {
    let entry = st.create(req).await?;
    let body = entry.api(&entry.snapshot());
    log::info!("created session {} on {}", body.id, body.dataset_name);
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(st): Shared, Path(id): Path<String>) -> AppResult<ApiSession> {
    let entry = st.entry(&id)?;
    Ok(Json(entry.api(&entry.snapshot())))
}

async fn view(State(st): Shared, Path(id): Path<String>) -> AppResult<ViewPayload> {
    Ok(Json(ViewPayload::of(&st.entry(&id)?.snapshot())))
}

/// Maps a normalized polygon onto the raw coordinates of the active view.
fn raw_region(s: &Session, polygon: &[[f64; 2]]) -> Result<SelectionRegion> {
    if polygon.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_polygon",
            "polygon vertices must be finite",
        ));
    }
    let ranges = active_ranges(s);
    Ok(SelectionRegion::new(polygon.iter().map(|&p| ranges.denormalize(p)).collect())?)
}

async fn selection(
    State(st): Shared,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<SelectionRequest>,
) -> AppResult<SelectionPreview> {
    let s = st.entry(&id)?.snapshot();
    let region = raw_region(&s, &req.polygon)?;
    let res = s.resolve_selection(&region)?;
    Ok(Json(SelectionPreview::new(s.active_view().id, s.config().eta, res)))
}

async fn commit(
    State(st): Shared,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<SelectionRequest>,
) -> AppResult<CommitResponse> {
    let (entry, record, s) = st
        .mutate(&id, move |s| {
            if s.is_finished() {
                return Err(pvil_session::SessionError::Finished.into());
            }
            let region = raw_region(s, &req.polygon)?;
            Ok(s.commit_selection(region, req.proposed_class)?)
        })
        .await?;
    Ok(Json(CommitResponse {
        record,
        view_id: s.active_view().id,
        session: entry.api(&s),
    }))
}

async fn back(State(st): Shared, Path(id): Path<String>) -> AppResult<BackResponse> {
    let (entry, view_id, s) = st.mutate(&id, |s| Ok(s.back()?)).await?;
    Ok(Json(BackResponse {
        view_id,
        session: entry.api(&s),
    }))
}

async fn finish(State(st): Shared, Path(id): Path<String>) -> AppResult<FinishResponse> {
    let (entry, (), s) = st
        .mutate(&id, |s| {
            s.finish();
            Ok(())
        })
        .await?;
    Ok(Json(FinishResponse {
        summary: FinishSummary::of(&s),
        export_token: export_token(&s.export_labels()?),
        session: entry.api(&s),
    }))
}

async fn export(State(st): Shared, Path(id): Path<String>, Query(q): Query<HashMap<String, String>>) -> Result<Response> {
    let s = st.entry(&id)?.snapshot();
    let labels = s.export_labels()?;
    let token = export_token(&labels);
    match q.get("format").map(String::as_str) {
        None | Some("json") => Ok(Json(ExportPayload {
            session_id: s.id().to_string(),
            export_token: token,
            count: labels.len(),
            labels,
        })
        .into_response()),
        Some("csv") => Ok((
            [
                (header::CONTENT_TYPE, "text/csv".to_string()),
                (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{}_labels.csv\"", s.id())),
                (header::ETAG, format!("\"{token}\"")),
            ],
            export_csv(&labels),
        )
            .into_response()),
        Some(other) => Err(ApiError::invalid(format!("unknown export format '{other}' (expected json or csv)"))),
    }
}

async fn score(State(st): Shared, Path(id): Path<String>) -> AppResult<EvalReport> {
    let s = st.entry(&id)?.snapshot();
    let ds = s.dataset();
    if !carries_truth(&ds.provenance) {
        return Err(ApiError::not_found(format!("dataset '{}' carries no ground truth", ds.name)));
    }
    Ok(Json(f1_report(&s.ledger().labels(), &ds.truth)?))
}
