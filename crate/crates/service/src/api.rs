//! HTTP routes.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::QueryRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderName, HeaderValue};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use volstc_core::cluster::ClusterParams;

use crate::engine::{Engine, FrameOutput, VolumeMeta};
use crate::error::{ServiceError, ServiceResult};
use crate::session::StatePatch;
use crate::{socket, wire};

pub const REVISION_HEADER: &str = "x-volstc-revision";
pub const META_HEADER: &str = "x-volstc-meta";

pub type AppState = Arc<Engine>;

/// JSON body whose rejections use the service error format.
pub struct JsonBody<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for JsonBody<T> {
    type Rejection = ServiceError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| JsonBody(v))
            .map_err(|e| ServiceError::BadRequest(e.body_text()))
    }
}

pub(crate) async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ServiceResult<T> + Send + 'static,
) -> ServiceResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ServiceResult<T> {
    q.map(|Query(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

pub fn router(engine: AppState) -> Router {
    Router::new()
        .route("/volumes", post(register_volume).get(list_volumes))
        .route("/volumes/{id}/meta", get(volume_meta))
        .route("/volumes/{id}/clusters", get(volume_clusters))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/state", patch(update_state))
        .route("/sessions/{id}/frame", get(get_frame))
        .route("/sessions/{id}/pick", post(pick))
        .route("/sessions/{id}/map_point", post(map_point))
        .route("/sessions/{id}/socket", get(socket::upgrade))
        .with_state(engine)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterVolume {
    pub path: PathBuf,
}

async fn register_volume(State(engine): State<AppState>, JsonBody(req): JsonBody<RegisterVolume>) -> ServiceResult<Json<VolumeMeta>> {
    let meta = blocking(move || {
        let id = engine.register_volume_path(&req.path)?;
        engine.volume_meta(&id)
    })
    .await?;
    Ok(Json(meta))
}

async fn list_volumes(State(engine): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "volumes": engine.volume_ids() }))
}

async fn volume_meta(State(engine): State<AppState>, Path(id): Path<String>) -> ServiceResult<Json<VolumeMeta>> {
    Ok(Json(engine.volume_meta(&id)?))
}

#[derive(Debug, Deserialize)]
pub struct ClusterQuery {
    pub lambda_a: Option<f64>,
    pub eps: Option<f64>,
    pub min_pts: Option<usize>,
}

async fn volume_clusters(
    State(engine): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<ClusterQuery>, QueryRejection>,
) -> ServiceResult<Response> {
    let q = query(q)?;
    let entry = engine.volume(&id)?;
    let defaults = ClusterParams::for_lambda_v(entry.volume.value_range().min);
    let params = ClusterParams {
        lambda_a: q.lambda_a.unwrap_or(defaults.lambda_a),
        eps: q.eps.unwrap_or(defaults.eps),
        min_pts: q.min_pts.unwrap_or(defaults.min_pts),
    };
    params.validate()?;
    let summaries = blocking(move || engine.clusters(&id, params)).await?;
    Ok(Json(summaries).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub volume_id: String,
}

async fn create_session(State(engine): State<AppState>, JsonBody(req): JsonBody<CreateSession>) -> ServiceResult<Response> {
    Ok(Json(engine.create_session(&req.volume_id)?).into_response())
}

async fn get_session(State(engine): State<AppState>, Path(id): Path<String>) -> ServiceResult<Response> {
    Ok(Json(engine.session(&id)?.view()).into_response())
}

async fn update_state(
    State(engine): State<AppState>,
    Path(id): Path<String>,
    JsonBody(patch): JsonBody<StatePatch>,
) -> ServiceResult<Response> {
    Ok(Json(engine.update_state(&id, &patch)?).into_response())
}

#[derive(Debug, Default, Deserialize, PartialEq, Eq, Clone, Copy)]
#[serde(rename_all = "lowercase")]
pub enum FrameFormat {
    #[default]
    Png,
    Packet,
}

#[derive(Debug, Deserialize)]
pub struct FrameQuery {
    pub w: Option<u32>,
    pub h: Option<u32>,
    #[serde(default)]
    pub format: FrameFormat,
}

pub(crate) fn frame_packet(frame: &FrameOutput) -> ServiceResult<Vec<u8>> {
    let meta = serde_json::to_vec(&frame.meta).map_err(|e| ServiceError::Internal(e.to_string()))?;
    Ok(wire::encode_packet(frame.revision, &meta, &frame.png))
}

async fn get_frame(
    State(engine): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<FrameQuery>, QueryRejection>,
) -> ServiceResult<Response> {
    let q = query(q)?;
    let (w, h) = (q.w.unwrap_or(512), q.h.unwrap_or(512));
    engine.session(&id)?;
    let frame = blocking(move || engine.frame(&id, w, h)).await?;
    match q.format {
        FrameFormat::Packet => {
            let body = frame_packet(&frame)?;
            Ok(([(header::CONTENT_TYPE, "application/octet-stream")], body).into_response())
        }
        FrameFormat::Png => {
            let meta = serde_json::to_string(&frame.meta).map_err(|e| ServiceError::Internal(e.to_string()))?;
            let meta = HeaderValue::from_str(&meta).map_err(|e| ServiceError::Internal(e.to_string()))?;
            Ok((
                [
                    (header::CONTENT_TYPE, HeaderValue::from_static("image/png")),
                    (HeaderName::from_static(REVISION_HEADER), HeaderValue::from(frame.revision)),
                    (HeaderName::from_static(META_HEADER), meta),
                ],
                frame.png,
            )
                .into_response())
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixelRequest {
    pub px: f64,
    pub py: f64,
}

async fn pick(
    State(engine): State<AppState>,
    Path(id): Path<String>,
    JsonBody(req): JsonBody<PixelRequest>,
) -> ServiceResult<Response> {
    engine.session(&id)?;
    let out = blocking(move || engine.pick(&id, req.px, req.py)).await?;
    Ok(Json(out).into_response())
}

async fn map_point(
    State(engine): State<AppState>,
    Path(id): Path<String>,
    JsonBody(req): JsonBody<PixelRequest>,
) -> ServiceResult<Response> {
    let point = engine.map_point(&id, req.px, req.py)?;
    Ok(Json(json!({ "point": point })).into_response())
}
