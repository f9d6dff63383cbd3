//! HTTP service over a loaded index.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use subsearch_core::{CandidateMode, DistanceKind, Fusion, IndexedCollection, RankingConfig};

use crate::embed::{EmbedClient, EmbedError};
use crate::search::{run_search, Overrides, QueryPayload, SearchRequest, DEFAULT_TOP_K};

const IMAGE_EXTENSIONS: [(&str, &str); 5] = [
    ("jpg", "image/jpeg"),
    ("jpeg", "image/jpeg"),
    ("png", "image/png"),
    ("webp", "image/webp"),
    ("gif", "image/gif"),
];

#[derive(Clone)]
pub struct AppState {
    pub index: Arc<IndexedCollection>,
    pub embed: Option<EmbedClient>,
    pub images_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(index: IndexedCollection) -> Self {
        AppState {
            index: Arc::new(index),
            embed: None,
            images_dir: None,
        }
    }

    pub fn with_embed_url(mut self, url: Option<&str>) -> Self {
        self.embed = url.map(EmbedClient::new);
        self
    }

    pub fn with_images_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.images_dir = dir;
        self
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/search", post(search))
        .route("/v1/images/{image_id}", get(image))
        .route("/v1/meta", get(meta))
        .route("/health", get(|| async { "ok" }))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr()?, images = state.index.len(), "serving");
    axum::serve(listener, router(state)).await
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl ToString) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.to_string())
}

async fn search(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: SearchRequest = serde_json::from_slice(&body).map_err(bad_request)?;
    let resolved = req.resolve(&Overrides::default()).map_err(bad_request)?;
    let dim = state.index.dim();

    let query = match &resolved.payload {
        QueryPayload::Embedding(v) => {
            if v.len() != dim {
                return Err(ApiError(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    format!("embedding has dim {}, index has dim {dim}", v.len()),
                ));
            }
            v.clone()
        }
        QueryPayload::Text(t) => {
            let client = state.embed.as_ref().ok_or_else(|| {
                ApiError(
                    StatusCode::BAD_GATEWAY,
                    EmbedError::NotConfigured.to_string(),
                )
            })?;
            let v = client.embed_text(t).await.map_err(|e| {
                tracing::warn!(error = %e, "embed request failed");
                ApiError(StatusCode::BAD_GATEWAY, e.to_string())
            })?;
            if v.len() != dim {
                return Err(ApiError(
                    StatusCode::BAD_GATEWAY,
                    format!(
                        "embed service returned dim {}, index has dim {dim}",
                        v.len()
                    ),
                ));
            }
            v
        }
    };

    let index = Arc::clone(&state.index);
    let result = tokio::task::spawn_blocking(move || run_search(&index, query, &resolved))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    match result {
        Ok(resp) => Ok(Json(resp).into_response()),
        Err(e @ subsearch_core::Error::DimMismatch { .. }) => {
            Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
        }
        Err(e) => Err(bad_request(e)),
    }
}

async fn meta(State(state): State<AppState>) -> Json<serde_json::Value> {
    let defaults = RankingConfig::default();
    Json(json!({
        "dim": state.index.dim(),
        "images": state.index.len(),
        "regions": state.index.region_count(),
        "distance_kinds": DistanceKind::ALL.iter().map(|d| d.as_str()).collect::<Vec<_>>(),
        "fusions": Fusion::ALL.iter().map(|f| f.as_str()).collect::<Vec<_>>(),
        "candidate_modes": CandidateMode::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
        "defaults": {
            "distance": defaults.distance.as_str(),
            "fusion": defaults.fusion.as_str(),
            "alpha": defaults.alpha(),
            "candidate_mode": defaults.candidate_mode.as_str(),
            "top_k": DEFAULT_TOP_K,
        },
    }))
}

async fn image(
    State(state): State<AppState>,
    UrlPath(image_id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let not_found = || ApiError(StatusCode::NOT_FOUND, format!("no image {image_id:?}"));
    if image_id.is_empty() || image_id.starts_with('.') || image_id.contains(['/', '\\', '\0']) {
        return Err(bad_request("invalid image id"));
    }
    if state.index.image(&image_id).is_none() {
        return Err(not_found());
    }
    let dir = state.images_dir.as_deref().ok_or_else(not_found)?;
    let (path, mime) = find_image(dir, &image_id).await.ok_or_else(not_found)?;
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, mime)], Body::from(bytes)).into_response())
}

async fn find_image(dir: &Path, image_id: &str) -> Option<(PathBuf, &'static str)> {
    for (ext, mime) in IMAGE_EXTENSIONS {
        let path = dir.join(format!("{image_id}.{ext}"));
        if tokio::fs::metadata(&path).await.is_ok_and(|m| m.is_file()) {
            return Some((path, mime));
        }
    }
    None
}
