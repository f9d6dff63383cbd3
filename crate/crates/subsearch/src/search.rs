//! Search requests and responses shared by the CLI and the HTTP service.

use serde::{Deserialize, Serialize};
use subsearch_core::embeddings::{l2_normalize, EmbeddingVector};
use subsearch_core::{
    rank_images, CandidateMode, DistanceKind, Fusion, IndexedCollection, RankedList, RankingConfig,
};

use crate::store::RectJson;

pub const DEFAULT_TOP_K: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    #[serde(default)]
    pub embedding: Option<Vec<f32>>,
    #[serde(default)]
    pub text: Option<String>,
    pub rect: RectJson,
    #[serde(default)]
    pub distance: Option<String>,
    #[serde(default)]
    pub fusion: Option<String>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub candidate_mode: Option<String>,
    #[serde(default)]
    pub top_k: Option<usize>,
}

/// What the request asks to be embedded.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryPayload {
    Embedding(Vec<f32>),
    Text(String),
}

/// A request with every option resolved and checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRequest {
    pub payload: QueryPayload,
    pub rect: subsearch_core::Rect,
    pub config: RankingConfig,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RequestError {
    #[error("exactly one of `embedding` and `text` must be given")]
    PayloadCount,
    #[error("`text` must not be empty")]
    EmptyText,
    #[error("top_k must be at least 1")]
    TopK,
    #[error("{0}")]
    Invalid(#[from] subsearch_core::Error),
}

/// Ranking options with each field possibly unset; later layers win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub distance: Option<DistanceKind>,
    pub fusion: Option<Fusion>,
    pub alpha: Option<f64>,
    pub candidate_mode: Option<CandidateMode>,
    pub top_k: Option<usize>,
}

impl SearchRequest {
    /// Resolves options: `overrides` beat the request body, which beats the
    /// defaults.
    pub fn resolve(&self, overrides: &Overrides) -> Result<ResolvedRequest, RequestError> {
        let payload = match (&self.embedding, &self.text) {
            (Some(e), None) => QueryPayload::Embedding(e.clone()),
            (None, Some(t)) if t.trim().is_empty() => return Err(RequestError::EmptyText),
            (None, Some(t)) => QueryPayload::Text(t.clone()),
            _ => return Err(RequestError::PayloadCount),
        };
        let defaults = RankingConfig::default();
        let distance = match overrides.distance {
            Some(d) => d,
            None => self
                .distance
                .as_deref()
                .map(str::parse)
                .transpose()?
                .unwrap_or(defaults.distance),
        };
        let fusion = match overrides.fusion {
            Some(f) => f,
            None => self
                .fusion
                .as_deref()
                .map(str::parse)
                .transpose()?
                .unwrap_or(defaults.fusion),
        };
        let candidate_mode = match overrides.candidate_mode {
            Some(m) => m,
            None => self
                .candidate_mode
                .as_deref()
                .map(str::parse)
                .transpose()?
                .unwrap_or(defaults.candidate_mode),
        };
        let alpha = overrides.alpha.or(self.alpha).unwrap_or(defaults.alpha());
        let top_k = overrides.top_k.or(self.top_k).unwrap_or(DEFAULT_TOP_K);
        if top_k == 0 {
            return Err(RequestError::TopK);
        }
        Ok(ResolvedRequest {
            payload,
            rect: self.rect.to_rect()?,
            config: RankingConfig::new(distance, fusion, alpha, candidate_mode)?,
            top_k,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub image_id: String,
    pub region_id: Option<String>,
    pub rect: Option<RectJson>,
    /// 1-based.
    pub rank: usize,
    pub combined: Option<f64>,
    /// Raw `1 - cos`.
    pub semantic: Option<f64>,
    /// Raw rectangle distance; absent for distance kind `none`.
    pub geometric: Option<f64>,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub results: Vec<SearchHit>,
    pub total_images: usize,
}

impl SearchResponse {
    pub fn from_ranked(ranked: &RankedList<'_>, top_k: usize) -> Self {
        let results = ranked
            .top(top_k)
            .iter()
            .enumerate()
            .map(|(i, e)| SearchHit {
                image_id: e.image_id.to_string(),
                region_id: e.region.map(|r| r.region_id.clone()),
                rect: e.region.map(|r| r.rect.into()),
                rank: i + 1,
                combined: e.scores.map(|s| s.combined),
                semantic: e.scores.map(|s| s.semantic),
                geometric: e.scores.and_then(|s| s.geometric),
                matched: e.is_matched(),
            })
            .collect();
        SearchResponse {
            results,
            total_images: ranked.len(),
        }
    }
}

/// Normalizes `query` and ranks. Dimension is checked before normalizing.
pub fn run_search(
    coll: &IndexedCollection,
    query: Vec<f32>,
    req: &ResolvedRequest,
) -> Result<SearchResponse, subsearch_core::Error> {
    if query.len() != coll.dim() {
        return Err(subsearch_core::Error::DimMismatch {
            expected: coll.dim(),
            found: query.len(),
        });
    }
    let q = l2_normalize(&EmbeddingVector::new(query)?)?;
    let ranked = rank_images(coll, q.as_slice(), &req.rect, &req.config)?;
    Ok(SearchResponse::from_ranked(&ranked, req.top_k))
}
