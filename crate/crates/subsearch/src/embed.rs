//! Client for the text embedding service.

use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("embed service unreachable: {0}")]
    Unreachable(#[source] reqwest::Error),
    #[error("embed service returned status {0}")]
    Status(u16),
    #[error("embed service sent a malformed response: {0}")]
    Malformed(String),
    #[error("no embed service configured")]
    NotConfigured,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vector: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct EmbedClient {
    base: String,
    http: reqwest::Client,
}

impl EmbedClient {
    pub fn new(base_url: &str) -> Self {
        let http = reqwest::Client::builder()
            .connect_timeout(Duration::from_secs(5))
            .timeout(Duration::from_secs(60))
            .build()
            .expect("http client");
        EmbedClient {
            base: base_url.trim_end_matches('/').to_string(),
            http,
        }
    }

    /// `POST {base}/v1/embed` with `{"text": ...}`; the vector is returned
    /// as sent.
    pub async fn embed_text(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let resp = self
            .http
            .post(format!("{}/v1/embed", self.base))
            .json(&EmbedRequest { text })
            .send()
            .await
            .map_err(EmbedError::Unreachable)?;
        if !resp.status().is_success() {
            return Err(EmbedError::Status(resp.status().as_u16()));
        }
        let body: EmbedResponse = resp
            .json()
            .await
            .map_err(|e| EmbedError::Malformed(e.to_string()))?;
        if body.vector.len() != body.dim {
            return Err(EmbedError::Malformed(format!(
                "dim {} but {} values",
                body.dim,
                body.vector.len()
            )));
        }
        Ok(body.vector)
    }
}
