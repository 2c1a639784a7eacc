use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    Capabilities, EmbeddingError, EmbeddingProvider, EmbeddingVector, Level, Result,
    TokenEmbeddings,
};

#[derive(Debug, Clone)]
pub struct HttpEmbedderConfig {
    /// Service base URL; `/embed` is appended unless already present.
    pub endpoint: String,
    pub model: String,
    pub dimension: usize,
    pub max_tokens: usize,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl HttpEmbedderConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpEmbedderConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            dimension: 768,
            max_tokens: 384,
            max_in_flight: 4,
            timeout: Duration::from_secs(120),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [&'a str],
    level: Level,
}

#[derive(Deserialize)]
struct SentenceResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct TokenResponse {
    dim: usize,
    token_vectors: Vec<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
struct ErrorResponse {
    error: String,
}

/// Client for an embedding service speaking the `POST /embed` contract.
///
/// Sentence vectors are re-normalized on arrival so the unit-length
/// invariant holds whatever the server returns.
pub struct HttpEmbedder {
    config: HttpEmbedderConfig,
    url: String,
    name: String,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(config: HttpEmbedderConfig) -> Result<Self> {
        let base = config.endpoint.trim_end_matches('/');
        let url = if base.ends_with("/embed") {
            base.to_string()
        } else {
            format!("{base}/embed")
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| EmbeddingError::Transport(e.to_string()))?;
        Ok(HttpEmbedder {
            name: format!("http:{}", config.model),
            config,
            url,
            client,
        })
    }

    fn post(&self, texts: &[&str], level: Level) -> Result<reqwest::blocking::Response> {
        let body = EmbedRequest {
            model: &self.config.model,
            texts,
            level,
        };
        let resp = self
            .client
            .post(&self.url)
            .json(&body)
            .send()
            .map_err(|e| EmbeddingError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().unwrap_or_default();
        let message = serde_json::from_str::<ErrorResponse>(&text)
            .map(|e| e.error)
            .unwrap_or(text);
        Err(EmbeddingError::Service {
            status: status.as_u16(),
            message,
        })
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.config.dimension {
            return Err(EmbeddingError::DimensionMismatch {
                left: self.config.dimension,
                right: dim,
            });
        }
        Ok(())
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn max_tokens(&self) -> usize {
        self.config.max_tokens
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            sentence_embedding: true,
            token_embeddings: true,
        }
    }

    fn max_in_flight(&self) -> usize {
        self.config.max_in_flight
    }

    fn embed_sentences(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let resp: SentenceResponse = self
            .post(texts, Level::Sentence)?
            .json()
            .map_err(|e| EmbeddingError::BadResponse(e.to_string()))?;
        self.check_dim(resp.dim)?;
        resp.vectors
            .into_iter()
            .map(|v| {
                let v = EmbeddingVector(v);
                if v.dimension() != resp.dim {
                    return Err(EmbeddingError::DimensionMismatch {
                        left: resp.dim,
                        right: v.dimension(),
                    });
                }
                if v.is_zero() {
                    Ok(v)
                } else {
                    super::normalize(&v)
                }
            })
            .collect()
    }

    fn embed_tokens(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddings>> {
        let resp: TokenResponse = self
            .post(texts, Level::Token)?
            .json()
            .map_err(|e| EmbeddingError::BadResponse(e.to_string()))?;
        self.check_dim(resp.dim)?;
        Ok(resp
            .token_vectors
            .into_iter()
            .map(|toks| TokenEmbeddings(toks.into_iter().map(EmbeddingVector).collect()))
            .collect())
    }
}
