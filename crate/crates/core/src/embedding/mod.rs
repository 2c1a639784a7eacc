//! Sentence- and token-level embeddings behind one provider contract, and the
//! similarity metrics built on them: SemScore (cosine of sentence embeddings)
//! and greedy-matching BERTScore.

mod batch;
mod cache;
mod http;
mod metrics;
mod pooling;
mod reference;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use batch::{BatchOutput, Embedder, TruncationWarning};
pub use cache::{DiskCache, CACHE_FORMAT_VERSION};
pub use http::{HttpEmbedder, HttpEmbedderConfig};
pub use metrics::{bertscore_f1, bertscore_prf, semscore, BertScore, ScoreFlag, Similarity};
pub use pooling::{cosine, normalize, pool, PooledProvider, PoolingMode};
pub use reference::{HashEmbedder, REFERENCE_DIM};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("cannot pool an empty token list")]
    EmptyTokens,
    #[error("provider {provider} does not support {capability}")]
    Unsupported {
        provider: String,
        capability: &'static str,
    },
    #[error("embedding service returned status {status}: {message}")]
    Service { status: u16, message: String },
    #[error("embedding transport failure: {0}")]
    Transport(String),
    #[error("malformed embedding response: {0}")]
    BadResponse(String),
    #[error("embedding cache: {0}")]
    Cache(String),
    #[error("embedding {text_id} failed: {source}")]
    ForText {
        text_id: String,
        #[source]
        source: Box<EmbeddingError>,
    },
}

impl EmbeddingError {
    pub fn for_text(self, text_id: impl Into<String>) -> Self {
        EmbeddingError::ForText {
            text_id: text_id.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = EmbeddingError> = std::result::Result<T, E>;

/// A dense vector of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector(values)
    }

    pub fn zeros(dimension: usize) -> Self {
        EmbeddingVector(vec![0.0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// The sentinel providers return for text without tokens.
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

/// Per-token vectors of one text, in provider tokenization order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenEmbeddings(pub Vec<EmbeddingVector>);

impl TokenEmbeddings {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, EmbeddingVector> {
        self.0.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Sentence,
    Token,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Sentence => "sentence",
            Level::Token => "token",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sentence" => Ok(Level::Sentence),
            "token" => Ok(Level::Token),
            other => Err(format!("unknown level {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub sentence_embedding: bool,
    pub token_embeddings: bool,
}

/// Anything that turns text into vectors.
///
/// Sentence embeddings must be unit length (within 1e-6) for non-empty text,
/// and the same text must always produce the same vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    fn dimension(&self) -> usize;

    fn max_tokens(&self) -> usize;

    fn capabilities(&self) -> Capabilities;

    /// Upper bound on concurrent requests the provider accepts.
    fn max_in_flight(&self) -> usize {
        1
    }

    /// Pooling applied on top of token vectors, if any. Part of the cache key.
    fn pooling(&self) -> Option<PoolingMode> {
        None
    }

    /// Length of `text` in the units `max_tokens` counts.
    fn count_tokens(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }

    /// Keeps the first `max_tokens` units of `text`.
    fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> Cow<'a, str> {
        match text.split_whitespace().nth(max_tokens) {
            Some(first_dropped) => {
                let offset = first_dropped.as_ptr() as usize - text.as_ptr() as usize;
                Cow::Borrowed(text[..offset].trim_end())
            }
            None => Cow::Borrowed(text),
        }
    }

    fn embed_sentences(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;

    fn embed_tokens(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddings>>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for std::sync::Arc<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn max_tokens(&self) -> usize {
        (**self).max_tokens()
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn max_in_flight(&self) -> usize {
        (**self).max_in_flight()
    }
    fn pooling(&self) -> Option<PoolingMode> {
        (**self).pooling()
    }
    fn count_tokens(&self, text: &str) -> usize {
        (**self).count_tokens(text)
    }
    fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> Cow<'a, str> {
        (**self).truncate(text, max_tokens)
    }
    fn embed_sentences(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        (**self).embed_sentences(texts)
    }
    fn embed_tokens(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddings>> {
        (**self).embed_tokens(texts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_truncation_keeps_the_head() {
        let p = HashEmbedder::new();
        assert_eq!(p.truncate("a b  c d", 2), "a b");
        assert_eq!(p.truncate("a b", 2), "a b");
        assert_eq!(p.truncate("  x y z", 1), "  x");
    }
}
