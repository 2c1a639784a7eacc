use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    Capabilities, EmbeddingError, EmbeddingProvider, EmbeddingVector, Result, TokenEmbeddings,
};

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dimension() != b.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn normalize(v: &EmbeddingVector) -> Result<EmbeddingVector> {
    let n = v.norm();
    if n == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok(EmbeddingVector(v.0.iter().map(|x| x / n).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingMode {
    Mean,
    Cls,
}

impl PoolingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolingMode::Mean => "mean",
            PoolingMode::Cls => "cls",
        }
    }
}

impl fmt::Display for PoolingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PoolingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mean" => Ok(PoolingMode::Mean),
            "cls" => Ok(PoolingMode::Cls),
            other => Err(format!("unknown pooling mode {other:?}")),
        }
    }
}

/// Reduces token vectors to one unit-length vector.
///
/// Mean pooling is an unweighted average over the given (non-padding) tokens;
/// CLS pooling takes the first token.
pub fn pool(tokens: &TokenEmbeddings, mode: PoolingMode) -> Result<EmbeddingVector> {
    let first = tokens.0.first().ok_or(EmbeddingError::EmptyTokens)?;
    match mode {
        PoolingMode::Cls => normalize(first),
        PoolingMode::Mean => {
            let dim = first.dimension();
            let mut sum = vec![0.0; dim];
            for t in tokens.iter() {
                if t.dimension() != dim {
                    return Err(EmbeddingError::DimensionMismatch {
                        left: dim,
                        right: t.dimension(),
                    });
                }
                for (s, v) in sum.iter_mut().zip(&t.0) {
                    *s += v;
                }
            }
            let n = tokens.len() as f64;
            normalize(&EmbeddingVector(sum.into_iter().map(|s| s / n).collect()))
        }
    }
}

/// Sentence embeddings obtained by pooling another provider's token vectors.
pub struct PooledProvider {
    inner: Arc<dyn EmbeddingProvider>,
    mode: PoolingMode,
    name: String,
}

impl PooledProvider {
    pub fn new(inner: Arc<dyn EmbeddingProvider>, mode: PoolingMode) -> Result<Self> {
        if !inner.capabilities().token_embeddings {
            return Err(EmbeddingError::Unsupported {
                provider: inner.name().to_string(),
                capability: "token embeddings",
            });
        }
        let name = format!("{}+{}", inner.name(), mode);
        Ok(PooledProvider { inner, mode, name })
    }
}

impl EmbeddingProvider for PooledProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn max_tokens(&self) -> usize {
        self.inner.max_tokens()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            sentence_embedding: true,
            token_embeddings: true,
        }
    }

    fn max_in_flight(&self) -> usize {
        self.inner.max_in_flight()
    }

    fn pooling(&self) -> Option<PoolingMode> {
        Some(self.mode)
    }

    fn count_tokens(&self, text: &str) -> usize {
        self.inner.count_tokens(text)
    }

    fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> std::borrow::Cow<'a, str> {
        self.inner.truncate(text, max_tokens)
    }

    fn embed_sentences(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        self.inner
            .embed_tokens(texts)?
            .iter()
            .map(|t| {
                if t.is_empty() {
                    Ok(EmbeddingVector::zeros(self.dimension()))
                } else {
                    pool(t, self.mode)
                }
            })
            .collect()
    }

    fn embed_tokens(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddings>> {
        self.inner.embed_tokens(texts)
    }
}
