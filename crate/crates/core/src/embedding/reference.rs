use super::{Capabilities, EmbeddingProvider, EmbeddingVector, Result, TokenEmbeddings};

pub const REFERENCE_DIM: usize = 64;

/// Deterministic hashed bag-of-tokens embedder.
///
/// Each lowercased whitespace token adds 1 to bucket `fnv1a64(token) % 64`.
/// Sentence vectors are the L2-normalized bucket counts; token vectors are
/// one-hot buckets. Text without tokens maps to the all-zero vector (sentence
/// level) or no vectors (token level).
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    max_tokens: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new()
    }
}

impl HashEmbedder {
    pub fn new() -> Self {
        HashEmbedder { max_tokens: 512 }
    }

    pub fn with_max_tokens(max_tokens: usize) -> Self {
        HashEmbedder { max_tokens }
    }

    pub fn bucket(token: &str) -> usize {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let h = token
            .to_lowercase()
            .bytes()
            .fold(OFFSET, |h, b| (h ^ b as u64).wrapping_mul(PRIME));
        (h % REFERENCE_DIM as u64) as usize
    }

    pub fn counts(text: &str) -> [f64; REFERENCE_DIM] {
        let mut c = [0.0; REFERENCE_DIM];
        for tok in text.split_whitespace() {
            c[Self::bucket(tok)] += 1.0;
        }
        c
    }

    fn sentence(text: &str) -> EmbeddingVector {
        let c = Self::counts(text);
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return EmbeddingVector::zeros(REFERENCE_DIM);
        }
        EmbeddingVector(c.iter().map(|v| v / norm).collect())
    }

    fn tokens(text: &str) -> TokenEmbeddings {
        TokenEmbeddings(
            text.split_whitespace()
                .map(|tok| {
                    let mut v = vec![0.0; REFERENCE_DIM];
                    v[Self::bucket(tok)] = 1.0;
                    EmbeddingVector(v)
                })
                .collect(),
        )
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn name(&self) -> &str {
        "reference-hash-64"
    }

    fn dimension(&self) -> usize {
        REFERENCE_DIM
    }

    fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            sentence_embedding: true,
            token_embeddings: true,
        }
    }

    fn max_in_flight(&self) -> usize {
        usize::MAX
    }

    fn embed_sentences(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| Self::sentence(t)).collect())
    }

    fn embed_tokens(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddings>> {
        Ok(texts.iter().map(|t| Self::tokens(t)).collect())
    }
}
