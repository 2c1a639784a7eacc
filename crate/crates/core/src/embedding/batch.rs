use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::cache::{CacheKey, CachedValue};
use super::{
    Capabilities, DiskCache, EmbeddingError, EmbeddingProvider, EmbeddingVector, Level,
    PoolingMode, Result, TokenEmbeddings,
};

/// A text that exceeded the provider's token limit and was cut to its head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncationWarning {
    pub index: usize,
    pub tokens: usize,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput<T> {
    pub vectors: Vec<T>,
    pub warnings: Vec<TruncationWarning>,
}

/// Caching, batching front end for a provider.
///
/// Results are keyed by (provider name, pooling mode, level, exact text) in
/// memory and, optionally, on disk. Misses are sent in chunks of
/// `batch_size`, with at most `provider.max_in_flight()` chunks in flight.
/// Output order always matches input order.
pub struct Embedder {
    provider: Arc<dyn EmbeddingProvider>,
    memory: Mutex<HashMap<CacheKey, CachedValue>>,
    disk: Option<DiskCache>,
    batch_size: usize,
    provider_calls: AtomicUsize,
}

impl Embedder {
    pub fn new(provider: Arc<dyn EmbeddingProvider>) -> Self {
        Embedder {
            provider,
            memory: Mutex::new(HashMap::new()),
            disk: None,
            batch_size: 32,
            provider_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_disk_cache(mut self, cache: DiskCache) -> Self {
        self.disk = Some(cache);
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn provider(&self) -> &Arc<dyn EmbeddingProvider> {
        &self.provider
    }

    /// Number of requests sent to the underlying provider so far.
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::Relaxed)
    }

    pub fn embed_batch(&self, texts: &[&str]) -> Result<BatchOutput<EmbeddingVector>> {
        let (values, warnings) = self.run(Level::Sentence, texts)?;
        let vectors = values
            .into_iter()
            .map(|v| match v {
                CachedValue::Sentence(v) => v,
                CachedValue::Tokens(_) => unreachable!("sentence level"),
            })
            .collect();
        Ok(BatchOutput { vectors, warnings })
    }

    pub fn embed_token_batch(&self, texts: &[&str]) -> Result<BatchOutput<TokenEmbeddings>> {
        let (values, warnings) = self.run(Level::Token, texts)?;
        let vectors = values
            .into_iter()
            .map(|v| match v {
                CachedValue::Tokens(t) => t,
                CachedValue::Sentence(_) => unreachable!("token level"),
            })
            .collect();
        Ok(BatchOutput { vectors, warnings })
    }

    fn key(&self, level: Level, text: &str) -> CacheKey {
        CacheKey {
            provider: self.provider.name().to_string(),
            pooling: self.provider.pooling(),
            level,
            text: text.to_string(),
        }
    }

    fn lookup(&self, key: &CacheKey) -> Result<Option<CachedValue>> {
        if let Some(v) = self.memory.lock().unwrap().get(key) {
            return Ok(Some(v.clone()));
        }
        if let Some(disk) = &self.disk {
            if let Some(v) = disk.get(key)? {
                self.memory
                    .lock()
                    .unwrap()
                    .entry(key.clone())
                    .or_insert_with(|| v.clone());
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn run(
        &self,
        level: Level,
        texts: &[&str],
    ) -> Result<(Vec<CachedValue>, Vec<TruncationWarning>)> {
        let max = self.provider.max_tokens();
        let mut warnings = Vec::new();
        let mut prepared = Vec::with_capacity(texts.len());
        for (index, text) in texts.iter().enumerate() {
            let tokens = self.provider.count_tokens(text);
            if tokens > max {
                log::warn!(
                    "text {index} has {tokens} tokens, truncated to {max} for {}",
                    self.provider.name()
                );
                warnings.push(TruncationWarning {
                    index,
                    tokens,
                    max_tokens: max,
                });
                prepared.push(self.provider.truncate(text, max).into_owned());
            } else {
                prepared.push((*text).to_string());
            }
        }

        let mut out: Vec<Option<CachedValue>> = vec![None; texts.len()];
        let mut misses: Vec<(usize, CacheKey)> = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, text) in texts.iter().enumerate() {
            let key = self.key(level, text);
            match self.lookup(&key)? {
                Some(v) => out[i] = Some(v),
                None => {
                    if !seen.contains_key(text) {
                        seen.insert(text, misses.len());
                        misses.push((i, key));
                    }
                }
            }
        }

        if !misses.is_empty() {
            let computed = self.compute(level, &misses, &prepared)?;
            for ((_, key), value) in misses.iter().zip(computed) {
                if let Some(disk) = &self.disk {
                    disk.put(key, &value)?;
                }
                self.memory
                    .lock()
                    .unwrap()
                    .entry(key.clone())
                    .or_insert(value);
            }
            let memory = self.memory.lock().unwrap();
            for (i, text) in texts.iter().enumerate() {
                if out[i].is_none() {
                    out[i] = memory.get(&self.key(level, text)).cloned();
                }
            }
        }
        let values = out
            .into_iter()
            .map(|v| v.expect("every text resolved"))
            .collect();
        Ok((values, warnings))
    }

    fn compute(
        &self,
        level: Level,
        misses: &[(usize, CacheKey)],
        prepared: &[String],
    ) -> Result<Vec<CachedValue>> {
        let chunks: Vec<&[(usize, CacheKey)]> = misses.chunks(self.batch_size).collect();
        let in_flight = self.provider.max_in_flight().max(1);
        let mut results: Vec<Vec<CachedValue>> = Vec::with_capacity(chunks.len());
        for wave in chunks.chunks(in_flight) {
            let wave_results: Vec<Result<Vec<CachedValue>>> = if wave.len() == 1 {
                vec![self.call(level, wave[0], prepared)]
            } else {
                std::thread::scope(|s| {
                    let handles: Vec<_> = wave
                        .iter()
                        .map(|chunk| s.spawn(move || self.call(level, chunk, prepared)))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("embedding worker panicked"))
                        .collect()
                })
            };
            for r in wave_results {
                results.push(r?);
            }
        }
        Ok(results.into_iter().flatten().collect())
    }

    fn call(
        &self,
        level: Level,
        chunk: &[(usize, CacheKey)],
        prepared: &[String],
    ) -> Result<Vec<CachedValue>> {
        let texts: Vec<&str> = chunk.iter().map(|(i, _)| prepared[*i].as_str()).collect();
        let first = chunk.first().map_or(0, |c| c.0);
        let ctx =
            |e: EmbeddingError| e.for_text(format!("text {first} (batch of {})", texts.len()));
        self.provider_calls.fetch_add(1, Ordering::Relaxed);
        let dim = self.provider.dimension();
        let values: Vec<CachedValue> = match level {
            Level::Sentence => self
                .provider
                .embed_sentences(&texts)
                .map_err(ctx)?
                .into_iter()
                .map(CachedValue::Sentence)
                .collect(),
            Level::Token => self
                .provider
                .embed_tokens(&texts)
                .map_err(ctx)?
                .into_iter()
                .map(CachedValue::Tokens)
                .collect(),
        };
        if values.len() != texts.len() {
            return Err(ctx(EmbeddingError::BadResponse(format!(
                "{} vectors for {} texts",
                values.len(),
                texts.len()
            ))));
        }
        for v in &values {
            let bad = match v {
                CachedValue::Sentence(v) => {
                    v.dimension() != dim || v.0.iter().any(|x| !x.is_finite())
                }
                CachedValue::Tokens(t) => t
                    .iter()
                    .any(|v| v.dimension() != dim || v.0.iter().any(|x| !x.is_finite())),
            };
            if bad {
                return Err(ctx(EmbeddingError::BadResponse(format!(
                    "vector of wrong dimension or non-finite values (expected dim {dim})"
                ))));
            }
        }
        Ok(values)
    }
}

impl EmbeddingProvider for Embedder {
    fn name(&self) -> &str {
        self.provider.name()
    }

    fn dimension(&self) -> usize {
        self.provider.dimension()
    }

    fn max_tokens(&self) -> usize {
        self.provider.max_tokens()
    }

    fn capabilities(&self) -> Capabilities {
        self.provider.capabilities()
    }

    fn max_in_flight(&self) -> usize {
        self.provider.max_in_flight()
    }

    fn pooling(&self) -> Option<PoolingMode> {
        self.provider.pooling()
    }

    fn count_tokens(&self, text: &str) -> usize {
        self.provider.count_tokens(text)
    }

    fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> std::borrow::Cow<'a, str> {
        self.provider.truncate(text, max_tokens)
    }

    fn embed_sentences(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        Ok(self.embed_batch(texts)?.vectors)
    }

    fn embed_tokens(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddings>> {
        Ok(self.embed_token_batch(texts)?.vectors)
    }
}
