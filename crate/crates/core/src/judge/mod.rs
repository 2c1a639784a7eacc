//! LLM-as-judge scoring with a fixed 1-4 rubric (1 best).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Dataset, Direction, EvalRecord, ModelResponse, ScoreMatrix};

pub mod cache;
pub mod client;
pub mod prompt;

pub use cache::{CachedVerdict, VerdictCache};
pub use client::{
    ChatEndpoint, EndpointError, HttpChatEndpoint, RateLimiter, RetryPolicy, API_KEY_ENV,
};
pub use prompt::{build_prompt, parse_score, JudgePrompt, TEMPLATE};

pub const METRIC_ID: &str = "g_eval";
pub const DIRECTION: Direction = Direction::LowerBetter;

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("empty instruction")]
    EmptyInstruction,
    #[error("unparseable verdict: {0:?}")]
    Unparseable(String),
    #[error("verdict score {0} outside 1-4")]
    OutOfRange(u64),
    #[error("{source} (after {attempts} attempts)")]
    Endpoint {
        attempts: u32,
        source: EndpointError,
    },
    #[error("verdict cache: {0}")]
    Cache(String),
    #[error("no record {0:?} for response")]
    UnknownRecord(String),
}

impl JudgeError {
    /// Parse failures leave the pair unscored; everything else aborts a run.
    pub fn is_parse_failure(&self) -> bool {
        matches!(self, JudgeError::Unparseable(_) | JudgeError::OutOfRange(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeVerdict {
    pub score: u8,
    pub raw_reply: String,
    pub judge_model: String,
}

impl JudgePrompt {
    pub fn for_pair(record: &EvalRecord, response: &ModelResponse) -> Result<Self, JudgeError> {
        Ok(JudgePrompt {
            rendered_text: build_prompt(
                &record.instruction,
                record.instance_input.as_deref(),
                &response.response_text,
            )?,
            instruction_id: record.record_id.clone(),
            model_id: response.model_id.clone(),
        })
    }
}

pub fn response_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelfEvalFilter {
    pub kept: Vec<ModelResponse>,
    pub excluded_models: BTreeSet<String>,
}

/// Drops responses written by the judge itself.
///
/// A response is the judge's own when its model id equals `judge_model` or is
/// listed under `judge_model` in `alias_map`.
pub fn filter_self_eval(
    responses: &[ModelResponse],
    judge_model: &str,
    alias_map: &BTreeMap<String, Vec<String>>,
) -> SelfEvalFilter {
    let aliases = alias_map.get(judge_model);
    let is_self = |m: &str| m == judge_model || aliases.is_some_and(|a| a.iter().any(|x| x == m));
    let mut out = SelfEvalFilter::default();
    for r in responses {
        if is_self(&r.model_id) {
            out.excluded_models.insert(r.model_id.clone());
        } else {
            out.kept.push(r.clone());
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct JudgeConfig {
    pub judge_model: String,
    pub retry: RetryPolicy,
    /// Minimum spacing between requests to the endpoint.
    pub min_interval: Duration,
    pub max_in_flight: usize,
}

impl JudgeConfig {
    pub fn new(judge_model: impl Into<String>) -> Self {
        JudgeConfig {
            judge_model: judge_model.into(),
            retry: RetryPolicy::default(),
            min_interval: Duration::ZERO,
            max_in_flight: 4,
        }
    }
}

/// Verdicts of a run keyed by (record_id, model_id).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JudgeRun {
    pub verdicts: BTreeMap<(String, String), JudgeVerdict>,
    /// Pairs whose reply could not be parsed, with the raw reply.
    pub unscored: BTreeMap<(String, String), String>,
}

impl JudgeRun {
    pub fn to_matrix(&self, metric_id: &str) -> ScoreMatrix {
        let mut m = ScoreMatrix::new();
        m.declare(metric_id, DIRECTION).expect("fresh matrix");
        for ((record, model), v) in &self.verdicts {
            m.insert(metric_id, model, record, f64::from(v.score));
        }
        for (record, model) in self.unscored.keys() {
            m.mark_unscored(metric_id, model, record);
        }
        m
    }
}

pub struct Judge {
    endpoint: Arc<dyn ChatEndpoint>,
    config: JudgeConfig,
    cache: VerdictCache,
    limiter: RateLimiter,
    requests: AtomicU64,
    retries: AtomicU64,
}

impl Judge {
    pub fn new(endpoint: Arc<dyn ChatEndpoint>, config: JudgeConfig) -> Self {
        Judge {
            endpoint,
            limiter: RateLimiter::new(config.min_interval),
            config,
            cache: VerdictCache::in_memory(),
            requests: AtomicU64::new(0),
            retries: AtomicU64::new(0),
        }
    }

    pub fn with_cache(mut self, cache: VerdictCache) -> Self {
        self.cache = cache;
        self
    }

    pub fn judge_model(&self) -> &str {
        &self.config.judge_model
    }

    pub fn cache(&self) -> &VerdictCache {
        &self.cache
    }

    /// Requests sent to the endpoint, retries included.
    pub fn network_requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    /// Scores one pair, consulting the verdict cache first.
    ///
    /// Unparseable replies are cached too, so a rerun does not pay for them
    /// again; they surface as `Unparseable` or `OutOfRange`.
    pub fn judge(
        &self,
        record: &EvalRecord,
        response: &ModelResponse,
    ) -> Result<JudgeVerdict, JudgeError> {
        let judge_model = &self.config.judge_model;
        let hash = response_hash(&response.response_text);
        if let Some(hit) = self
            .cache
            .get(judge_model, &response.model_id, &record.record_id, &hash)
        {
            return self.verdict_from(hit.score, hit.raw_reply);
        }

        let prompt = JudgePrompt::for_pair(record, response)?;
        let reply = self.complete_with_retry(&prompt.rendered_text)?;
        let parsed = parse_score(&reply);
        if let Err(e) = &parsed {
            log::warn!(
                "judge reply for ({}, {}) left unscored: {e}",
                record.record_id,
                response.model_id
            );
        }
        self.cache.insert(CachedVerdict {
            judge: judge_model.clone(),
            model: response.model_id.clone(),
            id: record.record_id.clone(),
            response_hash: hash,
            score: parsed.as_ref().ok().copied(),
            raw_reply: reply.clone(),
        })?;
        parsed.map(|score| JudgeVerdict {
            score,
            raw_reply: reply,
            judge_model: judge_model.clone(),
        })
    }

    fn verdict_from(
        &self,
        score: Option<u8>,
        raw_reply: String,
    ) -> Result<JudgeVerdict, JudgeError> {
        let score = match score {
            Some(s) => s,
            None => parse_score(&raw_reply)?,
        };
        Ok(JudgeVerdict {
            score,
            raw_reply,
            judge_model: self.config.judge_model.clone(),
        })
    }

    fn complete_with_retry(&self, prompt: &str) -> Result<String, JudgeError> {
        let policy = self.config.retry;
        let mut attempt = 0;
        loop {
            self.limiter.acquire();
            self.requests.fetch_add(1, Ordering::Relaxed);
            match self.endpoint.complete(&self.config.judge_model, prompt) {
                Ok(reply) => return Ok(reply),
                Err(EndpointError::Transient(msg)) if attempt < policy.max_retries => {
                    let delay = policy.delay(attempt);
                    attempt += 1;
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    log::warn!(
                        "judge retry {attempt}/{} in {delay:?}: {msg}",
                        policy.max_retries
                    );
                    std::thread::sleep(delay);
                }
                Err(source) => {
                    return Err(JudgeError::Endpoint {
                        attempts: attempt + 1,
                        source,
                    })
                }
            }
        }
    }

    /// Judges every response against its record, at most `max_in_flight` at a time.
    ///
    /// The result does not depend on completion order. The first endpoint
    /// failure in (record, model) order aborts the run; verdicts obtained
    /// before it stay in the cache.
    pub fn judge_all(
        &self,
        dataset: &Dataset,
        responses: &[ModelResponse],
    ) -> Result<JudgeRun, JudgeError> {
        let index = dataset.index();
        let mut jobs = Vec::with_capacity(responses.len());
        for r in responses {
            let rec = *index
                .get(r.record_id.as_str())
                .ok_or_else(|| JudgeError::UnknownRecord(r.record_id.clone()))?;
            jobs.push((rec, r));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.max_in_flight.max(1))
            .build()
            .map_err(|e| JudgeError::Cache(e.to_string()))?;
        let results: Vec<_> = pool.install(|| {
            jobs.par_iter()
                .map(|(rec, r)| {
                    (
                        (rec.record_id.clone(), r.model_id.clone()),
                        self.judge(rec, r),
                    )
                })
                .collect()
        });

        let mut sorted: BTreeMap<_, _> = BTreeMap::new();
        for (k, v) in results {
            sorted.insert(k, v);
        }
        let mut run = JudgeRun::default();
        for (key, result) in sorted {
            match result {
                Ok(v) => {
                    run.verdicts.insert(key, v);
                }
                Err(e) if e.is_parse_failure() => {
                    let raw = match e {
                        JudgeError::Unparseable(raw) => raw,
                        other => other.to_string(),
                    };
                    run.unscored.insert(key, raw);
                }
                Err(e) => return Err(e),
            }
        }
        Ok(run)
    }
}
