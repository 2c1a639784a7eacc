//! Metric computation over the joined (record, response) pairs.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;

use super::scores::MetricScores;
use super::{CliError, RunConfig};
use crate::corpus::{Dataset, Direction, EvalRecord, HumanRating, ModelResponse};
use crate::embedding::{
    bertscore_f1, semscore, DiskCache, Embedder, EmbeddingProvider, HashEmbedder, HttpEmbedder,
    HttpEmbedderConfig, PooledProvider, PoolingMode, Similarity,
};
use crate::judge::{self, filter_self_eval, HttpChatEndpoint, Judge, JudgeConfig, VerdictCache};
use crate::ngram::{rouge_l, sentence_bleu};

/// Known metric ids with their score direction, in report order.
pub const METRICS: &[(&str, Direction)] = &[
    ("rouge_l", Direction::HigherBetter),
    ("bleu", Direction::HigherBetter),
    ("bertscore", Direction::HigherBetter),
    ("semscore", Direction::HigherBetter),
    ("semscore_mean", Direction::HigherBetter),
    ("semscore_cls", Direction::HigherBetter),
    (judge::METRIC_ID, judge::DIRECTION),
];

pub fn direction_of(metric: &str) -> Option<Direction> {
    METRICS.iter().find(|(m, _)| *m == metric).map(|&(_, d)| d)
}

pub struct Inputs {
    pub dataset: Dataset,
    pub responses: Vec<ModelResponse>,
    pub ratings: Vec<HumanRating>,
}

impl Inputs {
    /// Responses whose record exists, ordered by (model, record).
    pub fn pairs(&self) -> Vec<(&EvalRecord, &ModelResponse)> {
        let index = self.dataset.index();
        let mut out: Vec<_> = self
            .responses
            .iter()
            .filter_map(|r| index.get(r.record_id.as_str()).map(|&rec| (rec, r)))
            .collect();
        out.sort_by(|a, b| (&a.1.model_id, &a.1.record_id).cmp(&(&b.1.model_id, &b.1.record_id)));
        out
    }
}

fn base_provider(cfg: &RunConfig) -> Result<Arc<dyn EmbeddingProvider>, CliError> {
    match cfg.provider.as_str() {
        "reference" => Ok(Arc::new(HashEmbedder::new())),
        "http" => {
            let endpoint = cfg.embed_endpoint.clone().ok_or_else(|| {
                CliError::Validation("provider http needs --endpoint or EMBED_ENDPOINT".into())
            })?;
            let mut c = HttpEmbedderConfig::new(endpoint, cfg.embed_model.clone());
            c.dimension = cfg.embed_dim;
            c.max_in_flight = cfg.jobs.max(1);
            Ok(Arc::new(HttpEmbedder::new(c)?))
        }
        other => Err(CliError::Validation(format!(
            "unknown provider {other:?} (expected reference or http)"
        ))),
    }
}

/// Lazily built embedding front ends, shared by the embedding metrics of one run.
pub struct Embedders {
    base: Option<Arc<Embedder>>,
}

impl Embedders {
    pub fn new() -> Self {
        Embedders { base: None }
    }

    fn cache(cfg: &RunConfig) -> Result<DiskCache, CliError> {
        Ok(DiskCache::open(cfg.out.join("cache").join("embeddings"))?)
    }

    fn base(&mut self, cfg: &RunConfig) -> Result<Arc<Embedder>, CliError> {
        if self.base.is_none() {
            let e = Embedder::new(base_provider(cfg)?).with_disk_cache(Self::cache(cfg)?);
            self.base = Some(Arc::new(e));
        }
        Ok(self.base.clone().expect("just set"))
    }

    fn pooled(&mut self, cfg: &RunConfig, mode: PoolingMode) -> Result<Arc<Embedder>, CliError> {
        let inner = PooledProvider::new(self.base(cfg)?, mode)?;
        Ok(Arc::new(
            Embedder::new(Arc::new(inner)).with_disk_cache(Self::cache(cfg)?),
        ))
    }
}

impl Default for Embedders {
    fn default() -> Self {
        Self::new()
    }
}

fn declared(metric: &str) -> MetricScores {
    let mut s = MetricScores::default();
    s.matrix
        .declare(metric, direction_of(metric).expect("registered metric"))
        .expect("fresh matrix");
    s
}

fn ngram_metric(
    metric: &str,
    pairs: &[(&EvalRecord, &ModelResponse)],
    pool: &rayon::ThreadPool,
) -> MetricScores {
    let f = if metric == "bleu" {
        sentence_bleu
    } else {
        rouge_l
    };
    let values: Vec<f64> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(rec, resp)| f(&rec.target_response, &resp.response_text))
            .collect()
    });
    let mut s = declared(metric);
    for ((_, resp), v) in pairs.iter().zip(values) {
        s.matrix.insert(metric, &resp.model_id, &resp.record_id, v);
    }
    s
}

fn embedding_metric(
    metric: &str,
    pairs: &[(&EvalRecord, &ModelResponse)],
    embedder: &Embedder,
    pool: &rayon::ThreadPool,
) -> Result<MetricScores, CliError> {
    let texts: Vec<&str> = pairs
        .iter()
        .flat_map(|(rec, resp)| [rec.target_response.as_str(), resp.response_text.as_str()])
        .filter(|t| !t.trim().is_empty())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let warnings = if metric == "bertscore" {
        embedder.embed_token_batch(&texts)?.warnings
    } else {
        embedder.embed_batch(&texts)?.warnings
    };
    if !warnings.is_empty() {
        log::warn!(
            "{metric}: {} text(s) truncated to the provider's token limit",
            warnings.len()
        );
    }

    let score = |t: &str, c: &str, p: &dyn EmbeddingProvider| {
        if metric == "bertscore" {
            bertscore_f1(t, c, p)
        } else {
            semscore(t, c, p)
        }
    };
    let results: Vec<Result<Similarity, _>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(rec, resp)| {
                score(&rec.target_response, &resp.response_text, embedder)
                    .map_err(|e| e.for_text(format!("{}/{}", resp.model_id, resp.record_id)))
            })
            .collect()
    });
    let mut s = declared(metric);
    s.provider = Some(embedder.provider().name().to_string());
    for ((_, resp), r) in pairs.iter().zip(results) {
        let sim = r?;
        s.matrix
            .insert(metric, &resp.model_id, &resp.record_id, sim.value);
        if let Some(flag) = sim.flag {
            s.flags
                .insert((resp.model_id.clone(), resp.record_id.clone()), flag);
        }
    }
    Ok(s)
}

fn judge_metric(cfg: &RunConfig, inputs: &Inputs) -> Result<MetricScores, CliError> {
    let url = cfg
        .judge_endpoint
        .as_deref()
        .ok_or_else(|| CliError::Validation("g_eval needs --judge-endpoint".into()))?;
    let endpoint = HttpChatEndpoint::new(url, cfg.judge_timeout)
        .map_err(|e| CliError::Endpoint(e.to_string()))?;

    let joined: Vec<ModelResponse> = inputs.pairs().into_iter().map(|(_, r)| r.clone()).collect();
    let (kept, excluded) = if cfg.exclude_self {
        let f = filter_self_eval(&joined, &cfg.judge_model, &cfg.judge_aliases);
        (f.kept, f.excluded_models)
    } else {
        (joined, BTreeSet::new())
    };

    let mut jc = JudgeConfig::new(cfg.judge_model.clone());
    jc.retry = cfg.judge_retry;
    jc.min_interval = cfg.judge_min_interval;
    jc.max_in_flight = cfg.jobs.max(1);
    let cache = VerdictCache::open(&cfg.out.join("cache").join("judge_verdicts.jsonl"))?;
    let j = Judge::new(Arc::new(endpoint), jc).with_cache(cache);
    let run = j.judge_all(&inputs.dataset, &kept)?;
    log::info!(
        "g_eval: {} requests, {} retries, {} unscored",
        j.network_requests(),
        j.retries(),
        run.unscored.len()
    );

    let mut s = MetricScores {
        matrix: run.to_matrix(judge::METRIC_ID),
        excluded,
        provider: Some(cfg.judge_model.clone()),
        ..Default::default()
    };
    s.matrix
        .declare(judge::METRIC_ID, judge::DIRECTION)
        .expect("same direction");
    Ok(s)
}

pub fn compute(
    metric: &str,
    cfg: &RunConfig,
    inputs: &Inputs,
    embedders: &mut Embedders,
    pool: &rayon::ThreadPool,
) -> Result<MetricScores, CliError> {
    let pairs = inputs.pairs();
    match metric {
        "rouge_l" | "bleu" => Ok(ngram_metric(metric, &pairs, pool)),
        "semscore" | "bertscore" => embedding_metric(metric, &pairs, &*embedders.base(cfg)?, pool),
        "semscore_mean" => embedding_metric(
            metric,
            &pairs,
            &*embedders.pooled(cfg, PoolingMode::Mean)?,
            pool,
        ),
        "semscore_cls" => embedding_metric(
            metric,
            &pairs,
            &*embedders.pooled(cfg, PoolingMode::Cls)?,
            pool,
        ),
        m if m == judge::METRIC_ID => judge_metric(cfg, inputs),
        other => Err(CliError::Validation(format!("unknown metric id {other:?}"))),
    }
}
