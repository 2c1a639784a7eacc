//! Human-grade aggregation, rankings, rank/linear correlation and annotator agreement.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Dataset, Direction, Grade, HumanRating, ScoreMatrix};

/// Metric id under which human scores are stored in a `ScoreMatrix`.
pub const HUMAN_METRIC: &str = "human";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalysisError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("all pairs tied on one side; tau is undefined")]
    AllTies,
    #[error("zero variance; correlation is undefined")]
    ZeroVariance,
    #[error("metric {metric}: model {model} has no scored records")]
    NoScores { metric: String, model: String },
    #[error("metric {0} not present")]
    UnknownMetric(String),
    #[error("metric {metric}: only {models} models shared with human scores, need 3")]
    TooFewModels { metric: String, models: usize },
    #[error("no task group has at least {0} instances")]
    NoQualifyingGroup(usize),
    #[error("chance agreement is 1; kappa is undefined")]
    KappaUndefined,
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;

/// A -> 1 ... D -> 4, lower is better.
pub fn grade_to_score(grade: Grade) -> u8 {
    grade.index() as u8 + 1
}

/// Per-(model, record) human score: the mean over annotators of grade scores.
pub fn human_score_matrix(ratings: &[HumanRating]) -> ScoreMatrix {
    let mut acc: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    for r in ratings {
        let e = acc
            .entry((r.model_id.as_str(), r.record_id.as_str()))
            .or_default();
        e.0 += f64::from(grade_to_score(r.grade));
        e.1 += 1;
    }
    let mut m = ScoreMatrix::new();
    m.declare(HUMAN_METRIC, Direction::LowerBetter)
        .expect("fresh matrix");
    for ((model, record), (sum, n)) in acc {
        m.insert(HUMAN_METRIC, model, record, sum / n as f64);
    }
    m
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ModelMeans {
    pub means: BTreeMap<String, f64>,
    /// Records that contributed to each mean; 0 for externally supplied aggregates.
    pub counts: BTreeMap<String, usize>,
    pub unscored: BTreeMap<String, usize>,
}

/// Arithmetic mean per model over its scored records.
///
/// Unscored records are left out of the mean and counted. A model with only
/// an external aggregate (id `*`) takes that value as its mean.
pub fn mean_score_per_model(matrix: &ScoreMatrix, metric: &str) -> Result<ModelMeans> {
    if matrix.direction(metric).is_none() {
        return Err(AnalysisError::UnknownMetric(metric.to_string()));
    }
    let mut out = ModelMeans::default();
    for (model, scores) in matrix.metric_slice(metric) {
        let sum: f64 = scores.values().sum();
        out.means
            .insert(model.to_string(), sum / scores.len() as f64);
        out.counts.insert(model.to_string(), scores.len());
    }
    for ((m, model), &v) in &matrix.aggregates {
        if m == metric && !out.means.contains_key(model) {
            out.means.insert(model.clone(), v);
            out.counts.insert(model.clone(), 0);
        }
    }
    for k in matrix.unscored.iter().filter(|k| k.metric_id == metric) {
        if !out.means.contains_key(&k.model_id) {
            return Err(AnalysisError::NoScores {
                metric: metric.to_string(),
                model: k.model_id.clone(),
            });
        }
        *out.unscored.entry(k.model_id.clone()).or_default() += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedModel {
    pub model_id: String,
    pub mean_score: f64,
    pub rank: usize,
    /// Mean exactly equal to another model's; rank order then follows the id.
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRanking {
    pub metric_id: String,
    pub direction: Direction,
    pub entries: Vec<RankedModel>,
}

impl ModelRanking {
    pub fn rank_of(&self, model: &str) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.model_id == model)
            .map(|e| e.rank)
    }
}

/// Ranks models best first. Exact ties are ordered by model id and flagged.
pub fn rank_models(
    metric_id: &str,
    means: &BTreeMap<String, f64>,
    direction: Direction,
) -> ModelRanking {
    let mut items: Vec<(&String, f64)> = means.iter().map(|(k, &v)| (k, v)).collect();
    items.sort_by(|a, b| {
        let by_value = match direction {
            Direction::HigherBetter => b.1.total_cmp(&a.1),
            Direction::LowerBetter => a.1.total_cmp(&b.1),
        };
        by_value.then_with(|| a.0.cmp(b.0))
    });
    let entries = items
        .iter()
        .enumerate()
        .map(|(i, &(model, mean))| {
            let same = |j: usize| items.get(j).is_some_and(|o| o.1 == mean);
            RankedModel {
                model_id: model.clone(),
                mean_score: mean,
                rank: i + 1,
                tied: (i > 0 && same(i - 1)) || same(i + 1),
            }
        })
        .collect();
    ModelRanking {
        metric_id: metric_id.to_string(),
        direction,
        entries,
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(AnalysisError::TooShort {
            needed: 2,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    Ok(())
}

/// Sum of t(t-1)/2 over runs of equal adjacent elements.
fn tied_pairs<T>(items: &[T], eq: impl Fn(&T, &T) -> bool) -> i64 {
    let mut total = 0i64;
    let mut run = 1i64;
    for w in items.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Stable merge sort counting strict inversions.
fn sort_count_swaps(v: &mut [f64], buf: &mut Vec<f64>) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count_swaps(&mut v[..mid], buf) + sort_count_swaps(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf.push(v[i]);
            i += 1;
        } else {
            buf.push(v[j]);
            swaps += (mid - i) as i64;
            j += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Tie-corrected Kendall rank correlation, O(n log n) (Knight's algorithm).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as i64;
    // `+ 0.0` folds -0.0 into 0.0 so total_cmp agrees with ==
    let mut pairs: Vec<(f64, f64)> = x.iter().zip(y).map(|(a, b)| (a + 0.0, b + 0.0)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = n * (n - 1) / 2;
    let n1 = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let n3 = tied_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let swaps = sort_count_swaps(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys, |a, b| a == b);

    let denom = ((n0 - n1) as f64) * ((n0 - n2) as f64);
    if denom == 0.0 {
        return Err(AnalysisError::AllTies);
    }
    let c_minus_d = n0 - n1 - n2 + n3 - 2 * swaps;
    Ok((c_minus_d as f64 / denom.sqrt()).clamp(-1.0, 1.0))
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCorrelation {
    pub metric_id: String,
    pub tau: f64,
    pub r: f64,
    pub reported_tau: f64,
    pub reported_r: f64,
    pub models: usize,
    pub excluded_models: Vec<String>,
    /// Records the metric left unscored, summed over the compared models.
    pub unscored: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub rows: Vec<MetricCorrelation>,
}

impl CorrelationReport {
    pub fn get(&self, metric: &str) -> Option<&MetricCorrelation> {
        self.rows.iter().find(|r| r.metric_id == metric)
    }
}

/// Correlates each metric's per-model means with the human per-model means.
///
/// Models listed in `exclusions` for a metric are left out of that metric's
/// comparison. Reported values are the absolute signed statistics.
pub fn correlation_report(
    human_means: &BTreeMap<String, f64>,
    matrix: &ScoreMatrix,
    exclusions: &BTreeMap<String, BTreeSet<String>>,
) -> Result<CorrelationReport> {
    let empty = BTreeSet::new();
    let mut rows = Vec::new();
    for metric in matrix.metrics().filter(|&m| m != HUMAN_METRIC) {
        let means = mean_score_per_model(matrix, metric)?;
        let excluded = exclusions.get(metric).unwrap_or(&empty);
        let (mut hx, mut my) = (Vec::new(), Vec::new());
        let mut unscored = 0;
        for (model, &m) in &means.means {
            if excluded.contains(model) {
                continue;
            }
            if let Some(&h) = human_means.get(model) {
                hx.push(h);
                my.push(m);
                unscored += means.unscored.get(model).copied().unwrap_or(0);
            }
        }
        if hx.len() < 3 {
            return Err(AnalysisError::TooFewModels {
                metric: metric.to_string(),
                models: hx.len(),
            });
        }
        let tau = kendall_tau_b(&hx, &my)?;
        let r = pearson_r(&hx, &my)?;
        rows.push(MetricCorrelation {
            metric_id: metric.to_string(),
            tau,
            r,
            reported_tau: tau.abs(),
            reported_r: r.abs(),
            models: hx.len(),
            excluded_models: excluded.iter().cloned().collect(),
            unscored,
        });
    }
    Ok(CorrelationReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCorrelation {
    pub task_group: String,
    pub instances: usize,
    /// τ_b per metric; `None` when one side is constant across models.
    pub taus: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GroupTable {
    pub metrics: Vec<String>,
    pub rows: Vec<GroupCorrelation>,
    /// Groups below the instance threshold, with their sizes.
    pub omitted: Vec<(String, usize)>,
}

fn group_mean(scores: Option<&BTreeMap<&str, f64>>, ids: &BTreeSet<&str>) -> Option<f64> {
    let s = scores?;
    let vals: Vec<f64> = ids.iter().filter_map(|id| s.get(id).copied()).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Kendall τ_b per task group between human and metric per-model means.
///
/// Only `models` take part, minus any excluded for a metric. Groups with
/// fewer than `min_instances` records are omitted.
pub fn per_group_correlation(
    dataset: &Dataset,
    matrix: &ScoreMatrix,
    human: &ScoreMatrix,
    min_instances: usize,
    models: &[String],
    exclusions: &BTreeMap<String, BTreeSet<String>>,
) -> Result<GroupTable> {
    let mut groups: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in &dataset.records {
        groups
            .entry(r.task_group.as_str())
            .or_default()
            .insert(r.record_id.as_str());
    }
    let human_slice = human.metric_slice(HUMAN_METRIC);
    let metrics: Vec<String> = matrix
        .metrics()
        .filter(|&m| m != HUMAN_METRIC)
        .map(str::to_string)
        .collect();
    let slices: Vec<_> = metrics.iter().map(|m| matrix.metric_slice(m)).collect();
    let empty = BTreeSet::new();

    let mut table = GroupTable {
        metrics: metrics.clone(),
        ..Default::default()
    };
    for (group, ids) in groups {
        if ids.len() < min_instances {
            table.omitted.push((group.to_string(), ids.len()));
            continue;
        }
        let mut taus = BTreeMap::new();
        for (metric, slice) in metrics.iter().zip(&slices) {
            let excluded = exclusions.get(metric).unwrap_or(&empty);
            let (mut hx, mut my) = (Vec::new(), Vec::new());
            for model in models.iter().filter(|m| !excluded.contains(*m)) {
                let h = group_mean(human_slice.get(model.as_str()), &ids);
                let m = group_mean(slice.get(model.as_str()), &ids);
                if let (Some(h), Some(m)) = (h, m) {
                    hx.push(h);
                    my.push(m);
                }
            }
            let tau = match kendall_tau_b(&hx, &my) {
                Ok(t) => Some(t),
                Err(AnalysisError::AllTies | AnalysisError::TooShort { .. }) => None,
                Err(e) => return Err(e),
            };
            taus.insert(metric.clone(), tau);
        }
        table.rows.push(GroupCorrelation {
            task_group: group.to_string(),
            instances: ids.len(),
            taus,
        });
    }
    if table.rows.is_empty() {
        return Err(AnalysisError::NoQualifyingGroup(min_instances));
    }
    Ok(table)
}

/// Cohen's kappa over the grade scale.
pub fn cohen_kappa(a: &[Grade], b: &[Grade]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(AnalysisError::TooShort { needed: 1, got: 0 });
    }
    let n = a.len() as f64;
    let (mut ca, mut cb) = ([0usize; 4], [0usize; 4]);
    let mut agree = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        ca[x.index()] += 1;
        cb[y.index()] += 1;
        agree += usize::from(x == y);
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = (0..4).map(|g| ca[g] as f64 * cb[g] as f64).sum::<f64>() / (n * n);
    if p_e >= 1.0 {
        return Err(AnalysisError::KappaUndefined);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

pub fn annotators(ratings: &[HumanRating]) -> BTreeSet<String> {
    ratings.iter().map(|r| r.annotator_id.clone()).collect()
}

/// Grades two annotators gave to the same (model, record) pairs, in key order.
pub fn paired_grades(
    ratings: &[HumanRating],
    first: &str,
    second: &str,
) -> (Vec<Grade>, Vec<Grade>) {
    let pick = |who: &str| -> BTreeMap<(&str, &str), Grade> {
        ratings
            .iter()
            .filter(|r| r.annotator_id == who)
            .map(|r| ((r.model_id.as_str(), r.record_id.as_str()), r.grade))
            .collect()
    };
    let (ga, gb) = (pick(first), pick(second));
    ga.iter()
        .filter_map(|(k, &a)| gb.get(k).map(|&b| (a, b)))
        .unzip()
}

/// Per-model grade counts, A to D.
pub fn grade_distribution(ratings: &[HumanRating]) -> BTreeMap<String, [usize; 4]> {
    let mut out: BTreeMap<String, [usize; 4]> = BTreeMap::new();
    for r in ratings {
        out.entry(r.model_id.clone()).or_default()[r.grade.index()] += 1;
    }
    out
}
