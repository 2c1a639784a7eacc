//! Per-metric score files (`scores/<metric>.jsonl`) and their manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::corpus::{Direction, ScoreMatrix};
use crate::embedding::ScoreFlag;

pub const MANIFEST: &str = "manifest.json";

/// One line of a score file; `score` is null for pairs the metric could not score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLine {
    pub model: String,
    pub id: String,
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<ScoreFlag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
    #[serde(default)]
    pub excluded_models: Vec<String>,
    pub scored: usize,
    pub unscored: usize,
    pub flagged: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub metrics: BTreeMap<String, ManifestEntry>,
}

/// Scores of one metric ready to be written.
#[derive(Debug, Clone, Default)]
pub struct MetricScores {
    pub matrix: ScoreMatrix,
    pub flags: BTreeMap<(String, String), ScoreFlag>,
    pub excluded: BTreeSet<String>,
    pub provider: Option<String>,
}

pub fn scores_dir(out: &Path) -> PathBuf {
    out.join("scores")
}

pub fn score_path(out: &Path, metric: &str) -> PathBuf {
    scores_dir(out).join(format!("{metric}.jsonl"))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Computation(format!("{}: {e}", path.display()))
}

/// Writes via a temporary file so a crash never leaves a half-written score file.
fn write_atomic(path: &Path, body: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(body).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn write_metric(
    out: &Path,
    metric: &str,
    scores: &MetricScores,
) -> Result<ManifestEntry, CliError> {
    let mut lines: BTreeMap<(&str, &str), ScoreLine> = BTreeMap::new();
    for (k, &v) in scores
        .matrix
        .entries
        .iter()
        .filter(|(k, _)| k.metric_id == metric)
    {
        let flag = scores
            .flags
            .get(&(k.model_id.clone(), k.record_id.clone()))
            .copied();
        lines.insert(
            (&k.model_id, &k.record_id),
            ScoreLine {
                model: k.model_id.clone(),
                id: k.record_id.clone(),
                score: Some(v),
                flag,
            },
        );
    }
    for k in scores
        .matrix
        .unscored
        .iter()
        .filter(|k| k.metric_id == metric)
    {
        lines
            .entry((&k.model_id, &k.record_id))
            .or_insert_with(|| ScoreLine {
                model: k.model_id.clone(),
                id: k.record_id.clone(),
                score: None,
                flag: None,
            });
    }
    let mut body = String::new();
    for line in lines.values() {
        body.push_str(&serde_json::to_string(line).expect("score line serializes"));
        body.push('\n');
    }
    write_atomic(&score_path(out, metric), body.as_bytes())?;
    let scored = lines.values().filter(|l| l.score.is_some()).count();
    Ok(ManifestEntry {
        direction: scores
            .matrix
            .direction(metric)
            .ok_or_else(|| CliError::Computation(format!("metric {metric} has no direction")))?,
        provider: scores.provider.clone(),
        excluded_models: scores.excluded.iter().cloned().collect(),
        scored,
        unscored: lines.len() - scored,
        flagged: lines.values().filter(|l| l.flag.is_some()).count(),
    })
}

pub fn read_manifest(out: &Path) -> Result<Manifest, CliError> {
    let path = scores_dir(out).join(MANIFEST);
    if !path.exists() {
        return Ok(Manifest::default());
    }
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn write_manifest(out: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let mut body = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    body.push('\n');
    write_atomic(&scores_dir(out).join(MANIFEST), body.as_bytes())
}

fn read_metric(
    out: &Path,
    metric: &str,
    entry: &ManifestEntry,
    into: &mut ScoreMatrix,
) -> Result<(), CliError> {
    let path = score_path(out, metric);
    let f =
        File::open(&path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    into.declare(metric, entry.direction)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| io_err(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: ScoreLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Validation(format!("{}:{}: {e}", path.display(), i + 1)))?;
        match l.score {
            Some(v) => into.insert(metric, &l.model, &l.id, v),
            None => into.mark_unscored(metric, &l.model, &l.id),
        }
    }
    Ok(())
}

/// All metrics listed in the manifest, plus the models each one excludes.
pub fn load_all(out: &Path) -> Result<(ScoreMatrix, BTreeMap<String, BTreeSet<String>>), CliError> {
    let manifest = read_manifest(out)?;
    let mut m = ScoreMatrix::new();
    let mut exclusions = BTreeMap::new();
    for (metric, entry) in &manifest.metrics {
        read_metric(out, metric, entry, &mut m)?;
        if !entry.excluded_models.is_empty() {
            exclusions.insert(
                metric.clone(),
                entry.excluded_models.iter().cloned().collect(),
            );
        }
    }
    Ok((m, exclusions))
}
