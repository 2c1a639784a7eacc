//! Evaluation data model: instruction records, model responses, human grades
//! and the per-metric score matrix, plus the line-delimited loaders for each.
//!
//! All loaders keep file order and report problems with 1-based line numbers.
//! Text is kept exactly as read; no Unicode normalization happens here.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: duplicate key {key} on lines {first} and {second}")]
    Duplicate {
        path: PathBuf,
        key: String,
        first: usize,
        second: usize,
    },
    #[error("{path}:{line}: {field} is empty")]
    EmptyField {
        path: PathBuf,
        line: usize,
        field: &'static str,
    },
    #[error("{path}:{line}: invalid grade {grade:?} (expected A, B, C or D)")]
    InvalidGrade {
        path: PathBuf,
        line: usize,
        grade: String,
    },
    #[error("metric {metric}: direction {existing} conflicts with {requested}")]
    DirectionConflict {
        metric: String,
        existing: Direction,
        requested: Direction,
    },
    #[error("metric {metric}: unknown keys {keys:?}")]
    UnknownKeys { metric: String, keys: Vec<String> },
    #[error("metric {metric}: conflicting values for {key}")]
    ConflictingScore { metric: String, key: String },
    #[error("{path}: no rows for metric {metric}")]
    NoRows { path: PathBuf, metric: String },
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// One instruction with its gold response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(rename = "id")]
    pub record_id: String,
    #[serde(rename = "group", default)]
    pub task_group: String,
    pub instruction: String,
    #[serde(
        rename = "input",
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "empty_as_none"
    )]
    pub instance_input: Option<String>,
    #[serde(rename = "target")]
    pub target_response: String,
}

fn empty_as_none<'de, D>(de: D) -> std::result::Result<Option<String>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let v: Option<String> = Option::deserialize(de)?;
    Ok(v.filter(|s| !s.is_empty()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    #[serde(rename = "model")]
    pub model_id: String,
    #[serde(rename = "id")]
    pub record_id: String,
    #[serde(rename = "response", default)]
    pub response_text: String,
}

/// Human grade, A best and D worst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Grade {
    A,
    B,
    C,
    D,
}

impl Grade {
    pub const ALL: [Grade; 4] = [Grade::A, Grade::B, Grade::C, Grade::D];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Grade {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "A" => Ok(Grade::A),
            "B" => Ok(Grade::B),
            "C" => Ok(Grade::C),
            "D" => Ok(Grade::D),
            other => Err(format!("invalid grade {other:?}")),
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Grade::A => "A",
            Grade::B => "B",
            Grade::C => "C",
            Grade::D => "D",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HumanRating {
    pub model_id: String,
    pub record_id: String,
    pub annotator_id: String,
    pub grade: Grade,
}

#[derive(Deserialize)]
struct RawRating {
    model: String,
    id: String,
    annotator: String,
    grade: String,
}

/// Ordered, id-unique collection of records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<EvalRecord>,
    pub source_name: String,
}

impl Dataset {
    pub fn new(source_name: impl Into<String>, records: Vec<EvalRecord>) -> Self {
        Dataset {
            records,
            source_name: source_name.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, record_id: &str) -> Option<&EvalRecord> {
        self.records.iter().find(|r| r.record_id == record_id)
    }

    pub fn index(&self) -> HashMap<&str, &EvalRecord> {
        self.records
            .iter()
            .map(|r| (r.record_id.as_str(), r))
            .collect()
    }

    /// Writes the dataset in the same line-delimited schema `load_records` reads.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let io_err = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
        for r in &self.records {
            let line = serde_json::to_string(r).expect("record serializes");
            writeln!(out, "{line}").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::HigherBetter => "higher_better",
            Direction::LowerBetter => "lower_better",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "higher_better" | "higher" => Ok(Direction::HigherBetter),
            "lower_better" | "lower" => Ok(Direction::LowerBetter),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

/// Key of one per-record score.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScoreKey {
    pub metric_id: String,
    pub model_id: String,
    pub record_id: String,
}

impl ScoreKey {
    pub fn new(metric: &str, model: &str, record: &str) -> Self {
        ScoreKey {
            metric_id: metric.to_string(),
            model_id: model.to_string(),
            record_id: record.to_string(),
        }
    }
}

/// Per-(metric, model, record) scores with a declared direction per metric.
///
/// Per-model aggregates (external files with id `*`) are kept apart from the
/// per-record entries. Pairs a metric attempted but could not score are
/// tracked in `unscored` so reports can disclose them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreMatrix {
    pub entries: BTreeMap<ScoreKey, f64>,
    pub aggregates: BTreeMap<(String, String), f64>,
    pub unscored: BTreeSet<ScoreKey>,
    pub directions: BTreeMap<String, Direction>,
}

impl ScoreMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, metric: &str, direction: Direction) -> Result<()> {
        match self.directions.get(metric) {
            Some(&existing) if existing != direction => Err(CorpusError::DirectionConflict {
                metric: metric.to_string(),
                existing,
                requested: direction,
            }),
            _ => {
                self.directions.insert(metric.to_string(), direction);
                Ok(())
            }
        }
    }

    pub fn insert(&mut self, metric: &str, model: &str, record: &str, score: f64) {
        self.entries
            .insert(ScoreKey::new(metric, model, record), score);
    }

    pub fn mark_unscored(&mut self, metric: &str, model: &str, record: &str) {
        self.unscored.insert(ScoreKey::new(metric, model, record));
    }

    pub fn metrics(&self) -> impl Iterator<Item = &str> {
        self.directions.keys().map(String::as_str)
    }

    pub fn direction(&self, metric: &str) -> Option<Direction> {
        self.directions.get(metric).copied()
    }

    /// Per-record scores of one metric as `model -> record -> score`.
    pub fn metric_slice(&self, metric: &str) -> BTreeMap<&str, BTreeMap<&str, f64>> {
        let mut out: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
        for (k, &v) in &self.entries {
            if k.metric_id == metric {
                out.entry(k.model_id.as_str())
                    .or_default()
                    .insert(k.record_id.as_str(), v);
            }
        }
        out
    }

    pub fn unscored_count(&self, metric: &str, model: &str) -> usize {
        self.unscored
            .iter()
            .filter(|k| k.metric_id == metric && k.model_id == model)
            .count()
    }

    pub fn merge(&mut self, other: ScoreMatrix) -> Result<()> {
        for (metric, dir) in &other.directions {
            self.declare(metric, *dir)?;
        }
        for (k, v) in other.entries {
            if let Some(&old) = self.entries.get(&k) {
                if old.to_bits() != v.to_bits() {
                    return Err(CorpusError::ConflictingScore {
                        key: format!("({}, {})", k.model_id, k.record_id),
                        metric: k.metric_id,
                    });
                }
            }
            self.entries.insert(k, v);
        }
        for (k, v) in other.aggregates {
            if let Some(&old) = self.aggregates.get(&k) {
                if old.to_bits() != v.to_bits() {
                    return Err(CorpusError::ConflictingScore {
                        key: format!("({}, *)", k.1),
                        metric: k.0,
                    });
                }
            }
            self.aggregates.insert(k, v);
        }
        self.unscored.extend(other.unscored);
        Ok(())
    }
}

/// Known model ids and (model, record) pairs of a joined collection; used to
/// reject external scores for keys that do not exist.
#[derive(Debug, Clone, Default)]
pub struct Universe {
    pub models: BTreeSet<String>,
    pub pairs: BTreeSet<(String, String)>,
}

impl Universe {
    pub fn from_responses(dataset: &Dataset, responses: &[ModelResponse]) -> Self {
        let ids: BTreeSet<&str> = dataset
            .records
            .iter()
            .map(|r| r.record_id.as_str())
            .collect();
        let mut u = Universe::default();
        for r in responses {
            u.models.insert(r.model_id.clone());
            if ids.contains(r.record_id.as_str()) {
                u.pairs.insert((r.model_id.clone(), r.record_id.clone()));
            }
        }
        u
    }
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)> + '_> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(BufReader::new(file).lines().enumerate().map(move |(i, l)| {
        (
            i + 1,
            l.map_err(|source| CorpusError::Io {
                path: path.to_path_buf(),
                source,
            }),
        )
    }))
}

fn parse_json_line<T: serde::de::DeserializeOwned>(
    path: &Path,
    line: usize,
    text: &str,
) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CorpusError::Malformed {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    })
}

pub fn load_records(path: &Path) -> Result<Dataset> {
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EvalRecord = parse_json_line(path, line_no, &line)?;
        if rec.record_id.is_empty() {
            return Err(CorpusError::EmptyField {
                path: path.to_path_buf(),
                line: line_no,
                field: "id",
            });
        }
        if rec.instruction.trim().is_empty() {
            return Err(CorpusError::EmptyField {
                path: path.to_path_buf(),
                line: line_no,
                field: "instruction",
            });
        }
        if rec.target_response.trim().is_empty() {
            return Err(CorpusError::EmptyField {
                path: path.to_path_buf(),
                line: line_no,
                field: "target",
            });
        }
        if let Some(&first) = seen.get(&rec.record_id) {
            return Err(CorpusError::Duplicate {
                path: path.to_path_buf(),
                key: rec.record_id,
                first,
                second: line_no,
            });
        }
        seen.insert(rec.record_id.clone(), line_no);
        records.push(rec);
    }
    let source_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Dataset::new(source_name, records))
}

pub fn load_responses(path: &Path) -> Result<Vec<ModelResponse>> {
    let mut out = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp: ModelResponse = parse_json_line(path, line_no, &line)?;
        let key = (resp.model_id.clone(), resp.record_id.clone());
        if let Some(&first) = seen.get(&key) {
            return Err(CorpusError::Duplicate {
                path: path.to_path_buf(),
                key: format!("({}, {})", key.0, key.1),
                first,
                second: line_no,
            });
        }
        seen.insert(key, line_no);
        out.push(resp);
    }
    Ok(out)
}

pub fn load_ratings(path: &Path) -> Result<Vec<HumanRating>> {
    let mut out = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRating = parse_json_line(path, line_no, &line)?;
        let grade = raw.grade.parse().map_err(|_| CorpusError::InvalidGrade {
            path: path.to_path_buf(),
            line: line_no,
            grade: raw.grade.clone(),
        })?;
        out.push(HumanRating {
            model_id: raw.model,
            record_id: raw.id,
            annotator_id: raw.annotator,
            grade,
        });
    }
    Ok(out)
}

/// Reads `metric<TAB>model<TAB>id<TAB>score` rows for `metric_id`.
///
/// Rows for other metrics are skipped, as are blank lines and lines starting
/// with `#`. An id of `*` is a per-model aggregate.
pub fn load_external_scores(
    path: &Path,
    metric_id: &str,
    direction: Direction,
    universe: &Universe,
) -> Result<ScoreMatrix> {
    let mut m = ScoreMatrix::new();
    m.declare(metric_id, direction)?;
    let mut unknown = BTreeSet::new();
    let mut rows = 0usize;
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(CorpusError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let (metric, model, id, score) = (fields[0], fields[1], fields[2], fields[3]);
        if metric != metric_id {
            continue;
        }
        let score: f64 = score.trim().parse().map_err(|_| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("score {score:?} is not a number"),
        })?;
        if !score.is_finite() {
            return Err(CorpusError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: "score is not finite".into(),
            });
        }
        rows += 1;
        if id == "*" {
            if !universe.models.contains(model) {
                unknown.insert(format!("({model}, *)"));
                continue;
            }
            m.aggregates
                .insert((metric_id.to_string(), model.to_string()), score);
        } else {
            if !universe
                .pairs
                .contains(&(model.to_string(), id.to_string()))
            {
                unknown.insert(format!("({model}, {id})"));
                continue;
            }
            m.insert(metric_id, model, id, score);
        }
    }
    if !unknown.is_empty() {
        return Err(CorpusError::UnknownKeys {
            metric: metric_id.to_string(),
            keys: unknown.into_iter().collect(),
        });
    }
    if rows == 0 {
        return Err(CorpusError::NoRows {
            path: path.to_path_buf(),
            metric: metric_id.to_string(),
        });
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    MissingResponse,
    UnknownRecord,
    OrphanRating,
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IssueKind::MissingResponse => "missing_response",
            IssueKind::UnknownRecord => "unknown_record",
            IssueKind::OrphanRating => "orphan_rating",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct JoinIssue {
    pub model_id: String,
    pub record_id: String,
    pub kind: IssueKind,
}

/// Join defects, sorted by model, record and kind. Empty iff the join is total.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<JoinIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn contains(&self, model: &str, record: &str, kind: IssueKind) -> bool {
        self.issues
            .iter()
            .any(|i| i.model_id == model && i.record_id == record && i.kind == kind)
    }
}

/// Checks that every model answered every record and every rating has a response.
///
/// Models are those that appear in `responses`; a rating for a model without
/// any response is an orphan rating. Each (model, record, kind) is reported once.
pub fn validate_join(
    dataset: &Dataset,
    responses: &[ModelResponse],
    ratings: &[HumanRating],
) -> ValidationReport {
    let ids: BTreeSet<&str> = dataset
        .records
        .iter()
        .map(|r| r.record_id.as_str())
        .collect();
    let mut answered: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in responses {
        answered
            .entry(r.model_id.as_str())
            .or_default()
            .insert(r.record_id.as_str());
    }

    let mut issues = BTreeSet::new();
    for (&model, got) in &answered {
        for &id in &ids {
            if !got.contains(id) {
                issues.insert(JoinIssue {
                    model_id: model.to_string(),
                    record_id: id.to_string(),
                    kind: IssueKind::MissingResponse,
                });
            }
        }
        for &id in got {
            if !ids.contains(id) {
                issues.insert(JoinIssue {
                    model_id: model.to_string(),
                    record_id: id.to_string(),
                    kind: IssueKind::UnknownRecord,
                });
            }
        }
    }
    for rating in ratings {
        let has_response = answered
            .get(rating.model_id.as_str())
            .is_some_and(|s| s.contains(rating.record_id.as_str()));
        if !has_response {
            issues.insert(JoinIssue {
                model_id: rating.model_id.clone(),
                record_id: rating.record_id.clone(),
                kind: IssueKind::OrphanRating,
            });
        }
    }
    ValidationReport {
        issues: issues.into_iter().collect(),
    }
}
