//! The `semscore` command line: validate inputs, compute scores, judge, and
//! render ranking, correlation, per-task and agreement tables.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::analysis::{
    self, annotators, cohen_kappa, correlation_report, grade_distribution, human_score_matrix,
    mean_score_per_model, paired_grades, per_group_correlation, rank_models, AnalysisError,
    ModelRanking, HUMAN_METRIC,
};
use crate::corpus::{
    load_external_scores, load_ratings, load_records, load_responses, validate_join, CorpusError,
    Dataset, Direction, ScoreMatrix, Universe,
};
use crate::embedding::EmbeddingError;
use crate::judge::{JudgeError, RetryPolicy};
use crate::report::{self, render_all, Format, Table};

pub mod pipeline;
pub mod scores;

pub use pipeline::{direction_of, Inputs, METRICS};

pub const EMBED_ENDPOINT_ENV: &str = "EMBED_ENDPOINT";
pub const DEFAULT_METRICS: &[&str] = &["rouge_l", "bleu", "semscore"];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Computation(String),
    #[error("{0}")]
    Endpoint(String),
}

impl CliError {
    /// 1 validation, 2 computation, 3 endpoint.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Computation(_) => 2,
            CliError::Endpoint(_) => 3,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Computation(e.to_string())
    }
}

fn is_endpoint_failure(e: &EmbeddingError) -> bool {
    match e {
        EmbeddingError::Transport(_)
        | EmbeddingError::Service { .. }
        | EmbeddingError::BadResponse(_) => true,
        EmbeddingError::ForText { source, .. } => is_endpoint_failure(source),
        _ => false,
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        if is_endpoint_failure(&e) {
            CliError::Endpoint(e.to_string())
        } else {
            CliError::Computation(e.to_string())
        }
    }
}

impl From<JudgeError> for CliError {
    fn from(e: JudgeError) -> Self {
        match e {
            JudgeError::Endpoint { .. } => CliError::Endpoint(e.to_string()),
            JudgeError::UnknownRecord(_) => CliError::Validation(e.to_string()),
            other => CliError::Computation(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "semscore",
    version,
    about = "Score model responses against gold targets and compare metrics with human judgement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check that responses and ratings join the records.
    Validate,
    /// Compute the selected metrics into <out>/scores.
    Score,
    /// Run only the LLM judge metric.
    Judge,
    /// Rank models per metric.
    Rank,
    /// Correlate metric means with human means.
    Correlate,
    /// Render all tables and write them under <out>.
    Report,
    /// Agreement between two annotators.
    Kappa,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub records: Option<PathBuf>,
    #[arg(long, global = true)]
    pub responses: Option<PathBuf>,
    #[arg(long, global = true)]
    pub ratings: Option<PathBuf>,
    /// Comma-separated metric ids.
    #[arg(long, global = true, value_delimiter = ',')]
    pub metrics: Vec<String>,
    /// Embedding provider: reference or http.
    #[arg(long, global = true)]
    pub provider: Option<String>,
    /// Embedding service URL (falls back to EMBED_ENDPOINT).
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub embed_model: Option<String>,
    /// Chat-completion base URL for the judge.
    #[arg(long, global = true)]
    pub judge_endpoint: Option<String>,
    #[arg(long, global = true)]
    pub judge_model: Option<String>,
    /// Extra response model id to treat as the judge, as JUDGE=MODEL.
    #[arg(long, global = true, value_name = "JUDGE=MODEL")]
    pub judge_alias: Vec<String>,
    /// Drop the judge's own responses from the judge metric.
    #[arg(long, global = true)]
    pub exclude_self: bool,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Recompute metrics whose score files already exist.
    #[arg(long, global = true)]
    pub force: bool,
    /// Score whatever joins instead of failing on join defects.
    #[arg(long, global = true)]
    pub allow_partial: bool,
    /// Minimum records per task group in the per-task table.
    #[arg(long, global = true)]
    pub min_instances: Option<usize>,
    /// The two annotators to compare, as A,B.
    #[arg(long, global = true, value_delimiter = ',')]
    pub annotators: Vec<String>,
    /// External per-record scores as METRIC:DIRECTION:PATH (TSV).
    #[arg(long, global = true)]
    pub external: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub metric: String,
    pub direction: Direction,
    pub path: PathBuf,
}

impl std::str::FromStr for ExternalSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut it = s.splitn(3, ':');
        match (it.next(), it.next(), it.next()) {
            (Some(m), Some(d), Some(p)) if !m.is_empty() && !p.is_empty() => Ok(ExternalSpec {
                metric: m.to_string(),
                direction: d.parse()?,
                path: PathBuf::from(p),
            }),
            _ => Err(format!("expected METRIC:DIRECTION:PATH, got {s:?}")),
        }
    }
}

/// Contents of a `--config` file. Credentials are not accepted here.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub records: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    #[serde(default)]
    pub external: Vec<ExternalSpec>,
    pub metrics: Option<Vec<String>>,
    pub provider: Option<String>,
    pub embed_endpoint: Option<String>,
    pub embed_model: Option<String>,
    pub embed_dim: Option<usize>,
    pub judge_endpoint: Option<String>,
    pub judge_model: Option<String>,
    #[serde(default)]
    pub judge_aliases: BTreeMap<String, Vec<String>>,
    pub exclude_self: Option<bool>,
    pub judge_retries: Option<u32>,
    pub judge_base_delay_ms: Option<u64>,
    pub judge_min_interval_ms: Option<u64>,
    pub judge_timeout_s: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub jobs: Option<usize>,
    pub min_instances: Option<usize>,
    pub annotators: Option<Vec<String>>,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub records: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub external: Vec<ExternalSpec>,
    pub metrics: Vec<String>,
    pub provider: String,
    pub embed_endpoint: Option<String>,
    pub embed_model: String,
    pub embed_dim: usize,
    pub judge_endpoint: Option<String>,
    pub judge_model: String,
    pub judge_aliases: BTreeMap<String, Vec<String>>,
    pub exclude_self: bool,
    pub judge_retry: RetryPolicy,
    pub judge_min_interval: Duration,
    pub judge_timeout: Duration,
    pub out: PathBuf,
    pub format: Format,
    pub jobs: usize,
    pub force: bool,
    pub allow_partial: bool,
    pub min_instances: usize,
    pub annotators: Option<(String, String)>,
}

fn under(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Merges flags over the config file over defaults, then checks that
    /// metric ids are known and input files exist.
    pub fn resolve(opts: &Opts) -> Result<Self, CliError> {
        let (file, base) = match &opts.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
                let fc: FileConfig = toml::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (fc, base)
            }
            None => (FileConfig::default(), PathBuf::new()),
        };

        let path_of = |flag: &Option<PathBuf>, file: Option<PathBuf>| {
            flag.clone().or(file.map(|p| under(&base, p)))
        };
        let mut external: Vec<ExternalSpec> = file
            .external
            .into_iter()
            .map(|mut e| {
                e.path = under(&base, e.path);
                e
            })
            .collect();
        for spec in &opts.external {
            external.push(spec.parse().map_err(CliError::Validation)?);
        }

        let metrics = if !opts.metrics.is_empty() {
            opts.metrics.clone()
        } else {
            file.metrics
                .unwrap_or_else(|| DEFAULT_METRICS.iter().map(|s| s.to_string()).collect())
        };
        let mut seen = BTreeSet::new();
        for m in &metrics {
            if direction_of(m).is_none() {
                let known: Vec<&str> = METRICS.iter().map(|(m, _)| *m).collect();
                return Err(CliError::Validation(format!(
                    "unknown metric id {m:?} (known: {})",
                    known.join(", ")
                )));
            }
            if !seen.insert(m) {
                return Err(CliError::Validation(format!("metric {m:?} listed twice")));
            }
        }

        let format = match (opts.format, file.format) {
            (Some(f), _) => f,
            (None, Some(s)) => s.parse().map_err(CliError::Validation)?,
            (None, None) => Format::Text,
        };

        let mut judge_aliases = file.judge_aliases;
        for a in &opts.judge_alias {
            let (judge, model) = a
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("expected JUDGE=MODEL, got {a:?}")))?;
            judge_aliases
                .entry(judge.to_string())
                .or_default()
                .push(model.to_string());
        }

        let annotators = match opts.annotators.as_slice() {
            [] => file.annotators.unwrap_or_default(),
            a => a.to_vec(),
        };
        let annotators = match annotators.as_slice() {
            [] => None,
            [a, b] => Some((a.clone(), b.clone())),
            other => {
                return Err(CliError::Validation(format!(
                    "--annotators takes exactly two ids, got {}",
                    other.len()
                )))
            }
        };

        let defaults = RetryPolicy::default();
        let cfg = RunConfig {
            records: path_of(&opts.records, file.records),
            responses: path_of(&opts.responses, file.responses),
            ratings: path_of(&opts.ratings, file.ratings),
            external,
            metrics,
            provider: opts
                .provider
                .clone()
                .or(file.provider)
                .unwrap_or_else(|| "reference".into()),
            embed_endpoint: opts
                .endpoint
                .clone()
                .or(file.embed_endpoint)
                .or_else(|| std::env::var(EMBED_ENDPOINT_ENV).ok()),
            embed_model: opts
                .embed_model
                .clone()
                .or(file.embed_model)
                .unwrap_or_else(|| "all-mpnet-base-v2".into()),
            embed_dim: file.embed_dim.unwrap_or(768),
            judge_endpoint: opts.judge_endpoint.clone().or(file.judge_endpoint),
            judge_model: opts
                .judge_model
                .clone()
                .or(file.judge_model)
                .unwrap_or_else(|| "gpt-4".into()),
            judge_aliases,
            exclude_self: opts.exclude_self || file.exclude_self.unwrap_or(false),
            judge_retry: RetryPolicy {
                max_retries: file.judge_retries.unwrap_or(defaults.max_retries),
                base_delay: file
                    .judge_base_delay_ms
                    .map_or(defaults.base_delay, Duration::from_millis),
                max_delay: defaults.max_delay,
            },
            judge_min_interval: Duration::from_millis(file.judge_min_interval_ms.unwrap_or(0)),
            judge_timeout: Duration::from_secs(file.judge_timeout_s.unwrap_or(120)),
            out: opts
                .out
                .clone()
                .or(file.out.map(|p| under(&base, p)))
                .unwrap_or_else(|| PathBuf::from("out")),
            format,
            jobs: opts
                .jobs
                .or(file.jobs)
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            force: opts.force,
            allow_partial: opts.allow_partial,
            min_instances: opts.min_instances.or(file.min_instances).unwrap_or(6),
            annotators,
        };
        if cfg.jobs == 0 {
            return Err(CliError::Validation("--jobs must be at least 1".into()));
        }
        let inputs = [&cfg.records, &cfg.responses, &cfg.ratings];
        for p in inputs
            .into_iter()
            .flatten()
            .chain(cfg.external.iter().map(|e| &e.path))
        {
            if !p.is_file() {
                return Err(CliError::Validation(format!(
                    "{}: no such file",
                    p.display()
                )));
            }
        }
        Ok(cfg)
    }

    fn require<'a>(
        &self,
        path: &'a Option<PathBuf>,
        flag: &str,
        cmd: &str,
    ) -> Result<&'a Path, CliError> {
        path.as_deref()
            .ok_or_else(|| CliError::Validation(format!("{cmd} needs --{flag}")))
    }
}

fn load_inputs(cfg: &RunConfig, cmd: &str) -> Result<Inputs, CliError> {
    let dataset = load_records(cfg.require(&cfg.records, "records", cmd)?)?;
    let responses = load_responses(cfg.require(&cfg.responses, "responses", cmd)?)?;
    let ratings = match &cfg.ratings {
        Some(p) => load_ratings(p)?,
        None => Vec::new(),
    };
    Ok(Inputs {
        dataset,
        responses,
        ratings,
    })
}

fn cmd_validate(cfg: &RunConfig) -> Result<String, CliError> {
    let inputs = load_inputs(cfg, "validate")?;
    let models: BTreeSet<&str> = inputs
        .responses
        .iter()
        .map(|r| r.model_id.as_str())
        .collect();
    let mut out = format!(
        "records: {}\nresponses: {} from {} model(s)\nratings: {}\n",
        inputs.dataset.len(),
        inputs.responses.len(),
        models.len(),
        inputs.ratings.len()
    );
    let report = validate_join(&inputs.dataset, &inputs.responses, &inputs.ratings);
    if report.is_empty() {
        out.push_str("join: ok\n");
        return Ok(out);
    }
    let mut t = Table::new(
        "Join issues",
        ["model", "record", "issue"].map(String::from).to_vec(),
    );
    for i in &report.issues {
        t.rows.push(vec![
            i.model_id.clone(),
            i.record_id.clone(),
            i.kind.to_string(),
        ]);
    }
    out.push_str(&t.render(cfg.format));
    Err(CliError::Validation(format!(
        "{out}{} join issue(s)",
        report.issues.len()
    )))
}

fn cmd_score(cfg: &RunConfig, metrics: &[String]) -> Result<String, CliError> {
    let inputs = load_inputs(cfg, "score")?;
    let report = validate_join(&inputs.dataset, &inputs.responses, &inputs.ratings);
    if !report.is_empty() {
        if !cfg.allow_partial {
            return Err(CliError::Validation(format!(
                "{} join issue(s); run `semscore validate` for details or pass --allow-partial",
                report.issues.len()
            )));
        }
        log::warn!("scoring a partial join ({} issue(s))", report.issues.len());
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Computation(e.to_string()))?;
    let mut manifest = scores::read_manifest(&cfg.out)?;
    let mut embedders = pipeline::Embedders::new();
    let mut out = String::new();
    for metric in metrics {
        let path = scores::score_path(&cfg.out, metric);
        if !cfg.force && path.exists() && manifest.metrics.contains_key(metric) {
            out.push_str(&format!("{metric}: kept existing {}\n", path.display()));
            continue;
        }
        let s = pipeline::compute(metric, cfg, &inputs, &mut embedders, &pool)?;
        let entry = scores::write_metric(&cfg.out, metric, &s)?;
        out.push_str(&format!(
            "{metric}: {} scored, {} unscored, {} flagged -> {}\n",
            entry.scored,
            entry.unscored,
            entry.flagged,
            path.display()
        ));
        manifest.metrics.insert(metric.clone(), entry);
        scores::write_manifest(&cfg.out, &manifest)?;
    }
    Ok(out)
}

/// Everything the rendering commands work from.
struct Loaded {
    scores: ScoreMatrix,
    exclusions: BTreeMap<String, BTreeSet<String>>,
    dataset: Option<Dataset>,
    human: Option<ScoreMatrix>,
    ratings: Vec<crate::corpus::HumanRating>,
}

fn load_for_report(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let (mut scores, exclusions) = scores::load_all(&cfg.out)?;
    let dataset = cfg.records.as_deref().map(load_records).transpose()?;
    if !cfg.external.is_empty() {
        let (Some(ds), Some(rp)) = (&dataset, &cfg.responses) else {
            return Err(CliError::Validation(
                "--external needs --records and --responses to check its keys".into(),
            ));
        };
        let universe = Universe::from_responses(ds, &load_responses(rp)?);
        for e in &cfg.external {
            scores.merge(load_external_scores(
                &e.path,
                &e.metric,
                e.direction,
                &universe,
            )?)?;
        }
    }
    let ratings = match &cfg.ratings {
        Some(p) => load_ratings(p)?,
        None => Vec::new(),
    };
    let human = (!ratings.is_empty()).then(|| human_score_matrix(&ratings));
    Ok(Loaded {
        scores,
        exclusions,
        dataset,
        human,
        ratings,
    })
}

/// Registered metrics in registry order, then any others alphabetically.
fn metric_order(m: &ScoreMatrix) -> Vec<String> {
    let present: BTreeSet<&str> = m.metrics().filter(|&x| x != HUMAN_METRIC).collect();
    let mut out: Vec<String> = METRICS
        .iter()
        .filter(|(id, _)| present.contains(id))
        .map(|(id, _)| id.to_string())
        .collect();
    out.extend(
        present
            .iter()
            .filter(|id| direction_of(id).is_none())
            .map(|s| s.to_string()),
    );
    out
}

fn rankings(cfg: &RunConfig, l: &Loaded) -> Result<Vec<ModelRanking>, CliError> {
    let mut out = Vec::new();
    if let Some(h) = &l.human {
        let means = mean_score_per_model(h, HUMAN_METRIC)?;
        out.push(rank_models(
            HUMAN_METRIC,
            &means.means,
            Direction::LowerBetter,
        ));
    }
    for metric in metric_order(&l.scores) {
        let means = mean_score_per_model(&l.scores, &metric)?;
        let dir = l.scores.direction(&metric).expect("declared");
        out.push(rank_models(&metric, &means.means, dir));
    }
    if out.is_empty() {
        return Err(CliError::Validation(format!(
            "no scores under {}; run `semscore score` first",
            scores::scores_dir(&cfg.out).display()
        )));
    }
    Ok(out)
}

fn correlation(l: &Loaded) -> Result<Table, CliError> {
    let human = l
        .human
        .as_ref()
        .ok_or_else(|| CliError::Validation("correlation needs human scores (--ratings)".into()))?;
    let means = mean_score_per_model(human, HUMAN_METRIC)?;
    let rep = correlation_report(&means.means, &l.scores, &l.exclusions)?;
    let order = metric_order(&l.scores);
    let mut rows = rep.rows.clone();
    rows.sort_by_key(|r| order.iter().position(|m| *m == r.metric_id));
    Ok(report::correlation_table(&analysis::CorrelationReport {
        rows,
    }))
}

fn per_group(cfg: &RunConfig, l: &Loaded) -> Result<Option<Table>, CliError> {
    let (Some(ds), Some(human)) = (&l.dataset, &l.human) else {
        return Ok(None);
    };
    let models: Vec<String> = human
        .metric_slice(HUMAN_METRIC)
        .keys()
        .map(|s| s.to_string())
        .collect();
    match per_group_correlation(
        ds,
        &l.scores,
        human,
        cfg.min_instances,
        &models,
        &l.exclusions,
    ) {
        Ok(mut t) => {
            let order = metric_order(&l.scores);
            t.metrics.sort_by_key(|m| order.iter().position(|o| o == m));
            Ok(Some(report::group_table(&t, &l.exclusions)))
        }
        Err(AnalysisError::NoQualifyingGroup(n)) => {
            let mut t = Table::new(
                "Kendall tau per task group (absolute values)",
                vec!["group".into(), "instances".into()],
            );
            t.footnotes
                .push(format!("no task group has at least {n} instances"));
            Ok(Some(t))
        }
        Err(e) => Err(e.into()),
    }
}

fn kappa(
    cfg: &RunConfig,
    ratings: &[crate::corpus::HumanRating],
) -> Result<Option<Table>, CliError> {
    let (a, b) = match &cfg.annotators {
        Some(pair) => pair.clone(),
        None => {
            let all: Vec<String> = annotators(ratings).into_iter().collect();
            match all.as_slice() {
                [a, b] => (a.clone(), b.clone()),
                [] | [_] => return Ok(None),
                _ => {
                    return Err(CliError::Validation(format!(
                        "{} annotators in ratings; pick two with --annotators",
                        all.len()
                    )))
                }
            }
        }
    };
    let (ga, gb) = paired_grades(ratings, &a, &b);
    let k = match cohen_kappa(&ga, &gb) {
        Ok(k) => Some(k),
        Err(AnalysisError::KappaUndefined) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Some(report::kappa_table(&a, &b, ga.len(), k)))
}

fn write_text(path: &Path, body: &str) -> Result<(), CliError> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d)
            .map_err(|e| CliError::Computation(format!("{}: {e}", d.display())))?;
    }
    std::fs::write(path, body)
        .map_err(|e| CliError::Computation(format!("{}: {e}", path.display())))
}

fn cmd_report(cfg: &RunConfig) -> Result<String, CliError> {
    let l = load_for_report(cfg)?;
    let ranks = rankings(cfg, &l)?;
    let mut tables = vec![report::ranking_table(&ranks), report::means_table(&ranks)];
    if l.human.is_some() {
        tables.push(correlation(&l)?);
    }
    tables.extend(per_group(cfg, &l)?);
    tables.extend(kappa(cfg, &l.ratings)?);
    let body = render_all(&tables, cfg.format);
    write_text(
        &cfg.out.join(format!("report.{}", cfg.format.extension())),
        &body,
    )?;
    if !l.ratings.is_empty() {
        let dist = report::grade_distribution_table(&grade_distribution(&l.ratings));
        write_text(
            &cfg.out.join("grade_distribution.tsv"),
            &dist.render(Format::Tsv),
        )?;
    }
    Ok(body)
}

/// Runs one command and returns what it prints on success.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = RunConfig::resolve(&cli.opts)?;
    match cli.command {
        Command::Validate => cmd_validate(&cfg),
        Command::Score => cmd_score(&cfg, &cfg.metrics),
        Command::Judge => cmd_score(&cfg, &[crate::judge::METRIC_ID.to_string()]),
        Command::Rank => {
            let l = load_for_report(&cfg)?;
            let r = rankings(&cfg, &l)?;
            Ok(render_all(
                &[report::ranking_table(&r), report::means_table(&r)],
                cfg.format,
            ))
        }
        Command::Correlate => Ok(correlation(&load_for_report(&cfg)?)?.render(cfg.format)),
        Command::Kappa => {
            let ratings = load_ratings(cfg.require(&cfg.ratings, "ratings", "kappa")?)?;
            kappa(&cfg, &ratings)?
                .map(|t| t.render(cfg.format))
                .ok_or_else(|| {
                    CliError::Validation("kappa needs ratings from two annotators".into())
                })
        }
        Command::Report => cmd_report(&cfg),
    }
}

/// Parses `args`, runs, prints, and maps errors to exit codes.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
