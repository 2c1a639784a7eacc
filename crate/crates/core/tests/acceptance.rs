//! Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and
//! exits non-zero if any check fails.
//!
//! Optional environment:
//! - `EMBED_ENDPOINT`: an `/embed` service backed by all-mpnet-base-v2.
//! - `SEMSCORE_STUDY_DATA`: directory with `records.jsonl`, `responses.jsonl`
//!   and `human.tsv` (`human<TAB>model<TAB>id<TAB>score`, id `*` for a
//!   per-model mean) holding the released study data.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use common::{chat_reply, fixture, Stub};
use semscore::analysis::{
    cohen_kappa, correlation_report, kendall_tau_b, mean_score_per_model, pearson_r, rank_models,
    HUMAN_METRIC,
};
use semscore::cli::{run, Cli};
use semscore::corpus::{
    load_external_scores, load_records, load_responses, Direction, Grade, ScoreMatrix, Universe,
};
use semscore::embedding::{
    bertscore_f1, semscore, EmbeddingProvider, HashEmbedder, HttpEmbedder, HttpEmbedderConfig,
    PooledProvider, PoolingMode,
};
use semscore::ngram::{rouge_l, sentence_bleu};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::{Fail, Pass, Skip};

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

/// Best of a few timed runs, to keep scheduler noise out of sub-millisecond budgets.
fn best_time<T>(mut f: impl FnMut() -> T) -> (T, Duration) {
    let mut best = Duration::MAX;
    let mut out = None;
    for _ in 0..5 {
        let t = Instant::now();
        let v = f();
        best = best.min(t.elapsed());
        out = Some(v);
    }
    (out.expect("ran at least once"), best)
}

const SAFE_ARRIVAL: (&str, &str) = (
    "Glad you made it safe and sound.",
    "Thank goodness you arrived without any issues.",
);

/// (target, response) of five worked examples.
const EXAMPLES: [(&str, &str); 5] = [
    (
        "Looking for collaborators on a new crowdsourcing project! This is a great opportunity to get involved in \
         something innovative and impactful. If you're interested, please let me know.",
        "Calling all innovators! We need your help to make a difference. Join us in our crowdsourcing project and \
         help us create something amazing. Together, we can make a real impact and create something that will \
         benefit us all. #Crowdsourcing #Collaboration #Innovation",
    ),
    ("haart, heard, hears, heart, hoard, hoary", "HARD, HARSH, HEART"),
    (
        "#Print each fruit in a fruit list:\nfruits = [\"apple\", \"banana\", \"cherry\"]\nfor x in fruits:\nprint(x)",
        "for i in range(10):\nprint(i)",
    ),
    ("verb", "school will keep through the winter"),
    ("Mystery, Sci-Fi, Drama", "Drama, Mystery, Sci-Fi, Thriller"),
];

fn c1_rouge_golden() -> Outcome {
    let cases = [
        (SAFE_ARRIVAL, 0.143),
        (EXAMPLES[1], 0.222),
        (EXAMPLES[2], 0.25),
        (EXAMPLES[3], 0.0),
        (EXAMPLES[4], 0.667),
    ];
    let mut worst = Duration::ZERO;
    let mut bad = Vec::new();
    for ((t, c), want) in cases {
        let (got, dt) = best_time(|| rouge_l(t, c));
        worst = worst.max(dt);
        if (got - want).abs() > 5e-4 {
            bad.push(format!("{want} -> {got:.4}"));
        }
    }
    let detail = format!(
        "5 pairs, tol 5e-4, slowest {:.3} ms (budget 1 ms)",
        worst.as_secs_f64() * 1e3
    );
    if !bad.is_empty() {
        return Fail(format!("{detail}; off: {}", bad.join(", ")));
    }
    check(worst < Duration::from_millis(1), detail)
}

fn c2_bleu_golden() -> Outcome {
    let (got, dt) = best_time(|| sentence_bleu(SAFE_ARRIVAL.0, SAFE_ARRIVAL.1));
    let same = sentence_bleu(SAFE_ARRIVAL.0, SAFE_ARRIVAL.0);
    check(
        (got - 6.57).abs() <= 0.01 && same == 100.0 && dt < Duration::from_millis(1),
        format!(
            "bleu {got:.4} (6.57 +- 0.01), identical {same}, {:.3} ms (budget 1 ms)",
            dt.as_secs_f64() * 1e3
        ),
    )
}

/// Independent bag-of-tokens oracle for the reference embedder.
fn bag_cosine(a: &str, b: &str) -> f64 {
    fn fnv(tok: &str) -> usize {
        let mut h: u64 = 14695981039346656037;
        for byte in tok.to_lowercase().bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(1099511628211);
        }
        (h % 64) as usize
    }
    let counts = |s: &str| {
        let mut c = [0.0f64; 64];
        s.split_whitespace().for_each(|t| c[fnv(t)] += 1.0);
        c
    };
    let (x, y) = (counts(a), counts(b));
    let dot: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    dot / (nx * ny)
}

fn c3_semscore_golden() -> Outcome {
    let want = [0.722, 0.423, 0.49, 0.163, 0.913];
    let start = Instant::now();
    if let Ok(endpoint) = std::env::var("EMBED_ENDPOINT") {
        let e = match HttpEmbedder::new(HttpEmbedderConfig::new(endpoint, "all-mpnet-base-v2")) {
            Ok(e) => e,
            Err(err) => return Fail(format!("provider setup: {err}")),
        };
        let mut got = Vec::new();
        for (t, c) in EXAMPLES {
            match semscore(t, c, &e) {
                Ok(s) => got.push(s.value),
                Err(err) => return Fail(format!("endpoint error: {err}")),
            }
        }
        let ok = got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 0.01);
        let shown: Vec<String> = got.iter().map(|g| format!("{g:.3}")).collect();
        return check(
            ok,
            format!(
                "all-mpnet-base-v2: [{}], tol 0.01, {:.2} s",
                shown.join(", "),
                start.elapsed().as_secs_f64()
            ),
        );
    }
    let e = HashEmbedder::new();
    let mut worst = 0.0f64;
    for (t, c) in EXAMPLES {
        let got = match semscore(t, c, &e) {
            Ok(s) => s.value,
            Err(err) => return Fail(err.to_string()),
        };
        worst = worst.max((got - bag_cosine(t, c)).abs());
    }
    if worst > 1e-12 {
        return Fail(format!(
            "reference embedder vs bag-of-tokens oracle: max diff {worst:e}"
        ));
    }
    Skip(format!(
        "reference embedder matches bag-of-tokens oracle (max diff {worst:.1e}); \
         all-mpnet goldens need EMBED_ENDPOINT"
    ))
}

fn tau_brute(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (x[i] - x[j], y[i] - y[j]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            if a == 0.0 {
                tx += 1;
            } else if b == 0.0 {
                ty += 1;
            } else if (a > 0.0) == (b > 0.0) {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    let denom = (((c + d + tx) * (c + d + ty)) as f64).sqrt();
    (denom > 0.0).then(|| (c - d) as f64 / denom)
}

fn grid(len: usize) -> Vec<Vec<f64>> {
    (0..3usize.pow(len as u32))
        .map(|mut k| {
            (0..len)
                .map(|_| {
                    let v = (k % 3 + 1) as f64;
                    k /= 3;
                    v
                })
                .collect()
        })
        .collect()
}

fn c4_kendall_exhaustive() -> Outcome {
    let start = Instant::now();
    let (mut cases, mut mismatches) = (0usize, 0usize);
    for len in 2..=6 {
        let seqs = grid(len);
        for x in &seqs {
            for y in &seqs {
                cases += 1;
                let ok = match (kendall_tau_b(x, y), tau_brute(x, y)) {
                    (Ok(a), Some(b)) => (a - b).abs() <= 1e-12,
                    (Err(_), None) => true,
                    _ => false,
                };
                mismatches += usize::from(!ok);
            }
        }
    }
    let dt = start.elapsed();
    check(
        mismatches == 0 && dt < Duration::from_secs(10),
        format!(
            "{cases} pairs, {mismatches} mismatches, tol 1e-12, {:.2} s (budget 10 s)",
            dt.as_secs_f64()
        ),
    )
}

fn c5_pearson() -> Outcome {
    let hand = pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap_or(f64::NAN);
    let mut rng = StdRng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(3..30);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mut a = rng.random_range(0.1..5.0);
        if rng.random_bool(0.5) {
            a = -a;
        }
        let b = rng.random_range(-100.0..100.0);
        let y2: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let (Ok(r1), Ok(r2)) = (pearson_r(&x, &y), pearson_r(&x, &y2)) else {
            return Fail("pearson_r errored on random data".into());
        };
        worst = worst.max((r1 * a.signum() - r2).abs());
    }
    check(
        (hand - 0.982).abs() <= 1e-3 && worst <= 1e-9,
        format!("hand case {hand:.4} (0.982 +- 0.001), affine drift {worst:.1e} over 1000 vectors (tol 1e-9)"),
    )
}

fn c6_kappa() -> Outcome {
    use Grade::*;
    let perfect = cohen_kappa(&[A, B, C, D, A], &[A, B, C, D, A]);
    let half = cohen_kappa(&[A, A, B, B], &[A, B, B, B]);
    check(
        perfect.as_ref().ok() == Some(&1.0) && half.as_ref().ok() == Some(&0.5),
        format!("perfect {perfect:?}, 4-item case {half:?} (exact)"),
    )
}

/// A random strictly increasing map on [1, 13].
fn monotone(rng: &mut StdRng) -> Box<dyn Fn(f64) -> f64> {
    let a = rng.random_range(-50.0..50.0);
    let b = rng.random_range(0.01..20.0);
    match rng.random_range(0..5) {
        0 => Box::new(move |x| a + b * x),
        1 => Box::new(move |x| a + (x * b / 13.0).exp()),
        2 => Box::new(move |x| a + b * x * x * x),
        3 => Box::new(move |x| (x + b).ln()),
        _ => Box::new(move |x| a - b / x),
    }
}

fn c7_ranking_invariance() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let models: Vec<String> = (0..12).map(|i| format!("model-{i:02}")).collect();
    let no_exclusions = BTreeMap::new();
    let mut failures = 0;
    for _ in 0..1000 {
        let mut base: Vec<f64> = (1..=12)
            .map(|v| v as f64 + rng.random_range(0.0..0.5))
            .collect();
        base.shuffle(&mut rng);
        let mut human: Vec<f64> = (1..=12).map(f64::from).collect();
        human.shuffle(&mut rng);
        let human: BTreeMap<String, f64> = models.iter().cloned().zip(human).collect();
        let dir = if rng.random_bool(0.5) {
            Direction::HigherBetter
        } else {
            Direction::LowerBetter
        };
        let f = monotone(&mut rng);

        let run = |vals: &[f64]| {
            let mut m = ScoreMatrix::new();
            m.declare("metric", dir).expect("fresh matrix");
            for (model, v) in models.iter().zip(vals) {
                m.insert("metric", model, "r1", *v);
            }
            let means = mean_score_per_model(&m, "metric").expect("scored");
            let ranking = rank_models("metric", &means.means, dir);
            let keys: Vec<(String, usize, bool)> = ranking
                .entries
                .into_iter()
                .map(|e| (e.model_id, e.rank, e.tied))
                .collect();
            let rep = correlation_report(&human, &m, &no_exclusions).expect("12 models");
            (keys, rep.rows[0].reported_tau.to_bits())
        };
        let mapped: Vec<f64> = base.iter().map(|&x| f(x)).collect();
        if run(&base) != run(&mapped) {
            failures += 1;
        }
    }
    check(
        failures == 0,
        format!("1000 transforms of 12-model matrices, {failures} differing (bit-exact)"),
    )
}

fn embed_stub() -> Stub {
    Stub::start(|req| {
        let v: serde_json::Value = serde_json::from_str(&req.body).unwrap_or_default();
        let texts: Vec<&str> = v["texts"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|t| t.as_str())
            .collect();
        let vec_of = |w: &str| {
            let b = w.as_bytes();
            [
                b.len() as f64,
                f64::from(b[0]),
                f64::from(b[b.len() - 1]),
                1.0,
            ]
        };
        if v["level"] == "token" {
            let tv: Vec<Vec<[f64; 4]>> = texts
                .iter()
                .map(|t| t.split_whitespace().map(vec_of).collect())
                .collect();
            return (
                200,
                serde_json::json!({"dim": 4, "token_vectors": tv}).to_string(),
            );
        }
        let vs: Vec<[f64; 4]> = texts
            .iter()
            .map(|t| {
                t.split_whitespace()
                    .map(vec_of)
                    .fold([0.0; 4], |mut acc, x| {
                        acc.iter_mut().zip(x).for_each(|(a, b)| *a += b * 3.7);
                        acc
                    })
            })
            .collect();
        (
            200,
            serde_json::json!({"dim": 4, "vectors": vs}).to_string(),
        )
    })
}

fn c8_embedding_invariants() -> Outcome {
    let stub = embed_stub();
    let mut cfg = HttpEmbedderConfig::new(&stub.url, "stub");
    cfg.dimension = 4;
    let http: Arc<dyn EmbeddingProvider> = match HttpEmbedder::new(cfg) {
        Ok(e) => Arc::new(e),
        Err(err) => return Fail(err.to_string()),
    };
    let hash: Arc<dyn EmbeddingProvider> = Arc::new(HashEmbedder::new());
    let mut providers: Vec<(String, Arc<dyn EmbeddingProvider>)> = vec![
        ("reference".into(), hash.clone()),
        ("http".into(), http.clone()),
    ];
    for inner in [hash, http] {
        for mode in [PoolingMode::Mean, PoolingMode::Cls] {
            let p = PooledProvider::new(inner.clone(), mode).expect("token-capable provider");
            providers.push((format!("{}+{mode}", inner.name()), Arc::new(p)));
        }
    }
    let mut texts: Vec<&str> = EXAMPLES.iter().flat_map(|(t, c)| [*t, *c]).collect();
    texts.extend([SAFE_ARRIVAL.0, SAFE_ARRIVAL.1, "x", "Äpfel und Birnen"]);

    let mut worst = 0.0f64;
    for (name, p) in &providers {
        let vs = match p.embed_sentences(&texts) {
            Ok(v) => v,
            Err(err) => return Fail(format!("{name}: {err}")),
        };
        for (v, t) in vs.iter().zip(&texts) {
            let sem = semscore(t, t, p.as_ref()).map(|s| s.value);
            let bert = bertscore_f1(t, t, p.as_ref()).map(|s| s.value);
            let (Ok(sem), Ok(bert)) = (sem, bert) else {
                return Fail(format!("{name}: scoring {t:?} failed"));
            };
            worst = worst
                .max((v.norm() - 1.0).abs())
                .max((sem - 1.0).abs())
                .max((bert - 1.0).abs());
        }
    }
    check(
        worst <= 1e-6,
        format!(
            "{} providers x {} texts, max deviation {worst:.1e} (tol 1e-6)",
            providers.len(),
            texts.len()
        ),
    )
}

fn pipeline_run(
    out: &Path,
    judge_url: &str,
    jobs: &str,
) -> Result<(BTreeMap<String, Vec<u8>>, Duration), String> {
    let (rec, resp, rat) = (
        fixture("records.jsonl"),
        fixture("responses.jsonl"),
        fixture("ratings.jsonl"),
    );
    let p = |x: &Path| x.to_str().expect("utf-8 path").to_string();
    let start = Instant::now();
    let score: Vec<String> = [
        "semscore",
        "score",
        "--records",
        &p(&rec),
        "--responses",
        &p(&resp),
        "--provider",
        "reference",
        "--metrics",
        "rouge_l,bleu,bertscore,semscore,semscore_mean,semscore_cls,g_eval",
        "--judge-endpoint",
        judge_url,
        "--exclude-self",
        "--jobs",
        jobs,
        "--out",
        &p(out),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let report: Vec<String> = [
        "semscore",
        "report",
        "--records",
        &p(&rec),
        "--ratings",
        &p(&rat),
        "--out",
        &p(out),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for args in [score, report] {
        let cli = Cli::try_parse_from(&args).map_err(|e| e.to_string())?;
        run(&cli).map_err(|e| e.to_string())?;
    }
    let elapsed = start.elapsed();

    let mut files = BTreeMap::new();
    let scores = out.join("scores");
    let entries = std::fs::read_dir(&scores).map_err(|e| e.to_string())?;
    let mut names: BTreeSet<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.retain(|n| !n.ends_with(".tmp"));
    for n in names {
        files.insert(
            format!("scores/{n}"),
            std::fs::read(scores.join(&n)).map_err(|e| e.to_string())?,
        );
    }
    for n in ["report.txt", "grade_distribution.tsv"] {
        files.insert(
            n.to_string(),
            std::fs::read(out.join(n)).map_err(|e| format!("{n}: {e}"))?,
        );
    }
    Ok((files, elapsed))
}

fn c9_pipeline_determinism() -> Outcome {
    let stub = Stub::start(|req| chat_reply(&req.body));
    let url = format!("{}/v1", stub.url);
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Fail(e.to_string()),
    };
    let mut runs = Vec::new();
    for (i, jobs) in ["4", "4", "1", "8"].iter().enumerate() {
        match pipeline_run(&dir.path().join(format!("run{i}")), &url, jobs) {
            Ok(r) => runs.push((jobs, r)),
            Err(e) => return Fail(format!("run {i} (--jobs {jobs}): {e}")),
        }
    }
    let (_, (reference, _)) = &runs[0];
    let mut diffs = Vec::new();
    for (i, (jobs, (files, _))) in runs.iter().enumerate().skip(1) {
        let keys: BTreeSet<&String> = reference.keys().chain(files.keys()).collect();
        for k in keys {
            if reference.get(k) != files.get(k) {
                diffs.push(format!("run {i} (--jobs {jobs}) {k}"));
            }
        }
    }
    let slowest = runs.iter().map(|(_, (_, t))| *t).max().unwrap_or_default();
    let detail = format!(
        "4 runs (jobs 4, 4, 1, 8), {} files compared, slowest {:.2} s (budget 5 s)",
        reference.len(),
        slowest.as_secs_f64()
    );
    if !diffs.is_empty() {
        return Fail(format!("{detail}; differing: {}", diffs.join(", ")));
    }
    check(
        slowest < Duration::from_secs(5) && reference.len() >= 10,
        detail,
    )
}

fn c10_study_reproduction() -> Outcome {
    let (Ok(data), Ok(endpoint)) = (
        std::env::var("SEMSCORE_STUDY_DATA"),
        std::env::var("EMBED_ENDPOINT"),
    ) else {
        return Skip(
            "needs the released responses and human scores (SEMSCORE_STUDY_DATA) and an \
             all-mpnet-base-v2 service (EMBED_ENDPOINT)"
                .into(),
        );
    };
    match reproduce(Path::new(&data), &endpoint) {
        Ok(o) => o,
        Err(e) => Fail(e),
    }
}

fn reproduce(data: &Path, endpoint: &str) -> Result<Outcome, String> {
    let dataset = load_records(&data.join("records.jsonl")).map_err(|e| e.to_string())?;
    let responses = load_responses(&data.join("responses.jsonl")).map_err(|e| e.to_string())?;
    let universe = Universe::from_responses(&dataset, &responses);
    let human = load_external_scores(
        &data.join("human.tsv"),
        HUMAN_METRIC,
        Direction::LowerBetter,
        &universe,
    )
    .map_err(|e| e.to_string())?;
    let human_means = mean_score_per_model(&human, HUMAN_METRIC)
        .map_err(|e| e.to_string())?
        .means;

    let embedder = HttpEmbedder::new(HttpEmbedderConfig::new(endpoint, "all-mpnet-base-v2"))
        .map_err(|e| e.to_string())?;
    let index = dataset.index();
    let mut m = ScoreMatrix::new();
    for metric in ["semscore", "rouge_l", "bleu"] {
        m.declare(metric, Direction::HigherBetter)
            .map_err(|e| e.to_string())?;
    }
    for r in &responses {
        let Some(rec) = index.get(r.record_id.as_str()) else {
            continue;
        };
        let (t, c) = (rec.target_response.as_str(), r.response_text.as_str());
        let sem = semscore(t, c, &embedder).map_err(|e| e.to_string())?;
        m.insert("semscore", &r.model_id, &r.record_id, sem.value);
        m.insert("rouge_l", &r.model_id, &r.record_id, rouge_l(t, c));
        m.insert("bleu", &r.model_id, &r.record_id, sentence_bleu(t, c));
    }
    let rep = correlation_report(&human_means, &m, &BTreeMap::new()).map_err(|e| e.to_string())?;
    let want = [
        ("semscore", 0.879, 0.970),
        ("rouge_l", 0.788, 0.933),
        ("bleu", 0.667, 0.865),
    ];
    let mut ok = true;
    let mut shown = Vec::new();
    for (metric, tau, r) in want {
        let row = rep
            .get(metric)
            .ok_or(format!("no correlation row for {metric}"))?;
        ok &= (row.reported_tau - tau).abs() <= 0.01 && (row.reported_r - r).abs() <= 0.01;
        shown.push(format!(
            "{metric} {:.3}/{:.3} (want {tau}/{r})",
            row.reported_tau, row.reported_r
        ));
    }
    Ok(check(ok, format!("{}, tol 0.01", shown.join(", "))))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("rouge-l golden values", c1_rouge_golden),
        ("bleu golden values", c2_bleu_golden),
        ("semscore golden values", c3_semscore_golden),
        ("kendall tau-b vs brute force", c4_kendall_exhaustive),
        ("pearson r", c5_pearson),
        ("cohen kappa", c6_kappa),
        (
            "ranking invariance under monotone maps",
            c7_ranking_invariance,
        ),
        ("embedding invariants", c8_embedding_invariants),
        ("pipeline determinism", c9_pipeline_determinism),
        ("published correlations reproduced", c10_study_reproduction),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (tag, detail) = match f() {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("{tag} {:>2} {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
