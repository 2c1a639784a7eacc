//! ROUGE-L and BLEU, tokenized the way the reference tools tokenize.
//!
//! ROUGE-L follows Google's `rouge_score` defaults: lowercase, every character
//! outside `[a-z0-9]` becomes a separator, no stemming. BLEU follows
//! `sacrebleu`'s `sentence_bleu`: 13a tokenization, case preserved, exponential
//! smoothing of zero-count orders and effective order for short hypotheses.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NgramError {
    #[error("cannot average an empty score list")]
    EmptyScores,
}

/// Whitespace-free tokens of one text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence {
            tokens: iter.into_iter().map(Into::into).collect(),
        }
    }
}

pub fn rouge_tokenize(text: &str) -> TokenSequence {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in lowered.chars() {
        if c.is_ascii_lowercase() || c.is_ascii_digit() {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    TokenSequence { tokens }
}

pub fn lcs_length(a: &TokenSequence, b: &TokenSequence) -> usize {
    let (a, b) = (&a.tokens, &b.tokens);
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Precision, recall and F-measure of one ROUGE-L comparison.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub fmeasure: f64,
}

pub fn rouge_l_detailed(target: &str, candidate: &str) -> RougeScore {
    let t = rouge_tokenize(target);
    let c = rouge_tokenize(candidate);
    if t.is_empty() || c.is_empty() {
        return RougeScore::default();
    }
    let lcs = lcs_length(&t, &c);
    if lcs == 0 {
        return RougeScore::default();
    }
    let precision = lcs as f64 / c.len() as f64;
    let recall = lcs as f64 / t.len() as f64;
    RougeScore {
        precision,
        recall,
        fmeasure: 2.0 * precision * recall / (precision + recall),
    }
}

/// ROUGE-L F-measure in `[0, 1]`.
pub fn rouge_l(target: &str, candidate: &str) -> f64 {
    rouge_l_detailed(target, candidate).fmeasure
}

// mteval-v13a rules as applied by sacrebleu, in order.
static RULES_13A: LazyLock<[(Regex, &'static str); 4]> = LazyLock::new(|| {
    [
        // symbols and most punctuation, but not period, comma, hyphen or apostrophe
        (Regex::new(r"([{-~\[-` -&(-+:-@/])").unwrap(), " ${1} "),
        // period and comma unless preceded by a digit
        (Regex::new(r"([^0-9])([.,])").unwrap(), "${1} ${2} "),
        // period and comma unless followed by a digit
        (Regex::new(r"([.,])([^0-9])").unwrap(), " ${1} ${2}"),
        // dash preceded by a digit
        (Regex::new(r"([0-9])(-)").unwrap(), "${1} ${2} "),
    ]
});

pub fn tokenize_13a(text: &str) -> TokenSequence {
    let mut line = text
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let mut line = format!(" {line} ");
    for (re, rep) in RULES_13A.iter() {
        line = re.replace_all(&line, *rep).into_owned();
    }
    line.split_whitespace().collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sufficient statistics of BLEU; sums across sentences give corpus BLEU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub correct: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn from_tokens(target: &TokenSequence, candidate: &TokenSequence) -> Self {
        let mut s = BleuStats {
            hyp_len: candidate.len(),
            ref_len: target.len(),
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            let hyp = ngram_counts(&candidate.tokens, n);
            let refs = ngram_counts(&target.tokens, n);
            s.totals[n - 1] = candidate.len().saturating_sub(n - 1);
            s.correct[n - 1] = hyp
                .iter()
                .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
                .sum();
        }
        s
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_ORDER {
            self.correct[n] += other.correct[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// BLEU in `[0, 100]` with exponential smoothing.
    ///
    /// A hypothesis without a single matching n-gram scores 0 outright.
    ///
    /// With `effective_order`, orders the hypothesis is too short to contain
    /// are left out of the geometric mean instead of zeroing the score.
    pub fn score(&self, effective_order: bool) -> f64 {
        if self.hyp_len == 0 || self.correct.iter().all(|&c| c == 0) {
            return 0.0;
        }
        let mut precisions = [0.0f64; MAX_ORDER];
        let mut smooth = 1.0f64;
        let mut order = MAX_ORDER;
        #[allow(clippy::needless_range_loop)] // walks three parallel arrays
        for n in 0..MAX_ORDER {
            if self.totals[n] == 0 {
                break;
            }
            if effective_order {
                order = n + 1;
            }
            if self.correct[n] == 0 {
                smooth *= 2.0;
                precisions[n] = 100.0 / (smooth * self.totals[n] as f64);
            } else {
                precisions[n] = 100.0 * self.correct[n] as f64 / self.totals[n] as f64;
            }
        }
        let bp = if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        let used = &precisions[..order];
        if used.contains(&0.0) {
            return 0.0;
        }
        let log_sum: f64 = used.iter().map(|p| p.ln()).sum();
        (bp * (log_sum / order as f64).exp()).clamp(0.0, 100.0)
    }
}

// sacrebleu strips trailing whitespace before tokenizing, which matters for "-\n".
fn bleu_tokens(text: &str) -> TokenSequence {
    tokenize_13a(text.trim_end())
}

/// Single-reference sentence BLEU in `[0, 100]`.
pub fn sentence_bleu(target: &str, candidate: &str) -> f64 {
    BleuStats::from_tokens(&bleu_tokens(target), &bleu_tokens(candidate)).score(true)
}

/// BLEU over pooled statistics of all (target, candidate) pairs.
pub fn corpus_bleu<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> f64 {
    let mut total = BleuStats::default();
    for (t, c) in pairs {
        total.add(&BleuStats::from_tokens(&bleu_tokens(t), &bleu_tokens(c)));
    }
    total.score(false)
}

pub fn mean_metric(scores: &[f64]) -> Result<f64, NgramError> {
    if scores.is_empty() {
        return Err(NgramError::EmptyScores);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
