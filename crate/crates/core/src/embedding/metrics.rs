use serde::{Deserialize, Serialize};

use super::{cosine, EmbeddingError, EmbeddingProvider, EmbeddingVector, Result, TokenEmbeddings};

/// Why a score was assigned without comparing embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFlag {
    EmptyCandidate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub value: f64,
    pub flag: Option<ScoreFlag>,
}

impl Similarity {
    fn plain(value: f64) -> Self {
        Similarity { value, flag: None }
    }
}

fn require_sentence(provider: &dyn EmbeddingProvider) -> Result<()> {
    if provider.capabilities().sentence_embedding {
        Ok(())
    } else {
        Err(EmbeddingError::Unsupported {
            provider: provider.name().to_string(),
            capability: "sentence embeddings",
        })
    }
}

fn require_tokens(provider: &dyn EmbeddingProvider) -> Result<()> {
    if provider.capabilities().token_embeddings {
        Ok(())
    } else {
        Err(EmbeddingError::Unsupported {
            provider: provider.name().to_string(),
            capability: "token embeddings",
        })
    }
}

/// Cosine similarity of the candidate's and target's sentence embeddings.
///
/// Each text is embedded on its own. A candidate without content scores -1
/// and carries [`ScoreFlag::EmptyCandidate`]; an empty target is an error.
pub fn semscore(
    target: &str,
    candidate: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<Similarity> {
    require_sentence(provider)?;
    if target.trim().is_empty() {
        return Err(EmbeddingError::EmptyTokens.for_text("target"));
    }
    if candidate.trim().is_empty() {
        return Ok(Similarity {
            value: -1.0,
            flag: Some(ScoreFlag::EmptyCandidate),
        });
    }
    let mut v = provider.embed_sentences(&[candidate, target])?;
    if v.len() != 2 {
        return Err(EmbeddingError::BadResponse(format!(
            "expected 2 vectors, got {}",
            v.len()
        )));
    }
    let t: EmbeddingVector = v.pop().unwrap();
    let c: EmbeddingVector = v.pop().unwrap();
    if t.is_zero() {
        return Err(EmbeddingError::ZeroNorm.for_text("target"));
    }
    if c.is_zero() {
        return Ok(Similarity {
            value: -1.0,
            flag: Some(ScoreFlag::EmptyCandidate),
        });
    }
    Ok(Similarity::plain(cosine(&c, &t)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flag: Option<ScoreFlag>,
}

fn greedy_mean(
    from: &TokenEmbeddings,
    to: &TokenEmbeddings,
    table: &[Vec<f64>],
    rows_are_from: bool,
) -> f64 {
    let n = from.len();
    let sum: f64 = (0..n)
        .map(|i| {
            (0..to.len())
                .map(|j| {
                    if rows_are_from {
                        table[i][j]
                    } else {
                        table[j][i]
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    sum / n as f64
}

/// Greedy-matching BERTScore without IDF weighting or baseline rescaling.
pub fn bertscore_prf(
    target: &str,
    candidate: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<BertScore> {
    require_tokens(provider)?;
    let mut v = provider.embed_tokens(&[candidate, target])?;
    if v.len() != 2 {
        return Err(EmbeddingError::BadResponse(format!(
            "expected 2 token lists, got {}",
            v.len()
        )));
    }
    let t = v.pop().unwrap();
    let c = v.pop().unwrap();
    if t.is_empty() {
        return Err(EmbeddingError::EmptyTokens.for_text("target"));
    }
    if c.is_empty() {
        return Ok(BertScore {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            flag: Some(ScoreFlag::EmptyCandidate),
        });
    }
    // table[i][j] = cos(candidate token i, target token j)
    let table = c
        .iter()
        .map(|ci| {
            t.iter()
                .map(|tj| cosine(ci, tj))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let precision = greedy_mean(&c, &t, &table, true);
    let recall = greedy_mean(&t, &c, &table, false);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(BertScore {
        precision,
        recall,
        f1,
        flag: None,
    })
}

pub fn bertscore_f1(
    target: &str,
    candidate: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<Similarity> {
    let s = bertscore_prf(target, candidate, provider)?;
    Ok(Similarity {
        value: s.f1,
        flag: s.flag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{Capabilities, HashEmbedder, REFERENCE_DIM};
    use proptest::prelude::*;
    use std::collections::HashMap;

    /// Token vectors looked up from a fixed table, one token per whitespace word.
    struct TableProvider(HashMap<&'static str, Vec<f64>>);

    impl EmbeddingProvider for TableProvider {
        fn name(&self) -> &str {
            "table"
        }
        fn dimension(&self) -> usize {
            2
        }
        fn max_tokens(&self) -> usize {
            100
        }
        fn capabilities(&self) -> Capabilities {
            Capabilities {
                sentence_embedding: false,
                token_embeddings: true,
            }
        }
        fn embed_sentences(&self, _: &[&str]) -> Result<Vec<EmbeddingVector>> {
            unreachable!()
        }
        fn embed_tokens(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddings>> {
            Ok(texts
                .iter()
                .map(|t| {
                    TokenEmbeddings(
                        t.split_whitespace()
                            .map(|w| EmbeddingVector(self.0[w].clone()))
                            .collect(),
                    )
                })
                .collect())
        }
    }

    #[test]
    fn semscore_identity_and_empty() {
        let p = HashEmbedder::new();
        let s = semscore("Drama, Mystery", "Drama, Mystery", &p).unwrap();
        assert!((s.value - 1.0).abs() < 1e-6);
        let e = semscore("target", "   ", &p).unwrap();
        assert_eq!(e.value, -1.0);
        assert_eq!(e.flag, Some(ScoreFlag::EmptyCandidate));
        assert!(semscore("", "x", &p).is_err());
    }

    #[test]
    fn semscore_requires_sentence_capability() {
        let p = TableProvider(HashMap::new());
        assert!(matches!(
            semscore("a", "b", &p),
            Err(EmbeddingError::Unsupported { .. })
        ));
    }

    #[test]
    fn bertscore_identity_and_orthogonal() {
        let p = HashEmbedder::new();
        let s = bertscore_f1("a b c", "a b c", &p).unwrap();
        assert!((s.value - 1.0).abs() < 1e-6);
        let table = TableProvider(HashMap::from([
            ("x", vec![1.0, 0.0]),
            ("y", vec![0.0, 1.0]),
        ]));
        assert_eq!(bertscore_f1("x x", "y", &table).unwrap().value, 0.0);
    }

    #[test]
    fn bertscore_two_by_three_table() {
        // candidate tokens u, v against target tokens a, b, c:
        //        a       b      c
        //   u    1       0.6   -0.8
        //   v    0       0.8    0.6
        let table = TableProvider(HashMap::from([
            ("u", vec![1.0, 0.0]),
            ("v", vec![0.0, 1.0]),
            ("a", vec![1.0, 0.0]),
            ("b", vec![0.6, 0.8]),
            ("c", vec![-0.8, 0.6]),
        ]));
        let s = bertscore_prf("a b c", "u v", &table).unwrap();
        // row maxima 1 and 0.8; column maxima 1, 0.8 and 0.6
        let p = (1.0 + 0.8) / 2.0;
        let r = (1.0 + 0.8 + 0.6) / 3.0;
        assert!((s.precision - p).abs() < 1e-12);
        assert!((s.recall - r).abs() < 1e-12);
        assert!((s.f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
    }

    #[test]
    fn bertscore_reference_embedder_two_by_three() {
        let p = HashEmbedder::new();
        let buckets: Vec<usize> = ["alpha", "beta", "gamma", "delta"]
            .iter()
            .map(|t| HashEmbedder::bucket(t))
            .collect();
        let mut uniq = buckets.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 4, "fixture tokens must not collide");
        // one-hot tokens: cosine table is 1 on equal tokens, 0 elsewhere
        let s = bertscore_prf("alpha beta gamma", "alpha delta", &p).unwrap();
        assert!((s.precision - 0.5).abs() < 1e-12);
        assert!((s.recall - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.f1 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn bertscore_empty_candidate_is_flagged_zero() {
        let s = bertscore_f1("a b", "", &HashEmbedder::new()).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.flag, Some(ScoreFlag::EmptyCandidate));
    }

    fn oracle_bag_cosine(a: &str, b: &str) -> f64 {
        // independent of the embedder: count tokens per bucket by hand
        let mut ca = [0i64; REFERENCE_DIM];
        let mut cb = [0i64; REFERENCE_DIM];
        for t in a.split_whitespace() {
            ca[HashEmbedder::bucket(t)] += 1;
        }
        for t in b.split_whitespace() {
            cb[HashEmbedder::bucket(t)] += 1;
        }
        let dot: i64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
        let na: i64 = ca.iter().map(|x| x * x).sum();
        let nb: i64 = cb.iter().map(|x| x * x).sum();
        dot as f64 / ((na as f64).sqrt() * (nb as f64).sqrt())
    }

    proptest! {
        #[test]
        fn semscore_matches_counting_oracle(a in "[a-e]{1,3}( [a-e]{1,3}){0,6}", b in "[a-e]{1,3}( [a-e]{1,3}){0,6}") {
            let p = HashEmbedder::new();
            let got = semscore(&a, &b, &p).unwrap().value;
            prop_assert!((got - oracle_bag_cosine(&a, &b)).abs() < 1e-12);
            let swapped = semscore(&b, &a, &p).unwrap().value;
            prop_assert!((got - swapped).abs() < 1e-12);
        }

        #[test]
        fn bertscore_precision_ignores_target_order(words in prop::collection::vec("[a-f]{1,2}", 1..8), seed in any::<u64>()) {
            let p = HashEmbedder::new();
            let target = words.join(" ");
            let mut shuffled = words.clone();
            shuffled.rotate_left(seed as usize % words.len());
            shuffled.reverse();
            let a = bertscore_prf(&target, "a b c", &p).unwrap();
            let b = bertscore_prf(&shuffled.join(" "), "a b c", &p).unwrap();
            prop_assert_eq!(a.precision, b.precision);
        }
    }
}
