//! Greedy-matching BERTScore over token vectors.

use semscore::embedding::{bertscore_prf, HashEmbedder};

fn main() {
    let provider = HashEmbedder::new();
    let cases = [
        ("the cat sat on the mat", "the cat sat on the mat"),
        ("the cat sat on the mat", "a cat was sitting on a mat"),
        ("the cat sat on the mat", "quarterly revenue grew"),
    ];
    for (t, c) in cases {
        let b = bertscore_prf(t, c, &provider).unwrap();
        println!(
            "P={:.3} R={:.3} F1={:.3}  {c:?}",
            b.precision, b.recall, b.f1
        );
    }
}
