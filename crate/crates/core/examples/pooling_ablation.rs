//! Sentence embeddings from mean and first-token pooling over the same token vectors.

use std::sync::Arc;

use semscore::embedding::{semscore, EmbeddingProvider, HashEmbedder, PooledProvider, PoolingMode};

fn main() {
    let base: Arc<dyn EmbeddingProvider> = Arc::new(HashEmbedder::new());
    let pairs = [
        (
            "Looking for collaborators on a new project",
            "Calling all innovators to join our project",
        ),
        ("verb", "school will keep through the winter"),
    ];
    for mode in [PoolingMode::Mean, PoolingMode::Cls] {
        let p = PooledProvider::new(base.clone(), mode).unwrap();
        for (t, c) in pairs {
            let s = semscore(t, c, &p).unwrap();
            println!("{:<5} {:.4}  {t:?} / {c:?}", mode.to_string(), s.value);
        }
    }
    let s = semscore(pairs[0].0, pairs[0].1, base.as_ref()).unwrap();
    println!("whole {:.4}  (sentence-level provider)", s.value);
}
