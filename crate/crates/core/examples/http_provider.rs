//! SemScore against an `/embed` service.
//!
//! Start one with `python scripts/embed_server.py` and run
//! `EMBED_ENDPOINT=http://127.0.0.1:8000 cargo run --example http_provider`.

use semscore::embedding::{
    semscore, Embedder, EmbeddingProvider, HttpEmbedder, HttpEmbedderConfig,
};
use std::sync::Arc;

fn main() {
    let Ok(endpoint) = std::env::var("EMBED_ENDPOINT") else {
        eprintln!("set EMBED_ENDPOINT to an /embed service");
        std::process::exit(2);
    };
    let http =
        HttpEmbedder::new(HttpEmbedderConfig::new(endpoint, "all-mpnet-base-v2")).expect("client");
    let embedder = Embedder::new(Arc::new(http));

    let texts = [
        "haart, heard, hears, heart, hoard, hoary",
        "HARD, HARSH, HEART",
    ];
    let batch = embedder
        .embed_batch(&texts)
        .expect("embedding service reachable");
    println!(
        "{} vectors of dim {}",
        batch.vectors.len(),
        embedder.provider().dimension()
    );

    match semscore(texts[0], texts[1], &embedder) {
        Ok(s) => println!("semscore {:.3}", s.value),
        Err(e) => eprintln!("{e}"),
    }
}
