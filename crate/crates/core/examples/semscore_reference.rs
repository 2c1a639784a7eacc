//! SemScore with the offline hashed bag-of-tokens embedder.

use semscore::embedding::{semscore, HashEmbedder};

fn main() {
    let provider = HashEmbedder::new();
    let target = "Mystery, Sci-Fi, Drama";
    for candidate in [
        "Drama, Mystery, Sci-Fi, Thriller",
        "Mystery Sci-Fi Drama",
        "",
        "a cooking show",
    ] {
        let s = semscore(target, candidate, &provider).expect("reference embedder never fails");
        println!(
            "{:>8.4}  {:?}{}",
            s.value,
            candidate,
            s.flag.map(|f| format!("  [{f:?}]")).unwrap_or_default()
        );
    }
}
