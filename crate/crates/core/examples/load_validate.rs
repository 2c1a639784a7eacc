//! Load the bundled fixture and check that records, responses and ratings join.

use std::path::Path;

use semscore::corpus::{load_ratings, load_records, load_responses, validate_join};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dataset = load_records(&dir.join("records.jsonl")).unwrap();
    let mut responses = load_responses(&dir.join("responses.jsonl")).unwrap();
    let ratings = load_ratings(&dir.join("ratings.jsonl")).unwrap();
    println!(
        "{} records, {} responses, {} ratings",
        dataset.len(),
        responses.len(),
        ratings.len()
    );
    println!(
        "clean join: {}",
        validate_join(&dataset, &responses, &ratings).is_empty()
    );

    // drop one response: the join now reports the gap and the rating left without a response
    let gone = responses.remove(3);
    let report = validate_join(&dataset, &responses, &ratings);
    println!("after removing {}/{}:", gone.model_id, gone.record_id);
    for issue in &report.issues {
        println!("  {} {} {}", issue.kind, issue.model_id, issue.record_id);
    }
}
