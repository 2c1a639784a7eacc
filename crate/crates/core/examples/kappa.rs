//! Agreement between two annotators on the pairs both rated.

use semscore::analysis::{cohen_kappa, paired_grades};
use semscore::corpus::{Grade, HumanRating};

fn main() {
    use Grade::*;
    let first = [A, A, B, C, D, B, A, C];
    let second = [A, B, B, C, D, C, A, C];
    let mut ratings = Vec::new();
    for (i, (a, b)) in first.iter().zip(&second).enumerate() {
        for (annotator, grade) in [("ann1", *a), ("ann2", *b)] {
            ratings.push(HumanRating {
                model_id: "m".into(),
                record_id: format!("r{i}"),
                annotator_id: annotator.into(),
                grade,
            });
        }
    }
    let (x, y) = paired_grades(&ratings, "ann1", "ann2");
    println!(
        "{} shared items, kappa {:.3}",
        x.len(),
        cohen_kappa(&x, &y).unwrap()
    );
    println!(
        "textbook case: {}",
        cohen_kappa(&[A, A, B, B], &[A, B, B, B]).unwrap()
    );
}
