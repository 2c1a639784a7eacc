//! Rank models by a metric and correlate the ranking with human grades.

use std::collections::BTreeMap;

use semscore::analysis::{
    correlation_report, human_score_matrix, mean_score_per_model, rank_models, HUMAN_METRIC,
};
use semscore::corpus::{Direction, Grade, HumanRating, ScoreMatrix};
use semscore::report::{correlation_table, ranking_table, Format};

fn main() {
    let models = [
        "alpaca-7b",
        "gpt-4",
        "llama-2-13b-chat",
        "vicuna-7b",
        "dolly-v2",
    ];
    let grades = [
        [Grade::C, Grade::D],
        [Grade::A, Grade::A],
        [Grade::A, Grade::B],
        [Grade::B, Grade::C],
        [Grade::D, Grade::D],
    ];
    let metric = [
        [0.41, 0.35],
        [0.93, 0.88],
        [0.84, 0.71],
        [0.66, 0.70],
        [0.22, 0.40],
    ];

    let mut ratings = Vec::new();
    let mut scores = ScoreMatrix::new();
    scores.declare("semscore", Direction::HigherBetter).unwrap();
    for (i, model) in models.iter().enumerate() {
        for (j, record) in ["r1", "r2"].iter().enumerate() {
            ratings.push(HumanRating {
                model_id: model.to_string(),
                record_id: record.to_string(),
                annotator_id: "ann1".into(),
                grade: grades[i][j],
            });
            scores.insert("semscore", model, record, metric[i][j]);
        }
    }

    let human = human_score_matrix(&ratings);
    let human_means = mean_score_per_model(&human, HUMAN_METRIC).unwrap().means;
    let metric_means = mean_score_per_model(&scores, "semscore").unwrap().means;
    let rankings = [
        rank_models(HUMAN_METRIC, &human_means, Direction::LowerBetter),
        rank_models("semscore", &metric_means, Direction::HigherBetter),
    ];
    print!("{}", ranking_table(&rankings).render(Format::Text));
    println!();

    let report = correlation_report(&human_means, &scores, &BTreeMap::new()).unwrap();
    print!("{}", correlation_table(&report).render(Format::Md));
}
