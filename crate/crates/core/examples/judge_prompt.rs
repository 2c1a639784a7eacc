//! Render the judge prompt for one pair and parse a few replies.
//!
//! With `JUDGE_ENDPOINT` set (an OpenAI-style base URL, key in `LLM_API_KEY`)
//! the pair is also sent to the judge.

use std::sync::Arc;
use std::time::Duration;

use semscore::corpus::{EvalRecord, ModelResponse};
use semscore::judge::{parse_score, HttpChatEndpoint, Judge, JudgeConfig, JudgePrompt};

fn main() {
    let record = EvalRecord {
        record_id: "genres".into(),
        task_group: "classification".into(),
        instruction: "In what genres does the given movie or series fall?".into(),
        instance_input: Some("Manifest".into()),
        target_response: "Mystery, Sci-Fi, Drama".into(),
    };
    let response = ModelResponse {
        model_id: "alpaca-7b".into(),
        record_id: "genres".into(),
        response_text: "Drama, Mystery, Sci-Fi, Thriller".into(),
    };
    let prompt = JudgePrompt::for_pair(&record, &response).unwrap();
    println!("{}\n", prompt.rendered_text);

    for reply in [
        "- Quality: 2",
        "Quality: 1\nThe answer is fine.",
        "3",
        "Quality: excellent",
        "Quality: 7",
    ] {
        println!("{reply:?} -> {:?}", parse_score(reply));
    }

    if let Ok(url) = std::env::var("JUDGE_ENDPOINT") {
        let endpoint = HttpChatEndpoint::new(&url, Duration::from_secs(60)).expect("client");
        let judge = Judge::new(Arc::new(endpoint), JudgeConfig::new("gpt-4"));
        match judge.judge(&record, &response) {
            Ok(v) => println!("judge says {} ({:?})", v.score, v.raw_reply),
            Err(e) => eprintln!("{e}"),
        }
    }
}
