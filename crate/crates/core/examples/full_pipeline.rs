//! `score` then `report` on the bundled fixture, as the `semscore` binary would run them.

use clap::Parser;
use semscore::cli::{run, Cli};

fn main() {
    let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let out = std::env::temp_dir().join("semscore-example");
    let out = out.to_str().unwrap();
    let records = format!("{fixtures}/records.jsonl");
    let responses = format!("{fixtures}/responses.jsonl");
    let ratings = format!("{fixtures}/ratings.jsonl");

    let steps: [Vec<&str>; 2] = [
        vec![
            "semscore",
            "score",
            "--records",
            &records,
            "--responses",
            &responses,
            "--metrics",
            "rouge_l,bleu,bertscore,semscore",
            "--out",
            out,
            "--force",
        ],
        vec![
            "semscore",
            "report",
            "--records",
            &records,
            "--ratings",
            &ratings,
            "--out",
            out,
        ],
    ];
    for args in steps {
        let cli = Cli::try_parse_from(args).expect("valid arguments");
        match run(&cli) {
            Ok(text) => print!("{text}"),
            Err(e) => {
                eprintln!("{e}");
                std::process::exit(e.exit_code().into());
            }
        }
    }
}
