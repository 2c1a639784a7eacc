//! ROUGE-L and BLEU on a pair with no shared wording.

use semscore::ngram::{corpus_bleu, rouge_l_detailed, sentence_bleu};

fn main() {
    let target = "Glad you made it safe and sound.";
    let candidate = "Thank goodness you arrived without any issues.";

    let r = rouge_l_detailed(target, candidate);
    println!(
        "rouge-l  p={:.3} r={:.3} f={:.3}",
        r.precision, r.recall, r.fmeasure
    );
    println!("bleu     {:.2}", sentence_bleu(target, candidate));
    println!("bleu     {:.2} (identical)", sentence_bleu(target, target));

    let pairs = [
        (target, candidate),
        ("Mystery, Sci-Fi, Drama", "Drama, Mystery, Sci-Fi, Thriller"),
    ];
    println!("corpus   {:.2}", corpus_bleu(pairs));
}
