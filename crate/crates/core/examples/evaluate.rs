//! P/R/F1@N with exact and Porter-stemmed matching, the strict-at-N variant
//! and F1@3 by gold phrase length.

use jkpe::corpus::{normalize_phrase, Document};
use jkpe::eval::{evaluate, porter_stem, EvalOptions, MatchMode};
use jkpe::infer::{PredictionRecord, ScoredPhrase};

fn record(id: &str, phrases: &[&str]) -> PredictionRecord {
    PredictionRecord {
        id: id.into(),
        predictions: phrases
            .iter()
            .enumerate()
            .map(|(i, p)| ScoredPhrase {
                rank: i + 1,
                phrase: p.to_string(),
                score: -(i as f64),
            })
            .collect(),
    }
}

fn main() -> jkpe::Result<()> {
    let golds = [
        Document::new(
            "d1",
            normalize_phrase("neural networks for keyphrase extraction"),
            vec![normalize_phrase("neural network"), normalize_phrase("keyphrase extraction")],
        ),
        Document::new(
            "d2",
            normalize_phrase("ranking with pairwise hinge losses"),
            vec![normalize_phrase("pairwise hinge loss")],
        ),
    ];
    let preds = [
        record("d1", &["neural networks", "keyphrase extraction", "networks"]),
        record("d2", &["ranking"]),
    ];
    println!("stem(networks) = {}, stem(losses) = {}", porter_stem("networks"), porter_stem("losses"));
    for (mode, strict) in [(MatchMode::Exact, false), (MatchMode::Stemmed, false), (MatchMode::Stemmed, true)] {
        let report = evaluate(&preds, &golds, &[1, 3, 5], EvalOptions { mode, strict_at_n: strict })?;
        println!("{}", report.to_table());
    }
    Ok(())
}
