//! Top-N extraction from a trained checkpoint into a prediction file.
//!
//!     cargo run --release --example extract -- model.ckpt corpus.jsonl [N]
//!
//! Without arguments a model is trained on the synthetic corpus first.

use std::io::stdout;

use jkpe::corpus::{CorpusFormat, CorpusReader, Loaded};
use jkpe::infer::{extract, extract_batch, PredictionWriter, RankBy};
use jkpe::model::load_checkpoint;
use jkpe::synth::{generate, SynthConfig};
use jkpe::train::{train, Preset, TrainConfig};

fn main() -> jkpe::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let [model, corpus, rest @ ..] = args.as_slice() {
        let n = rest.first().map_or(5, |s| s.parse().expect("N is an integer"));
        let params = load_checkpoint(model)?;
        let format = CorpusFormat::detect(corpus.as_ref())?;
        let docs = CorpusReader::open(corpus, format, 512)?.filter_map(|r| match r {
            Ok(Loaded::Document(d)) => Some(Ok(d)),
            Ok(Loaded::Rejected { .. }) => None,
            Err(e) => Some(Err(e)),
        });
        let mut writer = PredictionWriter::new(stdout().lock())?;
        let summary = extract_batch(docs, &params, None, n, RankBy::Score, &mut writer)?;
        drop(writer.finish()?);
        eprintln!("{} documents, {} failed", summary.documents, summary.failed);
        return Ok(());
    }

    let corpus = generate(&SynthConfig::default())?;
    let params = train(&corpus.train, None, &TrainConfig::preset(Preset::Desk), None)?.params;
    for doc in corpus.dev.iter().take(3) {
        println!("{}  gold: {:?}", doc.id, doc.gold_surfaces());
        for p in extract(doc, &params, None, 5, RankBy::Score)? {
            println!("  {}. {:<30} {:>8.3}", p.rank, p.surface, p.score);
        }
    }
    Ok(())
}
