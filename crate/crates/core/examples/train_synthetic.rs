//! Train on the planted-keyphrase corpus with the desk preset, save the
//! checkpoint and print the per-epoch dev scores.
//!
//!     cargo run --release --example train_synthetic -- [out.ckpt]

use jkpe::eval::{evaluate, EvalOptions};
use jkpe::infer::{extract, PredictionRecord};
use jkpe::model::save_checkpoint;
use jkpe::synth::{generate, SynthConfig};
use jkpe::train::{train, LogRecord, Preset, TrainConfig};

fn main() -> jkpe::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic.ckpt".into());
    let corpus = generate(&SynthConfig::default())?;
    let cfg = TrainConfig::preset(Preset::Desk);
    let outcome = train(&corpus.train, Some(&corpus.dev), &cfg, None)?;

    for rec in &outcome.log {
        match rec {
            LogRecord::Step { step, loss, .. } if step % 25 == 0 => println!("step {step:>3}  loss {loss:.4}"),
            LogRecord::Dev { epoch, dev_f1_at_3, .. } => println!("epoch {epoch}  dev F1@3 {dev_f1_at_3:.3}"),
            _ => {}
        }
    }
    println!("selected epoch {}", outcome.selected_epoch);

    let preds: Vec<PredictionRecord> = corpus
        .dev
        .iter()
        .map(|d| extract(d, &outcome.params, None, 5, cfg.rank_by()).map(|p| PredictionRecord::new(&d.id, &p)))
        .collect::<jkpe::Result<_>>()?;
    print!("{}", evaluate(&preds, &corpus.dev, &[1, 3, 5], EvalOptions::default())?.to_table());

    save_checkpoint(&outcome.params, &out)?;
    println!("wrote {out}");
    Ok(())
}
