//! Train joint, rank-only and chunk-only models on the synthetic corpus and
//! compare F1@3 on planted phrases of length three or more.
//!
//!     cargo run --release --example ablation -- [seed]

use std::time::Instant;

use jkpe::eval::{bucket_f1_at, evaluate, EvalOptions};
use jkpe::infer::{extract, PredictionRecord};
use jkpe::model::Objective;
use jkpe::synth::{generate, SynthConfig};
use jkpe::train::{train, Preset, TrainConfig};

fn main() -> jkpe::Result<()> {
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed is an integer"));
    let corpus = generate(&SynthConfig { seed, ..SynthConfig::default() })?;
    let opts = EvalOptions::default();
    for objective in [Objective::Joint, Objective::Rank, Objective::Chunk] {
        let cfg = TrainConfig {
            objective,
            seed,
            ..TrainConfig::preset(Preset::Desk)
        };
        let t = Instant::now();
        let out = train(&corpus.train, Some(&corpus.dev), &cfg, None)?;
        let preds = corpus
            .dev
            .iter()
            .map(|d| extract(d, &out.params, None, 3, cfg.rank_by()).map(|p| PredictionRecord::new(&d.id, &p)))
            .collect::<jkpe::Result<Vec<_>>>()?;
        let report = evaluate(&preds, &corpus.dev, &[1, 3], opts)?;
        let long = bucket_f1_at(&preds, &corpus.dev, 3, opts, "3+", |p| p.len() >= 3)?;
        println!(
            "{objective:?}: F1@1 {:.3}  F1@3 {:.3}  F1@3 (len>=3) {:.3}  epoch {}  {:.1}s",
            report.cutoffs[0].f1,
            report.cutoffs[1].f1,
            long.f1_at_3.unwrap_or(0.0),
            out.selected_epoch,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
