//! Train and extract with precomputed per-document embeddings instead of a
//! lookup table. The vectors here come from a fixed random projection of
//! each token; any contextual encoder's output can be written the same way.

use jkpe::encoder::{write_embjsonl, validate_embjsonl, FileProvider};
use jkpe::infer::{extract, RankBy};
use jkpe::matrix::Matrix;
use jkpe::synth::{generate, SynthConfig};
use jkpe::train::{train, Preset, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

const DIM: usize = 16;

fn main() -> jkpe::Result<()> {
    let corpus = generate(&SynthConfig::default())?;
    let mut table: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let docs: Vec<_> = corpus.train.iter().chain(&corpus.dev).collect();
    let matrices: Vec<(String, Matrix)> = docs
        .iter()
        .map(|d| {
            let mut data = Vec::with_capacity(d.tokens.len() * DIM);
            for t in &d.tokens {
                let v = table
                    .entry(t)
                    .or_insert_with(|| (0..DIM).map(|_| rng.gen_range(-1.0..1.0)).collect());
                data.extend_from_slice(v);
            }
            (d.id.clone(), Matrix::from_vec(d.tokens.len(), DIM, data))
        })
        .collect();

    let path = std::env::temp_dir().join("jkpe-example.embjsonl");
    write_embjsonl(&path, matrices.iter().map(|(id, m)| (id.as_str(), m)))?;
    println!("{} records validated", validate_embjsonl(&path)?);

    let provider = FileProvider::load(&path)?;
    let cfg = TrainConfig::preset(Preset::Desk);
    let out = train(&corpus.train, Some(&corpus.dev), &cfg, Some(&provider))?;
    println!("dev F1@3 {:.3}", out.best_dev_f1.unwrap_or(0.0));
    let doc = &corpus.dev[0];
    let top: Vec<_> = extract(doc, &out.params, Some(&provider), 3, RankBy::Score)?
        .into_iter()
        .map(|p| p.surface)
        .collect();
    println!("{}: predicted {top:?}, gold {:?}", doc.id, doc.gold_surfaces());
    Ok(())
}
