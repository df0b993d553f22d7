//! Seeded planted-keyphrase corpus generator.
//!
//! A fixed vocabulary of two-syllable words is split into phrase words and
//! filler words. A pool of gold phrases of the requested lengths is built
//! from phrase words, each word belonging to exactly one phrase. Every
//! document is filler text with a few gold phrases planted, each one or more
//! times, plus distractors: filler phrases that repeat within a document but
//! are never labeled.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub train_docs: usize,
    pub dev_docs: usize,
    pub vocab: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Gold phrases of each length in the pool.
    pub phrases_per_length: usize,
    pub golds_per_doc: usize,
    /// Occurrences of each planted gold phrase.
    pub repeats: (usize, usize),
    /// Filler tokens per document, before planting.
    pub filler: (usize, usize),
    /// Distinct distractor phrases per document.
    pub distractors_per_doc: usize,
    pub distractor_pool: usize,
    /// Occurrences of each distractor phrase.
    pub distractor_repeats: (usize, usize),
    pub distractor_len: (usize, usize),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            train_docs: 200,
            dev_docs: 50,
            vocab: 500,
            min_len: 1,
            max_len: 5,
            phrases_per_length: 12,
            golds_per_doc: 3,
            repeats: (1, 3),
            filler: (40, 80),
            distractors_per_doc: 2,
            distractor_pool: 20,
            distractor_repeats: (2, 4),
            distractor_len: (3, 5),
        }
    }
}

impl SynthConfig {
    pub fn lengths(&self) -> RangeInclusive<usize> {
        self.min_len..=self.max_len
    }

    pub fn phrase_words(&self) -> usize {
        self.lengths().sum::<usize>() * self.phrases_per_length
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad(format!("invalid phrase length range {}..{}", self.min_len, self.max_len));
        }
        if self.vocab > ONSETS.len().pow(2) * VOWELS.len().pow(2) {
            return bad(format!("vocabulary of {} exceeds the word generator", self.vocab));
        }
        if self.phrase_words() + self.max_len >= self.vocab {
            return bad(format!(
                "{} phrase words leave too little filler in a vocabulary of {}",
                self.phrase_words(),
                self.vocab
            ));
        }
        if self.golds_per_doc == 0 || self.golds_per_doc > self.phrases_per_length * self.lengths().count() {
            return bad("golds_per_doc must be between 1 and the pool size".into());
        }
        for (name, (lo, hi)) in [
            ("repeats", self.repeats),
            ("filler", self.filler),
            ("distractor_repeats", self.distractor_repeats),
            ("distractor_len", self.distractor_len),
        ] {
            if lo > hi || (name != "filler" && lo == 0) {
                return bad(format!("invalid {name} range {lo}..{hi}"));
            }
        }
        if self.distractors_per_doc > self.distractor_pool {
            return bad("distractors_per_doc exceeds distractor_pool".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    /// Every gold phrase in the pool.
    pub phrases: Vec<Vec<String>>,
    pub distractors: Vec<Vec<String>>,
}

pub fn vocabulary(size: usize, rng: &mut impl Rng) -> Vec<String> {
    let syllables: Vec<String> = ONSETS
        .iter()
        .flat_map(|o| VOWELS.iter().map(move |v| format!("{o}{v}")))
        .collect();
    let mut words: Vec<String> = syllables
        .iter()
        .flat_map(|a| syllables.iter().map(move |b| format!("{a}{b}")))
        .collect();
    words.shuffle(rng);
    words.truncate(size);
    words
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let words = vocabulary(cfg.vocab, &mut rng);
    let (phrase_words, filler) = words.split_at(cfg.phrase_words());

    let mut next = phrase_words.iter();
    let mut phrases = Vec::new();
    for len in cfg.lengths() {
        for _ in 0..cfg.phrases_per_length {
            phrases.push(next.by_ref().take(len).cloned().collect::<Vec<_>>());
        }
    }
    let distractors: Vec<Vec<String>> = (0..cfg.distractor_pool)
        .map(|_| {
            let len = rng.gen_range(cfg.distractor_len.0..=cfg.distractor_len.1);
            (0..len).map(|_| filler[rng.gen_range(0..filler.len())].clone()).collect()
        })
        .collect();

    let total = cfg.train_docs + cfg.dev_docs;
    let mut docs: Vec<Document> = (0..total)
        .map(|i| {
            let id = if i < cfg.train_docs {
                format!("synth-train-{i:04}")
            } else {
                format!("synth-dev-{:04}", i - cfg.train_docs)
            };
            document(id, i, cfg, &phrases, &distractors, filler, &mut rng)
        })
        .collect();
    let dev = docs.split_off(cfg.train_docs);
    Ok(SynthCorpus {
        train: docs,
        dev,
        phrases,
        distractors,
    })
}

fn document(
    id: String,
    index: usize,
    cfg: &SynthConfig,
    phrases: &[Vec<String>],
    distractors: &[Vec<String>],
    filler: &[String],
    rng: &mut ChaCha8Rng,
) -> Document {
    // Rotate the length of the first gold so every length is planted evenly.
    let lengths = cfg.lengths().count();
    let per_len = cfg.phrases_per_length;
    let first = (index % lengths) * per_len + rng.gen_range(0..per_len);
    let mut golds = vec![first];
    while golds.len() < cfg.golds_per_doc {
        let g = rng.gen_range(0..phrases.len());
        if !golds.contains(&g) {
            golds.push(g);
        }
    }
    let mut chosen: Vec<usize> = (0..distractors.len()).collect();
    chosen.shuffle(rng);
    chosen.truncate(cfg.distractors_per_doc);

    // Insertions are separated by at least one filler token.
    let mut inserts: Vec<&[String]> = Vec::new();
    for &g in &golds {
        for _ in 0..rng.gen_range(cfg.repeats.0..=cfg.repeats.1) {
            inserts.push(&phrases[g]);
        }
    }
    for &d in &chosen {
        for _ in 0..rng.gen_range(cfg.distractor_repeats.0..=cfg.distractor_repeats.1) {
            inserts.push(&distractors[d]);
        }
    }
    inserts.shuffle(rng);
    let n_filler = rng.gen_range(cfg.filler.0..=cfg.filler.1).max(inserts.len() + 1);
    let background: Vec<&String> = (0..n_filler).map(|_| &filler[rng.gen_range(0..filler.len())]).collect();
    // Choose distinct gaps in the background for the insertions.
    let mut gaps: Vec<usize> = (1..n_filler).collect();
    gaps.shuffle(rng);
    let mut gaps: Vec<usize> = gaps.into_iter().take(inserts.len()).collect();
    gaps.sort_unstable();

    let mut tokens = Vec::with_capacity(n_filler + inserts.iter().map(|p| p.len()).sum::<usize>());
    let mut gap_iter = gaps.iter().zip(&inserts).peekable();
    for (pos, tok) in background.iter().enumerate() {
        while let Some((_, phrase)) = gap_iter.next_if(|(&g, _)| g == pos) {
            tokens.extend(phrase.iter().cloned());
        }
        tokens.push((*tok).clone());
    }
    let gold = golds.iter().map(|&g| phrases[g].clone()).collect();
    Document::new(id, tokens, gold)
}
