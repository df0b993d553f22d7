//! Mini-batch training with Adam, linear warmup and decay, seeded shuffling
//! and dev-set model selection.

mod config;
mod gradcheck;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{Preset, TrainConfig};
pub use gradcheck::{compare_gradients, grad_check, random_instance, GradCheckReport, TensorCheck};

use crate::corpus::Document;
use crate::encoder::{init_lookup, vocabulary_of};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions};
use crate::infer::{extract, PredictionRecord, RankBy};
use crate::model::{gradients, External, LossConfig, ModelParams, ModelShape, Objective};

/// Learning rate after `step` completed updates: a linear ramp from 0 over
/// the first `ceil(warmup * total)` steps, then linear decay to 0.
pub fn lr_at(step: usize, total_steps: usize, cfg: &TrainConfig) -> f64 {
    let total = total_steps.max(1);
    let step = step.min(total);
    let warmup = warmup_steps(total, cfg.warmup);
    if warmup > 0 && step <= warmup {
        cfg.lr * step as f64 / warmup as f64
    } else {
        cfg.lr * (total - step) as f64 / (total - warmup) as f64
    }
}

fn warmup_steps(total: usize, proportion: f64) -> usize {
    // The epsilon keeps products like 0.1 * 70 from rounding up a step.
    ((proportion * total as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Adam moment estimates, flattened in tensor visiting order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(params: &ModelParams, beta1: f64, beta2: f64, eps: f64) -> Self {
        let n = params.num_params();
        Adam {
            beta1,
            beta2,
            eps,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grad: &ModelParams, lr: f64) {
        self.t += 1;
        let g = grad.to_flat();
        assert_eq!(g.len(), self.m.len(), "gradient does not match optimizer state");
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut offset = 0;
        params.for_each_tensor_mut(|_, t| {
            for (i, p) in t.iter_mut().enumerate() {
                let j = offset + i;
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                let update = lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + eps);
                *p -= update;
            }
            offset += t.len();
        });
    }
}

/// Mutable state carried through a training run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub step: usize,
    pub adam: Adam,
    pub best_dev_f1: Option<f64>,
    pub rng: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogRecord {
    Step {
        step: usize,
        epoch: usize,
        lr: f64,
        loss: f64,
        rank_loss: f64,
        chunk_loss: f64,
    },
    Dev {
        epoch: usize,
        dev_f1_at_3: f64,
        dev_documents: usize,
    },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<LogRecord>,
    /// Epoch (1-based) the returned parameters come from.
    pub selected_epoch: usize,
    pub best_dev_f1: Option<f64>,
}

impl TrainOutcome {
    pub fn log_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|r| serde_json::to_string(r).expect("log records serialize") + "\n")
            .collect()
    }
}

impl TrainConfig {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            margin: self.margin,
            pair_cap: self.pair_cap,
            pair_seed: self.seed,
            objective: self.objective,
        }
    }

    /// Head used at inference for models trained with this objective.
    pub fn rank_by(&self) -> RankBy {
        match self.objective {
            Objective::Chunk => RankBy::Chunk,
            _ => RankBy::Score,
        }
    }
}

/// Fresh parameters: a lookup table over the training vocabulary unless
/// external embeddings are supplied.
pub fn init_model(train: &[Document], cfg: &TrainConfig, external: External<'_>) -> Result<ModelParams> {
    let (lookup, d) = match external {
        Some(ext) => (None, ext.dim()),
        None => (Some(init_lookup(vocabulary_of(train), cfg.dim, cfg.seed)?), cfg.dim),
    };
    ModelParams::init(
        ModelShape {
            k_max: cfg.k_max,
            d,
            d_out: cfg.d_out,
        },
        lookup,
        cfg.seed,
    )
}

/// Macro F1@3 of `params` on `docs`.
pub fn dev_f1_at_3(docs: &[Document], params: &ModelParams, external: External<'_>, cfg: &TrainConfig) -> Result<f64> {
    let preds = docs
        .par_iter()
        .map(|d| extract(d, params, external, 3, cfg.rank_by()).map(|p| PredictionRecord::new(&d.id, &p)))
        .collect::<Result<Vec<_>>>()?;
    let opts = EvalOptions {
        mode: cfg.dev_match,
        strict_at_n: false,
    };
    Ok(evaluate(&preds, docs, &[3], opts)?.cutoffs[0].f1)
}

pub fn train(train_docs: &[Document], dev: Option<&[Document]>, cfg: &TrainConfig, external: External<'_>) -> Result<TrainOutcome> {
    let params = init_model(train_docs, cfg, external)?;
    train_from(params, train_docs, dev, cfg, external)
}

/// Train starting from given parameters.
pub fn train_from(
    mut params: ModelParams,
    train_docs: &[Document],
    dev: Option<&[Document]>,
    cfg: &TrainConfig,
    external: External<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_docs.is_empty() || train_docs.iter().all(|d| d.tokens.is_empty()) {
        return Err(Error::Config("training corpus has no usable documents".into()));
    }
    let loss_cfg = cfg.loss_config();
    let steps_per_epoch = train_docs.len().div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let mut state = TrainState {
        step: 0,
        adam: Adam::new(&params, cfg.beta1, cfg.beta2, cfg.adam_eps),
        best_dev_f1: None,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let mut log = Vec::with_capacity(total_steps + cfg.epochs);
    let mut selected = (params.clone(), cfg.epochs);
    let mut order: Vec<usize> = (0..train_docs.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut state.rng);
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<_> = batch
                .par_iter()
                .map(|&i| gradients(&train_docs[i], &params, external, &loss_cfg))
                .collect();
            // Fixed-order reduction keeps runs bit-identical across thread counts.
            let mut grad = params.zeros_like();
            let (mut loss, mut rank, mut chunk) = (0.0, 0.0, 0.0);
            for r in results {
                let (b, g) = r?;
                loss += b.total;
                rank += b.rank;
                chunk += b.chunk;
                grad.add_scaled(1.0, &g);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.for_each_tensor_mut(|_, t| t.iter_mut().for_each(|x| *x *= scale));

            let lr = lr_at(state.step, total_steps, cfg);
            state.adam.step(&mut params, &grad, lr);
            state.step += 1;
            if let Some(tensor) = params.first_non_finite() {
                return Err(Error::NonFinite {
                    doc_id: train_docs[batch[0]].id.clone(),
                    tensor,
                });
            }
            log.push(LogRecord::Step {
                step: state.step,
                epoch,
                lr,
                loss: loss * scale,
                rank_loss: rank * scale,
                chunk_loss: chunk * scale,
            });
        }
        if let Some(dev) = dev {
            let f1 = dev_f1_at_3(dev, &params, external, cfg)?;
            log.push(LogRecord::Dev {
                epoch,
                dev_f1_at_3: f1,
                dev_documents: dev.len(),
            });
            if state.best_dev_f1.is_none_or(|best| f1 > best) {
                state.best_dev_f1 = Some(f1);
                selected = (params.clone(), epoch);
            }
        }
    }
    let (params, selected_epoch) = if dev.is_some() { selected } else { (params, cfg.epochs) };
    Ok(TrainOutcome {
        params,
        log,
        selected_epoch,
        best_dev_f1: state.best_dev_f1,
    })
}
