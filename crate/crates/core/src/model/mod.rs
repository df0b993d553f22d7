//! The scoring head: per-length convolutions over token embeddings, a linear
//! informativeness head, a separate linear chunking head, max-pooling over
//! occurrences, and the two training losses.

mod checkpoint;
mod forward;
mod loss;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, FORMAT_VERSION, MAGIC};
pub use forward::{
    chunk_logit, compose, forward, group_phrases, localized_score, ForwardPass, PhraseGroup,
};
pub(crate) use loss::kink_signature;
pub use loss::{
    chunk_loss, gradients, joint_loss, rank_loss, select_pairs, LossBreakdown, LossConfig,
    Objective, DEFAULT_PAIR_CAP,
};

use crate::encoder::{EmbeddingProvider, LookupProvider};
use crate::error::{Error, Result};

/// Externally supplied embeddings, used when the model has no lookup table.
pub type External<'a> = Option<&'a dyn EmbeddingProvider>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    /// Maximum n-gram length.
    pub k_max: usize,
    /// Token embedding width.
    pub d: usize,
    /// Width of the composed n-gram representation.
    pub d_out: usize,
}

impl ModelShape {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 || self.d == 0 || self.d_out == 0 {
            return Err(Error::Config(format!(
                "k_max, d and d_out must be at least 1 (got {}, {}, {})",
                self.k_max, self.d, self.d_out
            )));
        }
        Ok(())
    }
}

/// Width-`k` convolution: `weight` is `d_out × (k·d)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilter {
    pub k: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Vec<f64>,
    pub bias: f64,
}

impl Linear {
    #[inline]
    pub fn apply(&self, x: &[f64]) -> f64 {
        crate::matrix::dot(&self.weight, x) + self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub shape: ModelShape,
    /// Trainable token table; `None` when embeddings come from a file.
    pub lookup: Option<LookupProvider>,
    /// `conv[k - 1]` composes k-grams.
    pub conv: Vec<ConvFilter>,
    pub score: Linear,
    pub chunk: Linear,
}

impl ModelParams {
    /// Uniform `±1/sqrt(fan_in)` weights, zero biases.
    pub fn init(shape: ModelShape, lookup: Option<LookupProvider>, seed: u64) -> Result<Self> {
        shape.validate()?;
        if let Some(l) = &lookup {
            if l.dim() != shape.d {
                return Err(Error::Shape(format!(
                    "lookup dim {} does not match model dim {}",
                    l.dim(),
                    shape.d
                )));
            }
        }
        let ModelShape { k_max, d, d_out } = shape;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a6b_7065_6865_6164);
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
        };
        let conv = (1..=k_max)
            .map(|k| ConvFilter {
                k,
                weight: uniform(d_out * k * d, k * d),
                bias: vec![0.0; d_out],
            })
            .collect();
        let score = Linear {
            weight: uniform(d_out, d_out),
            bias: 0.0,
        };
        let chunk = Linear {
            weight: uniform(d_out, d_out),
            bias: 0.0,
        };
        Ok(ModelParams {
            shape,
            lookup,
            conv,
            score,
            chunk,
        })
    }

    /// Same structure, every value zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_tensor_mut(|_, t| t.fill(0.0));
        z
    }

    pub fn embeddings<'a>(&'a self, external: External<'a>) -> Result<&'a dyn EmbeddingProvider> {
        if let Some(lookup) = &self.lookup {
            return Ok(lookup);
        }
        let ext = external.ok_or_else(|| {
            Error::Config("model has no lookup table; external embeddings are required".into())
        })?;
        if ext.dim() != self.shape.d {
            return Err(Error::Shape(format!(
                "embedding dim {} does not match model dim {}",
                ext.dim(),
                self.shape.d
            )));
        }
        Ok(ext)
    }

    /// Visit every tensor in a fixed order: embedding, conv.k.{weight,bias},
    /// score.{weight,bias}, chunk.{weight,bias}.
    pub fn for_each_tensor(&self, mut f: impl FnMut(&str, &[f64])) {
        if let Some(l) = &self.lookup {
            f("embedding", l.table().as_slice());
        }
        for c in &self.conv {
            f(&format!("conv.{}.weight", c.k), &c.weight);
            f(&format!("conv.{}.bias", c.k), &c.bias);
        }
        f("score.weight", &self.score.weight);
        f("score.bias", std::slice::from_ref(&self.score.bias));
        f("chunk.weight", &self.chunk.weight);
        f("chunk.bias", std::slice::from_ref(&self.chunk.bias));
    }

    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        if let Some(l) = &mut self.lookup {
            f("embedding", l.table_mut().as_mut_slice());
        }
        for c in &mut self.conv {
            f(&format!("conv.{}.weight", c.k), &mut c.weight);
            f(&format!("conv.{}.bias", c.k), &mut c.bias);
        }
        f("score.weight", &mut self.score.weight);
        f("score.bias", std::slice::from_mut(&mut self.score.bias));
        f("chunk.weight", &mut self.chunk.weight);
        f("chunk.bias", std::slice::from_mut(&mut self.chunk.bias));
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.for_each_tensor(|n, _| names.push(n.to_string()));
        names
    }

    /// Flatten all tensors in visiting order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.for_each_tensor(|_, t| v.extend_from_slice(t));
        v
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(|_, t| n += t.len());
        n
    }

    /// `self += alpha * other`, tensor by tensor. Shapes must match.
    pub fn add_scaled(&mut self, alpha: f64, other: &ModelParams) {
        let flat = other.to_flat();
        let mut offset = 0;
        self.for_each_tensor_mut(|_, t| {
            crate::matrix::axpy(alpha, &flat[offset..offset + t.len()], t);
            offset += t.len();
        });
        assert_eq!(offset, flat.len(), "parameter structure mismatch");
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<String> {
        let mut found = None;
        self.for_each_tensor(|name, t| {
            if found.is_none() && t.iter().any(|x| !x.is_finite()) {
                found = Some(name.to_string());
            }
        });
        found
    }

    pub(crate) fn embed_rows(&self, doc: &crate::corpus::Document) -> Option<Vec<usize>> {
        self.lookup.as_ref().map(|l| l.rows_for(doc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::init_lookup;

    #[test]
    fn init_shapes_and_determinism() {
        let lookup = init_lookup(["a", "b", "c"], 4, 1).unwrap();
        let shape = ModelShape { k_max: 3, d: 4, d_out: 5 };
        let p = ModelParams::init(shape, Some(lookup.clone()), 9).unwrap();
        assert_eq!(p.conv[2].weight.len(), 5 * 3 * 4);
        assert_eq!(p, ModelParams::init(shape, Some(lookup.clone()), 9).unwrap());
        assert_eq!(p.num_params(), 4 * 4 + (5 * 4 + 5) + (5 * 8 + 5) + (5 * 12 + 5) + 6 + 6);
        assert!(ModelParams::init(ModelShape { k_max: 0, ..shape }, None, 9).is_err());
        assert!(ModelParams::init(ModelShape { d: 5, ..shape }, Some(lookup), 9).is_err());
    }

    #[test]
    fn add_scaled_is_tensorwise_axpy() {
        let p = ModelParams::init(ModelShape { k_max: 2, d: 2, d_out: 3 }, None, 1).unwrap();
        let mut q = p.zeros_like();
        q.add_scaled(2.0, &p);
        let expected: Vec<f64> = p.to_flat().iter().map(|x| 2.0 * x).collect();
        assert_eq!(q.to_flat(), expected);
    }
}
