use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::Document;
use crate::encoder::init_lookup;
use crate::error::Result;
use crate::model::{
    gradients, joint_loss, kink_signature, External, LossConfig, ModelParams, ModelShape,
};

/// Coordinates sampled per tensor.
pub const MAX_COORDS: usize = 50;

/// Gradients smaller than this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    /// Sampled coordinates whose central difference straddles a kink.
    pub skipped: usize,
    pub max_rel_err: f64,
    pub worst_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_err).fold(0.0, f64::max)
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compare analytic gradients from [`gradients`] with central differences.
pub fn grad_check(
    doc: &Document,
    params: &ModelParams,
    external: External<'_>,
    eps: f64,
    tolerance: f64,
    cfg: &LossConfig,
) -> Result<GradCheckReport> {
    let (_, analytic) = gradients(doc, params, external, cfg)?;
    compare_gradients(doc, params, &analytic, external, eps, tolerance, cfg)
}

/// Compare a supplied gradient against central differences of the loss.
pub fn compare_gradients(
    doc: &Document,
    params: &ModelParams,
    analytic: &ModelParams,
    external: External<'_>,
    eps: f64,
    tolerance: f64,
    cfg: &LossConfig,
) -> Result<GradCheckReport> {
    assert!(eps > 0.0, "eps must be positive");
    let base = kink_signature(doc, params, external, cfg)?;
    let mut sizes = Vec::new();
    params.for_each_tensor(|name, t| sizes.push((name.to_string(), t.len())));
    let grad = analytic.to_flat();
    let used_rows = params.embed_rows(doc);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.pair_seed ^ 0x6772_6164);

    let mut tensors = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    let mut probe = params.clone();
    for (ti, (name, len)) in sizes.into_iter().enumerate() {
        // Embedding rows the document never touches have zero gradient on
        // both sides; sample from the rows it does.
        let candidates: Vec<usize> = match (&used_rows, name.as_str()) {
            (Some(rows), "embedding") => {
                let d = params.shape.d;
                let mut rows = rows.clone();
                rows.sort_unstable();
                rows.dedup();
                rows.iter().flat_map(|r| r * d..(r + 1) * d).collect()
            }
            _ => (0..len).collect(),
        };
        let picks = sample(&mut rng, candidates.len(), candidates.len().min(MAX_COORDS));
        let mut check = TensorCheck {
            name,
            checked: 0,
            skipped: 0,
            max_rel_err: 0.0,
            worst_index: None,
        };
        for p in picks.iter() {
            let i = candidates[p];
            let orig = coordinate(&probe, ti, i);
            set_coordinate(&mut probe, ti, i, orig + eps);
            let plus_sig = kink_signature(doc, &probe, external, cfg)?;
            let plus = joint_loss(doc, &probe, external, cfg)?.total;
            set_coordinate(&mut probe, ti, i, orig - eps);
            let minus_sig = kink_signature(doc, &probe, external, cfg)?;
            let minus = joint_loss(doc, &probe, external, cfg)?.total;
            set_coordinate(&mut probe, ti, i, orig);
            if plus_sig != base || minus_sig != base {
                check.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let err = rel_err(grad[offset + i], numeric);
            check.checked += 1;
            if err > check.max_rel_err || check.worst_index.is_none() {
                check.max_rel_err = err;
                check.worst_index = Some(i);
            }
        }
        offset += len;
        tensors.push(check);
    }
    let pass = tensors.iter().all(|t| t.max_rel_err < tolerance);
    Ok(GradCheckReport {
        tensors,
        tolerance,
        pass,
    })
}

fn coordinate(params: &ModelParams, tensor: usize, index: usize) -> f64 {
    let mut v = f64::NAN;
    let mut t = 0;
    params.for_each_tensor(|_, data| {
        if t == tensor {
            v = data[index];
        }
        t += 1;
    });
    v
}

fn set_coordinate(params: &mut ModelParams, tensor: usize, index: usize, value: f64) {
    let mut t = 0;
    params.for_each_tensor_mut(|_, data| {
        if t == tensor {
            data[index] = value;
        }
        t += 1;
    });
}

/// A small random labeled document with a matching random model:
/// 10-20 tokens over a six-word vocabulary (so phrases repeat), one to three
/// gold phrases, d = d_out = 8, K = 3, all parameters uniform in ±0.5.
pub fn random_instance(seed: u64) -> (Document, ModelParams) {
    const WORDS: [&str; 6] = ["alpha", "beta", "gamma", "delta", "eps", "zeta"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(10..=20);
    let tokens: Vec<String> = (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string()).collect();
    let gold = (0..rng.gen_range(1..=3))
        .map(|_| {
            let k = rng.gen_range(1..=3);
            let start = rng.gen_range(0..=n - k);
            tokens[start..start + k].to_vec()
        })
        .collect();
    let doc = Document::new(format!("gradcheck-{seed}"), tokens, gold);
    let shape = ModelShape { k_max: 3, d: 8, d_out: 8 };
    let lookup = init_lookup(WORDS, shape.d, seed).expect("valid lookup");
    let mut params = ModelParams::init(shape, Some(lookup), seed).expect("valid shape");
    params.for_each_tensor_mut(|_, t| t.iter_mut().for_each(|x| *x = rng.gen_range(-0.5..0.5)));
    (doc, params)
}
