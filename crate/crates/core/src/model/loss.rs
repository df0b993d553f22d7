use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::{forward, ForwardPass, PhraseGroup};
use super::{External, ModelParams};
use crate::corpus::{Document, GramSpan};
use crate::error::{Error, Result};
use crate::matrix::axpy;

/// Upper bound on (positive, negative) pairs per document. Larger pair sets
/// are subsampled uniformly without replacement.
pub const DEFAULT_PAIR_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Ranking plus chunking, unit weights.
    #[default]
    Joint,
    /// Ranking loss only.
    Rank,
    /// Chunking loss only.
    Chunk,
}

impl Objective {
    pub fn uses_rank(self) -> bool {
        matches!(self, Objective::Joint | Objective::Rank)
    }

    pub fn uses_chunk(self) -> bool {
        matches!(self, Objective::Joint | Objective::Chunk)
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Objective::Joint),
            "rank" => Ok(Objective::Rank),
            "chunk" => Ok(Objective::Chunk),
            other => Err(Error::Config(format!("unknown objective {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub margin: f64,
    pub pair_cap: usize,
    pub pair_seed: u64,
    pub objective: Objective,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            margin: 1.0,
            pair_cap: DEFAULT_PAIR_CAP,
            pair_seed: 0,
            objective: Objective::Joint,
        }
    }
}

/// Loss terms for one document. Disabled terms are reported as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rank: f64,
    pub chunk: f64,
    pub total: f64,
    pub pairs: usize,
    pub chunk_terms: usize,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// All (positive group, negative group) index pairs, or a seeded uniform
/// subsample of `cap` of them, in ascending pair order.
pub fn select_pairs(groups: &[PhraseGroup], cap: usize, seed: u64) -> Vec<(usize, usize)> {
    let pos: Vec<usize> = (0..groups.len()).filter(|&i| groups[i].label).collect();
    let neg: Vec<usize> = (0..groups.len()).filter(|&i| !groups[i].label).collect();
    let total = pos.len() * neg.len();
    let pair = |idx: usize| (pos[idx / neg.len()], neg[idx % neg.len()]);
    if total <= cap {
        return (0..total).map(pair).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, total, cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(pair).collect()
}

fn hinge_arg(groups: &[PhraseGroup], (p, n): (usize, usize), margin: f64) -> f64 {
    margin - groups[p].global + groups[n].global
}

fn mean_hinge(groups: &[PhraseGroup], pairs: &[(usize, usize)], margin: f64) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|&pair| hinge_arg(groups, pair, margin).max(0.0))
        .sum();
    sum / pairs.len() as f64
}

/// Mean pairwise hinge over every (keyphrase, non-keyphrase) pair of global
/// scores; zero when either side is empty.
pub fn rank_loss(groups: &[PhraseGroup], margin: f64) -> f64 {
    let pairs = select_pairs(groups, usize::MAX, 0);
    mean_hinge(groups, &pairs, margin)
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy of `sigmoid(logit)` against span labels.
pub fn chunk_loss(spans: &[GramSpan], logits: &[f64]) -> f64 {
    if spans.is_empty() {
        return 0.0;
    }
    let sum: f64 = spans
        .iter()
        .zip(logits)
        .map(|(s, &l)| softplus(l) - if s.label { l } else { 0.0 })
        .sum();
    sum / spans.len() as f64
}

struct Evaluated {
    fp: ForwardPass,
    groups: Vec<PhraseGroup>,
    pairs: Vec<(usize, usize)>,
    breakdown: LossBreakdown,
}

fn evaluate(doc: &Document, params: &ModelParams, external: External<'_>, cfg: &LossConfig) -> Result<Evaluated> {
    let fp = forward(doc, params, external)?;
    let groups = fp.score_groups()?;
    let pairs = if cfg.objective.uses_rank() {
        select_pairs(&groups, cfg.pair_cap, cfg.pair_seed ^ fnv1a(doc.id.as_bytes()))
    } else {
        Vec::new()
    };
    let rank = mean_hinge(&groups, &pairs, cfg.margin);
    let (chunk, chunk_terms) = if cfg.objective.uses_chunk() {
        (chunk_loss(&fp.spans, &fp.logits), fp.spans.len())
    } else {
        (0.0, 0)
    };
    let breakdown = LossBreakdown {
        rank,
        chunk,
        total: rank + chunk,
        pairs: pairs.len(),
        chunk_terms,
    };
    if !breakdown.total.is_finite() {
        return Err(Error::NonFinite {
            doc_id: doc.id.clone(),
            tensor: "loss".into(),
        });
    }
    Ok(Evaluated {
        fp,
        groups,
        pairs,
        breakdown,
    })
}

/// Full forward pipeline and both losses for one labeled document.
pub fn joint_loss(doc: &Document, params: &ModelParams, external: External<'_>, cfg: &LossConfig) -> Result<LossBreakdown> {
    Ok(evaluate(doc, params, external, cfg)?.breakdown)
}

/// Exact gradients of the document loss with respect to every trainable
/// tensor. Subgradients at ReLU, hinge and max-pool kinks are taken as zero
/// (ReLU, hinge) or routed to the earliest maximizing occurrence (max-pool).
pub fn gradients(
    doc: &Document,
    params: &ModelParams,
    external: External<'_>,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, ModelParams)> {
    let Evaluated {
        fp,
        groups,
        pairs,
        breakdown,
    } = evaluate(doc, params, external, cfg)?;
    let n_spans = fp.spans.len();
    let mut d_score = vec![0.0; n_spans];
    let mut d_logit = vec![0.0; n_spans];

    if !pairs.is_empty() {
        let w = 1.0 / pairs.len() as f64;
        for &pair in &pairs {
            if hinge_arg(&groups, pair, cfg.margin) > 0.0 {
                d_score[groups[pair.0].argmax] -= w;
                d_score[groups[pair.1].argmax] += w;
            }
        }
    }
    if cfg.objective.uses_chunk() && n_spans > 0 {
        let w = 1.0 / n_spans as f64;
        for (i, span) in fp.spans.iter().enumerate() {
            d_logit[i] = w * (sigmoid(fp.logits[i]) - if span.label { 1.0 } else { 0.0 });
        }
    }

    let mut grad = params.zeros_like();
    let d = params.shape.d;
    let d_out = params.shape.d_out;
    let mut d_h = vec![0.0; fp.embeddings.rows() * d];
    let mut d_z = vec![0.0; d_out];

    for (i, span) in fp.spans.iter().enumerate() {
        let (ds, dl) = (d_score[i], d_logit[i]);
        if ds == 0.0 && dl == 0.0 {
            continue;
        }
        let z = fp.pre_activation(i);
        for o in 0..d_out {
            if z[o] > 0.0 {
                let g = z[o];
                grad.score.weight[o] += ds * g;
                grad.chunk.weight[o] += dl * g;
                d_z[o] = ds * params.score.weight[o] + dl * params.chunk.weight[o];
            } else {
                d_z[o] = 0.0;
            }
        }
        grad.score.bias += ds;
        grad.chunk.bias += dl;

        let k = span.k;
        let width = k * d;
        let x = fp.embeddings.row_block(span.start, k);
        let filter = &params.conv[k - 1];
        let g_filter = &mut grad.conv[k - 1];
        let dx = &mut d_h[span.start * d..(span.start + k) * d];
        for o in 0..d_out {
            let dzo = d_z[o];
            if dzo == 0.0 {
                continue;
            }
            g_filter.bias[o] += dzo;
            axpy(dzo, x, &mut g_filter.weight[o * width..(o + 1) * width]);
            axpy(dzo, &filter.weight[o * width..(o + 1) * width], dx);
        }
    }

    if let (Some(rows), Some(lookup)) = (&fp.rows, grad.lookup.as_mut()) {
        let table = lookup.table_mut();
        for (t, &row) in rows.iter().enumerate() {
            axpy(1.0, &d_h[t * d..(t + 1) * d], table.row_mut(row));
        }
    }

    if let Some(tensor) = grad.first_non_finite() {
        return Err(Error::NonFinite {
            doc_id: doc.id.clone(),
            tensor,
        });
    }
    Ok((breakdown, grad))
}

/// Which side of every kink the current parameters sit on, and how close the
/// nearest kink is. Two parameter settings with equal signatures lie in the
/// same smooth piece of the loss.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct KinkSignature {
    relu: Vec<bool>,
    argmax: Vec<usize>,
    hinge: Vec<bool>,
    pub nearest: f64,
}

pub(crate) fn kink_signature(
    doc: &Document,
    params: &ModelParams,
    external: External<'_>,
    cfg: &LossConfig,
) -> Result<KinkSignature> {
    let ev = evaluate(doc, params, external, cfg)?;
    let mut nearest = f64::INFINITY;
    let relu = ev
        .fp
        .pre
        .iter()
        .map(|&z| {
            nearest = nearest.min(z.abs());
            z > 0.0
        })
        .collect();
    for g in &ev.groups {
        for (&occ, &s) in g.occurrences.iter().zip(&g.localized) {
            if occ != g.argmax {
                nearest = nearest.min(g.global - s);
            }
        }
    }
    let hinge = ev
        .pairs
        .iter()
        .map(|&pair| {
            let a = hinge_arg(&ev.groups, pair, cfg.margin);
            nearest = nearest.min(a.abs());
            a > 0.0
        })
        .collect();
    Ok(KinkSignature {
        relu,
        argmax: ev.groups.iter().map(|g| g.argmax).collect(),
        hinge,
        nearest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::group_phrases;

    fn groups_from(pos: &[f64], neg: &[f64]) -> Vec<PhraseGroup> {
        let spans: Vec<GramSpan> = pos
            .iter()
            .map(|_| true)
            .chain(neg.iter().map(|_| false))
            .enumerate()
            .map(|(i, label)| GramSpan {
                start: i,
                k: 1,
                surface: format!("p{i}"),
                label,
            })
            .collect();
        let scores: Vec<f64> = pos.iter().chain(neg).copied().collect();
        group_phrases(&spans, &scores).unwrap()
    }

    #[test]
    fn rank_loss_examples() {
        assert_eq!(rank_loss(&groups_from(&[3.0, 2.5], &[1.5, -1.0]), 1.0), 0.0);
        assert_eq!(rank_loss(&groups_from(&[0.0], &[0.0]), 1.0), 1.0);
        assert!((rank_loss(&groups_from(&[0.5], &[0.2, -0.3]), 1.0) - 0.45).abs() < 1e-12);
        assert_eq!(rank_loss(&groups_from(&[], &[0.2, -0.3]), 1.0), 0.0);
        assert_eq!(rank_loss(&groups_from(&[0.1], &[]), 1.0), 0.0);
    }

    #[test]
    fn chunk_loss_examples() {
        let spans: Vec<GramSpan> = (0..4)
            .map(|i| GramSpan {
                start: i,
                k: 1,
                surface: format!("s{i}"),
                label: i % 2 == 0,
            })
            .collect();
        assert!((chunk_loss(&spans, &[0.0; 4]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(chunk_loss(&spans[..1], &[20.0]) < 1e-8);
        let expected = (1.0 + (-0.5f64).exp()).ln();
        assert!((chunk_loss(&spans[..1], &[0.5]) - expected).abs() < 1e-15);
        assert!((expected - 0.47407).abs() < 1e-5);
        // Saturated logits stay finite.
        assert!(chunk_loss(&spans[1..2], &[800.0]).is_finite());
    }

    #[test]
    fn pair_cap_subsamples_deterministically() {
        let g = groups_from(&[1.0, 2.0, 3.0], &[0.0; 50]);
        assert_eq!(select_pairs(&g, DEFAULT_PAIR_CAP, 0).len(), 150);
        let a = select_pairs(&g, 40, 5);
        assert_eq!(a.len(), 40);
        assert_eq!(a, select_pairs(&g, 40, 5));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&(p, n)| g[p].label && !g[n].label));
    }

    fn tiny(gold: &[&str]) -> (Document, ModelParams) {
        let tokens: Vec<String> = "x key y key word z".split(' ').map(String::from).collect();
        let gold = gold.iter().map(|g| g.split(' ').map(String::from).collect()).collect();
        let doc = Document::new("t", tokens, gold);
        let lookup = crate::encoder::init_lookup(["absent", "key", "word", "x", "y", "z"], 4, 3).unwrap();
        let params = ModelParams::init(crate::model::ModelShape { k_max: 2, d: 4, d_out: 4 }, Some(lookup), 3).unwrap();
        (doc, params)
    }

    #[test]
    fn joint_loss_examples() {
        let cfg = LossConfig::default();
        let (doc, params) = tiny(&[]);
        let b = joint_loss(&doc, &params, None, &cfg).unwrap();
        assert_eq!(b.rank, 0.0);
        assert_eq!(b.total, b.chunk);

        let (doc, params) = tiny(&["key word"]);
        let b = joint_loss(&doc, &params, None, &cfg).unwrap();
        assert!(b.rank >= 0.0 && b.chunk >= 0.0 && b.total == b.rank + b.chunk);
        let mut moved = params.clone();
        moved.chunk.bias += 0.7;
        moved.chunk.weight[0] -= 0.3;
        let m = joint_loss(&doc, &moved, None, &cfg).unwrap();
        assert_eq!(m.rank, b.rank);
        assert_ne!(m.chunk, b.chunk);
    }

    #[test]
    fn absent_token_rows_get_no_gradient() {
        let (doc, params) = tiny(&["key word"]);
        let (_, g) = gradients(&doc, &params, None, &LossConfig::default()).unwrap();
        let lookup = g.lookup.as_ref().unwrap();
        let absent = params.lookup.as_ref().unwrap().row_of("absent");
        assert!(lookup.table().row(absent).iter().all(|&x| x == 0.0));
        assert!(lookup.table().row(0).iter().all(|&x| x == 0.0));
        let key = params.lookup.as_ref().unwrap().row_of("key");
        assert!(lookup.table().row(key).iter().any(|&x| x != 0.0));
    }
}

