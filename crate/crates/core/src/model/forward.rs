use std::collections::HashMap;

use super::{ConvFilter, External, ModelParams};
use crate::corpus::{labeled_spans, Document, GramSpan};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Append the pre-activations of every valid window of `h` to `out`.
fn convolve_into(h: &Matrix, filter: &ConvFilter, out: &mut Vec<f64>) {
    let n = h.rows();
    let k = filter.k;
    if n < k {
        return;
    }
    let width = k * h.cols();
    for start in 0..=n - k {
        let x = h.row_block(start, k);
        for (row, b) in filter.weight.chunks_exact(width).zip(&filter.bias) {
            out.push(dot(row, x) + b);
        }
    }
}

/// ReLU-activated valid convolution of width `k`: one row per window, zero
/// rows when the sequence is shorter than `k`.
pub fn compose(h: &Matrix, k: usize, params: &ModelParams) -> Matrix {
    let d_out = params.shape.d_out;
    let Some(filter) = k.checked_sub(1).and_then(|i| params.conv.get(i)) else {
        return Matrix::zeros(0, d_out);
    };
    let mut pre = Vec::new();
    convolve_into(h, filter, &mut pre);
    let rows = pre.len() / d_out;
    Matrix::from_vec(rows, d_out, pre.into_iter().map(relu).collect())
}

/// Localized informativeness of one composed n-gram.
pub fn localized_score(g: &[f64], params: &ModelParams) -> f64 {
    params.score.apply(g)
}

/// Chunking logit; the keyphrase probability is its sigmoid.
pub fn chunk_logit(g: &[f64], params: &ModelParams) -> f64 {
    params.chunk.apply(g)
}

/// Every occurrence of one phrase string in a document.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseGroup {
    pub surface: String,
    pub k: usize,
    /// Indices into the span list, in enumeration order.
    pub occurrences: Vec<usize>,
    pub localized: Vec<f64>,
    /// Max over `localized`.
    pub global: f64,
    /// Span index attaining the maximum (earliest on ties).
    pub argmax: usize,
    pub label: bool,
    /// Smallest token position among the occurrences.
    pub first_position: usize,
}

/// Group spans by surface and max-pool their scores. Groups come out in the
/// order their surfaces are first met in `spans`.
pub fn group_phrases(spans: &[GramSpan], scores: &[f64]) -> Result<Vec<PhraseGroup>> {
    if spans.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{} spans but {} scores",
            spans.len(),
            scores.len()
        )));
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<PhraseGroup> = Vec::new();
    for (i, (span, &score)) in spans.iter().zip(scores).enumerate() {
        match index.get(span.surface.as_str()) {
            Some(&g) => {
                let group = &mut groups[g];
                if group.label != span.label || group.k != span.k {
                    return Err(Error::Internal(format!(
                        "occurrences of {:?} disagree on label or length",
                        span.surface
                    )));
                }
                group.occurrences.push(i);
                group.localized.push(score);
                if score > group.global {
                    group.global = score;
                    group.argmax = i;
                }
                group.first_position = group.first_position.min(span.start);
            }
            None => {
                index.insert(&span.surface, groups.len());
                groups.push(PhraseGroup {
                    surface: span.surface.clone(),
                    k: span.k,
                    occurrences: vec![i],
                    localized: vec![score],
                    global: score,
                    argmax: i,
                    label: span.label,
                    first_position: span.start,
                });
            }
        }
    }
    Ok(groups)
}

/// Everything the backward pass needs from one document.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub spans: Vec<GramSpan>,
    pub scores: Vec<f64>,
    pub logits: Vec<f64>,
    /// `spans.len() × d_out` pre-activations.
    pub(crate) pre: Vec<f64>,
    pub(crate) embeddings: Matrix,
    pub(crate) rows: Option<Vec<usize>>,
    d_out: usize,
}

impl ForwardPass {
    pub fn pre_activation(&self, span: usize) -> &[f64] {
        &self.pre[span * self.d_out..(span + 1) * self.d_out]
    }

    pub fn hidden(&self, span: usize) -> Vec<f64> {
        self.pre_activation(span).iter().copied().map(relu).collect()
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub fn score_groups(&self) -> Result<Vec<PhraseGroup>> {
        group_phrases(&self.spans, &self.scores)
    }

    pub fn chunk_groups(&self) -> Result<Vec<PhraseGroup>> {
        group_phrases(&self.spans, &self.logits)
    }
}

/// Encode, compose every length `1..=K`, and apply both heads.
pub fn forward(doc: &Document, params: &ModelParams, external: External<'_>) -> Result<ForwardPass> {
    let provider = params.embeddings(external)?;
    let h = provider.encode(doc)?;
    if h.rows() != doc.tokens.len() || h.cols() != params.shape.d {
        return Err(Error::document(
            &doc.id,
            format!("encoder produced {}×{} for {} tokens", h.rows(), h.cols(), doc.tokens.len()),
        ));
    }
    let spans = labeled_spans(doc, params.shape.k_max);
    let d_out = params.shape.d_out;
    let mut pre = Vec::with_capacity(spans.len() * d_out);
    for filter in &params.conv {
        convolve_into(&h, filter, &mut pre);
    }
    debug_assert_eq!(pre.len(), spans.len() * d_out);

    let mut scores = Vec::with_capacity(spans.len());
    let mut logits = Vec::with_capacity(spans.len());
    let mut g = vec![0.0; d_out];
    for z in pre.chunks_exact(d_out) {
        for (gi, &zi) in g.iter_mut().zip(z) {
            *gi = relu(zi);
        }
        scores.push(localized_score(&g, params));
        logits.push(chunk_logit(&g, params));
    }
    for (name, values) in [("localized scores", &scores), ("chunk logits", &logits)] {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                doc_id: doc.id.clone(),
                tensor: name.into(),
            });
        }
    }
    Ok(ForwardPass {
        spans,
        scores,
        logits,
        pre,
        embeddings: h,
        rows: params.embed_rows(doc),
        d_out,
    })
}
