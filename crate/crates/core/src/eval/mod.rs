//! Extraction metrics: precision, recall and F1 over the top-N predictions,
//! macro-averaged over documents, with exact or stemmed phrase matching.

mod porter;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use porter::porter_stem;

use crate::corpus::{normalize_phrase, Document};
use crate::error::{Error, Result};
use crate::infer::PredictionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    #[default]
    Exact,
    Stemmed,
}

impl std::str::FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(MatchMode::Exact),
            "stemmed" | "stem" => Ok(MatchMode::Stemmed),
            other => Err(Error::Config(format!("unknown match mode {other:?}"))),
        }
    }
}

/// Canonical form two phrases share iff they match under `mode`.
pub fn match_key(phrase: &[String], mode: MatchMode) -> String {
    match mode {
        MatchMode::Exact => phrase.iter().map(|t| t.to_lowercase()).collect::<Vec<_>>().join(" "),
        MatchMode::Stemmed => phrase
            .iter()
            .map(|t| porter_stem(&t.to_lowercase()))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

pub fn phrases_match(a: &[String], b: &[String], mode: MatchMode) -> bool {
    a.len() == b.len() && match_key(a, mode) == match_key(b, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct EvalOptions {
    pub mode: MatchMode,
    /// Divide precision by N instead of the number of predictions returned.
    pub strict_at_n: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffMetrics {
    pub n: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketMetrics {
    pub bucket: String,
    /// Documents with at least one gold phrase in the bucket.
    pub documents: usize,
    /// `None` when no document has a gold phrase in the bucket.
    pub f1_at_3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: MatchMode,
    pub strict_at_n: bool,
    pub documents: usize,
    pub cutoffs: Vec<CutoffMetrics>,
    pub length_buckets: Vec<BucketMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<[BucketMetrics; 2]>,
}

impl EvalReport {
    pub fn at(&self, n: usize) -> Option<&CutoffMetrics> {
        self.cutoffs.iter().find(|c| c.n == n)
    }

    /// One row per cutoff and bucket: `section,key,n,precision,recall,f1,documents`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,key,n,precision,recall,f1,documents\n");
        for c in &self.cutoffs {
            let _ = writeln!(out, "cutoff,all,{},{},{},{},{}", c.n, c.precision, c.recall, c.f1, self.documents);
        }
        let buckets = self
            .length_buckets
            .iter()
            .map(|b| ("length", b))
            .chain(self.lexicon.iter().flatten().map(|b| ("lexicon", b)));
        for (section, b) in buckets {
            let f1 = b.f1_at_3.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{section},{},3,,,{f1},{}", b.bucket, b.documents);
        }
        out
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "match={:?} strict_at_n={} documents={}\n{:>6} {:>8} {:>8} {:>8}\n",
            self.mode, self.strict_at_n, self.documents, "N", "P", "R", "F1"
        );
        for c in &self.cutoffs {
            let _ = writeln!(out, "{:>6} {:>8.3} {:>8.3} {:>8.3}", c.n, c.precision, c.recall, c.f1);
        }
        let _ = writeln!(out, "{:>6} {:>8} {:>8}", "length", "docs", "F1@3");
        for b in self.length_buckets.iter().chain(self.lexicon.iter().flatten()) {
            let f1 = b.f1_at_3.map_or("-".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(out, "{:>6} {:>8} {:>8}", b.bucket, b.documents, f1);
        }
        out
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-document inputs with match keys precomputed.
struct Aligned {
    id: String,
    /// (tokens, key) of each prediction in rank order.
    preds: Vec<(Vec<String>, String)>,
    golds: Vec<(Vec<String>, String)>,
}

fn align(preds: &[PredictionRecord], golds: &[Document], mode: MatchMode) -> Result<Vec<Aligned>> {
    let gold_ids: HashSet<&str> = golds.iter().map(|d| d.id.as_str()).collect();
    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::new();
    let mut unknown = Vec::new();
    for rec in preds {
        if !gold_ids.contains(rec.id.as_str()) {
            unknown.push(rec.id.clone());
            continue;
        }
        if by_id.insert(&rec.id, rec).is_some() {
            return Err(Error::document(&rec.id, "more than one prediction record"));
        }
        let mut seen = HashSet::new();
        for p in &rec.predictions {
            if !seen.insert(p.phrase.as_str()) {
                return Err(Error::document(&rec.id, format!("duplicate predicted phrase {:?}", p.phrase)));
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::Config(format!(
            "predictions for documents missing from the gold set: {}",
            unknown.join(", ")
        )));
    }
    let keyed = |p: Vec<String>| {
        let key = match_key(&p, mode);
        (p, key)
    };
    let mut out: Vec<Aligned> = golds
        .iter()
        .map(|doc| {
            let preds = by_id.get(doc.id.as_str()).map_or_else(Vec::new, |rec| {
                let mut ranked: Vec<_> = rec.predictions.iter().collect();
                ranked.sort_by_key(|p| p.rank);
                ranked.into_iter().map(|p| keyed(normalize_phrase(&p.phrase))).collect()
            });
            Aligned {
                id: doc.id.clone(),
                preds,
                golds: doc.gold.iter().cloned().map(keyed).collect(),
            }
        })
        .collect();
    // Fixed accumulation order keeps the report independent of input order.
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Greedy one-to-one matching in rank order; returns matched count.
fn greedy_matches(preds: &[&(Vec<String>, String)], golds: &[&(Vec<String>, String)]) -> usize {
    let mut used = vec![false; golds.len()];
    let mut matched = 0;
    for (_, key) in preds {
        if let Some(j) = (0..golds.len()).find(|&j| !used[j] && golds[j].1 == *key) {
            used[j] = true;
            matched += 1;
        }
    }
    matched
}

fn doc_prf(doc: &Aligned, n: usize, opts: EvalOptions, pred_in: &dyn Fn(&[String], &str) -> bool, gold_in: &dyn Fn(&[String], &str) -> bool) -> (f64, f64, f64) {
    let preds: Vec<_> = doc.preds.iter().take(n).filter(|(t, k)| pred_in(t, k)).collect();
    let golds: Vec<_> = doc.golds.iter().filter(|(t, k)| gold_in(t, k)).collect();
    let matched = greedy_matches(&preds, &golds) as f64;
    let denom = if opts.strict_at_n { n } else { preds.len() };
    let p = if denom == 0 { 0.0 } else { matched / denom as f64 };
    let r = if golds.is_empty() { 0.0 } else { matched / golds.len() as f64 };
    (p, r, f1(p, r))
}

/// Macro-averaged P/R/F1 at each cutoff plus F1@3 by gold phrase length.
pub fn evaluate(preds: &[PredictionRecord], golds: &[Document], cutoffs: &[usize], opts: EvalOptions) -> Result<EvalReport> {
    let docs = align(preds, golds, opts.mode)?;
    let all = |_: &[String], _: &str| true;
    let cutoffs = cutoffs
        .iter()
        .map(|&n| {
            let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
            for doc in &docs {
                let (dp, dr, df) = doc_prf(doc, n, opts, &all, &all);
                p += dp;
                r += dr;
                f += df;
            }
            let m = docs.len().max(1) as f64;
            CutoffMetrics {
                n,
                precision: p / m,
                recall: r / m,
                f1: f / m,
            }
        })
        .collect();
    Ok(EvalReport {
        mode: opts.mode,
        strict_at_n: opts.strict_at_n,
        documents: docs.len(),
        cutoffs,
        length_buckets: length_buckets_aligned(&docs, opts),
        lexicon: None,
    })
}

fn bucket_over(docs: &[Aligned], name: &str, n: usize, opts: EvalOptions, member: &dyn Fn(&[String], &str) -> bool) -> BucketMetrics {
    let mut sum = 0.0;
    let mut count = 0;
    for doc in docs {
        if !doc.golds.iter().any(|(t, k)| member(t, k)) {
            continue;
        }
        sum += doc_prf(doc, n, opts, member, member).2;
        count += 1;
    }
    BucketMetrics {
        bucket: name.to_string(),
        documents: count,
        f1_at_3: (count > 0).then(|| sum / count as f64),
    }
}

pub const LENGTH_BUCKETS: [&str; 5] = ["1", "2", "3", "4", "5+"];

fn length_bucket(len: usize) -> usize {
    len.clamp(1, 5) - 1
}

fn length_buckets_aligned(docs: &[Aligned], opts: EvalOptions) -> Vec<BucketMetrics> {
    LENGTH_BUCKETS
        .iter()
        .enumerate()
        .map(|(b, name)| bucket_over(docs, name, 3, opts, &|t, _| length_bucket(t.len()) == b))
        .collect()
}

/// F1@3 per gold length bucket (1, 2, 3, 4, 5+). Within a bucket only
/// predictions and gold phrases of that length count; documents without a
/// gold phrase of that length are left out of the bucket's average.
pub fn length_buckets(preds: &[PredictionRecord], golds: &[Document], opts: EvalOptions) -> Result<Vec<BucketMetrics>> {
    Ok(length_buckets_aligned(&align(preds, golds, opts.mode)?, opts))
}

/// F1@N restricted to phrases satisfying `member`, with the same bucketing
/// rule as [`length_buckets`].
pub fn bucket_f1_at(
    preds: &[PredictionRecord],
    golds: &[Document],
    n: usize,
    opts: EvalOptions,
    name: &str,
    member: impl Fn(&[String]) -> bool,
) -> Result<BucketMetrics> {
    let docs = align(preds, golds, opts.mode)?;
    Ok(bucket_over(&docs, name, n, opts, &|t, _| member(t)))
}

/// F1@3 split by membership of the phrase in a user lexicon.
pub fn lexicon_buckets(
    preds: &[PredictionRecord],
    golds: &[Document],
    lexicon: &[Vec<String>],
    opts: EvalOptions,
) -> Result<[BucketMetrics; 2]> {
    let docs = align(preds, golds, opts.mode)?;
    let keys: HashSet<String> = lexicon.iter().map(|p| match_key(p, opts.mode)).collect();
    let inside = bucket_over(&docs, "in-lexicon", 3, opts, &|_, k| keys.contains(k));
    let outside = bucket_over(&docs, "out-of-lexicon", 3, opts, &|_, k| !keys.contains(k));
    Ok([inside, outside])
}

/// Gold phrase length histogram, handy next to the bucket report.
pub fn gold_length_histogram(golds: &[Document]) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for doc in golds {
        for p in &doc.gold {
            *h.entry(LENGTH_BUCKETS[length_bucket(p.len())].to_string()).or_insert(0) += 1;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infer::ScoredPhrase;

    fn phrase(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    fn doc(id: &str, gold: &[&str]) -> Document {
        Document::new(id, vec!["x".into()], gold.iter().map(|g| phrase(g)).collect())
    }

    fn preds(id: &str, phrases: &[&str]) -> PredictionRecord {
        PredictionRecord {
            id: id.into(),
            predictions: phrases
                .iter()
                .enumerate()
                .map(|(i, p)| ScoredPhrase {
                    rank: i + 1,
                    phrase: p.to_string(),
                    score: -(i as f64),
                })
                .collect(),
        }
    }

    #[test]
    fn matching_modes() {
        let a = phrase("neural networks");
        let b = phrase("neural network");
        assert!(phrases_match(&a, &b, MatchMode::Stemmed));
        assert!(!phrases_match(&a, &b, MatchMode::Exact));
        for mode in [MatchMode::Exact, MatchMode::Stemmed] {
            assert!(phrases_match(&a, &a, mode));
        }
    }

    #[test]
    fn hand_computed_prf() {
        let golds = [doc("d", &["a", "b"])];
        let r = evaluate(&[preds("d", &["a", "c", "d"])], &golds, &[3], EvalOptions::default()).unwrap();
        let c = r.at(3).unwrap();
        assert!((c.precision - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.recall, 0.5);
        assert!((c.f1 - 0.4).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_empty() {
        let golds = [doc("d", &["a b", "c"])];
        let r = evaluate(&[preds("d", &["a b", "c"])], &golds, &[1, 3, 5], EvalOptions::default()).unwrap();
        assert_eq!(r.at(3).unwrap().f1, 1.0);
        assert_eq!(r.at(5).unwrap().precision, 1.0);
        let empty = evaluate(&[], &golds, &[1, 3], EvalOptions::default()).unwrap();
        assert!(empty.cutoffs.iter().all(|c| c.precision == 0.0 && c.recall == 0.0 && c.f1 == 0.0));
    }

    #[test]
    fn strict_denominator() {
        let golds = [doc("d", &["a", "b"])];
        let opts = EvalOptions {
            strict_at_n: true,
            ..Default::default()
        };
        let r = evaluate(&[preds("d", &["a"])], &golds, &[5], opts).unwrap();
        assert_eq!(r.at(5).unwrap().precision, 0.2);
    }

    #[test]
    fn one_prediction_matches_one_gold() {
        let golds = [doc("d", &["network", "networks"])];
        let opts = EvalOptions {
            mode: MatchMode::Stemmed,
            ..Default::default()
        };
        let r = evaluate(&[preds("d", &["networks"])], &golds, &[1], opts).unwrap();
        assert_eq!(r.at(1).unwrap().recall, 0.5);
    }

    #[test]
    fn rejects_duplicates_and_unknown_ids() {
        let golds = [doc("d", &["a"])];
        assert!(evaluate(&[preds("d", &["a", "a"])], &golds, &[3], EvalOptions::default()).is_err());
        let err = evaluate(&[preds("zz", &["a"])], &golds, &[3], EvalOptions::default()).unwrap_err();
        assert!(err.to_string().contains("zz"));
    }

    #[test]
    fn length_bucket_rules() {
        let golds = [doc("d", &["a b"])];
        let b = length_buckets(&[preds("d", &["a b"])], &golds, EvalOptions::default()).unwrap();
        assert_eq!(b[1].f1_at_3, Some(1.0));
        for i in [0, 2, 3, 4] {
            assert_eq!(b[i].f1_at_3, None);
            assert_eq!(b[i].documents, 0);
        }
        let golds = [doc("d", &["w x y z"])];
        let b = length_buckets(&[preds("d", &["w x y z", "q", "r"])], &golds, EvalOptions::default()).unwrap();
        assert_eq!(b[3].f1_at_3, Some(1.0));
        let long = [doc("d", &["a b c d e f"])];
        let b = length_buckets(&[preds("d", &["a b c d e f"])], &long, EvalOptions::default()).unwrap();
        assert_eq!(b[4].f1_at_3, Some(1.0));
    }

    #[test]
    fn lexicon_degenerate_partitions() {
        let golds = [doc("d1", &["a", "b c"]), doc("d2", &["e"])];
        let p = [preds("d1", &["a", "x", "b c"]), preds("d2", &["y", "e"])];
        let opts = EvalOptions::default();
        let [inside, outside] = lexicon_buckets(&p, &golds, &[], opts).unwrap();
        assert_eq!(inside.f1_at_3, None);
        let overall = evaluate(&p, &golds, &[3], opts).unwrap();
        assert_eq!(outside.f1_at_3, Some(overall.at(3).unwrap().f1));

        let lex: Vec<_> = ["a", "b c", "e", "x", "y"].iter().map(|s| phrase(s)).collect();
        let [inside, _] = lexicon_buckets(&p, &golds, &lex, opts).unwrap();
        assert_eq!(inside.f1_at_3, Some(overall.at(3).unwrap().f1));
    }

    #[test]
    fn csv_has_one_row_per_cutoff_and_bucket() {
        let golds = [doc("d", &["a"])];
        let r = evaluate(&[preds("d", &["a"])], &golds, &[1, 3, 5], EvalOptions::default()).unwrap();
        assert_eq!(r.to_csv().lines().count(), 1 + 3 + 5);
    }
}
