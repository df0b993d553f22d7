//! Top-N extraction and the prediction JSON-lines format.
//!
//! A prediction file starts with a header line
//! `{"format":"jkpe-predictions","version":1}` followed by one line per
//! document, either `{"id", "predictions": [{"rank", "phrase", "score"}]}` or
//! `{"id", "error"}` when that document could not be processed.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::model::{forward, External, ModelParams, PhraseGroup};

pub const PREDICTION_FORMAT: &str = "jkpe-predictions";
pub const PREDICTION_VERSION: u32 = 1;
pub const DEFAULT_TOP_N: usize = 5;

/// Documents handled per parallel chunk in batch extraction.
const BATCH_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub rank: usize,
    pub surface: String,
    pub score: f64,
    pub first_position: usize,
    pub k: usize,
}

/// Which head orders the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RankBy {
    /// Max-pooled informativeness scores.
    #[default]
    Score,
    /// Max-pooled chunking logits, for models trained on chunking alone.
    Chunk,
}

impl std::str::FromStr for RankBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "score" => Ok(RankBy::Score),
            "chunk" => Ok(RankBy::Chunk),
            other => Err(Error::Config(format!("unknown ranking head {other:?}"))),
        }
    }
}

/// Descending score, then earliest occurrence, then shorter, then lexicographic.
pub fn compare_candidates(a: &PhraseGroup, b: &PhraseGroup) -> Ordering {
    b.global
        .total_cmp(&a.global)
        .then(a.first_position.cmp(&b.first_position))
        .then(a.k.cmp(&b.k))
        .then_with(|| a.surface.cmp(&b.surface))
}

/// Sort groups and keep the best `n`.
pub fn rank_groups(mut groups: Vec<PhraseGroup>, n: usize) -> Vec<Prediction> {
    groups.sort_by(compare_candidates);
    groups
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(i, g)| Prediction {
            rank: i + 1,
            surface: g.surface,
            score: g.global,
            first_position: g.first_position,
            k: g.k,
        })
        .collect()
}

pub fn extract(doc: &Document, params: &ModelParams, external: External<'_>, n: usize, rank_by: RankBy) -> Result<Vec<Prediction>> {
    if n == 0 {
        return Err(Error::Config("top N must be at least 1".into()));
    }
    if doc.tokens.is_empty() {
        return Ok(Vec::new());
    }
    let fp = forward(doc, params, external)?;
    let groups = match rank_by {
        RankBy::Score => fp.score_groups()?,
        RankBy::Chunk => fp.chunk_groups()?,
    };
    Ok(rank_groups(groups, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPhrase {
    pub rank: usize,
    pub phrase: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub predictions: Vec<ScoredPhrase>,
}

impl PredictionRecord {
    pub fn new(id: impl Into<String>, preds: &[Prediction]) -> Self {
        PredictionRecord {
            id: id.into(),
            predictions: preds
                .iter()
                .map(|p| ScoredPhrase {
                    rank: p.rank,
                    phrase: p.surface.clone(),
                    score: p.score,
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct Header<'a> {
    format: &'a str,
    version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub id: String,
    pub error: String,
}

pub struct PredictionWriter<W: Write> {
    out: W,
}

impl PredictionWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        PredictionWriter::new(BufWriter::new(file))
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<prediction output>", e)
}

impl<W: Write> PredictionWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        let header = serde_json::to_string(&Header {
            format: PREDICTION_FORMAT,
            version: PREDICTION_VERSION,
        })
        .map_err(|e| Error::Internal(e.to_string()))?;
        writeln!(out, "{header}").map_err(io_err)?;
        Ok(PredictionWriter { out })
    }

    pub fn write(&mut self, record: &PredictionRecord) -> Result<()> {
        if let Some(p) = record.predictions.iter().find(|p| !p.score.is_finite()) {
            return Err(Error::NonFinite {
                doc_id: record.id.clone(),
                tensor: format!("score of {:?}", p.phrase),
            });
        }
        let line = serde_json::to_string(record).map_err(|e| Error::Internal(e.to_string()))?;
        writeln!(self.out, "{line}").map_err(io_err)
    }

    pub fn write_error(&mut self, id: &str, error: &str) -> Result<()> {
        let line = serde_json::to_string(&ErrorRecord {
            id: id.to_string(),
            error: error.to_string(),
        })
        .map_err(|e| Error::Internal(e.to_string()))?;
        writeln!(self.out, "{line}").map_err(io_err)
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(io_err)?;
        Ok(self.out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct BatchSummary {
    pub documents: usize,
    pub failed: usize,
}

/// Apply `predict` to every document, writing records in input order. Work is
/// parallel within fixed-size chunks, so memory stays bounded by the chunk.
pub fn run_batch<I, F, W>(docs: I, predict: F, writer: &mut PredictionWriter<W>) -> Result<BatchSummary>
where
    I: IntoIterator<Item = Result<Document>>,
    F: Fn(&Document) -> Result<Vec<Prediction>> + Sync,
    W: Write,
{
    let mut summary = BatchSummary::default();
    let mut iter = docs.into_iter();
    loop {
        let chunk: Vec<Document> = iter.by_ref().take(BATCH_CHUNK).collect::<Result<_>>()?;
        if chunk.is_empty() {
            return Ok(summary);
        }
        let results: Vec<Result<Vec<Prediction>>> = chunk.par_iter().map(&predict).collect();
        for (doc, result) in chunk.iter().zip(results) {
            summary.documents += 1;
            match result {
                Ok(preds) => writer.write(&PredictionRecord::new(&doc.id, &preds))?,
                Err(e) => {
                    summary.failed += 1;
                    writer.write_error(&doc.id, &e.to_string())?;
                }
            }
        }
    }
}

pub fn extract_batch<I, W>(
    docs: I,
    params: &ModelParams,
    external: External<'_>,
    n: usize,
    rank_by: RankBy,
    writer: &mut PredictionWriter<W>,
) -> Result<BatchSummary>
where
    I: IntoIterator<Item = Result<Document>>,
    W: Write,
{
    run_batch(docs, |doc| extract(doc, params, external, n, rank_by), writer)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionFile {
    pub records: Vec<PredictionRecord>,
    pub errors: Vec<ErrorRecord>,
}

fn check_record(rec: &PredictionRecord) -> std::result::Result<(), String> {
    let mut seen = std::collections::HashSet::new();
    for (i, p) in rec.predictions.iter().enumerate() {
        if p.rank != i + 1 {
            return Err(format!("rank {} at position {}", p.rank, i + 1));
        }
        if !seen.insert(p.phrase.as_str()) {
            return Err(format!("duplicate phrase {:?}", p.phrase));
        }
        if i > 0 && p.score > rec.predictions[i - 1].score {
            return Err(format!("score increases at rank {}", p.rank));
        }
    }
    Ok(())
}

/// Read and validate a prediction file: header present, ranks contiguous
/// from 1, scores nonincreasing, phrases distinct.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<PredictionFile> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = PredictionFile::default();
    let mut header_seen = false;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| Error::record(path, line_no, format!("invalid JSON: {e}")))?;
        if !header_seen {
            let format = value.get("format").and_then(Value::as_str);
            let version = value.get("version").and_then(Value::as_u64);
            if format != Some(PREDICTION_FORMAT) || version != Some(PREDICTION_VERSION as u64) {
                return Err(Error::record(path, line_no, "missing or unsupported prediction header"));
            }
            header_seen = true;
            continue;
        }
        if value.get("error").is_some() {
            let rec: ErrorRecord = serde_json::from_value(value)
                .map_err(|e| Error::record(path, line_no, e.to_string()))?;
            out.errors.push(rec);
            continue;
        }
        let rec: PredictionRecord =
            serde_json::from_value(value).map_err(|e| Error::record(path, line_no, e.to_string()))?;
        check_record(&rec).map_err(|m| Error::record(path, line_no, m))?;
        out.records.push(rec);
    }
    if !header_seen {
        return Err(Error::record(path, 1, "missing prediction header"));
    }
    Ok(out)
}

pub fn validate_predictions(path: impl AsRef<Path>) -> Result<usize> {
    let f = read_predictions(path)?;
    Ok(f.records.len() + f.errors.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::init_lookup;
    use crate::model::ModelShape;

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, text.split_whitespace().map(String::from).collect(), vec![])
    }

    fn model(tokens: &[&str]) -> ModelParams {
        let lookup = init_lookup(tokens.iter().copied(), 4, 1).unwrap();
        ModelParams::init(ModelShape { k_max: 5, d: 4, d_out: 4 }, Some(lookup), 2).unwrap()
    }

    #[test]
    fn underfull_and_empty() {
        let p = model(&["a"]);
        let preds = extract(&doc("d", "a a"), &p, None, 5, RankBy::Score).unwrap();
        assert_eq!(preds.len(), 2);
        assert!(extract(&Document::new("e", vec![], vec![]), &p, None, 5, RankBy::Score)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn constant_head_falls_back_to_tie_breakers() {
        let mut p = model(&["a", "b", "c"]);
        p.score.weight.fill(0.0);
        let d = doc("d", "c b a b");
        let preds = extract(&d, &p, None, 20, RankBy::Score).unwrap();
        let surfaces: Vec<&str> = preds.iter().map(|p| p.surface.as_str()).collect();
        assert_eq!(
            surfaces,
            ["c", "c b", "c b a", "c b a b", "b", "b a", "b a b", "a", "a b"]
        );
        assert_eq!(preds, extract(&d, &p, None, 20, RankBy::Score).unwrap());
    }

    #[test]
    fn earlier_first_occurrence_wins_ties() {
        let g = |surface: &str, pos: usize| PhraseGroup {
            surface: surface.into(),
            k: 1,
            occurrences: vec![0],
            localized: vec![1.0],
            global: 1.0,
            argmax: 0,
            label: false,
            first_position: pos,
        };
        let ranked = rank_groups(vec![g("late", 7), g("early", 3)], 5);
        assert_eq!(ranked[0].surface, "early");
        assert_eq!(ranked[1].rank, 2);
    }

    #[test]
    fn prediction_file_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let rec = PredictionRecord {
            id: "d".into(),
            predictions: vec![
                ScoredPhrase { rank: 1, phrase: "a b".into(), score: 0.1 + 0.2 },
                ScoredPhrase { rank: 2, phrase: "c".into(), score: -1e-300 },
            ],
        };
        let mut w = PredictionWriter::create(&path).unwrap();
        w.write(&rec).unwrap();
        w.write_error("bad", "boom").unwrap();
        w.finish().unwrap();
        let f = read_predictions(&path).unwrap();
        assert_eq!(f.records, vec![rec]);
        assert_eq!(f.errors.len(), 1);
        assert_eq!(validate_predictions(&path).unwrap(), 2);

        std::fs::write(&path, "{\"format\":\"jkpe-predictions\",\"version\":1}\n{\"id\":\"d\",\"predictions\":[{\"rank\":2,\"phrase\":\"a\",\"score\":0}]}\n").unwrap();
        assert!(read_predictions(&path).is_err());
        std::fs::write(&path, "").unwrap();
        assert!(read_predictions(&path).is_err());
    }

    #[test]
    fn empty_batch_writes_only_the_header() {
        let p = model(&["a"]);
        let mut w = PredictionWriter::new(Vec::new()).unwrap();
        let s = extract_batch(std::iter::empty(), &p, None, 5, RankBy::Score, &mut w).unwrap();
        assert_eq!(s, BatchSummary::default());
        let bytes = w.finish().unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "{\"format\":\"jkpe-predictions\",\"version\":1}\n");
    }
}
