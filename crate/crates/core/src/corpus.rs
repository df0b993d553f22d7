//! Corpus ingestion: JSON-lines readers, tokenization, n-gram candidates and
//! exact-match labels.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_SEQ_LEN: usize = 512;

/// A tokenized document and its gold keyphrases.
///
/// Tokens are lowercased words; every gold phrase is a non-empty token
/// sequence normalized the same way as the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    pub gold: Vec<Vec<String>>,
}

impl Document {
    pub fn new(id: impl Into<String>, tokens: Vec<String>, gold: Vec<Vec<String>>) -> Self {
        Document {
            id: id.into(),
            tokens,
            gold: dedup_phrases(gold),
        }
    }

    /// Documents without any gold phrase are kept for evaluation and the
    /// chunking loss but never contribute ranking pairs.
    pub fn usable_for_ranking(&self) -> bool {
        !self.gold.is_empty()
    }

    pub fn gold_surfaces(&self) -> Vec<String> {
        self.gold.iter().map(|p| p.join(" ")).collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn dedup_phrases(phrases: Vec<Vec<String>>) -> Vec<Vec<String>> {
    let mut seen = HashSet::new();
    phrases
        .into_iter()
        .filter(|p| !p.is_empty())
        .filter(|p| seen.insert(p.join(" ")))
        .collect()
}

/// One occurrence of an n-gram: `tokens[start..start + k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GramSpan {
    pub start: usize,
    pub k: usize,
    pub surface: String,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorpusFormat {
    /// `{"url", "text", "KeyPhrases": [[token, ...], ...]}`
    #[serde(rename = "jsonl-openkp")]
    OpenKp,
    /// `{"id", "text", "keyphrases": ["space separated", ...]}`
    #[serde(rename = "jsonl-simple")]
    Simple,
}

impl CorpusFormat {
    /// Guess the format from the first non-blank record of a file.
    pub fn detect(path: &Path) -> Result<CorpusFormat> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(&line)
                .map_err(|e| Error::record(path, idx + 1, format!("invalid JSON: {e}")))?;
            return Ok(if value.get("KeyPhrases").is_some() || value.get("url").is_some() {
                CorpusFormat::OpenKp
            } else {
                CorpusFormat::Simple
            });
        }
        // Empty files parse the same either way.
        Ok(CorpusFormat::OpenKp)
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl-openkp" | "openkp" => Ok(CorpusFormat::OpenKp),
            "jsonl-simple" | "simple" => Ok(CorpusFormat::Simple),
            other => Err(Error::Config(format!("unknown corpus format {other:?}"))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::OpenKp => "jsonl-openkp",
            CorpusFormat::Simple => "jsonl-simple",
        })
    }
}

fn is_edge_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'..='\u{201F}' | '\u{2010}'..='\u{2015}' | '\u{2026}' | '\u{00AB}' | '\u{00BB}'
                | '\u{00BF}' | '\u{00A1}' | '\u{00B7}' | '\u{3001}' | '\u{3002}'
        )
}

/// Lowercase, split on Unicode whitespace, trim punctuation from both ends of
/// every token and drop tokens left empty.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| raw.to_lowercase())
        .filter_map(|t| {
            let trimmed = t.trim_matches(is_edge_punctuation);
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_string())
            }
        })
        .collect()
}

/// Normalize a phrase given as a single string.
pub fn normalize_phrase(phrase: &str) -> Vec<String> {
    tokenize(phrase)
}

/// Outcome of reading one corpus line.
#[derive(Debug, Clone)]
pub enum Loaded {
    Document(Document),
    /// The text tokenized to nothing; the record is skipped.
    Rejected { line: usize, id: String },
}

/// Streaming reader over a corpus file. Blank lines are ignored.
pub struct CorpusReader {
    path: PathBuf,
    format: CorpusFormat,
    max_seq_len: usize,
    lines: std::iter::Enumerate<std::io::Lines<BufReader<File>>>,
}

impl CorpusReader {
    pub fn open(path: impl AsRef<Path>, format: CorpusFormat, max_seq_len: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if max_seq_len == 0 {
            return Err(Error::Config("max_seq_len must be at least 1".into()));
        }
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(CorpusReader {
            path,
            format,
            max_seq_len,
            lines: BufReader::new(file).lines().enumerate(),
        })
    }

    fn parse(&self, line_no: usize, line: &str) -> Result<Loaded> {
        let value: Value = serde_json::from_str(line)
            .map_err(|e| Error::record(&self.path, line_no, format!("invalid JSON: {e}")))?;
        let err = |msg: String| Error::record(&self.path, line_no, msg);
        let (id_key, phrases_key) = match self.format {
            CorpusFormat::OpenKp => ("url", "KeyPhrases"),
            CorpusFormat::Simple => ("id", "keyphrases"),
        };
        let id = value
            .get(id_key)
            .and_then(Value::as_str)
            .ok_or_else(|| err(format!("missing or non-string field {id_key:?}")))?;
        let text = value
            .get("text")
            .and_then(Value::as_str)
            .ok_or_else(|| err("missing or non-string field \"text\"".into()))?;
        let raw = value
            .get(phrases_key)
            .and_then(Value::as_array)
            .ok_or_else(|| err(format!("missing or non-array field {phrases_key:?}")))?;

        let mut gold = Vec::with_capacity(raw.len());
        for item in raw {
            let phrase = match (self.format, item) {
                (CorpusFormat::OpenKp, Value::Array(words)) => {
                    let mut joined = Vec::with_capacity(words.len());
                    for w in words {
                        joined.push(w.as_str().ok_or_else(|| {
                            err(format!("{phrases_key:?} entries must be arrays of strings"))
                        })?);
                    }
                    normalize_phrase(&joined.join(" "))
                }
                (CorpusFormat::Simple, Value::String(s)) => normalize_phrase(s),
                _ => {
                    return Err(err(format!(
                        "unexpected element in {phrases_key:?}: {item}"
                    )))
                }
            };
            gold.push(phrase);
        }

        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            return Ok(Loaded::Rejected {
                line: line_no,
                id: id.to_string(),
            });
        }
        tokens.truncate(self.max_seq_len);
        Ok(Loaded::Document(Document::new(id, tokens, gold)))
    }
}

impl Iterator for CorpusReader {
    type Item = Result<Loaded>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let (idx, line) = self.lines.next()?;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            if line.trim().is_empty() {
                continue;
            }
            return Some(self.parse(idx + 1, &line));
        }
    }
}

/// A fully loaded corpus, including the records rejected for being empty.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub rejected: Vec<(usize, String)>,
}

/// Load a whole corpus file in file order.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat, max_seq_len: usize) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for item in CorpusReader::open(path, format, max_seq_len)? {
        match item? {
            Loaded::Document(doc) => corpus.documents.push(doc),
            Loaded::Rejected { line, id } => corpus.rejected.push((line, id)),
        }
    }
    Ok(corpus)
}

#[derive(Serialize)]
struct OpenKpRecord<'a> {
    url: &'a str,
    text: String,
    #[serde(rename = "KeyPhrases")]
    key_phrases: &'a [Vec<String>],
}

#[derive(Serialize)]
struct SimpleRecord<'a> {
    id: &'a str,
    text: String,
    keyphrases: Vec<String>,
}

/// Write documents back out; text is the space-joined token sequence, so
/// reading the file again yields identical documents.
pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document], format: CorpusFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        let text = doc.tokens.join(" ");
        let line = match format {
            CorpusFormat::OpenKp => serde_json::to_string(&OpenKpRecord {
                url: &doc.id,
                text,
                key_phrases: &doc.gold,
            }),
            CorpusFormat::Simple => serde_json::to_string(&SimpleRecord {
                id: &doc.id,
                text,
                keyphrases: doc.gold_surfaces(),
            }),
        }
        .map_err(|e| Error::Internal(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Number of spans [`enumerate_ngrams`] produces for `n` tokens.
pub fn span_count(n: usize, k_max: usize) -> usize {
    (1..=k_max.min(n)).map(|k| n - k + 1).sum()
}

/// All n-grams of length `1..=k_max`, ordered by `(k, start)`, unlabeled.
pub fn enumerate_ngrams(doc: &Document, k_max: usize) -> Vec<GramSpan> {
    enumerate_tokens(&doc.tokens, k_max)
}

pub(crate) fn enumerate_tokens(tokens: &[String], k_max: usize) -> Vec<GramSpan> {
    let n = tokens.len();
    let mut spans = Vec::with_capacity(span_count(n, k_max));
    for k in 1..=k_max.min(n) {
        for start in 0..=n - k {
            spans.push(GramSpan {
                start,
                k,
                surface: tokens[start..start + k].join(" "),
                label: false,
            });
        }
    }
    spans
}

/// Mark every span whose surface equals a gold phrase.
pub fn label_spans(mut spans: Vec<GramSpan>, gold: &[Vec<String>]) -> Vec<GramSpan> {
    let gold: HashSet<String> = gold.iter().map(|p| p.join(" ")).collect();
    for span in &mut spans {
        span.label = gold.contains(&span.surface);
    }
    spans
}

/// Enumerate and label in one go.
pub fn labeled_spans(doc: &Document, k_max: usize) -> Vec<GramSpan> {
    label_spans(enumerate_ngrams(doc, k_max), &doc.gold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenCountSummary {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub gold_phrases: usize,
    /// Gold phrase token length → count.
    pub gold_length_histogram: BTreeMap<usize, usize>,
    pub tokens: TokenCountSummary,
    /// Share of gold phrases found verbatim in their (truncated) document.
    pub present_fraction: f64,
    pub rejected: usize,
    pub unusable_for_ranking: usize,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let docs = &corpus.documents;
    let mut histogram = BTreeMap::new();
    let mut present = 0usize;
    let mut total = 0usize;
    for doc in docs {
        let surfaces: HashSet<String> = doc
            .gold
            .iter()
            .map(|p| p.len())
            .collect::<HashSet<_>>()
            .into_iter()
            .flat_map(|k| (0..doc.tokens.len().saturating_sub(k - 1)).map(move |i| (i, k)))
            .map(|(i, k)| doc.tokens[i..i + k].join(" "))
            .collect();
        for phrase in &doc.gold {
            *histogram.entry(phrase.len()).or_insert(0) += 1;
            total += 1;
            if surfaces.contains(&phrase.join(" ")) {
                present += 1;
            }
        }
    }
    let mut lengths: Vec<usize> = docs.iter().map(Document::len).collect();
    lengths.sort_unstable();
    let tokens = if lengths.is_empty() {
        TokenCountSummary {
            min: 0,
            max: 0,
            mean: 0.0,
            median: 0.0,
        }
    } else {
        let m = lengths.len();
        let median = if m % 2 == 1 {
            lengths[m / 2] as f64
        } else {
            (lengths[m / 2 - 1] + lengths[m / 2]) as f64 / 2.0
        };
        TokenCountSummary {
            min: lengths[0],
            max: lengths[m - 1],
            mean: lengths.iter().sum::<usize>() as f64 / m as f64,
            median,
        }
    };
    CorpusStats {
        documents: docs.len(),
        gold_phrases: total,
        gold_length_histogram: histogram,
        tokens,
        present_fraction: if total == 0 { 0.0 } else { present as f64 / total as f64 },
        rejected: corpus.rejected.len(),
        unusable_for_ranking: docs.iter().filter(|d| !d.usable_for_ranking()).count(),
    }
}
