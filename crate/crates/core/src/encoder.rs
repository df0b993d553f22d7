//! Token embedding providers.
//!
//! A provider turns a document of `n` tokens into an `n × d` matrix. The
//! [`LookupProvider`] is a trainable static table; the [`FileProvider`] replays
//! per-document vectors computed elsewhere (for example by a pretrained
//! contextual encoder) from an `embjsonl` file and is frozen.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const INIT_RANGE: f64 = 0.05;

pub trait EmbeddingProvider: Sync {
    fn dim(&self) -> usize;

    fn trainable(&self) -> bool;

    /// One row per token, in token order.
    fn encode(&self, doc: &Document) -> Result<Matrix>;
}

/// Vocabulary lookup table. Row 0 is shared by all out-of-vocabulary tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupProvider {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    table: Matrix,
}

impl LookupProvider {
    /// Build a table from explicit rows. `tokens[i]` names row `i + 1`.
    pub fn from_parts(tokens: Vec<String>, table: Matrix) -> Result<Self> {
        if table.rows() != tokens.len() + 1 {
            return Err(Error::Shape(format!(
                "lookup table has {} rows for a vocabulary of {}",
                table.rows(),
                tokens.len()
            )));
        }
        if table.cols() == 0 {
            return Err(Error::Config("embedding dim must be at least 1".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i + 1).is_some() {
                return Err(Error::Shape(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(LookupProvider { tokens, index, table })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.tokens
    }

    pub fn row_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn rows_for(&self, doc: &Document) -> Vec<usize> {
        doc.tokens.iter().map(|t| self.row_of(t)).collect()
    }

    pub fn table(&self) -> &Matrix {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut Matrix {
        &mut self.table
    }
}

/// Seeded uniform initialization in `[-0.05, 0.05]`. The vocabulary is sorted
/// so the table does not depend on iteration order of the input.
pub fn init_lookup<I, S>(vocab: I, dim: usize, seed: u64) -> Result<LookupProvider>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    if dim == 0 {
        return Err(Error::Config("embedding dim must be at least 1".into()));
    }
    let tokens: Vec<String> = vocab
        .into_iter()
        .map(Into::into)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rows = tokens.len() + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * dim)
        .map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE))
        .collect();
    LookupProvider::from_parts(tokens, Matrix::from_vec(rows, dim, data))
}

/// Every distinct token of a document collection.
pub fn vocabulary_of<'a>(docs: impl IntoIterator<Item = &'a Document>) -> BTreeSet<String> {
    docs.into_iter().flat_map(|d| d.tokens.iter().cloned()).collect()
}

impl EmbeddingProvider for LookupProvider {
    fn dim(&self) -> usize {
        self.table.cols()
    }

    fn trainable(&self) -> bool {
        true
    }

    fn encode(&self, doc: &Document) -> Result<Matrix> {
        let d = self.dim();
        let mut out = Matrix::zeros(doc.tokens.len(), d);
        for (i, row) in self.rows_for(doc).into_iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.table.row(row));
        }
        Ok(out)
    }
}

/// One record of an `embjsonl` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl EmbeddingRecord {
    pub fn from_matrix(id: impl Into<String>, m: &Matrix) -> Self {
        EmbeddingRecord {
            id: id.into(),
            dim: m.cols(),
            vectors: (0..m.rows()).map(|i| m.row(i).to_vec()).collect(),
        }
    }

    fn into_matrix(self) -> std::result::Result<Matrix, String> {
        if self.dim == 0 {
            return Err("dim must be at least 1".into());
        }
        let n = self.vectors.len();
        let mut data = Vec::with_capacity(n * self.dim);
        for (i, v) in self.vectors.into_iter().enumerate() {
            if v.len() != self.dim {
                return Err(format!("vector {i} has length {} but dim is {}", v.len(), self.dim));
            }
            data.extend(v);
        }
        Ok(Matrix::from_vec(n, self.dim, data))
    }
}

/// Precomputed per-document embeddings. Records whose shape is inconsistent
/// are kept as errors so that only the affected document fails.
#[derive(Debug, Clone)]
pub struct FileProvider {
    dim: usize,
    records: HashMap<String, std::result::Result<Matrix, String>>,
}

impl FileProvider {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut dim = None;
        let mut records = HashMap::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingRecord = serde_json::from_str(&line)
                .map_err(|e| Error::record(path, idx + 1, format!("invalid embedding record: {e}")))?;
            let id = rec.id.clone();
            let expected = *dim.get_or_insert(rec.dim);
            let entry = if rec.dim != expected {
                Err(format!("dim {} differs from file dim {expected}", rec.dim))
            } else {
                rec.into_matrix()
            };
            if records.insert(id.clone(), entry).is_some() {
                return Err(Error::record(path, idx + 1, format!("duplicate embedding id {id:?}")));
            }
        }
        Ok(FileProvider {
            dim: dim.unwrap_or(0),
            records,
        })
    }

    pub fn from_records(records: impl IntoIterator<Item = (String, Matrix)>) -> Result<Self> {
        let mut dim = None;
        let mut map = HashMap::new();
        for (id, m) in records {
            if *dim.get_or_insert(m.cols()) != m.cols() {
                return Err(Error::Shape(format!("record {id:?} has dim {}", m.cols())));
            }
            map.insert(id, Ok(m));
        }
        Ok(FileProvider {
            dim: dim.unwrap_or(0),
            records: map,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Check every document has a well-formed record of matching length.
    pub fn validate(&self, docs: &[Document]) -> Result<()> {
        docs.iter().try_for_each(|d| self.encode(d).map(drop))
    }
}

impl EmbeddingProvider for FileProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn trainable(&self) -> bool {
        false
    }

    fn encode(&self, doc: &Document) -> Result<Matrix> {
        match self.records.get(&doc.id) {
            None => Err(Error::document(&doc.id, "no embedding record")),
            Some(Err(msg)) => Err(Error::document(&doc.id, format!("malformed embedding record: {msg}"))),
            Some(Ok(m)) if m.rows() != doc.tokens.len() => Err(Error::document(
                &doc.id,
                format!("embedding record has {} vectors for {} tokens", m.rows(), doc.tokens.len()),
            )),
            Some(Ok(m)) => Ok(m.clone()),
        }
    }
}

pub fn write_embjsonl<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = (&'a str, &'a Matrix)>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (id, m) in records {
        if m.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                doc_id: id.to_string(),
                tensor: "embedding record".into(),
            });
        }
        let line = serde_json::to_string(&EmbeddingRecord::from_matrix(id, m))
            .map_err(|e| Error::Internal(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Strict validator: every record parses, has a consistent dim, and every
/// vector has length `dim`. Returns the record count.
pub fn validate_embjsonl(path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let provider = FileProvider::load(path)?;
    let mut ids: Vec<&String> = provider.records.keys().collect();
    ids.sort();
    for id in ids {
        if let Err(msg) = &provider.records[id] {
            return Err(Error::document(id, msg.clone()));
        }
    }
    Ok(provider.len())
}
