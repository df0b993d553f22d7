//! Unsupervised baselines: TF-IDF and TextRank.
//!
//! Both share the neural model's candidate enumeration, restricted to n-grams
//! made only of content words (no stopwords, at least one alphanumeric
//! character per token), and both rank with [`compare_candidates`].
//!
//! [`compare_candidates`]: crate::infer::compare_candidates

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::{enumerate_ngrams, Document, GramSpan};
use crate::error::{Error, Result};
use crate::infer::{rank_groups, Prediction};
use crate::model::group_phrases;

const STOPWORDS_EN: &str = include_str!("../data/stopwords_en.txt");

pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_EN.lines().map(str::trim).filter(|w| !w.is_empty()).collect())
}

pub fn is_content_word(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric) && !stopwords().contains(token)
}

/// N-grams of length `1..=k_max` containing no stopword or punctuation token.
pub fn content_candidates(doc: &Document, k_max: usize) -> Vec<GramSpan> {
    let content: Vec<bool> = doc.tokens.iter().map(|t| is_content_word(t)).collect();
    enumerate_ngrams(doc, k_max)
        .into_iter()
        .filter(|s| content[s.start..s.start + s.k].iter().all(|&c| c))
        .collect()
}

/// Smoothed inverse document frequency, `ln((N + s) / (df + s)) + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    pub documents: usize,
    pub smoothing: f64,
    pub df: BTreeMap<String, usize>,
}

impl IdfTable {
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Self {
        let mut df = BTreeMap::new();
        let mut documents = 0;
        for doc in docs {
            documents += 1;
            let unique: HashSet<&str> = doc.tokens.iter().map(String::as_str).collect();
            for t in unique {
                *df.entry(t.to_string()).or_insert(0) += 1;
            }
        }
        IdfTable {
            documents,
            smoothing: 1.0,
            df,
        }
    }

    /// Unseen tokens get the largest idf.
    pub fn idf(&self, token: &str) -> f64 {
        let df = self.df.get(token).copied().unwrap_or(0) as f64;
        ((self.documents as f64 + self.smoothing) / (df + self.smoothing)).ln() + 1.0
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).expect("idf table serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: IdfTable = serde_json::from_str(&text).map_err(|e| Error::record(path, 1, e.to_string()))?;
        if !(table.smoothing > 0.0) {
            return Err(Error::record(path, 1, "smoothing must be positive"));
        }
        Ok(table)
    }
}

/// Mean over the phrase's tokens of `tf(token in doc) * idf(token)`.
pub fn tfidf_extract(doc: &Document, idf: &IdfTable, k_max: usize, n: usize) -> Result<Vec<Prediction>> {
    check_n(n)?;
    let mut tf: HashMap<&str, f64> = HashMap::new();
    for t in &doc.tokens {
        *tf.entry(t).or_insert(0.0) += 1.0;
    }
    let weight: Vec<f64> = doc.tokens.iter().map(|t| tf[t.as_str()] * idf.idf(t)).collect();
    let spans = content_candidates(doc, k_max);
    let scores: Vec<f64> = spans
        .iter()
        .map(|s| weight[s.start..s.start + s.k].iter().sum::<f64>() / s.k as f64)
        .collect();
    Ok(rank_groups(group_phrases(&spans, &scores)?, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextRankConfig {
    /// Tokens within `window` positions of each other are linked.
    pub window: usize,
    pub damping: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub k_max: usize,
}

impl Default for TextRankConfig {
    fn default() -> Self {
        TextRankConfig {
            window: 2,
            damping: 0.85,
            max_iterations: 50,
            tolerance: 1e-6,
            k_max: 5,
        }
    }
}

/// PageRank over an undirected, unweighted graph given as sorted adjacency
/// lists. Scores sum to 1. Isolated nodes keep only the teleport mass, which
/// is then renormalized.
pub fn pagerank(adjacency: &[Vec<usize>], damping: f64, max_iterations: usize, tolerance: f64) -> Vec<f64> {
    let n = adjacency.len();
    if n == 0 {
        return Vec::new();
    }
    let mut rank = vec![1.0 / n as f64; n];
    let teleport = (1.0 - damping) / n as f64;
    for _ in 0..max_iterations {
        let mut next = vec![teleport; n];
        for (u, nbrs) in adjacency.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let share = damping * rank[u] / nbrs.len() as f64;
            for &v in nbrs {
                next[v] += share;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta: f64 = next.iter().zip(&rank).map(|(a, b)| (a - b).abs()).sum();
        rank = next;
        if delta < tolerance {
            break;
        }
    }
    rank
}

/// Word ranks of the content-word co-occurrence graph, keyed by token.
pub fn word_ranks(doc: &Document, cfg: &TextRankConfig) -> BTreeMap<String, f64> {
    let mut node: BTreeMap<&str, usize> = BTreeMap::new();
    for t in doc.tokens.iter().filter(|t| is_content_word(t)) {
        node.entry(t).or_insert(0);
    }
    for (i, v) in node.values_mut().enumerate() {
        *v = i;
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); node.len()];
    let ids: Vec<Option<usize>> = doc.tokens.iter().map(|t| node.get(t.as_str()).copied()).collect();
    for i in 0..ids.len() {
        let Some(a) = ids[i] else { continue };
        for j in i + 1..(i + cfg.window).min(ids.len()) {
            if let Some(b) = ids[j] {
                if a != b {
                    adjacency[a].push(b);
                    adjacency[b].push(a);
                }
            }
        }
    }
    for nbrs in &mut adjacency {
        nbrs.sort_unstable();
        nbrs.dedup();
    }
    let rank = pagerank(&adjacency, cfg.damping, cfg.max_iterations, cfg.tolerance);
    node.into_iter().map(|(t, i)| (t.to_string(), rank[i])).collect()
}

/// Phrase score is the sum of its member words' ranks.
pub fn textrank_extract(doc: &Document, cfg: &TextRankConfig, n: usize) -> Result<Vec<Prediction>> {
    check_n(n)?;
    if cfg.window < 2 {
        return Err(Error::Config("TextRank window must be at least 2".into()));
    }
    let ranks = word_ranks(doc, cfg);
    let spans = content_candidates(doc, cfg.k_max);
    let scores: Vec<f64> = spans
        .iter()
        .map(|s| doc.tokens[s.start..s.start + s.k].iter().map(|t| ranks[t.as_str()]).sum())
        .collect();
    Ok(rank_groups(group_phrases(&spans, &scores)?, n))
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("top N must be at least 1".into()));
    }
    Ok(())
}
