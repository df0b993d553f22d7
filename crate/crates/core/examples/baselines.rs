//! TF-IDF and TextRank over a small English corpus.

use jkpe::baselines::{textrank_extract, tfidf_extract, word_ranks, IdfTable, TextRankConfig};
use jkpe::corpus::{tokenize, Document};

const TEXTS: [&str; 4] = [
    "Compatibility of systems of linear constraints over the set of natural numbers. \
     Criteria of compatibility of a system of linear Diophantine equations are considered.",
    "Keyphrase extraction assigns a document the phrases that best summarize it. \
     Supervised keyphrase extraction learns from labeled documents.",
    "Graph ranking methods such as PageRank score the vertices of a graph by random walks.",
    "Linear Diophantine equations have integer solutions under divisibility conditions.",
];

fn main() -> jkpe::Result<()> {
    let docs: Vec<Document> = TEXTS
        .iter()
        .enumerate()
        .map(|(i, t)| Document::new(format!("doc{i}"), tokenize(t), vec![]))
        .collect();
    let idf = IdfTable::build(&docs);
    let tr = TextRankConfig::default();
    for doc in &docs[..2] {
        println!("{}", doc.id);
        let tfidf: Vec<_> = tfidf_extract(doc, &idf, 3, 5)?.into_iter().map(|p| p.surface).collect();
        let textrank: Vec<_> = textrank_extract(doc, &tr, 5)?.into_iter().map(|p| p.surface).collect();
        println!("  tfidf:    {tfidf:?}");
        println!("  textrank: {textrank:?}");
        let ranks = word_ranks(doc, &tr);
        println!("  rank mass {:.9}", ranks.values().sum::<f64>());
    }
    Ok(())
}
