//! Loading a corpus, enumerating n-gram candidates and their exact-match labels.

use jkpe::corpus::{corpus_stats, labeled_spans, load_corpus, span_count, CorpusFormat};

fn main() -> jkpe::Result<()> {
    let path = std::env::temp_dir().join("jkpe-corpus-example.jsonl");
    std::fs::write(
        &path,
        concat!(
            r#"{"id":"a","text":"Deep keyphrase generation. Keyphrase generation with copy.","keyphrases":["keyphrase generation"]}"#,
            "\n",
            r#"{"id":"b","text":"   ","keyphrases":[]}"#,
            "\n",
        ),
    )
    .expect("write corpus");
    let corpus = load_corpus(&path, CorpusFormat::Simple, 512)?;
    println!("rejected: {:?}", corpus.rejected);

    let doc = &corpus.documents[0];
    let spans = labeled_spans(doc, 3);
    assert_eq!(spans.len(), span_count(doc.tokens.len(), 3));
    for s in spans.iter().filter(|s| s.label) {
        println!("positive at {}: {:?}", s.start, s.surface);
    }
    println!("{}", serde_json::to_string_pretty(&corpus_stats(&corpus)).expect("json"));
    Ok(())
}
