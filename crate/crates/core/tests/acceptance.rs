//! Acceptance criteria. Each one prints a single `criterion N: PASS|FAIL`
//! line with the measured values; the process fails if any criterion does.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jkpe::corpus::{Document, GramSpan};
use jkpe::encoder::{validate_embjsonl, write_embjsonl, EmbeddingProvider, FileProvider};
use jkpe::eval::{bucket_f1_at, evaluate, porter_stem, EvalOptions, MatchMode};
use jkpe::infer::{extract, rank_groups, read_predictions, PredictionRecord, PredictionWriter, ScoredPhrase};
use jkpe::matrix::Matrix;
use jkpe::model::{
    chunk_loss, forward, group_phrases, joint_loss, load_checkpoint, rank_loss, save_checkpoint, LossConfig,
    Objective,
};
use jkpe::synth::{generate, SynthConfig};
use jkpe::train::{grad_check, random_instance, train, Preset, TrainConfig};

const CRITERIA: [fn(); 8] = [
    criterion_1_gradient_correctness,
    criterion_2_loss_laws,
    criterion_3_evaluation_oracle,
    criterion_4_porter_vocabulary,
    criterion_5_synthetic_learning,
    criterion_6_ablation_ordering,
    criterion_7_determinism,
    criterion_8_format_round_trips,
];

fn main() {
    let failed = CRITERIA.iter().filter(|c| std::panic::catch_unwind(**c).is_err()).count();
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn verdict(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

fn criterion_1_gradient_correctness() {
    let start = Instant::now();
    let cfg = LossConfig::default();
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    let (mut checked, mut skipped) = (0, 0);
    for seed in 0..20 {
        let (doc, params) = random_instance(seed);
        assert!(doc.len() <= 20);
        assert_eq!((params.shape.d, params.shape.d_out, params.shape.k_max), (8, 8, 3));
        let report = grad_check(&doc, &params, None, 1e-4, 1e-4, &cfg).unwrap();
        worst = worst.max(report.max_rel_err());
        checked += report.tensors.iter().map(|t| t.checked).sum::<usize>();
        skipped += report.tensors.iter().map(|t| t.skipped).sum::<usize>();
        if !report.pass {
            failed.push(seed);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "gradient check",
        failed.is_empty() && checked > 0 && secs < 60.0,
        &format!(
            "20 instances, {checked} coordinates checked, {skipped} kink-adjacent skipped, \
             max rel err {worst:.2e} (< 1e-4), failing seeds {failed:?}, {secs:.2}s (< 60s)"
        ),
    );
}

fn span(surface: &str, start: usize, label: bool) -> GramSpan {
    GramSpan {
        start,
        k: surface.split(' ').count(),
        surface: surface.to_string(),
        label,
    }
}

/// Random spans over a few surfaces with scores on a 0.25 grid, so that hinge
/// arguments land exactly on the margin often.
fn random_scored_spans(rng: &mut ChaCha8Rng) -> (Vec<GramSpan>, Vec<f64>) {
    let surfaces = ["a", "b", "c", "d", "e", "f"];
    let positive: Vec<bool> = surfaces.iter().map(|_| rng.gen_bool(0.3)).collect();
    let n = rng.gen_range(1..12);
    let mut spans = Vec::new();
    let mut scores = Vec::new();
    for i in 0..n {
        let s = rng.gen_range(0..surfaces.len());
        spans.push(span(surfaces[s], i, positive[s]));
        scores.push(rng.gen_range(-8i32..=8) as f64 * 0.25);
    }
    (spans, scores)
}

fn criterion_2_loss_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = Vec::new();
    for case in 0..2000 {
        let (spans, scores) = random_scored_spans(&mut rng);
        let groups = group_phrases(&spans, &scores).unwrap();

        // Max-pool dominance.
        for g in &groups {
            let dominates = g.localized.iter().all(|&s| g.global >= s);
            let attained = g.localized.contains(&g.global);
            if !dominates || !attained {
                violations.push(format!("case {case}: max-pool on {:?}", g.surface));
            }
        }

        // Zero condition.
        let pos: Vec<f64> = groups.iter().filter(|g| g.label).map(|g| g.global).collect();
        let neg: Vec<f64> = groups.iter().filter(|g| !g.label).map(|g| g.global).collect();
        let expect_zero = pos.is_empty()
            || neg.is_empty()
            || pos.iter().cloned().fold(f64::INFINITY, f64::min) >= neg.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
        let loss = rank_loss(&groups, 1.0);
        if (loss == 0.0) != expect_zero {
            violations.push(format!("case {case}: zero condition, loss {loss}"));
        }

        // Shift invariance of the loss and of the ranking.
        let c = rng.gen_range(-4i32..=4) as f64 * 0.5;
        let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
        let shifted_groups = group_phrases(&spans, &shifted).unwrap();
        if (rank_loss(&shifted_groups, 1.0) - loss).abs() > 1e-12 {
            violations.push(format!("case {case}: rank loss not shift invariant"));
        }
        let order = |g: Vec<_>| rank_groups(g, usize::MAX).into_iter().map(|p| p.surface).collect::<Vec<_>>();
        if order(groups.clone()) != order(shifted_groups) {
            violations.push(format!("case {case}: ranking not shift invariant"));
        }
    }

    // Additivity on full forward passes, for every objective.
    let mut worst_additivity = 0.0f64;
    for seed in 0..50 {
        let (doc, params) = random_instance(100 + seed);
        for objective in [Objective::Joint, Objective::Rank, Objective::Chunk] {
            let cfg = LossConfig {
                objective,
                ..LossConfig::default()
            };
            let b = joint_loss(&doc, &params, None, &cfg).unwrap();
            let rel = (b.total - (b.rank + b.chunk)).abs() / b.total.abs().max(f64::MIN_POSITIVE);
            worst_additivity = worst_additivity.max(if b.total == 0.0 { 0.0 } else { rel });
            let fp = forward(&doc, &params, None).unwrap();
            for g in fp.score_groups().unwrap() {
                if g.localized.iter().any(|&s| s > g.global) {
                    violations.push(format!("seed {seed}: max-pool in forward pass"));
                }
            }
        }
    }
    if worst_additivity > 1e-9 {
        violations.push(format!("additivity {worst_additivity:e}"));
    }

    // Hand-derived values.
    let groups = group_phrases(
        &[span("p", 0, true), span("n1", 1, false), span("n2", 2, false)],
        &[0.5, 0.2, -0.3],
    )
    .unwrap();
    let rank_example = rank_loss(&groups, 1.0);
    let rank_oracle = ((1.0f64 - 0.5 + 0.2).max(0.0) + (1.0f64 - 0.5 - 0.3).max(0.0)) / 2.0;
    let chunk_example = chunk_loss(&[span("p", 0, true)], &[0.5]);
    let chunk_oracle = (1.0 + (-0.5f64).exp()).ln();
    if (rank_example - rank_oracle).abs() > 1e-9 || (rank_oracle - 0.45).abs() > 1e-12 {
        violations.push(format!("rank example {rank_example}"));
    }
    if (chunk_example - chunk_oracle).abs() > 1e-9 {
        violations.push(format!("chunk example {chunk_example}"));
    }

    verdict(
        2,
        "loss laws",
        violations.is_empty(),
        &format!(
            "2000 random groupings + 150 forward passes; rank example {rank_example:.12} (0.45), \
             chunk example {chunk_example:.12} ({chunk_oracle:.12}), worst additivity {worst_additivity:.1e}; \
             violations {:?}",
            &violations[..violations.len().min(5)]
        ),
    );
}

/// Maximum bipartite matching between predictions and golds (Kuhn's
/// augmenting paths); `eq` decides which pairs may match.
fn max_matching(preds: &[Vec<String>], golds: &[Vec<String>], eq: &dyn Fn(&[String], &[String]) -> bool) -> usize {
    fn augment(
        p: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &g in &adj[p] {
            if !seen[g] {
                seen[g] = true;
                if owner[g].is_none_or(|q| augment(q, adj, seen, owner)) {
                    owner[g] = Some(p);
                    return true;
                }
            }
        }
        false
    }
    let adj: Vec<Vec<usize>> = preds
        .iter()
        .map(|p| (0..golds.len()).filter(|&g| eq(p, &golds[g])).collect())
        .collect();
    let mut owner = vec![None; golds.len()];
    (0..preds.len())
        .filter(|&p| augment(p, &adj, &mut vec![false; golds.len()], &mut owner))
        .count()
}

/// Document id, gold phrases, and predicted phrases when a record exists.
type OracleDoc = (String, Vec<Vec<String>>, Option<Vec<Vec<String>>>);

fn oracle_metrics(
    docs: &[OracleDoc],
    n: usize,
    stemmed: bool,
    strict: bool,
) -> (f64, f64, f64) {
    let eq = |a: &[String], b: &[String]| {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| if stemmed { porter_stem(x) == porter_stem(y) } else { x == y })
    };
    let (mut ps, mut rs, mut fs) = (0.0, 0.0, 0.0);
    for (_, gold, preds) in docs {
        let top: Vec<Vec<String>> = preds.iter().flatten().take(n).cloned().collect();
        let m = max_matching(&top, gold, &eq) as f64;
        let denom = if strict { n } else { top.len() };
        let p = if denom == 0 { 0.0 } else { m / denom as f64 };
        let r = if gold.is_empty() { 0.0 } else { m / gold.len() as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        ps += p;
        rs += r;
        fs += f;
    }
    let d = docs.len().max(1) as f64;
    (ps / d, rs / d, fs / d)
}

fn criterion_3_evaluation_oracle() {
    const WORDS: [&str; 10] = ["run", "runs", "running", "runner", "cat", "cats", "graph", "graphs", "model", "models"];
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phrase = |rng: &mut ChaCha8Rng| -> Vec<String> {
        (0..rng.gen_range(1..=2)).map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string()).collect()
    };
    let cutoffs = [1, 3, 5, 10];
    let mut comparisons = 0;
    let mut mismatches = Vec::new();
    for corpus_idx in 0..1000 {
        let n_docs = rng.gen_range(1..=10);
        let mut docs = Vec::new();
        for i in 0..n_docs {
            let mut gold: Vec<Vec<String>> = Vec::new();
            for _ in 0..rng.gen_range(0..=6) {
                let p = phrase(&mut rng);
                if !gold.contains(&p) {
                    gold.push(p);
                }
            }
            let preds = rng.gen_bool(0.9).then(|| {
                let mut preds: Vec<Vec<String>> = Vec::new();
                for _ in 0..rng.gen_range(0..=8) {
                    let p = phrase(&mut rng);
                    if !preds.contains(&p) {
                        preds.push(p);
                    }
                }
                preds
            });
            docs.push((format!("doc-{i:02}"), gold, preds));
        }
        let golds: Vec<Document> = docs
            .iter()
            .map(|(id, gold, _)| Document::new(id.clone(), vec!["filler".into()], gold.clone()))
            .collect();
        let mut records: Vec<PredictionRecord> = docs
            .iter()
            .filter_map(|(id, _, preds)| {
                preds.as_ref().map(|preds| PredictionRecord {
                    id: id.clone(),
                    predictions: preds
                        .iter()
                        .enumerate()
                        .map(|(r, p)| ScoredPhrase {
                            rank: r + 1,
                            phrase: p.join(" "),
                            score: -(r as f64),
                        })
                        .collect(),
                })
            })
            .collect();
        records.shuffle(&mut rng);
        docs.sort_by(|a, b| a.0.cmp(&b.0));
        for stemmed in [false, true] {
            for strict in [false, true] {
                let opts = EvalOptions {
                    mode: if stemmed { MatchMode::Stemmed } else { MatchMode::Exact },
                    strict_at_n: strict,
                };
                let report = evaluate(&records, &golds, &cutoffs, opts).unwrap();
                for c in &report.cutoffs {
                    let (p, r, f) = oracle_metrics(&docs, c.n, stemmed, strict);
                    comparisons += 1;
                    if (p, r, f) != (c.precision, c.recall, c.f1) {
                        mismatches.push(format!(
                            "corpus {corpus_idx} n={} stemmed={stemmed} strict={strict}: got {:?} want {:?}",
                            c.n,
                            (c.precision, c.recall, c.f1),
                            (p, r, f)
                        ));
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        3,
        "evaluation oracle",
        mismatches.is_empty() && secs < 30.0,
        &format!(
            "1000 corpora, {comparisons} (P,R,F1) triples compared exactly, {} mismatches {:?}, {secs:.2}s (< 30s)",
            mismatches.len(),
            &mismatches[..mismatches.len().min(3)]
        ),
    );
}

fn criterion_4_porter_vocabulary() {
    let voc = include_str!("data/porter_voc.txt");
    let out = include_str!("data/porter_output.txt");
    let pairs: Vec<(&str, &str)> = voc.lines().zip(out.lines()).collect();
    let wrong: Vec<String> = pairs
        .iter()
        .filter(|(w, s)| porter_stem(w) != *s)
        .map(|(w, s)| format!("{w}->{} (want {s})", porter_stem(w)))
        .collect();
    verdict(
        4,
        "Porter stemmer",
        wrong.is_empty() && pairs.len() == voc.lines().count() && pairs.len() > 20_000,
        &format!(
            "{}/{} words agree; first disagreements {:?}",
            pairs.len() - wrong.len(),
            pairs.len(),
            &wrong[..wrong.len().min(5)]
        ),
    );
}

fn predictions(docs: &[Document], params: &jkpe::model::ModelParams, cfg: &TrainConfig, n: usize) -> Vec<PredictionRecord> {
    docs.iter()
        .map(|d| PredictionRecord::new(&d.id, &extract(d, params, None, n, cfg.rank_by()).unwrap()))
        .collect()
}

fn criterion_5_synthetic_learning() {
    let single_core = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let synth = SynthConfig::default();
    let corpus = generate(&synth).unwrap();
    let cfg = TrainConfig::preset(Preset::Desk);
    let out = single_core.install(|| train(&corpus.train, Some(&corpus.dev), &cfg, None)).unwrap();
    let preds = predictions(&corpus.dev, &out.params, &cfg, 3);
    let report = evaluate(&preds, &corpus.dev, &[1, 3], EvalOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (f1_1, f1_3) = (report.cutoffs[0].f1, report.cutoffs[1].f1);
    let p_at_1 = report.cutoffs[0].precision;

    // With g gold phrases and perfect ranking, F1@1 = 2/(g+1); the generator
    // plants g = golds_per_doc phrases in every document.
    let g = synth.golds_per_doc as f64;
    let f1_1_ceiling = 2.0 / (g + 1.0);
    verdict(
        5,
        "synthetic learning",
        f1_1 >= 0.90 && f1_3 >= 0.80 && secs < 600.0 && cfg.epochs <= 3,
        &format!(
            "{} train / {} dev docs, desk preset, {} epochs on one thread: dev F1@1 {f1_1:.3} (>= 0.90), \
             dev F1@3 {f1_3:.3} (>= 0.80), P@1 {p_at_1:.3}, {secs:.1}s (< 600s); \
             F1@1 ceiling for {g} golds per document is {f1_1_ceiling:.3}",
            corpus.train.len(),
            corpus.dev.len(),
            cfg.epochs
        ),
    );
}

fn criterion_6_ablation_ordering() {
    let corpus = generate(&SynthConfig::default()).unwrap();
    let mut scores = Vec::new();
    for objective in [Objective::Joint, Objective::Rank, Objective::Chunk] {
        let cfg = TrainConfig {
            objective,
            ..TrainConfig::preset(Preset::Desk)
        };
        let out = train(&corpus.train, Some(&corpus.dev), &cfg, None).unwrap();
        let preds = predictions(&corpus.dev, &out.params, &cfg, 3);
        let long = bucket_f1_at(&preds, &corpus.dev, 3, EvalOptions::default(), "3+", |p| p.len() >= 3).unwrap();
        scores.push((objective, long.f1_at_3.expect("long planted phrases exist"), long.documents));
    }
    let (joint, rank, chunk) = (scores[0].1, scores[1].1, scores[2].1);
    verdict(
        6,
        "ablation ordering",
        joint >= rank && rank >= chunk,
        &format!(
            "F1@3 on planted phrases of length >= 3 over {} dev docs: joint {joint:.3} >= rank-only {rank:.3} >= chunk-only {chunk:.3}",
            scores[0].2
        ),
    );
}

fn jkpe(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_jkpe")).args(args).output().expect("run jkpe");
    assert!(
        out.status.success(),
        "jkpe {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn criterion_7_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    jkpe(&["synth", "--seed", "7", "--docs", "60", "--dev-docs", "20", "--out", &d("syn")]);
    let train_file = d("syn/train.jsonl");
    let dev_file = d("syn/dev.jsonl");
    for (run, threads) in [("run1", "1"), ("run2", "4")] {
        jkpe(&[
            "--threads", threads, "train", "--preset", "desk", "--seed", "11", "--corpus", &train_file, "--dev", &dev_file,
            "--out", &d(run),
        ]);
    }
    let ckpt_same = read(&dir.path().join("run1/model.ckpt")) == read(&dir.path().join("run2/model.ckpt"));
    let log_same = read(&dir.path().join("run1/train_log.jsonl")) == read(&dir.path().join("run2/train_log.jsonl"));

    let mut stdouts = Vec::new();
    for threads in ["1", "4"] {
        let pred = d(&format!("pred{threads}.jsonl"));
        jkpe(&["--threads", threads, "extract", "--model", &d("run1/model.ckpt"), "--corpus", &dev_file, "--out", &pred]);
        let out = jkpe(&[
            "--threads", threads, "eval", "--pred", &pred, "--gold", &dev_file, "--out", &d(&format!("eval{threads}")),
        ]);
        stdouts.push(out.stdout);
    }
    let pred_same = read(&dir.path().join("pred1.jsonl")) == read(&dir.path().join("pred4.jsonl"));
    let eval_same = read(&dir.path().join("eval1.json")) == read(&dir.path().join("eval4.json"))
        && read(&dir.path().join("eval1.csv")) == read(&dir.path().join("eval4.csv"))
        && stdouts[0] == stdouts[1];
    verdict(
        7,
        "determinism",
        ckpt_same && log_same && pred_same && eval_same,
        &format!(
            "train (--threads 1 vs 4, same seed): checkpoint identical {ckpt_same}, log identical {log_same}; \
             extract identical {pred_same}; eval json/csv/stdout identical {eval_same}"
        ),
    );
}

fn criterion_8_format_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let corpus = generate(&SynthConfig {
        train_docs: 20,
        dev_docs: 5,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::preset(Preset::Desk)
    };
    let params = train(&corpus.train, None, &cfg, None).unwrap().params;

    save_checkpoint(&params, p("a.ckpt")).unwrap();
    let loaded = load_checkpoint(p("a.ckpt")).unwrap();
    save_checkpoint(&loaded, p("b.ckpt")).unwrap();
    let ckpt = read(&p("a.ckpt")) == read(&p("b.ckpt")) && loaded == params;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mats: Vec<(String, Matrix)> = corpus
        .dev
        .iter()
        .map(|d| {
            let data = (0..d.len() * 6).map(|_| rng.gen_range(-1.0..1.0) / 3.0).collect();
            (d.id.clone(), Matrix::from_vec(d.len(), 6, data))
        })
        .collect();
    write_embjsonl(p("a.embjsonl"), mats.iter().map(|(id, m)| (id.as_str(), m))).unwrap();
    let emb_valid = validate_embjsonl(p("a.embjsonl")).unwrap() == mats.len();
    let provider = FileProvider::load(p("a.embjsonl")).unwrap();
    let back: Vec<(String, Matrix)> = corpus.dev.iter().map(|d| (d.id.clone(), provider.encode(d).unwrap())).collect();
    write_embjsonl(p("b.embjsonl"), back.iter().map(|(id, m)| (id.as_str(), m))).unwrap();
    let emb = emb_valid && back == mats && read(&p("a.embjsonl")) == read(&p("b.embjsonl"));

    let records = predictions(&corpus.dev, &params, &cfg, 5);
    let mut w = PredictionWriter::create(p("a.pred")).unwrap();
    for r in &records {
        w.write(r).unwrap();
    }
    w.write_error("broken-doc", "no embedding record").unwrap();
    w.finish().unwrap();
    let file = read_predictions(p("a.pred")).unwrap();
    let mut w = PredictionWriter::create(p("b.pred")).unwrap();
    for r in &file.records {
        w.write(r).unwrap();
    }
    for e in &file.errors {
        w.write_error(&e.id, &e.error).unwrap();
    }
    w.finish().unwrap();
    let pred = file.records == records && file.errors.len() == 1 && read(&p("a.pred")) == read(&p("b.pred"));

    verdict(
        8,
        "format round trips",
        ckpt && emb && pred,
        &format!(
            "checkpoint save/load/save identical {ckpt} ({} bytes); embjsonl validate + round trip {emb}; \
             prediction file validate + round trip {pred}",
            read(&p("a.ckpt")).len()
        ),
    );
}
