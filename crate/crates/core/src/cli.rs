//! The `jkpe` command line.
//!
//! Exit codes: 0 on success, 2 for usage or input errors, 3 for numeric
//! failures (non-finite values, failed gradient checks).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::baselines::{textrank_extract, tfidf_extract, IdfTable, TextRankConfig};
use crate::corpus::{corpus_stats, load_corpus, write_corpus, CorpusFormat, CorpusReader, Document, Loaded};
use crate::encoder::{EmbeddingProvider, FileProvider};
use crate::error::{Error, Result};
use crate::eval::{evaluate, lexicon_buckets, MatchMode, EvalOptions};
use crate::infer::{extract_batch, read_predictions, run_batch, PredictionWriter, RankBy, DEFAULT_TOP_N};
use crate::manifest::RunManifest;
use crate::model::{load_checkpoint, save_checkpoint, LossConfig, Objective};
use crate::synth::{generate, SynthConfig};
use crate::train::{grad_check, random_instance, train, Preset, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (checkpoint format 1)");

#[derive(Debug, Parser)]
#[command(name = "jkpe", version = VERSION, about = "Neural keyphrase extraction over word n-grams")]
pub struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoint, log and manifest into --out.
    Train(TrainArgs),
    /// Write top-N predictions for every document of a corpus.
    Extract(ExtractArgs),
    /// Score a prediction file against gold keyphrases.
    Eval(EvalArgs),
    /// Run the TF-IDF or TextRank baseline over a corpus.
    Baseline(BaselineArgs),
    /// Generate the planted-keyphrase corpus.
    Synth(SynthArgs),
    /// Compare analytic gradients with finite differences on random instances.
    Gradcheck(GradcheckArgs),
    /// Print corpus statistics as JSON.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArg {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Corpus format; detected from the first record when omitted.
    #[arg(long)]
    pub format: Option<CorpusFormat>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Flat JSON or TOML file of TrainConfig keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base hyperparameters (paper or desk).
    #[arg(long)]
    pub preset: Option<Preset>,
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Precomputed embeddings (embjsonl) covering train and dev documents.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub warmup: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub max_seq_len: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub d_out: Option<usize>,
    #[arg(long)]
    pub objective: Option<ObjectiveArg>,
    #[arg(long)]
    pub dev_match: Option<MatchArg>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    pub top: usize,
    /// Precomputed embeddings, required for models without a lookup table.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Head used to order candidates; `chunk` for chunking-only models.
    #[arg(long, value_enum, default_value_t = RankArg::Score)]
    pub rank_by: RankArg,
    #[arg(long, default_value_t = 512)]
    pub max_seq_len: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    /// Corpus holding the gold keyphrases.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub format: Option<CorpusFormat>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub cutoffs: Vec<usize>,
    /// Defaults to stemmed for jsonl-simple corpora and exact otherwise.
    #[arg(long = "match")]
    pub match_mode: Option<MatchArg>,
    /// One phrase per line; adds in/out-of-lexicon F1@3.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Divide precision by N rather than by the number of predictions.
    #[arg(long)]
    pub strict_at_n: bool,
    /// Output prefix for `.json`, `.csv` and `.manifest.json`; defaults to
    /// the prediction path with an `.eval` suffix.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[command(flatten)]
    pub corpus: CorpusArg,
    /// Corpus to build idf from (training split), for tfidf.
    #[arg(long)]
    pub idf_corpus: Option<PathBuf>,
    /// Previously saved idf table, for tfidf.
    #[arg(long, conflicts_with = "idf_corpus")]
    pub idf: Option<PathBuf>,
    #[arg(long)]
    pub save_idf: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    pub top: usize,
    #[arg(long, default_value_t = 5)]
    pub k_max: usize,
    #[arg(long, default_value_t = 2)]
    pub window: usize,
    #[arg(long, default_value_t = 0.85)]
    pub damping: f64,
    #[arg(long, default_value_t = 50)]
    pub iterations: usize,
    #[arg(long, default_value_t = 512)]
    pub max_seq_len: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training documents.
    #[arg(long, default_value_t = 200)]
    pub docs: usize,
    #[arg(long, default_value_t = 50)]
    pub dev_docs: usize,
    #[arg(long, default_value_t = 500)]
    pub vocab: usize,
    /// Planted phrase lengths, `lo..hi` inclusive.
    #[arg(long, default_value = "1..5", value_parser = parse_range)]
    pub plant_lengths: (usize, usize),
    #[arg(long, default_value_t = 3)]
    pub golds_per_doc: usize,
    /// Directory receiving train.jsonl and dev.jsonl.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    pub instances: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Joint)]
    pub objective: ObjectiveArg,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[arg(long, default_value_t = 512)]
    pub max_seq_len: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObjectiveArg {
    Joint,
    Rank,
    Chunk,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Joint => Objective::Joint,
            ObjectiveArg::Rank => Objective::Rank,
            ObjectiveArg::Chunk => Objective::Chunk,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MatchArg {
    Exact,
    Stemmed,
}

impl From<MatchArg> for MatchMode {
    fn from(m: MatchArg) -> Self {
        match m {
            MatchArg::Exact => MatchMode::Exact,
            MatchArg::Stemmed => MatchMode::Stemmed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RankArg {
    Score,
    Chunk,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineMethod {
    Tfidf,
    Textrank,
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected lo..hi, got {s:?}"))?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let lo: usize = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("invalid range {s:?}"));
    }
    Ok((lo, hi))
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_INPUT
            }
        }
    }
}

pub fn execute(cli: Cli) -> Result<i32> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Stats(a) => cmd_stats(a),
    })
}

fn format_of(path: &Path, given: Option<CorpusFormat>) -> Result<CorpusFormat> {
    given.map_or_else(|| CorpusFormat::detect(path), Ok)
}

fn load_docs(path: &Path, format: Option<CorpusFormat>, max_seq_len: usize) -> Result<Vec<Document>> {
    let corpus = load_corpus(path, format_of(path, format)?, max_seq_len)?;
    for (line, id) in &corpus.rejected {
        eprintln!("warning: {}:{line}: document {id:?} has no tokens; skipped", path.display());
    }
    Ok(corpus.documents)
}

/// Documents of a corpus as a stream, skipping (and reporting) empty ones.
fn stream_docs(path: &Path, format: Option<CorpusFormat>, max_seq_len: usize) -> Result<impl Iterator<Item = Result<Document>>> {
    let reader = CorpusReader::open(path, format_of(path, format)?, max_seq_len)?;
    let display = path.display().to_string();
    Ok(reader.filter_map(move |item| match item {
        Ok(Loaded::Document(d)) => Some(Ok(d)),
        Ok(Loaded::Rejected { line, id }) => {
            eprintln!("warning: {display}:{line}: document {id:?} has no tokens; skipped");
            None
        }
        Err(e) => Some(Err(e)),
    }))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn resolve_train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut map = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            TrainConfig::parse_flat(&text)?
        }
        None => Map::new(),
    };
    let mut set = |k: &str, v: Value| {
        map.insert(k.to_string(), v);
    };
    if let Some(p) = a.preset {
        set("preset", json!(p));
    }
    if let Some(v) = a.seed {
        set("seed", json!(v));
    }
    if let Some(v) = a.lr {
        set("lr", json!(v));
    }
    if let Some(v) = a.warmup {
        set("warmup", json!(v));
    }
    if let Some(v) = a.batch_size {
        set("batch_size", json!(v));
    }
    if let Some(v) = a.epochs {
        set("epochs", json!(v));
    }
    if let Some(v) = a.k_max {
        set("k_max", json!(v));
    }
    if let Some(v) = a.max_seq_len {
        set("max_seq_len", json!(v));
    }
    if let Some(v) = a.margin {
        set("margin", json!(v));
    }
    if let Some(v) = a.dim {
        set("dim", json!(v));
    }
    if let Some(v) = a.d_out {
        set("d_out", json!(v));
    }
    if let Some(v) = a.objective {
        set("objective", json!(Objective::from(v)));
    }
    if let Some(v) = a.dev_match {
        set("dev_match", json!(MatchMode::from(v)));
    }
    TrainConfig::from_overrides(Preset::Paper, map)
}

fn cmd_train(a: TrainArgs) -> Result<i32> {
    let start = Instant::now();
    let cfg = resolve_train_config(&a)?;
    let train_docs = load_docs(&a.corpus.corpus, a.corpus.format, cfg.max_seq_len)?;
    let dev_docs = a.dev.as_deref().map(|p| load_docs(p, None, cfg.max_seq_len)).transpose()?;
    let provider = a.embeddings.as_deref().map(FileProvider::load).transpose()?;
    if let Some(p) = &provider {
        p.validate(&train_docs)?;
        if let Some(dev) = &dev_docs {
            p.validate(dev)?;
        }
    }
    let external = provider.as_ref().map(|p| p as &dyn EmbeddingProvider);
    let outcome = train(&train_docs, dev_docs.as_deref(), &cfg, external)?;

    ensure_dir(&a.out)?;
    save_checkpoint(&outcome.params, a.out.join("model.ckpt"))?;
    let log_path = a.out.join("train_log.jsonl");
    std::fs::write(&log_path, outcome.log_jsonl()).map_err(|e| Error::io(&log_path, e))?;
    let cfg_json = serde_json::to_value(&cfg).expect("config serializes");
    let cfg_path = a.out.join("config.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg_json).expect("json") + "\n")
        .map_err(|e| Error::io(&cfg_path, e))?;

    let mut manifest = RunManifest::new("train", cfg_json, Some(cfg.seed));
    manifest.add_input(&a.corpus.corpus)?;
    for p in a.dev.iter().chain(&a.embeddings).chain(&a.config) {
        manifest.add_input(p)?;
    }
    manifest.finish(start.elapsed());
    manifest.write(a.out.join("manifest.json"))?;
    match outcome.best_dev_f1 {
        Some(f1) => eprintln!(
            "trained {} steps; selected epoch {} (dev F1@3 {f1:.4})",
            outcome.log.iter().filter(|r| matches!(r, crate::train::LogRecord::Step { .. })).count(),
            outcome.selected_epoch
        ),
        None => eprintln!("trained {} epochs", cfg.epochs),
    }
    Ok(EXIT_OK)
}

fn cmd_extract(a: ExtractArgs) -> Result<i32> {
    let start = Instant::now();
    if a.top == 0 {
        return Err(Error::Config("--top must be at least 1".into()));
    }
    let params = load_checkpoint(&a.model)?;
    let provider = a.embeddings.as_deref().map(FileProvider::load).transpose()?;
    let external = provider.as_ref().map(|p| p as &dyn EmbeddingProvider);
    params.embeddings(external)?;
    let rank_by = match a.rank_by {
        RankArg::Score => RankBy::Score,
        RankArg::Chunk => RankBy::Chunk,
    };
    let docs = stream_docs(&a.corpus.corpus, a.corpus.format, a.max_seq_len)?;
    let mut writer = PredictionWriter::create(&a.out)?;
    let summary = extract_batch(docs, &params, external, a.top, rank_by, &mut writer)?;
    writer.finish()?;

    let mut manifest = RunManifest::new(
        "extract",
        json!({"top": a.top, "rank_by": rank_by, "max_seq_len": a.max_seq_len, "summary": summary}),
        None,
    );
    manifest.add_input(&a.model)?;
    manifest.add_input(&a.corpus.corpus)?;
    if let Some(p) = &a.embeddings {
        manifest.add_input(p)?;
    }
    manifest.finish(start.elapsed());
    manifest.write(with_suffix(&a.out, ".manifest.json"))?;
    eprintln!("{} documents, {} failed", summary.documents, summary.failed);
    Ok(EXIT_OK)
}

fn read_lexicon(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(crate::corpus::normalize_phrase)
        .filter(|p| !p.is_empty())
        .collect())
}

fn cmd_eval(a: EvalArgs) -> Result<i32> {
    let start = Instant::now();
    if a.cutoffs.is_empty() || a.cutoffs.contains(&0) {
        return Err(Error::Config("--cutoffs must be positive integers".into()));
    }
    let format = format_of(&a.gold, a.format)?;
    let golds = load_docs(&a.gold, Some(format), usize::MAX)?;
    let preds = read_predictions(&a.pred)?;
    let mode = a.match_mode.map(MatchMode::from).unwrap_or(match format {
        CorpusFormat::Simple => MatchMode::Stemmed,
        CorpusFormat::OpenKp => MatchMode::Exact,
    });
    let opts = EvalOptions {
        mode,
        strict_at_n: a.strict_at_n,
    };
    let mut report = evaluate(&preds.records, &golds, &a.cutoffs, opts)?;
    if let Some(path) = &a.lexicon {
        report.lexicon = Some(lexicon_buckets(&preds.records, &golds, &read_lexicon(path)?, opts)?);
    }
    let prefix = a.out.clone().unwrap_or_else(|| with_suffix(&a.pred, ".eval"));
    let json_path = with_suffix(&prefix, ".json");
    let csv_path = with_suffix(&prefix, ".csv");
    std::fs::write(&json_path, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")
        .map_err(|e| Error::io(&json_path, e))?;
    std::fs::write(&csv_path, report.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(report.to_table().as_bytes());

    let mut manifest = RunManifest::new(
        "eval",
        json!({"cutoffs": a.cutoffs, "match": mode, "strict_at_n": a.strict_at_n}),
        None,
    );
    manifest.add_input(&a.pred)?;
    manifest.add_input(&a.gold)?;
    if let Some(p) = &a.lexicon {
        manifest.add_input(p)?;
    }
    manifest.finish(start.elapsed());
    manifest.write(with_suffix(&prefix, ".manifest.json"))?;
    Ok(EXIT_OK)
}

fn cmd_baseline(a: BaselineArgs) -> Result<i32> {
    let start = Instant::now();
    if a.top == 0 || a.k_max == 0 {
        return Err(Error::Config("--top and --k-max must be at least 1".into()));
    }
    let docs = stream_docs(&a.corpus.corpus, a.corpus.format, a.max_seq_len)?;
    let mut writer = PredictionWriter::create(&a.out)?;
    let mut config = json!({"method": format!("{:?}", a.method).to_lowercase(), "top": a.top, "k_max": a.k_max});
    let summary = match a.method {
        BaselineMethod::Tfidf => {
            let idf = match (&a.idf, &a.idf_corpus) {
                (Some(path), _) => IdfTable::load(path)?,
                (None, Some(path)) => IdfTable::build(&load_docs(path, None, a.max_seq_len)?),
                (None, None) => {
                    return Err(Error::Config("tfidf needs --idf-corpus or --idf".into()));
                }
            };
            if let Some(path) = &a.save_idf {
                idf.save(path)?;
            }
            run_batch(docs, |d| tfidf_extract(d, &idf, a.k_max, a.top), &mut writer)?
        }
        BaselineMethod::Textrank => {
            let cfg = TextRankConfig {
                window: a.window,
                damping: a.damping,
                max_iterations: a.iterations,
                k_max: a.k_max,
                ..TextRankConfig::default()
            };
            config["textrank"] = serde_json::to_value(cfg).expect("config serializes");
            run_batch(docs, |d| textrank_extract(d, &cfg, a.top), &mut writer)?
        }
    };
    writer.finish()?;
    let mut manifest = RunManifest::new("baseline", config, None);
    manifest.add_input(&a.corpus.corpus)?;
    for p in a.idf.iter().chain(&a.idf_corpus) {
        manifest.add_input(p)?;
    }
    manifest.finish(start.elapsed());
    manifest.write(with_suffix(&a.out, ".manifest.json"))?;
    eprintln!("{} documents, {} failed", summary.documents, summary.failed);
    Ok(EXIT_OK)
}

fn cmd_synth(a: SynthArgs) -> Result<i32> {
    let start = Instant::now();
    let cfg = SynthConfig {
        seed: a.seed,
        train_docs: a.docs,
        dev_docs: a.dev_docs,
        vocab: a.vocab,
        min_len: a.plant_lengths.0,
        max_len: a.plant_lengths.1,
        golds_per_doc: a.golds_per_doc,
        ..SynthConfig::default()
    };
    let corpus = generate(&cfg)?;
    ensure_dir(&a.out)?;
    write_corpus(a.out.join("train.jsonl"), &corpus.train, CorpusFormat::OpenKp)?;
    write_corpus(a.out.join("dev.jsonl"), &corpus.dev, CorpusFormat::OpenKp)?;
    let mut manifest = RunManifest::new("synth", serde_json::to_value(&cfg).expect("json"), Some(a.seed));
    manifest.finish(start.elapsed());
    manifest.write(a.out.join("manifest.json"))?;
    Ok(EXIT_OK)
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<i32> {
    if !(a.eps > 0.0) {
        return Err(Error::Config("--eps must be positive".into()));
    }
    let cfg = LossConfig {
        objective: a.objective.into(),
        pair_seed: a.seed,
        ..LossConfig::default()
    };
    let mut failures = 0;
    for i in 0..a.instances {
        let seed = a.seed.wrapping_add(i);
        let (doc, params) = random_instance(seed);
        let report = grad_check(&doc, &params, None, a.eps, a.tolerance, &cfg)?;
        let checked: usize = report.tensors.iter().map(|t| t.checked).sum();
        let skipped: usize = report.tensors.iter().map(|t| t.skipped).sum();
        println!(
            "instance {seed}: {} max_rel_err {:.3e} checked {checked} skipped {skipped}",
            if report.pass { "PASS" } else { "FAIL" },
            report.max_rel_err()
        );
        if !report.pass {
            failures += 1;
            for t in report.tensors.iter().filter(|t| t.max_rel_err >= a.tolerance) {
                println!("  {}: {:.3e} at {:?}", t.name, t.max_rel_err, t.worst_index);
            }
        }
    }
    Ok(if failures == 0 { EXIT_OK } else { EXIT_NUMERIC })
}

fn cmd_stats(a: StatsArgs) -> Result<i32> {
    let path = &a.corpus.corpus;
    let corpus = load_corpus(path, format_of(path, a.corpus.format)?, a.max_seq_len)?;
    println!("{}", serde_json::to_string_pretty(&corpus_stats(&corpus)).expect("stats serialize"));
    Ok(EXIT_OK)
}
