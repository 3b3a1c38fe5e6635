//! The `naturectl` command line.
//!
//! Every subcommand reads its declared inputs, writes its outputs under
//! `--out` and finishes with a `manifest.json` listing inputs, seeds,
//! settings and the SHA-256 of every file read or written. Settings come
//! from flags, then from a `key = value` file given with `--config`, then
//! from built-in defaults.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::annotation::{self, AnnotationError, AnnotationStore};
use crate::baseline::{evaluate_baseline, BaselineRunner, TwoLayerRule};
use crate::casestudy;
use crate::corpus::{self, CorpusStore, IngestFormat, SentenceStats, SourceKind};
use crate::dataset::{GoldDataset, Target};
use crate::eval::{
    self, ConstantRunner, CvReport, FoldSpec, MetricKind, PredictionFileRunner, PredictionRunner,
};
use crate::guidelines::Guidelines;
use crate::keywords::{self, Dimension, KeywordSet, DEFAULT_CUT_POINTS};
use crate::prelabel::{self, BatchOptions, HttpBackend, HttpBackendConfig, MockBackend, ScoreStore, ScorerBackend};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "naturectl", version, about = "Nature-disclosure corpus pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Random seed for every sampling step
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// key = value settings file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment documents into a sentence corpus
    Ingest {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Treat inputs as directories of .txt files of this source kind
        #[arg(long)]
        text_dir: Option<SourceKind>,
    },
    /// Sentence-length statistics per source kind
    Stats {
        #[arg(long, required = true, num_args = 1..)]
        corpus: Vec<PathBuf>,
    },
    /// Keyword frequencies, appearance rate and frequency buckets
    Kwmatch {
        #[arg(long, required = true, num_args = 1..)]
        corpus: Vec<PathBuf>,
        #[arg(long)]
        dimension: Option<Dimension>,
        /// Pattern file replacing the bundled list
        #[arg(long)]
        keywords: Option<PathBuf>,
    },
    /// Keyword-filtered, bucket-balanced sentence sample
    Kwsample {
        #[arg(long, required = true, num_args = 1..)]
        corpus: Vec<PathBuf>,
        #[arg(long)]
        dimension: Option<Dimension>,
        #[arg(long)]
        keywords: Option<PathBuf>,
        #[arg(long)]
        n_total: Option<usize>,
        /// Keyword-matching sentences kept per source kind before bucketing
        #[arg(long)]
        per_source_cap: Option<usize>,
    },
    /// Score sentences with the pre-labeling backend
    Prelabel {
        #[arg(long, required = true)]
        sentences: PathBuf,
        #[arg(long)]
        dimension: Option<Dimension>,
        #[arg(long)]
        budget: Option<usize>,
        /// mock or http
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Equal draws from the Zero, LowMid and High score bands
    Bandsample {
        #[arg(long, required = true)]
        scores: PathBuf,
        #[arg(long)]
        n_total: Option<usize>,
    },
    /// Run the annotation HTTP API in the foreground
    AnnotateServe {
        #[arg(long, required = true)]
        tasks: PathBuf,
        /// Four comma-separated annotator ids
        #[arg(long, required = true, value_delimiter = ',')]
        annotators: Vec<String>,
        /// Event log (created when missing)
        #[arg(long, required = true)]
        log: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory with the UI bundle
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Fleiss' kappa and agreement breakdown from annotation records
    Agreement {
        #[arg(long, required = true)]
        annotations: PathBuf,
    },
    /// Write the gold dataset once every sample is resolved
    ExportGold {
        #[arg(long, required = true)]
        tasks: PathBuf,
        #[arg(long, required = true, value_delimiter = ',')]
        annotators: Vec<String>,
        #[arg(long, required = true)]
        log: PathBuf,
    },
    /// Evaluate the two-layer keyword classifier
    BaselineEval {
        #[arg(long, required = true)]
        gold: PathBuf,
        #[arg(long)]
        target: Option<Target>,
        /// False positives/negatives kept in the report
        #[arg(long, default_value_t = 20)]
        examples: usize,
    },
    /// Stratified k-fold split of a gold dataset
    Folds {
        #[arg(long, required = true)]
        gold: PathBuf,
        #[arg(long)]
        target: Option<Target>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Cross-validate a runner over a fold spec
    Cv {
        #[arg(long, required = true)]
        gold: PathBuf,
        #[arg(long, required = true)]
        folds: PathBuf,
        /// baseline, constant-positive, constant-negative or predictions
        #[arg(long, default_value = "baseline")]
        runner: String,
        /// Directory of fold-<n>.jsonl files for the predictions runner
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value = "")]
        hyperparameters: String,
        /// Earlier cv_report.json files to include in the comparison table
        #[arg(long = "with", num_args = 1..)]
        with_reports: Vec<PathBuf>,
    },
    /// Earnings-call exposure by company, industry and country
    Casestudy {
        #[arg(long, required = true)]
        labels: PathBuf,
        #[arg(long, required = true)]
        metadata: PathBuf,
        #[arg(long, required = true)]
        industry_map: PathBuf,
        #[arg(long)]
        top_n: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Stats { .. } => "stats",
            Command::Kwmatch { .. } => "kwmatch",
            Command::Kwsample { .. } => "kwsample",
            Command::Prelabel { .. } => "prelabel",
            Command::Bandsample { .. } => "bandsample",
            Command::AnnotateServe { .. } => "annotate-serve",
            Command::Agreement { .. } => "agreement",
            Command::ExportGold { .. } => "export-gold",
            Command::BaselineEval { .. } => "baseline-eval",
            Command::Folds { .. } => "folds",
            Command::Cv { .. } => "cv",
            Command::Casestudy { .. } => "casestudy",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn rt<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

const CONFIG_KEYS: &[&str] = &[
    "seed",
    "out",
    "dimension",
    "target",
    "n_total",
    "per_source_cap",
    "budget",
    "backend",
    "endpoint",
    "model",
    "token_env",
    "parallelism",
    "k",
    "top_n",
];

/// Parses a `key = value` settings file. Blank lines and `#` comments are
/// skipped; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
        let k = k.trim();
        if !CONFIG_KEYS.contains(&k) {
            return Err(format!("config line {}: unknown key {k:?}", i + 1));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Resolved settings for one run.
#[derive(Debug, Default)]
struct Settings {
    config: BTreeMap<String, String>,
    used: BTreeMap<String, String>,
}

impl Settings {
    /// Flag value, else config value, else `default`.
    fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: std::str::FromStr + ToString,
        T::Err: std::fmt::Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.config.get(key) {
                Some(raw) => raw
                    .parse()
                    .map_err(|e| CliError::Usage(format!("config {key} = {raw:?}: {e}")))?,
                None => default,
            },
        };
        self.used.insert(key.to_string(), value.to_string());
        Ok(value)
    }
}

#[derive(Debug, Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    version: String,
    seed: u64,
    settings: BTreeMap<String, String>,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

fn hash_path(path: &Path) -> Result<Vec<FileHash>, CliError> {
    let mut out = Vec::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| rt(format!("{}: {e}", path.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        for p in entries {
            out.extend(hash_path(&p)?);
        }
    } else {
        let bytes = fs::read(path).map_err(|e| rt(format!("{}: {e}", path.display())))?;
        out.push(FileHash {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    Ok(out)
}

struct Run {
    out: PathBuf,
    settings: Settings,
    seed: u64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn input(&mut self, p: &Path) -> Result<(), CliError> {
        if !p.exists() {
            return Err(CliError::Runtime(format!("missing input {}", p.display())));
        }
        self.inputs.push(p.to_path_buf());
        Ok(())
    }

    fn write(&mut self, name: &str, body: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        fs::write(&path, body).map_err(|e| rt(format!("{}: {e}", path.display())))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut body = serde_json::to_string_pretty(value).map_err(rt)?;
        body.push('\n');
        self.write(name, body)
    }

    fn finish(self, command: &str) -> Result<(), CliError> {
        let mut inputs = Vec::new();
        for p in &self.inputs {
            inputs.extend(hash_path(p)?);
        }
        let mut outputs = Vec::new();
        for p in &self.outputs {
            outputs.extend(hash_path(p)?);
        }
        let manifest = Manifest {
            command: command.to_string(),
            version: VERSION.to_string(),
            seed: self.seed,
            settings: self.settings.used,
            inputs,
            outputs,
        };
        let body = serde_json::to_string_pretty(&manifest).map_err(rt)? + "\n";
        let path = self.out.join("manifest.json");
        fs::write(&path, body).map_err(|e| rt(format!("{}: {e}", path.display())))
    }
}

/// Reads a corpus from document jsonl, sentence jsonl (records carrying a
/// `sent_id`) or, with `text_dir`, directories of text files.
pub fn load_corpus(paths: &[PathBuf], text_dir: Option<SourceKind>) -> Result<CorpusStore, CliError> {
    if let Some(kind) = text_dir {
        return corpus::ingest_documents(paths, IngestFormat::PlainTextDir(kind)).map_err(rt);
    }
    let mut sentence_files = Vec::new();
    let mut document_files = Vec::new();
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| rt(format!("{}: {e}", p.display())))?;
        let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("{}");
        let is_sentences = serde_json::from_str::<serde_json::Value>(first)
            .map(|v| v.get("sent_id").is_some())
            .unwrap_or(false);
        if is_sentences {
            sentence_files.push(p.clone());
        } else {
            document_files.push(p.clone());
        }
    }
    let mut store = corpus::ingest_documents(&document_files, IngestFormat::Jsonl).map_err(rt)?;
    corpus::ingest_sentences(&mut store, &sentence_files).map_err(rt)?;
    Ok(store)
}

#[derive(Serialize)]
struct SentenceLine<'a> {
    sent_id: &'a str,
    doc_id: &'a str,
    ordinal: usize,
    source_kind: SourceKind,
    text: &'a str,
    token_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    bucket: Option<usize>,
}

fn sentence_jsonl<'a>(rows: impl IntoIterator<Item = (&'a corpus::Sentence, SourceKind, Option<usize>)>) -> String {
    let mut out = String::new();
    for (s, kind, bucket) in rows {
        let line = SentenceLine {
            sent_id: &s.sent_id,
            doc_id: &s.doc_id,
            ordinal: s.ordinal,
            source_kind: kind,
            text: &s.text,
            token_count: s.token_count,
            bucket,
        };
        out.push_str(&serde_json::to_string(&line).expect("serializable"));
        out.push('\n');
    }
    out
}

fn keyword_set(dimension: Dimension, file: Option<&Path>, run: &mut Run) -> Result<KeywordSet, CliError> {
    match file {
        Some(p) => {
            run.input(p)?;
            let text = fs::read_to_string(p).map_err(rt)?;
            KeywordSet::from_resource(dimension, &text).map_err(rt)
        }
        None => Ok(KeywordSet::builtin(dimension)),
    }
}

/// Parses `argv` and runs the subcommand; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.common.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?;
            parse_config(&text).map_err(CliError::Usage)?
        }
        None => BTreeMap::new(),
    };
    let mut settings = Settings {
        config,
        used: BTreeMap::new(),
    };
    let seed = settings.get("seed", cli.common.seed, DEFAULT_SEED)?;
    let out: PathBuf = settings.get("out", cli.common.out.clone().map(|p| p.display().to_string()), "out".into())?
        .into();
    fs::create_dir_all(&out).map_err(|e| CliError::Usage(format!("output directory {}: {e}", out.display())))?;
    let mut run = Run {
        out,
        settings,
        seed,
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    let name = cli.command.name();
    execute(cli.command, &mut run)?;
    run.finish(name)
}

fn execute(command: Command, run: &mut Run) -> Result<(), CliError> {
    let seed = run.seed;
    match command {
        Command::Ingest { input, text_dir } => {
            for p in &input {
                run.input(p)?;
            }
            let store = load_corpus(&input, text_dir)?;
            let body = sentence_jsonl(store.iter_with_source().map(|(s, k)| (s, k, None)));
            run.write("sentences.jsonl", body)?;
            println!("{} documents, {} sentences", store.documents().len(), store.len());
        }
        Command::Stats { corpus: paths } => {
            for p in &paths {
                run.input(p)?;
            }
            let store = load_corpus(&paths, None)?;
            let mut csv = format!("{}\n", SentenceStats::csv_header());
            let mut scopes: Vec<(String, Option<SourceKind>)> = SourceKind::ALL
                .iter()
                .map(|k| (k.code().to_string(), Some(*k)))
                .collect();
            scopes.push(("all".into(), None));
            for (scope, filter) in scopes {
                match corpus::corpus_stats(&store, filter) {
                    Ok(s) => {
                        csv.push_str(&s.csv_row(&scope));
                        csv.push('\n');
                    }
                    Err(corpus::CorpusError::EmptySelection) if filter.is_some() => {}
                    Err(e) => return Err(rt(e)),
                }
            }
            print!("{csv}");
            run.write("stats.csv", csv)?;
        }
        Command::Kwmatch {
            corpus: paths,
            dimension,
            keywords: kw,
        } => {
            for p in &paths {
                run.input(p)?;
            }
            let dim = run.settings.get("dimension", dimension, Dimension::Biodiversity)?;
            let set = keyword_set(dim, kw.as_deref(), run)?;
            let store = load_corpus(&paths, None)?;
            let table = keywords::keyword_frequency_table(&store, &set).map_err(rt)?;
            let buckets = keywords::bucketize(&table, &DEFAULT_CUT_POINTS).map_err(rt)?;
            run.write("frequency.csv", table.to_csv())?;
            run.write_json("buckets.json", &buckets)?;
            println!(
                "{}: {} of {} sentences match (appearance rate {:.4})",
                dim,
                table.total_matched_sentences,
                table.total_sentences,
                table.appearance_rate()
            );
        }
        Command::Kwsample {
            corpus: paths,
            dimension,
            keywords: kw,
            n_total,
            per_source_cap,
        } => {
            for p in &paths {
                run.input(p)?;
            }
            let dim = run.settings.get("dimension", dimension, Dimension::Biodiversity)?;
            let n_total = run.settings.get("n_total", n_total, 5000)?;
            let cap = run.settings.get("per_source_cap", per_source_cap, 20_000)?;
            let set = keyword_set(dim, kw.as_deref(), run)?;
            let full = load_corpus(&paths, None)?;
            let mut pool = CorpusStore::new();
            for s in keywords::keyword_filter_sample(&full, &set, cap, seed) {
                let kind = full
                    .document(&s.doc_id)
                    .map(|d| d.source_kind)
                    .ok_or_else(|| rt(format!("unknown document {}", s.doc_id)))?;
                pool.add_sentence(s, Some(kind)).map_err(rt)?;
            }
            let table = keywords::keyword_frequency_table(&pool, &set).map_err(rt)?;
            let assignment = keywords::bucketize(&table, &DEFAULT_CUT_POINTS).map_err(rt)?;
            let sample = keywords::bucket_balanced_sample(&pool, &set, &assignment, n_total, seed)
                .map_err(rt)?;
            let kinds: BTreeMap<&str, SourceKind> = pool
                .documents()
                .iter()
                .map(|d| (d.doc_id.as_str(), d.source_kind))
                .collect();
            let body = sentence_jsonl(
                sample
                    .sentences()
                    .map(|(b, s)| (s, kinds[s.doc_id.as_str()], Some(b))),
            );
            run.write("sample.jsonl", body)?;
            run.write_json("buckets.json", &assignment)?;
            println!("sampled {:?} per bucket (available {:?})", sample.sizes(), sample.available);
        }
        Command::Prelabel {
            sentences,
            dimension,
            budget,
            backend,
            endpoint,
            model,
            parallelism,
        } => {
            run.input(&sentences)?;
            let dim = run.settings.get("dimension", dimension, Dimension::Biodiversity)?;
            let budget = run.settings.get("budget", budget, 5000)?;
            let backend_kind = run.settings.get("backend", backend, "mock".to_string())?;
            let parallelism = run.settings.get("parallelism", parallelism, 4)?;
            let store = load_corpus(std::slice::from_ref(&sentences), None)?;
            let scorer: Box<dyn ScorerBackend> = match backend_kind.as_str() {
                "mock" => Box::new(MockBackend::new(KeywordSet::builtin(dim))),
                "http" => {
                    let defaults = HttpBackendConfig::default();
                    let config = HttpBackendConfig {
                        endpoint: run.settings.get("endpoint", endpoint, defaults.endpoint)?,
                        model: run.settings.get("model", model, defaults.model)?,
                        token_env: run.settings.get("token_env", None, defaults.token_env)?,
                        timeout_secs: defaults.timeout_secs,
                    };
                    Box::new(HttpBackend::new(config))
                }
                other => return Err(CliError::Usage(format!("unknown backend {other:?}"))),
            };
            let score_path = run.out.join(format!("scores-{dim}.jsonl"));
            let mut score_store = ScoreStore::open(&score_path).map_err(rt)?;
            let guideline = Guidelines::builtin().get(dim).prompt_text();
            let options = BatchOptions {
                budget,
                parallelism,
                backoff: Duration::from_millis(500),
                ..BatchOptions::default()
            };
            let outcome = prelabel::prelabel_batch(
                store.sentences(),
                dim,
                &guideline,
                scorer.as_ref(),
                &options,
                Some(&mut score_store),
            )
            .map_err(rt)?;
            run.outputs.push(score_path);
            run.write_json(&format!("failures-{dim}.json"), &outcome.failures)?;
            println!(
                "{} scored ({} new), {} failed",
                outcome.scores.len(),
                outcome.queried - outcome.failures.len().min(outcome.queried),
                outcome.failures.len()
            );
        }
        Command::Bandsample { scores, n_total } => {
            run.input(&scores)?;
            let n_total = run.settings.get("n_total", n_total, 5000)?;
            let store = ScoreStore::open(&scores).map_err(rt)?;
            let ids = prelabel::band_balanced_sample(store.scores(), n_total, seed).map_err(rt)?;
            run.write("band_sample.txt", ids.join("\n") + "\n")?;
            println!("{} sentence ids", ids.len());
        }
        Command::AnnotateServe {
            tasks,
            annotators,
            log,
            addr,
            static_dir,
        } => {
            run.input(&tasks)?;
            let task_list = annotation::load_tasks(&tasks).map_err(rt)?;
            let store = AnnotationStore::open(task_list, &annotators, &log).map_err(annotation_err)?;
            let app = annotation::router(Arc::new(store), Guidelines::builtin(), static_dir.as_deref());
            let runtime = tokio::runtime::Runtime::new().map_err(rt)?;
            eprintln!("annotation API listening on http://{addr}");
            runtime.block_on(annotation::serve(app, addr)).map_err(rt)?;
        }
        Command::Agreement { annotations } => {
            run.input(&annotations)?;
            let records = annotation::load_annotation_records(&annotations).map_err(rt)?;
            let complete = annotation::complete_only(&records);
            let report = annotation::agreement_report(&complete).map_err(rt)?;
            run.write_json("agreement.json", &report)?;
            for (d, a) in &report.dimensions {
                let kappa = a
                    .kappa
                    .value()
                    .map(|k| format!("{k:.3}"))
                    .unwrap_or_else(|| "undefined".into());
                println!(
                    "{d:<13} kappa {kappa:>9}  2/4 {:.3}  3/4 {:.3}  4/4 {:.3}",
                    a.breakdown.agree_2of4, a.breakdown.agree_3of4, a.breakdown.agree_4of4
                );
            }
        }
        Command::ExportGold {
            tasks,
            annotators,
            log,
        } => {
            run.input(&tasks)?;
            run.input(&log)?;
            let task_list = annotation::load_tasks(&tasks).map_err(rt)?;
            let store = AnnotationStore::open(task_list, &annotators, &log).map_err(annotation_err)?;
            let export = store.export_gold().map_err(annotation_err)?;
            let written = export.write(&run.out).map_err(rt)?;
            run.outputs.extend(written);
            println!("{}", serde_json::to_string_pretty(&export.distribution).map_err(rt)?);
        }
        Command::BaselineEval {
            gold,
            target,
            examples,
        } => {
            run.input(&gold)?;
            let target = run.settings.get("target", target, Target::Biodiversity)?;
            let ds = GoldDataset::load(&gold).map_err(rt)?;
            let report = evaluate_baseline(&ds, target, &TwoLayerRule::builtin(), examples).map_err(rt)?;
            run.write_json("report.json", &report)?;
            run.write("confusion.csv", report.confusion.to_csv())?;
            let m = report.metrics;
            println!(
                "{target}: F1 {:.4}  accuracy {:.4}  precision {:.4}  recall {:.4}",
                m.f1, m.accuracy, m.precision, m.recall
            );
        }
        Command::Folds { gold, target, k } => {
            run.input(&gold)?;
            let target = run.settings.get("target", target, Target::Nature)?;
            let k = run.settings.get("k", k, 5)?;
            let ds = GoldDataset::load(&gold).map_err(rt)?;
            let spec = eval::make_folds(&ds, target, k, seed).map_err(rt)?;
            run.write_json("folds.json", &spec)?;
            let sizes: Vec<usize> = spec.folds.iter().map(Vec::len).collect();
            println!("fold sizes {sizes:?}");
        }
        Command::Cv {
            gold,
            folds,
            runner,
            predictions,
            model,
            hyperparameters,
            with_reports,
        } => {
            run.input(&gold)?;
            run.input(&folds)?;
            let ds = GoldDataset::load(&gold).map_err(rt)?;
            let spec = FoldSpec::load(&folds).map_err(rt)?;
            let mut r: Box<dyn PredictionRunner> = match runner.as_str() {
                "baseline" => Box::new(BaselineRunner {
                    rule: TwoLayerRule::builtin(),
                }),
                "constant-positive" => Box::new(ConstantRunner(1)),
                "constant-negative" => Box::new(ConstantRunner(0)),
                "predictions" => {
                    let dir = predictions
                        .ok_or_else(|| CliError::Usage("--predictions is required for the predictions runner".into()))?;
                    run.input(&dir)?;
                    Box::new(PredictionFileRunner::new(dir, model.as_deref().unwrap_or("predictions")))
                }
                other => return Err(CliError::Usage(format!("unknown runner {other:?}"))),
            };
            let report = match eval::cross_validate(r.as_mut(), &ds, &spec, &hyperparameters) {
                Ok(rep) => rep,
                Err(failure) => {
                    run.write_json("cv_report.partial.json", &failure.partial)?;
                    return Err(rt(failure));
                }
            };
            run.write_json("cv_report.json", &report)?;
            let mut reports = Vec::new();
            for p in &with_reports {
                run.input(p)?;
                let text = fs::read_to_string(p).map_err(rt)?;
                reports.push(serde_json::from_str::<CvReport>(&text).map_err(rt)?);
            }
            reports.push(report);
            let table = eval::results_table(&reports, MetricKind::F1);
            run.write("table.csv", table.to_csv())?;
            run.write("table.txt", table.to_text())?;
            print!("{}", table.to_text());
        }
        Command::Casestudy {
            labels,
            metadata,
            industry_map,
            top_n,
        } => {
            for p in [&labels, &metadata, &industry_map] {
                run.input(p)?;
            }
            let top_n = run.settings.get("top_n", top_n, casestudy::DEFAULT_TOP_N)?;
            let sentences = casestudy::load_labeled_sentences(&labels).map_err(rt)?;
            let meta = casestudy::load_metadata(&metadata).map_err(rt)?;
            let map = casestudy::load_industry_map(&industry_map).map_err(rt)?;
            let report = casestudy::run_case_study(&sentences, &meta, &map, top_n).map_err(rt)?;
            let written = report.write(&run.out).map_err(rt)?;
            run.outputs.extend(written);
            print!("{}", report.industries_text());
        }
    }
    Ok(())
}

fn annotation_err(e: AnnotationError) -> CliError {
    match e {
        AnnotationError::ExportBlocked(blockers) => {
            let list: Vec<String> = blockers
                .iter()
                .map(|b| serde_json::to_string(b).expect("serializable"))
                .collect();
            CliError::Runtime(format!(
                "export refused, {} unresolved:\n{}",
                blockers.len(),
                list.join("\n")
            ))
        }
        AnnotationError::AnnotatorCount(_) | AnnotationError::Duplicate { .. } => CliError::Usage(e.to_string()),
        e => rt(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let c = parse_config("# c\nseed = 7\n\nbudget=10\n").unwrap();
        assert_eq!(c["seed"], "7");
        assert_eq!(c["budget"], "10");
        assert!(parse_config("nonsense").is_err());
        assert!(parse_config("colour = red").is_err());
    }

    #[test]
    fn flag_beats_config() {
        let mut s = Settings {
            config: parse_config("seed = 7\nk = 3").unwrap(),
            used: BTreeMap::new(),
        };
        assert_eq!(s.get("seed", Some(9u64), 1).unwrap(), 9);
        assert_eq!(s.get("k", None, 5usize).unwrap(), 3);
        assert_eq!(s.get("top_n", None, 20usize).unwrap(), 20);
        assert_eq!(s.used["seed"], "9");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with_args(["naturectl", "frobnicate"]), 2);
        assert_eq!(main_with_args(["naturectl", "stats", "--bogus"]), 2);
        assert_eq!(main_with_args(["naturectl", "--help"]), 0);
    }
}
