//! Command-line front end. Exit codes: 0 success, 1 runtime failure,
//! 2 usage error, 3 validation failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::corpus::{
    dataset_stats, generate_synthetic, load_annotations, load_checkpoint, load_pairs, save_annotations,
    save_checkpoint, save_pairs, CorpusError, DocPair, EmbeddingStore, ModelCheckpoint, SynthConfig,
    DEFAULT_LENGTH_EDGES,
};
use crate::gradcheck::{gradcheck, GradcheckConfig};
use crate::harness::{k_sweep, ExperimentConfig, Splits};
use crate::model::{Model, ModelConfig};
use crate::pipeline::{
    evaluate_documents, evaluate_sentences, load_evidence, load_predictions, predict_records, prepare_samples,
    retrieve_pairs, save_evidence, save_predictions, EvidenceRecord, PipelineError,
};
use crate::retrieval::RetrievalMethod;
use crate::text::Segmenter;
use crate::training::{train, TrainError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "docnli",
    version,
    about = "Document-level NLI: retrieve evidence, read, fuse, evaluate"
)]
pub struct Cli {
    #[command(flatten)]
    pub args: RunArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Each one overrides the matching
/// config-file key.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `section.key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Extra `section.key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dev: Option<PathBuf>,
    #[arg(long, global = true)]
    pub test: Option<PathBuf>,
    #[arg(long, global = true)]
    pub annotations: Option<PathBuf>,
    #[arg(long, global = true)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, global = true)]
    pub evidence: Option<PathBuf>,
    #[arg(long = "dev-evidence", global = true)]
    pub dev_evidence: Option<PathBuf>,
    #[arg(long, global = true)]
    pub predictions: Option<PathBuf>,
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,
    #[arg(long, global = true)]
    pub abbreviations: Option<PathBuf>,
    /// Retrieval method: rouge1, bm25, embedding_cosine or random.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Evidence sentences per hypothesis sentence.
    #[arg(long = "K", alias = "k", global = true)]
    pub k: Option<String>,
    /// Fusion head: score_min, vector_min or kernel.
    #[arg(long, global = true)]
    pub fusion: Option<String>,
    #[arg(long, global = true)]
    pub threshold: Option<String>,
    /// Seed for training and random retrieval (and generation for `synth`).
    #[arg(long, global = true)]
    pub seed: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic train/dev/test splits with sentence-level gold.
    Synth {
        #[arg(long = "train-size", default_value_t = 2000)]
        train_size: usize,
        #[arg(long = "dev-size", default_value_t = 500)]
        dev_size: usize,
        #[arg(long = "test-size", default_value_t = 500)]
        test_size: usize,
        #[arg(long = "corruption-rate", default_value_t = 0.5)]
        corruption_rate: f64,
    },
    /// Label counts and word-length histogram of a dataset.
    Stats {
        /// Comma-separated bucket edges in words.
        #[arg(long)]
        edges: Option<String>,
    },
    /// Write one evidence record per hypothesis sentence.
    Retrieve,
    /// Train a reader and fusion head; writes a checkpoint.
    Train,
    /// Score a dataset with a checkpoint; writes predictions.
    Predict,
    /// Document-level metrics of predictions against a labelled dataset.
    EvalDoc,
    /// Sentence-level metrics of predictions against annotations.
    EvalSent,
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        /// Parameters sampled per sample; all when omitted.
        #[arg(long)]
        coordinates: Option<usize>,
        /// Use a reduced architecture.
        #[arg(long)]
        small: bool,
    },
    /// Retrieve, train, predict and evaluate once per K.
    SweepK {
        #[arg(long, default_value = "3,4,5,6,7")]
        ks: String,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match dispatch(&cli.command, &cli.args, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn resolve_config(args: &RunArgs, command: &Command) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let mut set = |key: &str, value: &Option<String>| -> Result<(), CliError> {
        if let Some(v) = value {
            config.set(key, v)?;
        }
        Ok(())
    };
    set("retrieval.method", &args.method)?;
    set("retrieval.k", &args.k)?;
    set("train.fusion", &args.fusion)?;
    set("train.threshold", &args.threshold)?;
    if !matches!(command, Command::Synth { .. }) {
        set("train.seed", &args.seed)?;
        set("retrieval.random_seed", &args.seed)?;
    }
    let paths = [
        ("paths.dataset", &args.dataset),
        ("paths.dev", &args.dev),
        ("paths.test", &args.test),
        ("paths.annotations", &args.annotations),
        ("paths.embeddings", &args.embeddings),
        ("paths.evidence", &args.evidence),
        ("paths.dev_evidence", &args.dev_evidence),
        ("paths.predictions", &args.predictions),
        ("paths.checkpoint", &args.checkpoint),
        ("paths.out", &args.out),
        ("paths.log", &args.log),
        ("paths.abbreviations", &args.abbreviations),
    ];
    for (key, value) in paths {
        if let Some(p) = value {
            config.set(key, &p.to_string_lossy())?;
        }
    }
    for o in &args.overrides {
        config.apply_override(o)?;
    }
    config.resolve()?;
    Ok(config)
}

fn echo_config(config: &RunConfig, stderr: &mut dyn Write) -> Result<(), CliError> {
    for line in config.render().lines() {
        writeln!(stderr, "config {line}")?;
    }
    Ok(())
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("--{flag} is required for this command")))
}

fn segmenter(config: &RunConfig) -> Result<Segmenter, CliError> {
    match &config.paths.abbreviations {
        Some(p) => Segmenter::from_file(p).map_err(|e| CliError::Runtime(e.to_string())),
        None => Ok(Segmenter::default()),
    }
}

fn load_store(config: &RunConfig) -> Result<Option<EmbeddingStore>, CliError> {
    let needed = config.retrieval.method == RetrievalMethod::EmbeddingCosine;
    match (&config.paths.embeddings, needed) {
        (None, true) => Err(CliError::Usage("embedding_cosine retrieval needs --embeddings".into())),
        (Some(p), true) => Ok(Some(EmbeddingStore::load(p)?)),
        (_, false) => Ok(None),
    }
}

fn pairs_at(path: &Path, config: &RunConfig) -> Result<Vec<DocPair>, CliError> {
    Ok(load_pairs(path, &config.fields)?)
}

fn evidence_for(
    pairs: &[DocPair],
    stored: Option<&Path>,
    seg: &Segmenter,
    config: &RunConfig,
    store: Option<&EmbeddingStore>,
) -> Result<Vec<EvidenceRecord>, CliError> {
    match stored {
        Some(p) => Ok(load_evidence(p)?),
        None => Ok(retrieve_pairs(pairs, seg, &config.retrieval, store)?),
    }
}

fn write_report(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    if let Some(p) = path {
        crate::fsio::write_atomic(p, text.as_bytes())
            .map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn dispatch(
    command: &Command,
    args: &RunArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    let config = resolve_config(args, command)?;
    match command {
        Command::Synth {
            train_size,
            dev_size,
            test_size,
            corruption_rate,
        } => {
            let out = require(&config.paths.out, "out")?;
            let seed = match &args.seed {
                Some(s) => s.parse().map_err(|_| CliError::Usage(format!("bad --seed `{s}`")))?,
                None => SynthConfig::default().seed,
            };
            let synth = SynthConfig {
                train: *train_size,
                dev: *dev_size,
                test: *test_size,
                corruption_rate: *corruption_rate,
                seed,
                ..SynthConfig::default()
            };
            synth.validate().map_err(CliError::Usage)?;
            let corpus = generate_synthetic(&synth)?;
            std::fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
            for (name, split) in [("train", &corpus.train), ("dev", &corpus.dev), ("test", &corpus.test)] {
                save_pairs(&out.join(format!("{name}.jsonl")), &split.pairs)?;
                save_annotations(&out.join(format!("{name}.gold.jsonl")), &split.gold)?;
                writeln!(stdout, "split={name} pairs={} dir={}", split.pairs.len(), out.display())?;
            }
            Ok(0)
        }
        Command::Stats { edges } => {
            let path = require(&config.paths.dataset, "dataset")?;
            let edges: Vec<usize> = match edges {
                Some(e) => e
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse()
                            .map_err(|_| CliError::Usage(format!("bad --edges `{e}`")))
                    })
                    .collect::<Result<_, _>>()?,
                None => DEFAULT_LENGTH_EDGES.to_vec(),
            };
            if edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::Usage("--edges must be strictly increasing".into()));
            }
            let stats = dataset_stats(&pairs_at(path, &config)?, &edges);
            let text = stats.to_key_values();
            write!(stdout, "{text}")?;
            write_report(config.paths.out.as_deref(), &text)?;
            Ok(0)
        }
        Command::Retrieve => {
            let path = require(&config.paths.dataset, "dataset")?;
            let out = require(&config.paths.out, "out")?;
            echo_config(&config, stderr)?;
            let store = load_store(&config)?;
            let seg = segmenter(&config)?;
            let pairs = pairs_at(path, &config)?;
            let records = retrieve_pairs(&pairs, &seg, &config.retrieval, store.as_ref())?;
            save_evidence(out, &records)?;
            writeln!(
                stdout,
                "pairs={} records={} out={}",
                pairs.len(),
                records.len(),
                out.display()
            )?;
            Ok(0)
        }
        Command::Train => {
            let train_path = require(&config.paths.dataset, "dataset")?;
            let dev_path = require(&config.paths.dev, "dev")?;
            let out = require(&config.paths.out, "out")?;
            echo_config(&config, stderr)?;
            let store = load_store(&config)?;
            let seg = segmenter(&config)?;
            let k = config.retrieval.k;
            let train_pairs = pairs_at(train_path, &config)?;
            let dev_pairs = pairs_at(dev_path, &config)?;
            let train_ev = evidence_for(
                &train_pairs,
                config.paths.evidence.as_deref(),
                &seg,
                &config,
                store.as_ref(),
            )?;
            let dev_ev = evidence_for(
                &dev_pairs,
                config.paths.dev_evidence.as_deref(),
                &seg,
                &config,
                store.as_ref(),
            )?;
            let train_samples = prepare_samples(&train_pairs, &train_ev, &seg, k)?;
            let dev_samples = prepare_samples(&dev_pairs, &dev_ev, &seg, k)?;

            let mut log_buf: Vec<u8> = Vec::new();
            for line in config.render().lines() {
                writeln!(log_buf, "config {line}")?;
            }
            let outcome = {
                let mut tee = Tee {
                    a: &mut log_buf,
                    b: stderr,
                };
                train(&train_samples, &dev_samples, &config.model, &config.train, &mut tee)?
            };
            let mut ckpt = ModelCheckpoint::new(
                outcome.model,
                config.model.clone(),
                config.retrieval.clone(),
                config.train.clone(),
            );
            ckpt.best_step = outcome.best_step;
            ckpt.best_dev = Some(outcome.best_dev.clone());
            save_checkpoint(&ckpt, out)?;
            write_report(config.paths.log.as_deref(), &String::from_utf8_lossy(&log_buf))?;
            writeln!(
                stdout,
                "checkpoint={} steps={} best_step={} dev_macro_f1={:.6} dev_micro_f1={:.6}",
                out.display(),
                outcome.steps,
                outcome.best_step,
                outcome.best_dev.macro_f1,
                outcome.best_dev.micro_f1
            )?;
            Ok(0)
        }
        Command::Predict => {
            let path = require(&config.paths.dataset, "dataset")?;
            let ckpt_path = require(&config.paths.checkpoint, "checkpoint")?;
            let out = require(&config.paths.out, "out")?;
            let ckpt = load_checkpoint(ckpt_path)?;
            // Retrieval must match training; only the threshold may change.
            let mut run = config.clone();
            run.retrieval = ckpt.retrieval.clone();
            if args.method.is_some() || args.k.is_some() {
                let asked = (config.retrieval.method, config.retrieval.k);
                if asked != (ckpt.retrieval.method, ckpt.retrieval.k) {
                    return Err(CliError::Validation(format!(
                        "checkpoint was trained with method={} K={}, got method={} K={}",
                        ckpt.retrieval.method, ckpt.retrieval.k, asked.0, asked.1
                    )));
                }
            }
            let threshold = if args.threshold.is_some() || config_sets(args, "train.threshold") {
                config.train.threshold
            } else {
                ckpt.threshold()
            };
            run.train.threshold = threshold;
            echo_config(&run, stderr)?;
            let store = load_store(&run)?;
            let seg = segmenter(&run)?;
            let pairs = pairs_at(path, &run)?;
            let evidence = evidence_for(&pairs, run.paths.evidence.as_deref(), &seg, &run, store.as_ref())?;
            if let Some(r) = evidence
                .iter()
                .find(|r| r.selection.evidence_indices.len() > ckpt.retrieval.k)
            {
                return Err(CliError::Validation(format!(
                    "evidence for {} has {} sentences, checkpoint K is {}",
                    r.id,
                    r.selection.evidence_indices.len(),
                    ckpt.retrieval.k
                )));
            }
            let samples = prepare_samples(&pairs, &evidence, &seg, ckpt.retrieval.k)?;
            let records = predict_records(&ckpt.model, &samples, &evidence, threshold)?;
            save_predictions(out, &records)?;
            writeln!(
                stdout,
                "pairs={} out={} threshold={threshold}",
                records.len(),
                out.display()
            )?;
            Ok(0)
        }
        Command::EvalDoc => {
            let preds = require(&config.paths.predictions, "predictions")?;
            let gold = require(&config.paths.dataset, "dataset")?;
            let report = evaluate_documents(&load_predictions(preds)?, &pairs_at(gold, &config)?)?;
            write!(stdout, "{}", report.to_table())?;
            write_report(config.paths.out.as_deref(), &report.to_key_values())?;
            Ok(0)
        }
        Command::EvalSent => {
            let preds = require(&config.paths.predictions, "predictions")?;
            let gold = require(&config.paths.annotations, "annotations")?;
            let report = evaluate_sentences(&load_predictions(preds)?, &load_annotations(gold)?)?;
            write!(stdout, "{}", report.to_table())?;
            write_report(config.paths.out.as_deref(), &report.to_key_values())?;
            Ok(0)
        }
        Command::Gradcheck {
            samples,
            tolerance,
            coordinates,
            small,
        } => {
            let model = match &config.paths.checkpoint {
                Some(p) => load_checkpoint(p)?.model,
                None => {
                    let mc = if *small {
                        ModelConfig::small(config.train.fusion)
                    } else {
                        config.model.clone()
                    };
                    use rand::SeedableRng;
                    Model::init(&mc, &mut rand_chacha::ChaCha8Rng::seed_from_u64(config.train.seed))
                }
            };
            let gc = GradcheckConfig {
                samples: *samples,
                tolerance: *tolerance,
                coordinates: *coordinates,
                seed: config.train.seed,
                ..GradcheckConfig::default()
            };
            let report = gradcheck(&model, &gc).map_err(|e| CliError::Validation(e.to_string()))?;
            writeln!(
                stdout,
                "fusion={} samples={} checked={} max_relative_error={:.3e} tolerance={:e} passed={}",
                model.method(),
                gc.samples,
                report.checked,
                report.max_relative_error,
                gc.tolerance,
                report.passed(gc.tolerance)
            )?;
            if report.passed(gc.tolerance) {
                Ok(0)
            } else {
                Err(CliError::Validation(format!(
                    "max relative error {:.3e} exceeds {:e}",
                    report.max_relative_error, gc.tolerance
                )))
            }
        }
        Command::SweepK { ks } => {
            let ks: Vec<usize> = ks
                .split(',')
                .map(|k| {
                    k.trim()
                        .parse()
                        .map_err(|_| CliError::Usage(format!("bad --ks `{ks}`")))
                })
                .collect::<Result<_, _>>()?;
            if ks.is_empty() || ks.contains(&0) {
                return Err(CliError::Usage("--ks needs positive values".into()));
            }
            let train_path = require(&config.paths.dataset, "dataset")?;
            let dev_path = require(&config.paths.dev, "dev")?;
            let test_path = require(&config.paths.test, "test")?;
            if config.retrieval.method == RetrievalMethod::EmbeddingCosine {
                return Err(CliError::Usage(
                    "sweep-k supports lexical and random retrieval only".into(),
                ));
            }
            echo_config(&config, stderr)?;
            let seg = segmenter(&config)?;
            let train_pairs = pairs_at(train_path, &config)?;
            let dev_pairs = pairs_at(dev_path, &config)?;
            let test_pairs = pairs_at(test_path, &config)?;
            let gold = config.paths.annotations.as_deref().map(load_annotations).transpose()?;
            let splits = Splits {
                train: &train_pairs,
                dev: &dev_pairs,
                test: &test_pairs,
                test_gold: gold.as_deref(),
            };
            let base = ExperimentConfig {
                retrieval: config.retrieval.clone(),
                model: config.model.clone(),
                train: config.train.clone(),
            };
            let reports = k_sweep(splits, &seg, &base, &ks, stderr)?;
            let mut text = String::new();
            for r in &reports {
                text.push_str(&r.summary());
                text.push('\n');
            }
            write!(stdout, "{text}")?;
            if let Some(dir) = &config.paths.out {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
                for r in &reports {
                    let mut body = r.test.to_key_values();
                    if let Some(s) = &r.sentences {
                        body.push_str(&s.to_key_values());
                    }
                    write_report(Some(&dir.join(format!("k{}.report", r.retrieval.k))), &body)?;
                }
            }
            Ok(0)
        }
    }
}

fn config_sets(args: &RunArgs, key: &str) -> bool {
    args.overrides
        .iter()
        .any(|o| o.split_once('=').is_some_and(|(k, _)| k.trim() == key))
        || args.config.as_deref().is_some_and(|p| {
            std::fs::read_to_string(p).is_ok_and(|t| {
                t.lines()
                    .filter_map(|l| l.split('#').next()?.split_once('='))
                    .any(|(k, _)| k.trim() == key)
            })
        })
}

/// Writes everything to two sinks.
struct Tee<'a> {
    a: &'a mut dyn Write,
    b: &'a mut dyn Write,
}

impl Write for Tee<'_> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.a.write_all(buf)?;
        self.b.write_all(buf)?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.a.flush()?;
        self.b.flush()
    }
}
