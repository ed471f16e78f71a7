//! Run configuration: flat `section.key = value` files plus overrides.
//!
//! ```text
//! # comments start with '#'
//! retrieval.method = bm25
//! retrieval.k = 5
//! train.epochs = 5
//! reader.dim = 32
//! paths.dataset = data/train.jsonl
//! ```
//!
//! Later assignments win, so command-line overrides are applied by calling
//! [`RunConfig::set`] after the file has been loaded.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::FieldMap;
use crate::fusion::FusionMethod;
use crate::model::{KernelMeans, ModelConfig};
use crate::retrieval::RetrievalConfig;
use crate::training::TrainConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: expected `section.key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {message}")]
    BadValue {
        key: String,
        value: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub evidence: Option<PathBuf>,
    pub dev_evidence: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub retrieval: RetrievalConfig,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub fields: FieldMap,
    pub paths: Paths,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        message: e.to_string(),
    })
}

fn parse_widths(key: &str, value: &str) -> Result<Vec<usize>, ConfigError> {
    if value.trim().is_empty() || value.trim() == "none" {
        return Ok(Vec::new());
    }
    value.split(',').map(|w| parse(key, w.trim())).collect()
}

fn show_widths(w: &[usize]) -> String {
    if w.is_empty() {
        "none".into()
    } else {
        w.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    }
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or(String::new(), |p| p.display().to_string())
}

impl RunConfig {
    pub const KEYS: [&'static str; 41] = [
        "retrieval.method",
        "retrieval.k",
        "retrieval.bm25_k1",
        "retrieval.bm25_b",
        "retrieval.bm25_idf_epsilon",
        "retrieval.random_seed",
        "retrieval.rouge_variant",
        "train.epochs",
        "train.batch_size",
        "train.accumulation_steps",
        "train.learning_rate",
        "train.weight_decay",
        "train.eval_interval",
        "train.seed",
        "train.fusion",
        "train.threshold",
        "train.selection_metric",
        "reader.dim",
        "reader.encoder_hidden",
        "reader.head_hidden",
        "reader.init_scale",
        "fusion.hidden",
        "kernel.count",
        "kernel.width",
        "kernel.means",
        "data.id_field",
        "data.hypothesis_field",
        "data.premise_field",
        "data.label_field",
        "paths.dataset",
        "paths.dev",
        "paths.test",
        "paths.annotations",
        "paths.embeddings",
        "paths.evidence",
        "paths.dev_evidence",
        "paths.predictions",
        "paths.checkpoint",
        "paths.out",
        "paths.log",
        "paths.abbreviations",
    ];

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut config = Self::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    /// Applies every assignment in `text` in order.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: n + 1 })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment.split_once('=').ok_or(ConfigError::Syntax { line: 0 })?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        let r = &mut self.retrieval;
        let t = &mut self.train;
        let m = &mut self.model;
        match key {
            "retrieval.method" => r.method = parse(key, value)?,
            "retrieval.k" => r.k = parse(key, value)?,
            "retrieval.bm25_k1" => r.bm25_k1 = parse(key, value)?,
            "retrieval.bm25_b" => r.bm25_b = parse(key, value)?,
            "retrieval.bm25_idf_epsilon" => r.bm25_idf_epsilon = parse(key, value)?,
            "retrieval.random_seed" => r.random_seed = parse(key, value)?,
            "retrieval.rouge_variant" => r.rouge_variant = parse(key, value)?,
            "train.epochs" => t.epochs = parse(key, value)?,
            "train.batch_size" => t.batch_size = parse(key, value)?,
            "train.accumulation_steps" => t.accumulation_steps = parse(key, value)?,
            "train.learning_rate" => t.learning_rate = parse(key, value)?,
            "train.weight_decay" => t.weight_decay = parse(key, value)?,
            "train.eval_interval" => {
                t.eval_interval = match value {
                    "epoch" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "train.seed" => t.seed = parse(key, value)?,
            "train.fusion" => t.fusion = parse(key, value)?,
            "train.threshold" => t.threshold = parse(key, value)?,
            "train.selection_metric" => t.selection_metric = parse(key, value)?,
            "reader.dim" => m.reader.dim = parse(key, value)?,
            "reader.encoder_hidden" => m.reader.encoder_hidden = parse_widths(key, value)?,
            "reader.head_hidden" => m.reader.head_hidden = parse_widths(key, value)?,
            "reader.init_scale" => m.reader.init_scale = parse(key, value)?,
            "fusion.hidden" => m.fusion_hidden = parse_widths(key, value)?,
            "kernel.count" => m.kernel_count = parse(key, value)?,
            "kernel.width" => m.kernel_width = parse(key, value)?,
            "kernel.means" => {
                m.kernel_means = match value {
                    "evenly" => KernelMeans::Evenly,
                    "random" => KernelMeans::Random,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            message: "expected evenly or random".into(),
                        })
                    }
                }
            }
            "data.id_field" => self.fields.id = (!value.is_empty()).then(|| value.to_string()),
            "data.hypothesis_field" => self.fields.hypothesis = value.to_string(),
            "data.premise_field" => self.fields.premise = value.to_string(),
            "data.label_field" => self.fields.label = value.to_string(),
            "paths.dataset" => self.paths.dataset = path(),
            "paths.dev" => self.paths.dev = path(),
            "paths.test" => self.paths.test = path(),
            "paths.annotations" => self.paths.annotations = path(),
            "paths.embeddings" => self.paths.embeddings = path(),
            "paths.evidence" => self.paths.evidence = path(),
            "paths.dev_evidence" => self.paths.dev_evidence = path(),
            "paths.predictions" => self.paths.predictions = path(),
            "paths.checkpoint" => self.paths.checkpoint = path(),
            "paths.out" => self.paths.out = path(),
            "paths.log" => self.paths.log = path(),
            "paths.abbreviations" | "text.abbreviations" => self.paths.abbreviations = path(),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let r = &self.retrieval;
        let t = &self.train;
        let m = &self.model;
        let p = &self.paths;
        Some(match key {
            "retrieval.method" => r.method.to_string(),
            "retrieval.k" => r.k.to_string(),
            "retrieval.bm25_k1" => r.bm25_k1.to_string(),
            "retrieval.bm25_b" => r.bm25_b.to_string(),
            "retrieval.bm25_idf_epsilon" => r.bm25_idf_epsilon.to_string(),
            "retrieval.random_seed" => r.random_seed.to_string(),
            "retrieval.rouge_variant" => r.rouge_variant.as_str().to_string(),
            "train.epochs" => t.epochs.to_string(),
            "train.batch_size" => t.batch_size.to_string(),
            "train.accumulation_steps" => t.accumulation_steps.to_string(),
            "train.learning_rate" => t.learning_rate.to_string(),
            "train.weight_decay" => t.weight_decay.to_string(),
            "train.eval_interval" => t.eval_interval.map_or("epoch".into(), |n| n.to_string()),
            "train.seed" => t.seed.to_string(),
            "train.fusion" => t.fusion.to_string(),
            "train.threshold" => t.threshold.to_string(),
            "train.selection_metric" => t.selection_metric.as_str().to_string(),
            "reader.dim" => m.reader.dim.to_string(),
            "reader.encoder_hidden" => show_widths(&m.reader.encoder_hidden),
            "reader.head_hidden" => show_widths(&m.reader.head_hidden),
            "reader.init_scale" => m.reader.init_scale.to_string(),
            "fusion.hidden" => show_widths(&m.fusion_hidden),
            "kernel.count" => m.kernel_count.to_string(),
            "kernel.width" => m.kernel_width.to_string(),
            "kernel.means" => match m.kernel_means {
                KernelMeans::Evenly => "evenly".into(),
                KernelMeans::Random => "random".into(),
            },
            "data.id_field" => self.fields.id.clone().unwrap_or_default(),
            "data.hypothesis_field" => self.fields.hypothesis.clone(),
            "data.premise_field" => self.fields.premise.clone(),
            "data.label_field" => self.fields.label.clone(),
            "paths.dataset" => show_path(&p.dataset),
            "paths.dev" => show_path(&p.dev),
            "paths.test" => show_path(&p.test),
            "paths.annotations" => show_path(&p.annotations),
            "paths.embeddings" => show_path(&p.embeddings),
            "paths.evidence" => show_path(&p.evidence),
            "paths.dev_evidence" => show_path(&p.dev_evidence),
            "paths.predictions" => show_path(&p.predictions),
            "paths.checkpoint" => show_path(&p.checkpoint),
            "paths.out" => show_path(&p.out),
            "paths.log" => show_path(&p.log),
            "paths.abbreviations" => show_path(&p.abbreviations),
            _ => return None,
        })
    }

    /// Every key with its resolved value, one `key = value` per line.
    pub fn render(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("known key")))
            .collect()
    }

    /// Keeps derived settings consistent and validates each section.
    pub fn resolve(&mut self) -> Result<(), ConfigError> {
        self.model.fusion = self.train.fusion;
        self.model.reader.evidence_slots = self.retrieval.k;
        self.retrieval
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let m = &self.model;
        if m.reader.dim == 0
            || m.reader.encoder_hidden.contains(&0)
            || m.reader.head_hidden.contains(&0)
            || m.fusion_hidden.contains(&0)
        {
            return Err(ConfigError::Invalid("layer widths must be positive".into()));
        }
        if !(m.reader.init_scale.is_finite() && m.reader.init_scale > 0.0) {
            return Err(ConfigError::Invalid("reader.init_scale must be > 0".into()));
        }
        if m.fusion == FusionMethod::Kernel
            && (m.kernel_count == 0 || !(m.kernel_width.is_finite() && m.kernel_width > 0.0))
        {
            return Err(ConfigError::Invalid(
                "kernel.count and kernel.width must be positive".into(),
            ));
        }
        Ok(())
    }
}
