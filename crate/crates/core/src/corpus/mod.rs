//! Dataset records, line-delimited JSON ingestion, embeddings, synthetic data
//! and checkpoint persistence.
//!
//! Dataset files hold one JSON object per line:
//!
//! ```text
//! {"id": "p1", "hypothesis": "...", "premise": "...", "label": "entailment"}
//! ```
//!
//! `label` is optional and may be `entailment`, `not_entailment`, or the
//! integers 1 / 0. Field names can be remapped with [`FieldMap`].

pub mod checkpoint;
pub mod embeddings;
pub mod synth;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, ModelCheckpoint, CHECKPOINT_VERSION};
pub use embeddings::EmbeddingStore;
pub use synth::{generate_synthetic, SynthConfig, SyntheticCorpus, SyntheticSplit};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id '{id}'")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: field '{field}' is empty")]
    EmptyField { line: usize, field: String },
    #[error("invalid annotation for '{id}': {message}")]
    InvalidAnnotation { id: String, message: String },
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Malformed input, as opposed to an I/O failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, CorpusError::Io { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Entailment,
    NotEntailment,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::NotEntailment => "not_entailment",
        }
    }

    /// 1 for entailment, 0 otherwise.
    pub fn target(self) -> f64 {
        match self {
            Label::Entailment => 1.0,
            Label::NotEntailment => 0.0,
        }
    }

    pub fn from_score(score: f64, threshold: f64) -> Self {
        if score >= threshold {
            Label::Entailment
        } else {
            Label::NotEntailment
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().replace([' ', '-'], "_").as_str() {
            "entailment" | "1" => Ok(Label::Entailment),
            "not_entailment" | "non_entailment" | "0" => Ok(Label::NotEntailment),
            other => Err(format!("unknown label '{other}'")),
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocPair {
    pub id: String,
    pub hypothesis: String,
    pub premise: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

/// JSON field names used when reading pairs. With `id: None`, ids are
/// generated from line numbers (`line-1`, `line-2`, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMap {
    pub id: Option<String>,
    pub hypothesis: String,
    pub premise: String,
    pub label: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            id: Some("id".into()),
            hypothesis: "hypothesis".into(),
            premise: "premise".into(),
            label: "label".into(),
        }
    }
}

fn text_field(obj: &serde_json::Map<String, Value>, name: &str, line: usize) -> Result<String, CorpusError> {
    match obj.get(name) {
        None | Some(Value::Null) => Err(CorpusError::Parse {
            line,
            message: format!("missing field '{name}'"),
        }),
        Some(Value::String(s)) if s.trim().is_empty() => Err(CorpusError::EmptyField {
            line,
            field: name.to_string(),
        }),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(other) => Err(CorpusError::Parse {
            line,
            message: format!("field '{name}' should be a string, got {other}"),
        }),
    }
}

pub fn read_pairs<R: BufRead>(reader: R, fields: &FieldMap) -> Result<Vec<DocPair>, CorpusError> {
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(CorpusError::Parse {
                line: line_no,
                message: "record is not a JSON object".into(),
            });
        };
        let id = match &fields.id {
            Some(name) => text_field(&obj, name, line_no)?,
            None => format!("line-{line_no}"),
        };
        let hypothesis = text_field(&obj, &fields.hypothesis, line_no)?;
        let premise = text_field(&obj, &fields.premise, line_no)?;
        let label = match obj.get(&fields.label) {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(
                s.parse()
                    .map_err(|message| CorpusError::Parse { line: line_no, message })?,
            ),
            Some(Value::Number(n)) => Some(
                n.to_string()
                    .parse()
                    .map_err(|message| CorpusError::Parse { line: line_no, message })?,
            ),
            Some(other) => {
                return Err(CorpusError::Parse {
                    line: line_no,
                    message: format!("unsupported label {other}"),
                })
            }
        };
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id });
        }
        pairs.push(DocPair {
            id,
            hypothesis,
            premise,
            label,
        });
    }
    Ok(pairs)
}

pub fn load_pairs(path: &Path, fields: &FieldMap) -> Result<Vec<DocPair>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_pairs(std::io::BufReader::new(file), fields)
}

/// Serializes records as JSON lines.
pub fn to_json_lines<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn save_pairs(path: &Path, pairs: &[DocPair]) -> Result<(), CorpusError> {
    crate::fsio::write_atomic(path, to_json_lines(pairs).as_bytes()).map_err(|e| CorpusError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub text: String,
    pub label: Label,
    /// Alternative sets of premise sentence indices, each sufficient on its own.
    #[serde(default)]
    pub evidence_groups: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSample {
    pub id: String,
    pub label: Label,
    pub hypothesis_sentences: Vec<AnnotatedSentence>,
}

impl AnnotatedSample {
    /// Checks internal consistency; evidence indices are range-checked when
    /// the premise sentence count is known.
    pub fn validate(&self, premise_sentences: Option<usize>) -> Result<(), CorpusError> {
        let bad = |message: String| {
            Err(CorpusError::InvalidAnnotation {
                id: self.id.clone(),
                message,
            })
        };
        if self.hypothesis_sentences.is_empty() {
            return bad("no hypothesis sentences".into());
        }
        for (i, s) in self.hypothesis_sentences.iter().enumerate() {
            if s.label == Label::Entailment
                && (s.evidence_groups.is_empty() || s.evidence_groups.iter().any(Vec::is_empty))
            {
                return bad(format!("entailed sentence {i} needs non-empty evidence groups"));
            }
            if self.label == Label::Entailment && s.label != Label::Entailment {
                return bad(format!("entailment document has non-entailed sentence {i}"));
            }
            if let Some(n) = premise_sentences {
                if let Some(idx) = s.evidence_groups.iter().flatten().find(|&&j| j >= n) {
                    return bad(format!("sentence {i} cites premise sentence {idx} of {n}"));
                }
            }
        }
        if self.label == Label::NotEntailment && self.hypothesis_sentences.iter().all(|s| s.label == Label::Entailment)
        {
            return bad("not_entailment document has only entailed sentences".into());
        }
        Ok(())
    }
}

pub fn read_annotations<R: BufRead>(reader: R) -> Result<Vec<AnnotatedSample>, CorpusError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: AnnotatedSample = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if sample.id.is_empty() {
            return Err(CorpusError::EmptyField {
                line: line_no,
                field: "id".into(),
            });
        }
        sample.validate(None)?;
        if !seen.insert(sample.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: sample.id,
            });
        }
        out.push(sample);
    }
    Ok(out)
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotatedSample>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_annotations(std::io::BufReader::new(file))
}

pub fn save_annotations(path: &Path, samples: &[AnnotatedSample]) -> Result<(), CorpusError> {
    crate::fsio::write_atomic(path, to_json_lines(samples).as_bytes()).map_err(|e| CorpusError::io(path, e))
}

/// Default word-count bucket edges for [`dataset_stats`].
pub const DEFAULT_LENGTH_EDGES: [usize; 5] = [150, 300, 500, 800, 1000];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthBucket {
    pub name: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetStats {
    pub total: usize,
    pub entailment: usize,
    pub not_entailment: usize,
    pub unlabeled: usize,
    /// Histogram over premise + hypothesis word counts.
    pub lengths: Vec<LengthBucket>,
}

impl DatasetStats {
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "total={}", self.total);
        let _ = writeln!(out, "entailment={}", self.entailment);
        let _ = writeln!(out, "not_entailment={}", self.not_entailment);
        let _ = writeln!(out, "unlabeled={}", self.unlabeled);
        for b in &self.lengths {
            let share = if self.total == 0 {
                0.0
            } else {
                b.count as f64 / self.total as f64
            };
            let _ = writeln!(out, "words[{}]={} ({:.2}%)", b.name, b.count, 100.0 * share);
        }
        out
    }
}

fn bucket_names(edges: &[usize]) -> Vec<String> {
    let mut names = Vec::with_capacity(edges.len() + 1);
    if let Some(first) = edges.first() {
        names.push(format!("<{first}"));
    }
    for w in edges.windows(2) {
        names.push(format!("{}-{}", w[0], w[1]));
    }
    names.push(match edges.last() {
        Some(last) => format!(">={last}"),
        None => "all".into(),
    });
    names
}

/// Label counts and a word-count histogram; `edges` must be increasing.
pub fn dataset_stats(pairs: &[DocPair], edges: &[usize]) -> DatasetStats {
    let mut lengths: Vec<LengthBucket> = bucket_names(edges)
        .into_iter()
        .map(|name| LengthBucket { name, count: 0 })
        .collect();
    let mut stats = DatasetStats {
        total: pairs.len(),
        entailment: 0,
        not_entailment: 0,
        unlabeled: 0,
        lengths: Vec::new(),
    };
    for p in pairs {
        match p.label {
            Some(Label::Entailment) => stats.entailment += 1,
            Some(Label::NotEntailment) => stats.not_entailment += 1,
            None => stats.unlabeled += 1,
        }
        let words = p.hypothesis.split_whitespace().count() + p.premise.split_whitespace().count();
        let bucket = edges.iter().position(|&e| words < e).unwrap_or(edges.len());
        lengths[bucket].count += 1;
    }
    stats.lengths = lengths;
    stats
}
