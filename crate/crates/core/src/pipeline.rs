//! File-staged pipeline: retrieve, prepare reader inputs, predict, evaluate.
//!
//! Evidence files hold one JSON object per (pair, hypothesis sentence):
//!
//! ```text
//! {"id":"p1","hypothesis_index":0,"evidence_indices":[2,5],"relevance_scores":[0.61,0.4],"is_substring":false}
//! ```
//!
//! Prediction files hold one object per pair with a `sentences` array.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{to_json_lines, AnnotatedSample, CorpusError, DocPair, EmbeddingStore, Label};
use crate::fusion::FusionMethod;
use crate::metrics::{doc_eval, sentence_eval, DocEvalReport, MetricsError, SentenceEvalReport, SentenceRecord};
use crate::model::{Model, ModelError, PreparedSample};
use crate::reader::{extract_features, ReaderError, ReaderInput};
use crate::retrieval::{
    DenseContext, EvidenceSelection, PremiseIndex, RetrievalConfig, RetrievalError, RetrievalMethod,
};
use crate::text::{Segmenter, TextError};
use crate::training::{predict, TrainError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("pair {id}: {source}")]
    Text {
        id: String,
        #[source]
        source: TextError,
    },
    #[error("pair {id}: {source}")]
    Retrieval {
        id: String,
        #[source]
        source: RetrievalError,
    },
    #[error("pair {id}: {source}")]
    Reader {
        id: String,
        #[source]
        source: ReaderError,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    /// Two inputs that should describe the same pairs disagree.
    #[error("{0}")]
    Mismatch(String),
}

impl PipelineError {
    /// Bad input data rather than an environment failure.
    pub fn is_validation(&self) -> bool {
        match self {
            PipelineError::Corpus(e) => e.is_validation(),
            PipelineError::Train(TrainError::Log(_)) => false,
            PipelineError::Train(TrainError::NonFiniteLoss { .. } | TrainError::NonFiniteParameters { .. }) => false,
            _ => true,
        }
    }
}

/// One line of an evidence file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub id: String,
    #[serde(flatten)]
    pub selection: EvidenceSelection,
}

/// Runs retrieval for every hypothesis sentence of every pair.
pub fn retrieve_pairs(
    pairs: &[DocPair],
    segmenter: &Segmenter,
    config: &RetrievalConfig,
    store: Option<&EmbeddingStore>,
) -> Result<Vec<EvidenceRecord>, PipelineError> {
    let mut out = Vec::new();
    for pair in pairs {
        let text_err = |source| PipelineError::Text {
            id: pair.id.clone(),
            source,
        };
        let ret_err = |source| PipelineError::Retrieval {
            id: pair.id.clone(),
            source,
        };
        let premise = segmenter.split(&pair.premise).map_err(text_err)?;
        let hypothesis = segmenter.split(&pair.hypothesis).map_err(text_err)?;
        let index = PremiseIndex::new(&premise, config).map_err(ret_err)?;
        let dense = store.map(|store| DenseContext {
            store,
            pair_id: &pair.id,
        });
        if config.method == RetrievalMethod::EmbeddingCosine && dense.is_none() {
            return Err(ret_err(RetrievalError::InvalidConfig(
                "embedding_cosine retrieval needs an embedding store".into(),
            )));
        }
        for (i, sentence) in hypothesis.iter().enumerate() {
            let selection = index.select(i, sentence, config, dense).map_err(ret_err)?;
            out.push(EvidenceRecord {
                id: pair.id.clone(),
                selection,
            });
        }
    }
    Ok(out)
}

pub fn read_evidence<R: BufRead>(reader: R) -> Result<Vec<EvidenceRecord>, CorpusError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EvidenceRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        let sel = &record.selection;
        if sel.evidence_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CorpusError::Parse {
                line: n + 1,
                message: "evidence indices must be strictly increasing".into(),
            });
        }
        if sel.relevance_scores.len() != sel.evidence_indices.len() {
            return Err(CorpusError::Parse {
                line: n + 1,
                message: "relevance_scores and evidence_indices differ in length".into(),
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_evidence(path: &Path) -> Result<Vec<EvidenceRecord>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_evidence(std::io::BufReader::new(file))
}

pub fn save_evidence(path: &Path, records: &[EvidenceRecord]) -> Result<(), CorpusError> {
    crate::fsio::write_atomic(path, to_json_lines(records).as_bytes()).map_err(|e| CorpusError::io(path, e))
}

/// Evidence grouped per pair id, ordered by hypothesis sentence.
fn group_evidence<'a>(
    pairs: &[DocPair],
    evidence: &'a [EvidenceRecord],
) -> Result<HashMap<&'a str, Vec<&'a EvidenceSelection>>, PipelineError> {
    let known: std::collections::HashSet<&str> = pairs.iter().map(|p| p.id.as_str()).collect();
    let mut by_id: HashMap<&str, Vec<&EvidenceSelection>> = HashMap::new();
    for r in evidence {
        if !known.contains(r.id.as_str()) {
            return Err(PipelineError::Mismatch(format!("evidence for unknown pair {}", r.id)));
        }
        by_id.entry(r.id.as_str()).or_default().push(&r.selection);
    }
    for list in by_id.values_mut() {
        list.sort_by_key(|s| s.hypothesis_index);
        if list.iter().enumerate().any(|(i, s)| s.hypothesis_index != i) {
            return Err(PipelineError::Mismatch(
                "evidence hypothesis indices are not 0..m".into(),
            ));
        }
    }
    Ok(by_id)
}

/// A pair with its sentences and evidence, ready for the reader.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleView {
    pub id: String,
    pub hypothesis_sentences: Vec<String>,
    pub evidence: Vec<EvidenceSelection>,
}

/// Splits pairs and attaches their evidence, checking sentence counts and
/// index ranges agree.
pub fn join_evidence(
    pairs: &[DocPair],
    evidence: &[EvidenceRecord],
    segmenter: &Segmenter,
) -> Result<Vec<(SampleView, Vec<String>)>, PipelineError> {
    let by_id = group_evidence(pairs, evidence)?;
    let mut out = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let text_err = |source| PipelineError::Text {
            id: pair.id.clone(),
            source,
        };
        let premise = segmenter.split(&pair.premise).map_err(text_err)?;
        let hypothesis = segmenter.split(&pair.hypothesis).map_err(text_err)?;
        let selections = by_id
            .get(pair.id.as_str())
            .ok_or_else(|| PipelineError::Mismatch(format!("no evidence for pair {}", pair.id)))?;
        if selections.len() != hypothesis.len() {
            return Err(PipelineError::Mismatch(format!(
                "pair {}: {} hypothesis sentences but {} evidence records",
                pair.id,
                hypothesis.len(),
                selections.len()
            )));
        }
        if let Some(bad) = selections
            .iter()
            .flat_map(|s| &s.evidence_indices)
            .find(|&&j| j >= premise.len())
        {
            return Err(PipelineError::Mismatch(format!(
                "pair {}: evidence index {bad} but premise has {} sentences",
                pair.id,
                premise.len()
            )));
        }
        out.push((
            SampleView {
                id: pair.id.clone(),
                hypothesis_sentences: hypothesis.sentences().to_vec(),
                evidence: selections.iter().map(|s| (*s).clone()).collect(),
            },
            premise.sentences().to_vec(),
        ));
    }
    Ok(out)
}

/// Extracts reader features once per hypothesis sentence.
pub fn prepare_samples(
    pairs: &[DocPair],
    evidence: &[EvidenceRecord],
    segmenter: &Segmenter,
    evidence_slots: usize,
) -> Result<Vec<PreparedSample>, PipelineError> {
    let joined = join_evidence(pairs, evidence, segmenter)?;
    let mut out = Vec::with_capacity(pairs.len());
    for (pair, (view, premise)) in pairs.iter().zip(joined) {
        let mut sentences = Vec::with_capacity(view.hypothesis_sentences.len());
        for (text, sel) in view.hypothesis_sentences.iter().zip(&view.evidence) {
            if sel.is_substring {
                sentences.push(None);
                continue;
            }
            let input = ReaderInput::new(text.as_str(), sel.evidence_indices.iter().map(|&j| premise[j].as_str()));
            let features = extract_features(&input, evidence_slots).map_err(|source| PipelineError::Reader {
                id: pair.id.clone(),
                source,
            })?;
            sentences.push(Some(features));
        }
        out.push(PreparedSample {
            id: pair.id.clone(),
            label: pair.label,
            sentences,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePrediction {
    pub index: usize,
    pub score: f64,
    pub label: Label,
    pub evidence_indices: Vec<usize>,
    pub is_substring: bool,
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub label: Label,
    pub score: f64,
    pub fusion: FusionMethod,
    /// Least credible hypothesis sentence; set for score-min only.
    pub argmin_index: Option<usize>,
    pub sentences: Vec<SentencePrediction>,
}

/// Predicts every pair. `evidence` must cover the same pairs as `samples`.
pub fn predict_records(
    model: &Model,
    samples: &[PreparedSample],
    evidence: &[EvidenceRecord],
    threshold: f64,
) -> Result<Vec<PredictionRecord>, PipelineError> {
    let mut by_id: HashMap<&str, Vec<&EvidenceSelection>> = HashMap::new();
    for r in evidence {
        by_id.entry(r.id.as_str()).or_default().push(&r.selection);
    }
    let mut out = Vec::with_capacity(samples.len());
    for sample in samples {
        let p = predict(model, sample, threshold)?;
        let mut sels = by_id.remove(sample.id.as_str()).unwrap_or_default();
        sels.sort_by_key(|s| s.hypothesis_index);
        if sels.len() != p.sentence_scores.len() {
            return Err(PipelineError::Mismatch(format!(
                "pair {}: evidence does not match sentences",
                sample.id
            )));
        }
        let sentences = sels
            .iter()
            .zip(p.sentence_scores.iter().zip(&p.sentence_labels))
            .map(|(sel, (&score, &label))| SentencePrediction {
                index: sel.hypothesis_index,
                score,
                label,
                evidence_indices: sel.evidence_indices.clone(),
                is_substring: sel.is_substring,
            })
            .collect();
        out.push(PredictionRecord {
            id: p.id,
            label: p.label,
            score: p.score,
            fusion: p.fusion,
            argmin_index: p.argmin_index,
            sentences,
        });
    }
    Ok(out)
}

pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<PredictionRecord>, CorpusError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_predictions(std::io::BufReader::new(file))
}

pub fn save_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), CorpusError> {
    crate::fsio::write_atomic(path, to_json_lines(records).as_bytes()).map_err(|e| CorpusError::io(path, e))
}

/// Document metrics of predictions against labelled pairs, matched by id.
pub fn evaluate_documents(predictions: &[PredictionRecord], gold: &[DocPair]) -> Result<DocEvalReport, PipelineError> {
    let gold_by_id: HashMap<&str, Option<Label>> = gold.iter().map(|p| (p.id.as_str(), p.label)).collect();
    let mut predicted = Vec::with_capacity(predictions.len());
    let mut labels = Vec::with_capacity(predictions.len());
    for p in predictions {
        let label = gold_by_id
            .get(p.id.as_str())
            .ok_or_else(|| PipelineError::Mismatch(format!("prediction for unknown pair {}", p.id)))?
            .ok_or_else(|| PipelineError::Mismatch(format!("pair {} has no gold label", p.id)))?;
        predicted.push(p.label);
        labels.push(label);
    }
    if predictions.len() != gold.len() {
        return Err(PipelineError::Mismatch(format!(
            "{} predictions for {} gold pairs",
            predictions.len(),
            gold.len()
        )));
    }
    Ok(doc_eval(&predicted, &labels)?)
}

/// Sentence records pairing predictions with annotations, matched by id.
pub fn sentence_records(
    predictions: &[PredictionRecord],
    gold: &[AnnotatedSample],
) -> Result<Vec<SentenceRecord>, PipelineError> {
    let by_id: HashMap<&str, &PredictionRecord> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut out = Vec::new();
    for sample in gold {
        let pred = by_id
            .get(sample.id.as_str())
            .ok_or_else(|| PipelineError::Mismatch(format!("no prediction for annotated pair {}", sample.id)))?;
        if pred.sentences.len() != sample.hypothesis_sentences.len() {
            return Err(PipelineError::Mismatch(format!(
                "pair {}: {} predicted sentences but {} annotated",
                sample.id,
                pred.sentences.len(),
                sample.hypothesis_sentences.len()
            )));
        }
        for (p, g) in pred.sentences.iter().zip(&sample.hypothesis_sentences) {
            out.push(SentenceRecord {
                retrieved: p.evidence_indices.clone(),
                is_substring: p.is_substring,
                predicted: p.label,
                gold: g.label,
                gold_groups: g.evidence_groups.clone(),
            });
        }
    }
    Ok(out)
}

pub fn evaluate_sentences(
    predictions: &[PredictionRecord],
    gold: &[AnnotatedSample],
) -> Result<SentenceEvalReport, PipelineError> {
    Ok(sentence_eval(&sentence_records(predictions, gold)?))
}
