//! In-memory experiment runs: retrieval, training, prediction and both
//! evaluation levels, with optional sweeps over K or retrieval method.

use std::io::Write;

use crate::corpus::{AnnotatedSample, DocPair, SyntheticCorpus};
use crate::metrics::{DocEvalReport, SentenceEvalReport};
use crate::model::{Model, ModelConfig};
use crate::pipeline::{
    evaluate_documents, evaluate_sentences, predict_records, prepare_samples, retrieve_pairs, PipelineError,
    PredictionRecord,
};
use crate::retrieval::{RetrievalConfig, RetrievalMethod};
use crate::text::Segmenter;
use crate::training::{train, TrainConfig};

/// Data for one run. Gold annotations are optional; without them only
/// document metrics are reported.
#[derive(Debug, Clone, Copy)]
pub struct Splits<'a> {
    pub train: &'a [DocPair],
    pub dev: &'a [DocPair],
    pub test: &'a [DocPair],
    pub test_gold: Option<&'a [AnnotatedSample]>,
}

impl<'a> From<&'a SyntheticCorpus> for Splits<'a> {
    fn from(c: &'a SyntheticCorpus) -> Self {
        Self {
            train: &c.train.pairs,
            dev: &c.dev.pairs,
            test: &c.test.pairs,
            test_gold: Some(&c.test.gold),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub retrieval: RetrievalConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    /// Aligns the reader's evidence slots and the head with the other configs.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.model.reader.evidence_slots = c.retrieval.k;
        c.model.fusion = c.train.fusion;
        c
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub retrieval: RetrievalConfig,
    pub best_dev: DocEvalReport,
    pub test: DocEvalReport,
    pub sentences: Option<SentenceEvalReport>,
    pub steps: usize,
    pub model: Model,
    pub predictions: Vec<PredictionRecord>,
}

impl ExperimentReport {
    /// One key=value line summarising the run.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "method={} k={} steps={} dev_macro_f1={:.6} test_micro_f1={:.6} test_macro_f1={:.6}",
            self.retrieval.method,
            self.retrieval.k,
            self.steps,
            self.best_dev.macro_f1,
            self.test.micro_f1,
            self.test.macro_f1
        );
        if let Some(r) = &self.sentences {
            s.push_str(&format!(
                " evidence_precision={:.6} evidence_recall={:.6} label_accuracy={:.6} full_accuracy={:.6}",
                r.evidence_precision, r.evidence_recall, r.label_accuracy, r.full_accuracy
            ));
        }
        s
    }
}

pub fn run_experiment(
    splits: Splits<'_>,
    segmenter: &Segmenter,
    config: &ExperimentConfig,
    log: &mut dyn Write,
) -> Result<ExperimentReport, PipelineError> {
    let config = config.resolved();
    let k = config.retrieval.k;
    let prepare = |pairs: &[DocPair]| -> Result<_, PipelineError> {
        let evidence = retrieve_pairs(pairs, segmenter, &config.retrieval, None)?;
        let samples = prepare_samples(pairs, &evidence, segmenter, k)?;
        Ok((evidence, samples))
    };
    let (_, train_samples) = prepare(splits.train)?;
    let (_, dev_samples) = prepare(splits.dev)?;
    let (test_evidence, test_samples) = prepare(splits.test)?;
    let outcome = train(&train_samples, &dev_samples, &config.model, &config.train, log)?;
    let predictions = predict_records(&outcome.model, &test_samples, &test_evidence, config.train.threshold)?;
    let test = evaluate_documents(&predictions, splits.test)?;
    let sentences = splits
        .test_gold
        .map(|gold| evaluate_sentences(&predictions, gold))
        .transpose()?;
    Ok(ExperimentReport {
        retrieval: config.retrieval,
        best_dev: outcome.best_dev,
        test,
        sentences,
        steps: outcome.steps,
        model: outcome.model,
        predictions,
    })
}

/// One experiment per K, everything else fixed.
pub fn k_sweep(
    splits: Splits<'_>,
    segmenter: &Segmenter,
    base: &ExperimentConfig,
    ks: &[usize],
    log: &mut dyn Write,
) -> Result<Vec<ExperimentReport>, PipelineError> {
    ks.iter()
        .map(|&k| {
            let mut config = base.clone();
            config.retrieval.k = k;
            writeln!(log, "event=sweep k={k}").map_err(crate::training::TrainError::from)?;
            run_experiment(splits, segmenter, &config, log)
        })
        .collect()
}

/// One experiment per retrieval method, everything else fixed.
pub fn method_comparison(
    splits: Splits<'_>,
    segmenter: &Segmenter,
    base: &ExperimentConfig,
    methods: &[RetrievalMethod],
    log: &mut dyn Write,
) -> Result<Vec<ExperimentReport>, PipelineError> {
    methods
        .iter()
        .map(|&method| {
            let mut config = base.clone();
            config.retrieval.method = method;
            writeln!(log, "event=compare method={method}").map_err(crate::training::TrainError::from)?;
            run_experiment(splits, segmenter, &config, log)
        })
        .collect()
}
