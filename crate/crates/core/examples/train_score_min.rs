//! Retrieve, train a score-min model, checkpoint it, reload it and score
//! the test split.
//!
//! `cargo run --release --example train_score_min`

use std::error::Error;
use std::fmt::Write;

use docnli::corpus::{generate_synthetic, load_checkpoint, save_checkpoint, Label, ModelCheckpoint, SynthConfig};
use docnli::model::ModelConfig;
use docnli::pipeline::{evaluate_documents, evaluate_sentences, predict_records, prepare_samples, retrieve_pairs};
use docnli::retrieval::RetrievalConfig;
use docnli::text::Segmenter;
use docnli::training::{train, TrainConfig};

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let corpus = generate_synthetic(&SynthConfig {
        train: 400,
        dev: 100,
        test: 100,
        ..SynthConfig::default()
    })?;
    let seg = Segmenter::default();
    let retrieval = RetrievalConfig::default();
    let train_config = TrainConfig::default();
    let mut model_config = ModelConfig::with_fusion(train_config.fusion);
    model_config.reader.evidence_slots = retrieval.k;

    let train_ev = retrieve_pairs(&corpus.train.pairs, &seg, &retrieval, None)?;
    let dev_ev = retrieve_pairs(&corpus.dev.pairs, &seg, &retrieval, None)?;
    let test_ev = retrieve_pairs(&corpus.test.pairs, &seg, &retrieval, None)?;
    let train_samples = prepare_samples(&corpus.train.pairs, &train_ev, &seg, retrieval.k)?;
    let dev_samples = prepare_samples(&corpus.dev.pairs, &dev_ev, &seg, retrieval.k)?;
    let test_samples = prepare_samples(&corpus.test.pairs, &test_ev, &seg, retrieval.k)?;

    let mut log = Vec::new();
    let outcome = train(&train_samples, &dev_samples, &model_config, &train_config, &mut log)?;
    let mut out = String::from_utf8(log)?;

    let mut ckpt = ModelCheckpoint::new(outcome.model, model_config, retrieval, train_config.clone());
    ckpt.best_step = outcome.best_step;
    ckpt.best_dev = Some(outcome.best_dev);
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.json");
    save_checkpoint(&ckpt, &path)?;
    let restored = load_checkpoint(&path)?;
    writeln!(
        out,
        "checkpoint params={} bytes={} digest={}",
        restored.model.param_count(),
        std::fs::metadata(&path)?.len(),
        restored.train_digest
    )?;

    let predictions = predict_records(&restored.model, &test_samples, &test_ev, restored.threshold())?;
    let doc = evaluate_documents(&predictions, &corpus.test.pairs)?;
    let sent = evaluate_sentences(&predictions, &corpus.test.gold)?;
    write!(out, "{}", doc.to_table())?;
    write!(out, "{}", sent.to_table())?;

    // The least credible sentence explains each not-entailment call.
    if let Some(p) = predictions.iter().find(|p| p.label == Label::NotEntailment) {
        let weakest = p.argmin_index.map(|i| &p.sentences[i]);
        writeln!(
            out,
            "{} score={:.4} weakest={:?}",
            p.id,
            p.score,
            weakest.map(|s| (s.index, s.score))
        )?;
    }
    Ok(out)
}

fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
