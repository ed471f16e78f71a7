//! One run per evidence budget K over the same synthetic splits.
//!
//! `cargo run --release --example k_sweep`

use std::error::Error;
use std::fmt::Write;

use docnli::corpus::{generate_synthetic, SynthConfig};
use docnli::harness::{k_sweep, ExperimentConfig};
use docnli::text::Segmenter;

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let corpus = generate_synthetic(&SynthConfig {
        train: 300,
        dev: 80,
        test: 80,
        ..SynthConfig::default()
    })?;
    let reports = k_sweep(
        (&corpus).into(),
        &Segmenter::default(),
        &ExperimentConfig::default(),
        &[3, 4, 5, 6, 7],
        &mut std::io::sink(),
    )?;
    let mut out = String::new();
    writeln!(
        out,
        "{:>2} {:>9} {:>9} {:>9} {:>9}",
        "K", "macro_f1", "precision", "recall", "full_acc"
    )?;
    for r in &reports {
        let s = r.sentences.as_ref().ok_or("synthetic splits carry gold")?;
        writeln!(
            out,
            "{:>2} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            r.retrieval.k, r.test.macro_f1, s.evidence_precision, s.evidence_recall, s.full_accuracy
        )?;
    }
    Ok(out)
}

fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
