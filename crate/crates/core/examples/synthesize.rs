//! Generates a synthetic corpus with sentence-level gold and writes it as
//! JSON lines.
//!
//! `cargo run --example synthesize -- [out_dir]`

use std::error::Error;
use std::fmt::Write;
use std::path::PathBuf;

use docnli::corpus::{
    dataset_stats, generate_synthetic, load_annotations, load_pairs, save_annotations, save_pairs, FieldMap,
    SynthConfig, DEFAULT_LENGTH_EDGES,
};

fn run_example_in(dir: &std::path::Path) -> Result<String, Box<dyn Error>> {
    let config = SynthConfig {
        train: 200,
        dev: 50,
        test: 50,
        ..SynthConfig::default()
    };
    let corpus = generate_synthetic(&config)?;
    let mut out = String::new();
    for (name, split) in [("train", &corpus.train), ("dev", &corpus.dev), ("test", &corpus.test)] {
        let pairs = dir.join(format!("{name}.jsonl"));
        let gold = dir.join(format!("{name}.gold.jsonl"));
        save_pairs(&pairs, &split.pairs)?;
        save_annotations(&gold, &split.gold)?;
        // Reading back goes through the same validation as any user file.
        let reread = load_pairs(&pairs, &FieldMap::default())?;
        let regold = load_annotations(&gold)?;
        assert_eq!(reread, split.pairs);
        assert_eq!(regold, split.gold);
        let stats = dataset_stats(&reread, &DEFAULT_LENGTH_EDGES);
        writeln!(
            out,
            "{name}: pairs={} entailment={} not_entailment={}",
            stats.total, stats.entailment, stats.not_entailment
        )?;
    }

    let sample = &corpus.test.gold[0];
    writeln!(out, "first test sample {} ({})", sample.id, sample.label)?;
    for s in &sample.hypothesis_sentences {
        writeln!(
            out,
            "  {:<15} groups={:?} {}",
            s.label.as_str(),
            s.evidence_groups,
            s.text
        )?;
    }
    Ok(out)
}

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    run_example_in(dir.path())
}

fn main() -> Result<(), Box<dyn Error>> {
    match std::env::args_os().nth(1).map(PathBuf::from) {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            print!("{}", run_example_in(&dir)?);
        }
        None => print!("{}", run_example()?),
    }
    Ok(())
}
