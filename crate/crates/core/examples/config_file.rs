//! Flat `section.key = value` configs: parse, override, resolve, render.
//!
//! `cargo run --example config_file`

use std::error::Error;
use std::fmt::Write;

use docnli::config::RunConfig;

const TEXT: &str = "\
# lexical retrieval with a wider budget
retrieval.method = bm25
retrieval.k = 7
train.fusion = kernel
train.epochs = 3
data.hypothesis_field = claim
paths.dataset = data/train.jsonl
";

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let mut config = RunConfig::default();
    config.apply_text(TEXT)?;
    config.apply_override("train.learning_rate=0.0005")?;
    config.resolve()?;

    let mut out = String::new();
    writeln!(
        out,
        "reader evidence slots follow K: {}",
        config.model.reader.evidence_slots
    )?;
    writeln!(out, "model head follows train.fusion: {}", config.model.fusion)?;
    writeln!(out, "hypothesis field: {}", config.fields.hypothesis)?;
    for key in ["retrieval.k", "train.learning_rate", "paths.dataset"] {
        writeln!(out, "{key} -> {}", config.get(key).unwrap_or_default())?;
    }
    match config.apply_override("retrieval.k=zero") {
        Err(e) => writeln!(out, "rejected: {e}")?,
        Ok(()) => writeln!(out, "unexpectedly accepted")?,
    }

    // Rendering is complete, so it parses back to the same config.
    let rendered = config.render();
    let mut again = RunConfig::default();
    again.apply_text(&rendered)?;
    again.resolve()?;
    writeln!(out, "round trip equal: {}", again == config)?;
    Ok(out)
}

fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
