//! Document and sentence metrics on hand-made predictions.
//!
//! `cargo run --example evaluate`

use std::error::Error;
use std::fmt::Write;

use docnli::corpus::Label::{Entailment as E, NotEntailment as N};
use docnli::metrics::{doc_eval, evidence_eval, sentence_eval, SentenceRecord};

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let mut out = String::new();
    let predicted = [E, E, N, N, N, E, N, E];
    let gold = [E, N, N, N, E, E, N, E];
    let doc = doc_eval(&predicted, &gold)?;
    writeln!(out, "document level")?;
    write!(out, "{}", doc.to_table())?;

    let outcome = evidence_eval(&[1, 4, 7], &[vec![2, 3], vec![4, 7]]);
    writeln!(
        out,
        "evidence [1,4,7] vs groups [[2,3],[4,7]]: hit={} precision={:?}",
        outcome.hit, outcome.precision
    )?;

    let record = |retrieved: Vec<usize>, predicted, gold, groups: Vec<Vec<usize>>| SentenceRecord {
        retrieved,
        is_substring: false,
        predicted,
        gold,
        gold_groups: groups,
    };
    let records = vec![
        // Right label, right evidence.
        record(vec![0, 3], E, E, vec![vec![3]]),
        // Right label, evidence missed.
        record(vec![1, 2], N, N, vec![vec![5]]),
        // Evidence found, label wrong.
        record(vec![4, 6], E, N, vec![vec![4, 6]]),
        // Unsupported claim with no gold evidence; the hit is waived.
        record(vec![0, 1], N, N, vec![]),
        // Verbatim match, counted as retrieved.
        SentenceRecord {
            retrieved: vec![],
            is_substring: true,
            predicted: E,
            gold: E,
            gold_groups: vec![vec![2]],
        },
    ];
    let sent = sentence_eval(&records);
    writeln!(out, "sentence level")?;
    write!(out, "{}", sent.to_table())?;
    Ok(out)
}

fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
