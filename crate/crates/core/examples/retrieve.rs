//! Evidence selection with every retrieval method on one hand-written pair.
//!
//! `cargo run --example retrieve`

use std::error::Error;
use std::fmt::Write;

use docnli::corpus::embeddings::{hypothesis_doc_id, premise_doc_id};
use docnli::corpus::{DocPair, EmbeddingStore};
use docnli::pipeline::retrieve_pairs;
use docnli::retrieval::{RetrievalConfig, RetrievalMethod};
use docnli::text::{tokenize, Segmenter};

const PREMISE: &str = "Okafor acquired the large painting near the harbor in 1987. \
    The museum opened a new wing. Lindqvist repaired the ancient clock inside the station in 1987. \
    Visitors praised the garden. The painting was insured by Okafor in 1987.";

const HYPOTHESIS: &str = "Okafor purchased the big painting near the harbor in 1987. \
    The museum opened a new wing. Lindqvist restored the clock in 2004.";

/// Toy embeddings: a bag of hashed words, enough to make cosine meaningful.
fn embed(sentence: &str) -> Vec<f64> {
    let mut v = vec![0.0; 16];
    for t in tokenize(sentence).iter() {
        let slot = t
            .bytes()
            .fold(7usize, |h, b| h.wrapping_mul(31).wrapping_add(b as usize))
            % 16;
        v[slot] += 1.0;
    }
    v[0] += 1e-3;
    v
}

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let seg = Segmenter::default();
    let pair = DocPair {
        id: "demo".into(),
        hypothesis: HYPOTHESIS.into(),
        premise: PREMISE.into(),
        label: None,
    };

    let mut store = EmbeddingStore::new();
    for (doc, text) in [
        (hypothesis_doc_id("demo"), HYPOTHESIS),
        (premise_doc_id("demo"), PREMISE),
    ] {
        for (i, s) in seg.split(text)?.iter().enumerate() {
            store.insert(&doc, i, embed(s))?;
        }
    }

    let mut out = String::new();
    let premise = seg.split(PREMISE)?;
    for (i, s) in premise.iter().enumerate() {
        writeln!(out, "premise[{i}] {s}")?;
    }
    for method in RetrievalMethod::ALL {
        let config = RetrievalConfig {
            k: 2,
            ..RetrievalConfig::with_method(method)
        };
        let records = retrieve_pairs(std::slice::from_ref(&pair), &seg, &config, Some(&store))?;
        writeln!(out, "method={method}")?;
        for r in &records {
            let sel = &r.selection;
            if sel.is_substring {
                writeln!(
                    out,
                    "  hyp[{}] verbatim in premise, no evidence needed",
                    sel.hypothesis_index
                )?;
            } else {
                let scores: Vec<String> = sel.relevance_scores.iter().map(|s| format!("{s:.3}")).collect();
                writeln!(
                    out,
                    "  hyp[{}] evidence={:?} scores=[{}]",
                    sel.hypothesis_index,
                    sel.evidence_indices,
                    scores.join(", ")
                )?;
            }
        }
    }
    Ok(out)
}

fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
