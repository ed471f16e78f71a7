//! Rule-based sentence segmentation and tokenisation.
//!
//! `cargo run --example segment`

use std::error::Error;
use std::fmt::Write;

use docnli::text::{tokenize, Segmenter};

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let text = "Dr. Haldane inspected the bridge in 1998. It was \"fragile.\" \
                Was it repaired? The U.S. museum says no! See p. 4 for details.";
    let mut out = String::new();

    let default = Segmenter::default();
    let sentences = default.split(text)?;
    writeln!(
        out,
        "default list ({} abbreviations): {} sentences",
        default.abbreviation_count(),
        sentences.len()
    )?;
    for (s, span) in sentences.iter().zip(sentences.spans()) {
        writeln!(out, "  [{:>3}..{:<3}] {s}", span.start, span.end)?;
    }

    // Without "dr" and "p" the splitter breaks after them.
    let bare = Segmenter::from_list("# nothing but initials\n");
    writeln!(out, "empty list: {} sentences", bare.split(text)?.len())?;

    let first = sentences.get(0).unwrap_or_default();
    writeln!(out, "tokens of first sentence: {:?}", tokenize(first).tokens())?;
    Ok(out)
}

fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
