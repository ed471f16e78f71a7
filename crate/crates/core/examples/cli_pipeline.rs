//! The command-line workflow driven in-process: synth, retrieve, train,
//! predict and both evaluations.
//!
//! `cargo run --release --example cli_pipeline`

use std::error::Error;
use std::path::Path;

fn docnli(args: &[&str], out: &mut Vec<u8>) -> Result<(), Box<dyn Error>> {
    let mut argv = vec!["docnli"];
    argv.extend_from_slice(args);
    let mut stderr = Vec::new();
    let code = docnli::cli::run(argv, out, &mut stderr);
    if code != 0 {
        return Err(format!(
            "`{}` exited {code}: {}",
            args.join(" "),
            String::from_utf8_lossy(&stderr)
        )
        .into());
    }
    Ok(())
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let d = dir.path();
    let mut out = Vec::new();
    let data = path(d, "data");
    docnli(
        &[
            "synth",
            "--out",
            &data,
            "--train-size",
            "300",
            "--dev-size",
            "80",
            "--test-size",
            "80",
        ],
        &mut out,
    )?;
    let split = |name: &str| format!("{data}/{name}");
    docnli(&["stats", "--dataset", &split("train.jsonl")], &mut out)?;
    docnli(
        &[
            "retrieve",
            "--dataset",
            &split("test.jsonl"),
            "--out",
            &path(d, "test.evidence.jsonl"),
        ],
        &mut out,
    )?;
    docnli(
        &[
            "train",
            "--dataset",
            &split("train.jsonl"),
            "--dev",
            &split("dev.jsonl"),
            "--out",
            &path(d, "model.json"),
            "--log",
            &path(d, "train.log"),
        ],
        &mut out,
    )?;
    docnli(
        &[
            "predict",
            "--dataset",
            &split("test.jsonl"),
            "--checkpoint",
            &path(d, "model.json"),
            "--evidence",
            &path(d, "test.evidence.jsonl"),
            "--out",
            &path(d, "test.pred.jsonl"),
        ],
        &mut out,
    )?;
    docnli(
        &[
            "eval-doc",
            "--predictions",
            &path(d, "test.pred.jsonl"),
            "--dataset",
            &split("test.jsonl"),
        ],
        &mut out,
    )?;
    docnli(
        &[
            "eval-sent",
            "--predictions",
            &path(d, "test.pred.jsonl"),
            "--annotations",
            &split("test.gold.jsonl"),
        ],
        &mut out,
    )?;
    // Paths are temporary; drop them so the output is stable.
    let text = String::from_utf8(out)?.replace(&*d.to_string_lossy(), "<tmp>");
    Ok(text)
}

fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
