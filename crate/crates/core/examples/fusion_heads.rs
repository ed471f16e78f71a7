//! The three fusion heads on fixed inputs, then each one trained on the same
//! synthetic data.
//!
//! `cargo run --release --example fusion_heads`

use std::error::Error;
use std::fmt::Write;

use docnli::corpus::{generate_synthetic, SynthConfig};
use docnli::fusion::{fuse_kernel, fuse_score_min, fuse_vector_min, kernel_vector, FusionMethod, KernelBank};
use docnli::harness::{run_experiment, ExperimentConfig};
use docnli::nn::{Activation, Mlp};
use docnli::reader::InferenceVector;
use docnli::text::Segmenter;
use docnli::training::TrainConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let mut out = String::new();
    let scores = [0.93, 0.12, 0.71];
    let vectors: Vec<InferenceVector> = vec![
        InferenceVector(vec![0.4, -0.2, 0.9]),
        InferenceVector(vec![-0.7, 0.5, 0.1]),
        InferenceVector(vec![0.2, 0.3, -0.6]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vector_head = Mlp::glorot(&[3, 4, 1], Activation::Identity, 1.0, &mut rng);
    let bank = KernelBank::default();
    let kernel_head = Mlp::glorot(&[bank.len(), 4, 1], Activation::Identity, 1.0, &mut rng);

    let smin = fuse_score_min(&scores)?;
    writeln!(
        out,
        "score_min  y={:.4} argmin={:?}",
        smin.sample_score, smin.argmin_index
    )?;
    let vmin = fuse_vector_min(&vectors, &vector_head, &scores)?;
    writeln!(out, "vector_min y={:.4} h_HP={:?}", vmin.sample_score, vmin.pooled)?;
    let kern = fuse_kernel(&scores, &bank, &kernel_head)?;
    let pooled: Vec<String> = kern.pooled.iter().map(|v| format!("{v:.2}")).collect();
    writeln!(out, "kernel     y={:.4} V_HP=[{}]", kern.sample_score, pooled.join(" "))?;
    let v = kernel_vector(0.7, &bank);
    writeln!(
        out,
        "kernel responses at 0.7: peak {:.3} at mean {:.1}",
        v[7], bank.means[7]
    )?;

    let corpus = generate_synthetic(&SynthConfig {
        train: 300,
        dev: 80,
        test: 80,
        ..SynthConfig::default()
    })?;
    for fusion in FusionMethod::ALL {
        let config = ExperimentConfig {
            train: TrainConfig {
                fusion,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        };
        let report = run_experiment((&corpus).into(), &Segmenter::default(), &config, &mut std::io::sink())?;
        writeln!(
            out,
            "fusion={fusion} params={} {}",
            report.model.param_count(),
            report.summary()
        )?;
    }
    Ok(out)
}

fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
