//! Central finite differences against the hand-written backward pass, for
//! every fusion head.
//!
//! `cargo run --release --example gradcheck`

use std::error::Error;
use std::fmt::Write;

use docnli::fusion::FusionMethod;
use docnli::gradcheck::{gradcheck, GradcheckConfig};
use docnli::model::{Model, ModelConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let mut out = String::new();
    for method in FusionMethod::ALL {
        // Every coordinate of a reduced model, then a sample of coordinates
        // of the full-size one.
        let runs = [
            ("small", ModelConfig::small(method), None),
            ("default", ModelConfig::with_fusion(method), Some(40)),
        ];
        for (name, model_config, coordinates) in runs {
            let model = Model::init(&model_config, &mut ChaCha8Rng::seed_from_u64(11));
            let config = GradcheckConfig {
                samples: 20,
                coordinates,
                ..GradcheckConfig::default()
            };
            let report = gradcheck(&model, &config)?;
            writeln!(
                out,
                "{method:<10} {name:<7} params={:<5} checked={:<6} max_rel_err={:.2e} passed={}",
                model.param_count(),
                report.checked,
                report.max_relative_error,
                report.passed(config.tolerance)
            )?;
        }
    }
    Ok(out)
}

fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
