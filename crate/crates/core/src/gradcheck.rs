//! Central finite differences against the analytic backward pass.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Label;
use crate::model::{Model, ModelError, PreparedSample};
use crate::reader::FEATURE_DIM;
use crate::training::{backward, bce_loss, GradientTape};

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub samples: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Finite-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor for the relative error.
    pub floor: f64,
    /// Parameters checked per sample; `None` checks every one.
    pub coordinates: Option<usize>,
    /// Chance that a generated sentence is a verbatim match.
    pub substring_rate: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            min_sentences: 2,
            max_sentences: 10,
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
            coordinates: None,
            substring_rate: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// (sample, flat parameter index) of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradcheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// `|a - n| / max(|a|, |n|, floor)`
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(floor)
}

/// Random labelled sample with uniform features in [0, 1).
pub fn random_sample<R: Rng>(rng: &mut R, id: usize, config: &GradcheckConfig) -> PreparedSample {
    let m = rng.gen_range(config.min_sentences..=config.max_sentences);
    let mut sentences: Vec<Option<Vec<f64>>> = (0..m)
        .map(|_| {
            if rng.gen_bool(config.substring_rate) {
                None
            } else {
                Some((0..FEATURE_DIM).map(|_| rng.gen_range(0.0..1.0)).collect())
            }
        })
        .collect();
    if sentences.iter().all(Option::is_none) {
        sentences[0] = Some((0..FEATURE_DIM).map(|_| rng.gen_range(0.0..1.0)).collect());
    }
    PreparedSample {
        id: format!("gc-{id}"),
        label: Some(if rng.gen_bool(0.5) {
            Label::Entailment
        } else {
            Label::NotEntailment
        }),
        sentences,
    }
}

fn flat_len(model: &Model) -> usize {
    model.tensors().iter().map(|(t, _)| t.len()).sum()
}

fn nudge(model: &mut Model, flat: usize, delta: f64) {
    let mut offset = flat;
    for (t, _) in model.tensors_mut() {
        if offset < t.len() {
            t[offset] += delta;
            return;
        }
        offset -= t.len();
    }
    panic!("parameter index {flat} out of range");
}

fn loss_of(model: &Model, sample: &PreparedSample, label: Label) -> Result<f64, ModelError> {
    Ok(bce_loss(model.score(sample)?, label))
}

/// Worst coordinate found for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleCheck {
    pub max_relative_error: f64,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares a claimed gradient of `sample`'s loss with central differences.
pub fn compare_gradient(
    model: &Model,
    sample: &PreparedSample,
    analytic: &[f64],
    config: &GradcheckConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SampleCheck, ModelError> {
    let label = sample.label.unwrap_or(Label::Entailment);
    let n = flat_len(model);
    assert_eq!(analytic.len(), n, "gradient length");
    let coords: Vec<usize> = match config.coordinates {
        Some(c) if c < n => rand::seq::index::sample(rng, n, c).into_vec(),
        _ => (0..n).collect(),
    };
    let mut probe = model.clone();
    let mut out = SampleCheck {
        max_relative_error: 0.0,
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: coords.len(),
    };
    for &k in &coords {
        nudge(&mut probe, k, config.step);
        let plus = loss_of(&probe, sample, label)?;
        nudge(&mut probe, k, -2.0 * config.step);
        let minus = loss_of(&probe, sample, label)?;
        nudge(&mut probe, k, config.step);
        let numeric = (plus - minus) / (2.0 * config.step);
        let err = relative_error(analytic[k], numeric, config.floor);
        if err > out.max_relative_error {
            out.max_relative_error = err;
            out.index = k;
            out.analytic = analytic[k];
            out.numeric = numeric;
        }
    }
    Ok(out)
}

/// Checks the backward pass on one sample.
pub fn check_sample(
    model: &Model,
    sample: &PreparedSample,
    config: &GradcheckConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SampleCheck, ModelError> {
    let label = sample.label.unwrap_or(Label::Entailment);
    let mut tape = GradientTape::new(model);
    backward(model, sample, label, &mut tape)?;
    compare_gradient(model, sample, &tape.flat(), config, rng)
}

/// Checks `config.samples` random samples against `model`.
pub fn gradcheck(model: &Model, config: &GradcheckConfig) -> Result<GradcheckReport, ModelError> {
    model.check_shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = GradcheckReport {
        max_relative_error: 0.0,
        checked: 0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
    };
    for i in 0..config.samples {
        let sample = random_sample(&mut rng, i, config);
        let c = check_sample(model, &sample, config, &mut rng)?;
        report.checked += c.checked;
        if c.max_relative_error > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = report.max_relative_error.max(c.max_relative_error);
            report.worst = Some((i, c.index));
            report.analytic = c.analytic;
            report.numeric = c.numeric;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::FusionMethod;
    use crate::model::ModelConfig;

    #[test]
    fn relative_error_definition() {
        assert_eq!(relative_error(0.0, 0.0, 1e-6), 0.0);
        assert_eq!(relative_error(2.0, 1.0, 1e-6), 0.5);
        assert!((relative_error(1e-9, 0.0, 1e-6) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn small_models_pass_exhaustively() {
        for method in FusionMethod::ALL {
            let model = Model::init(&ModelConfig::small(method), &mut ChaCha8Rng::seed_from_u64(21));
            let config = GradcheckConfig {
                samples: 10,
                ..GradcheckConfig::default()
            };
            let report = gradcheck(&model, &config).unwrap();
            assert!(report.passed(config.tolerance), "{method}: {report:?}");
            assert!(report.checked >= 10 * model.param_count());
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let model = Model::init(
            &ModelConfig::small(FusionMethod::Kernel),
            &mut ChaCha8Rng::seed_from_u64(3),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let config = GradcheckConfig::default();
        let sample = random_sample(&mut rng, 0, &config);
        let mut tape = GradientTape::new(&model);
        backward(&model, &sample, sample.label.unwrap(), &mut tape).unwrap();
        let good = tape.flat();
        assert!(
            compare_gradient(&model, &sample, &good, &config, &mut rng)
                .unwrap()
                .max_relative_error
                < 1e-4
        );
        let k = good
            .iter()
            .position(|g| g.abs() > 1e-4)
            .expect("some sizeable gradient");
        let mut bad = good.clone();
        bad[k] *= 1.01;
        let check = compare_gradient(&model, &sample, &bad, &config, &mut rng).unwrap();
        assert!(check.max_relative_error > 1e-3);
        assert_eq!(check.index, k);
    }
}
