//! Reader plus fusion head, evaluated on one sample at a time.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::fusion::{
    fuse_kernel, fuse_score_min, fuse_vector_min, vector_min_pool, FusionError, FusionMethod, FusionResult, KernelBank,
};
use crate::nn::{Activation, Mlp, MlpTrace};
use crate::reader::{squash, InferenceVector, ReaderConfig, ReaderError, ReaderParams};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Reader(#[from] ReaderError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMeans {
    /// 0, 1/(C-1), ..., 1
    #[default]
    Evenly,
    /// Uniform draws from [0, 1] using the model seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub reader: ReaderConfig,
    pub fusion: FusionMethod,
    /// Hidden widths of the vector-min / kernel head.
    pub fusion_hidden: Vec<usize>,
    pub kernel_count: usize,
    pub kernel_width: f64,
    pub kernel_means: KernelMeans,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            reader: ReaderConfig::default(),
            fusion: FusionMethod::ScoreMin,
            fusion_hidden: vec![64],
            kernel_count: 11,
            kernel_width: 0.01,
            kernel_means: KernelMeans::Evenly,
        }
    }
}

impl ModelConfig {
    pub fn with_fusion(fusion: FusionMethod) -> Self {
        Self {
            fusion,
            ..Self::default()
        }
    }

    /// A reduced architecture, handy for exhaustive gradient checks.
    pub fn small(fusion: FusionMethod) -> Self {
        Self {
            reader: ReaderConfig {
                dim: 6,
                encoder_hidden: vec![8],
                head_hidden: vec![5],
                ..ReaderConfig::default()
            },
            fusion,
            fusion_hidden: vec![5],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FusionHead {
    ScoreMin,
    VectorMin { head: Mlp },
    Kernel { bank: KernelBank, head: Mlp },
}

impl FusionHead {
    pub fn method(&self) -> FusionMethod {
        match self {
            FusionHead::ScoreMin => FusionMethod::ScoreMin,
            FusionHead::VectorMin { .. } => FusionMethod::VectorMin,
            FusionHead::Kernel { .. } => FusionMethod::Kernel,
        }
    }

    pub fn mlp(&self) -> Option<&Mlp> {
        match self {
            FusionHead::ScoreMin => None,
            FusionHead::VectorMin { head } | FusionHead::Kernel { head, .. } => Some(head),
        }
    }

    pub fn mlp_mut(&mut self) -> Option<&mut Mlp> {
        match self {
            FusionHead::ScoreMin => None,
            FusionHead::VectorMin { head } | FusionHead::Kernel { head, .. } => Some(head),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub reader: ReaderParams,
    pub fusion: FusionHead,
}

/// Reader inputs of one hypothesis sentence: extracted features, or `None`
/// when the sentence matched the premise verbatim.
pub type SentenceFeatures = Option<Vec<f64>>;

/// A sample reduced to what the model consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub id: String,
    pub label: Option<Label>,
    pub sentences: Vec<SentenceFeatures>,
}

pub(crate) struct SentenceTrace {
    pub encoder: MlpTrace,
    pub head: MlpTrace,
}

/// Everything the backward pass needs from one forward pass.
pub struct Forward {
    pub(crate) traces: Vec<Option<SentenceTrace>>,
    pub scores: Vec<f64>,
    pub vectors: Vec<InferenceVector>,
    pub fusion: FusionResult,
    pub(crate) fusion_trace: Option<MlpTrace>,
    /// Vector-min: which sentence supplies each pooled component.
    pub(crate) owners: Vec<usize>,
}

impl Model {
    pub fn init<R: Rng>(config: &ModelConfig, rng: &mut R) -> Self {
        let reader = ReaderParams::init(&config.reader, rng);
        let head_for = |input: usize, rng: &mut R| {
            let mut widths = vec![input];
            widths.extend(&config.fusion_hidden);
            widths.push(1);
            Mlp::glorot(&widths, Activation::Identity, config.reader.init_scale, rng)
        };
        let fusion = match config.fusion {
            FusionMethod::ScoreMin => FusionHead::ScoreMin,
            FusionMethod::VectorMin => FusionHead::VectorMin {
                head: head_for(config.reader.dim, rng),
            },
            FusionMethod::Kernel => {
                let bank = match config.kernel_means {
                    KernelMeans::Evenly => KernelBank::evenly_spaced(config.kernel_count, config.kernel_width),
                    KernelMeans::Random => KernelBank::random(config.kernel_count, config.kernel_width, rng),
                };
                FusionHead::Kernel {
                    head: head_for(bank.len(), rng),
                    bank,
                }
            }
        };
        Self { reader, fusion }
    }

    pub fn zeros_like(&self) -> Self {
        let fusion = match &self.fusion {
            FusionHead::ScoreMin => FusionHead::ScoreMin,
            FusionHead::VectorMin { head } => FusionHead::VectorMin {
                head: head.zeros_like(),
            },
            FusionHead::Kernel { bank, head } => FusionHead::Kernel {
                bank: bank.clone(),
                head: head.zeros_like(),
            },
        };
        Self {
            reader: self.reader.zeros_like(),
            fusion,
        }
    }

    pub fn method(&self) -> FusionMethod {
        self.fusion.method()
    }

    pub fn check_shapes(&self) -> Result<(), ModelError> {
        self.reader.check_shapes()?;
        let expected = match &self.fusion {
            FusionHead::ScoreMin => return Ok(()),
            FusionHead::VectorMin { .. } => self.reader.dim(),
            FusionHead::Kernel { bank, .. } => {
                bank.validate()?;
                bank.len()
            }
        };
        let head = self.fusion.mlp().expect("head present");
        head.check_shapes().map_err(ReaderError::ShapeMismatch)?;
        if head.input_dim() != expected || head.output_dim() != 1 {
            return Err(ReaderError::ShapeMismatch(format!(
                "fusion head maps {} -> {}, expected {expected} -> 1",
                head.input_dim(),
                head.output_dim()
            ))
            .into());
        }
        Ok(())
    }

    /// Trainable buffers in a fixed order, each flagged for weight decay.
    pub fn tensors(&self) -> Vec<(&[f64], bool)> {
        let mut t = self.reader.encoder.tensors();
        t.extend(self.reader.head.tensors());
        if let Some(h) = self.fusion.mlp() {
            t.extend(h.tensors());
        }
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        let mut t = self.reader.encoder.tensors_mut();
        t.extend(self.reader.head.tensors_mut());
        if let Some(h) = self.fusion.mlp_mut() {
            t.extend(h.tensors_mut());
        }
        t
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(t, _)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(t, _)| t.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, sample: &PreparedSample) -> Result<Forward, ModelError> {
        if sample.sentences.is_empty() {
            return Err(FusionError::EmptyHypothesis.into());
        }
        let dim = self.reader.dim();
        let mut traces = Vec::with_capacity(sample.sentences.len());
        let mut scores = Vec::with_capacity(sample.sentences.len());
        let mut vectors = Vec::with_capacity(sample.sentences.len());
        for features in &sample.sentences {
            match features {
                None => {
                    traces.push(None);
                    scores.push(1.0);
                    vectors.push(InferenceVector::sentinel(dim));
                }
                Some(x) => {
                    if x.len() != self.reader.encoder.input_dim() {
                        return Err(ReaderError::ShapeMismatch(format!(
                            "got {} features, encoder takes {}",
                            x.len(),
                            self.reader.encoder.input_dim()
                        ))
                        .into());
                    }
                    let encoder = self.reader.encoder.forward_trace(x);
                    let head = self.reader.head.forward_trace(encoder.output());
                    scores.push(squash(head.output()[0]));
                    vectors.push(InferenceVector(encoder.output().to_vec()));
                    traces.push(Some(SentenceTrace { encoder, head }));
                }
            }
        }
        let (fusion, fusion_trace, owners) = match &self.fusion {
            FusionHead::ScoreMin => (fuse_score_min(&scores)?, None, Vec::new()),
            FusionHead::VectorMin { head } => {
                let result = fuse_vector_min(&vectors, head, &scores)?;
                let (_, owners) = vector_min_pool(&vectors)?;
                let trace = head.forward_trace(&result.pooled);
                (result, Some(trace), owners)
            }
            FusionHead::Kernel { bank, head } => {
                let result = fuse_kernel(&scores, bank, head)?;
                let trace = head.forward_trace(&result.pooled);
                (result, Some(trace), Vec::new())
            }
        };
        Ok(Forward {
            traces,
            scores,
            vectors,
            fusion,
            fusion_trace,
            owners,
        })
    }

    /// Document score only.
    pub fn score(&self, sample: &PreparedSample) -> Result<f64, ModelError> {
        Ok(self.forward(sample)?.fusion.sample_score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::FEATURE_DIM;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(sentences: Vec<SentenceFeatures>) -> PreparedSample {
        PreparedSample {
            id: "s".into(),
            label: None,
            sentences,
        }
    }

    #[test]
    fn all_substring_sample_scores_one_under_score_min() {
        let model = Model::init(&ModelConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        let s = sample(vec![None, None, None]);
        let f = model.forward(&s).unwrap();
        assert_eq!(f.fusion.sample_score, 1.0);
        assert_eq!(f.fusion.argmin_index, Some(0));
    }

    #[test]
    fn every_head_produces_a_probability() {
        for method in FusionMethod::ALL {
            let model = Model::init(&ModelConfig::with_fusion(method), &mut ChaCha8Rng::seed_from_u64(2));
            model.check_shapes().unwrap();
            let s = sample(vec![Some(vec![0.5; FEATURE_DIM]), None, Some(vec![0.1; FEATURE_DIM])]);
            let f = model.forward(&s).unwrap();
            assert!(f.fusion.sample_score > 0.0 && f.fusion.sample_score < 1.0, "{method}");
            assert_eq!(f.fusion.method, method);
            assert_eq!(f.scores[1], 1.0);
        }
    }

    #[test]
    fn random_kernel_means_come_from_seed() {
        let config = ModelConfig {
            kernel_means: KernelMeans::Random,
            ..ModelConfig::with_fusion(FusionMethod::Kernel)
        };
        let a = Model::init(&config, &mut ChaCha8Rng::seed_from_u64(5));
        let b = Model::init(&config, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        let FusionHead::Kernel { bank, .. } = &a.fusion else {
            panic!()
        };
        assert!(bank.validate().is_ok());
        assert_ne!(bank, &KernelBank::default());
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = Model::init(&ModelConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        assert!(model.forward(&sample(vec![])).is_err());
        assert!(model.forward(&sample(vec![Some(vec![0.0; 3])])).is_err());
    }
}
