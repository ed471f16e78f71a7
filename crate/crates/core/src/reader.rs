//! Sentence reader: turns a hypothesis sentence plus its evidence into an
//! inference vector and a credibility score in (0, 1).
//!
//! The encoder is a fixed lexical feature extractor followed by a tanh MLP.
//! Anything implementing [`FeatureEncoder`] can stand in for the extractor.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{sigmoid, Activation, Mlp};
use crate::retrieval::rouge1;
use crate::text::{capitalized_tokens, is_numeric_token, tokenize, TokenSeq};

#[derive(Debug, Error, PartialEq)]
pub enum ReaderError {
    #[error("hypothesis sentence has no tokens")]
    EmptyHypothesis,
    #[error("parameter shapes are inconsistent: {0}")]
    ShapeMismatch(String),
}

/// Number of lexical features produced by [`extract_features`].
pub const FEATURE_DIM: usize = 11;

/// Names of the lexical features, in vector order.
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "unigram_precision",
    "unigram_recall",
    "unigram_f1",
    "bigram_f1",
    "content_coverage",
    "numeric_coverage",
    "capitalized_coverage",
    "length_ratio",
    "evidence_fill",
    "max_evidence_rouge1",
    "has_numeric",
];

/// A hypothesis sentence with its evidence, in premise order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReaderInput {
    pub hypothesis_sentence: String,
    pub evidence_sentences: Vec<String>,
}

impl ReaderInput {
    pub fn new(hypothesis: impl Into<String>, evidence: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            hypothesis_sentence: hypothesis.into(),
            evidence_sentences: evidence.into_iter().map(Into::into).collect(),
        }
    }
}

/// Maps a reader input to a fixed-length feature vector.
pub trait FeatureEncoder {
    fn feature_dim(&self) -> usize;
    fn features(&self, input: &ReaderInput) -> Result<Vec<f64>, ReaderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexicalFeatures {
    /// Retrieval K; the evidence-fill feature is `count / evidence_slots`.
    pub evidence_slots: usize,
}

impl FeatureEncoder for LexicalFeatures {
    fn feature_dim(&self) -> usize {
        FEATURE_DIM
    }

    fn features(&self, input: &ReaderInput) -> Result<Vec<f64>, ReaderError> {
        extract_features(input, self.evidence_slots)
    }
}

fn coverage<'a>(items: impl IntoIterator<Item = &'a str>, present: &HashSet<&str>) -> f64 {
    let unique: HashSet<&str> = items.into_iter().collect();
    if unique.is_empty() {
        return 1.0;
    }
    unique.iter().filter(|t| present.contains(*t)).count() as f64 / unique.len() as f64
}

pub fn extract_features(input: &ReaderInput, evidence_slots: usize) -> Result<Vec<f64>, ReaderError> {
    let hyp = tokenize(&input.hypothesis_sentence);
    if hyp.is_empty() {
        return Err(ReaderError::EmptyHypothesis);
    }
    let evidence: Vec<TokenSeq> = input.evidence_sentences.iter().map(|s| tokenize(s)).collect();
    let all = TokenSeq::new(evidence.iter().flat_map(|e| e.tokens().iter().cloned()).collect());
    let present: HashSet<&str> = all.iter().collect();

    let uni = rouge1(&hyp, &all);

    // Bigrams never cross evidence sentence boundaries, so evidence order is irrelevant.
    let mut ev_bigrams = std::collections::HashMap::new();
    let mut ev_bigram_total = 0usize;
    for e in &evidence {
        for bg in e.bigrams() {
            *ev_bigrams.entry(bg).or_insert(0usize) += 1;
            ev_bigram_total += 1;
        }
    }
    let mut hyp_bigrams = std::collections::HashMap::new();
    for bg in hyp.bigrams() {
        *hyp_bigrams.entry(bg).or_insert(0usize) += 1;
    }
    let hyp_bigram_total = hyp.len().saturating_sub(1);
    let bigram_overlap: usize = hyp_bigrams
        .iter()
        .map(|(bg, &c)| c.min(ev_bigrams.get(bg).copied().unwrap_or(0)))
        .sum();
    let bigram_f1 = if bigram_overlap == 0 {
        0.0
    } else {
        (2 * bigram_overlap) as f64 / (hyp_bigram_total + ev_bigram_total) as f64
    };

    let content = coverage(hyp.iter().filter(|t| t.chars().count() > 3), &present);
    let numeric_tokens: Vec<&str> = hyp.iter().filter(|t| is_numeric_token(t)).collect();
    let numeric = coverage(numeric_tokens.iter().copied(), &present);
    let capitalized = capitalized_tokens(&input.hypothesis_sentence);
    let capitalized = coverage(capitalized.iter().map(String::as_str), &present);

    let length_ratio = if all.is_empty() {
        4.0
    } else {
        (hyp.len() as f64 / all.len() as f64).min(4.0)
    };
    let fill = (input.evidence_sentences.len() as f64 / evidence_slots.max(1) as f64).min(1.0);
    let best = evidence.iter().map(|e| rouge1(&hyp, e).f1).fold(0.0, f64::max);

    Ok(vec![
        uni.precision,
        uni.recall,
        uni.f1,
        bigram_f1,
        content,
        numeric,
        capitalized,
        length_ratio,
        fill,
        best,
        if numeric_tokens.is_empty() { 0.0 } else { 1.0 },
    ])
}

/// Reader architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderConfig {
    /// Inference vector dimension.
    pub dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub init_scale: f64,
    pub evidence_slots: usize,
}

impl Default for ReaderConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            encoder_hidden: vec![64],
            head_hidden: vec![64],
            init_scale: 2.0,
            evidence_slots: 5,
        }
    }
}

/// h = tanh-MLP(features); credibility = sigmoid(MLP(h)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderParams {
    pub evidence_slots: usize,
    pub encoder: Mlp,
    pub head: Mlp,
}

impl ReaderParams {
    pub fn init<R: Rng>(config: &ReaderConfig, rng: &mut R) -> Self {
        let mut enc = vec![FEATURE_DIM];
        enc.extend(&config.encoder_hidden);
        enc.push(config.dim);
        let mut head = vec![config.dim];
        head.extend(&config.head_hidden);
        head.push(1);
        Self {
            evidence_slots: config.evidence_slots,
            encoder: Mlp::glorot(&enc, Activation::Tanh, config.init_scale, rng),
            head: Mlp::glorot(&head, Activation::Identity, config.init_scale, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            evidence_slots: self.evidence_slots,
            encoder: self.encoder.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    pub fn dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn feature_encoder(&self) -> LexicalFeatures {
        LexicalFeatures {
            evidence_slots: self.evidence_slots,
        }
    }

    pub fn check_shapes(&self) -> Result<(), ReaderError> {
        self.encoder.check_shapes().map_err(ReaderError::ShapeMismatch)?;
        self.head.check_shapes().map_err(ReaderError::ShapeMismatch)?;
        if self.encoder.input_dim() != FEATURE_DIM {
            return Err(ReaderError::ShapeMismatch(format!(
                "encoder takes {} features, extractor yields {FEATURE_DIM}",
                self.encoder.input_dim()
            )));
        }
        if self.head.input_dim() != self.dim() || self.head.output_dim() != 1 {
            return Err(ReaderError::ShapeMismatch(format!(
                "head maps {} -> {}, expected {} -> 1",
                self.head.input_dim(),
                self.head.output_dim(),
                self.dim()
            )));
        }
        if self.encoder.layers.iter().any(|l| l.activation != Activation::Tanh) {
            return Err(ReaderError::ShapeMismatch("encoder layers must be tanh".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.head.param_count()
    }

    pub fn is_finite(&self) -> bool {
        self.encoder
            .tensors()
            .into_iter()
            .chain(self.head.tensors())
            .all(|(t, _)| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceVector(pub Vec<f64>);

impl InferenceVector {
    /// Placeholder for substring-matched sentences: every component +1.
    pub fn sentinel(dim: usize) -> Self {
        Self(vec![1.0; dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Inference vector from an already extracted feature vector.
pub fn encode_features(features: &[f64], params: &ReaderParams) -> Result<InferenceVector, ReaderError> {
    if features.len() != params.encoder.input_dim() {
        return Err(ReaderError::ShapeMismatch(format!(
            "got {} features, encoder takes {}",
            features.len(),
            params.encoder.input_dim()
        )));
    }
    params.encoder.check_shapes().map_err(ReaderError::ShapeMismatch)?;
    Ok(InferenceVector(params.encoder.forward(features)))
}

pub fn encode(input: &ReaderInput, params: &ReaderParams) -> Result<InferenceVector, ReaderError> {
    let features = extract_features(input, params.evidence_slots)?;
    encode_features(&features, params)
}

/// Head logit for an inference vector.
pub fn credibility_logit(h: &InferenceVector, params: &ReaderParams) -> f64 {
    params.head.forward(h.values())[0]
}

/// Sigmoid of the head logit, kept strictly inside (0, 1).
pub fn credibility(h: &InferenceVector, params: &ReaderParams) -> f64 {
    squash(credibility_logit(h, params))
}

/// Sigmoid that never rounds to exactly 0 or 1.
pub(crate) fn squash(logit: f64) -> f64 {
    sigmoid(logit).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceScore {
    pub score: f64,
    pub vector: InferenceVector,
    pub is_substring: bool,
}

/// Substring-matched sentences skip the reader: score 1.0, sentinel vector.
pub fn score_sentence(
    input: &ReaderInput,
    is_substring: bool,
    params: &ReaderParams,
) -> Result<SentenceScore, ReaderError> {
    if is_substring {
        return Ok(SentenceScore {
            score: 1.0,
            vector: InferenceVector::sentinel(params.dim()),
            is_substring: true,
        });
    }
    let vector = encode(input, params)?;
    Ok(SentenceScore {
        score: credibility(&vector, params),
        vector,
        is_substring: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn feature(input: &ReaderInput, name: &str) -> f64 {
        let i = FEATURE_NAMES.iter().position(|n| *n == name).unwrap();
        extract_features(input, 5).unwrap()[i]
    }

    #[test]
    fn self_match_features() {
        let input = ReaderInput::new("Andrew hit Miami in 1992.", ["Andrew hit Miami in 1992."]);
        for name in [
            "unigram_precision",
            "unigram_recall",
            "unigram_f1",
            "bigram_f1",
            "numeric_coverage",
            "capitalized_coverage",
        ] {
            assert_eq!(feature(&input, name), 1.0, "{name}");
        }
        assert_eq!(feature(&input, "evidence_fill"), 0.2);
        assert_eq!(feature(&input, "length_ratio"), 1.0);
    }

    #[test]
    fn disjoint_features() {
        let input = ReaderInput::new("alpha beta", ["gamma delta"]);
        for name in [
            "unigram_precision",
            "unigram_recall",
            "unigram_f1",
            "bigram_f1",
            "max_evidence_rouge1",
        ] {
            assert_eq!(feature(&input, name), 0.0, "{name}");
        }
    }

    #[test]
    fn detailed_disinformation_pattern() {
        let input = ReaderInput::new("in 1989", ["Storms grew stronger in decades"]);
        assert_eq!(feature(&input, "numeric_coverage"), 0.0);
        assert_eq!(feature(&input, "unigram_precision"), 0.5);
        assert_eq!(feature(&input, "has_numeric"), 1.0);
    }

    #[test]
    fn no_evidence_and_empty_hypothesis() {
        let input = ReaderInput::new("some words", Vec::<String>::new());
        assert_eq!(feature(&input, "length_ratio"), 4.0);
        assert_eq!(feature(&input, "evidence_fill"), 0.0);
        assert_eq!(
            extract_features(&ReaderInput::new("?!", ["x"]), 5),
            Err(ReaderError::EmptyHypothesis)
        );
    }

    #[test]
    fn features_ignore_evidence_order() {
        let a = ReaderInput::new("The cat sat on 3 mats", ["the cat", "sat on 3 red mats", "dogs ran"]);
        let b = ReaderInput::new("The cat sat on 3 mats", ["dogs ran", "sat on 3 red mats", "the cat"]);
        assert_eq!(extract_features(&a, 5), extract_features(&b, 5));
    }

    fn params(seed: u64) -> ReaderParams {
        ReaderParams::init(&ReaderConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn zero_weights_give_zero_vector() {
        let p = params(1).zeros_like();
        let h = encode(&ReaderInput::new("a b", ["a"]), &p).unwrap();
        assert!(h.values().iter().all(|v| *v == 0.0));
        assert_eq!(credibility(&h, &p), 0.5);
    }

    #[test]
    fn single_layer_encoder_by_hand() {
        let mut p = params(1);
        let mut w = vec![0.0; 3 * FEATURE_DIM];
        // output j reads feature j (precision, recall, f1)
        for j in 0..3 {
            w[j * FEATURE_DIM + j] = 1.0;
        }
        p.encoder.layers = vec![Dense {
            inputs: FEATURE_DIM,
            outputs: 3,
            weights: w,
            bias: vec![0.0; 3],
            activation: Activation::Tanh,
        }];
        p.head = Mlp {
            layers: vec![Dense::zeros(3, 1, Activation::Identity)],
        };
        // H = [x, y], E = [x, z, w]: o = 1, P = 1/2, R = 1/3, F1 = 2/5
        let h = encode(&ReaderInput::new("x y", ["x z w"]), &p).unwrap();
        let expected = [0.5f64.tanh(), (1.0f64 / 3.0).tanh(), 0.4f64.tanh()];
        for (a, b) in h.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn encode_is_deterministic() {
        let p = params(7);
        let input = ReaderInput::new("Andrew hit Miami.", ["Andrew struck Florida.", "Miami flooded."]);
        assert_eq!(encode(&input, &p).unwrap(), encode(&input, &p).unwrap());
        let s = score_sentence(&input, false, &p).unwrap();
        assert!(s.score > 0.0 && s.score < 1.0);
        assert!(!s.is_substring);
    }

    #[test]
    fn substring_short_circuit() {
        let p = params(7);
        let s = score_sentence(&ReaderInput::new("x", Vec::<String>::new()), true, &p).unwrap();
        assert_eq!(s.score, 1.0);
        assert_eq!(s.vector, InferenceVector::sentinel(32));
        assert!(s.is_substring);
    }

    #[test]
    fn shape_errors() {
        let mut p = params(2);
        assert!(p.check_shapes().is_ok());
        p.head.layers[0].inputs = 3;
        assert!(matches!(p.check_shapes(), Err(ReaderError::ShapeMismatch(_))));
        let p = params(2);
        assert!(matches!(
            encode_features(&[0.0; 3], &p),
            Err(ReaderError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn credibility_examples() {
        let mut p = params(3);
        p.head = Mlp {
            layers: vec![Dense::zeros(32, 1, Activation::Identity)],
        };
        p.head.layers[0].bias[0] = -2.0;
        let h = InferenceVector(vec![0.3; 32]);
        assert!((credibility(&h, &p) - 0.1192).abs() < 1e-4);
        p.head.layers[0].bias[0] = 30.0;
        assert!(credibility(&h, &p) > 0.999_999);
        p.head.layers[0].bias[0] = 1e3;
        assert!(credibility(&h, &p) < 1.0);
        p.head.layers[0].bias[0] = -1e3;
        assert!(credibility(&h, &p) > 0.0);
    }
}
