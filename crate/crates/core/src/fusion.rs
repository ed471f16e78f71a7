//! Sentence-to-document fusion: score minimum, inference-vector minimum and
//! Gaussian kernel pooling.
//!
//! Minimum ties always resolve to the lowest sentence index, both for the
//! reported argmin and for gradient routing.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Mlp;
use crate::reader::{squash, InferenceVector};

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("hypothesis has no sentences")]
    EmptyHypothesis,
    #[error("inference vectors differ in dimension: {expected} vs {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid kernel bank: {0}")]
    InvalidKernels(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMethod {
    ScoreMin,
    VectorMin,
    Kernel,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 3] = [FusionMethod::ScoreMin, FusionMethod::VectorMin, FusionMethod::Kernel];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMethod::ScoreMin => "score_min",
            FusionMethod::VectorMin => "vector_min",
            FusionMethod::Kernel => "kernel",
        }
    }
}

impl FromStr for FusionMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown fusion method '{s}'"))
    }
}

impl std::fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gaussian kernels `exp(-(s - mu)^2 / (2 sigma^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    pub means: Vec<f64>,
    pub widths: Vec<f64>,
}

impl Default for KernelBank {
    /// 11 kernels of width 0.01 centred at 0.0, 0.1, ..., 1.0.
    fn default() -> Self {
        Self::evenly_spaced(11, 0.01)
    }
}

impl KernelBank {
    pub fn evenly_spaced(count: usize, width: f64) -> Self {
        let means = match count {
            0 => Vec::new(),
            1 => vec![0.5],
            _ => (0..count).map(|j| j as f64 / (count - 1) as f64).collect(),
        };
        Self {
            means,
            widths: vec![width; count],
        }
    }

    /// Means drawn uniformly from [0, 1].
    pub fn random<R: Rng>(count: usize, width: f64, rng: &mut R) -> Self {
        Self {
            means: (0..count).map(|_| rng.gen_range(0.0..=1.0)).collect(),
            widths: vec![width; count],
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |m: String| Err(FusionError::InvalidKernels(m));
        if self.means.is_empty() {
            return bad("at least one kernel is required".into());
        }
        if self.means.len() != self.widths.len() {
            return bad(format!("{} means but {} widths", self.means.len(), self.widths.len()));
        }
        if let Some(w) = self.widths.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return bad(format!("width {w} is not positive"));
        }
        if let Some(m) = self.means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return bad(format!("mean {m} outside [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionResult {
    pub sample_score: f64,
    pub method: FusionMethod,
    /// Least credible sentence; score-min only.
    pub argmin_index: Option<usize>,
    pub per_sentence_scores: Vec<f64>,
    /// h_HP for vector-min, V_HP for kernel pooling, empty for score-min.
    pub pooled: Vec<f64>,
}

/// Index of the smallest value, first one on ties.
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v < values[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn fuse_score_min(scores: &[f64]) -> Result<FusionResult, FusionError> {
    let idx = argmin(scores).ok_or(FusionError::EmptyHypothesis)?;
    Ok(FusionResult {
        sample_score: scores[idx],
        method: FusionMethod::ScoreMin,
        argmin_index: Some(idx),
        per_sentence_scores: scores.to_vec(),
        pooled: Vec::new(),
    })
}

/// Componentwise minimum and, per component, which sentence attains it.
pub fn vector_min_pool(vectors: &[InferenceVector]) -> Result<(Vec<f64>, Vec<usize>), FusionError> {
    let first = vectors.first().ok_or(FusionError::EmptyHypothesis)?;
    let dim = first.dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(FusionError::DimensionMismatch {
            expected: dim,
            found: v.dim(),
        });
    }
    let mut pooled = first.values().to_vec();
    let mut owners = vec![0; dim];
    for (i, v) in vectors.iter().enumerate().skip(1) {
        for (j, &x) in v.values().iter().enumerate() {
            if x < pooled[j] {
                pooled[j] = x;
                owners[j] = i;
            }
        }
    }
    Ok((pooled, owners))
}

/// `head` maps the pooled vector to one logit. `scores` are carried through
/// for per-sentence reporting.
pub fn fuse_vector_min(vectors: &[InferenceVector], head: &Mlp, scores: &[f64]) -> Result<FusionResult, FusionError> {
    let (pooled, _) = vector_min_pool(vectors)?;
    if head.input_dim() != pooled.len() {
        return Err(FusionError::DimensionMismatch {
            expected: head.input_dim(),
            found: pooled.len(),
        });
    }
    Ok(FusionResult {
        sample_score: squash(head.forward(&pooled)[0]),
        method: FusionMethod::VectorMin,
        argmin_index: None,
        per_sentence_scores: scores.to_vec(),
        pooled,
    })
}

/// Responses of every kernel to `score`. Responses that would underflow are
/// held at the smallest normal `f64`, so every component stays positive.
pub fn kernel_vector(score: f64, bank: &KernelBank) -> Vec<f64> {
    bank.means
        .iter()
        .zip(&bank.widths)
        .map(|(mu, sigma)| {
            let d = score - mu;
            (-(d * d) / (2.0 * sigma * sigma)).exp().max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// dV[j]/ds at `score`; zero where the response sits on its floor.
pub fn kernel_vector_derivative(score: f64, bank: &KernelBank) -> Vec<f64> {
    kernel_vector(score, bank)
        .into_iter()
        .zip(bank.means.iter().zip(&bank.widths))
        .map(|(v, (mu, sigma))| {
            if v <= f64::MIN_POSITIVE {
                0.0
            } else {
                -(score - mu) / (sigma * sigma) * v
            }
        })
        .collect()
}

/// Mean of the sentences' kernel vectors.
pub fn kernel_pool(scores: &[f64], bank: &KernelBank) -> Result<Vec<f64>, FusionError> {
    if scores.is_empty() {
        return Err(FusionError::EmptyHypothesis);
    }
    let mut pooled = vec![0.0; bank.len()];
    for &s in scores {
        for (p, v) in pooled.iter_mut().zip(kernel_vector(s, bank)) {
            *p += v;
        }
    }
    let m = scores.len() as f64;
    pooled.iter_mut().for_each(|p| *p /= m);
    Ok(pooled)
}

pub fn fuse_kernel(scores: &[f64], bank: &KernelBank, head: &Mlp) -> Result<FusionResult, FusionError> {
    bank.validate()?;
    let pooled = kernel_pool(scores, bank)?;
    if head.input_dim() != pooled.len() {
        return Err(FusionError::DimensionMismatch {
            expected: head.input_dim(),
            found: pooled.len(),
        });
    }
    Ok(FusionResult {
        sample_score: squash(head.forward(&pooled)[0]),
        method: FusionMethod::Kernel,
        argmin_index: None,
        per_sentence_scores: scores.to_vec(),
        pooled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Dense};

    fn iv(v: &[f64]) -> InferenceVector {
        InferenceVector(v.to_vec())
    }

    fn zero_head(dim: usize) -> Mlp {
        Mlp {
            layers: vec![Dense::zeros(dim, 1, Activation::Identity)],
        }
    }

    #[test]
    fn score_min_examples() {
        let r = fuse_score_min(&[0.9, 0.2, 0.7]).unwrap();
        assert_eq!(r.sample_score, 0.2);
        assert_eq!(r.argmin_index, Some(1));
        assert_eq!(fuse_score_min(&[0.5]).unwrap().sample_score, 0.5);
        assert_eq!(fuse_score_min(&[1.0, 1.0, 1.0]).unwrap().sample_score, 1.0);
        assert_eq!(fuse_score_min(&[0.3, 0.1, 0.1]).unwrap().argmin_index, Some(1));
        assert_eq!(fuse_score_min(&[]), Err(FusionError::EmptyHypothesis));
    }

    #[test]
    fn vector_min_examples() {
        let (pooled, owners) = vector_min_pool(&[iv(&[1.0, 4.0]), iv(&[2.0, 3.0])]).unwrap();
        assert_eq!(pooled, vec![1.0, 3.0]);
        assert_eq!(owners, vec![0, 1]);
        let (single, _) = vector_min_pool(&[iv(&[0.3, -0.2])]).unwrap();
        assert_eq!(single, vec![0.3, -0.2]);
        let (swapped, _) = vector_min_pool(&[iv(&[2.0, 3.0]), iv(&[1.0, 4.0])]).unwrap();
        assert_eq!(swapped, pooled);
        assert_eq!(
            vector_min_pool(&[iv(&[1.0]), iv(&[1.0, 2.0])]),
            Err(FusionError::DimensionMismatch { expected: 1, found: 2 })
        );
        let r = fuse_vector_min(&[iv(&[1.0, 4.0])], &zero_head(2), &[0.4]).unwrap();
        assert_eq!(r.sample_score, 0.5);
        assert!(fuse_vector_min(&[iv(&[1.0, 4.0])], &zero_head(3), &[0.4]).is_err());
    }

    #[test]
    fn kernel_values() {
        let bank = KernelBank::default();
        assert_eq!(bank.len(), 11);
        assert!(bank.widths.iter().all(|w| *w == 0.01));
        let v = kernel_vector(0.3, &bank);
        assert_eq!(v[3], 1.0);
        let off = kernel_vector(0.31, &bank);
        assert!((off[3] - (-0.5f64).exp()).abs() < 1e-9);
        assert!((off[3] - 0.6065).abs() < 1e-4);
    }

    #[test]
    fn kernel_pool_examples() {
        let bank = KernelBank::default();
        assert_eq!(kernel_pool(&[0.42], &bank).unwrap(), kernel_vector(0.42, &bank));
        assert_eq!(
            kernel_pool(&[0.42, 0.42], &bank).unwrap(),
            kernel_pool(&[0.42], &bank).unwrap()
        );
        let two = kernel_pool(&[0.0, 1.0], &bank).unwrap();
        // only the end kernels are non-negligible; exp(-0.5 / 0.0001) sits on the floor
        assert_eq!(two[0], 0.5);
        assert_eq!(two[10], 0.5);
        assert_eq!(two[5], f64::MIN_POSITIVE);
        assert!(kernel_vector_derivative(0.0, &bank)[5] == 0.0);
        let wide = KernelBank::evenly_spaced(3, 0.5);
        let got = kernel_pool(&[0.0, 1.0], &wide).unwrap();
        let k = |s: f64, mu: f64| (-(s - mu) * (s - mu) / 0.5).exp();
        for (j, mu) in [0.0, 0.5, 1.0].into_iter().enumerate() {
            assert!((got[j] - (k(0.0, mu) + k(1.0, mu)) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_bank_validation() {
        assert!(KernelBank::default().validate().is_ok());
        assert!(KernelBank::evenly_spaced(0, 0.1).validate().is_err());
        assert!(KernelBank {
            means: vec![0.5],
            widths: vec![0.0]
        }
        .validate()
        .is_err());
        assert!(KernelBank {
            means: vec![1.5],
            widths: vec![0.1]
        }
        .validate()
        .is_err());
        assert_eq!(KernelBank::evenly_spaced(1, 0.1).means, vec![0.5]);
    }

    #[test]
    fn kernel_derivative_matches_difference() {
        let bank = KernelBank::evenly_spaced(5, 0.2);
        let s = 0.37;
        let h = 1e-6;
        let plus = kernel_vector(s + h, &bank);
        let minus = kernel_vector(s - h, &bank);
        for (j, d) in kernel_vector_derivative(s, &bank).into_iter().enumerate() {
            assert!(((plus[j] - minus[j]) / (2.0 * h) - d).abs() < 1e-6);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in FusionMethod::ALL {
            assert_eq!(m.as_str().parse::<FusionMethod>(), Ok(m));
        }
    }
}
