//! Versioned JSON checkpoints.
//!
//! Floats are written in shortest round-trip decimal form, so a save/load
//! cycle reproduces every parameter bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CorpusError;
use crate::fusion::FusionMethod;
use crate::metrics::DocEvalReport;
use crate::model::{Model, ModelConfig};
use crate::retrieval::RetrievalConfig;
use crate::training::TrainConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub fusion: FusionMethod,
    pub model_config: ModelConfig,
    pub model: Model,
    pub retrieval: RetrievalConfig,
    pub train_config: TrainConfig,
    pub train_digest: String,
    pub best_step: usize,
    pub best_dev: Option<DocEvalReport>,
}

impl ModelCheckpoint {
    pub fn new(model: Model, model_config: ModelConfig, retrieval: RetrievalConfig, train_config: TrainConfig) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            fusion: model.method(),
            train_digest: train_config.digest(),
            model_config,
            model,
            retrieval,
            train_config,
            best_step: 0,
            best_dev: None,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.train_config.threshold
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        // Check the version before the full schema so old files report a
        // version problem rather than a missing field.
        let value: Value = serde_json::from_str(text).map_err(|e| CorpusError::CorruptCheckpoint(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| CorpusError::CorruptCheckpoint("missing format_version".into()))?;
        if found != u64::from(CHECKPOINT_VERSION) {
            return Err(CorpusError::VersionMismatch {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                expected: CHECKPOINT_VERSION,
            });
        }
        let ckpt: Self = serde_json::from_value(value).map_err(|e| CorpusError::CorruptCheckpoint(e.to_string()))?;
        if ckpt.fusion != ckpt.model.method() {
            return Err(CorpusError::CorruptCheckpoint(format!(
                "header says {} but parameters are for {}",
                ckpt.fusion,
                ckpt.model.method()
            )));
        }
        ckpt.model
            .check_shapes()
            .map_err(|e| CorpusError::CorruptCheckpoint(e.to_string()))?;
        if !ckpt.model.is_finite() {
            return Err(CorpusError::CorruptCheckpoint("non-finite parameter".into()));
        }
        Ok(ckpt)
    }
}

pub fn save_checkpoint(ckpt: &ModelCheckpoint, path: &Path) -> Result<(), CorpusError> {
    crate::fsio::write_atomic(path, ckpt.to_json().as_bytes()).map_err(|e| CorpusError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    ModelCheckpoint::from_json(&text)
}
