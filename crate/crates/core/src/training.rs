//! Document-label training with manual reverse mode and AdamW.

use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::fsio::Fnv1a;
use crate::fusion::{kernel_vector_derivative, FusionMethod};
use crate::metrics::{doc_eval, DocEvalReport, MetricsError};
use crate::model::{FusionHead, Model, ModelConfig, ModelError, PreparedSample};

/// Probability clamp applied before taking logs.
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} set is empty")]
    EmptyDataset(&'static str),
    #[error("sample {sample_id} has no label")]
    MissingLabel { sample_id: String },
    #[error("non-finite loss {loss} at step {step} on sample {sample_id}")]
    NonFiniteLoss { step: usize, sample_id: String, loss: f64 },
    #[error("parameters became non-finite after step {step}")]
    NonFiniteParameters { step: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("fusion method {model} in model but {config} in training config")]
    FusionMismatch { model: FusionMethod, config: FusionMethod },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("writing training log: {0}")]
    Log(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    #[default]
    MacroF1,
    MicroF1,
}

impl SelectionMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MacroF1 => "macro_f1",
            Self::MicroF1 => "micro_f1",
        }
    }

    pub fn of(self, report: &DocEvalReport) -> f64 {
        match self {
            Self::MacroF1 => report.macro_f1,
            Self::MicroF1 => report.micro_f1,
        }
    }
}

impl FromStr for SelectionMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "macro_f1" | "macro" => Ok(Self::MacroF1),
            "micro_f1" | "micro" => Ok(Self::MicroF1),
            other => Err(format!(
                "unknown selection metric `{other}` (expected macro_f1 or micro_f1)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub accumulation_steps: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Optimizer steps between dev evaluations; `None` evaluates once per epoch.
    pub eval_interval: Option<usize>,
    pub seed: u64,
    pub fusion: FusionMethod,
    pub threshold: f64,
    pub selection_metric: SelectionMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 8,
            accumulation_steps: 4,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            eval_interval: None,
            seed: 42,
            fusion: FusionMethod::ScoreMin,
            threshold: 0.5,
            selection_metric: SelectionMetric::MacroF1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.epochs == 0 || self.batch_size == 0 || self.accumulation_steps == 0 {
            return bad("epochs, batch_size and accumulation_steps must be positive");
        }
        if self.eval_interval == Some(0) {
            return bad("eval_interval must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay must be >= 0");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        Ok(())
    }

    /// Samples contributing to one optimizer step.
    pub fn window(&self) -> usize {
        self.batch_size * self.accumulation_steps
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "epochs={} batch_size={} accumulation_steps={} learning_rate={:e} weight_decay={:e} eval_interval={} seed={} fusion={} threshold={} selection_metric={}",
            self.epochs,
            self.batch_size,
            self.accumulation_steps,
            self.learning_rate,
            self.weight_decay,
            self.eval_interval.map_or("epoch".to_string(), |n| n.to_string()),
            self.seed,
            self.fusion,
            self.threshold,
            self.selection_metric.as_str(),
        )
    }

    /// Stable fingerprint of every field, stored in checkpoints.
    pub fn digest(&self) -> String {
        let mut h = Fnv1a::default();
        h.feed(self.to_key_values().as_bytes());
        format!("{:016x}", h.finish())
    }
}

/// `-[y ln p + (1 - y) ln(1 - p)]` with `p` clamped to `[eps, 1 - eps]`.
pub fn bce_loss(y_hat: f64, label: Label) -> f64 {
    let p = y_hat.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    let y = label.target();
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// dL/dŷ; zero where the clamp is active.
pub fn bce_grad(y_hat: f64, label: Label) -> f64 {
    if !(BCE_EPSILON..=1.0 - BCE_EPSILON).contains(&y_hat) {
        return 0.0;
    }
    let y = label.target();
    -y / y_hat + (1.0 - y) / (1.0 - y_hat)
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTape {
    grads: Model,
}

impl GradientTape {
    pub fn new(model: &Model) -> Self {
        Self {
            grads: model.zeros_like(),
        }
    }

    pub fn zero(&mut self) {
        for (t, _) in self.grads.tensors_mut() {
            t.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (t, _) in self.grads.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn grads(&self) -> &Model {
        &self.grads
    }

    pub fn flat(&self) -> Vec<f64> {
        self.grads
            .tensors()
            .into_iter()
            .flat_map(|(t, _)| t.iter().copied())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.grads.tensors().iter().all(|(t, _)| t.iter().all(|g| *g == 0.0))
    }
}

/// Forward plus backward on one labelled sample. Adds dL/dθ into `tape`
/// and returns `(loss, ŷ_HP)`.
pub fn backward(
    model: &Model,
    sample: &PreparedSample,
    label: Label,
    tape: &mut GradientTape,
) -> Result<(f64, f64), ModelError> {
    let fwd = model.forward(sample)?;
    let y_hat = fwd.fusion.sample_score;
    let loss = bce_loss(y_hat, label);
    let d_score = bce_grad(y_hat, label);
    if d_score == 0.0 {
        return Ok((loss, y_hat));
    }
    let grads = &mut tape.grads;
    // Backprop one sentence's credibility logit through head and encoder.
    let reader_from_logit = |i: usize, d_logit: f64, grads: &mut Model| {
        if let Some(tr) = &fwd.traces[i] {
            let d_h = model.reader.head.backward(&tr.head, &[d_logit], &mut grads.reader.head);
            model
                .reader
                .encoder
                .backward(&tr.encoder, &d_h, &mut grads.reader.encoder);
        }
    };
    match &model.fusion {
        FusionHead::ScoreMin => {
            let i = fwd.fusion.argmin_index.expect("score-min sets argmin");
            let s = fwd.scores[i];
            reader_from_logit(i, d_score * s * (1.0 - s), grads);
        }
        FusionHead::VectorMin { head } => {
            let d_logit = d_score * y_hat * (1.0 - y_hat);
            let trace = fwd.fusion_trace.as_ref().expect("head trace");
            let grad_head = grads.fusion.mlp_mut().expect("grad head");
            let d_pooled = head.backward(trace, &[d_logit], grad_head);
            let dim = model.reader.dim();
            let mut d_vectors = vec![vec![0.0; dim]; sample.sentences.len()];
            for (j, &owner) in fwd.owners.iter().enumerate() {
                d_vectors[owner][j] += d_pooled[j];
            }
            for (i, d_h) in d_vectors.iter().enumerate() {
                if let Some(tr) = &fwd.traces[i] {
                    if d_h.iter().any(|g| *g != 0.0) {
                        model
                            .reader
                            .encoder
                            .backward(&tr.encoder, d_h, &mut grads.reader.encoder);
                    }
                }
            }
        }
        FusionHead::Kernel { bank, head } => {
            let d_logit = d_score * y_hat * (1.0 - y_hat);
            let trace = fwd.fusion_trace.as_ref().expect("head trace");
            let grad_head = grads.fusion.mlp_mut().expect("grad head");
            let d_pooled = head.backward(trace, &[d_logit], grad_head);
            let m = sample.sentences.len() as f64;
            for i in 0..sample.sentences.len() {
                if fwd.traces[i].is_none() {
                    continue;
                }
                let s = fwd.scores[i];
                let d_s: f64 = kernel_vector_derivative(s, bank)
                    .iter()
                    .zip(&d_pooled)
                    .map(|(dv, dp)| dv * dp)
                    .sum::<f64>()
                    / m;
                reader_from_logit(i, d_s * s * (1.0 - s), grads);
            }
        }
    }
    Ok((loss, y_hat))
}

/// Moment estimates for every parameter, in `Model::tensors` order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(model: &Model) -> Self {
        let shapes: Vec<Vec<f64>> = model.tensors().iter().map(|(t, _)| vec![0.0; t.len()]).collect();
        Self {
            step: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One AdamW update of a single buffer. Decay is applied first, and only
/// when `decay` is set.
pub fn adamw_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    decay: bool,
    cfg: &AdamConfig,
) {
    let t = step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let step_size = cfg.learning_rate / bc1;
    let bc2_sqrt = bc2.sqrt();
    for i in 0..params.len() {
        if decay {
            params[i] *= 1.0 - cfg.learning_rate * cfg.weight_decay;
        }
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let denom = v[i].sqrt() / bc2_sqrt + cfg.eps;
        params[i] -= step_size * m[i] / denom;
    }
}

pub fn adamw_step(model: &mut Model, tape: &GradientTape, state: &mut AdamState, cfg: &AdamConfig) {
    state.step += 1;
    let grads = tape.grads.tensors();
    for (k, (params, decay)) in model.tensors_mut().into_iter().enumerate() {
        adamw_update(
            params,
            grads[k].0,
            &mut state.m[k],
            &mut state.v[k],
            state.step,
            decay,
            cfg,
        );
    }
}

/// Mean gradient of `samples`, in order, as one tape.
pub fn mean_gradient(model: &Model, samples: &[&PreparedSample]) -> Result<(GradientTape, f64), TrainError> {
    let mut tape = GradientTape::new(model);
    let mut loss = 0.0;
    for s in samples {
        let label = s.label.ok_or_else(|| TrainError::MissingLabel {
            sample_id: s.id.clone(),
        })?;
        loss += backward(model, s, label, &mut tape)?.0;
    }
    let n = samples.len().max(1) as f64;
    tape.scale(1.0 / n);
    Ok((tape, loss / n))
}

/// Output of `predict` for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
    pub score: f64,
    pub fusion: FusionMethod,
    /// Least credible sentence (score-min only).
    pub argmin_index: Option<usize>,
    pub sentence_scores: Vec<f64>,
    pub sentence_labels: Vec<Label>,
}

pub fn predict(model: &Model, sample: &PreparedSample, threshold: f64) -> Result<Prediction, ModelError> {
    let fwd = model.forward(sample)?;
    let score = fwd.fusion.sample_score;
    Ok(Prediction {
        id: sample.id.clone(),
        label: Label::from_score(score, threshold),
        score,
        fusion: model.method(),
        argmin_index: fwd.fusion.argmin_index,
        sentence_labels: fwd.scores.iter().map(|&s| Label::from_score(s, threshold)).collect(),
        sentence_scores: fwd.scores,
    })
}

pub fn predict_all(model: &Model, samples: &[PreparedSample], threshold: f64) -> Result<Vec<Prediction>, ModelError> {
    samples.iter().map(|s| predict(model, s, threshold)).collect()
}

/// Document metrics of `model` on labelled samples.
pub fn evaluate(model: &Model, samples: &[PreparedSample], threshold: f64) -> Result<DocEvalReport, TrainError> {
    let mut predicted = Vec::with_capacity(samples.len());
    let mut gold = Vec::with_capacity(samples.len());
    for s in samples {
        gold.push(s.label.ok_or_else(|| TrainError::MissingLabel {
            sample_id: s.id.clone(),
        })?);
        predicted.push(predict(model, s, threshold)?.label);
    }
    Ok(doc_eval(&predicted, &gold)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub dev: DocEvalReport,
    pub selected: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best dev selection metric.
    pub model: Model,
    pub best_dev: DocEvalReport,
    pub best_step: usize,
    pub steps: usize,
    pub history: Vec<EvalRecord>,
}

/// Trains from scratch. Progress lines go to `log` as key=value pairs.
pub fn train(
    train_set: &[PreparedSample],
    dev_set: &[PreparedSample],
    model_config: &ModelConfig,
    config: &TrainConfig,
    log: &mut dyn Write,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if model_config.fusion != config.fusion {
        return Err(TrainError::FusionMismatch {
            model: model_config.fusion,
            config: config.fusion,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = Model::init(model_config, &mut rng);
    train_from(model, train_set, dev_set, config, &mut rng, log)
}

/// Continues training `model`, drawing epoch shuffles from `rng`.
pub fn train_from(
    mut model: Model,
    train_set: &[PreparedSample],
    dev_set: &[PreparedSample],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    log: &mut dyn Write,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset("training"));
    }
    if dev_set.is_empty() {
        return Err(TrainError::EmptyDataset("dev"));
    }
    model.check_shapes()?;
    if model.method() != config.fusion {
        return Err(TrainError::FusionMismatch {
            model: model.method(),
            config: config.fusion,
        });
    }
    let labels: Vec<Label> = train_set
        .iter()
        .map(|s| {
            s.label.ok_or_else(|| TrainError::MissingLabel {
                sample_id: s.id.clone(),
            })
        })
        .collect::<Result<_, _>>()?;
    let adam = AdamConfig::new(config.learning_rate, config.weight_decay);
    let mut state = AdamState::new(&model);
    let mut tape = GradientTape::new(&model);
    let window = config.window();

    let mut best: Option<(Model, DocEvalReport, usize)> = None;
    let mut history = Vec::new();
    let mut step = 0usize;
    let mut window_len = 0usize;
    let mut window_loss = 0.0;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(rng);
        for (pos, &idx) in order.iter().enumerate() {
            let sample = &train_set[idx];
            let (loss, _) = backward(&model, sample, labels[idx], &mut tape)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    step,
                    sample_id: sample.id.clone(),
                    loss,
                });
            }
            window_len += 1;
            window_loss += loss;
            let epoch_end = pos + 1 == order.len();
            if window_len == window || epoch_end {
                tape.scale(1.0 / window_len as f64);
                adamw_step(&mut model, &tape, &mut state, &adam);
                tape.zero();
                step += 1;
                let recent_loss = window_loss / window_len as f64;
                window_len = 0;
                window_loss = 0.0;
                if !model.is_finite() {
                    return Err(TrainError::NonFiniteParameters { step });
                }
                let due = match config.eval_interval {
                    Some(n) => step.is_multiple_of(n),
                    None => false,
                };
                let last = epoch == config.epochs && epoch_end;
                if due || (config.eval_interval.is_none() && epoch_end) || last {
                    if history.last().is_some_and(|r: &EvalRecord| r.step == step) {
                        continue;
                    }
                    let dev = evaluate(&model, dev_set, config.threshold)?;
                    let metric = config.selection_metric.of(&dev);
                    let selected = best
                        .as_ref()
                        .is_none_or(|(_, b, _)| metric > config.selection_metric.of(b));
                    writeln!(
                        log,
                        "event=eval epoch={epoch} step={step} loss={recent_loss:.6} dev_micro_f1={:.6} dev_macro_f1={:.6} selected={selected}",
                        dev.micro_f1, dev.macro_f1
                    )?;
                    if selected {
                        best = Some((model.clone(), dev.clone(), step));
                    }
                    history.push(EvalRecord {
                        step,
                        epoch,
                        loss: recent_loss,
                        dev,
                        selected,
                    });
                }
            }
        }
    }
    let (model, best_dev, best_step) = best.expect("at least one evaluation runs");
    writeln!(
        log,
        "event=done steps={step} best_step={best_step} best_{}={:.6}",
        config.selection_metric.as_str(),
        config.selection_metric.of(&best_dev)
    )?;
    Ok(TrainOutcome {
        model,
        best_dev,
        best_step,
        steps: step,
        history,
    })
}
