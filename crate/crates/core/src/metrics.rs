//! Document-level classification metrics and sentence-level evidence metrics.
//!
//! Reports serialize two ways: `key=value` lines and a two-row tab-separated
//! table (header, values). Field names are listed in `FIELDS` on each report.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{predicted} predictions for {gold} gold labels")]
    LengthMismatch { predicted: usize, gold: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from counts; a zero denominator yields 0.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> Prf {
    let ratio = |num: usize, den: usize| {
        if den == 0 || num == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    Prf {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        // 2PR/(P+R) written over counts
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    /// gold entailment, predicted entailment
    pub ee: usize,
    /// gold entailment, predicted not_entailment
    pub en: usize,
    /// gold not_entailment, predicted entailment
    pub ne: usize,
    /// gold not_entailment, predicted not_entailment
    pub nn: usize,
}

impl Confusion {
    pub fn from_labels(predicted: &[Label], gold: &[Label]) -> Result<Self, MetricsError> {
        if predicted.len() != gold.len() {
            return Err(MetricsError::LengthMismatch {
                predicted: predicted.len(),
                gold: gold.len(),
            });
        }
        let mut c = Confusion::default();
        for (p, g) in predicted.iter().zip(gold) {
            match (g, p) {
                (Label::Entailment, Label::Entailment) => c.ee += 1,
                (Label::Entailment, Label::NotEntailment) => c.en += 1,
                (Label::NotEntailment, Label::Entailment) => c.ne += 1,
                (Label::NotEntailment, Label::NotEntailment) => c.nn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.ee + self.en + self.ne + self.nn
    }

    pub fn correct(&self) -> usize {
        self.ee + self.nn
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocEvalReport {
    pub entailment: Prf,
    pub not_entailment: Prf,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

impl DocEvalReport {
    pub const FIELDS: [&'static str; 14] = [
        "entailment_precision",
        "entailment_recall",
        "entailment_f1",
        "not_entailment_precision",
        "not_entailment_recall",
        "not_entailment_f1",
        "micro_f1",
        "macro_f1",
        "accuracy",
        "gold_e_pred_e",
        "gold_e_pred_n",
        "gold_n_pred_e",
        "gold_n_pred_n",
        "total",
    ];

    pub fn from_confusion(c: Confusion) -> Self {
        let entailment = prf(c.ee, c.ne, c.en);
        let not_entailment = prf(c.nn, c.en, c.ne);
        let wrong = c.en + c.ne;
        // pooled over both classes: every error is one FP and one FN
        let micro = prf(c.correct(), wrong, wrong);
        let accuracy = if c.total() == 0 {
            0.0
        } else {
            c.correct() as f64 / c.total() as f64
        };
        Self {
            entailment,
            not_entailment,
            micro_f1: micro.f1,
            macro_f1: (entailment.f1 + not_entailment.f1) / 2.0,
            accuracy,
            confusion: c,
        }
    }

    fn values(&self) -> Vec<String> {
        let c = &self.confusion;
        let mut v: Vec<String> = [
            self.entailment.precision,
            self.entailment.recall,
            self.entailment.f1,
            self.not_entailment.precision,
            self.not_entailment.recall,
            self.not_entailment.f1,
            self.micro_f1,
            self.macro_f1,
            self.accuracy,
        ]
        .iter()
        .map(|x| fmt_metric(*x))
        .collect();
        v.extend([c.ee, c.en, c.ne, c.nn, c.total()].iter().map(usize::to_string));
        v
    }

    pub fn to_key_values(&self) -> String {
        key_values(&Self::FIELDS, &self.values())
    }

    pub fn to_table(&self) -> String {
        table(&Self::FIELDS, &self.values())
    }
}

pub fn doc_eval(predicted: &[Label], gold: &[Label]) -> Result<DocEvalReport, MetricsError> {
    Ok(DocEvalReport::from_confusion(Confusion::from_labels(predicted, gold)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceOutcome {
    /// Some gold group is fully contained in the retrieved set.
    pub hit: bool,
    /// Share of retrieved sentences inside the union of gold groups; `None`
    /// when nothing was retrieved.
    pub precision: Option<f64>,
}

pub fn evidence_eval(retrieved: &[usize], gold_groups: &[Vec<usize>]) -> EvidenceOutcome {
    let got: BTreeSet<usize> = retrieved.iter().copied().collect();
    let hit = gold_groups
        .iter()
        .any(|g| !g.is_empty() && g.iter().all(|i| got.contains(i)));
    let union: BTreeSet<usize> = gold_groups.iter().flatten().copied().collect();
    let precision = (!got.is_empty()).then(|| got.intersection(&union).count() as f64 / got.len() as f64);
    EvidenceOutcome { hit, precision }
}

/// Fraction of sentences with both a hit and a correct label. Waived hit
/// conditions should already be folded into `hits`.
pub fn full_accuracy(hits: &[bool], predicted: &[Label], gold: &[Label]) -> f64 {
    let n = hits.len().min(predicted.len()).min(gold.len());
    if n == 0 {
        return 0.0;
    }
    let ok = (0..n).filter(|&i| hits[i] && predicted[i] == gold[i]).count();
    ok as f64 / n as f64
}

/// Everything known about one hypothesis sentence at evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRecord {
    pub retrieved: Vec<usize>,
    pub is_substring: bool,
    pub predicted: Label,
    pub gold: Label,
    pub gold_groups: Vec<Vec<usize>>,
}

impl SentenceRecord {
    /// Counted in evidence precision/recall.
    pub fn is_evidence_bearing(&self) -> bool {
        !self.is_substring && self.gold_groups.iter().any(|g| !g.is_empty())
    }

    /// Hit flag used by full accuracy. Substring matches and gold
    /// not-entailment sentences without evidence groups are waived.
    pub fn effective_hit(&self) -> bool {
        if self.is_substring {
            return true;
        }
        if !self.gold_groups.iter().any(|g| !g.is_empty()) {
            return self.gold == Label::NotEntailment;
        }
        evidence_eval(&self.retrieved, &self.gold_groups).hit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEvalReport {
    pub evidence_precision: f64,
    pub evidence_recall: f64,
    pub evidence_f1: f64,
    pub label_micro_f1: f64,
    pub label_macro_f1: f64,
    pub label_accuracy: f64,
    pub full_accuracy: f64,
    /// Fraction of all sentences whose hit condition is met or waived.
    pub hit_rate: f64,
    pub sentences: usize,
    pub evidence_sentences: usize,
}

impl SentenceEvalReport {
    pub const FIELDS: [&'static str; 10] = [
        "evidence_precision",
        "evidence_recall",
        "evidence_f1",
        "label_micro_f1",
        "label_macro_f1",
        "label_accuracy",
        "full_accuracy",
        "hit_rate",
        "sentences",
        "evidence_sentences",
    ];

    fn values(&self) -> Vec<String> {
        let mut v: Vec<String> = [
            self.evidence_precision,
            self.evidence_recall,
            self.evidence_f1,
            self.label_micro_f1,
            self.label_macro_f1,
            self.label_accuracy,
            self.full_accuracy,
            self.hit_rate,
        ]
        .iter()
        .map(|x| fmt_metric(*x))
        .collect();
        v.push(self.sentences.to_string());
        v.push(self.evidence_sentences.to_string());
        v
    }

    pub fn to_key_values(&self) -> String {
        key_values(&Self::FIELDS, &self.values())
    }

    pub fn to_table(&self) -> String {
        table(&Self::FIELDS, &self.values())
    }
}

/// Aggregates over sentences (not samples).
pub fn sentence_eval(records: &[SentenceRecord]) -> SentenceEvalReport {
    let mut hits = 0usize;
    let mut bearing = 0usize;
    let mut precision_sum = 0.0;
    for r in records.iter().filter(|r| r.is_evidence_bearing()) {
        bearing += 1;
        let outcome = evidence_eval(&r.retrieved, &r.gold_groups);
        hits += usize::from(outcome.hit);
        precision_sum += outcome.precision.unwrap_or(0.0);
    }
    let (precision, recall) = if bearing == 0 {
        (0.0, 0.0)
    } else {
        (precision_sum / bearing as f64, hits as f64 / bearing as f64)
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let predicted: Vec<Label> = records.iter().map(|r| r.predicted).collect();
    let gold: Vec<Label> = records.iter().map(|r| r.gold).collect();
    let labels = DocEvalReport::from_confusion(Confusion::from_labels(&predicted, &gold).expect("aligned"));
    let effective: Vec<bool> = records.iter().map(SentenceRecord::effective_hit).collect();
    let hit_rate = if records.is_empty() {
        0.0
    } else {
        effective.iter().filter(|h| **h).count() as f64 / records.len() as f64
    };
    SentenceEvalReport {
        evidence_precision: precision,
        evidence_recall: recall,
        evidence_f1: f1,
        label_micro_f1: labels.micro_f1,
        label_macro_f1: labels.macro_f1,
        label_accuracy: labels.accuracy,
        full_accuracy: full_accuracy(&effective, &predicted, &gold),
        hit_rate,
        sentences: records.len(),
        evidence_sentences: bearing,
    }
}

fn fmt_metric(x: f64) -> String {
    format!("{x:.6}")
}

fn key_values(fields: &[&str], values: &[String]) -> String {
    let mut out = String::new();
    for (k, v) in fields.iter().zip(values) {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}

fn table(fields: &[&str], values: &[String]) -> String {
    format!("{}\n{}\n", fields.join("\t"), values.join("\t"))
}
