//! Macro-averaged precision/recall, F-beta, accuracy, and the
//! Return/Retrieved counts that summarize a retrieval run.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction for unknown query `{0}`")]
    UnknownQuery(String),
    #[error("gold query `{0}` has an empty id set")]
    EmptyGold(String),
    #[error("no gold queries to average over")]
    NoGoldQueries,
    #[error("prediction and gold lists differ in length ({predictions} vs {gold})")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("accuracy over empty lists is undefined")]
    EmptyLists,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

pub type IdSets = BTreeMap<String, BTreeSet<String>>;

/// Macro precision and recall over the gold queries. Per query,
/// `P = |pred ∩ gold| / |pred|` (0 for an empty prediction set) and
/// `R = |pred ∩ gold| / |gold|`; the macro values are unweighted means.
/// A gold query without predictions contributes zeros; a prediction for a
/// query absent from the gold set is an error.
pub fn macro_pr(predictions: &IdSets, gold: &IdSets) -> Result<(f64, f64), MetricsError> {
    if gold.is_empty() {
        return Err(MetricsError::NoGoldQueries);
    }
    for q in predictions.keys() {
        if !gold.contains_key(q) {
            return Err(MetricsError::UnknownQuery(q.clone()));
        }
    }
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    for (q, gold_ids) in gold {
        if gold_ids.is_empty() {
            return Err(MetricsError::EmptyGold(q.clone()));
        }
        let empty = BTreeSet::new();
        let pred = predictions.get(q).unwrap_or(&empty);
        let hits = pred.intersection(gold_ids).count() as f64;
        p_sum += if pred.is_empty() {
            0.0
        } else {
            hits / pred.len() as f64
        };
        r_sum += hits / gold_ids.len() as f64;
    }
    let n = gold.len() as f64;
    Ok((p_sum / n, r_sum / n))
}

/// F-beta from precision and recall: `(1 + b^2) P R / (b^2 P + R)`,
/// 0 when both are 0. F2 weights recall four times as heavily.
pub fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * p + r;
    if denom == 0.0 {
        return 0.0;
    }
    (1.0 + b2) * p * r / denom
}

/// Fraction of agreeing positions.
pub fn accuracy(predictions: &[bool], gold: &[bool]) -> Result<f64, MetricsError> {
    if predictions.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::EmptyLists);
    }
    let hits = predictions
        .iter()
        .zip(gold)
        .filter(|(p, g)| p == g)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Summary of a retrieval or classification run. `return_count` is the
/// total number of predicted ids, `retrieved_count` the correct ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub p_macro: f64,
    pub r_macro: f64,
    pub f2: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    pub return_count: usize,
    pub retrieved_count: usize,
}

impl MetricsReport {
    pub fn from_sets(predictions: &IdSets, gold: &IdSets) -> Result<Self, MetricsError> {
        let (p, r) = macro_pr(predictions, gold)?;
        let return_count = predictions.values().map(BTreeSet::len).sum();
        let retrieved_count = gold
            .iter()
            .map(|(q, gold_ids)| {
                predictions
                    .get(q)
                    .map_or(0, |pred| pred.intersection(gold_ids).count())
            })
            .sum();
        Ok(Self {
            p_macro: p,
            r_macro: r,
            f2: f_beta(p, r, 2.0),
            f1: f_beta(p, r, 1.0),
            accuracy: None,
            return_count,
            retrieved_count,
        })
    }

    /// Report for boolean classification: accuracy plus the degenerate
    /// per-query retrieval view in which each query predicts its label,
    /// making macro P, R and every F-beta equal the accuracy.
    pub fn from_labels(predictions: &[bool], gold: &[bool]) -> Result<Self, MetricsError> {
        let acc = accuracy(predictions, gold)?;
        let correct = predictions
            .iter()
            .zip(gold)
            .filter(|(p, g)| p == g)
            .count();
        Ok(Self {
            p_macro: acc,
            r_macro: acc,
            f2: acc,
            f1: acc,
            accuracy: Some(acc),
            return_count: predictions.len(),
            retrieved_count: correct,
        })
    }
}

/// A boolean per-query label, for entailment-style evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub query_id: String,
    pub label: bool,
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>, MetricsError> {
    let text = fs::read_to_string(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord = serde_json::from_str(line).map_err(|e| MetricsError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[LabelRecord]) -> Result<(), MetricsError> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&serde_json::to_string(l).expect("label serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}
