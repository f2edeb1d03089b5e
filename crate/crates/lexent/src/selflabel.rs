//! Self-labeled denoising: train, predict, relabel, retrain.
//!
//! One pass trains the classifier for `e1` epochs on the initial labels,
//! thresholds its own predictions, turns positive labels negative wherever
//! the model disagrees (never the reverse direction), and continues
//! training the same model for `e2` more epochs on the revised labels.
//! With `e2 = 0` the procedure degenerates to plain `e1`-epoch training,
//! bit for bit.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::LabeledPair;
use crate::scorer::{self, featurize_pairs, LogRegModel, ScorerError};

#[derive(Debug, Error)]
pub enum SelfLabelError {
    #[error("self-labeling needs at least one example")]
    Empty,
    #[error("labels length {labels} does not match example count {examples}")]
    LengthMismatch { examples: usize, labels: usize },
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfLabelConfig {
    /// Epochs before the relabel pass.
    pub e1: usize,
    /// Epochs after the relabel pass.
    pub e2: usize,
    /// Probability threshold realizing the predicted label.
    pub decision_threshold: f64,
    pub learning_rate: f64,
    /// Relabel passes; the standard procedure uses exactly one.
    pub rounds: usize,
    pub dim: usize,
}

impl Default for SelfLabelConfig {
    fn default() -> Self {
        Self {
            e1: 2,
            e2: 2,
            decision_threshold: 0.5,
            learning_rate: scorer::DEFAULT_LEARNING_RATE,
            rounds: 1,
            dim: scorer::DEFAULT_DIM,
        }
    }
}

/// One label flip: positives only ever turn negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipRecord {
    pub index: usize,
    pub old: bool,
    pub new: bool,
}

#[derive(Debug)]
pub struct SelfLabelOutcome {
    pub model: LogRegModel,
    pub labels: Vec<bool>,
    pub flips: Vec<FlipRecord>,
    /// Predictions from the first relabel pass.
    pub predictions: Vec<f64>,
}

/// Run the self-label procedure on `pairs` with initial labels `y0`
/// (authoritative over the labels stored in the pairs).
pub fn run_self_label(
    pairs: &[LabeledPair],
    y0: &[bool],
    config: &SelfLabelConfig,
    seed: u64,
) -> Result<SelfLabelOutcome, SelfLabelError> {
    if pairs.is_empty() {
        return Err(SelfLabelError::Empty);
    }
    if pairs.len() != y0.len() {
        return Err(SelfLabelError::LengthMismatch {
            examples: pairs.len(),
            labels: y0.len(),
        });
    }
    let features = featurize_pairs(pairs, config.dim)?;
    let mut model = LogRegModel::new(config.dim, seed)?;
    let mut labels = y0.to_vec();

    let with_labels = |labels: &[bool]| -> Vec<scorer::Example> {
        features
            .iter()
            .zip(labels)
            .map(|((x, _, w), y)| (x.clone(), *y, *w))
            .collect()
    };

    scorer::sgd_stage(
        &mut model,
        &with_labels(&labels),
        config.e1,
        config.learning_rate,
        0,
    );

    let mut flips = Vec::new();
    let mut first_predictions = Vec::new();
    for round in 0..config.rounds.max(1) {
        let predictions: Vec<f64> = features
            .iter()
            .map(|(x, _, _)| model.predict_features(x))
            .collect();
        for (i, p) in predictions.iter().enumerate() {
            let predicted_positive = *p >= config.decision_threshold;
            if labels[i] && !predicted_positive {
                labels[i] = false;
                flips.push(FlipRecord {
                    index: i,
                    old: true,
                    new: false,
                });
            }
        }
        if round == 0 {
            first_predictions = predictions;
        }
        scorer::sgd_stage(
            &mut model,
            &with_labels(&labels),
            config.e2,
            config.learning_rate,
            round as u64 + 1,
        );
    }

    Ok(SelfLabelOutcome {
        model,
        labels,
        flips,
        predictions: first_predictions,
    })
}

/// Write flip records as JSON lines.
pub fn write_flips(path: &Path, flips: &[FlipRecord]) -> Result<(), SelfLabelError> {
    let mut out = String::new();
    for f in flips {
        out.push_str(&serde_json::to_string(f).expect("flip serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| SelfLabelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Provenance;
    use crate::scorer::{train, TrainSchedule, TrainStage};

    fn pair(a: &str, b: &str, label: bool) -> LabeledPair {
        LabeledPair::new("q", a, b, label, Provenance::ChunkDerived)
    }

    fn config(e1: usize, e2: usize) -> SelfLabelConfig {
        SelfLabelConfig {
            e1,
            e2,
            learning_rate: 0.5,
            dim: 1 << 12,
            ..SelfLabelConfig::default()
        }
    }

    #[test]
    fn all_negative_input_is_untouched() {
        let pairs = vec![
            pair("alpha beta", "gamma", false),
            pair("delta", "epsilon", false),
        ];
        let y0 = vec![false, false];
        let out = run_self_label(&pairs, &y0, &config(2, 2), 1).unwrap();
        assert_eq!(out.labels, y0);
        assert!(out.flips.is_empty());
    }

    #[test]
    fn flips_are_one_directional() {
        // positives that look exactly like the negatives get flipped;
        // negatives never flip regardless of predictions
        let pairs = vec![
            pair("match match match", "match match match", true),
            pair("noise words here", "entirely different", true),
            pair("noise words here", "entirely different", false),
            pair("match match match", "match match match", false),
        ];
        let y0: Vec<bool> = pairs.iter().map(|p| p.label).collect();
        let out = run_self_label(&pairs, &y0, &config(3, 1), 5).unwrap();
        for f in &out.flips {
            assert!(f.old && !f.new);
            assert!(y0[f.index]);
        }
        for (i, was) in y0.iter().enumerate() {
            if !was {
                assert!(!out.labels[i], "negative {i} must stay negative");
            }
        }
    }

    #[test]
    fn flip_report_matches_threshold_rule_exactly() {
        let pairs = vec![
            pair("a b c", "a b c", true),
            pair("x y", "p q", true),
            pair("a b", "a b", false),
        ];
        let y0 = vec![true, true, false];
        let cfg = config(2, 0);
        let out = run_self_label(&pairs, &y0, &cfg, 11).unwrap();
        let expected: Vec<usize> = out
            .predictions
            .iter()
            .enumerate()
            .filter(|(i, p)| y0[*i] && **p < cfg.decision_threshold)
            .map(|(i, _)| i)
            .collect();
        let got: Vec<usize> = out.flips.iter().map(|f| f.index).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn untrained_relabel_is_a_no_op() {
        // e1 = 0: the untouched model predicts exactly 0.5 >= threshold,
        // so every positive survives
        let pairs = vec![pair("a", "b", true), pair("c", "d", true)];
        let y0 = vec![true, true];
        let out = run_self_label(&pairs, &y0, &config(0, 2), 3).unwrap();
        assert!(out.flips.is_empty());
        assert_eq!(out.labels, y0);
    }

    #[test]
    fn e2_zero_is_bit_identical_to_plain_training() {
        let pairs = vec![
            pair("the claim was granted", "the claim was granted", true),
            pair("the claim was granted", "unrelated chatter", false),
            pair("costs were awarded", "costs were awarded", true),
            pair("costs were awarded", "noise tokens", false),
        ];
        let y0: Vec<bool> = pairs.iter().map(|p| p.label).collect();
        let seed = 21;
        let out = run_self_label(&pairs, &y0, &config(3, 0), seed).unwrap();
        let plain = train(
            &TrainSchedule {
                stages: vec![TrainStage {
                    pairs: pairs.clone(),
                    epochs: 3,
                    learning_rate: 0.5,
                }],
            },
            1 << 12,
            seed,
        )
        .unwrap();
        assert_eq!(out.model.bias().to_bits(), plain.bias().to_bits());
        for (a, b) in out.model.weights().iter().zip(plain.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn extra_rounds_stay_monotone() {
        let pairs = vec![
            pair("shared words here", "shared words here", true),
            pair("shared words here", "totally different text", true),
            pair("shared words here", "totally different text", false),
            pair("other overlap case", "other overlap case", true),
        ];
        let y0: Vec<bool> = pairs.iter().map(|p| p.label).collect();
        let cfg = SelfLabelConfig {
            rounds: 3,
            ..config(2, 1)
        };
        let out = run_self_label(&pairs, &y0, &cfg, 13).unwrap();
        // flips never repeat an index and never touch negatives
        let mut seen = std::collections::BTreeSet::new();
        for f in &out.flips {
            assert!(seen.insert(f.index), "index {} flipped twice", f.index);
            assert!(y0[f.index]);
        }
        assert!(!out.labels[2]);
    }

    #[test]
    fn empty_and_mismatched_inputs_rejected() {
        assert!(matches!(
            run_self_label(&[], &[], &config(1, 1), 0),
            Err(SelfLabelError::Empty)
        ));
        let pairs = vec![pair("a", "b", true)];
        assert!(matches!(
            run_self_label(&pairs, &[true, false], &config(1, 1), 0),
            Err(SelfLabelError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn flips_file_round_trip_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flips.jsonl");
        write_flips(
            &path,
            &[FlipRecord {
                index: 4,
                old: true,
                new: false,
            }],
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "{\"index\":4,\"old\":true,\"new\":false}\n");
    }
}
