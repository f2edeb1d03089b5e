//! Logistic regression over hashed pair features, trained with plain SGD.
//!
//! Training is sequential and seeded: example order is reshuffled each
//! epoch from a stream derived from (seed, stage, epoch), and the step
//! size decays as `1/sqrt(epoch)` within each stage. Identical schedules
//! and seeds produce bit-identical weights.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::features::{check_dim, featurize, SparseVec};
use super::ScorerError;
use crate::datagen::LabeledPair;
use crate::rng::SplitMix64;

pub const DEFAULT_DIM: usize = 1 << 20;
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;

/// Binary classifier over a hashed feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    dim: usize,
    weights: Vec<f64>,
    bias: f64,
    seed: u64,
}

impl LogRegModel {
    /// Zero-initialized model; predicts 0.5 everywhere until trained.
    pub fn new(dim: usize, seed: u64) -> Result<Self, ScorerError> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            weights: vec![0.0; dim],
            bias: 0.0,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn raw_score(&self, x: &SparseVec) -> f64 {
        let mut z = self.bias;
        for (i, v) in x {
            z += self.weights[*i as usize] * v;
        }
        z
    }

    /// Probability in (0, 1).
    pub fn predict_features(&self, x: &SparseVec) -> f64 {
        sigmoid(self.raw_score(x))
    }

    pub fn predict_pair(&self, text_a: &str, text_b: &str) -> Result<f64, ScorerError> {
        Ok(self.predict_features(&featurize(text_a, text_b, self.dim)?))
    }

    /// Persist as a sparse text file; only nonzero weights are written.
    pub fn save(&self, path: &Path) -> Result<(), ScorerError> {
        let mut out = String::new();
        let _ = writeln!(out, "LOGREGv1 {} {} {}", self.dim, self.seed, self.bias);
        for (i, w) in self.weights.iter().enumerate() {
            if *w != 0.0 {
                let _ = writeln!(out, "{i}\t{w}");
            }
        }
        fs::write(path, out).map_err(|e| ScorerError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ScorerError> {
        let text = fs::read_to_string(path).map_err(|e| ScorerError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let err = |line: usize, msg: &str| ScorerError::ModelParse {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty model file"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 4 || fields[0] != "LOGREGv1" {
            return Err(err(1, "bad header, expected `LOGREGv1 <dim> <seed> <bias>`"));
        }
        let dim: usize = fields[1].parse().map_err(|_| err(1, "bad dim"))?;
        let seed: u64 = fields[2].parse().map_err(|_| err(1, "bad seed"))?;
        let bias: f64 = fields[3].parse().map_err(|_| err(1, "bad bias"))?;
        let mut model = Self::new(dim, seed)?;
        model.bias = bias;
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (idx, w) = line
                .split_once('\t')
                .ok_or_else(|| err(i + 1, "expected `<index>\\t<weight>`"))?;
            let idx: usize = idx.parse().map_err(|_| err(i + 1, "bad index"))?;
            if idx >= dim {
                return Err(err(i + 1, "weight index out of range"));
            }
            let w: f64 = w.parse().map_err(|_| err(i + 1, "bad weight"))?;
            model.weights[idx] = w;
        }
        Ok(model)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable logistic loss `-[y ln p + (1-y) ln (1-p)]`.
pub fn logistic_loss(model: &LogRegModel, x: &SparseVec, y: bool) -> f64 {
    let z = model.raw_score(x);
    let y = if y { 1.0 } else { 0.0 };
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Analytic gradient of the logistic loss for one example: the sparse
/// weight part mirrors the input's sparsity pattern; the second value is
/// the bias derivative.
pub fn loss_gradient(model: &LogRegModel, x: &SparseVec, y: bool) -> (SparseVec, f64) {
    let p = model.predict_features(x);
    let g = p - if y { 1.0 } else { 0.0 };
    (x.iter().map(|(i, v)| (*i, g * v)).collect(), g)
}

/// A training example: features, label, importance weight.
pub type Example = (SparseVec, bool, f64);

pub fn featurize_pairs(pairs: &[LabeledPair], dim: usize) -> Result<Vec<Example>, ScorerError> {
    pairs
        .iter()
        .map(|p| Ok((featurize(&p.text_a, &p.text_b, dim)?, p.label, p.weight)))
        .collect()
}

/// Mean logistic loss over a set of examples.
pub fn mean_loss(model: &LogRegModel, examples: &[Example]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    examples
        .iter()
        .map(|(x, y, w)| w * logistic_loss(model, x, *y))
        .sum::<f64>()
        / examples.len() as f64
}

/// Run `epochs` passes of SGD over `examples`, continuing from the model's
/// current weights. `stage` tags the shuffle stream so that schedules that
/// restart or continue training stay reproducible.
pub(crate) fn sgd_stage(
    model: &mut LogRegModel,
    examples: &[Example],
    epochs: usize,
    learning_rate: f64,
    stage: u64,
) {
    for epoch in 1..=epochs {
        sgd_epoch(model, examples, epoch, learning_rate, stage);
    }
}

/// One stage of a training schedule.
#[derive(Debug, Clone)]
pub struct TrainStage {
    pub pairs: Vec<LabeledPair>,
    pub epochs: usize,
    pub learning_rate: f64,
}

/// Ordered stages applied to the same model, e.g. silver pairs first and
/// gold pairs second.
#[derive(Debug, Clone, Default)]
pub struct TrainSchedule {
    pub stages: Vec<TrainStage>,
}

/// Train a fresh model through the schedule. Deterministic given
/// `(schedule, dim, seed)`.
pub fn train(schedule: &TrainSchedule, dim: usize, seed: u64) -> Result<LogRegModel, ScorerError> {
    Ok(train_traced(schedule, dim, seed)?.0)
}

/// Like [`train`] but also returns the mean full-dataset loss measured
/// after every epoch, concatenated across stages.
pub fn train_traced(
    schedule: &TrainSchedule,
    dim: usize,
    seed: u64,
) -> Result<(LogRegModel, Vec<f64>), ScorerError> {
    if schedule.stages.is_empty() {
        return Err(ScorerError::EmptySchedule);
    }
    let mut model = LogRegModel::new(dim, seed)?;
    let mut trace = Vec::new();
    for (stage_idx, stage) in schedule.stages.iter().enumerate() {
        if stage.epochs == 0 {
            continue;
        }
        if stage.pairs.is_empty() {
            return Err(ScorerError::EmptyDataset { stage: stage_idx });
        }
        let examples = featurize_pairs(&stage.pairs, dim)?;
        for epoch in 1..=stage.epochs {
            sgd_epoch(&mut model, &examples, epoch, stage.learning_rate, stage_idx as u64);
            trace.push(mean_loss(&model, &examples));
        }
    }
    Ok((model, trace))
}

fn sgd_epoch(
    model: &mut LogRegModel,
    examples: &[Example],
    epoch: usize,
    learning_rate: f64,
    stage: u64,
) {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = SplitMix64::substream(model.seed, (stage << 32) | epoch as u64);
    rng.shuffle(&mut order);
    let lr = learning_rate / (epoch as f64).sqrt();
    for &k in &order {
        let (x, y, w) = &examples[k];
        let p = sigmoid(model.raw_score(x));
        let g = (p - if *y { 1.0 } else { 0.0 }) * w;
        for (i, v) in x {
            model.weights[*i as usize] -= lr * g * v;
        }
        model.bias -= lr * g;
    }
}
