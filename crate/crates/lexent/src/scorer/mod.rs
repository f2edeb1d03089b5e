//! Pluggable pairwise semantic scorer.
//!
//! The built-in backend is a hashed-feature logistic regression trained by
//! seeded SGD; the external backend delegates to another process or a TCP
//! endpoint over a JSON-lines wire protocol. Both produce probabilities,
//! one per text pair.

mod external;
mod features;
mod logreg;

pub use external::{predict_external, ExternalEndpoint};
pub use features::{feature_keys, featurize, SparseVec};
pub use logreg::{
    featurize_pairs, logistic_loss, loss_gradient, mean_loss, sigmoid, train, train_traced,
    Example, LogRegModel, TrainSchedule, TrainStage, DEFAULT_DIM, DEFAULT_LEARNING_RATE,
};

pub(crate) use logreg::sgd_stage;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("feature dimension {0} is not a power of two in range")]
    BadDim(usize),
    #[error("training schedule has no stages")]
    EmptySchedule,
    #[error("training stage {stage} has a positive epoch count but no data")]
    EmptyDataset { stage: usize },
    #[error("scorer endpoint: {0}")]
    Endpoint(String),
    #[error("malformed scorer response: {0}")]
    MalformedResponse(String),
    #[error("scorer answered unrequested id `{0}`")]
    UnrequestedId(String),
    #[error("scorer stream ended with {missing} responses outstanding")]
    MissingResponses { missing: usize },
    #[error("scorer returned score {score} for id `{id}`, outside [0, 1]")]
    ScoreOutOfRange { id: String, score: f64 },
    #[error("score matrix needs at least one row and one column")]
    EmptyMatrix,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    ModelParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

/// The scorer the pipeline calls: the built-in classifier or a bridge to
/// an external process.
#[derive(Debug)]
pub enum ScorerBackend {
    Builtin(LogRegModel),
    External(ExternalEndpoint),
}

impl ScorerBackend {
    /// Score each pair, order-preserving. The built-in backend yields
    /// values strictly inside (0, 1); an external scorer reports [0, 1].
    pub fn predict(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, ScorerError> {
        match self {
            Self::Builtin(model) => pairs
                .iter()
                .map(|(a, b)| model.predict_pair(a, b))
                .collect(),
            Self::External(endpoint) => predict_external(endpoint, pairs),
        }
    }

    /// N x M matrix of pair scores, entry (i, j) scoring
    /// `(query_paragraphs[i], cand_paragraphs[j])`.
    pub fn score_matrix(
        &self,
        query_paragraphs: &[String],
        cand_paragraphs: &[String],
    ) -> Result<Matrix, ScorerError> {
        let (n, m) = (query_paragraphs.len(), cand_paragraphs.len());
        if n == 0 || m == 0 {
            return Err(ScorerError::EmptyMatrix);
        }
        let mut pairs = Vec::with_capacity(n * m);
        for q in query_paragraphs {
            for c in cand_paragraphs {
                pairs.push((q.clone(), c.clone()));
            }
        }
        let scores = self.predict(&pairs)?;
        Ok(Matrix::from_vec(n, m, scores))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{LabeledPair, Provenance};

    #[test]
    fn zero_model_scores_half_everywhere() {
        let backend = ScorerBackend::Builtin(LogRegModel::new(1 << 10, 0).unwrap());
        let pairs = vec![
            ("a".to_string(), "b".to_string()),
            ("c d".to_string(), "e".to_string()),
        ];
        assert_eq!(backend.predict(&pairs).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn predictions_stay_in_open_unit_interval() {
        let pairs: Vec<(String, String)> = (0..20)
            .map(|i| (format!("tok{i} shared"), format!("shared other{i}")))
            .collect();
        let schedule = TrainSchedule {
            stages: vec![TrainStage {
                pairs: pairs
                    .iter()
                    .enumerate()
                    .map(|(i, (a, b))| {
                        LabeledPair::new("q", a, b, i % 2 == 0, Provenance::Silver)
                    })
                    .collect(),
                epochs: 3,
                learning_rate: 0.5,
            }],
        };
        let model = train(&schedule, 1 << 10, 3).unwrap();
        let backend = ScorerBackend::Builtin(model);
        for s in backend.predict(&pairs).unwrap() {
            assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn matrix_shape_and_elementwise_agreement() {
        let model = LogRegModel::new(1 << 10, 1).unwrap();
        let backend = ScorerBackend::Builtin(model);
        let q = vec!["one".to_string(), "two".to_string()];
        let c = vec!["x".to_string(), "y".to_string(), "z".to_string()];
        let m = backend.score_matrix(&q, &c).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        for (i, qp) in q.iter().enumerate() {
            for (j, cp) in c.iter().enumerate() {
                let single = backend.predict(&[(qp.clone(), cp.clone())]).unwrap()[0];
                assert_eq!(m.get(i, j), single);
            }
        }
    }

    #[test]
    fn empty_matrix_inputs_rejected() {
        let backend = ScorerBackend::Builtin(LogRegModel::new(1 << 10, 0).unwrap());
        assert!(matches!(
            backend.score_matrix(&[], &["x".to_string()]),
            Err(ScorerError::EmptyMatrix)
        ));
    }
}
