//! Lexical-semantic score fusion, case-level aggregation, ranking,
//! decision rules and ensembling.
//!
//! Per (query, candidate) pair the pipeline builds an N x M lexical matrix
//! (BM25 over candidate paragraphs, one row per query paragraph) and a
//! semantic matrix of the same shape from the scorer backend. The fused
//! matrix is the convex combination `w_sem * sem + (1 - w_sem) * lex'`,
//! where `lex'` is the min-max normalized lexical matrix; a candidate's
//! score is an aggregate of its fused matrix.

mod ensemble;

pub use ensemble::{combine_model_scores, learn_ensemble, EnsembleWeights, ModelScores};

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::Document;
use crate::harness::metrics::MetricsError;
use crate::lexical::{self, Bm25Params, LexicalError};
use crate::matrix::Matrix;
use crate::scorer::{ScorerBackend, ScorerError};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("matrix dimensions differ: lexical {lex_rows}x{lex_cols}, semantic {sem_rows}x{sem_cols}")]
    DimensionMismatch {
        lex_rows: usize,
        lex_cols: usize,
        sem_rows: usize,
        sem_cols: usize,
    },
    #[error("semantic entries must lie in [0, 1]")]
    SemanticOutOfRange,
    #[error("lexical entries must be non-negative")]
    NegativeLexical,
    #[error("semantic weight {0} outside [0, 1]")]
    BadWeight(f64),
    #[error("cannot aggregate an empty matrix")]
    EmptyMatrix,
    #[error("cannot decide over an empty ranking")]
    EmptyRanking,
    #[error("document `{0}` has no paragraphs")]
    NoParagraphs(String),
    #[error("ensemble needs at least one model")]
    NoModels,
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Lexical(#[from] LexicalError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
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

/// The lexical and semantic matrices for one (query, candidate) pair.
#[derive(Debug, Clone)]
pub struct ScoreMatrixPair {
    pub query_id: String,
    pub cand_id: String,
    pub lex: Matrix,
    pub sem: Matrix,
    pub fused: Option<Matrix>,
}

impl ScoreMatrixPair {
    pub fn new(
        query_id: impl Into<String>,
        cand_id: impl Into<String>,
        lex: Matrix,
        sem: Matrix,
    ) -> Result<Self, FusionError> {
        if lex.rows() != sem.rows() || lex.cols() != sem.cols() {
            return Err(FusionError::DimensionMismatch {
                lex_rows: lex.rows(),
                lex_cols: lex.cols(),
                sem_rows: sem.rows(),
                sem_cols: sem.cols(),
            });
        }
        if sem.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(FusionError::SemanticOutOfRange);
        }
        if lex.data().iter().any(|&v| v < 0.0) {
            return Err(FusionError::NegativeLexical);
        }
        Ok(Self {
            query_id: query_id.into(),
            cand_id: cand_id.into(),
            lex,
            sem,
            fused: None,
        })
    }
}

/// How a fused matrix collapses to one candidate score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Global maximum entry.
    Max,
    /// Mean over rows of each row's maximum: every query paragraph gets a
    /// vote for its best-matching candidate paragraph.
    #[default]
    MeanRowMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Weight of the semantic score in the convex combination.
    pub w_sem: f64,
    pub aggregation: Aggregation,
    /// Min-max normalize the lexical matrix into [0, 1] before mixing;
    /// BM25 scores are unbounded while semantic scores are probabilities.
    pub normalize_lex: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            w_sem: 0.3,
            aggregation: Aggregation::MeanRowMax,
            normalize_lex: true,
        }
    }
}

/// Min-max normalize a matrix to [0, 1]; a constant matrix maps to zeros.
pub fn min_max_normalize(m: &Matrix) -> Matrix {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in m.data() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let range = hi - lo;
    if m.data().is_empty() || range == 0.0 {
        return Matrix::zeros(m.rows(), m.cols());
    }
    m.map(|v| (v - lo) / range)
}

/// The union score: `w_sem * sem + (1 - w_sem) * lex'` entrywise.
pub fn union(pair: &ScoreMatrixPair, config: &FusionConfig) -> Result<Matrix, FusionError> {
    if pair.lex.rows() != pair.sem.rows() || pair.lex.cols() != pair.sem.cols() {
        return Err(FusionError::DimensionMismatch {
            lex_rows: pair.lex.rows(),
            lex_cols: pair.lex.cols(),
            sem_rows: pair.sem.rows(),
            sem_cols: pair.sem.cols(),
        });
    }
    if !(0.0..=1.0).contains(&config.w_sem) {
        return Err(FusionError::BadWeight(config.w_sem));
    }
    let lex = if config.normalize_lex {
        min_max_normalize(&pair.lex)
    } else {
        pair.lex.clone()
    };
    let alpha = config.w_sem;
    let mut fused = Matrix::zeros(lex.rows(), lex.cols());
    for i in 0..lex.rows() {
        for j in 0..lex.cols() {
            fused.set(i, j, alpha * pair.sem.get(i, j) + (1.0 - alpha) * lex.get(i, j));
        }
    }
    Ok(fused)
}

/// Collapse a matrix to a single score.
pub fn aggregate(m: &Matrix, method: Aggregation) -> Result<f64, FusionError> {
    if m.is_empty() {
        return Err(FusionError::EmptyMatrix);
    }
    Ok(match method {
        Aggregation::Max => m.data().iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregation::MeanRowMax => {
            let sum: f64 = (0..m.rows())
                .map(|i| m.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .sum();
            sum / m.rows() as f64
        }
    })
}

/// BM25 lexical matrix: row i scores query paragraph i against every
/// candidate paragraph (the candidate's paragraphs form the indexed
/// corpus).
pub fn lex_score_matrix(
    query: &Document,
    candidate: &Document,
    params: Bm25Params,
) -> Result<Matrix, FusionError> {
    if query.paragraphs.is_empty() {
        return Err(FusionError::NoParagraphs(query.id.clone()));
    }
    if candidate.paragraphs.is_empty() {
        return Err(FusionError::NoParagraphs(candidate.id.clone()));
    }
    let docs: Vec<(String, Vec<String>)> = candidate
        .paragraphs
        .iter()
        .map(|p| (format!("{:06}", p.index), lexical::tokenize(&p.text)))
        .collect();
    let index = lexical::build_bm25(&docs, params)?;
    let mut rows = Vec::with_capacity(query.paragraphs.len());
    for qp in &query.paragraphs {
        let scores = index.scores(&lexical::tokenize(&qp.text));
        // BTreeMap over zero-padded ids walks paragraphs in order
        rows.push(scores.into_values().collect::<Vec<f64>>());
    }
    Ok(Matrix::from_rows(&rows))
}

/// Build both matrices for one (query, candidate) pair.
pub fn build_matrices(
    query: &Document,
    candidate: &Document,
    backend: &ScorerBackend,
    params: Bm25Params,
) -> Result<ScoreMatrixPair, FusionError> {
    let lex = lex_score_matrix(query, candidate, params)?;
    let sem = backend.score_matrix(&query.paragraph_texts(), &candidate.paragraph_texts())?;
    ScoreMatrixPair::new(&query.id, &candidate.id, lex, sem)
}

/// Rank candidates for a query by the aggregated fused score, descending,
/// ties broken by ascending candidate id.
pub fn rank(
    query: &Document,
    candidates: &[Document],
    config: &FusionConfig,
    backend: &ScorerBackend,
    params: Bm25Params,
) -> Result<Vec<(String, f64)>, FusionError> {
    let mut ranked = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let pair = build_matrices(query, cand, backend, params)?;
        let fused = union(&pair, config)?;
        let score = aggregate(&fused, config.aggregation)?;
        ranked.push((cand.id.clone(), score));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

/// How a ranked list becomes a result set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecideStrategy {
    Top1,
    TopK(usize),
    /// Keep every candidate scoring at least `beta` times the top score.
    RelativeThreshold(f64),
}

/// Select result ids from a ranked list. The returned set always contains
/// the top-ranked candidate.
pub fn decide(
    ranked: &[(String, f64)],
    strategy: DecideStrategy,
) -> Result<Vec<String>, FusionError> {
    if ranked.is_empty() {
        return Err(FusionError::EmptyRanking);
    }
    Ok(match strategy {
        DecideStrategy::Top1 => vec![ranked[0].0.clone()],
        DecideStrategy::TopK(k) => ranked
            .iter()
            .take(k.max(1))
            .map(|(id, _)| id.clone())
            .collect(),
        DecideStrategy::RelativeThreshold(beta) => {
            let cutoff = beta * ranked[0].1;
            ranked
                .iter()
                .enumerate()
                .filter(|(i, (_, s))| *i == 0 || *s >= cutoff)
                .map(|(_, (id, _))| id.clone())
                .collect()
        }
    })
}

/// Persist a matrix as `MAT <N> <M>` followed by N rows of M
/// space-separated values.
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<(), FusionError> {
    let mut out = String::new();
    let _ = writeln!(out, "MAT {} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    fs::write(path, out).map_err(|source| FusionError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_matrix(path: &Path) -> Result<Matrix, FusionError> {
    let text = fs::read_to_string(path).map_err(|source| FusionError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let err = |line: usize, msg: String| FusionError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty matrix file".into()))?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 3 || fields[0] != "MAT" {
        return Err(err(1, "bad header, expected `MAT <rows> <cols>`".into()));
    }
    let rows: usize = fields[1].parse().map_err(|_| err(1, "bad row count".into()))?;
    let cols: usize = fields[2].parse().map_err(|_| err(1, "bad col count".into()))?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0usize;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let values: Result<Vec<f64>, _> = line.split(' ').map(str::parse).collect();
        let values = values.map_err(|_| err(i + 1, "bad matrix entry".into()))?;
        if values.len() != cols {
            return Err(err(
                i + 1,
                format!("expected {cols} entries, got {}", values.len()),
            ));
        }
        data.extend(values);
        seen += 1;
    }
    if seen != rows {
        return Err(err(1, format!("expected {rows} rows, got {seen}")));
    }
    Ok(Matrix::from_vec(rows, cols, data))
}
