//! Tab-separated ranked run files.
//!
//! One record per line: `query_id  doc_id  rank  score  run_tag`. Ranks
//! start at 1 and are consecutive within each query; scores are
//! non-increasing within a query. Reading is the exact inverse of writing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::metrics::IdSets;

#[derive(Debug, Error)]
pub enum RunFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("run file invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub query_id: String,
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
    pub run_tag: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    records: Vec<RunRecord>,
}

impl RunFile {
    /// Validate the rank/score invariants and wrap the records.
    pub fn new(records: Vec<RunRecord>) -> Result<Self, RunFileError> {
        let mut last: BTreeMap<&str, (u32, f64)> = BTreeMap::new();
        for rec in &records {
            for (field, name) in [
                (&rec.query_id, "query_id"),
                (&rec.doc_id, "doc_id"),
                (&rec.run_tag, "run_tag"),
            ] {
                if field.is_empty() || field.contains('\t') || field.contains('\n') {
                    return Err(RunFileError::Invariant(format!(
                        "{name} `{field}` is empty or contains separators"
                    )));
                }
            }
            match last.get(rec.query_id.as_str()) {
                None => {
                    if rec.rank != 1 {
                        return Err(RunFileError::Invariant(format!(
                            "query `{}` starts at rank {}, expected 1",
                            rec.query_id, rec.rank
                        )));
                    }
                }
                Some((prev_rank, prev_score)) => {
                    if rec.rank != prev_rank + 1 {
                        return Err(RunFileError::Invariant(format!(
                            "query `{}` jumps from rank {prev_rank} to {}",
                            rec.query_id, rec.rank
                        )));
                    }
                    if rec.score > *prev_score {
                        return Err(RunFileError::Invariant(format!(
                            "query `{}` has increasing scores at rank {}",
                            rec.query_id, rec.rank
                        )));
                    }
                }
            }
            last.insert(&rec.query_id, (rec.rank, rec.score));
        }
        Ok(Self { records })
    }

    /// Build a run from per-query ranked `(doc_id, score)` lists.
    pub fn from_ranked(
        ranked: &BTreeMap<String, Vec<(String, f64)>>,
        run_tag: &str,
    ) -> Result<Self, RunFileError> {
        let mut records = Vec::new();
        for (query_id, docs) in ranked {
            for (i, (doc_id, score)) in docs.iter().enumerate() {
                records.push(RunRecord {
                    query_id: query_id.clone(),
                    doc_id: doc_id.clone(),
                    rank: i as u32 + 1,
                    score: *score,
                    run_tag: run_tag.to_string(),
                });
            }
        }
        Self::new(records)
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    /// Predicted id set per query.
    pub fn predictions(&self) -> IdSets {
        let mut out = IdSets::new();
        for rec in &self.records {
            out.entry(rec.query_id.clone())
                .or_default()
                .insert(rec.doc_id.clone());
        }
        out
    }

    /// Ranked `(doc_id, score)` lists per query, in file order.
    pub fn scores_by_query(&self) -> BTreeMap<String, Vec<(String, f64)>> {
        let mut out: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for rec in &self.records {
            out.entry(rec.query_id.clone())
                .or_default()
                .push((rec.doc_id.clone(), rec.score));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), RunFileError> {
        let mut out = String::new();
        for rec in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                rec.query_id, rec.doc_id, rec.rank, rec.score, rec.run_tag
            );
        }
        fs::write(path, out).map_err(|source| RunFileError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, RunFileError> {
        let text = fs::read_to_string(path).map_err(|source| RunFileError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(RunFileError::Malformed {
                    line: line_no,
                    msg: format!("expected 5 columns, got {}", cols.len()),
                });
            }
            let rank: u32 = cols[2].parse().map_err(|_| RunFileError::Malformed {
                line: line_no,
                msg: format!("bad rank `{}`", cols[2]),
            })?;
            let score: f64 = cols[3].parse().map_err(|_| RunFileError::Malformed {
                line: line_no,
                msg: format!("bad score `{}`", cols[3]),
            })?;
            records.push(RunRecord {
                query_id: cols[0].to_string(),
                doc_id: cols[1].to_string(),
                rank,
                score,
                run_tag: cols[4].to_string(),
            });
        }
        Self::new(records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(q: &str, d: &str, rank: u32, score: f64) -> RunRecord {
        RunRecord {
            query_id: q.to_string(),
            doc_id: d.to_string(),
            rank,
            score,
            run_tag: "test".to_string(),
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.tsv");
        let run = RunFile::new(vec![
            rec("q1", "d2", 1, 0.9),
            rec("q1", "d1", 2, 0.7),
            rec("q2", "d3", 1, 0.5),
        ])
        .unwrap();
        run.write(&path).unwrap();
        let back = RunFile::read(&path).unwrap();
        assert_eq!(back, run);
        // writing what was read reproduces the bytes
        let path2 = dir.path().join("run2.tsv");
        back.write(&path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn four_columns_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        fs::write(&path, "q1\td1\t1\t0.5\n").unwrap();
        match RunFile::read(&path) {
            Err(RunFileError::Malformed { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected malformed, got {other:?}"),
        }
    }

    #[test]
    fn rank_gap_rejected() {
        assert!(matches!(
            RunFile::new(vec![rec("q1", "a", 1, 0.9), rec("q1", "b", 3, 0.8)]),
            Err(RunFileError::Invariant(_))
        ));
        assert!(matches!(
            RunFile::new(vec![rec("q1", "a", 2, 0.9)]),
            Err(RunFileError::Invariant(_))
        ));
    }

    #[test]
    fn increasing_scores_rejected() {
        assert!(matches!(
            RunFile::new(vec![rec("q1", "a", 1, 0.5), rec("q1", "b", 2, 0.9)]),
            Err(RunFileError::Invariant(_))
        ));
    }

    #[test]
    fn interleaved_queries_allowed() {
        let run = RunFile::new(vec![
            rec("q1", "a", 1, 0.9),
            rec("q2", "x", 1, 0.8),
            rec("q1", "b", 2, 0.7),
        ])
        .unwrap();
        let preds = run.predictions();
        assert_eq!(preds["q1"].len(), 2);
        assert_eq!(preds["q2"].len(), 1);
    }

    #[test]
    fn from_ranked_builds_consecutive_ranks() {
        let mut ranked = BTreeMap::new();
        ranked.insert(
            "q1".to_string(),
            vec![("a".to_string(), 0.9), ("b".to_string(), 0.4)],
        );
        let run = RunFile::from_ranked(&ranked, "tag").unwrap();
        assert_eq!(run.records()[0].rank, 1);
        assert_eq!(run.records()[1].rank, 2);
    }
}
