//! Cross-lingual sentence-pair pretraining samples from aligned parallel
//! documents, plus seeded train/validation splits.
//!
//! Each adjacent pair of aligned sentences yields twelve samples: four
//! reversed-order (label 2), four in-order (label 1), and four with a
//! random second sentence (label 0). The binary next-foreign-sentence
//! label is attached only to the cross-lingual samples of the in-order and
//! random groups, so labeled-sample counts stand in a fixed 3:1 ratio.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Language;
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum ParalawError {
    #[error("random pair equals the true next pair; sample would be mislabeled")]
    DistractorIsNext,
    #[error("corpus has no document with two adjacent aligned pairs")]
    NoAdjacentPairs,
    #[error("no distractor pool: need aligned pairs outside document `{0}`")]
    NoDistractors(String),
    #[error("need at least 10 samples to split 9:1, got {0}")]
    TooFewSamples(usize),
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

/// One sentence-aligned position of a parallel document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPair {
    pub pos: usize,
    pub text_a: String,
    pub text_b: String,
}

/// A sentence-aligned bilingual document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelDoc {
    pub id: String,
    pub pairs: Vec<AlignedPair>,
}

/// A pretraining sample: an ordered sentence pair with a mandatory 3-way
/// neighbor label (`0` random, `1` next, `2` previous) and, on
/// cross-lingual samples with neighbor label 0 or 1, a binary
/// next-foreign-sentence label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NspSample {
    pub first: String,
    pub first_lang: Language,
    pub second: String,
    pub second_lang: Language,
    pub nfsp: Option<u8>,
    pub nmsp: u8,
}

impl NspSample {
    fn new(
        first: (&str, Language),
        second: (&str, Language),
        nmsp: u8,
    ) -> Self {
        let cross = first.1 != second.1;
        let nfsp = match (cross, nmsp) {
            (true, 1) => Some(1),
            (true, 0) => Some(0),
            _ => None,
        };
        Self {
            first: first.0.to_string(),
            first_lang: first.1,
            second: second.0.to_string(),
            second_lang: second.1,
            nfsp,
            nmsp,
        }
    }

    /// The structural label invariant: the binary label is present iff the
    /// sample is cross-lingual with neighbor label 0 or 1, and agrees with
    /// the neighbor label when present.
    pub fn label_invariant_holds(&self) -> bool {
        let cross = self.first_lang != self.second_lang;
        match self.nfsp {
            Some(v) => cross && self.nmsp <= 1 && v == self.nmsp,
            None => !(cross && self.nmsp <= 1),
        }
    }
}

/// Generate the twelve samples for one adjacency `(p_i, p_next)` and one
/// distractor pair.
pub fn generate_samples(
    p_i: &AlignedPair,
    p_next: &AlignedPair,
    random_pair: &AlignedPair,
    lang_a: Language,
    lang_b: Language,
) -> Result<Vec<NspSample>, ParalawError> {
    if random_pair.text_a == p_next.text_a && random_pair.text_b == p_next.text_b {
        return Err(ParalawError::DistractorIsNext);
    }
    let ia = (p_i.text_a.as_str(), lang_a);
    let ib = (p_i.text_b.as_str(), lang_b);
    let na = (p_next.text_a.as_str(), lang_a);
    let nb = (p_next.text_b.as_str(), lang_b);
    let ra = (random_pair.text_a.as_str(), lang_a);
    let rb = (random_pair.text_b.as_str(), lang_b);
    Ok(vec![
        // reversed order: second sentence precedes the first
        NspSample::new(na, ia, 2),
        NspSample::new(nb, ib, 2),
        NspSample::new(nb, ia, 2),
        NspSample::new(na, ib, 2),
        // true order
        NspSample::new(ib, nb, 1),
        NspSample::new(ia, na, 1),
        NspSample::new(ia, nb, 1),
        NspSample::new(ib, na, 1),
        // random second sentence
        NspSample::new(ia, rb, 0),
        NspSample::new(ib, ra, 0),
        NspSample::new(ia, ra, 0),
        NspSample::new(ib, rb, 0),
    ])
}

/// Generate samples for every adjacency in the corpus, drawing distractors
/// uniformly from other documents, then shuffle deterministically.
pub fn build_dataset(
    corpus: &[ParallelDoc],
    lang_a: Language,
    lang_b: Language,
    seed: u64,
) -> Result<Vec<NspSample>, ParalawError> {
    // distractor pool indexed alongside owning document
    let pool: Vec<(usize, &AlignedPair)> = corpus
        .iter()
        .enumerate()
        .flat_map(|(di, d)| d.pairs.iter().map(move |p| (di, p)))
        .collect();

    let mut rng = SplitMix64::substream(seed, 1);
    let mut samples = Vec::new();
    let mut saw_adjacency = false;
    for (di, doc) in corpus.iter().enumerate() {
        for w in doc.pairs.windows(2) {
            saw_adjacency = true;
            let (p_i, p_next) = (&w[0], &w[1]);
            let eligible = pool
                .iter()
                .filter(|(pdi, p)| {
                    *pdi != di && !(p.text_a == p_next.text_a && p.text_b == p_next.text_b)
                })
                .count();
            if eligible == 0 {
                return Err(ParalawError::NoDistractors(doc.id.clone()));
            }
            let random_pair = loop {
                let k = rng.next_below(pool.len() as u64) as usize;
                let (pdi, p) = pool[k];
                if pdi != di && !(p.text_a == p_next.text_a && p.text_b == p_next.text_b) {
                    break p;
                }
            };
            samples.extend(generate_samples(p_i, p_next, random_pair, lang_a, lang_b)?);
        }
    }
    if !saw_adjacency {
        return Err(ParalawError::NoAdjacentPairs);
    }
    let mut shuffler = SplitMix64::substream(seed, 2);
    shuffler.shuffle(&mut samples);
    Ok(samples)
}

/// Deterministic shuffled 9:1 split; `|train| = round(0.9 * n)`.
pub fn split(
    samples: Vec<NspSample>,
    seed: u64,
) -> Result<(Vec<NspSample>, Vec<NspSample>), ParalawError> {
    let n = samples.len();
    if n < 10 {
        return Err(ParalawError::TooFewSamples(n));
    }
    let mut shuffled = samples;
    let mut rng = SplitMix64::substream(seed, 3);
    rng.shuffle(&mut shuffled);
    let train_n = (0.9 * n as f64).round() as usize;
    let validation = shuffled.split_off(train_n);
    Ok((shuffled, validation))
}

/// Read a tab-separated aligned corpus with columns
/// `doc_id  pos  text_a  text_b`. Positions must run consecutively from 0
/// within each document and both texts must be non-empty.
pub fn read_parallel_tsv(path: &Path) -> Result<Vec<ParallelDoc>, ParalawError> {
    let text = fs::read_to_string(path).map_err(|source| ParalawError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let err = |line: usize, msg: String| ParalawError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut docs: Vec<ParallelDoc> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(err(line_no, format!("expected 4 columns, got {}", cols.len())));
        }
        let pos: usize = cols[1]
            .parse()
            .map_err(|_| err(line_no, format!("bad position `{}`", cols[1])))?;
        if cols[2].is_empty() || cols[3].is_empty() {
            return Err(err(line_no, "empty aligned sentence".to_string()));
        }
        let pair = AlignedPair {
            pos,
            text_a: cols[2].to_string(),
            text_b: cols[3].to_string(),
        };
        match docs.last_mut() {
            Some(d) if d.id == cols[0] => {
                if pair.pos != d.pairs.len() {
                    return Err(err(
                        line_no,
                        format!("position {} not consecutive in doc `{}`", pair.pos, d.id),
                    ));
                }
                d.pairs.push(pair);
            }
            _ => {
                if pair.pos != 0 {
                    return Err(err(
                        line_no,
                        format!("doc `{}` must start at position 0", cols[0]),
                    ));
                }
                docs.push(ParallelDoc {
                    id: cols[0].to_string(),
                    pairs: vec![pair],
                });
            }
        }
    }
    Ok(docs)
}

/// Write samples as JSON lines.
pub fn write_samples(path: &Path, samples: &[NspSample]) -> Result<(), ParalawError> {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("sample serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| ParalawError::Io {
        path: path.to_path_buf(),
        source,
    })
}
