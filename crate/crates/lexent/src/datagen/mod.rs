//! Training-pair construction: gold retrieval pairs with tf-idf-capped
//! negatives, tf-idf article augmentation, rule-based negation, and silver
//! supporting pairs mined from case law.

mod negation;
mod silver;

pub use negation::{builtin_negation_rules, load_negation_rules, negate, rules_for, NegationRule};
pub use silver::{build_silver_supporting, SilverOptions};

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexical::{tfidf_cosine, tokenize};
use std::collections::BTreeMap;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("question `{0}` has no positive annotation")]
    MissingAnnotation(String),
    #[error("question `{query_id}` references unknown article `{article_id}`")]
    UnknownArticle { query_id: String, article_id: String },
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
    #[error("negation rule file: {0}")]
    BadRuleFile(String),
}

/// Where a training pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Gold,
    Silver,
    Augmented,
    ChunkDerived,
}

fn default_weight() -> f64 {
    1.0
}

fn is_default_weight(w: &f64) -> bool {
    *w == 1.0
}

/// A (text_a, text_b, label) training or evaluation unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub query_id: String,
    pub text_a: String,
    pub text_b: String,
    pub label: bool,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub article_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_index: Option<usize>,
    #[serde(default = "default_weight", skip_serializing_if = "is_default_weight")]
    pub weight: f64,
}

impl LabeledPair {
    pub fn new(
        query_id: impl Into<String>,
        text_a: impl Into<String>,
        text_b: impl Into<String>,
        label: bool,
        provenance: Provenance,
    ) -> Self {
        Self {
            query_id: query_id.into(),
            text_a: text_a.into(),
            text_b: text_b.into(),
            label,
            provenance,
            article_id: None,
            chunk_index: None,
            weight: 1.0,
        }
    }
}

/// Write pairs as JSON lines.
pub fn write_pairs(path: &Path, pairs: &[LabeledPair]) -> Result<(), DatagenError> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p).expect("pair serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| DatagenError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read a JSON-lines pair file.
pub fn read_pairs(path: &Path) -> Result<Vec<LabeledPair>, DatagenError> {
    let text = fs::read_to_string(path).map_err(|source| DatagenError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: LabeledPair = serde_json::from_str(line).map_err(|e| DatagenError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        if pair.weight.is_nan() || pair.weight <= 0.0 {
            return Err(DatagenError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("weight {} is not positive", pair.weight),
            });
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

/// Gold annotation: which articles answer a question. The optional `label`
/// carries the yes/no answer for entailment-style tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub query_id: String,
    pub positive_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<bool>,
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>, DatagenError> {
    let text = fs::read_to_string(path).map_err(|source| DatagenError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut anns = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ann: Annotation = serde_json::from_str(line).map_err(|e| DatagenError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        anns.push(ann);
    }
    Ok(anns)
}

pub fn write_annotations(path: &Path, anns: &[Annotation]) -> Result<(), DatagenError> {
    let mut out = String::new();
    for a in anns {
        out.push_str(&serde_json::to_string(a).expect("annotation serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| DatagenError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// An article in a retrieval pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Article {
    pub id: String,
    pub text: String,
}

/// A question together with its gold positive article ids.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedQuestion {
    pub id: String,
    pub text: String,
    pub positive_ids: Vec<String>,
}

/// Build (question, article) training pairs: all annotated positives plus
/// at most `cap` negatives per question, the negatives being the highest
/// tf-idf-cosine articles that are not annotated positive. Positives are
/// never dropped regardless of their similarity rank.
pub fn build_retrieval_pairs(
    questions: &[AnnotatedQuestion],
    articles: &[Article],
    idf: &BTreeMap<String, f64>,
    cap: usize,
) -> Result<Vec<LabeledPair>, DatagenError> {
    let article_tokens: BTreeMap<&str, Vec<String>> = articles
        .iter()
        .map(|a| (a.id.as_str(), tokenize(&a.text)))
        .collect();
    let article_text: BTreeMap<&str, &str> = articles
        .iter()
        .map(|a| (a.id.as_str(), a.text.as_str()))
        .collect();

    let mut pairs = Vec::new();
    for q in questions {
        if q.positive_ids.is_empty() {
            return Err(DatagenError::MissingAnnotation(q.id.clone()));
        }
        let positives: BTreeSet<&str> = q.positive_ids.iter().map(String::as_str).collect();
        for pid in &q.positive_ids {
            let text = article_text
                .get(pid.as_str())
                .ok_or_else(|| DatagenError::UnknownArticle {
                    query_id: q.id.clone(),
                    article_id: pid.clone(),
                })?;
            let mut pair = LabeledPair::new(&q.id, &q.text, *text, true, Provenance::Gold);
            pair.article_id = Some(pid.clone());
            pairs.push(pair);
        }
        let q_tokens = tokenize(&q.text);
        let mut scored: Vec<(&str, f64)> = articles
            .iter()
            .filter(|a| !positives.contains(a.id.as_str()))
            .map(|a| {
                let sim = tfidf_cosine(&q_tokens, &article_tokens[a.id.as_str()], idf);
                (a.id.as_str(), sim)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        for (aid, _) in scored.into_iter().take(cap) {
            let mut pair =
                LabeledPair::new(&q.id, &q.text, article_text[aid], false, Provenance::Gold);
            pair.article_id = Some(aid.to_string());
            pairs.push(pair);
        }
    }
    Ok(pairs)
}

/// Append to `gold` the `n` pool articles most similar to the question by
/// tf-idf cosine, skipping anything already present. Gold order is
/// preserved and no article is ever duplicated.
pub fn augment_relevant(
    question: &str,
    gold: &[Article],
    pool: &[Article],
    n: usize,
    idf: &BTreeMap<String, f64>,
) -> Vec<Article> {
    let mut out: Vec<Article> = Vec::with_capacity(gold.len() + n);
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for g in gold {
        if seen.insert(g.id.as_str()) {
            out.push(g.clone());
        }
    }
    if n == 0 {
        return out;
    }
    let q_tokens = tokenize(question);
    let mut scored: Vec<(&Article, f64)> = pool
        .iter()
        .filter(|a| !seen.contains(a.id.as_str()))
        .map(|a| {
            let sim = tfidf_cosine(&q_tokens, &tokenize(&a.text), idf);
            (a, sim)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.id.cmp(&b.0.id)));
    for (a, _) in scored {
        if out.len() - gold.len() >= n {
            break;
        }
        if seen.insert(a.id.as_str()) {
            out.push(a.clone());
        }
    }
    out
}
