//! Tokenization, tf-idf vectors, Okapi BM25 indexing and top-k retrieval.
//!
//! The index stores postings and document lengths in ordered maps so that
//! scoring, ranking and on-disk serialization are fully deterministic.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexicalError {
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,
    #[error("id or term `{0}` contains characters not representable in the index format")]
    UnrepresentableToken(String),
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

pub(crate) fn is_cjk(c: char) -> bool {
    matches!(c,
        '\u{3040}'..='\u{30FF}'   // hiragana, katakana
        | '\u{3400}'..='\u{4DBF}' // CJK extension A
        | '\u{4E00}'..='\u{9FFF}' // CJK unified ideographs
        | '\u{F900}'..='\u{FAFF}' // CJK compatibility ideographs
        | '\u{FF66}'..='\u{FF9D}' // halfwidth katakana
    )
}

/// Lowercase tokenization: Latin-script runs split on non-alphanumerics,
/// CJK runs emitted as overlapping character bigrams (a lone CJK character
/// is emitted as itself).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut latin = String::new();
    let mut cjk: Vec<char> = Vec::new();

    let flush_latin = |latin: &mut String, tokens: &mut Vec<String>| {
        if !latin.is_empty() {
            tokens.push(std::mem::take(latin));
        }
    };
    let flush_cjk = |cjk: &mut Vec<char>, tokens: &mut Vec<String>| {
        match cjk.len() {
            0 => {}
            1 => tokens.push(cjk[0].to_string()),
            _ => {
                for w in cjk.windows(2) {
                    tokens.push(w.iter().collect());
                }
            }
        }
        cjk.clear();
    };

    for c in text.chars() {
        if is_cjk(c) {
            flush_latin(&mut latin, &mut tokens);
            cjk.push(c);
        } else if c.is_alphanumeric() {
            flush_cjk(&mut cjk, &mut tokens);
            for lc in c.to_lowercase() {
                latin.push(lc);
            }
        } else {
            flush_latin(&mut latin, &mut tokens);
            flush_cjk(&mut cjk, &mut tokens);
        }
    }
    flush_latin(&mut latin, &mut tokens);
    flush_cjk(&mut cjk, &mut tokens);
    tokens
}

/// Okapi saturation and length-normalization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

/// Inverted index with Okapi BM25 scoring.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    postings: BTreeMap<String, Vec<(String, u32)>>,
    doc_len: BTreeMap<String, usize>,
    avgdl: f64,
    n_docs: usize,
    k1: f64,
    b: f64,
}

/// Build an index over `(doc_id, tokens)` pairs.
pub fn build_bm25(
    docs: &[(String, Vec<String>)],
    params: Bm25Params,
) -> Result<Bm25Index, LexicalError> {
    if docs.is_empty() {
        return Err(LexicalError::EmptyCorpus);
    }
    let mut doc_len = BTreeMap::new();
    let mut postings: BTreeMap<String, Vec<(String, u32)>> = BTreeMap::new();
    for (id, tokens) in docs {
        if doc_len.insert(id.clone(), tokens.len()).is_some() {
            return Err(LexicalError::DuplicateDocId(id.clone()));
        }
        let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
        for t in tokens {
            *tf.entry(t).or_insert(0) += 1;
        }
        for (term, count) in tf {
            postings
                .entry(term.to_string())
                .or_default()
                .push((id.clone(), count));
        }
    }
    for list in postings.values_mut() {
        list.sort_by(|a, b| a.0.cmp(&b.0));
    }
    let n_docs = doc_len.len();
    let avgdl = doc_len.values().sum::<usize>() as f64 / n_docs as f64;
    Ok(Bm25Index {
        postings,
        doc_len,
        avgdl,
        n_docs,
        k1: params.k1,
        b: params.b,
    })
}

impl Bm25Index {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn params(&self) -> Bm25Params {
        Bm25Params {
            k1: self.k1,
            b: self.b,
        }
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.doc_len.keys().map(String::as_str)
    }

    /// Inverse document frequency, `ln(1 + (N - df + 0.5) / (df + 0.5))`.
    /// Strictly positive for every `df` in `[0, N]`.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        let n = self.n_docs as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// idf for every indexed term.
    pub fn idf_map(&self) -> BTreeMap<String, f64> {
        self.postings
            .keys()
            .map(|t| (t.clone(), self.idf(t)))
            .collect()
    }

    /// BM25 score of every document for `query`; documents sharing no term
    /// with the query score 0. Query tokens are scored as given, so a token
    /// repeated in the query contributes once per occurrence.
    pub fn scores(&self, query: &[String]) -> BTreeMap<String, f64> {
        let mut scores: BTreeMap<String, f64> =
            self.doc_len.keys().map(|id| (id.clone(), 0.0)).collect();
        for term in query {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for (doc_id, tf) in list {
                let tf = *tf as f64;
                let dl = self.doc_len[doc_id] as f64;
                let norm = self.k1 * (1.0 - self.b + self.b * dl / self.avgdl);
                let contrib = idf * tf * (self.k1 + 1.0) / (tf + norm);
                *scores.get_mut(doc_id).expect("posting doc in doc_len") += contrib;
            }
        }
        scores
    }

    /// Top-`k` documents, descending by score with ties broken by ascending
    /// document id. Returns `min(k, n_docs)` entries.
    pub fn top_k(&self, query: &[String], k: usize) -> Vec<(String, f64)> {
        let mut ranked: Vec<(String, f64)> = self.scores(query).into_iter().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }

    /// Persist to a single versioned text file.
    pub fn save(&self, path: &Path) -> Result<(), LexicalError> {
        let representable =
            |s: &str| !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c == ':' || c == ',');
        let mut out = String::new();
        let _ = writeln!(out, "BM25v1 {} {} {} {}", self.k1, self.b, self.n_docs, self.avgdl);
        for (term, list) in &self.postings {
            if !representable(term) {
                return Err(LexicalError::UnrepresentableToken(term.clone()));
            }
            let entries: Vec<String> = list
                .iter()
                .map(|(id, tf)| {
                    if representable(id) {
                        Ok(format!("{id}:{tf}"))
                    } else {
                        Err(LexicalError::UnrepresentableToken(id.clone()))
                    }
                })
                .collect::<Result<_, _>>()?;
            let _ = writeln!(out, "{term}\t{}", entries.join(","));
        }
        out.push_str("DOCS\n");
        for (id, len) in &self.doc_len {
            if !representable(id) {
                return Err(LexicalError::UnrepresentableToken(id.clone()));
            }
            let _ = writeln!(out, "{id}\t{len}");
        }
        fs::write(path, out).map_err(|source| LexicalError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, LexicalError> {
        let text = fs::read_to_string(path).map_err(|source| LexicalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let err = |line: usize, msg: &str| LexicalError::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty index file"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 5 || fields[0] != "BM25v1" {
            return Err(err(1, "bad header, expected `BM25v1 <k1> <b> <n_docs> <avgdl>`"));
        }
        let k1: f64 = fields[1].parse().map_err(|_| err(1, "bad k1"))?;
        let b: f64 = fields[2].parse().map_err(|_| err(1, "bad b"))?;
        let n_docs: usize = fields[3].parse().map_err(|_| err(1, "bad n_docs"))?;
        let avgdl: f64 = fields[4].parse().map_err(|_| err(1, "bad avgdl"))?;

        let mut postings = BTreeMap::new();
        let mut doc_len = BTreeMap::new();
        let mut in_docs = false;
        for (i, line) in lines {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            if line == "DOCS" {
                in_docs = true;
                continue;
            }
            let (left, right) = line
                .split_once('\t')
                .ok_or_else(|| err(line_no, "expected a tab-separated line"))?;
            if in_docs {
                let len: usize = right.parse().map_err(|_| err(line_no, "bad doc length"))?;
                if doc_len.insert(left.to_string(), len).is_some() {
                    return Err(err(line_no, "duplicate doc id"));
                }
            } else {
                let mut list = Vec::new();
                for entry in right.split(',') {
                    let (id, tf) = entry
                        .split_once(':')
                        .ok_or_else(|| err(line_no, "bad posting entry"))?;
                    let tf: u32 = tf.parse().map_err(|_| err(line_no, "bad tf"))?;
                    if tf == 0 {
                        return Err(err(line_no, "zero term frequency"));
                    }
                    list.push((id.to_string(), tf));
                }
                if postings.insert(left.to_string(), list).is_some() {
                    return Err(err(line_no, "duplicate term"));
                }
            }
        }
        if doc_len.len() != n_docs {
            return Err(err(1, "doc count does not match DOCS section"));
        }
        if n_docs == 0 {
            return Err(LexicalError::EmptyCorpus);
        }
        for list in postings.values() {
            for (id, _) in list {
                if !doc_len.contains_key(id) {
                    return Err(err(1, "posting references unknown doc id"));
                }
            }
        }
        Ok(Self {
            postings,
            doc_len,
            avgdl,
            n_docs,
            k1,
            b,
        })
    }
}

/// idf over bare token lists, same formula as [`Bm25Index::idf`].
pub fn corpus_idf(token_lists: &[Vec<String>]) -> BTreeMap<String, f64> {
    let n = token_lists.len() as f64;
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for tokens in token_lists {
        let mut seen: Vec<&String> = tokens.iter().collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t.clone()).or_insert(0) += 1;
        }
    }
    df.into_iter()
        .map(|(t, d)| {
            let d = d as f64;
            (t, (1.0 + (n - d + 0.5) / (d + 0.5)).ln())
        })
        .collect()
}

fn tfidf_weights(tokens: &[String], idf: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut tf: BTreeMap<&String, f64> = BTreeMap::new();
    for t in tokens {
        *tf.entry(t).or_insert(0.0) += 1.0;
    }
    tf.into_iter()
        .filter_map(|(t, c)| {
            let w = c * idf.get(t).copied().unwrap_or(0.0);
            (w > 0.0).then(|| (t.clone(), w))
        })
        .collect()
}

/// Cosine similarity of L2-normalized tf-idf vectors, in `[0, 1]`.
/// Returns 0 when either vector is all-zero.
pub fn tfidf_cosine(a: &[String], b: &[String], idf: &BTreeMap<String, f64>) -> f64 {
    let wa = tfidf_weights(a, idf);
    let wb = tfidf_weights(b, idf);
    let na: f64 = wa.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = wb.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = wa
        .iter()
        .filter_map(|(t, va)| wb.get(t).map(|vb| va * vb))
        .sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_latin_splits_on_non_alphanumerics() {
        assert_eq!(
            tokenize("The PRRA officer's"),
            vec!["the", "prra", "officer", "s"]
        );
    }

    #[test]
    fn tokenize_cjk_bigrams() {
        assert_eq!(tokenize("いい天気"), vec!["いい", "い天", "天気"]);
        assert_eq!(tokenize("法"), vec!["法"]);
    }

    #[test]
    fn tokenize_mixed_scripts() {
        assert_eq!(tokenize("第2条 rights"), vec!["第", "2", "条", "rights"]);
    }

    #[test]
    fn build_single_doc_avgdl() {
        let idx = build_bm25(
            &[("d1".into(), toks("one two three four"))],
            Bm25Params::default(),
        )
        .unwrap();
        assert_eq!(idx.n_docs(), 1);
        assert_eq!(idx.avgdl(), 4.0);
    }

    #[test]
    fn build_mean_doc_length() {
        let docs = vec![
            ("a".to_string(), vec!["x".to_string(); 2]),
            ("b".to_string(), vec!["x".to_string(); 4]),
            ("c".to_string(), vec!["x".to_string(); 6]),
        ];
        let idx = build_bm25(&docs, Bm25Params::default()).unwrap();
        assert_eq!(idx.avgdl(), 4.0);
    }

    #[test]
    fn build_rejects_duplicate_and_empty() {
        let dup = vec![
            ("a".to_string(), toks("x")),
            ("a".to_string(), toks("y")),
        ];
        assert!(matches!(
            build_bm25(&dup, Bm25Params::default()),
            Err(LexicalError::DuplicateDocId(_))
        ));
        assert!(matches!(
            build_bm25(&[], Bm25Params::default()),
            Err(LexicalError::EmptyCorpus)
        ));
    }

    #[test]
    fn unknown_query_term_scores_zero() {
        let idx = build_bm25(
            &[
                ("a".into(), toks("contract law")),
                ("b".into(), toks("tort law")),
            ],
            Bm25Params::default(),
        )
        .unwrap();
        let scores = idx.scores(&toks("zebra"));
        assert!(scores.values().all(|&s| s == 0.0));
    }

    /// Direct per-document evaluation of the Okapi formula, independent of
    /// the postings-list implementation.
    fn bm25_oracle(
        docs: &[(String, Vec<String>)],
        query: &[String],
        params: Bm25Params,
    ) -> BTreeMap<String, f64> {
        let n = docs.len() as f64;
        let avgdl = docs.iter().map(|(_, t)| t.len()).sum::<usize>() as f64 / n;
        let mut out = BTreeMap::new();
        for (id, tokens) in docs {
            let dl = tokens.len() as f64;
            let mut score = 0.0;
            for term in query {
                let df = docs
                    .iter()
                    .filter(|(_, dt)| dt.iter().any(|t| t == term))
                    .count() as f64;
                let tf = tokens.iter().filter(|t| *t == term).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                score += idf * tf * (params.k1 + 1.0)
                    / (tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl));
            }
            out.insert(id.clone(), score);
        }
        out
    }

    #[test]
    fn scores_match_direct_formula_on_toy_corpus() {
        let docs = vec![
            ("d1".to_string(), toks("the contract was signed by both parties")),
            ("d2".to_string(), toks("the court reviewed the appeal")),
        ];
        let q = toks("contract");
        let idx = build_bm25(&docs, Bm25Params::default()).unwrap();
        let got = idx.scores(&q);
        let want = bm25_oracle(&docs, &q, Bm25Params::default());
        for (id, s) in &want {
            assert!((got[id] - s).abs() < 1e-9, "doc {id}: {} vs {s}", got[id]);
        }
    }

    #[test]
    fn repeated_term_scores_strictly_higher() {
        let docs = vec![
            ("once".to_string(), toks("claim filed today maybe")),
            ("twice".to_string(), toks("claim claim filed today")),
        ];
        let idx = build_bm25(&docs, Bm25Params::default()).unwrap();
        let scores = idx.scores(&toks("claim"));
        assert!(scores["twice"] > scores["once"]);
        let oracle = bm25_oracle(&docs, &toks("claim"), Bm25Params::default());
        assert!(oracle["twice"] > oracle["once"]);
    }

    #[test]
    fn top_k_truncation_and_tie_order() {
        let docs = vec![
            ("b".to_string(), toks("alpha")),
            ("a".to_string(), toks("alpha")),
            ("c".to_string(), toks("beta")),
        ];
        let idx = build_bm25(&docs, Bm25Params::default()).unwrap();
        let top = idx.top_k(&toks("alpha"), 5);
        assert_eq!(top.len(), 3);
        // a and b tie; ascending id breaks the tie
        assert_eq!(top[0].0, "a");
        assert_eq!(top[1].0, "b");
        // full-length top_k is a total order consistent with scores()
        let scores = idx.scores(&toks("alpha"));
        for w in top.windows(2) {
            assert!(w[0].1 >= w[1].1);
        }
        for (id, score) in &top {
            assert_eq!(scores[id], *score);
        }
    }

    #[test]
    fn idf_positive_for_all_df() {
        let docs: Vec<(String, Vec<String>)> = (0..5)
            .map(|i| (format!("d{i}"), toks("shared term")))
            .collect();
        let idx = build_bm25(&docs, Bm25Params::default()).unwrap();
        assert!(idx.idf("shared") > 0.0); // df = n_docs
        assert!(idx.idf("absent") > 0.0); // df = 0
    }

    #[test]
    fn cosine_identity_and_disjoint() {
        let idf = corpus_idf(&[toks("contract breach"), toks("court appeal")]);
        let a = toks("contract breach");
        assert!((tfidf_cosine(&a, &a, &idf) - 1.0).abs() < 1e-12);
        assert_eq!(tfidf_cosine(&a, &toks("court appeal"), &idf), 0.0);
        assert_eq!(tfidf_cosine(&[], &a, &idf), 0.0);
    }

    #[test]
    fn cosine_half_overlap_hand_value() {
        // idf: contract 1, breach 2, damages 2.
        // a = (1, 2, 0), b = (1, 0, 2); cos = 1 / (sqrt(5) * sqrt(5)) = 0.2
        let mut idf = BTreeMap::new();
        idf.insert("contract".to_string(), 1.0);
        idf.insert("breach".to_string(), 2.0);
        idf.insert("damages".to_string(), 2.0);
        let got = tfidf_cosine(&toks("contract breach"), &toks("contract damages"), &idf);
        assert!((got - 0.2).abs() < 1e-12);
    }

    #[test]
    fn index_round_trips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.bm25");
        let docs = vec![
            ("d1".to_string(), toks("the contract was signed")),
            ("d2".to_string(), toks("the appeal was dismissed")),
        ];
        let idx = build_bm25(&docs, Bm25Params { k1: 1.2, b: 0.6 }).unwrap();
        idx.save(&path).unwrap();
        let loaded = Bm25Index::load(&path).unwrap();
        assert_eq!(loaded.n_docs(), idx.n_docs());
        assert_eq!(loaded.avgdl(), idx.avgdl());
        assert_eq!(loaded.params(), idx.params());
        let q = toks("contract appeal");
        assert_eq!(idx.scores(&q), loaded.scores(&q));
        // re-saving produces identical bytes
        let path2 = dir.path().join("toy2.bm25");
        loaded.save(&path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn tokenizer_output_is_clean_on_mixed_input() {
        use crate::rng::SplitMix64;
        let fragments = [
            "The", "PRRA", "officer's", "第3条", "いい天気", "No.", "1,234", "—", "（注）",
            "claim-form", "e.g.", "責任", "LOI", "ランダム文",
        ];
        let mut rng = SplitMix64::new(88);
        for _ in 0..200 {
            let text: String = (0..rng.next_below(20))
                .map(|_| fragments[rng.next_below(fragments.len() as u64) as usize])
                .collect::<Vec<_>>()
                .join(" ");
            let tokens = tokenize(&text);
            assert_eq!(tokens, tokenize(&text));
            for t in &tokens {
                assert!(!t.is_empty());
                assert!(
                    !t.chars().any(|c| c.is_uppercase()),
                    "token {t:?} from {text:?}"
                );
                assert!(!t.chars().any(char::is_whitespace));
            }
        }
    }

    #[test]
    fn index_round_trips_cjk_terms() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cjk.bm25");
        let docs = vec![
            ("d1".to_string(), toks("未成年者は契約を取り消せる")),
            ("d2".to_string(), toks("所有権は引渡しで移転する")),
        ];
        let idx = build_bm25(&docs, Bm25Params::default()).unwrap();
        idx.save(&path).unwrap();
        let loaded = Bm25Index::load(&path).unwrap();
        let q = toks("契約の取消し");
        assert_eq!(idx.scores(&q), loaded.scores(&q));
    }

    #[test]
    fn load_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bm25");
        fs::write(&path, "BM25v9 1 2 3\n").unwrap();
        assert!(matches!(
            Bm25Index::load(&path),
            Err(LexicalError::Parse { line: 1, .. })
        ));
    }
}
