//! Corpus model: documents, paragraphs, sentences, ingestion and
//! language filtering.
//!
//! Raw text becomes a uniform `Document -> Paragraph -> sentence` model.
//! Paragraph boundaries are blank lines or bracket-numbered markers like
//! `[10]` at the start of a line; sentence boundaries are terminator
//! characters guarded by an abbreviation list. All values are immutable
//! after construction and every operation here is a pure function.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexical::tokenize;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: not valid UTF-8")]
    NonUtf8 { path: PathBuf },
    #[error("duplicate document id `{id}` (from {path})")]
    DuplicateId { id: String, path: PathBuf },
    #[error("{path}:{line}: {msg}")]
    Json {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("language filtering only supports keeping `english`, got `{0:?}`")]
    UnsupportedKeepLanguage(Language),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    English,
    French,
    Japanese,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Case,
    Article,
    Question,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub parent_id: String,
    pub index: usize,
    pub text: String,
    #[serde(default)]
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub kind: DocKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub paragraphs: Vec<Paragraph>,
}

impl Document {
    /// Build the full model from raw text: segment paragraphs, split
    /// sentences, wire parent ids and consecutive indices.
    pub fn from_raw(id: &str, kind: DocKind, raw: &str) -> Self {
        let paragraphs = segment_paragraphs(raw)
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut p = split_sentences(p);
                p.parent_id = id.to_string();
                p.index = i;
                p
            })
            .collect();
        Self {
            id: id.to_string(),
            kind,
            title: None,
            paragraphs,
        }
    }

    /// Full document text, paragraphs separated by blank lines.
    pub fn text(&self) -> String {
        self.paragraphs
            .iter()
            .map(|p| p.text.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.text())
    }

    pub fn paragraph_texts(&self) -> Vec<String> {
        self.paragraphs.iter().map(|p| p.text.clone()).collect()
    }
}

fn is_marker_line(line: &str) -> bool {
    let rest = match line.strip_prefix('[') {
        Some(r) => r,
        None => return false,
    };
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    !digits.is_empty() && rest[digits.len()..].starts_with(']')
}

/// Split raw text into paragraphs on blank lines and on bracket-number
/// markers (`[10]`, `[15]`, ...) at the start of a line. Markers are kept
/// in the paragraph text; empty segments are dropped. Parent ids are left
/// empty and indices run consecutively from 0.
pub fn segment_paragraphs(raw: &str) -> Vec<Paragraph> {
    let mut segments: Vec<String> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let flush = |current: &mut Vec<&str>, segments: &mut Vec<String>| {
        let text = current.join("\n").trim().to_string();
        if !text.is_empty() {
            segments.push(text);
        }
        current.clear();
    };
    for line in raw.lines() {
        if line.trim().is_empty() {
            flush(&mut current, &mut segments);
        } else if is_marker_line(line.trim_start()) {
            flush(&mut current, &mut segments);
            current.push(line);
        } else {
            current.push(line);
        }
    }
    flush(&mut current, &mut segments);
    segments
        .into_iter()
        .enumerate()
        .map(|(index, text)| Paragraph {
            parent_id: String::new(),
            index,
            text,
            sentences: Vec::new(),
        })
        .collect()
}

/// The abbreviation guard list bundled with the crate.
pub fn bundled_abbreviations() -> &'static HashSet<String> {
    static GUARDS: OnceLock<HashSet<String>> = OnceLock::new();
    GUARDS.get_or_init(|| parse_word_list(include_str!("../data/abbreviations.txt")))
}

fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.to_lowercase())
        .collect()
}

/// Load a one-token-per-line word list (abbreviations or stopwords).
pub fn load_word_list(path: &Path) -> Result<HashSet<String>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_word_list(&text))
}

fn split_sentence_texts(text: &str, guards: &HashSet<String>) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    for (k, &(byte, c)) in chars.iter().enumerate() {
        let terminator = matches!(c, '.' | '?' | '!' | '。');
        if !terminator {
            continue;
        }
        let end = byte + c.len_utf8();
        // '.', '?', '!' end a sentence only before whitespace or end of
        // text; the ideographic full stop always does.
        if c != '。' {
            match chars.get(k + 1) {
                Some(&(_, next)) if !next.is_whitespace() => continue,
                _ => {}
            }
        }
        if c == '.' {
            // Suppress the split when the word ending here is a known
            // abbreviation ("v.", "No.", "Mr.", "e.g.", ...).
            let word_start = text[..byte]
                .char_indices()
                .rev()
                .find(|(_, w)| w.is_whitespace())
                .map(|(i, w)| i + w.len_utf8())
                .unwrap_or(0);
            let word = text[word_start..end].to_lowercase();
            if guards.contains(&word) {
                continue;
            }
        }
        let sentence = text[start..end].trim();
        if !sentence.is_empty() {
            sentences.push(sentence.to_string());
        }
        start = end;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

/// Fill the sentence list of a paragraph using the bundled abbreviation
/// guard list.
pub fn split_sentences(p: &Paragraph) -> Paragraph {
    split_sentences_with(p, bundled_abbreviations())
}

/// Like [`split_sentences`] with a caller-supplied guard list (lowercase
/// abbreviations ending in `.`).
pub fn split_sentences_with(p: &Paragraph, guards: &HashSet<String>) -> Paragraph {
    Paragraph {
        parent_id: p.parent_id.clone(),
        index: p.index,
        text: p.text.clone(),
        sentences: split_sentence_texts(&p.text, guards),
    }
}

/// The English stopword list bundled with the crate.
pub fn bundled_english_stopwords() -> &'static HashSet<String> {
    static EN: OnceLock<HashSet<String>> = OnceLock::new();
    EN.get_or_init(|| parse_word_list(include_str!("../data/stopwords_en.txt")))
}

/// The French stopword list bundled with the crate.
pub fn bundled_french_stopwords() -> &'static HashSet<String> {
    static FR: OnceLock<HashSet<String>> = OnceLock::new();
    FR.get_or_init(|| parse_word_list(include_str!("../data/stopwords_fr.txt")))
}

fn stopword_ratio(tokens: &[String], stopwords: &HashSet<String>) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let hits = tokens.iter().filter(|t| stopwords.contains(*t)).count();
    hits as f64 / tokens.len() as f64
}

/// Keep only paragraphs that look like the `keep` language (currently
/// English). A paragraph is dropped iff its English-stopword token ratio
/// is below 0.05 and its French-stopword ratio exceeds the English one.
/// Order is preserved and paragraph contents are never mutated.
pub fn filter_language(
    paragraphs: Vec<Paragraph>,
    keep: Language,
) -> Result<Vec<Paragraph>, CorpusError> {
    filter_language_with(
        paragraphs,
        keep,
        bundled_english_stopwords(),
        bundled_french_stopwords(),
    )
}

/// [`filter_language`] with caller-supplied stopword lists.
pub fn filter_language_with(
    paragraphs: Vec<Paragraph>,
    keep: Language,
    english: &HashSet<String>,
    french: &HashSet<String>,
) -> Result<Vec<Paragraph>, CorpusError> {
    if keep != Language::English {
        return Err(CorpusError::UnsupportedKeepLanguage(keep));
    }
    Ok(paragraphs
        .into_iter()
        .filter(|p| {
            let tokens = tokenize(&p.text);
            let en = stopword_ratio(&tokens, english);
            let fr = stopword_ratio(&tokens, french);
            !(en < 0.05 && fr > en)
        })
        .collect())
}

/// Apply [`filter_language`] to a document's paragraphs, re-indexing the
/// survivors so paragraph indices stay consecutive from 0.
pub fn filter_document_language(doc: &Document, keep: Language) -> Result<Document, CorpusError> {
    filter_document_language_with(
        doc,
        keep,
        bundled_english_stopwords(),
        bundled_french_stopwords(),
    )
}

/// [`filter_document_language`] with caller-supplied stopword lists.
pub fn filter_document_language_with(
    doc: &Document,
    keep: Language,
    english: &HashSet<String>,
    french: &HashSet<String>,
) -> Result<Document, CorpusError> {
    let kept = filter_language_with(doc.paragraphs.clone(), keep, english, french)?;
    let paragraphs = kept
        .into_iter()
        .enumerate()
        .map(|(index, mut p)| {
            p.index = index;
            p
        })
        .collect();
    Ok(Document {
        id: doc.id.clone(),
        kind: doc.kind,
        title: doc.title.clone(),
        paragraphs,
    })
}

/// Ingest a directory of plain-text files, one document per file, ids
/// derived from file names (extension stripped). Output is ordered by id.
pub fn ingest_collection(path: &Path, kind: DocKind) -> Result<Vec<Document>, CorpusError> {
    let entries = fs::read_dir(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let fpath = entry.path();
        if !fpath.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().to_string();
        if name.starts_with('.') {
            continue;
        }
        let id = fpath
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or(name);
        files.push((id, fpath));
    }
    files.sort();
    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut docs = Vec::with_capacity(files.len());
    for (id, fpath) in files {
        if seen.insert(id.clone(), fpath.clone()).is_some() {
            return Err(CorpusError::DuplicateId { id, path: fpath });
        }
        let bytes = fs::read(&fpath).map_err(|source| CorpusError::Io {
            path: fpath.clone(),
            source,
        })?;
        let raw = String::from_utf8(bytes).map_err(|_| CorpusError::NonUtf8 {
            path: fpath.clone(),
        })?;
        docs.push(Document::from_raw(&id, kind, &raw));
    }
    Ok(docs)
}

#[derive(Deserialize)]
struct RawCorpusLine {
    id: String,
    kind: DocKind,
    #[serde(default)]
    title: Option<String>,
    text: String,
}

/// Ingest a JSON-lines corpus file with fields `{"id","kind","text"}`
/// (optional `"title"`). Output is ordered by id.
pub fn ingest_jsonl(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut docs = Vec::new();
    let mut seen = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawCorpusLine =
            serde_json::from_str(line).map_err(|e| CorpusError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        if seen.insert(raw.id.clone(), i + 1).is_some() {
            return Err(CorpusError::DuplicateId {
                id: raw.id,
                path: path.to_path_buf(),
            });
        }
        let mut doc = Document::from_raw(&raw.id, raw.kind, &raw.text);
        doc.title = raw.title;
        docs.push(doc);
    }
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(docs)
}

/// Write the full document model as JSON lines, one document per line.
pub fn write_documents(path: &Path, docs: &[Document]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serde_json::to_string(doc).expect("document serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read a document-model JSON-lines file produced by [`write_documents`].
pub fn read_documents(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| CorpusError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}
