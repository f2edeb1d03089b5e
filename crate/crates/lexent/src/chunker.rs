//! Sliding-window chunking of long articles.
//!
//! Windows start at multiples of the stride and emission stops with the
//! first chunk whose end reaches the token count, so no trailing chunk is
//! ever fully contained in its predecessor. For a non-empty article the
//! chunk count is `1 + ceil(max(0, len - window) / stride)`.

use thiserror::Error;

use crate::datagen::{LabeledPair, Provenance};

#[derive(Debug, Error)]
pub enum ChunkError {
    #[error("invalid chunk spec: window {window}, stride {stride} (need 0 < stride <= window)")]
    InvalidSpec { window: usize, stride: usize },
    #[error("cannot expand pairs over an empty article")]
    EmptyArticle,
}

/// Window/stride sizes in tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkSpec {
    window: usize,
    stride: usize,
}

impl ChunkSpec {
    pub fn new(window: usize, stride: usize) -> Result<Self, ChunkError> {
        if stride == 0 || stride > window {
            return Err(ChunkError::InvalidSpec { window, stride });
        }
        Ok(Self { window, stride })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn stride(&self) -> usize {
        self.stride
    }
}

impl Default for ChunkSpec {
    fn default() -> Self {
        Self {
            window: 150,
            stride: 50,
        }
    }
}

/// One token window of an article.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Chunk {
    pub article_id: String,
    pub chunk_index: usize,
    pub start_token: usize,
    pub end_token: usize,
    pub text: String,
}

/// Window boundaries `[0, w), [s, s+w), ...` over a token count, each
/// capped at the count, stopping after the first window that reaches the
/// end. A zero count yields no spans.
pub fn chunk_spans(len: usize, spec: &ChunkSpec) -> Vec<(usize, usize)> {
    if len == 0 {
        return Vec::new();
    }
    let mut spans = Vec::new();
    let mut start = 0usize;
    loop {
        let end = (start + spec.window).min(len);
        spans.push((start, end));
        if end >= len {
            break;
        }
        start += spec.stride;
    }
    spans
}

/// Materialize [`chunk_spans`] over actual tokens; chunk text is the
/// space-joined token window.
pub fn chunk_tokens(article_id: &str, tokens: &[String], spec: &ChunkSpec) -> Vec<Chunk> {
    chunk_spans(tokens.len(), spec)
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| Chunk {
            article_id: article_id.to_string(),
            chunk_index: index,
            start_token: start,
            end_token: end,
            text: tokens[start..end].join(" "),
        })
        .collect()
}

/// Closed-form chunk count for a token count under a spec.
pub fn chunk_count(len: usize, spec: &ChunkSpec) -> usize {
    if len == 0 {
        return 0;
    }
    let overhang = len.saturating_sub(spec.window);
    1 + overhang.div_ceil(spec.stride)
}

/// Expand one labeled (question, article) pair into per-chunk pairs; every
/// chunk inherits the article's label.
pub fn expand_pairs(
    query_id: &str,
    question: &str,
    article_id: &str,
    article_tokens: &[String],
    label: bool,
    spec: &ChunkSpec,
) -> Result<Vec<LabeledPair>, ChunkError> {
    if article_tokens.is_empty() {
        return Err(ChunkError::EmptyArticle);
    }
    Ok(chunk_tokens(article_id, article_tokens, spec)
        .into_iter()
        .map(|chunk| {
            let mut pair = LabeledPair::new(
                query_id,
                question,
                chunk.text,
                label,
                Provenance::ChunkDerived,
            );
            pair.article_id = Some(article_id.to_string());
            pair.chunk_index = Some(chunk.chunk_index);
            pair
        })
        .collect())
}
