//! Hashed, namespaced text-pair features.
//!
//! Tokens of the two texts land in the `a:` and `b:` namespaces, tokens
//! present in both additionally in `x:`; values are term frequencies (the
//! shared-token value is the smaller of the two frequencies) hashed into a
//! power-of-two feature space and L2-normalized.

use std::collections::BTreeMap;

use super::ScorerError;
use crate::lexical::tokenize;

/// Sparse feature vector: `(index, value)` sorted by index.
pub type SparseVec = Vec<(u32, f64)>;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn term_counts(text: &str) -> BTreeMap<String, f64> {
    let mut counts = BTreeMap::new();
    for t in tokenize(text) {
        *counts.entry(t).or_insert(0.0) += 1.0;
    }
    counts
}

/// Namespaced pre-hash feature keys and raw values, in key order. This is
/// the featurization contract; [`featurize`] only adds hashing and
/// normalization on top.
pub fn feature_keys(text_a: &str, text_b: &str) -> Vec<(String, f64)> {
    let ca = term_counts(text_a);
    let cb = term_counts(text_b);
    let mut keys: BTreeMap<String, f64> = BTreeMap::new();
    for (t, v) in &ca {
        keys.insert(format!("a:{t}"), *v);
    }
    for (t, v) in &cb {
        keys.insert(format!("b:{t}"), *v);
    }
    for (t, va) in &ca {
        if let Some(vb) = cb.get(t) {
            keys.insert(format!("x:{t}"), va.min(*vb));
        }
    }
    keys.into_iter().collect()
}

pub(crate) fn check_dim(dim: usize) -> Result<(), ScorerError> {
    if dim == 0 || !dim.is_power_of_two() || dim > (1 << 31) {
        return Err(ScorerError::BadDim(dim));
    }
    Ok(())
}

/// Hash the pair into a `dim`-sized L2-normalized sparse vector.
/// `dim` must be a power of two. Two empty texts give the zero vector.
pub fn featurize(text_a: &str, text_b: &str, dim: usize) -> Result<SparseVec, ScorerError> {
    check_dim(dim)?;
    let mask = (dim - 1) as u64;
    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    for (key, value) in feature_keys(text_a, text_b) {
        let idx = (fnv1a64(key.as_bytes()) & mask) as u32;
        *acc.entry(idx).or_insert(0.0) += value;
    }
    let norm = acc.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(Vec::new());
    }
    Ok(acc.into_iter().map(|(i, v)| (i, v / norm)).collect())
}
