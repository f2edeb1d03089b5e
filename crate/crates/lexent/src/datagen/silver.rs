//! Silver supporting pairs mined from segmented case law.
//!
//! Positives are consecutive sentence pairs inside one paragraph; negatives
//! pair a positive's first sentence with a uniformly random sentence drawn
//! from a different case. Deterministic given the seed.

use super::{LabeledPair, Provenance};
use crate::corpus::Document;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SilverOptions {
    /// Negatives emitted per positive.
    pub neg_ratio: f64,
    /// Fraction of candidate positives kept (subsampling knob).
    pub sample_rate: f64,
}

impl Default for SilverOptions {
    fn default() -> Self {
        Self {
            neg_ratio: 1.0,
            sample_rate: 1.0,
        }
    }
}

struct PositiveDraft<'a> {
    case_idx: usize,
    query_id: String,
    first: &'a str,
    second: &'a str,
}

/// Generate silver supporting pairs from cases whose paragraphs already
/// carry sentences. Cases with fewer than two sentences per paragraph
/// yield no positives.
pub fn build_silver_supporting(
    cases: &[Document],
    opts: &SilverOptions,
    seed: u64,
) -> Vec<LabeledPair> {
    let mut sampler = SplitMix64::substream(seed, 1);
    let mut positives: Vec<PositiveDraft> = Vec::new();
    for (case_idx, case) in cases.iter().enumerate() {
        for para in &case.paragraphs {
            for (si, pair) in para.sentences.windows(2).enumerate() {
                if opts.sample_rate < 1.0 && sampler.next_f64() >= opts.sample_rate {
                    continue;
                }
                positives.push(PositiveDraft {
                    case_idx,
                    query_id: format!("{}:{}:{}", case.id, para.index, si),
                    first: &pair[0],
                    second: &pair[1],
                });
            }
        }
    }

    // global sentence pool for negative sampling
    let pool: Vec<(usize, &str)> = cases
        .iter()
        .enumerate()
        .flat_map(|(ci, case)| {
            case.paragraphs
                .iter()
                .flat_map(move |p| p.sentences.iter().map(move |s| (ci, s.as_str())))
        })
        .collect();
    let per_case: Vec<usize> = {
        let mut counts = vec![0usize; cases.len()];
        for (ci, _) in &pool {
            counts[*ci] += 1;
        }
        counts
    };

    let mut out: Vec<LabeledPair> = positives
        .iter()
        .map(|p| {
            let mut pair = LabeledPair::new(
                p.query_id.clone(),
                p.first,
                p.second,
                true,
                Provenance::Silver,
            );
            pair.weight = 1.0;
            pair
        })
        .collect();

    if positives.is_empty() {
        return out;
    }
    let n_neg = (opts.neg_ratio * positives.len() as f64).round() as usize;
    let mut rng = SplitMix64::substream(seed, 2);
    for j in 0..n_neg {
        let pos = &positives[j % positives.len()];
        // a negative needs at least one sentence outside this case
        if pool.len() - per_case[pos.case_idx] == 0 {
            continue;
        }
        let (_, foreign) = loop {
            let k = rng.next_below(pool.len() as u64) as usize;
            if pool[k].0 != pos.case_idx {
                break pool[k];
            }
        };
        out.push(LabeledPair::new(
            pos.query_id.clone(),
            pos.first,
            foreign,
            false,
            Provenance::Silver,
        ));
    }
    out
}
