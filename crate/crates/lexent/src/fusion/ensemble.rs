//! Weight-learned ensembling of per-query model scores.
//!
//! The learner grid-searches the weight simplex in steps of 0.1 and keeps
//! the weight vector maximizing the dev-set metric after the decision
//! rule. Enumeration runs in lexicographically descending order over the
//! model-id-sorted weight vector with a strictly-greater acceptance test,
//! so metric ties resolve toward concentrating weight on the first model;
//! corners of the simplex are single models, hence the learned ensemble is
//! never worse than the best single model on the dev set.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{decide, DecideStrategy, FusionError};
use crate::harness::metrics::{f_beta, macro_pr, IdSets};

/// Per-model, per-query ranked `(cand_id, score)` lists.
pub type ModelScores = BTreeMap<String, BTreeMap<String, Vec<(String, f64)>>>;

/// Convex weights over models; they sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub weights: BTreeMap<String, f64>,
}

/// Combine model scores with the given weights into per-query ranked
/// lists (descending score, ties by ascending candidate id). A candidate
/// missing from one model's list contributes 0 for that model.
pub fn combine_model_scores(
    model_scores: &ModelScores,
    weights: &EnsembleWeights,
) -> BTreeMap<String, Vec<(String, f64)>> {
    let mut combined: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (model_id, per_query) in model_scores {
        let w = weights.weights.get(model_id).copied().unwrap_or(0.0);
        for (query, scored) in per_query {
            let entry = combined.entry(query.clone()).or_default();
            for (cand, s) in scored {
                *entry.entry(cand.clone()).or_insert(0.0) += w * s;
            }
        }
    }
    combined
        .into_iter()
        .map(|(query, by_cand)| {
            let mut ranked: Vec<(String, f64)> = by_cand.into_iter().collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            (query, ranked)
        })
        .collect()
}

fn evaluate(
    combined: &BTreeMap<String, Vec<(String, f64)>>,
    dev_gold: &IdSets,
    beta: f64,
    strategy: DecideStrategy,
) -> Result<f64, FusionError> {
    let mut predictions = IdSets::new();
    for (query, ranked) in combined {
        if !dev_gold.contains_key(query) {
            continue;
        }
        let selected = decide(ranked, strategy)?;
        predictions.insert(query.clone(), selected.into_iter().collect::<BTreeSet<_>>());
    }
    let (p, r) = macro_pr(&predictions, dev_gold)?;
    Ok(f_beta(p, r, beta))
}

/// All compositions of `total` tenths into `parts` buckets, descending
/// lexicographically.
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for rest in compositions(total - first, parts - 1) {
            let mut v = Vec::with_capacity(parts);
            v.push(first);
            v.extend(rest);
            out.push(v);
        }
    }
    out
}

/// Learn ensemble weights maximizing macro F-beta on the dev gold after
/// the decision rule. Returns the weights and the achieved metric.
pub fn learn_ensemble(
    model_scores: &ModelScores,
    dev_gold: &IdSets,
    beta: f64,
    strategy: DecideStrategy,
) -> Result<(EnsembleWeights, f64), FusionError> {
    if model_scores.is_empty() {
        return Err(FusionError::NoModels);
    }
    let model_ids: Vec<&String> = model_scores.keys().collect();
    let mut best: Option<(EnsembleWeights, f64)> = None;
    for grid in compositions(10, model_ids.len()) {
        let weights = EnsembleWeights {
            weights: model_ids
                .iter()
                .zip(&grid)
                .map(|(id, w)| ((*id).clone(), *w as f64 / 10.0))
                .collect(),
        };
        let combined = combine_model_scores(model_scores, &weights);
        let metric = evaluate(&combined, dev_gold, beta, strategy)?;
        if best.as_ref().is_none_or(|(_, m)| metric > *m) {
            best = Some((weights, metric));
        }
    }
    Ok(best.expect("grid is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores_for(entries: &[(&str, &[(&str, f64)])]) -> BTreeMap<String, Vec<(String, f64)>> {
        entries
            .iter()
            .map(|(q, docs)| {
                (
                    q.to_string(),
                    docs.iter().map(|(d, s)| (d.to_string(), *s)).collect(),
                )
            })
            .collect()
    }

    fn gold(entries: &[(&str, &[&str])]) -> IdSets {
        entries
            .iter()
            .map(|(q, ids)| {
                (
                    q.to_string(),
                    ids.iter().map(|s| s.to_string()).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn single_model_gets_weight_one() {
        let mut model_scores = ModelScores::new();
        model_scores.insert(
            "only".into(),
            scores_for(&[("q1", &[("a", 0.9), ("b", 0.1)])]),
        );
        let dev = gold(&[("q1", &["a"])]);
        let (weights, metric) =
            learn_ensemble(&model_scores, &dev, 2.0, DecideStrategy::Top1).unwrap();
        assert_eq!(weights.weights["only"], 1.0);
        assert_eq!(metric, 1.0);
    }

    #[test]
    fn identical_models_tie_break_to_first() {
        let per_query = scores_for(&[("q1", &[("a", 0.9), ("b", 0.1)])]);
        let mut model_scores = ModelScores::new();
        model_scores.insert("m1".into(), per_query.clone());
        model_scores.insert("m2".into(), per_query);
        let dev = gold(&[("q1", &["a"])]);
        let (weights, _) =
            learn_ensemble(&model_scores, &dev, 2.0, DecideStrategy::Top1).unwrap();
        assert_eq!(weights.weights["m1"], 1.0);
        assert_eq!(weights.weights["m2"], 0.0);
    }

    #[test]
    fn perfect_model_dominates_antiranker() {
        // the anti model mirrors the good one exactly (score -> 1 - score),
        // so any anti-heavy mixture reverses the ranking
        let good = scores_for(&[
            ("q1", &[("a", 0.9), ("b", 0.2), ("c", 0.1)]),
            ("q2", &[("a", 0.1), ("b", 0.9), ("c", 0.2)]),
        ]);
        let anti = scores_for(&[
            ("q1", &[("a", 0.1), ("b", 0.8), ("c", 0.9)]),
            ("q2", &[("a", 0.9), ("b", 0.1), ("c", 0.8)]),
        ]);
        let mut model_scores = ModelScores::new();
        model_scores.insert("m1_good".into(), good);
        model_scores.insert("m2_anti".into(), anti);
        let dev = gold(&[("q1", &["a"]), ("q2", &["b"])]);
        let (weights, metric) =
            learn_ensemble(&model_scores, &dev, 2.0, DecideStrategy::Top1).unwrap();
        assert!(weights.weights["m1_good"] >= 0.9, "weights: {weights:?}");
        assert_eq!(metric, 1.0);
    }

    #[test]
    fn never_worse_than_best_single_model() {
        let m1 = scores_for(&[
            ("q1", &[("a", 0.6), ("b", 0.5)]),
            ("q2", &[("a", 0.4), ("b", 0.6)]),
        ]);
        let m2 = scores_for(&[
            ("q1", &[("a", 0.2), ("b", 0.9)]),
            ("q2", &[("a", 0.9), ("b", 0.3)]),
        ]);
        let dev = gold(&[("q1", &["a"]), ("q2", &["b"])]);
        let mut model_scores = ModelScores::new();
        model_scores.insert("m1".into(), m1);
        model_scores.insert("m2".into(), m2);
        let singles: Vec<f64> = ["m1", "m2"]
            .iter()
            .map(|id| {
                let mut sub = ModelScores::new();
                sub.insert(id.to_string(), model_scores[*id].clone());
                learn_ensemble(&sub, &dev, 2.0, DecideStrategy::Top1)
                    .unwrap()
                    .1
            })
            .collect();
        let (_, combined) =
            learn_ensemble(&model_scores, &dev, 2.0, DecideStrategy::Top1).unwrap();
        for s in singles {
            assert!(combined >= s);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for parts in 1..4 {
            for grid in compositions(10, parts) {
                assert_eq!(grid.iter().sum::<u32>(), 10);
            }
        }
        // descending lexicographic enumeration starts at (10, 0, ...)
        let grids = compositions(10, 2);
        assert_eq!(grids[0], vec![10, 0]);
        assert_eq!(grids.last().unwrap(), &vec![0, 10]);
    }

    #[test]
    fn no_models_rejected() {
        let dev = gold(&[("q1", &["a"])]);
        assert!(matches!(
            learn_ensemble(&ModelScores::new(), &dev, 2.0, DecideStrategy::Top1),
            Err(FusionError::NoModels)
        ));
    }
}
