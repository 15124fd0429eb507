use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::Serialize;

use crate::scalar::Scalar;

/// Threads in recommendation order, with distances to the prediction when the ranking
/// came from the embedding model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedRecommendation {
    pub thread_ids: Vec<usize>,
    pub distances: Option<Vec<f64>>,
}

impl RankedRecommendation {
    pub fn heuristic(thread_ids: Vec<usize>) -> Self {
        RankedRecommendation { thread_ids, distances: None }
    }

    pub fn len(&self) -> usize {
        self.thread_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thread_ids.is_empty()
    }
}

fn by_distance_then_id(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

fn finish(mut scored: Vec<(usize, f64)>, top_k: usize) -> RankedRecommendation {
    scored.sort_by(by_distance_then_id);
    scored.truncate(top_k);
    let (thread_ids, distances) = scored.into_iter().unzip();
    RankedRecommendation { thread_ids, distances: Some(distances) }
}

/// Exhaustive nearest-neighbour ranking of full candidate vectors by L2 distance to `q`.
pub fn rank_threads<T: Scalar>(q: &[T], candidates: &[(usize, Vec<T>)], top_k: usize) -> RankedRecommendation {
    let scored = candidates
        .iter()
        .map(|(id, v)| {
            let sq: f64 = q.iter().zip(v).map(|(&a, &b)| (a - b).as_f64().powi(2)).sum();
            (*id, sq.sqrt())
        })
        .collect();
    finish(scored, top_k)
}

/// Same ranking as [`rank_threads`] for candidates `[onehot_n(thread), dynamic]`, without
/// materializing the one-hot part: `q` is `[static (n), dynamic (d)]`.
pub fn rank_onehot_candidates<T: Scalar>(
    q: &[T],
    n: usize,
    candidates: &[(usize, Vec<T>)],
    top_k: usize,
) -> RankedRecommendation {
    let (q_static, q_dyn) = q.split_at(n);
    let static_sq: f64 = q_static.iter().map(|x| x.as_f64().powi(2)).sum();
    let scored = candidates
        .iter()
        .map(|(id, dynamic)| {
            let hit = q_static[*id].as_f64();
            let dyn_sq: f64 = q_dyn.iter().zip(dynamic).map(|(&a, &b)| (a - b).as_f64().powi(2)).sum();
            let sq = static_sq - hit * hit + (hit - 1.0).powi(2) + dyn_sq;
            (*id, sq.max(0.0).sqrt())
        })
        .collect();
    finish(scored, top_k)
}

/// Average precision at `n_cutoff`: precision at each relevant position in the top
/// `n_cutoff`, summed and divided by `min(|relevant|, n_cutoff)`. Zero when nothing is relevant.
pub fn average_precision(ranked: &[usize], relevant: &BTreeSet<usize>, n_cutoff: usize) -> f64 {
    assert!(n_cutoff >= 1, "cutoff must be at least 1");
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, thread) in ranked.iter().take(n_cutoff).enumerate() {
        if relevant.contains(thread) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len().min(n_cutoff) as f64
}
