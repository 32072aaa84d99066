//! Group-interest cache placement and the popularity / Top-K baselines.
//!
//! Users are weighted by how similar their watch history is to the rest of
//! the cell (cosine similarity with a `1 / ln(1 + |I(m)|)` penalty on popular
//! videos). Each candidate video's score `Pre_m` averages the users'
//! predicted interest, scaled by their similarity weight and by the share of
//! users on the same side of the threshold `delta`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Watch history `X(n)` per user and watcher count `|I(m)|` per video.
#[derive(Debug, Clone, Default)]
pub struct HistoryIndex {
    watched: BTreeMap<u32, Vec<u32>>,
    watchers: BTreeMap<u32, BTreeSet<u32>>,
}

impl HistoryIndex {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut watched: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        let mut watchers: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for (u, m) in pairs {
            watched.entry(u).or_default().insert(m);
            watchers.entry(m).or_default().insert(u);
        }
        HistoryIndex {
            watched: watched.into_iter().map(|(u, s)| (u, s.into_iter().collect())).collect(),
            watchers,
        }
    }

    /// Sorted watch history of `user`.
    pub fn watched(&self, user: u32) -> &[u32] {
        self.watched.get(&user).map_or(&[], |v| v.as_slice())
    }

    pub fn has_watched(&self, user: u32, video: u32) -> bool {
        self.watched(user).binary_search(&video).is_ok()
    }

    pub fn watcher_count(&self, video: u32) -> usize {
        self.watchers.get(&video).map_or(0, |s| s.len())
    }

    pub fn watchers(&self, video: u32) -> impl Iterator<Item = u32> + '_ {
        self.watchers.get(&video).into_iter().flatten().copied()
    }
}

/// `sum_{m in X(u1) & X(u2)} weight(|I(m)|) / sqrt(|X(u1)| |X(u2)|)`.
pub fn weighted_similarity(index: &HistoryIndex, u1: u32, u2: u32, weight: impl Fn(usize) -> f64) -> f64 {
    let (a, b) = (index.watched(u1), index.watched(u2));
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (mut i, mut j, mut sum) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                sum += weight(index.watcher_count(a[i]));
                i += 1;
                j += 1;
            }
        }
    }
    sum / ((a.len() as f64) * (b.len() as f64)).sqrt()
}

/// Plain cosine similarity of two watch histories.
pub fn cosine_similarity(index: &HistoryIndex, u1: u32, u2: u32) -> f64 {
    weighted_similarity(index, u1, u2, |_| 1.0)
}

/// Cosine similarity with each common video weighted by `1 / ln(1 + |I(m)|)`.
pub fn penalized_similarity(index: &HistoryIndex, u1: u32, u2: u32) -> f64 {
    weighted_similarity(index, u1, u2, |count| 1.0 / (count as f64).ln_1p())
}

/// `simg_u`: summed penalized similarity of each of `users` to all others.
pub fn group_similarities(index: &HistoryIndex, users: &[u32]) -> Vec<f64> {
    users
        .par_iter()
        .enumerate()
        .map(|(i, &u)| {
            users
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| penalized_similarity(index, u, v))
                .sum()
        })
        .collect()
}

/// Min-max normalization of the group similarities to `[0, 1]`; all-equal
/// inputs map to 1.
pub fn similarity_weights(simg: &[f64]) -> Vec<f64> {
    let lo = simg.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = simg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![1.0; simg.len()];
    }
    simg.iter().map(|s| (s - lo) / (hi - lo)).collect()
}

/// Shares `(a_po, a_ne)` of users predicted at or above / below `delta`.
pub fn emotion_proportions(predictions: &[f64], delta: f64) -> (f64, f64) {
    if predictions.is_empty() {
        return (0.0, 1.0);
    }
    let pos = predictions.iter().filter(|&&r| r >= delta).count() as f64 / predictions.len() as f64;
    (pos, 1.0 - pos)
}

/// Predicted interest of every cell user in every candidate video.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub users: Vec<u32>,
    pub videos: Vec<u32>,
    /// `scores[n * videos.len() + m]`.
    pub scores: Vec<f64>,
}

impl PredictionMatrix {
    pub fn new(users: Vec<u32>, videos: Vec<u32>, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != users.len() * videos.len() {
            return Err(Error::DimensionMismatch {
                expected: users.len() * videos.len(),
                got: scores.len(),
            });
        }
        Ok(PredictionMatrix { users, videos, scores })
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.scores[n * self.videos.len() + m]
    }

    pub fn column(&self, m: usize) -> Vec<f64> {
        (0..self.users.len()).map(|n| self.get(n, m)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupScore {
    pub videos: Vec<u32>,
    pub pre: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

/// `Pre_m = 1/N sum_n a_si_n r_nm (a_po_m if r_nm >= delta else a_ne_m)`.
pub fn group_interest(preds: &PredictionMatrix, a_si: &[f64], delta: f64) -> Result<GroupScore> {
    if a_si.len() != preds.users.len() {
        return Err(Error::DimensionMismatch {
            expected: preds.users.len(),
            got: a_si.len(),
        });
    }
    if preds.users.is_empty() {
        return Err(Error::Domain("group interest needs at least one user".into()));
    }
    let n = preds.users.len() as f64;
    let per_video: Vec<(f64, f64, f64)> = (0..preds.videos.len())
        .into_par_iter()
        .map(|m| {
            let col = preds.column(m);
            let (po, ne) = emotion_proportions(&col, delta);
            let sum: f64 = col
                .iter()
                .zip(a_si)
                .map(|(&r, &w)| w * r * if r >= delta { po } else { ne })
                .sum();
            (sum / n, po, ne)
        })
        .collect();
    Ok(GroupScore {
        videos: preds.videos.clone(),
        pre: per_video.iter().map(|v| v.0).collect(),
        positive: per_video.iter().map(|v| v.1).collect(),
        negative: per_video.iter().map(|v| v.2).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CachePlan {
    pub videos: Vec<u32>,
    /// Ranking score of each candidate under the scheme that built the plan.
    pub scores: Vec<f64>,
    pub cached: Vec<bool>,
    /// Cached videos in rank order.
    pub selected: Vec<u32>,
}

impl CachePlan {
    pub fn contains(&self, video: u32) -> bool {
        self.selected.contains(&video)
    }

    pub fn capacity_used(&self) -> usize {
        self.selected.len()
    }
}

/// Caches the `capacity` highest-scoring videos; ties go to the lower id.
pub fn decide_cache(videos: &[u32], scores: &[f64], capacity: usize) -> Result<CachePlan> {
    if videos.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: videos.len(),
            got: scores.len(),
        });
    }
    if capacity == 0 {
        return Err(Error::Domain("cache capacity must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..videos.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(videos[a].cmp(&videos[b])));
    order.truncate(capacity);
    let mut cached = vec![false; videos.len()];
    for &i in &order {
        cached[i] = true;
    }
    Ok(CachePlan {
        videos: videos.to_vec(),
        scores: scores.to_vec(),
        cached,
        selected: order.iter().map(|&i| videos[i]).collect(),
    })
}

/// The group-interest scheme: similarity weights, `Pre_m`, top-E.
pub fn proposed_plan(index: &HistoryIndex, preds: &PredictionMatrix, delta: f64, capacity: usize) -> Result<CachePlan> {
    let simg = group_similarities(index, &preds.users);
    let a_si = similarity_weights(&simg);
    let score = group_interest(preds, &a_si, delta)?;
    decide_cache(&score.videos, &score.pre, capacity)
}

/// Caches the candidates with the most historical watchers.
pub fn baseline_popularity(index: &HistoryIndex, candidates: &[u32], capacity: usize) -> Result<CachePlan> {
    let scores: Vec<f64> = candidates.iter().map(|&m| index.watcher_count(m) as f64).collect();
    decide_cache(candidates, &scores, capacity)
}

/// Caches the distinct videos carrying the highest individual predictions.
pub fn baseline_topk(preds: &PredictionMatrix, capacity: usize) -> Result<CachePlan> {
    let m = preds.videos.len();
    let best: Vec<f64> = (0..m)
        .map(|j| (0..preds.users.len()).map(|n| preds.get(n, j)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    // Ranking distinct videos by their best individual score is the same as
    // walking the pooled (user, video) list and skipping repeats.
    decide_cache(&preds.videos, &best, capacity)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_hand_values() {
        let idx = HistoryIndex::from_pairs([(1, 10), (2, 10), (3, 11)]);
        assert_eq!(penalized_similarity(&idx, 1, 3), 0.0);
        let idx = HistoryIndex::from_pairs([(1, 10)]);
        let single = HistoryIndex::from_pairs([(1, 10), (2, 10)]);
        assert_eq!(penalized_similarity(&idx, 1, 4), 0.0);
        // |I(f)| = 2 here; the one-watcher case is checked below.
        assert!((penalized_similarity(&single, 1, 2) - 1.0 / 3f64.ln()).abs() < 1e-15);
        let weight_one = weighted_similarity(&single, 1, 2, |_| 1.0 / 2f64.ln());
        assert!((weight_one - std::f64::consts::LOG2_E).abs() < 1e-15);
    }

    #[test]
    fn group_similarity_hand_values() {
        let idx = HistoryIndex::from_pairs([(1, 7), (2, 7), (3, 7)]);
        let g = group_similarities(&idx, &[1, 2, 3]);
        for v in g {
            assert!((v - 2.0 / 4f64.ln()).abs() < 1e-15);
        }
        let with_empty = group_similarities(&idx, &[1, 2, 3, 9]);
        assert_eq!(with_empty[3], 0.0);
        assert!((with_empty[0] - 2.0 / 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn weights_and_proportions() {
        assert_eq!(similarity_weights(&[0.0, 5.0, 10.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(similarity_weights(&[2.0, 2.0]), vec![1.0, 1.0]);
        assert_eq!(emotion_proportions(&[0.6, 0.6, 0.4, 0.2], 0.5), (0.5, 0.5));
        assert_eq!(emotion_proportions(&[0.5], 0.5), (1.0, 0.0));
    }

    #[test]
    fn group_interest_single_user() {
        let p = PredictionMatrix::new(vec![1], vec![5], vec![0.8]).unwrap();
        let g = group_interest(&p, &[1.0], 0.5).unwrap();
        assert!((g.pre[0] - 0.8).abs() < 1e-15);
        let zero = PredictionMatrix::new(vec![1, 2], vec![5], vec![0.0, 0.0]).unwrap();
        assert_eq!(group_interest(&zero, &[1.0, 0.3], 0.5).unwrap().pre, vec![0.0]);
    }

    #[test]
    fn cache_decisions() {
        let plan = decide_cache(&[1, 2, 3], &[3.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(plan.cached, vec![true, false, true]);
        assert_eq!(plan.selected, vec![1, 3]);
        let tie = decide_cache(&[9, 4, 6], &[1.0, 1.0, 1.0], 1).unwrap();
        assert_eq!(tie.selected, vec![4]);
        assert_eq!(decide_cache(&[1, 2], &[0.0, 0.0], 10).unwrap().selected.len(), 2);
        assert!(decide_cache(&[1], &[0.0], 0).is_err());
    }

    #[test]
    fn baselines() {
        let idx = HistoryIndex::from_pairs([(1, 1), (2, 1), (3, 1), (4, 1), (5, 1), (1, 2), (2, 2), (3, 2)]);
        assert_eq!(baseline_popularity(&idx, &[1, 2], 1).unwrap().selected, vec![1]);
        let empty = HistoryIndex::default();
        assert_eq!(baseline_popularity(&empty, &[5, 3, 4], 2).unwrap().selected, vec![3, 4]);
        let p = PredictionMatrix::new(vec![1, 2], vec![10, 11, 12], vec![0.9, 0.1, 0.2, 0.95, 0.3, 0.1]).unwrap();
        assert_eq!(baseline_topk(&p, 1).unwrap().selected, vec![10]);
        assert_eq!(baseline_topk(&p, 2).unwrap().selected, vec![10, 11]);
    }
}
