//! Filtered link-prediction evaluation: MRR and Hits@{1,3,10}.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::complex::ModelParams;
use crate::triplet::Triplet;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Known true triplets (train plus dev). Candidates already known to be
/// facts for `(s, r)` are excluded from ranking.
#[derive(Debug, Clone, Default)]
pub struct FilterSet {
    set: HashSet<Triplet>,
}

impl FilterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triplets<I: IntoIterator<Item = Triplet>>(triplets: I) -> Self {
        FilterSet { set: triplets.into_iter().collect() }
    }

    pub fn insert(&mut self, t: Triplet) {
        self.set.insert(t);
    }

    pub fn contains(&self, s: u32, r: u32, o: u32) -> bool {
        self.set.contains(&Triplet { s, r, o })
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

/// Filtered MRR and Hits@N, reported x100 as percentages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingMetrics {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub count: usize,
}

impl RankingMetrics {
    pub fn hits_at(&self, n: usize) -> Option<f64> {
        match n {
            1 => Some(self.hits1),
            3 => Some(self.hits3),
            10 => Some(self.hits10),
            _ => None,
        }
    }
}

/// Rank of the gold object among all entities not filtered out, with the
/// gold candidate always included. Ties never worsen the rank.
pub fn filtered_rank(
    params: &ModelParams,
    gold: Triplet,
    filter: &FilterSet,
) -> Result<u32, EvalError> {
    let scores = params
        .score_1n(gold.s, gold.r)
        .map_err(|e| EvalError::Argument(e.to_string()))?;
    if (gold.o as usize) >= scores.len() {
        return Err(EvalError::Argument(format!(
            "gold object {} out of range ({} entities)",
            gold.o,
            scores.len()
        )));
    }
    let gold_score = scores[gold.o as usize];
    let mut better = 0u32;
    for (e, &score) in scores.iter().enumerate() {
        let e = e as u32;
        if e != gold.o && !filter.contains(gold.s, gold.r, e) && score > gold_score {
            better += 1;
        }
    }
    Ok(better + 1)
}

/// Filtered MRR / Hits@N over the development set. Order-independent: the
/// reciprocal sum is accumulated per rank value in ascending order.
pub fn evaluate(
    params: &ModelParams,
    dev: &[Triplet],
    filter: &FilterSet,
) -> Result<RankingMetrics, EvalError> {
    if dev.is_empty() {
        return Err(EvalError::Argument("development set is empty".into()));
    }
    let mut by_rank: BTreeMap<u32, usize> = BTreeMap::new();
    for &gold in dev {
        let rank = filtered_rank(params, gold, filter)?;
        *by_rank.entry(rank).or_insert(0) += 1;
    }
    let n = dev.len() as f64;
    let mut reciprocal_sum = 0.0;
    let mut hits = [0usize; 3];
    for (&rank, &count) in &by_rank {
        reciprocal_sum += count as f64 / rank as f64;
        for (slot, bound) in hits.iter_mut().zip([1u32, 3, 10]) {
            if rank <= bound {
                *slot += count;
            }
        }
    }
    Ok(RankingMetrics {
        mrr: 100.0 * reciprocal_sum / n,
        hits1: 100.0 * hits[0] as f64 / n,
        hits3: 100.0 * hits[1] as f64 / n,
        hits10: 100.0 * hits[2] as f64 / n,
        count: dev.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::init_params;
    use crate::vocab::Vocabulary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(ne: usize, seed: u64) -> ModelParams {
        init_params(&Vocabulary::from_entities((0..ne).map(|i| format!("e{i:02}"))), 4, seed)
            .unwrap()
    }

    /// Exhaustive sort-based oracle for the filtered rank.
    fn oracle_rank(params: &ModelParams, gold: Triplet, filter: &FilterSet) -> u32 {
        let mut candidates: Vec<(u32, f64)> = (0..params.n_entities() as u32)
            .filter(|&e| e == gold.o || !filter.contains(gold.s, gold.r, e))
            .map(|e| (e, params.score(gold.s, gold.r, e).unwrap()))
            .collect();
        candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let gold_score = params.score(gold.s, gold.r, gold.o).unwrap();
        (candidates.iter().take_while(|&&(_, sc)| sc > gold_score).count() + 1) as u32
    }

    #[test]
    fn unique_top_candidate_ranks_first() {
        let m = model(5, 8);
        // find the argmax object for (0, 0) and use it as gold
        let scores = m.score_1n(0, 0).unwrap();
        let best = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0 as u32;
        let gold = Triplet::new(0, 0, best);
        let filter = FilterSet::from_triplets([gold]);
        assert_eq!(filtered_rank(&m, gold, &filter).unwrap(), 1);
    }

    #[test]
    fn all_other_candidates_filtered_ranks_first() {
        let m = model(6, 9);
        let gold = Triplet::new(0, 0, 3);
        let filter =
            FilterSet::from_triplets((0..6).map(|o| Triplet::new(0, 0, o)));
        assert_eq!(filtered_rank(&m, gold, &filter).unwrap(), 1);
    }

    #[test]
    fn rank_matches_sort_oracle_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..30 {
            let ne = rng.random_range(2..20usize);
            let m = model(ne, trial);
            let mut filter = FilterSet::new();
            for _ in 0..rng.random_range(0..12) {
                filter.insert(Triplet::new(
                    rng.random_range(0..ne as u32),
                    rng.random_range(0..5u32),
                    rng.random_range(0..ne as u32),
                ));
            }
            let gold = Triplet::new(
                rng.random_range(0..ne as u32),
                rng.random_range(0..5u32),
                rng.random_range(0..ne as u32),
            );
            filter.insert(gold);
            assert_eq!(
                filtered_rank(&m, gold, &filter).unwrap(),
                oracle_rank(&m, gold, &filter),
                "trial {trial}"
            );
        }
    }

    #[test]
    fn filtered_rank_never_exceeds_unfiltered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = model(15, 2);
        for _ in 0..50 {
            let gold = Triplet::new(
                rng.random_range(0..15u32),
                rng.random_range(0..5u32),
                rng.random_range(0..15u32),
            );
            let mut filter = FilterSet::new();
            for _ in 0..10 {
                filter.insert(Triplet::new(
                    rng.random_range(0..15u32),
                    rng.random_range(0..5u32),
                    rng.random_range(0..15u32),
                ));
            }
            filter.insert(gold);
            let filtered = filtered_rank(&m, gold, &filter).unwrap();
            let unfiltered = filtered_rank(&m, gold, &FilterSet::new()).unwrap();
            assert!(filtered <= unfiltered);
        }
    }

    #[test]
    fn perfect_model_scores_hundred() {
        // rank is 1 for every dev triplet when everything else is filtered
        let m = model(4, 3);
        let dev: Vec<Triplet> = (0..4).map(|o| Triplet::new(0, 0, o)).collect();
        let filter = FilterSet::from_triplets(dev.iter().copied());
        let got = evaluate(&m, &dev, &filter).unwrap();
        assert_eq!(got.mrr, 100.0);
        assert_eq!(got.hits1, 100.0);
        assert_eq!(got.hits10, 100.0);
        assert_eq!(got.count, 4);
    }

    #[test]
    fn evaluate_is_order_independent() {
        let m = model(12, 5);
        let mut dev: Vec<Triplet> = (0..12)
            .map(|i| Triplet::new(i % 12, (i % 5) as u32, (11 - i) % 12))
            .collect();
        let filter = FilterSet::from_triplets(dev.iter().copied());
        let a = evaluate(&m, &dev, &filter).unwrap();
        dev.reverse();
        let b = evaluate(&m, &dev, &filter).unwrap();
        dev.swap(0, 5);
        let c = evaluate(&m, &dev, &filter).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn empty_dev_is_an_error() {
        let m = model(3, 1);
        assert!(evaluate(&m, &[], &FilterSet::new()).is_err());
    }

    #[test]
    fn hits_are_monotone() {
        let m = model(30, 17);
        let dev: Vec<Triplet> = (0..30).map(|i| Triplet::new(i, (i % 5) as u32, (i * 7) % 30)).collect();
        let filter = FilterSet::from_triplets(dev.iter().copied());
        let got = evaluate(&m, &dev, &filter).unwrap();
        assert!(got.hits1 <= got.hits3 && got.hits3 <= got.hits10 && got.hits10 <= 100.0);
        assert!(got.mrr > 0.0 && got.mrr <= 100.0);
    }

    #[test]
    fn metrics_serialize_flat() {
        let metrics = RankingMetrics { mrr: 77.68, hits1: 71.07, hits3: 81.76, hits10: 90.08, count: 10000 };
        let json = serde_json::to_string(&metrics).unwrap();
        assert_eq!(
            json,
            r#"{"mrr":77.68,"hits1":71.07,"hits3":81.76,"hits10":90.08,"count":10000}"#
        );
    }
}
