//! Abduction: scoring candidate predicate pairs as relation triplets and
//! compiling the high-scoring ones into single-premise implication axioms.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::ModelParams;
use crate::kgraph::transitive_closure;
use crate::triplet::TripletStore;
use crate::vocab::{
    Vocabulary, ANTONYM, CANONICAL_RELATIONS, DERIVATIONALLY_RELATED, HYPERNYM, HYPONYM, SYNONYM,
};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("remote scorer failed: {0}")]
    Remote(String),
}

/// An unordered predicate pair collected from a stalled proof; both
/// orientations get scored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CandidatePair {
    pub context_pred: String,
    pub goal_pred: String,
}

impl CandidatePair {
    pub fn new(context_pred: impl Into<String>, goal_pred: impl Into<String>) -> Option<Self> {
        let context_pred = context_pred.into();
        let goal_pred = goal_pred.into();
        if context_pred.is_empty() || goal_pred.is_empty() || context_pred == goal_pred {
            None
        } else {
            Some(CandidatePair { context_pred, goal_pred })
        }
    }
}

/// A relation triplet over lemma strings with its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTriplet {
    pub s: String,
    pub r: String,
    pub o: String,
    pub score: f64,
    /// True when a lemma was missing from the scorer's vocabulary; such
    /// triplets score 0.0 instead of failing. Not part of the wire format.
    #[serde(skip)]
    pub oov: bool,
}

/// A universally quantified one-premise implication compiled from a scored
/// triplet: `forall x. antecedent(x) -> [~]consequent(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axiom {
    pub antecedent: String,
    pub consequent: String,
    pub negated_consequent: bool,
    pub provenance: ScoredTriplet,
}

impl Axiom {
    /// Identity used for deduplication and "already connected" checks.
    pub fn key(&self) -> (&str, &str, bool) {
        (&self.antecedent, &self.consequent, self.negated_consequent)
    }

    pub fn connects(&self, a: &str, b: &str) -> bool {
        (self.antecedent == a && self.consequent == b)
            || (self.antecedent == b && self.consequent == a)
    }
}

impl std::fmt::Display for Axiom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let neg = if self.negated_consequent { "~" } else { "" };
        write!(f, "forall x. {}(x) -> {}{}(x)", self.antecedent, neg, self.consequent)
    }
}

/// Result of scoring one triplet.
#[derive(Debug, Clone, Copy)]
pub struct TripletScore {
    pub value: f64,
    /// False when a lemma was out of vocabulary.
    pub known: bool,
}

/// A scoring back end: KBC model, closure search, or a remote service.
pub trait Scorer: Send + Sync {
    /// Scores one `(s, r, o)` candidate. Unknown lemmas score 0.0 with
    /// `known = false`; they never hard-fail.
    fn score_triplet(&self, s: &str, r: &str, o: &str) -> TripletScore;

    /// All candidates for `pairs` with score >= theta. Local scorers apply
    /// the threshold here; a remote scorer lets the server apply it.
    fn axiom_candidates(
        &self,
        pairs: &[CandidatePair],
        theta: f64,
    ) -> Result<Vec<ScoredTriplet>, ScorerError> {
        Ok(score_pairs(self, pairs)
            .into_iter()
            .filter(|t| t.score >= theta)
            .collect())
    }
}

/// Scores both orderings of every pair under each canonical relation:
/// exactly `10 * pairs.len()` scored triplets, ordered by pair index, then
/// relation id, then orientation.
pub fn score_pairs<S: Scorer + ?Sized>(scorer: &S, pairs: &[CandidatePair]) -> Vec<ScoredTriplet> {
    let mut out = Vec::with_capacity(pairs.len() * 2 * CANONICAL_RELATIONS.len());
    for pair in pairs {
        for rel in CANONICAL_RELATIONS {
            for (s, o) in [
                (&pair.context_pred, &pair.goal_pred),
                (&pair.goal_pred, &pair.context_pred),
            ] {
                let scored = scorer.score_triplet(s, rel, o);
                out.push(ScoredTriplet {
                    s: s.clone(),
                    r: rel.to_owned(),
                    o: o.clone(),
                    score: scored.value,
                    oov: !scored.known,
                });
            }
        }
    }
    out
}

/// Compiles triplets with score >= theta into axioms:
/// synonym / hypernym / derivationally-related map to `s -> o`, antonym to
/// `s -> ~o`, hyponym to `o -> s`. Duplicate implications keep the highest
/// scoring provenance; tautologies (antecedent == consequent) are dropped.
pub fn generate_axioms<I>(scored: I, theta: f64) -> Vec<Axiom>
where
    I: IntoIterator<Item = ScoredTriplet>,
{
    let mut best: BTreeMap<(String, String, bool), Axiom> = BTreeMap::new();
    for t in scored {
        if !(t.score.is_finite() && t.score >= theta) {
            continue;
        }
        let (antecedent, consequent, negated) = match t.r.as_str() {
            SYNONYM | HYPERNYM | DERIVATIONALLY_RELATED => (t.s.clone(), t.o.clone(), false),
            ANTONYM => (t.s.clone(), t.o.clone(), true),
            HYPONYM => (t.o.clone(), t.s.clone(), false),
            _ => continue, // only the canonical relations compile
        };
        if antecedent == consequent {
            continue;
        }
        let key = (antecedent.clone(), consequent.clone(), negated);
        let axiom = Axiom { antecedent, consequent, negated_consequent: negated, provenance: t };
        match best.get(&key) {
            Some(prev) if prev.provenance.score >= axiom.provenance.score => {}
            _ => {
                best.insert(key, axiom);
            }
        }
    }
    best.into_values().collect()
}

/// Writes the debug dump: `s<TAB>r<TAB>o<TAB>score` with 6-decimal scores.
pub fn write_scored_tsv<W: Write>(mut w: W, scored: &[ScoredTriplet]) -> std::io::Result<()> {
    for t in scored {
        writeln!(w, "{}\t{}\t{}\t{:.6}", t.s, t.r, t.o, t.score)?;
    }
    Ok(())
}

/// Scores triplets with a ComplEx model in O(dim) per triplet.
pub struct KbcScorer {
    params: ModelParams,
}

impl KbcScorer {
    pub fn new(params: ModelParams) -> Self {
        KbcScorer { params }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
}

impl Scorer for KbcScorer {
    fn score_triplet(&self, s: &str, r: &str, o: &str) -> TripletScore {
        let vocab = self.params.vocabulary();
        match (vocab.entity_id(s), vocab.relation_id(r), vocab.entity_id(o)) {
            (Some(s), Some(r), Some(o)) => TripletScore {
                value: self.params.score(s, r, o).expect("ids in range"),
                known: true,
            },
            _ => TripletScore { value: 0.0, known: false },
        }
    }
}

/// Membership scorer over a triplet store with precomputed hypernym and
/// hyponym transitive closures; synonym is treated symmetrically. Scores
/// are always 0.0 or 1.0.
pub struct SearchScorer {
    vocab: Vocabulary,
    store: TripletStore,
    hypernym_closure: HashSet<(u32, u32)>,
    hyponym_closure: HashSet<(u32, u32)>,
}

/// Precomputes the closures so multi-step chains answer membership queries.
pub fn search_closure_prepare(vocab: Vocabulary, store: TripletStore) -> SearchScorer {
    let closure_of = |rel: &str| -> HashSet<(u32, u32)> {
        let rid = vocab.relation_id(rel).expect("canonical relation");
        let edges: Vec<(u32, u32)> = store
            .iter()
            .filter(|t| t.r == rid)
            .map(|t| (t.s, t.o))
            .collect();
        transitive_closure(&edges).into_iter().collect()
    };
    let hypernym_closure = closure_of(HYPERNYM);
    let hyponym_closure = closure_of(HYPONYM);
    SearchScorer { vocab, store, hypernym_closure, hyponym_closure }
}

impl SearchScorer {
    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }
}

impl Scorer for SearchScorer {
    fn score_triplet(&self, s: &str, r: &str, o: &str) -> TripletScore {
        let (Some(s), Some(o)) = (self.vocab.entity_id(s), self.vocab.entity_id(o)) else {
            return TripletScore { value: 0.0, known: false };
        };
        let Some(rid) = self.vocab.relation_id(r) else {
            return TripletScore { value: 0.0, known: false };
        };
        let hit = match r {
            SYNONYM => self.store.contains(s, rid, o) || self.store.contains(o, rid, s),
            HYPERNYM => self.hypernym_closure.contains(&(s, o)),
            HYPONYM => self.hyponym_closure.contains(&(s, o)),
            _ => self.store.contains(s, rid, o),
        };
        TripletScore { value: if hit { 1.0 } else { 0.0 }, known: true }
    }
}
