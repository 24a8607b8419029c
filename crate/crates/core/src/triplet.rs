//! Triplet facts over dense ids and the indexed store used by training,
//! evaluation and search-based scoring.

use std::collections::{HashMap, HashSet};

use crate::vocab::{EntityId, RelationId};

/// A single `(s, r, o)` fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub s: EntityId,
    pub r: RelationId,
    pub o: EntityId,
}

impl Triplet {
    pub fn new(s: EntityId, r: RelationId, o: EntityId) -> Self {
        Triplet { s, r, o }
    }
}

/// Duplicate-free triplet set with `(s,r)` and `(o,r)` indexes.
///
/// The index lists are kept sorted so queries stay deterministic; membership
/// is a hash lookup.
#[derive(Debug, Clone, Default)]
pub struct TripletStore {
    triplets: HashSet<Triplet>,
    index_sr: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    index_or: HashMap<(EntityId, RelationId), Vec<EntityId>>,
}

impl TripletStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triplets<I: IntoIterator<Item = Triplet>>(triplets: I) -> Self {
        let mut store = Self::new();
        for t in triplets {
            store.insert(t);
        }
        store
    }

    /// Inserts a triplet; returns false if it was already present.
    pub fn insert(&mut self, t: Triplet) -> bool {
        if !self.triplets.insert(t) {
            return false;
        }
        let os = self.index_sr.entry((t.s, t.r)).or_default();
        if let Err(pos) = os.binary_search(&t.o) {
            os.insert(pos, t.o);
        }
        let ss = self.index_or.entry((t.o, t.r)).or_default();
        if let Err(pos) = ss.binary_search(&t.s) {
            ss.insert(pos, t.s);
        }
        true
    }

    pub fn contains(&self, s: EntityId, r: RelationId, o: EntityId) -> bool {
        self.triplets.contains(&Triplet { s, r, o })
    }

    /// Sorted objects `o` with `(s, r, o)` in the store.
    pub fn objects(&self, s: EntityId, r: RelationId) -> &[EntityId] {
        self.index_sr.get(&(s, r)).map_or(&[], Vec::as_slice)
    }

    /// Sorted subjects `s` with `(s, r, o)` in the store.
    pub fn subjects(&self, o: EntityId, r: RelationId) -> &[EntityId] {
        self.index_or.get(&(o, r)).map_or(&[], Vec::as_slice)
    }

    /// All `(s, r)` pairs that have at least one object, in sorted order.
    pub fn sr_pairs(&self) -> Vec<(EntityId, RelationId)> {
        let mut pairs: Vec<_> = self.index_sr.keys().copied().collect();
        pairs.sort_unstable();
        pairs
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triplet> {
        self.triplets.iter()
    }

    /// Triplets in sorted order; use when determinism matters.
    pub fn sorted(&self) -> Vec<Triplet> {
        let mut all: Vec<_> = self.triplets.iter().copied().collect();
        all.sort_unstable();
        all
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn insert_deduplicates() {
        let mut store = TripletStore::new();
        assert!(store.insert(Triplet::new(0, 1, 2)));
        assert!(!store.insert(Triplet::new(0, 1, 2)));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn index_queries() {
        let store = TripletStore::from_triplets([
            Triplet::new(0, 0, 3),
            Triplet::new(0, 0, 1),
            Triplet::new(2, 0, 1),
            Triplet::new(0, 1, 1),
        ]);
        assert_eq!(store.objects(0, 0), &[1, 3]);
        assert_eq!(store.subjects(1, 0), &[0, 2]);
        assert_eq!(store.objects(9, 9), &[] as &[EntityId]);
        assert_eq!(store.sr_pairs(), vec![(0, 0), (0, 1), (2, 0)]);
    }

    proptest! {
        // Indexes stay exactly consistent with the triplet set under
        // arbitrary inserts and queries.
        #[test]
        fn indexes_agree_with_set(raw in proptest::collection::vec((0u32..8, 0u32..3, 0u32..8), 0..120)) {
            let triplets: Vec<Triplet> = raw.iter().map(|&(s, r, o)| Triplet::new(s, r, o)).collect();
            let store = TripletStore::from_triplets(triplets.iter().copied());
            let set: std::collections::HashSet<Triplet> = triplets.iter().copied().collect();
            prop_assert_eq!(store.len(), set.len());
            for s in 0..8u32 {
                for r in 0..3u32 {
                    for o in 0..8u32 {
                        let member = set.contains(&Triplet::new(s, r, o));
                        prop_assert_eq!(store.contains(s, r, o), member);
                        prop_assert_eq!(store.objects(s, r).contains(&o), member);
                        prop_assert_eq!(store.subjects(o, r).contains(&s), member);
                    }
                    let objs = store.objects(s, r);
                    prop_assert!(objs.windows(2).all(|w| w[0] < w[1]));
                }
            }
        }
    }
}
