//! Entity (lemma) and relation vocabularies with dense integer ids.

use std::collections::HashMap;

pub type EntityId = u32;
pub type RelationId = u32;

pub const SYNONYM: &str = "synonym";
pub const HYPERNYM: &str = "hypernym";
pub const ANTONYM: &str = "antonym";
pub const HYPONYM: &str = "hyponym";
pub const DERIVATIONALLY_RELATED: &str = "derivationally-related";

/// Relation inventory used for abduction, in canonical id order.
pub const CANONICAL_RELATIONS: [&str; 5] =
    [SYNONYM, HYPERNYM, ANTONYM, HYPONYM, DERIVATIONALLY_RELATED];

/// Mutually inverse name<->id maps for lemmas and relations.
///
/// Ids are dense in `[0, count)`. The five canonical relations are always
/// present; additional relations may be interned after them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relation_ids: HashMap<String, RelationId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// Empty entity set, canonical relations only.
    pub fn new() -> Self {
        let mut v = Vocabulary {
            entity_names: Vec::new(),
            relation_names: Vec::new(),
            entity_ids: HashMap::new(),
            relation_ids: HashMap::new(),
        };
        for name in CANONICAL_RELATIONS {
            v.intern_relation(name);
        }
        v
    }

    /// Builds a vocabulary whose entities are the deduplicated, sorted form
    /// of `entities`; sorting keeps ids reproducible across runs.
    pub fn from_entities<I, S>(entities: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = entities.into_iter().map(Into::into).collect();
        names.sort_unstable();
        names.dedup();
        let mut v = Vocabulary::new();
        for name in names {
            v.intern_entity(&name);
        }
        v
    }

    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_ids.get(name) {
            return id;
        }
        let id = self.entity_names.len() as EntityId;
        self.entity_names.push(name.to_owned());
        self.entity_ids.insert(name.to_owned(), id);
        id
    }

    pub fn intern_relation(&mut self, name: &str) -> RelationId {
        if let Some(&id) = self.relation_ids.get(name) {
            return id;
        }
        let id = self.relation_names.len() as RelationId;
        self.relation_names.push(name.to_owned());
        self.relation_ids.insert(name.to_owned(), id);
        id
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entity_names[id as usize]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relation_names[id as usize]
    }

    pub fn n_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relation_names.len()
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_relations_present_once() {
        let v = Vocabulary::new();
        assert_eq!(v.relation_names(), &CANONICAL_RELATIONS);
        for (id, name) in CANONICAL_RELATIONS.iter().enumerate() {
            assert_eq!(v.relation_id(name), Some(id as RelationId));
        }
    }

    #[test]
    fn entity_maps_are_inverse_bijections() {
        let v = Vocabulary::from_entities(["walk", "hike", "walk", "amble"]);
        assert_eq!(v.n_entities(), 3);
        for id in 0..v.n_entities() as EntityId {
            assert_eq!(v.entity_id(v.entity_name(id)), Some(id));
        }
        // sorted order
        assert_eq!(v.entity_names(), &["amble", "hike", "walk"]);
    }

    #[test]
    fn interning_is_idempotent() {
        let mut v = Vocabulary::new();
        let a = v.intern_entity("dog");
        let b = v.intern_entity("dog");
        assert_eq!(a, b);
        assert_eq!(v.n_entities(), 1);
        let r = v.intern_relation("similar");
        assert_eq!(v.intern_relation("similar"), r);
        assert_eq!(v.n_relations(), 6);
    }
}
