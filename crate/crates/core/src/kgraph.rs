//! Lexical knowledge graph construction.
//!
//! Builds `(lemma, relation, lemma)` triplets from synset-level and
//! lemma-level source relations, applies the lemma-list filter, splits off a
//! development set, and merges external lemma-level resources. All outputs
//! are deterministic for fixed inputs and seeds.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::triplet::Triplet;
use crate::vocab::{EntityId, Vocabulary, ANTONYM, DERIVATIONALLY_RELATED, HYPERNYM, HYPONYM, SYNONYM};

#[derive(Debug, Error)]
pub enum KgraphError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {msg}")]
    Format { path: String, line: usize, msg: String },
    #[error("{0}")]
    Argument(String),
}

/// Source relations defined between synsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynsetRelation {
    AlsoSees,
    VerbGroups,
    SimilarTos,
    Hypernym,
    Hyponym,
}

impl SynsetRelation {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "also_sees" => Some(Self::AlsoSees),
            "verb_groups" => Some(Self::VerbGroups),
            "similar_tos" => Some(Self::SimilarTos),
            "hypernym" => Some(Self::Hypernym),
            "hyponym" => Some(Self::Hyponym),
            _ => None,
        }
    }

    /// True for the relations that make two synsets synonymous.
    fn is_synonymic(self) -> bool {
        matches!(self, Self::AlsoSees | Self::VerbGroups | Self::SimilarTos)
    }
}

/// Which hierarchical relation to expand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hierarchy {
    Hypernym,
    Hyponym,
}

/// Synsets (lemma sets), synset-level edges, and lemma-level edges, with an
/// embedded vocabulary interning every lemma that occurs anywhere in the
/// graph.
#[derive(Debug, Clone)]
pub struct SynsetGraph {
    /// synset index -> (synset id, member lemma ids)
    synsets: Vec<(String, Vec<EntityId>)>,
    synset_edges: Vec<(usize, SynsetRelation, usize)>,
    lemma_edges: Vec<(EntityId, String, EntityId)>,
    vocab: Vocabulary,
}

impl SynsetGraph {
    pub fn new(
        synsets: Vec<(String, Vec<String>)>,
        synset_edges: Vec<(String, String, String)>,
        lemma_edges: Vec<(String, String, String)>,
    ) -> Result<Self, KgraphError> {
        let mut vocab = Vocabulary::from_entities(
            synsets
                .iter()
                .flat_map(|(_, lemmas)| lemmas.iter().cloned())
                .chain(lemma_edges.iter().flat_map(|(a, _, b)| [a.clone(), b.clone()])),
        );

        let mut synset_index = HashMap::new();
        let mut synset_rows = Vec::with_capacity(synsets.len());
        for (sid, lemmas) in synsets {
            if synset_index.contains_key(&sid) {
                return Err(KgraphError::Argument(format!("duplicate synset id `{sid}`")));
            }
            let mut ids: Vec<EntityId> = lemmas.iter().map(|l| vocab.intern_entity(l)).collect();
            ids.sort_unstable();
            ids.dedup();
            synset_index.insert(sid.clone(), synset_rows.len());
            synset_rows.push((sid, ids));
        }

        let mut edges = Vec::with_capacity(synset_edges.len());
        for (a, rel, b) in synset_edges {
            let rel = SynsetRelation::parse(&rel).ok_or_else(|| KgraphError::Argument(format!(
                "unknown synset source relation `{rel}`"
            )))?;
            let ai = *synset_index.get(&a).ok_or_else(|| {
                KgraphError::Argument(format!("synset edge references unknown synset `{a}`"))
            })?;
            let bi = *synset_index.get(&b).ok_or_else(|| {
                KgraphError::Argument(format!("synset edge references unknown synset `{b}`"))
            })?;
            edges.push((ai, rel, bi));
        }

        let lemma_rows = lemma_edges
            .into_iter()
            .map(|(a, rel, b)| {
                let ai = vocab.entity_id(&a).expect("interned above");
                let bi = vocab.entity_id(&b).expect("interned above");
                (ai, rel, bi)
            })
            .collect();

        Ok(SynsetGraph {
            synsets: synset_rows,
            synset_edges: edges,
            lemma_edges: lemma_rows,
            vocab,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn n_synsets(&self) -> usize {
        self.synsets.len()
    }

    /// Synonym triplets: the Cartesian product of every synset pair that is
    /// linked by a synonymic edge or shares a lemma, emitted in both
    /// directions with reflexive pairs dropped.
    pub fn build_synonym_triplets(&self) -> Vec<Triplet> {
        let syn = self.vocab.relation_id(SYNONYM).expect("canonical");
        let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();

        for &(a, rel, b) in &self.synset_edges {
            if rel.is_synonymic() && a != b {
                pairs.insert((a.min(b), a.max(b)));
            }
        }

        // Synsets sharing some lemma, found through a lemma -> synsets index.
        let mut by_lemma: HashMap<EntityId, Vec<usize>> = HashMap::new();
        for (idx, (_, lemmas)) in self.synsets.iter().enumerate() {
            for &l in lemmas {
                by_lemma.entry(l).or_default().push(idx);
            }
        }
        for members in by_lemma.values() {
            for (i, &a) in members.iter().enumerate() {
                for &b in &members[i + 1..] {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
        }

        let mut out = BTreeSet::new();
        for (a, b) in pairs {
            for &l1 in &self.synsets[a].1 {
                for &l2 in &self.synsets[b].1 {
                    if l1 != l2 {
                        out.insert(Triplet::new(l1, syn, l2));
                        out.insert(Triplet::new(l2, syn, l1));
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// Hypernym or hyponym triplets: Cartesian lemma products over the
    /// transitive closure of the synset edges of the given kind. Cycles are
    /// tolerated (the closure is a fixed point) but reported as a warning.
    pub fn build_hierarchy_triplets(&self, which: Hierarchy) -> Vec<Triplet> {
        let (wanted, rel_name) = match which {
            Hierarchy::Hypernym => (SynsetRelation::Hypernym, HYPERNYM),
            Hierarchy::Hyponym => (SynsetRelation::Hyponym, HYPONYM),
        };
        let rel = self.vocab.relation_id(rel_name).expect("canonical");

        let edges: Vec<(u32, u32)> = self
            .synset_edges
            .iter()
            .filter(|&&(_, r, _)| r == wanted)
            .map(|&(a, _, b)| (a as u32, b as u32))
            .collect();
        let (closure, cyclic) = closure_with_cycle_check(&edges);
        if cyclic {
            log::warn!("cycle detected in {rel_name} synset edges; closure truncated at the fixed point");
        }

        let mut out = BTreeSet::new();
        for (a, b) in closure {
            for &l1 in &self.synsets[a as usize].1 {
                for &l2 in &self.synsets[b as usize].1 {
                    out.insert(Triplet::new(l1, rel, l2));
                }
            }
        }
        out.into_iter().collect()
    }

    /// Lemma-level edges emitted verbatim under antonym /
    /// derivationally-related.
    pub fn collect_lemma_relations(&self) -> Result<Vec<Triplet>, KgraphError> {
        let mut out = BTreeSet::new();
        for (a, rel, b) in &self.lemma_edges {
            let rid = match rel.as_str() {
                ANTONYM | DERIVATIONALLY_RELATED => self.vocab.relation_id(rel).expect("canonical"),
                other => {
                    return Err(KgraphError::Argument(format!(
                        "unknown lemma source relation `{other}` (expected `{ANTONYM}` or `{DERIVATIONALLY_RELATED}`)"
                    )))
                }
            };
            out.insert(Triplet::new(*a, rid, *b));
        }
        Ok(out.into_iter().collect())
    }
}

/// Reachability relation of `edges`, excluding self-loops unless present in
/// the input. Idempotent.
pub fn transitive_closure(edges: &[(u32, u32)]) -> Vec<(u32, u32)> {
    closure_with_cycle_check(edges).0
}

fn closure_with_cycle_check(edges: &[(u32, u32)]) -> (Vec<(u32, u32)>, bool) {
    let input: HashSet<(u32, u32)> = edges.iter().copied().collect();
    let mut succ: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut nodes: BTreeSet<u32> = BTreeSet::new();
    for &(a, b) in &input {
        succ.entry(a).or_default().push(b);
        nodes.insert(a);
        nodes.insert(b);
    }

    let mut out = BTreeSet::new();
    let mut cyclic = false;
    for &start in &nodes {
        // BFS over successors.
        let mut seen: HashSet<u32> = HashSet::new();
        let mut queue: Vec<u32> = succ.get(&start).cloned().unwrap_or_default();
        while let Some(n) = queue.pop() {
            if !seen.insert(n) {
                continue;
            }
            if n == start && !input.contains(&(start, start)) {
                cyclic = true;
            } else {
                out.insert((start, n));
            }
            if let Some(next) = succ.get(&n) {
                queue.extend(next.iter().copied());
            }
        }
    }
    (out.into_iter().collect(), cyclic)
}

/// Keeps a triplet iff both endpoint lemmas are in `lemmas`.
pub fn filter_by_lemmas<I>(triplets: I, vocab: &Vocabulary, lemmas: &HashSet<String>) -> Vec<Triplet>
where
    I: IntoIterator<Item = Triplet>,
{
    let allowed: HashSet<EntityId> = lemmas
        .iter()
        .filter_map(|l| vocab.entity_id(l))
        .collect();
    triplets
        .into_iter()
        .filter(|t| allowed.contains(&t.s) && allowed.contains(&t.o))
        .collect()
}

/// Splits `k` uniformly sampled triplets into a dev set; the rest is train.
/// Deterministic per seed; the input order defines the sampling frame, so
/// callers should pass a canonically sorted slice.
pub fn split_dev(
    triplets: &[Triplet],
    k: usize,
    seed: u64,
) -> Result<(Vec<Triplet>, Vec<Triplet>), KgraphError> {
    if k > triplets.len() {
        return Err(KgraphError::Argument(format!(
            "dev size {k} exceeds triplet count {}",
            triplets.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, triplets.len(), k).into_vec();
    picked.sort_unstable();
    let pick_set: HashSet<usize> = picked.iter().copied().collect();
    let dev: Vec<Triplet> = picked.iter().map(|&i| triplets[i]).collect();
    let train: Vec<Triplet> = triplets
        .iter()
        .enumerate()
        .filter(|(i, _)| !pick_set.contains(i))
        .map(|(_, t)| *t)
        .collect();
    Ok((train, dev))
}

/// Maps external lemma-level triplets through `mapping` and unions them with
/// `triplets`, deduplicated. New lemmas and mapped relation names are
/// interned into `vocab`.
pub fn merge_external(
    triplets: Vec<Triplet>,
    external: &[(String, String, String)],
    mapping: &HashMap<String, String>,
    vocab: &mut Vocabulary,
) -> Result<Vec<Triplet>, KgraphError> {
    let mut out: BTreeSet<Triplet> = triplets.into_iter().collect();
    for (s, source_rel, o) in external {
        let target = mapping.get(source_rel).ok_or_else(|| {
            KgraphError::Argument(format!("no mapping for external relation `{source_rel}`"))
        })?;
        let r = vocab.intern_relation(target);
        let s = vocab.intern_entity(s);
        let o = vocab.intern_entity(o);
        out.insert(Triplet::new(s, r, o));
    }
    Ok(out.into_iter().collect())
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> KgraphError {
    KgraphError::Format {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Synset file: `synset-id<TAB>lemma1,lemma2,...` per line.
pub fn load_synset_file(path: &Path) -> Result<Vec<(String, Vec<String>)>, KgraphError> {
    let mut out = Vec::new();
    for (no, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (sid, lemmas) = line
            .split_once('\t')
            .ok_or_else(|| format_err(path, no + 1, "expected `synset-id<TAB>lemma,...`"))?;
        let lemmas: Vec<String> = lemmas
            .split(',')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        if lemmas.is_empty() {
            return Err(format_err(path, no + 1, "synset has no lemmas"));
        }
        out.push((sid.trim().to_owned(), lemmas));
    }
    Ok(out)
}

/// Edge file: `left<TAB>source-relation<TAB>right` per line. Used for both
/// synset edges and lemma edges.
pub fn load_edge_file(path: &Path) -> Result<Vec<(String, String, String)>, KgraphError> {
    let mut out = Vec::new();
    for (no, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(rel), Some(b), None) => {
                out.push((a.trim().to_owned(), rel.trim().to_owned(), b.trim().to_owned()))
            }
            _ => return Err(format_err(path, no + 1, "expected exactly three tab-separated fields")),
        }
    }
    Ok(out)
}

/// Lemma-list file: one lemma per line.
pub fn load_lemma_list(path: &Path) -> Result<HashSet<String>, KgraphError> {
    let mut out = HashSet::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        let lemma = line.trim();
        if !lemma.is_empty() {
            out.insert(lemma.to_owned());
        }
    }
    Ok(out)
}

/// Loads a full synset graph from its three input files.
pub fn load_synset_graph(
    synsets: &Path,
    synset_edges: &Path,
    lemma_edges: &Path,
) -> Result<SynsetGraph, KgraphError> {
    SynsetGraph::new(
        load_synset_file(synsets)?,
        load_edge_file(synset_edges)?,
        load_edge_file(lemma_edges)?,
    )
}

/// Writes the canonical triplet file: `s<TAB>r<TAB>o` per line, sorted
/// lexicographically by the name triple for reproducible diffs.
pub fn write_triplet_file<W: Write>(
    w: W,
    vocab: &Vocabulary,
    triplets: &[Triplet],
) -> Result<(), KgraphError> {
    let mut rows: Vec<(&str, &str, &str)> = triplets
        .iter()
        .map(|t| {
            (
                vocab.entity_name(t.s),
                vocab.relation_name(t.r),
                vocab.entity_name(t.o),
            )
        })
        .collect();
    rows.sort_unstable();
    rows.dedup();
    let mut w = BufWriter::new(w);
    for (s, r, o) in rows {
        writeln!(w, "{s}\t{r}\t{o}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_triplet_file_path(
    path: &Path,
    vocab: &Vocabulary,
    triplets: &[Triplet],
) -> Result<(), KgraphError> {
    write_triplet_file(File::create(path)?, vocab, triplets)
}

/// Reads a triplet file, building a fresh dense vocabulary from its content:
/// entities are the sorted distinct endpoint lemmas; relations are the
/// canonical five plus any extra relation names found, appended in sorted
/// order.
pub fn read_triplet_file<R: Read>(r: R) -> Result<(Vocabulary, Vec<Triplet>), KgraphError> {
    let mut rows: Vec<(String, String, String)> = Vec::new();
    for (no, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(rel), Some(o), None) => {
                rows.push((s.to_owned(), rel.to_owned(), o.to_owned()))
            }
            _ => {
                return Err(KgraphError::Format {
                    path: "<triplets>".to_owned(),
                    line: no + 1,
                    msg: "expected `s<TAB>relation<TAB>o`".to_owned(),
                })
            }
        }
    }
    let mut vocab =
        Vocabulary::from_entities(rows.iter().flat_map(|(s, _, o)| [s.clone(), o.clone()]));
    let mut extra: Vec<&str> = rows
        .iter()
        .map(|(_, r, _)| r.as_str())
        .filter(|r| vocab.relation_id(r).is_none())
        .collect();
    extra.sort_unstable();
    extra.dedup();
    for r in extra {
        vocab.intern_relation(r);
    }
    let mut triplets: Vec<Triplet> = rows
        .iter()
        .map(|(s, r, o)| {
            Triplet::new(
                vocab.entity_id(s).expect("interned"),
                vocab.relation_id(r).expect("interned"),
                vocab.entity_id(o).expect("interned"),
            )
        })
        .collect();
    triplets.sort_unstable();
    triplets.dedup();
    Ok((vocab, triplets))
}

pub fn read_triplet_file_path(path: &Path) -> Result<(Vocabulary, Vec<Triplet>), KgraphError> {
    read_triplet_file(File::open(path)?)
}
