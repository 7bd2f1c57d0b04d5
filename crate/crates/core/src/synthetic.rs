//! Seeded synthetic graphs and corpora for tests, examples and benchmarks.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use crate::builder::{harvest, split, BuildConfig, BuildError, IngestionRecord, SplitReport};
use crate::bundle::{ContextRecord, ContextStore, DatasetBundle, OpenSplit};
use crate::graph::KnowledgeGraph;
use crate::rng;

const FILLER: &[&str] = &[
    "the", "a", "was", "is", "in", "of", "and", "with", "from", "by", "on", "at", "for", "as",
    "known", "later", "early", "during", "after", "before", "first", "new", "old", "great",
    "small", "large", "city", "year", "time", "work", "place", "group", "part", "name", "home",
    "people", "world", "house", "field", "river", "story", "music", "team", "school", "book",
    "state", "church", "road", "war", "family",
];

pub fn vertex_id(i: usize) -> String {
    format!("Q{i:04}")
}

pub fn relation_id(r: usize) -> String {
    format!("P{r}")
}

type Catalogs = (Vec<(String, String)>, Vec<(String, String)>);

fn catalogs(vertices: usize, relations: usize) -> Catalogs {
    (
        (0..vertices).map(|i| (vertex_id(i), format!("vertex {i}"))).collect(),
        (0..relations).map(|r| (relation_id(r), format!("relation {r}"))).collect(),
    )
}

/// One random permutation per relation: triples `(v, r, π_r(v))`.
pub fn permutation_graph(vertices: usize, relations: usize, seed: u64) -> KnowledgeGraph {
    let mut rng = rng::seeded(seed);
    let (vs, rs) = catalogs(vertices, relations);
    let mut triples = Vec::new();
    for r in 0..relations {
        let mut perm: Vec<usize> = (0..vertices).collect();
        perm.shuffle(&mut rng);
        for (v, &t) in perm.iter().enumerate() {
            triples.push((vertex_id(v), relation_id(r), vertex_id(t)));
        }
    }
    KnowledgeGraph::from_ids(vs, rs, triples).expect("ids are consistent")
}

/// Uniformly random distinct triples.
pub fn random_graph(vertices: usize, relations: usize, triples: usize, seed: u64) -> KnowledgeGraph {
    let mut rng = rng::seeded(seed);
    let (vs, rs) = catalogs(vertices, relations);
    let mut seen = BTreeSet::new();
    let cap = vertices * vertices * relations;
    while seen.len() < triples.min(cap) {
        seen.insert((
            rng.random_range(0..vertices),
            rng.random_range(0..relations),
            rng.random_range(0..vertices),
        ));
    }
    KnowledgeGraph::from_ids(
        vs,
        rs,
        seen.into_iter()
            .map(|(h, r, t)| (vertex_id(h), relation_id(r), vertex_id(t))),
    )
    .expect("ids are consistent")
}

fn filler(rng: &mut rng::Rng, n: usize) -> Vec<&'static str> {
    (0..n).map(|_| *FILLER.choose(rng).expect("non-empty")).collect()
}

/// Identity token carried by every context of vertex `i`.
pub fn identity_token(i: usize) -> String {
    format!("ent{i:04}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityFixture {
    pub vertices: usize,
    pub relations: usize,
    pub mentions_per_vertex: usize,
    pub contexts_per_mention: usize,
    pub filler_words: usize,
    pub mention_split: f64,
    pub validation_split: f64,
    pub seed: u64,
}

impl Default for IdentityFixture {
    fn default() -> Self {
        Self {
            vertices: 100,
            relations: 3,
            mentions_per_vertex: 10,
            contexts_per_mention: 5,
            filler_words: 6,
            mention_split: 0.7,
            validation_split: 0.2,
            seed: 0,
        }
    }
}

impl IdentityFixture {
    pub fn graph(&self) -> KnowledgeGraph {
        permutation_graph(self.vertices, self.relations, rng::derive_seed(self.seed, "graph"))
    }

    /// Contexts built from filler, the mention surface and the vertex's
    /// identity token, in random positions.
    pub fn records(&self) -> Vec<IngestionRecord> {
        let mut rng = rng::seeded(rng::derive_seed(self.seed, "records"));
        let mut out = Vec::new();
        for v in 0..self.vertices {
            let ident = identity_token(v);
            for k in 0..self.mentions_per_vertex {
                let surface = format!("m{v}x{k}");
                for c in 0..self.contexts_per_mention {
                    let mut words: Vec<String> = filler(&mut rng, self.filler_words)
                        .into_iter()
                        .map(str::to_owned)
                        .collect();
                    words.push(ident.clone());
                    words.shuffle(&mut rng);
                    let at = rng.random_range(0..=words.len());
                    words.insert(at, surface.clone());
                    out.push(IngestionRecord {
                        vertex: vertex_id(v),
                        mention_surface: surface.clone(),
                        sentence: words.join(" "),
                        origin: format!("doc{v}-{k}-{c}"),
                    });
                }
            }
        }
        out
    }

    pub fn build_config(&self) -> BuildConfig {
        BuildConfig {
            concept_relation_count: 0,
            total_relation_count: self.relations,
            closed_world_threshold: None,
            target_mention_split: self.mention_split,
            target_validation_split: self.validation_split,
            mention_threshold: 1,
            seed: rng::derive_seed(self.seed, "split"),
            overrides: Default::default(),
        }
    }

    pub fn bundle(&self) -> Result<(DatasetBundle, SplitReport), BuildError> {
        let h = harvest(self.records(), 1);
        split(
            &self.graph(),
            &h.mentions,
            &h.contexts,
            &BTreeSet::new(),
            &self.build_config(),
        )
    }
}

/// Shuffles whitespace tokens across all open-world contexts of both
/// splits, keeping every sentence's length. Removes lexical overlap between
/// a mention's contexts and its vertex.
pub fn shuffle_open_contexts(bundle: &DatasetBundle, seed: u64) -> DatasetBundle {
    let mut rng = rng::seeded(seed);
    let (closed, validation, test) = bundle.clone().into_parts();
    let mut pool: Vec<String> = [&validation, &test]
        .iter()
        .flat_map(|s| s.contexts.records())
        .flat_map(|r| r.sentence.split_whitespace().map(str::to_owned))
        .collect();
    pool.shuffle(&mut rng);
    let mut pool = pool.into_iter();
    let mut rebuild = |s: OpenSplit| -> OpenSplit {
        let records = s
            .contexts
            .records()
            .iter()
            .map(|r| ContextRecord {
                mention: r.mention.clone(),
                origin: r.origin.clone(),
                sentence: r
                    .sentence
                    .split_whitespace()
                    .map(|_| pool.next().expect("pool covers every token"))
                    .collect::<Vec<_>>()
                    .join(" "),
            })
            .collect();
        OpenSplit {
            contexts: ContextStore::new(records),
            ..s
        }
    };
    let validation = rebuild(validation);
    let test = rebuild(test);
    DatasetBundle::new(closed, validation, test).expect("shuffling keeps the bundle valid")
}

/// Random mentions and contexts over `graph` for split property tests.
pub fn random_records(
    graph: &KnowledgeGraph,
    max_mentions: usize,
    max_contexts: usize,
    seed: u64,
) -> Vec<IngestionRecord> {
    let mut rng = rng::seeded(seed);
    let mut out = Vec::new();
    for v in 0..graph.vertex_count() {
        let id = graph.vertices().id(v);
        for k in 0..rng.random_range(0..=max_mentions) {
            let surface = format!("s{v}n{k}");
            for c in 0..rng.random_range(1..=max_contexts.max(1)) {
                let mut words = filler(&mut rng, 4);
                words.push(&surface);
                words.shuffle(&mut rng);
                out.push(IngestionRecord {
                    vertex: id.to_owned(),
                    mention_surface: surface.clone(),
                    sentence: words.join(" "),
                    origin: format!("r{c}"),
                });
            }
        }
    }
    out
}
