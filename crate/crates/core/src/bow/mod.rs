//! BM25 keyword retrieval baseline for ranking and linking.

mod index;

use std::collections::HashMap;

use thiserror::Error;

pub use self::index::{bm25_score, idf, tf_part, Bm25Params, DocKind, Document, InvertedIndex};
use crate::bundle::{ContextId, ContextStore, DatasetBundle, SplitName};
use crate::eval::RankedList;
use crate::graph::{Adjacency, Direction};
use crate::rng::{self, sample_sorted};
use crate::text::tokens;

#[derive(Debug, Error)]
pub enum BowError {
    #[error("index format: {0}")]
    Format(String),
    #[error("unknown mention {0:?}")]
    UnknownMention(String),
    #[error("mention {0:?} has no contexts")]
    NoContexts(String),
    #[error("split {0} has no query corpus")]
    NoQueryCorpus(SplitName),
    #[error("unknown {kind} index {index}")]
    UnknownId { kind: &'static str, index: usize },
    #[error("index does not match the bundle: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BowParams {
    pub bm25: Bm25Params,
    /// Representatives sampled per ranking query.
    pub n_repr: usize,
    /// Contexts sampled per representative or mention.
    pub n_ctx: usize,
    /// Vertex documents retrieved per linking query.
    pub top_n: usize,
}

impl Default for BowParams {
    fn default() -> Self {
        Self {
            bm25: Bm25Params::default(),
            n_repr: 10,
            n_ctx: 20,
            top_n: 25,
        }
    }
}

/// One document per context, payload the mention id.
pub fn context_documents(store: &ContextStore) -> Vec<Document> {
    store
        .records()
        .iter()
        .map(|r| Document {
            kind: DocKind::Context,
            payload: r.mention.clone(),
            tokens: tokens(&r.sentence),
        })
        .collect()
}

/// One document per closed-world vertex concatenating all its closed contexts.
pub fn vertex_documents(bundle: &DatasetBundle) -> Vec<Document> {
    let g = bundle.closed_graph();
    let store = &bundle.closed().contexts;
    bundle
        .closed_mentions_by_vertex()
        .into_iter()
        .enumerate()
        .map(|(v, mentions)| Document {
            kind: DocKind::Vertex,
            payload: g.vertices().id(v).to_owned(),
            tokens: mentions
                .iter()
                .flat_map(|m| store.of_mention(m))
                .flat_map(|&c| tokens(&store.get(c).sentence))
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone)]
struct QueryCorpus {
    index: InvertedIndex,
    by_mention: HashMap<String, Vec<usize>>,
    tokens: Vec<Vec<String>>,
}

impl QueryCorpus {
    fn new(store: &ContextStore, params: Bm25Params) -> Self {
        Self::with_index(store, InvertedIndex::build(&context_documents(store), params))
    }

    fn with_index(store: &ContextStore, index: InvertedIndex) -> Self {
        let mut by_mention: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in store.records().iter().enumerate() {
            by_mention.entry(r.mention.clone()).or_default().push(i);
        }
        Self {
            index,
            by_mention,
            tokens: store.records().iter().map(|r| tokens(&r.sentence)).collect(),
        }
    }
}

/// Indexes over a bundle: closed-world vertex documents plus one context
/// index per open split.
#[derive(Debug, Clone)]
pub struct BowBaseline {
    params: BowParams,
    adjacency: Adjacency,
    vertex_count: usize,
    closed_tokens: Vec<Vec<String>>,
    contexts_by_vertex: Vec<Vec<usize>>,
    vertex_index: InvertedIndex,
    validation: QueryCorpus,
    test: QueryCorpus,
}

impl BowBaseline {
    pub fn new(bundle: &DatasetBundle, params: BowParams) -> Self {
        let vertex_index = InvertedIndex::build(&vertex_documents(bundle), params.bm25);
        let validation = QueryCorpus::new(&bundle.validation().contexts, params.bm25);
        let test = QueryCorpus::new(&bundle.test().contexts, params.bm25);
        Self::assemble(bundle, params, vertex_index, validation, test)
    }

    /// Reuses persisted indexes; their document counts must match the bundle.
    pub fn with_indexes(
        bundle: &DatasetBundle,
        params: BowParams,
        vertex_index: InvertedIndex,
        validation_index: InvertedIndex,
        test_index: InvertedIndex,
    ) -> Result<Self, BowError> {
        let checks = [
            ("vertex", vertex_index.doc_count(), bundle.closed_graph().vertex_count()),
            ("validation", validation_index.doc_count(), bundle.validation().contexts.len()),
            ("test", test_index.doc_count(), bundle.test().contexts.len()),
        ];
        for (what, got, want) in checks {
            if got != want {
                return Err(BowError::Mismatch(format!(
                    "{what} index has {got} documents, bundle has {want}"
                )));
            }
        }
        let validation = QueryCorpus::with_index(&bundle.validation().contexts, validation_index);
        let test = QueryCorpus::with_index(&bundle.test().contexts, test_index);
        Ok(Self::assemble(bundle, params, vertex_index, validation, test))
    }

    fn assemble(
        bundle: &DatasetBundle,
        params: BowParams,
        vertex_index: InvertedIndex,
        validation: QueryCorpus,
        test: QueryCorpus,
    ) -> Self {
        let store = &bundle.closed().contexts;
        let contexts_by_vertex: Vec<Vec<usize>> = bundle
            .closed_mentions_by_vertex()
            .into_iter()
            .map(|ms| {
                let mut ids: Vec<usize> = ms
                    .iter()
                    .flat_map(|m| store.of_mention(m).iter().map(|c| c.index()))
                    .collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        Self {
            params,
            adjacency: bundle.closed_graph().adjacency(),
            vertex_count: bundle.closed_graph().vertex_count(),
            closed_tokens: store.records().iter().map(|r| tokens(&r.sentence)).collect(),
            contexts_by_vertex,
            vertex_index,
            validation,
            test,
        }
    }

    pub fn params(&self) -> BowParams {
        self.params
    }

    pub fn vertex_index(&self) -> &InvertedIndex {
        &self.vertex_index
    }

    pub fn context_index(&self, split: SplitName) -> Option<&InvertedIndex> {
        self.corpus(split).ok().map(|c| &c.index)
    }

    fn corpus(&self, split: SplitName) -> Result<&QueryCorpus, BowError> {
        match split {
            SplitName::Validation => Ok(&self.validation),
            SplitName::Test => Ok(&self.test),
            SplitName::Closed => Err(BowError::NoQueryCorpus(split)),
        }
    }

    /// Ranks the split's contexts against sampled representatives of `(v, r)`.
    ///
    /// Representatives are closed vertices sitting where the sought mention
    /// would sit: heads of `(·, r, v)` for `Tail`, tails of `(v, r, ·)` for
    /// `Head`.
    pub fn rank_contexts(
        &self,
        split: SplitName,
        v: usize,
        r: usize,
        direction: Direction,
        seed: u64,
    ) -> Result<RankedList<ContextId>, BowError> {
        let corpus = self.corpus(split)?;
        if v >= self.vertex_count {
            return Err(BowError::UnknownId {
                kind: "vertex",
                index: v,
            });
        }
        let reps = self.adjacency.complete(v, r, direction.opposite());
        if reps.is_empty() || self.params.n_repr == 0 {
            if reps.is_empty() {
                log::warn!("no representatives for vertex {v}, relation {r}, {direction}");
            }
            return Ok(RankedList::default());
        }
        let mut rng = rng::seeded(seed);
        let mut query = Vec::new();
        for rep in sample_sorted(reps, self.params.n_repr, &mut rng) {
            for c in sample_sorted(&self.contexts_by_vertex[rep], self.params.n_ctx, &mut rng) {
                query.extend(self.closed_tokens[c].iter().cloned());
            }
        }
        let scores = corpus.index.score_all(&query);
        Ok(RankedList::from_scores(
            scores
                .into_iter()
                .enumerate()
                .map(|(i, s)| (ContextId(i as u32), s)),
        ))
    }

    /// Links a mention: every vertex completing `(u, r, ·)` (`Tail`) or
    /// `(·, r, u)` (`Head`) for a retrieved vertex `u` at position `p`
    /// gains `1/p`.
    pub fn link_mention(
        &self,
        split: SplitName,
        mention: &str,
        r: usize,
        direction: Direction,
        seed: u64,
    ) -> Result<RankedList<usize>, BowError> {
        let corpus = self.corpus(split)?;
        let ids = corpus
            .by_mention
            .get(mention)
            .ok_or_else(|| BowError::NoContexts(mention.to_owned()))?;
        let mut rng = rng::seeded(seed);
        let query: Vec<String> = sample_sorted(ids, self.params.n_ctx, &mut rng)
            .into_iter()
            .flat_map(|c| corpus.tokens[c].iter().cloned())
            .collect();
        let mut scores: HashMap<usize, f64> = HashMap::new();
        for (p, (u, _)) in self.vertex_index.search(&query, self.params.top_n).into_iter().enumerate() {
            for &target in self.adjacency.complete(u, r, direction) {
                *scores.entry(target).or_default() += 1.0 / (p + 1) as f64;
            }
        }
        Ok(RankedList::from_scores(scores))
    }
}

/// Free-function form of [`BowBaseline::rank_contexts`].
pub fn rank_contexts_bow(
    baseline: &BowBaseline,
    split: SplitName,
    v: usize,
    r: usize,
    direction: Direction,
    seed: u64,
) -> Result<RankedList<ContextId>, BowError> {
    baseline.rank_contexts(split, v, r, direction, seed)
}

/// Free-function form of [`BowBaseline::link_mention`].
pub fn link_mention_bow(
    baseline: &BowBaseline,
    split: SplitName,
    mention: &str,
    r: usize,
    direction: Direction,
    seed: u64,
) -> Result<RankedList<usize>, BowError> {
    baseline.link_mention(split, mention, r, direction, seed)
}
