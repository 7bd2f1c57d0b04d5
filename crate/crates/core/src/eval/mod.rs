//! Ranking and linking evaluation with target filtering.

mod neural;
mod ranked;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

pub use self::neural::{link_rank_neural, rank_contexts_neural, NeuralEngine};
pub use self::ranked::{dedup_by_key, target_filtered_rank, Metrics, Rank, RankedList};
pub use self::report::{EvalConfig, EvalReport, Task, TripleRecord};
use crate::bow::{BowBaseline, BowError};
use crate::bundle::{ContextId, ContextStore, DatasetBundle, SplitName};
use crate::graph::Direction;
use crate::inductive::InductiveError;
use crate::rng::{self, sample_sorted};
use crate::text::TextError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("target is not among the query's true answers")]
    TargetNotInTruths,
    #[error("mention {0:?} has no contexts in this split")]
    NoContexts(String),
    #[error("split {0} has no query corpus")]
    NoQueryCorpus(SplitName),
    #[error("query corpus is empty")]
    EmptyCorpus,
    #[error("unknown {kind} {id:?}")]
    Unknown { kind: &'static str, id: String },
    #[error(transparent)]
    Inductive(#[from] InductiveError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Bow(#[from] BowError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Each mention keeps its best context rank; order follows that rank.
pub fn contexts_to_mentions(
    ranked: &RankedList<ContextId>,
    store: &ContextStore,
) -> RankedList<String> {
    dedup_by_key(ranked, |c| store.get(*c).mention.clone())
}

/// Up to `subsample` context indices out of `n`, in ascending order.
pub fn subsample_contexts(n: usize, subsample: usize, seed: u64) -> Vec<usize> {
    let all: Vec<usize> = (0..n).collect();
    if subsample >= n {
        return all;
    }
    sample_sorted(&all, subsample, &mut rng::seeded(seed))
}

/// A ranking/linking backend.
pub trait Engine: Sync {
    fn name(&self) -> &str;

    /// Contexts of `split` ranked for the closed vertex `v` and relation `r`.
    fn rank_contexts(
        &self,
        split: SplitName,
        v: usize,
        r: usize,
        direction: Direction,
        subsample: usize,
        seed: u64,
    ) -> Result<RankedList<ContextId>, EvalError>;

    /// Closed vertices ranked as the missing endpoint for `mention`.
    fn link(
        &self,
        split: SplitName,
        mention: &str,
        r: usize,
        direction: Direction,
        ctx_per_mention: usize,
        seed: u64,
    ) -> Result<RankedList<usize>, EvalError>;
}

impl Engine for BowBaseline {
    fn name(&self) -> &str {
        "bow"
    }

    fn rank_contexts(
        &self,
        split: SplitName,
        v: usize,
        r: usize,
        direction: Direction,
        subsample: usize,
        seed: u64,
    ) -> Result<RankedList<ContextId>, EvalError> {
        let full = BowBaseline::rank_contexts(self, split, v, r, direction, seed)?;
        let n = self.context_index(split).map_or(0, |i| i.doc_count());
        if subsample >= n {
            return Ok(full);
        }
        let keep: BTreeSet<usize> =
            subsample_contexts(n, subsample, rng::derive_seed(seed, "subsample"))
                .into_iter()
                .collect();
        Ok(RankedList::from_ordered(
            full.into_items()
                .into_iter()
                .filter(|(c, _)| keep.contains(&c.index()))
                .collect(),
        ))
    }

    fn link(
        &self,
        split: SplitName,
        mention: &str,
        r: usize,
        direction: Direction,
        _ctx_per_mention: usize,
        seed: u64,
    ) -> Result<RankedList<usize>, EvalError> {
        Ok(self.link_mention(split, mention, r, direction, seed)?)
    }
}

type QueryKey = (String, String, Direction);

fn query_key_text((a, r, d): &QueryKey) -> String {
    format!("{a}\t{r}\t{d}")
}

/// Per-query seed used by [`evaluate`]; interactive callers reuse it to
/// reproduce evaluation-time samples.
pub fn query_seed(seed: u64, task: Task, anchor: &str, relation: &str, direction: Direction) -> u64 {
    rng::derive_seed(seed, &format!("{}/{anchor}\t{relation}\t{direction}", task.as_str()))
}

/// Micro-averaged hits@k and MRR over all task triples of `split`.
///
/// Queries group task triples by (mention or vertex, relation, direction);
/// each triple is ranked with the other answers of its query filtered out.
pub fn evaluate(
    task: Task,
    engine: &dyn Engine,
    bundle: &DatasetBundle,
    split: SplitName,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    let open = bundle
        .open_split(split)
        .ok_or(EvalError::NoQueryCorpus(split))?;
    let graph = bundle.closed_graph();

    // query -> true answers (mention ids for ranking, vertex ids for linking)
    let mut queries: BTreeMap<QueryKey, BTreeSet<String>> = BTreeMap::new();
    for t in &open.tasks {
        let (anchor, answer) = match task {
            Task::Linking => (t.mention.clone(), t.vertex.clone()),
            Task::Ranking => (t.vertex.clone(), t.mention.clone()),
        };
        queries
            .entry((anchor, t.relation.clone(), t.direction))
            .or_default()
            .insert(answer);
    }
    let queries: Vec<(QueryKey, BTreeSet<String>)> = queries.into_iter().collect();

    let per_query: Vec<Result<Vec<TripleRecord>, EvalError>> = queries
        .par_iter()
        .map(|(key, answers)| {
            let (anchor, relation, direction) = key;
            let key_text = query_key_text(key);
            let seed = query_seed(config.seed, task, anchor, relation, *direction);
            let r = graph
                .relations()
                .index_of(relation)
                .ok_or_else(|| EvalError::Unknown {
                    kind: "relation",
                    id: relation.clone(),
                })?;
            let ranked: RankedList<String> = match task {
                Task::Linking => {
                    let list = engine.link(
                        split,
                        anchor,
                        r,
                        *direction,
                        config.ctx_per_mention,
                        seed,
                    )?;
                    RankedList::from_ordered(
                        list.into_items()
                            .into_iter()
                            .map(|(v, s)| (graph.vertices().id(v).to_owned(), s))
                            .collect(),
                    )
                }
                Task::Ranking => match graph.vertices().index_of(anchor) {
                    Some(v) => {
                        let list = engine.rank_contexts(
                            split,
                            v,
                            r,
                            *direction,
                            config.subsample_ranking,
                            seed,
                        )?;
                        contexts_to_mentions(&list, &open.contexts)
                    }
                    None => RankedList::default(),
                },
            };
            answers
                .iter()
                .map(|target| {
                    Ok(TripleRecord {
                        query: key_text.clone(),
                        target: target.clone(),
                        rank: target_filtered_rank(&ranked, answers, target)?,
                    })
                })
                .collect()
        })
        .collect();

    let mut records = Vec::new();
    for r in per_query {
        records.extend(r?);
    }
    let ranks: Vec<Rank> = records.iter().map(|r| r.rank).collect();
    Ok(EvalReport {
        task,
        engine: engine.name().to_owned(),
        split,
        metrics: Metrics::from_ranks(&ranks, &config.ks),
        queries: queries.len(),
        config: config.clone(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::ContextRecord;

    #[test]
    fn best_context_rank_wins() {
        let store = ContextStore::new(
            [("m1", "a"), ("m2", "b"), ("m1", "c")]
                .map(|(m, s)| ContextRecord {
                    mention: m.into(),
                    origin: String::new(),
                    sentence: s.into(),
                })
                .to_vec(),
        );
        // store order: (m1,a)=0, (m1,c)=1, (m2,b)=2
        let ranked = RankedList::from_ordered(vec![
            (ContextId(0), 0.5),
            (ContextId(2), 0.3),
            (ContextId(1), 0.2),
        ]);
        let mentions = contexts_to_mentions(&ranked, &store);
        assert_eq!(mentions.ids().collect::<Vec<_>>(), vec!["m1", "m2"]);
    }

    #[test]
    fn subsampling_caps_and_sorts() {
        assert_eq!(subsample_contexts(5, 10, 0), vec![0, 1, 2, 3, 4]);
        let s = subsample_contexts(100, 7, 3);
        assert_eq!(s.len(), 7);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, subsample_contexts(100, 7, 3));
    }
}
