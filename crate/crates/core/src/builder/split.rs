use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;

use super::{BuildConfig, BuildError};
use crate::bundle::{ClosedWorld, ContextStore, DatasetBundle, MentionMap, OpenSplit, TaskTriple};
use crate::graph::{Direction, KnowledgeGraph};
use crate::rng;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitReport {
    pub closed_mentions: usize,
    pub open_mentions: usize,
    /// Closed mentions moved to the open world by the per-vertex threshold.
    pub pruned_by_threshold: usize,
    pub closed_vertices: usize,
    /// Open-world triples dropped because their other endpoint has no
    /// closed-world mention.
    pub discarded_triples: usize,
}

fn count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

/// Splits mentions into closed and open world and derives task triples.
///
/// Mentions of concept vertices always stay closed. Every other vertex's
/// mentions are shuffled and a `target_mention_split` share is kept closed,
/// capped by `closed_world_threshold`. Closed triples are those whose
/// endpoints both have a closed mention. Open mentions are then divided into
/// validation and test at mention level. One RNG seeded from
/// `config.seed` drives all draws in sorted vertex order.
pub fn split(
    graph: &KnowledgeGraph,
    mentions: &MentionMap,
    contexts: &ContextStore,
    concepts: &BTreeSet<String>,
    config: &BuildConfig,
) -> Result<(DatasetBundle, SplitReport), BuildError> {
    let mut rng = rng::seeded(config.seed);
    let mut report = SplitReport::default();
    let mut closed: BTreeSet<&str> = BTreeSet::new();
    let mut open: Vec<&str> = Vec::new();

    for (vertex, ids) in mentions.by_vertex() {
        if concepts.contains(vertex) {
            closed.extend(ids);
            continue;
        }
        let mut ids = ids;
        ids.shuffle(&mut rng);
        let mut keep = count(config.target_mention_split, ids.len());
        if let Some(limit) = config.closed_world_threshold {
            if keep > limit {
                report.pruned_by_threshold += keep - limit;
                keep = limit;
            }
        }
        closed.extend(&ids[..keep]);
        open.extend(&ids[keep..]);
    }
    open.sort_unstable();
    if closed.is_empty() {
        return Err(BuildError::EmptySplit("closed-world"));
    }
    if open.is_empty() {
        return Err(BuildError::EmptySplit("open-world"));
    }

    let vertices = graph.vertices();
    let closed_vertices: HashSet<usize> = closed
        .iter()
        .filter_map(|m| vertices.index_of(&mentions.get(m).expect("known mention").vertex))
        .collect();
    report.closed_mentions = closed.len();
    report.open_mentions = open.len();
    report.closed_vertices = closed_vertices.len();

    let closed_graph =
        graph.filter_triples(|t| closed_vertices.contains(&t.head) && closed_vertices.contains(&t.tail));

    let adjacency = graph.adjacency();
    let mut tasks: Vec<TaskTriple> = Vec::new();
    for &m in &open {
        let mention = mentions.get(m).expect("known mention");
        let Some(v) = vertices.index_of(&mention.vertex) else {
            continue;
        };
        for t in adjacency.incident(v) {
            let relation = graph.relations().id(t.relation).to_owned();
            if t.head == v {
                if closed_vertices.contains(&t.tail) {
                    tasks.push(TaskTriple {
                        mention: m.to_owned(),
                        relation: relation.clone(),
                        vertex: vertices.id(t.tail).to_owned(),
                        direction: Direction::Tail,
                    });
                } else {
                    report.discarded_triples += 1;
                }
            }
            if t.tail == v {
                if closed_vertices.contains(&t.head) {
                    tasks.push(TaskTriple {
                        mention: m.to_owned(),
                        relation,
                        vertex: vertices.id(t.head).to_owned(),
                        direction: Direction::Head,
                    });
                } else {
                    report.discarded_triples += 1;
                }
            }
        }
    }

    let mut shuffled = open.clone();
    shuffled.shuffle(&mut rng);
    let n_val = count(config.target_validation_split, shuffled.len());
    if n_val == 0 {
        return Err(BuildError::EmptySplit("validation"));
    }
    if n_val == shuffled.len() {
        return Err(BuildError::EmptySplit("test"));
    }
    let validation_ids: HashSet<&str> = shuffled[..n_val].iter().copied().collect();

    let pick = |keep: &dyn Fn(&str) -> bool| {
        let mut map = MentionMap::new();
        for (id, m) in mentions.iter().filter(|(id, _)| keep(id)) {
            map.insert(id, m.vertex.clone(), m.surface.clone());
        }
        let records = contexts
            .records()
            .iter()
            .filter(|r| keep(&r.mention))
            .cloned()
            .collect();
        (map, ContextStore::new(records))
    };
    let (closed_mentions, closed_contexts) = pick(&|m| closed.contains(m));
    let (val_mentions, val_contexts) = pick(&|m| validation_ids.contains(m));
    let open_set: HashSet<&str> = open.iter().copied().collect();
    let (test_mentions, test_contexts) =
        pick(&|m| open_set.contains(m) && !validation_ids.contains(m));

    let (val_tasks, test_tasks): (Vec<_>, Vec<_>) = tasks
        .into_iter()
        .partition(|t| validation_ids.contains(t.mention.as_str()));

    let bundle = DatasetBundle::new(
        ClosedWorld {
            graph: closed_graph,
            mentions: closed_mentions,
            contexts: closed_contexts,
        },
        OpenSplit {
            mentions: val_mentions,
            contexts: val_contexts,
            tasks: val_tasks.into_iter().collect(),
        },
        OpenSplit {
            mentions: test_mentions,
            contexts: test_contexts,
            tasks: test_tasks.into_iter().collect(),
        },
    )?;
    Ok((bundle, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::ContextRecord;

    fn fixture(mentions_per_vertex: usize) -> (KnowledgeGraph, MentionMap, ContextStore) {
        let s = |x: &str| x.to_owned();
        let vs = ["a", "b", "c", "d"];
        let g = KnowledgeGraph::from_ids(
            vs.iter().map(|v| (s(v), s(v))),
            vec![(s("r"), s("r"))],
            vec![(s("a"), s("r"), s("b")), (s("c"), s("r"), s("d"))],
        )
        .unwrap();
        let mut mm = MentionMap::new();
        let mut ctx = Vec::new();
        for v in vs {
            for i in 0..mentions_per_vertex {
                let id = format!("{v}#{i}");
                mm.insert(&id, v, format!("{v}{i}"));
                ctx.push(ContextRecord {
                    mention: id,
                    origin: s("o"),
                    sentence: format!("about {v}{i}"),
                });
            }
        }
        (g, mm, ContextStore::new(ctx))
    }

    fn cfg() -> BuildConfig {
        BuildConfig {
            target_mention_split: 0.7,
            target_validation_split: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn ten_mentions_split_seven_three() {
        let (g, mm, ctx) = fixture(10);
        let (b, report) = split(&g, &mm, &ctx, &BTreeSet::new(), &cfg()).unwrap();
        let closed_a = b
            .closed()
            .mentions
            .iter()
            .filter(|(_, m)| m.vertex == "a")
            .count();
        assert_eq!(closed_a, 7);
        assert_eq!(report.open_mentions, 12);
    }

    #[test]
    fn concept_vertices_stay_closed() {
        let (g, mm, ctx) = fixture(10);
        let concepts: BTreeSet<String> = ["b".to_owned()].into();
        let (b, _) = split(&g, &mm, &ctx, &concepts, &cfg()).unwrap();
        let closed_b = b
            .closed()
            .mentions
            .iter()
            .filter(|(_, m)| m.vertex == "b")
            .count();
        assert_eq!(closed_b, 10);
    }

    #[test]
    fn threshold_caps_closed_mentions() {
        let (g, mm, ctx) = fixture(10);
        let config = BuildConfig {
            closed_world_threshold: Some(2),
            ..cfg()
        };
        let (b, report) = split(&g, &mm, &ctx, &BTreeSet::new(), &config).unwrap();
        assert_eq!(b.closed().mentions.len(), 8);
        assert_eq!(report.pruned_by_threshold, 20);
    }

    #[test]
    fn open_mention_gets_tail_task() {
        let (g, mm, ctx) = fixture(10);
        let (b, _) = split(&g, &mm, &ctx, &BTreeSet::new(), &cfg()).unwrap();
        let all: Vec<&TaskTriple> = b.validation().tasks.iter().chain(&b.test().tasks).collect();
        let open_a: Vec<&str> = b
            .validation()
            .mentions
            .iter()
            .chain(b.test().mentions.iter())
            .filter(|(_, m)| m.vertex == "a")
            .map(|(id, _)| id)
            .collect();
        assert_eq!(open_a.len(), 3);
        for m in open_a {
            assert!(all.iter().any(|t| t.mention == m
                && t.vertex == "b"
                && t.relation == "r"
                && t.direction == Direction::Tail));
        }
    }

    #[test]
    fn single_mentions_cannot_fill_the_open_world() {
        let (g, mm, ctx) = fixture(1);
        let err = split(&g, &mm, &ctx, &BTreeSet::new(), &cfg()).unwrap_err();
        assert!(matches!(err, BuildError::EmptySplit("open-world")));
    }
}
