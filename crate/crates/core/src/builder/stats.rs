use std::collections::BTreeSet;
use std::fmt;

use crate::bundle::{DatasetBundle, OpenSplit};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitStats {
    pub mentions: usize,
    pub contexts: usize,
    pub task_triples: usize,
    /// Distinct (vertex, relation) pairs.
    pub ranking_queries: usize,
    /// Distinct (mention, relation) pairs.
    pub linking_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatsReport {
    pub relations: usize,
    pub closed_vertices: usize,
    pub closed_mentions: usize,
    pub closed_triples: usize,
    pub closed_contexts: usize,
    pub validation: SplitStats,
    pub test: SplitStats,
}

fn split_stats(split: &OpenSplit) -> SplitStats {
    let ranking: BTreeSet<(&str, &str)> = split
        .tasks
        .iter()
        .map(|t| (t.vertex.as_str(), t.relation.as_str()))
        .collect();
    let linking: BTreeSet<(&str, &str)> = split
        .tasks
        .iter()
        .map(|t| (t.mention.as_str(), t.relation.as_str()))
        .collect();
    SplitStats {
        mentions: split.mentions.len(),
        contexts: split.contexts.len(),
        task_triples: split.tasks.len(),
        ranking_queries: ranking.len(),
        linking_queries: linking.len(),
    }
}

pub fn stats_report(bundle: &DatasetBundle) -> StatsReport {
    let g = bundle.closed_graph();
    StatsReport {
        relations: g.relation_count(),
        closed_vertices: g.vertex_count(),
        closed_mentions: bundle.closed().mentions.len(),
        closed_triples: g.triples().len(),
        closed_contexts: bundle.closed().contexts.len(),
        validation: split_stats(bundle.validation()),
        test: split_stats(bundle.test()),
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "relations\t{}", self.relations)?;
        writeln!(f, "closed vertices\t{}", self.closed_vertices)?;
        writeln!(f, "closed mentions\t{}", self.closed_mentions)?;
        writeln!(f, "closed triples\t{}", self.closed_triples)?;
        writeln!(f, "closed contexts\t{}", self.closed_contexts)?;
        for (name, s) in [("validation", &self.validation), ("test", &self.test)] {
            writeln!(f, "{name} mentions\t{}", s.mentions)?;
            writeln!(f, "{name} contexts\t{}", s.contexts)?;
            writeln!(f, "{name} task triples\t{}", s.task_triples)?;
            writeln!(f, "{name} ranking queries\t{}", s.ranking_queries)?;
            writeln!(f, "{name} linking queries\t{}", s.linking_queries)?;
        }
        Ok(())
    }
}
