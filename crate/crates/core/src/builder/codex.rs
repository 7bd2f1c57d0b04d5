//! Relation statistics of CoDEx-M with the per-variant selections used by the
//! shipped `build-*` presets.

use crate::graph::RelationStats;

static TABLE: &str = include_str!("../../data/codex_relations.tsv");

/// One row of the relation table.
#[derive(Debug, Clone, PartialEq)]
pub struct CodexRelation {
    pub id: String,
    pub label: String,
    /// Ratio as printed (three significant digits).
    pub printed_ratio: f64,
    pub heads: usize,
    pub tails: usize,
    pub triples: usize,
    /// Concept marks for tiny, small, medium, large.
    pub concept: [bool; 4],
    /// Kept marks for tiny, small, medium, large.
    pub kept: [bool; 4],
}

pub fn relations() -> Vec<CodexRelation> {
    TABLE
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            let flag = |i: usize| f[i] == "1";
            CodexRelation {
                id: f[0].to_owned(),
                label: f[1].to_owned(),
                printed_ratio: f[2].parse().expect("ratio"),
                heads: f[3].parse().expect("heads"),
                tails: f[4].parse().expect("tails"),
                triples: f[5].parse().expect("triples"),
                concept: [flag(6), flag(8), flag(10), flag(12)],
                kept: [flag(7), flag(9), flag(11), flag(13)],
            }
        })
        .collect()
}

pub fn relation_stats() -> Vec<RelationStats> {
    relations()
        .into_iter()
        .map(|r| RelationStats {
            relation: r.id,
            domain: r.heads,
            range: r.tails,
            triples: r.triples,
        })
        .collect()
}
