//! Benchmark construction from a graph and mention-context records.
//!
//! The pipeline runs in four steps:
//!
//! 1. order relations by their head/tail disproportion and select the kept
//!    and concept relations,
//! 2. collect the minority-side vertices of concept relations,
//! 3. harvest mentions and contexts from ingestion records,
//! 4. split mentions into closed and open world and derive task triples.

pub mod codex;
mod harvest;
mod split;
mod stats;

use std::collections::BTreeSet;

use thiserror::Error;

pub use self::harvest::{harvest, read_ingestion, Harvest, HarvestReport, IngestionRecord};
pub use self::split::{split, SplitReport};
pub use self::stats::{stats_report, SplitStats, StatsReport};
use crate::bundle::{BundleError, DatasetBundle};
use crate::config::{read_field, ConfigError, KvConfig, KvSchema};
use crate::graph::{KnowledgeGraph, RelationStats};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown relation {0:?} in override")]
    UnknownRelation(String),
    #[error("{wanted} relations requested but only {available} have a defined ratio")]
    NotEnoughRelations { wanted: usize, available: usize },
    #[error("override lists {given} {what} relations, configuration asks for {wanted}")]
    OverrideSize {
        what: &'static str,
        given: usize,
        wanted: usize,
    },
    #[error("concept relation {0:?} is not among the kept relations")]
    ConceptNotKept(String),
    #[error("split leaves the {0} part empty")]
    EmptySplit(&'static str),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("{path}: {message}")]
    Ingestion { path: String, message: String },
}

/// Manual relation choices replacing the ratio-ordered defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationOverrides {
    pub kept: Option<Vec<String>>,
    pub concept: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub concept_relation_count: usize,
    pub total_relation_count: usize,
    /// Maximum closed-world mentions per (non-concept) vertex.
    pub closed_world_threshold: Option<usize>,
    /// Fraction of a vertex's mentions that stay closed-world.
    pub target_mention_split: f64,
    /// Fraction of open-world mentions assigned to validation.
    pub target_validation_split: f64,
    /// Minimum number of contexts a mention needs to be kept.
    pub mention_threshold: usize,
    pub seed: u64,
    pub overrides: RelationOverrides,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            concept_relation_count: 0,
            total_relation_count: 0,
            closed_world_threshold: None,
            target_mention_split: 0.7,
            target_validation_split: 0.2,
            mention_threshold: 0,
            seed: 0,
            overrides: RelationOverrides::default(),
        }
    }
}

fn parse_list(kv: &KvConfig, key: &str) -> Option<Vec<String>> {
    kv.get_raw(key).map(|v| {
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect()
    })
}

impl KvSchema for BuildConfig {
    const KEYS: &'static [&'static str] = &[
        "concept_relation_count",
        "total_relation_count",
        "closed_world_threshold",
        "target_mention_split",
        "target_validation_split",
        "mention_threshold",
        "seed",
        "kept_relations",
        "concept_relations",
    ];

    fn apply(&mut self, kv: &KvConfig) -> Result<(), ConfigError> {
        read_field!(kv, "concept_relation_count", self.concept_relation_count);
        read_field!(kv, "total_relation_count", self.total_relation_count);
        read_field!(kv, "target_mention_split", self.target_mention_split);
        read_field!(kv, "target_validation_split", self.target_validation_split);
        read_field!(kv, "mention_threshold", self.mention_threshold);
        read_field!(kv, "seed", self.seed);
        match kv.get_raw("closed_world_threshold") {
            None => {}
            Some("none") | Some("-") | Some("") => self.closed_world_threshold = None,
            Some(_) => self.closed_world_threshold = kv.get("closed_world_threshold")?,
        }
        if let Some(list) = parse_list(kv, "kept_relations") {
            self.overrides.kept = Some(list);
        }
        if let Some(list) = parse_list(kv, "concept_relations") {
            self.overrides.concept = Some(list);
        }
        Ok(())
    }

    fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("concept_relation_count", self.concept_relation_count);
        kv.set("total_relation_count", self.total_relation_count);
        match self.closed_world_threshold {
            Some(t) => kv.set("closed_world_threshold", t),
            None => kv.set("closed_world_threshold", "none"),
        }
        kv.set("target_mention_split", self.target_mention_split);
        kv.set("target_validation_split", self.target_validation_split);
        kv.set("mention_threshold", self.mention_threshold);
        kv.set("seed", self.seed);
        if let Some(k) = &self.overrides.kept {
            kv.set("kept_relations", k.join(","));
        }
        if let Some(c) = &self.overrides.concept {
            kv.set("concept_relations", c.join(","));
        }
        kv
    }

    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.concept_relation_count > self.total_relation_count {
            p.push(format!(
                "concept_relation_count ({}) exceeds total_relation_count ({})",
                self.concept_relation_count, self.total_relation_count
            ));
        }
        for (name, v) in [
            ("target_mention_split", self.target_mention_split),
            ("target_validation_split", self.target_validation_split),
        ] {
            if !(v > 0.0 && v < 1.0) {
                p.push(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        p
    }
}

impl BuildConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        Self::from_kv_over(Self::default(), kv)
    }
}

/// `min(dom, rg) / max(dom, rg)`; undefined for a relation without triples.
pub fn relation_ratio(domain: usize, range: usize) -> Option<f64> {
    let (lo, hi) = (domain.min(range), domain.max(range));
    (hi > 0).then(|| lo as f64 / hi as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationSelection {
    /// Concept relations, ascending ratio.
    pub concept: Vec<String>,
    pub kept: BTreeSet<String>,
    /// All relations with a defined ratio, ascending (ratio, id).
    pub ordered: Vec<(String, f64)>,
}

/// Orders relations by ratio (ties by id) and picks kept and concept sets.
///
/// Without overrides the `total_relation_count` smallest-ratio relations are
/// kept and the `concept_relation_count` smallest among them become concept
/// relations.
pub fn select_relations(
    stats: &[RelationStats],
    config: &BuildConfig,
    overrides: &RelationOverrides,
) -> Result<RelationSelection, BuildError> {
    let mut ordered: Vec<(String, f64)> = Vec::with_capacity(stats.len());
    for s in stats {
        match relation_ratio(s.domain, s.range) {
            Some(r) => ordered.push((s.relation.clone(), r)),
            None => log::warn!("relation {} has no triples; excluded", s.relation),
        }
    }
    ordered.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let rank = |id: &str| ordered.iter().position(|(r, _)| r == id);

    let kept: Vec<String> = match &overrides.kept {
        Some(list) => {
            let mut list = list.clone();
            for r in &list {
                if rank(r).is_none() {
                    return Err(BuildError::UnknownRelation(r.clone()));
                }
            }
            list.sort_by_key(|r| rank(r));
            list.dedup();
            if list.len() != config.total_relation_count {
                return Err(BuildError::OverrideSize {
                    what: "kept",
                    given: list.len(),
                    wanted: config.total_relation_count,
                });
            }
            list
        }
        None => {
            if ordered.len() < config.total_relation_count {
                return Err(BuildError::NotEnoughRelations {
                    wanted: config.total_relation_count,
                    available: ordered.len(),
                });
            }
            ordered
                .iter()
                .take(config.total_relation_count)
                .map(|(r, _)| r.clone())
                .collect()
        }
    };

    let concept: Vec<String> = match &overrides.concept {
        Some(list) => {
            let mut list = list.clone();
            for r in &list {
                if rank(r).is_none() {
                    return Err(BuildError::UnknownRelation(r.clone()));
                }
                if !kept.contains(r) {
                    return Err(BuildError::ConceptNotKept(r.clone()));
                }
            }
            list.sort_by_key(|r| rank(r));
            list.dedup();
            if list.len() != config.concept_relation_count {
                return Err(BuildError::OverrideSize {
                    what: "concept",
                    given: list.len(),
                    wanted: config.concept_relation_count,
                });
            }
            list
        }
        None => kept
            .iter()
            .take(config.concept_relation_count)
            .cloned()
            .collect(),
    };

    Ok(RelationSelection {
        concept,
        kept: kept.into_iter().collect(),
        ordered,
    })
}

/// Vertices on the minority side of each concept relation.
///
/// Tails when `rg(r) <= dom(r)`, heads otherwise.
pub fn concept_vertices<S: AsRef<str>>(
    graph: &KnowledgeGraph,
    concept_relations: &[S],
) -> BTreeSet<String> {
    let stats = graph.stats();
    let mut out = BTreeSet::new();
    for name in concept_relations {
        let Some(r) = graph.relations().index_of(name.as_ref()) else {
            continue;
        };
        let take_tails = stats[r].range <= stats[r].domain;
        for t in graph.triples().iter().filter(|t| t.relation == r) {
            let v = if take_tails { t.tail } else { t.head };
            out.insert(graph.vertices().id(v).to_owned());
        }
    }
    out
}

/// Everything [`build`] produced besides the bundle itself.
#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub bundle: DatasetBundle,
    pub selection: RelationSelection,
    pub concept_vertices: BTreeSet<String>,
    pub harvest: HarvestReport,
    pub split: SplitReport,
}

/// Runs the full construction pipeline.
pub fn build<I>(
    graph: &KnowledgeGraph,
    records: I,
    config: &BuildConfig,
) -> Result<BuildOutput, BuildError>
where
    I: IntoIterator<Item = IngestionRecord>,
{
    config.validate()?;
    let selection = select_relations(&graph.stats(), config, &config.overrides)?;
    let kept: Vec<&String> = selection.kept.iter().collect();
    let graph = graph.restrict_relations(&kept);
    let concepts = concept_vertices(&graph, &selection.concept);

    let known = records
        .into_iter()
        .filter(|r| graph.vertices().contains(&r.vertex));
    let harvested = harvest(known, config.mention_threshold);
    let (bundle, split_report) = split(
        &graph,
        &harvested.mentions,
        &harvested.contexts,
        &concepts,
        config,
    )?;
    Ok(BuildOutput {
        bundle,
        selection,
        concept_vertices: concepts,
        harvest: harvested.report,
        split: split_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;

    fn stat(id: &str, d: usize, r: usize) -> RelationStats {
        RelationStats {
            relation: id.into(),
            domain: d,
            range: r,
            triples: d.max(r),
        }
    }

    #[test]
    fn ratio_matches_languages_spoken_and_spouse() {
        let r = relation_ratio(9816, 62).unwrap();
        assert!((r - 6.32e-3).abs() <= 5e-5, "{r}");
        assert_eq!(relation_ratio(804, 804), Some(1.0));
        assert_eq!(relation_ratio(0, 0), None);
        assert_eq!(relation_ratio(7, 7), Some(1.0));
    }

    #[test]
    fn tiny_preset_on_codex_stats() {
        let cfg = BuildConfig::from_kv(&presets::load("build-tiny").unwrap()).unwrap();
        let stats = codex::relation_stats();
        let sel = select_relations(&stats, &cfg, &cfg.overrides).unwrap();
        assert_eq!(sel.concept.len(), 4);
        assert_eq!(sel.kept.len(), 5);
        assert_eq!(sel.concept, vec!["P1412", "P27", "P30", "P106"]);

        let plain = select_relations(&stats, &cfg, &RelationOverrides::default()).unwrap();
        assert_eq!((plain.concept.len(), plain.kept.len()), (4, 5));
    }

    #[test]
    fn ratio_ordering_reproduces_appendix_concept_marks() {
        for (i, split) in ["small", "medium", "large"].into_iter().enumerate() {
            let cfg =
                BuildConfig::from_kv(&presets::load(&format!("build-{split}")).unwrap()).unwrap();
            let sel = select_relations(&codex::relation_stats(), &cfg, &cfg.overrides).unwrap();
            let marked: BTreeSet<String> = codex::relations()
                .into_iter()
                .filter(|r| r.concept[i + 1])
                .map(|r| r.id)
                .collect();
            let got: BTreeSet<String> = sel.concept.into_iter().collect();
            assert_eq!(got, marked, "{split}");
        }
    }

    #[test]
    fn concept_equal_total_means_concept_is_kept() {
        let cfg = BuildConfig {
            concept_relation_count: 2,
            total_relation_count: 2,
            ..Default::default()
        };
        let sel = select_relations(
            &[stat("a", 10, 1), stat("b", 5, 5), stat("c", 3, 1)],
            &cfg,
            &RelationOverrides::default(),
        )
        .unwrap();
        let concept: BTreeSet<_> = sel.concept.iter().cloned().collect();
        assert_eq!(concept, sel.kept);
    }

    #[test]
    fn ties_break_by_id() {
        let cfg = BuildConfig {
            concept_relation_count: 1,
            total_relation_count: 1,
            ..Default::default()
        };
        let stats = [stat("zeta", 4, 2), stat("alpha", 2, 4), stat("none", 0, 0)];
        let a = select_relations(&stats, &cfg, &RelationOverrides::default()).unwrap();
        let b = select_relations(&stats, &cfg, &RelationOverrides::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.concept, vec!["alpha"]);
        assert_eq!(a.ordered.len(), 2);
    }

    #[test]
    fn unknown_override_is_an_error() {
        let cfg = BuildConfig {
            concept_relation_count: 1,
            total_relation_count: 1,
            ..Default::default()
        };
        let overrides = RelationOverrides {
            kept: Some(vec!["nope".into()]),
            concept: None,
        };
        let err = select_relations(&[stat("a", 1, 1)], &cfg, &overrides).unwrap_err();
        assert!(matches!(err, BuildError::UnknownRelation(r) if r == "nope"));
    }

    #[test]
    fn minority_side_is_collected() {
        let s = |x: &str| x.to_owned();
        let mut vertices: Vec<(String, String)> =
            (0..20).map(|i| (format!("h{i}"), format!("h{i}"))).collect();
        vertices.push((s("t0"), s("t0")));
        vertices.push((s("t1"), s("t1")));
        let triples: Vec<_> = (0..20)
            .map(|i| (format!("h{i}"), s("r"), format!("t{}", i % 2)))
            .collect();
        let g = KnowledgeGraph::from_ids(vertices, vec![(s("r"), s("r"))], triples).unwrap();
        let c = concept_vertices(&g, &["r"]);
        assert_eq!(c, ["t0", "t1"].iter().map(|x| x.to_string()).collect());
        assert!(concept_vertices::<&str>(&g, &[]).is_empty());
    }

    #[test]
    fn config_validation_lists_problems() {
        let cfg = BuildConfig {
            concept_relation_count: 3,
            total_relation_count: 2,
            target_mention_split: 1.0,
            ..Default::default()
        };
        assert_eq!(cfg.problems().len(), 2);
    }
}
