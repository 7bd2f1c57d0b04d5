//! Interactive discover-and-link workbench over a loaded bundle.
//!
//! The [`Workspace`] answers ranking and linking queries through the same
//! engines and per-query seeds as offline evaluation, and records accepted
//! triples in an append-only [`Overlay`]. [`router`] exposes it over HTTP
//! with a `{data, error}` JSON envelope.

mod api;
mod overlay;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/workbench.md")]
struct Guide;

use std::path::Path;
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use openlink::bow::{BowBaseline, BowError};
use openlink::builder::{stats_report, SplitStats};
use openlink::bundle::{DatasetBundle, SplitName};
use openlink::eval::{query_seed, Engine, EvalConfig, EvalError, NeuralEngine, Task};
use openlink::graph::Direction;
use serde::Serialize;
use thiserror::Error;

pub use self::api::{router, serve};
pub use self::overlay::{Accepted, EntryKind, Overlay, OverlayEntry, OverlayTriple};

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("unknown mention {0:?}")]
    UnknownMention(String),
    #[error("unknown engine {0:?} (expected neural or bow)")]
    UnknownEngine(String),
    #[error("engine {0} is not loaded in this workspace")]
    EngineUnavailable(&'static str),
    #[error("bad direction {0:?} (expected head or tail)")]
    BadDirection(String),
    #[error("bad split {0:?} (expected open-validation or open-test)")]
    BadSplit(String),
    #[error("mention {0:?} has no contexts")]
    NoContexts(String),
    #[error("no active overlay triple with id {0}")]
    UnknownTriple(u64),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("overlay log: {0}")]
    Log(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl WorkbenchError {
    /// Machine-readable error code carried in the response envelope.
    pub fn code(&self) -> &'static str {
        match self {
            WorkbenchError::UnknownVertex(_) => "unknown-vertex",
            WorkbenchError::UnknownRelation(_) => "unknown-relation",
            WorkbenchError::UnknownMention(_) => "unknown-mention",
            WorkbenchError::UnknownEngine(_) => "unknown-engine",
            WorkbenchError::EngineUnavailable(_) => "engine-unavailable",
            WorkbenchError::BadDirection(_) => "bad-direction",
            WorkbenchError::BadSplit(_) => "bad-split",
            WorkbenchError::NoContexts(_) => "no-contexts",
            WorkbenchError::UnknownTriple(_) => "unknown-triple",
            WorkbenchError::BadRequest(_) => "bad-request",
            WorkbenchError::Log(_) => "overlay-log",
            WorkbenchError::Eval(EvalError::NoContexts(_))
            | WorkbenchError::Eval(EvalError::Bow(BowError::NoContexts(_))) => "no-contexts",
            WorkbenchError::Eval(_) => "engine-error",
            WorkbenchError::Io(_) => "io-error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Neural,
    Bow,
}

impl EngineKind {
    pub fn parse(s: &str) -> Result<Self, WorkbenchError> {
        match s {
            "neural" => Ok(EngineKind::Neural),
            "bow" => Ok(EngineKind::Bow),
            _ => Err(WorkbenchError::UnknownEngine(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkspaceConfig {
    /// Open split explored by ranking queries.
    pub split: SplitName,
    /// Sampling settings shared with offline evaluation.
    pub eval: EvalConfig,
    pub default_limit: usize,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        Self {
            split: SplitName::Test,
            eval: EvalConfig::default(),
            default_limit: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Page<T> {
    pub total: usize,
    pub offset: usize,
    pub items: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextHit {
    pub context: u32,
    pub mention: String,
    pub sentence: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexHit {
    pub vertex: String,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingQuery {
    pub vertex: String,
    pub relation: String,
    pub direction: Direction,
    pub engine: Option<EngineKind>,
    pub split: Option<SplitName>,
    pub limit: Option<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkingQuery {
    pub mention: String,
    pub relation: String,
    pub direction: Direction,
    pub engine: Option<EngineKind>,
    pub limit: Option<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitView {
    pub mentions: usize,
    pub contexts: usize,
    pub task_triples: usize,
    pub ranking_queries: usize,
    pub linking_queries: usize,
}

impl From<SplitStats> for SplitView {
    fn from(s: SplitStats) -> Self {
        Self {
            mentions: s.mentions,
            contexts: s.contexts,
            task_triples: s.task_triples,
            ranking_queries: s.ranking_queries,
            linking_queries: s.linking_queries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsView {
    pub relations: usize,
    pub closed_vertices: usize,
    pub closed_mentions: usize,
    pub closed_triples: usize,
    pub closed_contexts: usize,
    pub validation: SplitView,
    pub test: SplitView,
    pub overlay_entries: usize,
    pub overlay_active: usize,
    pub overlay_retracted: usize,
    pub engines: Vec<EngineKind>,
}

/// A loaded bundle, its engines and the session overlay.
///
/// Reads share the overlay lock; accepts and retractions take it
/// exclusively, so mutations are applied one at a time in arrival order.
pub struct Workspace {
    bundle: DatasetBundle,
    neural: Option<NeuralEngine>,
    bow: Option<BowBaseline>,
    config: WorkspaceConfig,
    overlay: RwLock<Overlay>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl Workspace {
    pub fn new(
        bundle: DatasetBundle,
        neural: Option<NeuralEngine>,
        bow: Option<BowBaseline>,
        overlay: Overlay,
        config: WorkspaceConfig,
    ) -> Result<Self, WorkbenchError> {
        let ws = Self {
            bundle,
            neural,
            bow,
            config,
            overlay: RwLock::new(Overlay::new()),
        };
        for (_, t) in overlay.active() {
            ws.validate(t)?;
        }
        *ws.overlay.write().expect("fresh lock") = overlay;
        Ok(ws)
    }

    pub fn bundle(&self) -> &DatasetBundle {
        &self.bundle
    }

    pub fn config(&self) -> &WorkspaceConfig {
        &self.config
    }

    fn read_overlay(&self) -> std::sync::RwLockReadGuard<'_, Overlay> {
        self.overlay.read().unwrap_or_else(|e| e.into_inner())
    }

    fn engine(&self, kind: Option<EngineKind>) -> Result<&dyn Engine, WorkbenchError> {
        match kind {
            Some(EngineKind::Neural) => self
                .neural
                .as_ref()
                .map(|e| e as &dyn Engine)
                .ok_or(WorkbenchError::EngineUnavailable("neural")),
            Some(EngineKind::Bow) => self
                .bow
                .as_ref()
                .map(|e| e as &dyn Engine)
                .ok_or(WorkbenchError::EngineUnavailable("bow")),
            None => self
                .neural
                .as_ref()
                .map(|e| e as &dyn Engine)
                .or(self.bow.as_ref().map(|e| e as &dyn Engine))
                .ok_or(WorkbenchError::EngineUnavailable("any")),
        }
    }

    fn relation_index(&self, relation: &str) -> Result<usize, WorkbenchError> {
        self.bundle
            .closed_graph()
            .relations()
            .index_of(relation)
            .ok_or_else(|| WorkbenchError::UnknownRelation(relation.to_owned()))
    }

    fn vertex_index(&self, vertex: &str) -> Result<usize, WorkbenchError> {
        self.bundle
            .closed_graph()
            .vertices()
            .index_of(vertex)
            .ok_or_else(|| WorkbenchError::UnknownVertex(vertex.to_owned()))
    }

    /// The open split holding `mention`.
    pub fn mention_split(&self, mention: &str) -> Result<SplitName, WorkbenchError> {
        [SplitName::Validation, SplitName::Test]
            .into_iter()
            .find(|s| {
                self.bundle
                    .open_split(*s)
                    .is_some_and(|o| o.mentions.contains(mention))
            })
            .ok_or_else(|| WorkbenchError::UnknownMention(mention.to_owned()))
    }

    pub fn stats(&self) -> StatsView {
        let s = stats_report(&self.bundle);
        let o = self.read_overlay();
        let mut engines = Vec::new();
        if self.neural.is_some() {
            engines.push(EngineKind::Neural);
        }
        if self.bow.is_some() {
            engines.push(EngineKind::Bow);
        }
        StatsView {
            relations: s.relations,
            closed_vertices: s.closed_vertices,
            closed_mentions: s.closed_mentions,
            closed_triples: s.closed_triples,
            closed_contexts: s.closed_contexts,
            validation: s.validation.into(),
            test: s.test.into(),
            overlay_entries: o.entries().len(),
            overlay_active: o.active_count(),
            overlay_retracted: o.retracted_count(),
            engines,
        }
    }

    /// Contexts of the open split ranked for `(vertex, relation)`.
    pub fn query_ranking(&self, q: &RankingQuery) -> Result<Page<ContextHit>, WorkbenchError> {
        let v = self.vertex_index(&q.vertex)?;
        let r = self.relation_index(&q.relation)?;
        let engine = self.engine(q.engine)?;
        let split = q.split.unwrap_or(self.config.split);
        let seed = query_seed(self.config.eval.seed, Task::Ranking, &q.vertex, &q.relation, q.direction);
        let ranked = engine.rank_contexts(
            split,
            v,
            r,
            q.direction,
            self.config.eval.subsample_ranking,
            seed,
        )?;
        let store = &self
            .bundle
            .open_split(split)
            .ok_or_else(|| WorkbenchError::BadSplit(split.to_string()))?
            .contexts;
        let limit = q.limit.unwrap_or(self.config.default_limit);
        Ok(Page {
            total: ranked.len(),
            offset: q.offset,
            items: ranked
                .page(q.offset, limit)
                .iter()
                .map(|(c, score)| {
                    let rec = store.get(*c);
                    ContextHit {
                        context: c.0,
                        mention: rec.mention.clone(),
                        sentence: rec.sentence.clone(),
                        score: *score,
                    }
                })
                .collect(),
        })
    }

    /// Closed-world vertices suggested for `mention` under `relation`.
    pub fn query_linking(&self, q: &LinkingQuery) -> Result<Page<VertexHit>, WorkbenchError> {
        let split = self.mention_split(&q.mention)?;
        let r = self.relation_index(&q.relation)?;
        let engine = self.engine(q.engine)?;
        let open = self.bundle.open_split(split).expect("open split");
        if open.contexts.of_mention(&q.mention).is_empty() {
            return Err(WorkbenchError::NoContexts(q.mention.clone()));
        }
        let seed = query_seed(self.config.eval.seed, Task::Linking, &q.mention, &q.relation, q.direction);
        let ranked = engine.link(
            split,
            &q.mention,
            r,
            q.direction,
            self.config.eval.ctx_per_mention,
            seed,
        )?;
        let vertices = self.bundle.closed_graph().vertices();
        let limit = q.limit.unwrap_or(self.config.default_limit);
        Ok(Page {
            total: ranked.len(),
            offset: q.offset,
            items: ranked
                .page(q.offset, limit)
                .iter()
                .map(|(v, score)| VertexHit {
                    vertex: vertices.id(*v).to_owned(),
                    label: vertices.label(*v).to_owned(),
                    score: *score,
                })
                .collect(),
        })
    }

    fn validate(&self, t: &OverlayTriple) -> Result<(), WorkbenchError> {
        self.mention_split(&t.mention)?;
        self.relation_index(&t.relation)?;
        self.vertex_index(&t.vertex)?;
        Ok(())
    }

    /// Records `triple`; an exact duplicate of an active triple returns its id.
    pub fn accept_triple(
        &self,
        triple: OverlayTriple,
        provenance: &str,
    ) -> Result<Accepted, WorkbenchError> {
        self.validate(&triple)?;
        let mut o = self.overlay.write().unwrap_or_else(|e| e.into_inner());
        o.accept(triple, now(), provenance)
    }

    /// Appends a tombstone for an active triple; returns the tombstone id.
    pub fn retract_triple(&self, id: u64, provenance: &str) -> Result<u64, WorkbenchError> {
        let mut o = self.overlay.write().unwrap_or_else(|e| e.into_inner());
        o.retract(id, now(), provenance)
    }

    pub fn export_tsv(&self) -> String {
        self.read_overlay().export_tsv()
    }

    pub fn export_overlay(&self, path: impl AsRef<Path>) -> Result<(), WorkbenchError> {
        self.read_overlay().export(path)
    }

    /// Snapshot of the overlay log text.
    pub fn overlay_log(&self) -> String {
        self.read_overlay().log_text()
    }
}
