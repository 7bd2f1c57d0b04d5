//! Mentions, text contexts, task triples and the dataset bundle tying them to
//! a closed-world graph.

mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub use self::io::{load_bundle, load_graph, save_bundle, save_graph, SaveOptions, GRAPH_TRIPLES};
use crate::graph::{Direction, KnowledgeGraph};

/// Where a record came from on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub file: String,
    pub line: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Malformed,
    Dangling,
    Duplicate,
    Invariant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: Option<Location>,
    pub message: String,
}

impl Violation {
    fn new(kind: ViolationKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            location: None,
            message: message.into(),
        }
    }

    fn at(mut self, location: Location) -> Self {
        self.location = Some(location);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Some(loc) => write!(f, "{loc}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn list_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} invalid record(s):\n{}", violations.len(), list_violations(violations))]
    Invalid { violations: Vec<Violation> },
}

impl BundleError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            BundleError::Invalid { violations } => violations,
            _ => &[],
        }
    }
}

/// A surface string attached to exactly one vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub vertex: String,
    pub surface: String,
}

/// Mention id → (vertex, surface). Mention ids are vertex-scoped.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MentionMap {
    mentions: BTreeMap<String, Mention>,
}

impl MentionMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a mention; returns `false` if the id was already present.
    pub fn insert(
        &mut self,
        id: impl Into<String>,
        vertex: impl Into<String>,
        surface: impl Into<String>,
    ) -> bool {
        let id = id.into();
        if self.mentions.contains_key(&id) {
            return false;
        }
        self.mentions.insert(
            id,
            Mention {
                vertex: vertex.into(),
                surface: surface.into(),
            },
        );
        true
    }

    pub fn get(&self, id: &str) -> Option<&Mention> {
        self.mentions.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.mentions.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.mentions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mentions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mention)> {
        self.mentions.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.mentions.keys().map(String::as_str)
    }

    /// Vertex → sorted mention ids.
    pub fn by_vertex(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (id, m) in &self.mentions {
            out.entry(m.vertex.as_str()).or_default().push(id.as_str());
        }
        out
    }
}

/// Position of a context record within its store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContextId(pub u32);

impl ContextId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ContextId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ContextRecord {
    pub mention: String,
    pub origin: String,
    pub sentence: String,
}

/// Sentences in which mentions occur, kept in canonical (sorted) order.
#[derive(Debug, Clone, Default)]
pub struct ContextStore {
    records: Vec<ContextRecord>,
    by_mention: HashMap<String, Vec<ContextId>>,
}

impl PartialEq for ContextStore {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl Eq for ContextStore {}

impl ContextStore {
    pub fn new(mut records: Vec<ContextRecord>) -> Self {
        records.sort();
        let mut by_mention: HashMap<String, Vec<ContextId>> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            by_mention
                .entry(r.mention.clone())
                .or_default()
                .push(ContextId(i as u32));
        }
        Self {
            records,
            by_mention,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: ContextId) -> &ContextRecord {
        &self.records[id.index()]
    }

    pub fn records(&self) -> &[ContextRecord] {
        &self.records
    }

    pub fn ids(&self) -> impl Iterator<Item = ContextId> {
        (0..self.records.len() as u32).map(ContextId)
    }

    /// Contexts of one mention in store order.
    pub fn of_mention(&self, mention: &str) -> &[ContextId] {
        self.by_mention
            .get(mention)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Ground-truth unit shared by ranking and linking.
///
/// With `Direction::Tail` the mention's entity is the head of the underlying
/// triple `(mention, relation, vertex)`; with `Direction::Head` it is the tail
/// of `(vertex, relation, mention)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskTriple {
    pub mention: String,
    pub relation: String,
    pub vertex: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SplitName {
    Closed,
    Validation,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Closed => "closed",
            SplitName::Validation => "open-validation",
            SplitName::Test => "open-test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "closed" => Some(SplitName::Closed),
            "open-validation" | "validation" => Some(SplitName::Validation),
            "open-test" | "test" => Some(SplitName::Test),
            _ => None,
        }
    }

    /// Key used for a context in external encoding files, e.g. `open-test/17`.
    pub fn context_key(self, id: ContextId) -> String {
        format!("{}/{}", self.as_str(), id.0)
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Open-world mentions, their query corpus and the derived task triples.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OpenSplit {
    pub mentions: MentionMap,
    pub contexts: ContextStore,
    pub tasks: BTreeSet<TaskTriple>,
}

/// Closed-world graph plus its mentions and training text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClosedWorld {
    /// The full vertex catalog, all kept relations and the closed triples.
    pub graph: KnowledgeGraph,
    pub mentions: MentionMap,
    pub contexts: ContextStore,
}

/// A complete benchmark: closed world plus validation and test splits.
///
/// Immutable after construction; every constructor path validates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetBundle {
    closed: ClosedWorld,
    validation: OpenSplit,
    test: OpenSplit,
    closed_graph: KnowledgeGraph,
}

impl DatasetBundle {
    pub fn new(
        closed: ClosedWorld,
        validation: OpenSplit,
        test: OpenSplit,
    ) -> Result<Self, BundleError> {
        let violations = validate(&closed, &validation, &test);
        if !violations.is_empty() {
            return Err(BundleError::Invalid { violations });
        }
        let closed_graph = closed.graph.induced(&closed_vertex_set(&closed));
        Ok(Self {
            closed,
            validation,
            test,
            closed_graph,
        })
    }

    pub fn closed(&self) -> &ClosedWorld {
        &self.closed
    }

    pub fn validation(&self) -> &OpenSplit {
        &self.validation
    }

    pub fn test(&self) -> &OpenSplit {
        &self.test
    }

    pub fn open_split(&self, name: SplitName) -> Option<&OpenSplit> {
        match name {
            SplitName::Closed => None,
            SplitName::Validation => Some(&self.validation),
            SplitName::Test => Some(&self.test),
        }
    }

    /// G^c restricted to closed-world vertices, re-indexed densely.
    ///
    /// A vertex is closed-world when it has a closed mention or takes part in
    /// a closed triple. All embedding models bind to this graph.
    pub fn closed_graph(&self) -> &KnowledgeGraph {
        &self.closed_graph
    }

    /// Closed mentions grouped by their index in [`Self::closed_graph`].
    pub fn closed_mentions_by_vertex(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.closed_graph.vertex_count()];
        for (id, m) in self.closed.mentions.iter() {
            if let Some(v) = self.closed_graph.vertices().index_of(&m.vertex) {
                out[v].push(id);
            }
        }
        out
    }

    pub fn into_parts(self) -> (ClosedWorld, OpenSplit, OpenSplit) {
        (self.closed, self.validation, self.test)
    }
}

fn closed_vertex_set(closed: &ClosedWorld) -> BTreeSet<usize> {
    let vertices = closed.graph.vertices();
    let mut set: BTreeSet<usize> = closed
        .mentions
        .iter()
        .filter_map(|(_, m)| vertices.index_of(&m.vertex))
        .collect();
    for t in closed.graph.triples() {
        set.insert(t.head);
        set.insert(t.tail);
    }
    set
}

fn single_line(s: &str) -> bool {
    !s.contains(['\n', '\r', '\t'])
}

fn check_field(out: &mut Vec<Violation>, what: &str, value: &str) {
    if !single_line(value) {
        out.push(Violation::new(
            ViolationKind::Malformed,
            format!("{what} {value:?} contains a tab or line break"),
        ));
    }
}

/// Enumerates every invariant violation across the three parts.
pub(crate) fn validate(
    closed: &ClosedWorld,
    validation: &OpenSplit,
    test: &OpenSplit,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let graph = &closed.graph;
    for (id, label) in graph.vertices().iter().chain(graph.relations().iter()) {
        check_field(&mut out, "id", id);
        check_field(&mut out, "label", label);
    }

    let check_mentions = |out: &mut Vec<Violation>, split: SplitName, mentions: &MentionMap| {
        for (id, m) in mentions.iter() {
            check_field(out, "mention id", id);
            check_field(out, "surface", &m.surface);
            if m.surface.is_empty() {
                out.push(Violation::new(
                    ViolationKind::Invariant,
                    format!("{split}: mention {id:?} has an empty surface"),
                ));
            }
            if !graph.vertices().contains(&m.vertex) {
                out.push(Violation::new(
                    ViolationKind::Dangling,
                    format!("{split}: mention {id:?} refers to unknown vertex {:?}", m.vertex),
                ));
            }
        }
    };
    let check_contexts =
        |out: &mut Vec<Violation>, split: SplitName, mentions: &MentionMap, store: &ContextStore| {
            for r in store.records() {
                if !mentions.contains(&r.mention) {
                    out.push(Violation::new(
                        ViolationKind::Dangling,
                        format!("{split}: context refers to unknown mention {:?}", r.mention),
                    ));
                }
                check_field(out, "origin", &r.origin);
                check_field(out, "sentence", &r.sentence);
                if r.sentence.trim().is_empty() {
                    out.push(Violation::new(
                        ViolationKind::Invariant,
                        format!("{split}: empty sentence for mention {:?}", r.mention),
                    ));
                }
            }
        };

    check_mentions(&mut out, SplitName::Closed, &closed.mentions);
    check_contexts(&mut out, SplitName::Closed, &closed.mentions, &closed.contexts);

    let closed_vertices: BTreeSet<&str> = closed_vertex_set(closed)
        .into_iter()
        .map(|i| graph.vertices().id(i))
        .collect();

    for (name, split) in [(SplitName::Validation, validation), (SplitName::Test, test)] {
        check_mentions(&mut out, name, &split.mentions);
        check_contexts(&mut out, name, &split.mentions, &split.contexts);
        for id in split.mentions.ids() {
            if closed.mentions.contains(id) {
                out.push(Violation::new(
                    ViolationKind::Invariant,
                    format!("{name}: mention {id:?} is also a closed-world mention"),
                ));
            }
        }
        for t in &split.tasks {
            if !split.mentions.contains(&t.mention) {
                out.push(Violation::new(
                    ViolationKind::Dangling,
                    format!("{name}: task refers to unknown open mention {:?}", t.mention),
                ));
            }
            if !graph.relations().contains(&t.relation) {
                out.push(Violation::new(
                    ViolationKind::Dangling,
                    format!("{name}: task refers to unknown relation {:?}", t.relation),
                ));
            }
            if !closed_vertices.contains(t.vertex.as_str()) {
                out.push(Violation::new(
                    ViolationKind::Invariant,
                    format!("{name}: task vertex {:?} is not a closed-world vertex", t.vertex),
                ));
            }
        }
    }
    for id in validation.mentions.ids() {
        if test.mentions.contains(id) {
            out.push(Violation::new(
                ViolationKind::Invariant,
                format!("mention {id:?} appears in both validation and test"),
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny() -> DatasetBundle {
        let s = |x: &str| x.to_owned();
        let graph = KnowledgeGraph::from_ids(
            vec![
                (s("a"), s("Alpha")),
                (s("b"), s("Beta")),
                (s("c"), s("Gamma")),
                (s("d"), s("Delta")),
            ],
            vec![(s("r"), s("rel r")), (s("q"), s("rel q"))],
            vec![(s("a"), s("r"), s("b")), (s("b"), s("q"), s("c"))],
        )
        .unwrap();
        let mut cm = MentionMap::new();
        cm.insert("a:alpha", "a", "alpha");
        cm.insert("b:beta", "b", "beta");
        cm.insert("c:gamma", "c", "gamma");
        let cc = ContextStore::new(vec![ContextRecord {
            mention: s("a:alpha"),
            origin: s("doc1"),
            sentence: s("the alpha thing"),
        }]);
        let mut om = MentionMap::new();
        om.insert("d:delta", "d", "delta");
        let oc = ContextStore::new(vec![ContextRecord {
            mention: s("d:delta"),
            origin: s("doc2"),
            sentence: s("delta is near beta"),
        }]);
        let tasks = [TaskTriple {
            mention: s("d:delta"),
            relation: s("r"),
            vertex: s("b"),
            direction: Direction::Tail,
        }]
        .into_iter()
        .collect();
        DatasetBundle::new(
            ClosedWorld {
                graph,
                mentions: cm,
                contexts: cc,
            },
            OpenSplit::default(),
            OpenSplit {
                mentions: om,
                contexts: oc,
                tasks,
            },
        )
        .unwrap()
    }

    #[test]
    fn closed_graph_excludes_open_only_vertices() {
        let b = tiny();
        assert_eq!(b.closed().graph.vertex_count(), 4);
        assert_eq!(b.closed_graph().vertex_count(), 3);
        assert!(!b.closed_graph().vertices().contains("d"));
    }

    #[test]
    fn overlapping_mentions_are_rejected() {
        let (closed, validation, mut test) = tiny().into_parts();
        test.mentions.insert("a:alpha", "a", "alpha");
        let err = DatasetBundle::new(closed, validation, test).unwrap_err();
        assert!(err
            .violations()
            .iter()
            .any(|v| v.message.contains("also a closed-world mention")));
    }

    #[test]
    fn task_vertex_must_be_closed() {
        let (closed, validation, mut test) = tiny().into_parts();
        test.tasks.insert(TaskTriple {
            mention: "d:delta".into(),
            relation: "r".into(),
            vertex: "d".into(),
            direction: Direction::Head,
        });
        let err = DatasetBundle::new(closed, validation, test).unwrap_err();
        assert_eq!(err.violations().len(), 1);
    }

    #[test]
    fn context_store_is_canonical() {
        let r = |m: &str, s: &str| ContextRecord {
            mention: m.into(),
            origin: "o".into(),
            sentence: s.into(),
        };
        let a = ContextStore::new(vec![r("m2", "x"), r("m1", "y"), r("m1", "a")]);
        let b = ContextStore::new(vec![r("m1", "a"), r("m2", "x"), r("m1", "y")]);
        assert_eq!(a, b);
        assert_eq!(a.of_mention("m1"), &[ContextId(0), ContextId(1)]);
    }
}
