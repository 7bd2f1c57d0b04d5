//! Vertices, relations and triples.
//!
//! Ids are opaque strings. Internally every vertex and relation gets a dense
//! index equal to its position in id order, so sorting by index is the same
//! as sorting by id. Labels ride along but are never used as keys.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("triple index out of range: ({0}, {1}, {2})")]
    OutOfRange(usize, usize, usize),
    #[error("duplicate triple ({0}, {1}, {2})")]
    DuplicateTriple(String, String, String),
}

/// Sorted id → label table with a reverse lookup.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    ids: Vec<String>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids && self.labels == other.labels
    }
}

impl Eq for Catalog {}

impl Catalog {
    pub fn new<I, A, B>(entries: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut entries: Vec<(String, String)> = entries
            .into_iter()
            .map(|(a, b)| (a.into(), b.into()))
            .collect();
        entries.sort();
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(GraphError::DuplicateId(pair[0].0.clone()));
            }
        }
        let (ids, labels): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self { ids, labels, index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.ids
            .iter()
            .zip(&self.labels)
            .map(|(i, l)| (i.as_str(), l.as_str()))
    }

    /// Sub-catalog keeping the given indices; returns it with the old→new map.
    pub fn subset(&self, keep: &BTreeSet<usize>) -> (Catalog, HashMap<usize, usize>) {
        let mut remap = HashMap::with_capacity(keep.len());
        let mut ids = Vec::with_capacity(keep.len());
        let mut labels = Vec::with_capacity(keep.len());
        for (new, &old) in keep.iter().enumerate() {
            remap.insert(old, new);
            ids.push(self.ids[old].clone());
            labels.push(self.labels[old].clone());
        }
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        (Catalog { ids, labels, index }, remap)
    }
}

/// A triple over catalog indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

/// Which end of a triple is being predicted.
///
/// `Tail` means the known (or textual) entity sits in the head slot and the
/// tail is ranked; `Head` is the mirror image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Head,
    Tail,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Head => "head",
            Direction::Tail => "tail",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Direction::Head => Direction::Tail,
            Direction::Tail => Direction::Head,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "head" => Some(Direction::Head),
            "tail" => Some(Direction::Tail),
            _ => None,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KnowledgeGraph {
    vertices: Catalog,
    relations: Catalog,
    triples: Vec<Triple>,
}

impl KnowledgeGraph {
    /// Builds a graph from catalogs and index triples; triples are sorted.
    pub fn new(
        vertices: Catalog,
        relations: Catalog,
        mut triples: Vec<Triple>,
    ) -> Result<Self, GraphError> {
        for t in &triples {
            if t.head >= vertices.len() || t.tail >= vertices.len() || t.relation >= relations.len()
            {
                return Err(GraphError::OutOfRange(t.head, t.relation, t.tail));
            }
        }
        triples.sort_unstable();
        for pair in triples.windows(2) {
            if pair[0] == pair[1] {
                let t = pair[0];
                return Err(GraphError::DuplicateTriple(
                    vertices.id(t.head).to_owned(),
                    relations.id(t.relation).to_owned(),
                    vertices.id(t.tail).to_owned(),
                ));
            }
        }
        Ok(Self {
            vertices,
            relations,
            triples,
        })
    }

    /// Convenience constructor over string ids.
    pub fn from_ids<V, R, T>(vertices: V, relations: R, triples: T) -> Result<Self, GraphError>
    where
        V: IntoIterator<Item = (String, String)>,
        R: IntoIterator<Item = (String, String)>,
        T: IntoIterator<Item = (String, String, String)>,
    {
        let vertices = Catalog::new(vertices)?;
        let relations = Catalog::new(relations)?;
        let mut out = Vec::new();
        for (h, r, t) in triples {
            let head = vertices
                .index_of(&h)
                .ok_or_else(|| GraphError::UnknownVertex(h.clone()))?;
            let relation = relations
                .index_of(&r)
                .ok_or_else(|| GraphError::UnknownRelation(r.clone()))?;
            let tail = vertices
                .index_of(&t)
                .ok_or_else(|| GraphError::UnknownVertex(t.clone()))?;
            out.push(Triple::new(head, relation, tail));
        }
        Self::new(vertices, relations, out)
    }

    pub fn vertices(&self) -> &Catalog {
        &self.vertices
    }

    pub fn relations(&self) -> &Catalog {
        &self.relations
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.binary_search(triple).is_ok()
    }

    /// Keeps only the given vertices (and triples between them), re-indexed.
    pub fn induced(&self, keep: &BTreeSet<usize>) -> KnowledgeGraph {
        let (vertices, remap) = self.vertices.subset(keep);
        let mut triples: Vec<Triple> = self
            .triples
            .iter()
            .filter_map(|t| {
                Some(Triple::new(
                    *remap.get(&t.head)?,
                    t.relation,
                    *remap.get(&t.tail)?,
                ))
            })
            .collect();
        triples.sort_unstable();
        KnowledgeGraph {
            vertices,
            relations: self.relations.clone(),
            triples,
        }
    }

    /// Keeps only the named relations; unknown names are ignored.
    pub fn restrict_relations<S: AsRef<str>>(&self, keep: &[S]) -> KnowledgeGraph {
        let keep: BTreeSet<usize> = keep
            .iter()
            .filter_map(|r| self.relations.index_of(r.as_ref()))
            .collect();
        let (relations, remap) = self.relations.subset(&keep);
        let mut triples: Vec<Triple> = self
            .triples
            .iter()
            .filter_map(|t| Some(Triple::new(t.head, *remap.get(&t.relation)?, t.tail)))
            .collect();
        triples.sort_unstable();
        KnowledgeGraph {
            vertices: self.vertices.clone(),
            relations,
            triples,
        }
    }

    /// Keeps only triples for which `keep` holds.
    pub fn filter_triples(&self, keep: impl Fn(&Triple) -> bool) -> KnowledgeGraph {
        KnowledgeGraph {
            vertices: self.vertices.clone(),
            relations: self.relations.clone(),
            triples: self.triples.iter().copied().filter(|t| keep(t)).collect(),
        }
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::new(&self.triples)
    }

    /// Per-relation domain size, range size and triple count.
    pub fn stats(&self) -> Vec<RelationStats> {
        let mut heads = vec![BTreeSet::new(); self.relations.len()];
        let mut tails = vec![BTreeSet::new(); self.relations.len()];
        let mut counts = vec![0usize; self.relations.len()];
        for t in &self.triples {
            heads[t.relation].insert(t.head);
            tails[t.relation].insert(t.tail);
            counts[t.relation] += 1;
        }
        (0..self.relations.len())
            .map(|r| RelationStats {
                relation: self.relations.id(r).to_owned(),
                domain: heads[r].len(),
                range: tails[r].len(),
                triples: counts[r],
            })
            .collect()
    }
}

/// dom(r), rg(r) and |T_r| for one relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationStats {
    pub relation: String,
    pub domain: usize,
    pub range: usize,
    pub triples: usize,
}

/// Lookup of (head, relation) → tails and (relation, tail) → heads.
#[derive(Debug, Clone, Default)]
pub struct Adjacency {
    tails: HashMap<(usize, usize), Vec<usize>>,
    heads: HashMap<(usize, usize), Vec<usize>>,
    by_vertex: HashMap<usize, Vec<Triple>>,
}

impl Adjacency {
    pub fn new(triples: &[Triple]) -> Self {
        let mut adj = Adjacency::default();
        for t in triples {
            adj.tails.entry((t.head, t.relation)).or_default().push(t.tail);
            adj.heads.entry((t.relation, t.tail)).or_default().push(t.head);
            adj.by_vertex.entry(t.head).or_default().push(*t);
            if t.tail != t.head {
                adj.by_vertex.entry(t.tail).or_default().push(*t);
            }
        }
        for list in adj.tails.values_mut().chain(adj.heads.values_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    pub fn tails(&self, head: usize, relation: usize) -> &[usize] {
        self.tails
            .get(&(head, relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn heads(&self, relation: usize, tail: usize) -> &[usize] {
        self.heads
            .get(&(relation, tail))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Vertices completing a partial triple around `known`.
    ///
    /// `Tail` returns the tails of `(known, r, ·)`, `Head` the heads of
    /// `(·, r, known)`.
    pub fn complete(&self, known: usize, relation: usize, direction: Direction) -> &[usize] {
        match direction {
            Direction::Tail => self.tails(known, relation),
            Direction::Head => self.heads(relation, known),
        }
    }

    /// All triples touching the vertex, in insertion order.
    pub fn incident(&self, vertex: usize) -> &[Triple] {
        self.by_vertex
            .get(&vertex)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> String {
        x.to_owned()
    }

    fn graph(triples: &[(&str, &str, &str)]) -> KnowledgeGraph {
        let mut vs = BTreeSet::new();
        let mut rs = BTreeSet::new();
        for (h, r, t) in triples {
            vs.insert(*h);
            vs.insert(*t);
            rs.insert(*r);
        }
        KnowledgeGraph::from_ids(
            vs.iter().map(|v| (s(v), s(v))),
            rs.iter().map(|r| (s(r), s(r))),
            triples.iter().map(|(h, r, t)| (s(h), s(r), s(t))),
        )
        .unwrap()
    }

    #[test]
    fn stats_count_distinct_heads_and_tails() {
        let g = graph(&[("a", "r", "x"), ("b", "r", "x")]);
        let st = g.stats();
        assert_eq!(st.len(), 1);
        assert_eq!((st[0].domain, st[0].range, st[0].triples), (2, 1, 2));
    }

    #[test]
    fn empty_relation_has_zero_stats() {
        let g = KnowledgeGraph::from_ids(
            vec![(s("a"), s("A"))],
            vec![(s("r"), s("R"))],
            Vec::<(String, String, String)>::new(),
        )
        .unwrap();
        let st = g.stats();
        assert_eq!((st[0].domain, st[0].range, st[0].triples), (0, 0, 0));
    }

    #[test]
    fn stats_sum_to_triple_count() {
        let g = graph(&[
            ("a", "r", "b"),
            ("b", "r", "c"),
            ("a", "q", "c"),
            ("c", "q", "a"),
            ("c", "p", "c"),
        ]);
        let total: usize = g.stats().iter().map(|s| s.triples).sum();
        assert_eq!(total, g.triples().len());
    }

    #[test]
    fn rejects_duplicates_and_dangling() {
        let err = KnowledgeGraph::from_ids(
            vec![(s("a"), s("A"))],
            vec![(s("r"), s("R"))],
            vec![(s("a"), s("r"), s("a")), (s("a"), s("r"), s("a"))],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::DuplicateTriple(..)));

        let err = KnowledgeGraph::from_ids(
            vec![(s("a"), s("A"))],
            vec![(s("r"), s("R"))],
            vec![(s("a"), s("r"), s("zz"))],
        )
        .unwrap_err();
        assert_eq!(err, GraphError::UnknownVertex(s("zz")));
        assert!(Catalog::new(vec![("a", "x"), ("a", "y")]).is_err());
    }

    #[test]
    fn induced_subgraph_reindexes() {
        let g = graph(&[("a", "r", "b"), ("b", "r", "c"), ("c", "r", "a")]);
        let keep: BTreeSet<usize> = [0, 1].into_iter().collect();
        let sub = g.induced(&keep);
        assert_eq!(sub.vertex_count(), 2);
        assert_eq!(sub.triples(), &[Triple::new(0, 0, 1)]);
    }

    #[test]
    fn adjacency_completes_both_directions() {
        let g = graph(&[("a", "r", "b"), ("a", "r", "c"), ("d", "r", "c")]);
        let adj = g.adjacency();
        let a = g.vertices().index_of("a").unwrap();
        let c = g.vertices().index_of("c").unwrap();
        assert_eq!(adj.complete(a, 0, Direction::Tail).len(), 2);
        assert_eq!(adj.complete(c, 0, Direction::Head).len(), 2);
    }
}
