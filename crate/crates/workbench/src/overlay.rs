//! Append-only log of accepted triples; retractions are tombstone entries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use openlink::graph::Direction;

use crate::WorkbenchError;

/// A mention linked to a closed-world vertex as if it were an entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OverlayTriple {
    pub mention: String,
    pub relation: String,
    pub vertex: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntryKind {
    Accept(OverlayTriple),
    Retract { target: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlayEntry {
    pub id: u64,
    pub kind: EntryKind,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub provenance: String,
}

const HEADER: &str = "# id\top\tmention|target\trelation\tvertex\tdirection\ttimestamp\tprovenance";

impl OverlayEntry {
    fn to_line(&self) -> String {
        let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
        match &self.kind {
            EntryKind::Accept(t) => format!(
                "{}\taccept\t{}\t{}\t{}\t{}\t{}\t{}",
                self.id,
                t.mention,
                t.relation,
                t.vertex,
                t.direction,
                self.timestamp,
                clean(&self.provenance)
            ),
            EntryKind::Retract { target } => format!(
                "{}\tretract\t{target}\t-\t-\t-\t{}\t{}",
                self.id,
                self.timestamp,
                clean(&self.provenance)
            ),
        }
    }

    fn parse(line: &str, lineno: usize) -> Result<Self, WorkbenchError> {
        let bad = |m: &str| WorkbenchError::Log(format!("line {lineno}: {m}"));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 8 {
            return Err(bad(&format!("expected 8 fields, found {}", f.len())));
        }
        let id = f[0].parse().map_err(|_| bad("bad id"))?;
        let timestamp = f[6].parse().map_err(|_| bad("bad timestamp"))?;
        let kind = match f[1] {
            "accept" => EntryKind::Accept(OverlayTriple {
                mention: f[2].to_owned(),
                relation: f[3].to_owned(),
                vertex: f[4].to_owned(),
                direction: Direction::parse(f[5]).ok_or_else(|| bad("bad direction"))?,
            }),
            "retract" => EntryKind::Retract {
                target: f[2].parse().map_err(|_| bad("bad target"))?,
            },
            other => return Err(bad(&format!("unknown op {other:?}"))),
        };
        Ok(Self {
            id,
            kind,
            timestamp,
            provenance: f[7].to_owned(),
        })
    }
}

/// Log plus the state obtained by replaying it in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overlay {
    entries: Vec<OverlayEntry>,
    active: BTreeMap<u64, OverlayTriple>,
    by_triple: BTreeMap<OverlayTriple, u64>,
    path: Option<PathBuf>,
}

/// Result of an accept: the entry id and whether it was newly appended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Accepted {
    pub id: u64,
    pub created: bool,
}

impl Overlay {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replays entries in order; a retraction must name an active accept.
    pub fn replay(entries: Vec<OverlayEntry>) -> Result<Self, WorkbenchError> {
        let mut o = Self::new();
        for e in entries {
            if o.entries.last().is_some_and(|l| e.id <= l.id) {
                return Err(WorkbenchError::Log(format!("entry ids not increasing at {}", e.id)));
            }
            o.apply(e)?;
        }
        Ok(o)
    }

    fn apply(&mut self, e: OverlayEntry) -> Result<(), WorkbenchError> {
        match &e.kind {
            EntryKind::Accept(t) => {
                self.active.insert(e.id, t.clone());
                self.by_triple.insert(t.clone(), e.id);
            }
            EntryKind::Retract { target } => {
                let t = self
                    .active
                    .remove(target)
                    .ok_or(WorkbenchError::UnknownTriple(*target))?;
                self.by_triple.remove(&t);
            }
        }
        self.entries.push(e);
        Ok(())
    }

    /// Opens (or creates) a persisted log and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, WorkbenchError> {
        let path = path.as_ref();
        let mut entries = Vec::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                entries.push(OverlayEntry::parse(&line, i + 1)?);
            }
        } else {
            std::fs::write(path, format!("{HEADER}\n"))?;
        }
        let mut o = Self::replay(entries)?;
        o.path = Some(path.to_owned());
        Ok(o)
    }

    pub fn entries(&self) -> &[OverlayEntry] {
        &self.entries
    }

    /// Active triples in acceptance order.
    pub fn active(&self) -> impl Iterator<Item = (u64, &OverlayTriple)> {
        self.active.iter().map(|(id, t)| (*id, t))
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    pub fn retracted_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e.kind, EntryKind::Retract { .. }))
            .count()
    }

    fn next_id(&self) -> u64 {
        self.entries.last().map_or(1, |e| e.id + 1)
    }

    fn append(&mut self, e: OverlayEntry) -> Result<(), WorkbenchError> {
        if let Some(p) = &self.path {
            let mut f = OpenOptions::new().append(true).open(p)?;
            writeln!(f, "{}", e.to_line())?;
        }
        self.apply(e)
    }

    /// Appends an accept unless the same triple is already active.
    pub fn accept(
        &mut self,
        triple: OverlayTriple,
        timestamp: u64,
        provenance: &str,
    ) -> Result<Accepted, WorkbenchError> {
        if let Some(&id) = self.by_triple.get(&triple) {
            return Ok(Accepted { id, created: false });
        }
        let id = self.next_id();
        self.append(OverlayEntry {
            id,
            kind: EntryKind::Accept(triple),
            timestamp,
            provenance: provenance.to_owned(),
        })?;
        Ok(Accepted { id, created: true })
    }

    /// Appends a tombstone for an active accept; returns the tombstone id.
    pub fn retract(&mut self, target: u64, timestamp: u64, provenance: &str) -> Result<u64, WorkbenchError> {
        if !self.active.contains_key(&target) {
            return Err(WorkbenchError::UnknownTriple(target));
        }
        let id = self.next_id();
        self.append(OverlayEntry {
            id,
            kind: EntryKind::Retract { target },
            timestamp,
            provenance: provenance.to_owned(),
        })?;
        Ok(id)
    }

    /// Active triples in the task-file layout, header first.
    pub fn export_tsv(&self) -> String {
        let mut s = String::from("# mention_id\trelation\tvertex\tdirection\n");
        for t in self.active.values() {
            writeln!(s, "{}\t{}\t{}\t{}", t.mention, t.relation, t.vertex, t.direction)
                .expect("write to string");
        }
        s
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<(), WorkbenchError> {
        std::fs::write(path, self.export_tsv())?;
        Ok(())
    }

    /// The whole log as written to disk.
    pub fn log_text(&self) -> String {
        let mut s = format!("{HEADER}\n");
        for e in &self.entries {
            s.push_str(&e.to_line());
            s.push('\n');
        }
        s
    }
}
