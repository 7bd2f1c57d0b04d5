//! Tab-separated on-disk layout of a [`DatasetBundle`].
//!
//! ```text
//! vertices.tsv                     id  label
//! relations.tsv                    id  label
//! triples.closed.tsv               head  relation  tail
//! mentions.{closed,open-validation,open-test}.tsv   mention_id  vertex_id  surface
//! contexts.{closed,open-validation,open-test}.tsv   mention_id  origin  sentence
//! tasks.{open-validation,open-test}.tsv             mention_id  relation  vertex  direction
//! ```
//!
//! Lines starting with `#` are comments. Context files may be gzipped
//! (`.tsv.gz`). Output is sorted by id so saving is byte-stable.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{
    BundleError, ClosedWorld, ContextRecord, ContextStore, DatasetBundle, Location, MentionMap,
    OpenSplit, SplitName, TaskTriple, Violation, ViolationKind,
};
use crate::graph::{Catalog, Direction, KnowledgeGraph, Triple};

const VERTICES: &str = "vertices.tsv";
const RELATIONS: &str = "relations.tsv";
const TRIPLES: &str = "triples.closed.tsv";

fn mentions_file(split: SplitName) -> String {
    format!("mentions.{split}.tsv")
}

fn contexts_file(split: SplitName) -> String {
    format!("contexts.{split}.tsv")
}

fn tasks_file(split: SplitName) -> String {
    format!("tasks.{split}.tsv")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SaveOptions {
    /// Write context files as `.tsv.gz`.
    pub compress_contexts: bool,
}

struct Row {
    location: Location,
    fields: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.to_owned(),
        source,
    }
}

fn open_table(dir: &Path, name: &str, allow_gz: bool) -> Result<(PathBuf, Box<dyn Read>), BundleError> {
    let plain = dir.join(name);
    if plain.is_file() {
        let f = File::open(&plain).map_err(io_err(&plain))?;
        return Ok((plain, Box::new(f)));
    }
    if allow_gz {
        let gz = dir.join(format!("{name}.gz"));
        if gz.is_file() {
            let f = File::open(&gz).map_err(io_err(&gz))?;
            return Ok((gz, Box::new(GzDecoder::new(f))));
        }
    }
    Err(BundleError::MissingFile(plain))
}

fn read_table(
    dir: &Path,
    name: &str,
    arity: usize,
    allow_gz: bool,
    violations: &mut Vec<Violation>,
) -> Result<Vec<Row>, BundleError> {
    let (path, reader) = open_table(dir, name, allow_gz)?;
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let location = Location {
            file: file.clone(),
            line: i + 1,
        };
        let fields: Vec<String> = line.split('\t').map(str::to_owned).collect();
        if fields.len() != arity {
            violations.push(
                Violation::new(
                    ViolationKind::Malformed,
                    format!("expected {arity} tab-separated fields, found {}", fields.len()),
                )
                .at(location),
            );
            continue;
        }
        rows.push(Row { location, fields });
    }
    Ok(rows)
}

fn read_catalog(
    dir: &Path,
    name: &str,
    violations: &mut Vec<Violation>,
) -> Result<Catalog, BundleError> {
    let rows = read_table(dir, name, 2, false, violations)?;
    let mut seen = HashMap::new();
    let mut entries = Vec::new();
    for row in rows {
        let [id, label]: [String; 2] = row.fields.try_into().expect("arity checked");
        if seen.insert(id.clone(), ()).is_some() {
            violations.push(
                Violation::new(ViolationKind::Duplicate, format!("duplicate id {id:?}"))
                    .at(row.location),
            );
            continue;
        }
        entries.push((id, label));
    }
    Ok(Catalog::new(entries).expect("duplicates filtered"))
}

type GraphParts = (Catalog, Catalog, Vec<Triple>);

fn read_graph(
    dir: &Path,
    triples_name: &str,
    violations: &mut Vec<Violation>,
) -> Result<GraphParts, BundleError> {
    let vertices = read_catalog(dir, VERTICES, violations)?;
    let relations = read_catalog(dir, RELATIONS, violations)?;

    let mut triples = Vec::new();
    let mut seen_triples = BTreeSet::new();
    for row in read_table(dir, triples_name, 3, false, violations)? {
        let (h, r, t) = (&row.fields[0], &row.fields[1], &row.fields[2]);
        let resolved = (
            vertices.index_of(h),
            relations.index_of(r),
            vertices.index_of(t),
        );
        match resolved {
            (Some(head), Some(relation), Some(tail)) => {
                let triple = Triple::new(head, relation, tail);
                if !seen_triples.insert(triple) {
                    violations.push(
                        Violation::new(
                            ViolationKind::Duplicate,
                            format!("duplicate triple ({h}, {r}, {t})"),
                        )
                        .at(row.location),
                    );
                } else {
                    triples.push(triple);
                }
            }
            _ => {
                let missing = if resolved.0.is_none() {
                    format!("unknown vertex {h:?}")
                } else if resolved.1.is_none() {
                    format!("unknown relation {r:?}")
                } else {
                    format!("unknown vertex {t:?}")
                };
                violations.push(Violation::new(ViolationKind::Dangling, missing).at(row.location));
            }
        }
    }
    Ok((vertices, relations, triples))
}

/// Triples file of a raw input graph directory.
pub const GRAPH_TRIPLES: &str = "triples.tsv";

/// Reads an input graph: `vertices.tsv`, `relations.tsv` and `triples.tsv`.
pub fn load_graph(dir: impl AsRef<Path>) -> Result<KnowledgeGraph, BundleError> {
    let dir = dir.as_ref();
    for name in [VERTICES, RELATIONS, GRAPH_TRIPLES] {
        if !dir.join(name).is_file() {
            return Err(BundleError::MissingFile(dir.join(name)));
        }
    }
    let mut violations = Vec::new();
    let (vertices, relations, triples) = read_graph(dir, GRAPH_TRIPLES, &mut violations)?;
    if !violations.is_empty() {
        return Err(BundleError::Invalid { violations });
    }
    Ok(KnowledgeGraph::new(vertices, relations, triples).expect("references checked"))
}

fn write_graph(graph: &KnowledgeGraph, dir: &Path, triples_name: &str) -> Result<(), BundleError> {
    for (name, catalog) in [(VERTICES, graph.vertices()), (RELATIONS, graph.relations())] {
        let mut w = TableWriter::create(dir, name, false, "# id\tlabel")?;
        for (id, label) in catalog.iter() {
            w.line(&[id, label])?;
        }
        w.finish()?;
    }
    let mut w = TableWriter::create(dir, triples_name, false, "# head\trelation\ttail")?;
    for t in graph.triples() {
        w.line(&[
            graph.vertices().id(t.head),
            graph.relations().id(t.relation),
            graph.vertices().id(t.tail),
        ])?;
    }
    w.finish()
}

/// Writes `graph` in the layout read by [`load_graph`].
pub fn save_graph(graph: &KnowledgeGraph, dir: impl AsRef<Path>) -> Result<(), BundleError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_graph(graph, dir, GRAPH_TRIPLES)
}

/// Reads and validates a bundle directory.
///
/// Every malformed line, dangling reference and duplicate is collected and
/// reported together with its file and line number.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<DatasetBundle, BundleError> {
    let dir = dir.as_ref();
    // Fail fast on missing files before parsing anything.
    for name in [VERTICES, RELATIONS, TRIPLES] {
        if !dir.join(name).is_file() {
            return Err(BundleError::MissingFile(dir.join(name)));
        }
    }
    for split in [SplitName::Closed, SplitName::Validation, SplitName::Test] {
        if !dir.join(mentions_file(split)).is_file() {
            return Err(BundleError::MissingFile(dir.join(mentions_file(split))));
        }
        let ctx = contexts_file(split);
        if !dir.join(&ctx).is_file() && !dir.join(format!("{ctx}.gz")).is_file() {
            return Err(BundleError::MissingFile(dir.join(ctx)));
        }
        if split != SplitName::Closed && !dir.join(tasks_file(split)).is_file() {
            return Err(BundleError::MissingFile(dir.join(tasks_file(split))));
        }
    }

    let mut violations = Vec::new();
    let (vertices, relations, triples) = read_graph(dir, TRIPLES, &mut violations)?;

    let mut all_mentions: HashMap<String, SplitName> = HashMap::new();
    let mut read_mentions = |split: SplitName,
                             violations: &mut Vec<Violation>|
     -> Result<MentionMap, BundleError> {
        let mut map = MentionMap::new();
        for row in read_table(dir, &mentions_file(split), 3, false, violations)? {
            let [id, vertex, surface]: [String; 3] = row.fields.try_into().expect("arity");
            if !vertices.contains(&vertex) {
                violations.push(
                    Violation::new(
                        ViolationKind::Dangling,
                        format!("mention {id:?} refers to unknown vertex {vertex:?}"),
                    )
                    .at(row.location),
                );
                continue;
            }
            if surface.is_empty() {
                violations.push(
                    Violation::new(
                        ViolationKind::Invariant,
                        format!("mention {id:?} has an empty surface"),
                    )
                    .at(row.location),
                );
                continue;
            }
            if let Some(other) = all_mentions.get(&id) {
                violations.push(
                    Violation::new(
                        ViolationKind::Duplicate,
                        format!("mention id {id:?} already defined in {other} split"),
                    )
                    .at(row.location),
                );
                continue;
            }
            all_mentions.insert(id.clone(), split);
            map.insert(id, vertex, surface);
        }
        Ok(map)
    };
    let closed_mentions = read_mentions(SplitName::Closed, &mut violations)?;
    let val_mentions = read_mentions(SplitName::Validation, &mut violations)?;
    let test_mentions = read_mentions(SplitName::Test, &mut violations)?;

    let read_contexts = |split: SplitName,
                         mentions: &MentionMap,
                         violations: &mut Vec<Violation>|
     -> Result<ContextStore, BundleError> {
        let mut records = Vec::new();
        for row in read_table(dir, &contexts_file(split), 3, true, violations)? {
            let [mention, origin, sentence]: [String; 3] = row.fields.try_into().expect("arity");
            if !mentions.contains(&mention) {
                violations.push(
                    Violation::new(
                        ViolationKind::Dangling,
                        format!("context refers to unknown mention {mention:?}"),
                    )
                    .at(row.location),
                );
                continue;
            }
            if sentence.trim().is_empty() {
                violations.push(
                    Violation::new(ViolationKind::Invariant, "empty sentence").at(row.location),
                );
                continue;
            }
            records.push(ContextRecord {
                mention,
                origin,
                sentence,
            });
        }
        Ok(ContextStore::new(records))
    };
    let closed_contexts = read_contexts(SplitName::Closed, &closed_mentions, &mut violations)?;
    let val_contexts = read_contexts(SplitName::Validation, &val_mentions, &mut violations)?;
    let test_contexts = read_contexts(SplitName::Test, &test_mentions, &mut violations)?;

    let read_tasks = |split: SplitName,
                      mentions: &MentionMap,
                      violations: &mut Vec<Violation>|
     -> Result<BTreeSet<TaskTriple>, BundleError> {
        let mut tasks = BTreeSet::new();
        for row in read_table(dir, &tasks_file(split), 4, false, violations)? {
            let [mention, relation, vertex, direction]: [String; 4] =
                row.fields.try_into().expect("arity");
            let problem = if !mentions.contains(&mention) {
                Some((ViolationKind::Dangling, format!("unknown open mention {mention:?}")))
            } else if !relations.contains(&relation) {
                Some((ViolationKind::Dangling, format!("unknown relation {relation:?}")))
            } else if !vertices.contains(&vertex) {
                Some((ViolationKind::Dangling, format!("unknown vertex {vertex:?}")))
            } else if Direction::parse(&direction).is_none() {
                Some((
                    ViolationKind::Malformed,
                    format!("direction must be head or tail, found {direction:?}"),
                ))
            } else {
                None
            };
            if let Some((kind, msg)) = problem {
                violations.push(Violation::new(kind, msg).at(row.location));
                continue;
            }
            let task = TaskTriple {
                mention,
                relation,
                vertex,
                direction: Direction::parse(&direction).expect("checked"),
            };
            if !tasks.insert(task) {
                violations.push(
                    Violation::new(ViolationKind::Duplicate, "duplicate task triple")
                        .at(row.location),
                );
            }
        }
        Ok(tasks)
    };
    let val_tasks = read_tasks(SplitName::Validation, &val_mentions, &mut violations)?;
    let test_tasks = read_tasks(SplitName::Test, &test_mentions, &mut violations)?;

    if !violations.is_empty() {
        return Err(BundleError::Invalid { violations });
    }

    let graph = KnowledgeGraph::new(vertices, relations, triples).expect("references checked");
    DatasetBundle::new(
        ClosedWorld {
            graph,
            mentions: closed_mentions,
            contexts: closed_contexts,
        },
        OpenSplit {
            mentions: val_mentions,
            contexts: val_contexts,
            tasks: val_tasks,
        },
        OpenSplit {
            mentions: test_mentions,
            contexts: test_contexts,
            tasks: test_tasks,
        },
    )
}

struct TableWriter {
    path: PathBuf,
    out: Box<dyn Write>,
}

impl TableWriter {
    fn create(dir: &Path, name: &str, gzip: bool, header: &str) -> Result<Self, BundleError> {
        let path = if gzip {
            dir.join(format!("{name}.gz"))
        } else {
            dir.join(name)
        };
        let file = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        let out: Box<dyn Write> = if gzip {
            Box::new(GzEncoder::new(file, Compression::default()))
        } else {
            Box::new(file)
        };
        let mut w = Self { path, out };
        w.line(&[header])?;
        Ok(w)
    }

    fn line(&mut self, fields: &[&str]) -> Result<(), BundleError> {
        let text = fields.join("\t");
        writeln!(self.out, "{text}").map_err(io_err(&self.path))
    }

    fn finish(mut self) -> Result<(), BundleError> {
        self.out.flush().map_err(io_err(&self.path))
    }
}

/// Writes a bundle in canonical order; `load_bundle` reproduces it exactly.
pub fn save_bundle(
    bundle: &DatasetBundle,
    dir: impl AsRef<Path>,
    options: SaveOptions,
) -> Result<(), BundleError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let closed = bundle.closed();
    let graph = &closed.graph;

    write_graph(graph, dir, TRIPLES)?;

    let splits = [
        (SplitName::Closed, &closed.mentions, &closed.contexts, None),
        (
            SplitName::Validation,
            &bundle.validation().mentions,
            &bundle.validation().contexts,
            Some(&bundle.validation().tasks),
        ),
        (
            SplitName::Test,
            &bundle.test().mentions,
            &bundle.test().contexts,
            Some(&bundle.test().tasks),
        ),
    ];
    for (split, mentions, contexts, tasks) in splits {
        // Stale variants of the other compression would shadow or confuse loads.
        let ctx = contexts_file(split);
        let stale = if options.compress_contexts {
            dir.join(&ctx)
        } else {
            dir.join(format!("{ctx}.gz"))
        };
        if stale.is_file() {
            fs::remove_file(&stale).map_err(io_err(&stale))?;
        }

        let mut w = TableWriter::create(
            dir,
            &mentions_file(split),
            false,
            "# mention_id\tvertex_id\tsurface",
        )?;
        for (id, m) in mentions.iter() {
            w.line(&[id, &m.vertex, &m.surface])?;
        }
        w.finish()?;

        let mut w = TableWriter::create(
            dir,
            &ctx,
            options.compress_contexts,
            "# mention_id\torigin\tsentence",
        )?;
        for r in contexts.records() {
            w.line(&[&r.mention, &r.origin, &r.sentence])?;
        }
        w.finish()?;

        if let Some(tasks) = tasks {
            let mut w = TableWriter::create(
                dir,
                &tasks_file(split),
                false,
                "# mention_id\trelation\tvertex\tdirection",
            )?;
            for t in tasks {
                w.line(&[&t.mention, &t.relation, &t.vertex, t.direction.as_str()])?;
            }
            w.finish()?;
        }
    }
    Ok(())
}
