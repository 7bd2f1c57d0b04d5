use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;

use super::BuildError;
use crate::bundle::{ContextRecord, ContextStore, MentionMap};

/// One sentence in which `mention_surface` refers to `vertex`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestionRecord {
    pub vertex: String,
    pub mention_surface: String,
    pub sentence: String,
    pub origin: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HarvestReport {
    pub records: usize,
    /// Sentence does not contain the surface (case-insensitive).
    pub surface_not_found: usize,
    /// Empty fields or embedded tabs/line breaks.
    pub malformed: usize,
    pub dropped_mentions: usize,
    pub dropped_contexts: usize,
}

#[derive(Debug, Clone)]
pub struct Harvest {
    pub mentions: MentionMap,
    pub contexts: ContextStore,
    pub report: HarvestReport,
}

fn clean(s: &str) -> bool {
    !s.trim().is_empty() && !s.contains(['\t', '\n', '\r'])
}

/// Groups records into mentions keyed by (vertex, lowercased surface).
///
/// Mention ids are `<vertex>#<n>` where `n` numbers the vertex's distinct
/// folded surfaces in sorted order. The displayed surface is the most
/// frequent original spelling, ties going to the smallest string. Mentions
/// with fewer than `mention_threshold` contexts are dropped with their
/// contexts.
pub fn harvest<I>(records: I, mention_threshold: usize) -> Harvest
where
    I: IntoIterator<Item = IngestionRecord>,
{
    let mut report = HarvestReport::default();
    // (vertex, folded surface) -> (spelling counts, contexts)
    type Entry = (BTreeMap<String, usize>, Vec<(String, String)>);
    let mut groups: BTreeMap<(String, String), Entry> = BTreeMap::new();

    for r in records {
        report.records += 1;
        if !clean(&r.vertex) || !clean(&r.mention_surface) || !clean(&r.sentence) {
            report.malformed += 1;
            continue;
        }
        if r.origin.contains(['\t', '\n', '\r']) {
            report.malformed += 1;
            continue;
        }
        let folded = r.mention_surface.to_lowercase();
        if !r.sentence.to_lowercase().contains(&folded) {
            report.surface_not_found += 1;
            continue;
        }
        let entry = groups.entry((r.vertex, folded)).or_default();
        *entry.0.entry(r.mention_surface).or_default() += 1;
        entry.1.push((r.origin, r.sentence));
    }

    let mut mentions = MentionMap::new();
    let mut contexts = Vec::new();
    let mut per_vertex: HashMap<String, usize> = HashMap::new();
    for ((vertex, _), (spellings, ctx)) in groups {
        let n = per_vertex.entry(vertex.clone()).or_default();
        let id = format!("{vertex}#{n}");
        *n += 1;
        if ctx.len() < mention_threshold {
            report.dropped_mentions += 1;
            report.dropped_contexts += ctx.len();
            continue;
        }
        let surface = spellings
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(s, _)| s.clone())
            .expect("at least one spelling");
        mentions.insert(id.clone(), vertex, surface);
        contexts.extend(ctx.into_iter().map(|(origin, sentence)| ContextRecord {
            mention: id.clone(),
            origin,
            sentence,
        }));
    }

    Harvest {
        mentions,
        contexts: ContextStore::new(contexts),
        report,
    }
}

/// Reads `vertex_id<TAB>surface<TAB>origin<TAB>sentence` lines (`.gz` aware).
pub fn read_ingestion(path: impl AsRef<Path>) -> Result<Vec<IngestionRecord>, BuildError> {
    let path = path.as_ref();
    let fail = |message: String| BuildError::Ingestion {
        path: path.display().to_string(),
        message,
    };
    let file = File::open(path).map_err(|e| fail(e.to_string()))?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| fail(e.to_string()))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(fail(format!(
                "line {}: expected 4 tab-separated fields, found {}",
                i + 1,
                f.len()
            )));
        }
        out.push(IngestionRecord {
            vertex: f[0].to_owned(),
            mention_surface: f[1].to_owned(),
            origin: f[2].to_owned(),
            sentence: f[3].to_owned(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(v: &str, s: &str, sentence: &str) -> IngestionRecord {
        IngestionRecord {
            vertex: v.into(),
            mention_surface: s.into(),
            sentence: sentence.into(),
            origin: "page".into(),
        }
    }

    #[test]
    fn case_variants_collapse_into_one_mention() {
        let h = harvest(
            vec![
                rec("Q1", "Fargo", "Fargo is a film"),
                rec("Q1", "fargo", "they shot fargo in winter"),
                rec("Q1", "Fargo", "set in Fargo, North Dakota"),
            ],
            1,
        );
        assert_eq!(h.mentions.len(), 1);
        let (id, m) = h.mentions.iter().next().unwrap();
        assert_eq!(m.surface, "Fargo");
        assert_eq!(h.contexts.of_mention(id).len(), 3);
    }

    #[test]
    fn same_surface_under_two_vertices_gives_two_ids() {
        let h = harvest(
            vec![
                rec("Q1", "the film", "the film opened"),
                rec("Q2", "the film", "the film closed"),
            ],
            1,
        );
        assert_eq!(h.mentions.len(), 2);
    }

    #[test]
    fn under_threshold_mentions_are_dropped() {
        let records: Vec<_> = (0..4)
            .map(|i| rec("Q1", "x", &format!("x number {i}")))
            .collect();
        let h = harvest(records, 5);
        assert!(h.mentions.is_empty());
        assert!(h.contexts.is_empty());
        assert_eq!(h.report.dropped_mentions, 1);
        assert_eq!(h.report.dropped_contexts, 4);
    }

    #[test]
    fn missing_surface_is_counted_and_skipped() {
        let h = harvest(vec![rec("Q1", "Oslo", "Bergen is rainy")], 0);
        assert!(h.mentions.is_empty());
        assert_eq!(h.report.surface_not_found, 1);
    }

    #[test]
    fn empty_stream_gives_empty_output() {
        let h = harvest(Vec::new(), 5);
        assert!(h.mentions.is_empty() && h.contexts.is_empty());
        assert_eq!(h.report, HarvestReport::default());
    }
}
