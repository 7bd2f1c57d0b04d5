use std::fmt::Write as _;
use std::path::Path;

use super::{EvalError, Metrics, Rank};
use crate::bundle::SplitName;
use crate::config::{read_field, ConfigError, KvConfig, KvSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Ranking,
    Linking,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Ranking => "ranking",
            Task::Linking => "linking",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ranking" => Some(Task::Ranking),
            "linking" => Some(Task::Linking),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    /// Query-corpus contexts drawn per ranking query.
    pub subsample_ranking: usize,
    /// Contexts drawn per mention for linking.
    pub ctx_per_mention: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![1, 10, 100],
            subsample_ranking: 400_000,
            ctx_per_mention: 100,
            seed: 0,
        }
    }
}

impl KvSchema for EvalConfig {
    const KEYS: &'static [&'static str] = &["subsample_ranking", "ctx_per_mention", "seed"];

    fn apply(&mut self, kv: &KvConfig) -> Result<(), ConfigError> {
        read_field!(kv, "subsample_ranking", self.subsample_ranking);
        read_field!(kv, "ctx_per_mention", self.ctx_per_mention);
        read_field!(kv, "seed", self.seed);
        Ok(())
    }

    fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("subsample_ranking", self.subsample_ranking);
        kv.set("ctx_per_mention", self.ctx_per_mention);
        kv.set("seed", self.seed);
        kv
    }

    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.subsample_ranking == 0 {
            p.push("subsample_ranking must be positive".into());
        }
        if self.ctx_per_mention == 0 {
            p.push("ctx_per_mention must be positive".into());
        }
        p
    }
}

/// One task triple's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleRecord {
    /// `anchor<TAB>relation<TAB>direction`.
    pub query: String,
    pub target: String,
    pub rank: Rank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: Task,
    pub engine: String,
    pub split: SplitName,
    pub metrics: Metrics,
    pub queries: usize,
    pub config: EvalConfig,
    pub records: Vec<TripleRecord>,
}

impl EvalReport {
    /// One `key = value` line per field and metric.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            writeln!(s, "{k} = {v}").expect("write to string");
        };
        line("task", self.task.as_str().into());
        line("engine", self.engine.clone());
        line("split", self.split.as_str().into());
        line("seed", self.config.seed.to_string());
        line("subsample_ranking", self.config.subsample_ranking.to_string());
        line("ctx_per_mention", self.config.ctx_per_mention.to_string());
        line("queries", self.queries.to_string());
        line("triples", self.metrics.count.to_string());
        line("misses", self.metrics.misses.to_string());
        for (k, h) in &self.metrics.hits {
            line(&format!("hits@{k}"), format!("{h:.6}"));
        }
        line("mrr", format!("{:.6}", self.metrics.mrr));
        s
    }

    /// Per-triple TSV: anchor, relation, direction, target, rank, found.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("anchor\trelation\tdirection\ttarget\trank\tfound\n");
        for r in &self.records {
            let found = matches!(r.rank, Rank::Found(_));
            writeln!(s, "{}\t{}\t{}\t{}", r.query, r.target, r.rank.value(), found)
                .expect("write to string");
        }
        s
    }

    pub fn write(&self, report: impl AsRef<Path>, tsv: Option<&Path>) -> Result<(), EvalError> {
        std::fs::write(report, self.to_text())?;
        if let Some(p) = tsv {
            std::fs::write(p, self.to_tsv())?;
        }
        Ok(())
    }
}
