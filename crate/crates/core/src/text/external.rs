use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::TextError;

/// Precomputed context vectors keyed by context key (`open-test/17`).
///
/// File format: a `count<TAB>d'` header followed by
/// `key<TAB>space-separated floats` rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExternalEncodings {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl ExternalEncodings {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn insert(&mut self, key: impl Into<String>, v: Vec<f64>) -> Result<(), TextError> {
        if v.len() != self.dim {
            return Err(TextError::Shape(format!("vector of {} for d' = {}", v.len(), self.dim)));
        }
        self.vectors.insert(key.into(), v);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn parse(text: &str) -> Result<Self, TextError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| TextError::Format("missing header".into()))?;
        let (count, dim) = header
            .split_once('\t')
            .and_then(|(c, d)| Some((c.trim().parse::<usize>().ok()?, d.trim().parse::<usize>().ok()?)))
            .ok_or_else(|| TextError::Format(format!("bad header {header:?}")))?;
        let mut out = Self::new(dim);
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (key, values) = line
                .split_once('\t')
                .ok_or_else(|| TextError::Format(format!("line {}: missing tab", i + 1)))?;
            let v: Vec<f64> = values
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| TextError::Format(format!("line {}: {e}", i + 1)))?;
            if v.len() != dim {
                return Err(TextError::Shape(format!(
                    "line {}: {} values, header says {dim}",
                    i + 1,
                    v.len()
                )));
            }
            out.vectors.insert(key.to_owned(), v);
        }
        if out.len() != count {
            return Err(TextError::Format(format!(
                "header announces {count} rows, found {}",
                out.len()
            )));
        }
        Ok(out)
    }

    pub fn render(&self) -> String {
        let mut s = format!("{}\t{}\n", self.len(), self.dim);
        for (k, v) in &self.vectors {
            s.push_str(k);
            s.push('\t');
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                write!(s, "{x}").expect("write to string");
            }
            s.push('\n');
        }
        s
    }

    pub fn import(path: impl AsRef<Path>) -> Result<Self, TextError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<(), TextError> {
        fs::write(path, self.render())?;
        Ok(())
    }
}
