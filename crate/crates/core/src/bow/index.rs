use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::BowError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DocKind {
    Context,
    Mention,
    Vertex,
}

impl DocKind {
    fn code(self) -> u8 {
        match self {
            DocKind::Context => 0,
            DocKind::Mention => 1,
            DocKind::Vertex => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(DocKind::Context),
            1 => Some(DocKind::Mention),
            2 => Some(DocKind::Vertex),
            _ => None,
        }
    }
}

/// A bag of tokens with the id of what it stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub kind: DocKind,
    pub payload: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// `ln(1 + (N − n + 0.5)/(n + 0.5))`.
pub fn idf(doc_count: usize, doc_freq: usize) -> f64 {
    let (n_docs, n) = (doc_count as f64, doc_freq as f64);
    (1.0 + (n_docs - n + 0.5) / (n + 0.5)).ln()
}

/// Saturating term-frequency part of BM25.
pub fn tf_part(tf: f64, doc_len: f64, avg_len: f64, params: Bm25Params) -> f64 {
    let norm = if avg_len > 0.0 { doc_len / avg_len } else { 0.0 };
    tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    params: Bm25Params,
    postings: HashMap<String, Vec<(u32, u32)>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    kinds: Vec<DocKind>,
    payloads: Vec<String>,
}

impl InvertedIndex {
    pub fn build(docs: &[Document], params: Bm25Params) -> Self {
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            let mut tf: HashMap<&str, u32> = HashMap::new();
            for t in &d.tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (t, n) in tf {
                postings.entry(t.to_owned()).or_default().push((i as u32, n));
            }
            doc_lengths.push(d.tokens.len() as u32);
        }
        for list in postings.values_mut() {
            list.sort_unstable();
        }
        let avg_doc_length = if docs.is_empty() {
            0.0
        } else {
            doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / docs.len() as f64
        };
        Self {
            params,
            postings,
            doc_lengths,
            avg_doc_length,
            kinds: docs.iter().map(|d| d.kind).collect(),
            payloads: docs.iter().map(|d| d.payload.clone()).collect(),
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, doc: usize) -> usize {
        self.doc_lengths[doc] as usize
    }

    pub fn kind(&self, doc: usize) -> DocKind {
        self.kinds[doc]
    }

    pub fn payload(&self, doc: usize) -> &str {
        &self.payloads[doc]
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(self.doc_count(), self.doc_freq(term))
    }

    /// Distinct query terms in sorted order; repeated terms count once.
    fn terms(query: &[String]) -> BTreeSet<&str> {
        query.iter().map(String::as_str).collect()
    }

    /// BM25 of one document.
    pub fn score(&self, query: &[String], doc: usize) -> f64 {
        let mut s = 0.0;
        for t in Self::terms(query) {
            let Some(list) = self.postings.get(t) else {
                continue;
            };
            if let Ok(i) = list.binary_search_by_key(&(doc as u32), |p| p.0) {
                s += self.term_score(t, list[i].1, doc);
            }
        }
        s
    }

    fn term_score(&self, term: &str, tf: u32, doc: usize) -> f64 {
        self.idf(term)
            * tf_part(
                tf as f64,
                self.doc_lengths[doc] as f64,
                self.avg_doc_length,
                self.params,
            )
    }

    /// BM25 of every document, accumulated over postings.
    pub fn score_all(&self, query: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.doc_count()];
        for t in Self::terms(query) {
            let Some(list) = self.postings.get(t) else {
                continue;
            };
            for &(d, tf) in list {
                scores[d as usize] += self.term_score(t, tf, d as usize);
            }
        }
        scores
    }

    /// Up to `top_n` documents with a positive score, best first, ties by id.
    pub fn search(&self, query: &[String], top_n: usize) -> Vec<(usize, f64)> {
        let mut hits: Vec<(usize, f64)> = self
            .score_all(query)
            .into_iter()
            .enumerate()
            .filter(|(_, s)| *s > 0.0)
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        hits.truncate(top_n);
        hits
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<(), BowError> {
        w.write_all(b"OLBM")?;
        w.write_u32::<LittleEndian>(1)?;
        w.write_f64::<LittleEndian>(self.params.k1)?;
        w.write_f64::<LittleEndian>(self.params.b)?;
        w.write_u32::<LittleEndian>(self.doc_count() as u32)?;
        for i in 0..self.doc_count() {
            w.write_u8(self.kinds[i].code())?;
            w.write_u32::<LittleEndian>(self.doc_lengths[i])?;
            write_str(w, &self.payloads[i])?;
        }
        let mut terms: Vec<&String> = self.postings.keys().collect();
        terms.sort();
        w.write_u32::<LittleEndian>(terms.len() as u32)?;
        for t in terms {
            write_str(w, t)?;
            let list = &self.postings[t];
            w.write_u32::<LittleEndian>(list.len() as u32)?;
            for &(d, tf) in list {
                w.write_u32::<LittleEndian>(d)?;
                w.write_u32::<LittleEndian>(tf)?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self, BowError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"OLBM" || r.read_u32::<LittleEndian>()? != 1 {
            return Err(BowError::Format("not a BM25 index".into()));
        }
        let params = Bm25Params {
            k1: r.read_f64::<LittleEndian>()?,
            b: r.read_f64::<LittleEndian>()?,
        };
        let n = r.read_u32::<LittleEndian>()? as usize;
        let (mut kinds, mut doc_lengths, mut payloads) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            let kind = DocKind::from_code(r.read_u8()?)
                .ok_or_else(|| BowError::Format("bad document kind".into()))?;
            kinds.push(kind);
            doc_lengths.push(r.read_u32::<LittleEndian>()?);
            payloads.push(read_str(r)?);
        }
        let terms = r.read_u32::<LittleEndian>()? as usize;
        let mut postings = HashMap::with_capacity(terms);
        for _ in 0..terms {
            let t = read_str(r)?;
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let d = r.read_u32::<LittleEndian>()?;
                let tf = r.read_u32::<LittleEndian>()?;
                if d as usize >= n {
                    return Err(BowError::Format(format!("posting for unknown document {d}")));
                }
                list.push((d, tf));
            }
            postings.insert(t, list);
        }
        let avg_doc_length = if n == 0 {
            0.0
        } else {
            doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / n as f64
        };
        Ok(Self {
            params,
            postings,
            doc_lengths,
            avg_doc_length,
            kinds,
            payloads,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BowError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BowError> {
        Self::read(&mut BufReader::new(File::open(path)?))
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String, BowError> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| BowError::Format(e.to_string()))
}

/// BM25 of `doc` for `query` under the index statistics.
pub fn bm25_score(index: &InvertedIndex, query: &[String], doc: usize) -> f64 {
    index.score(query, doc)
}
