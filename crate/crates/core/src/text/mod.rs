//! Context encoders and the affine map from text space into ℂ^d.

mod external;
mod vocab;

use ndarray::{Array1, Array2, ArrayView1};
use rand_distr::{Distribution, Normal};
use thiserror::Error;

pub use self::external::ExternalEncodings;
pub use self::vocab::{tokens, Vocabulary, MASK, MASK_ID, UNK, UNK_ID};
use crate::bundle::{ContextStore, MentionMap, SplitName};
use crate::rng;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("context set is empty")]
    EmptyContexts,
    #[error("token id {0} outside the encoder table")]
    UnknownToken(u32),
    #[error("encoder expects {expected} input, got {got}")]
    InputKind {
        expected: &'static str,
        got: &'static str,
    },
    #[error("no external encoding for context {0}")]
    MissingEncoding(String),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What an encoder consumes for one context.
#[derive(Debug, Clone, Copy)]
pub enum ContextRef<'a> {
    Tokens(&'a [u32]),
    Vector(ArrayView1<'a, f64>),
}

/// Per-context encoder inputs for a whole context store, in store order.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Tokens(Vec<Vec<u32>>),
    Vectors(Array2<f64>),
}

impl Features {
    /// Tokenizes every context; with `masks` each context's mention surface
    /// is replaced by `[MASK]`.
    pub fn tokenize(store: &ContextStore, vocab: &Vocabulary, masks: Option<&MentionMap>) -> Self {
        Features::Tokens(
            store
                .records()
                .iter()
                .map(|r| {
                    let surface = masks
                        .and_then(|m| m.get(&r.mention))
                        .map(|m| m.surface.as_str());
                    vocab.tokenize(&r.sentence, surface)
                })
                .collect(),
        )
    }

    /// Looks up each context under its `split/index` key.
    pub fn external(
        store: &ContextStore,
        split: SplitName,
        encodings: &ExternalEncodings,
    ) -> Result<Self, TextError> {
        let mut m = Array2::zeros((store.len(), encodings.dim()));
        for id in store.ids() {
            let key = split.context_key(id);
            let v = encodings
                .get(&key)
                .ok_or_else(|| TextError::MissingEncoding(key.clone()))?;
            m.row_mut(id.index()).assign(&ArrayView1::from(v));
        }
        Ok(Features::Vectors(m))
    }

    pub fn len(&self) -> usize {
        match self {
            Features::Tokens(t) => t.len(),
            Features::Vectors(v) => v.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, index: usize) -> ContextRef<'_> {
        match self {
            Features::Tokens(t) => ContextRef::Tokens(&t[index]),
            Features::Vectors(v) => ContextRef::Vector(v.row(index)),
        }
    }
}

/// Mean-pooled token embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEncoder {
    pub table: Array2<f64>,
    pub trainable: bool,
}

impl TokenEncoder {
    pub fn random(vocab_size: usize, dim: usize, trainable: bool, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let normal = Normal::new(0.0, 0.1).expect("valid std");
        Self {
            table: Array2::from_shape_simple_fn((vocab_size, dim), || normal.sample(&mut rng)),
            trainable,
        }
    }

    pub fn dim(&self) -> usize {
        self.table.ncols()
    }

    /// Mean of the token rows; zero for an empty sequence.
    pub fn encode(&self, tokens: &[u32]) -> Result<Array1<f64>, TextError> {
        let mut out = Array1::zeros(self.dim());
        if tokens.is_empty() {
            return Ok(out);
        }
        for &t in tokens {
            if t as usize >= self.table.nrows() {
                return Err(TextError::UnknownToken(t));
            }
            out += &self.table.row(t as usize);
        }
        out /= tokens.len() as f64;
        Ok(out)
    }
}

/// The context encoder φ: a learnable token table or fixed external vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Tokens(TokenEncoder),
    External { dim: usize },
}

impl Encoder {
    pub fn dim(&self) -> usize {
        match self {
            Encoder::Tokens(t) => t.dim(),
            Encoder::External { dim } => *dim,
        }
    }

    pub fn trainable(&self) -> bool {
        matches!(self, Encoder::Tokens(t) if t.trainable)
    }

    pub fn encode(&self, ctx: ContextRef<'_>) -> Result<Array1<f64>, TextError> {
        match (self, ctx) {
            (Encoder::Tokens(t), ContextRef::Tokens(ids)) => t.encode(ids),
            (Encoder::External { dim }, ContextRef::Vector(v)) => {
                if v.len() != *dim {
                    return Err(TextError::Shape(format!("vector of {} for d' = {dim}", v.len())));
                }
                Ok(v.to_owned())
            }
            (Encoder::Tokens(_), ContextRef::Vector(_)) => Err(TextError::InputKind {
                expected: "token",
                got: "vector",
            }),
            (Encoder::External { .. }, ContextRef::Tokens(_)) => Err(TextError::InputKind {
                expected: "vector",
                got: "token",
            }),
        }
    }
}

/// `y = Wᵀx + b` with `W` of shape d' × 2d; `y` is a split-layout complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Projection {
    pub fn new(w: Array2<f64>, b: Array1<f64>) -> Result<Self, TextError> {
        if b.len() != w.ncols() || b.len() % 2 != 0 || b.is_empty() {
            return Err(TextError::Shape(format!(
                "W is {}×{}, b has {} entries",
                w.nrows(),
                w.ncols(),
                b.len()
            )));
        }
        Ok(Self { w, b })
    }

    /// Gaussian weights with std `1/√d'`, zero bias.
    pub fn random(text_dim: usize, dim: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let normal = Normal::new(0.0, 1.0 / (text_dim.max(1) as f64).sqrt()).expect("valid std");
        Self {
            w: Array2::from_shape_simple_fn((text_dim, 2 * dim), || normal.sample(&mut rng)),
            b: Array1::zeros(2 * dim),
        }
    }

    pub fn text_dim(&self) -> usize {
        self.w.nrows()
    }

    /// Complex dimension d.
    pub fn dim(&self) -> usize {
        self.w.ncols() / 2
    }

    pub fn project(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>, TextError> {
        if x.len() != self.w.nrows() {
            return Err(TextError::Shape(format!(
                "input of {} for d' = {}",
                x.len(),
                self.w.nrows()
            )));
        }
        Ok(self.w.t().dot(&x) + &self.b)
    }
}

/// Mean of the encodings of `contexts`, before projection.
pub fn mean_encoding(encoder: &Encoder, contexts: &[ContextRef<'_>]) -> Result<Array1<f64>, TextError> {
    if contexts.is_empty() {
        return Err(TextError::EmptyContexts);
    }
    let mut acc = Array1::zeros(encoder.dim());
    for &c in contexts {
        acc += &encoder.encode(c)?;
    }
    Ok(acc / contexts.len() as f64)
}

/// Projects the averaged encoding of a context set.
pub fn encode_multi(
    encoder: &Encoder,
    projection: &Projection,
    contexts: &[ContextRef<'_>],
) -> Result<Array1<f64>, TextError> {
    projection.project(mean_encoding(encoder, contexts)?.view())
}
