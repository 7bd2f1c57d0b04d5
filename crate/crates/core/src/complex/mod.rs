//! ComplEx embeddings of a closed-world graph.
//!
//! Complex vectors are stored as `2d` reals: real parts first, imaginary
//! parts last. The score of `(a, r, b)` is `Σ Re(a_i · r_i · conj(b_i))`.

pub mod checkpoint;
pub(crate) mod train;

use ndarray::{Array1, Array2, ArrayView1};
use rand_distr::{Distribution, Normal};
use thiserror::Error;

pub use self::train::{
    batch_gradient, batch_loss, filtered_hits, train_closed_world, EpochStats, Gradients,
    KgcTrainConfig, TrainOutcome,
};
use crate::eval::RankedList;
use crate::graph::Direction;
use crate::rng;

#[derive(Debug, Error)]
pub enum KgcError {
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unknown {kind} index {index} (have {count})")]
    UnknownId {
        kind: &'static str,
        index: usize,
        count: usize,
    },
    #[error("cannot train on an empty graph")]
    EmptyGraph,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// ψ on split-layout vectors of equal length `2d`.
pub fn complex_score(a: &[f64], r: &[f64], b: &[f64]) -> Result<f64, KgcError> {
    if a.len() != r.len() || r.len() != b.len() || a.len() % 2 != 0 {
        return Err(KgcError::Dim(format!(
            "lengths {}, {}, {} (need equal and even)",
            a.len(),
            r.len(),
            b.len()
        )));
    }
    Ok(psi(a, r, b))
}

pub(crate) fn psi(a: &[f64], r: &[f64], b: &[f64]) -> f64 {
    let d = a.len() / 2;
    let mut s = 0.0;
    for i in 0..d {
        let (ar, ai) = (a[i], a[d + i]);
        let (rr, ri) = (r[i], r[d + i]);
        let (br, bi) = (b[i], b[d + i]);
        // Re((ar + i·ai)(rr + i·ri)(br − i·bi))
        let (xr, xi) = (ar * rr - ai * ri, ar * ri + ai * rr);
        s += xr * br + xi * bi;
    }
    s
}

/// `q` with `ψ(h, r, u) = u · q` for every `u`.
pub fn tail_query(h: &[f64], r: &[f64]) -> Array1<f64> {
    let d = h.len() / 2;
    let mut q = Array1::zeros(2 * d);
    for i in 0..d {
        q[i] = h[i] * r[i] - h[d + i] * r[d + i];
        q[d + i] = h[i] * r[d + i] + h[d + i] * r[i];
    }
    q
}

/// `p` with `ψ(u, r, t) = u · p` for every `u`.
pub fn head_query(r: &[f64], t: &[f64]) -> Array1<f64> {
    let d = t.len() / 2;
    let mut p = Array1::zeros(2 * d);
    for i in 0..d {
        // w = r · conj(t)
        p[i] = r[i] * t[i] + r[d + i] * t[d + i];
        p[d + i] = -(r[d + i] * t[i] - r[i] * t[d + i]);
    }
    p
}

/// Entity and relation embeddings bound to one closed-world graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEmbeddings {
    entity: Array2<f64>,
    relation: Array2<f64>,
    dim: usize,
}

impl ComplexEmbeddings {
    pub fn new(entity: Array2<f64>, relation: Array2<f64>) -> Result<Self, KgcError> {
        let cols = entity.ncols();
        if cols == 0 || cols % 2 != 0 || relation.ncols() != cols {
            return Err(KgcError::Dim(format!(
                "entity width {cols}, relation width {}",
                relation.ncols()
            )));
        }
        if entity.iter().any(|x| !x.is_finite()) {
            return Err(KgcError::NonFinite("entity embeddings"));
        }
        if relation.iter().any(|x| !x.is_finite()) {
            return Err(KgcError::NonFinite("relation embeddings"));
        }
        Ok(Self {
            entity: entity.as_standard_layout().into_owned(),
            relation: relation.as_standard_layout().into_owned(),
            dim: cols / 2,
        })
    }

    /// Gaussian(0, 0.1) initialization.
    pub fn random(vertices: usize, relations: usize, dim: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let normal = Normal::new(0.0, 0.1).expect("valid std");
        let entity = Array2::from_shape_simple_fn((vertices, 2 * dim), || normal.sample(&mut rng));
        let relation =
            Array2::from_shape_simple_fn((relations, 2 * dim), || normal.sample(&mut rng));
        Self {
            entity,
            relation,
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.entity.nrows()
    }

    pub fn relation_count(&self) -> usize {
        self.relation.nrows()
    }

    pub fn entity(&self) -> &Array2<f64> {
        &self.entity
    }

    pub fn relation(&self) -> &Array2<f64> {
        &self.relation
    }

    pub fn entity_mut(&mut self) -> &mut Array2<f64> {
        &mut self.entity
    }

    pub fn relation_mut(&mut self) -> &mut Array2<f64> {
        &mut self.relation
    }

    pub fn entity_row(&self, v: usize) -> ArrayView1<'_, f64> {
        self.entity.row(v)
    }

    pub fn relation_row(&self, r: usize) -> ArrayView1<'_, f64> {
        self.relation.row(r)
    }

    pub(crate) fn e(&self, v: usize) -> &[f64] {
        self.entity.row(v).to_slice().expect("standard layout")
    }

    pub(crate) fn r(&self, r: usize) -> &[f64] {
        self.relation.row(r).to_slice().expect("standard layout")
    }

    fn check(&self, kind: &'static str, index: usize) -> Result<(), KgcError> {
        let count = match kind {
            "relation" => self.relation_count(),
            _ => self.vertex_count(),
        };
        if index < count {
            Ok(())
        } else {
            Err(KgcError::UnknownId { kind, index, count })
        }
    }

    pub fn score(&self, h: usize, r: usize, t: usize) -> Result<f64, KgcError> {
        self.check("vertex", h)?;
        self.check("relation", r)?;
        self.check("vertex", t)?;
        Ok(psi(self.e(h), self.r(r), self.e(t)))
    }

    /// Scores of every vertex in the open slot around `known`.
    ///
    /// `Tail` scores `(known, r, u)`, `Head` scores `(u, r, known)`.
    pub fn candidate_scores(
        &self,
        known: usize,
        r: usize,
        direction: Direction,
    ) -> Result<Array1<f64>, KgcError> {
        self.check("vertex", known)?;
        self.check("relation", r)?;
        let q = match direction {
            Direction::Tail => tail_query(self.e(known), self.r(r)),
            Direction::Head => head_query(self.r(r), self.e(known)),
        };
        Ok(self.entity.dot(&q))
    }

    pub fn is_finite(&self) -> bool {
        self.entity.iter().chain(self.relation.iter()).all(|x| x.is_finite())
    }
}

/// All closed-world vertices ranked for a partial triple; ties by vertex id.
pub fn predict(
    embeddings: &ComplexEmbeddings,
    known: usize,
    r: usize,
    direction: Direction,
) -> Result<RankedList<usize>, KgcError> {
    let scores = embeddings.candidate_scores(known, r, direction)?;
    Ok(RankedList::from_scores(scores.iter().copied().enumerate()))
}
