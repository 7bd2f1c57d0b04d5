//! Text-to-graph models: a context encoder and projection feeding the
//! ComplEx scorer, trained end to end (JOINT) or aligned to frozen graph
//! embeddings (OWE).

pub mod checkpoint;
mod train;

use ndarray::{Array1, Array2};
use thiserror::Error;

pub use self::train::{
    joint_batch_gradient, joint_batch_loss, owe_batch_gradient, owe_batch_loss, train_joint,
    train_owe, InductiveOutcome, InductiveTrainConfig, JointSample, ModelGradients, OweSample,
    SampleReport, TextSetup,
};
use crate::complex::{head_query, psi, tail_query, ComplexEmbeddings, KgcError};
use crate::config::ConfigError;
use crate::graph::Direction;
use crate::text::{encode_multi, ContextRef, Encoder, Features, Projection, TextError};

#[derive(Debug, Error)]
pub enum InductiveError {
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Kgc(#[from] KgcError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown {kind} index {index}")]
    UnknownId { kind: &'static str, index: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no training samples: every closed-world vertex lacks contexts or triples")]
    NoSamples,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Whether training uses one context or a context set per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Single,
    Multi,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Multi => "multi",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenWorldModel {
    pub encoder: Encoder,
    pub projection: Projection,
    pub graph: ComplexEmbeddings,
    pub mode: Mode,
}

impl OpenWorldModel {
    pub fn new(
        encoder: Encoder,
        projection: Projection,
        graph: ComplexEmbeddings,
        mode: Mode,
    ) -> Result<Self, InductiveError> {
        if projection.text_dim() != encoder.dim() {
            return Err(InductiveError::Shape(format!(
                "projection expects d' = {}, encoder gives {}",
                projection.text_dim(),
                encoder.dim()
            )));
        }
        if projection.dim() != graph.dim() {
            return Err(InductiveError::Shape(format!(
                "projection gives d = {}, graph embeddings have {}",
                projection.dim(),
                graph.dim()
            )));
        }
        Ok(Self {
            encoder,
            projection,
            graph,
            mode,
        })
    }

    /// Text representation `c` of a context set.
    pub fn represent(&self, contexts: &[ContextRef<'_>]) -> Result<Array1<f64>, InductiveError> {
        Ok(encode_multi(&self.encoder, &self.projection, contexts)?)
    }

    /// Projected single-context representations, one row per context.
    pub fn project_all(&self, features: &Features) -> Result<Array2<f64>, InductiveError> {
        let mut x = Array2::zeros((features.len(), self.encoder.dim()));
        for i in 0..features.len() {
            x.row_mut(i).assign(&self.encoder.encode(features.get(i))?);
        }
        Ok(x.dot(&self.projection.w) + &self.projection.b)
    }

    fn check(&self, r: usize, v: Option<usize>) -> Result<(), InductiveError> {
        if r >= self.graph.relation_count() {
            return Err(InductiveError::UnknownId {
                kind: "relation",
                index: r,
            });
        }
        if let Some(v) = v {
            if v >= self.graph.vertex_count() {
                return Err(InductiveError::UnknownId {
                    kind: "vertex",
                    index: v,
                });
            }
        }
        Ok(())
    }

    /// Scores of all closed-world vertices against representation `c`.
    ///
    /// `Tail` scores `ψ(c, r, u)`; `Head` scores `ψ(u, r, c)`.
    pub fn candidate_scores(
        &self,
        c: &Array1<f64>,
        r: usize,
        direction: Direction,
    ) -> Result<Array1<f64>, InductiveError> {
        self.check(r, None)?;
        if c.len() != 2 * self.graph.dim() {
            return Err(InductiveError::Shape(format!(
                "representation of {} for d = {}",
                c.len(),
                self.graph.dim()
            )));
        }
        let c = c.as_slice().expect("contiguous");
        let q = match direction {
            Direction::Tail => tail_query(c, self.graph.r(r)),
            Direction::Head => head_query(self.graph.r(r), c),
        };
        Ok(self.graph.entity().dot(&q))
    }

    /// Vector `k` with `score(c) = c · k` for the text slot of `(r, v)`.
    ///
    /// `Tail` places the text in the head slot of `(·, r, v)`.
    pub fn context_query(
        &self,
        r: usize,
        v: usize,
        direction: Direction,
    ) -> Result<Array1<f64>, InductiveError> {
        self.check(r, Some(v))?;
        Ok(match direction {
            Direction::Tail => head_query(self.graph.r(r), self.graph.e(v)),
            Direction::Head => tail_query(self.graph.e(v), self.graph.r(r)),
        })
    }
}

/// `s(Σ, r, v)`: the text representation takes the head slot for `Tail`
/// and the (conjugated) tail slot for `Head`.
pub fn open_score(
    model: &OpenWorldModel,
    contexts: &[ContextRef<'_>],
    r: usize,
    v: usize,
    direction: Direction,
) -> Result<f64, InductiveError> {
    model.check(r, Some(v))?;
    let c = model.represent(contexts)?;
    let c = c.as_slice().expect("contiguous");
    let (rv, ev) = (model.graph.r(r), model.graph.e(v));
    Ok(match direction {
        Direction::Tail => psi(c, rv, ev),
        Direction::Head => psi(ev, rv, c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::TokenEncoder;
    use ndarray::Array2;

    fn model(seed: u64) -> OpenWorldModel {
        OpenWorldModel::new(
            Encoder::Tokens(TokenEncoder::random(6, 3, true, seed)),
            Projection::random(3, 2, seed + 1),
            ComplexEmbeddings::random(4, 2, 2, seed + 2),
            Mode::Multi,
        )
        .unwrap()
    }

    #[test]
    fn forced_projection_reduces_to_closed_world_score() {
        let mut m = model(1);
        let u = m.graph.entity_row(2).to_owned();
        m.projection = Projection::new(Array2::zeros((3, 4)), u).unwrap();
        let toks: &[u32] = &[1, 2];
        for dir in [Direction::Tail, Direction::Head] {
            for v in 0..4 {
                let s = open_score(&m, &[ContextRef::Tokens(toks)], 1, v, dir).unwrap();
                let expect = match dir {
                    Direction::Tail => m.graph.score(2, 1, v).unwrap(),
                    Direction::Head => m.graph.score(v, 1, 2).unwrap(),
                };
                assert!((s - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fused_and_explicit_pipelines_agree() {
        let m = model(5);
        let a: &[u32] = &[0, 3];
        let b: &[u32] = &[4];
        let ctx = [ContextRef::Tokens(a), ContextRef::Tokens(b)];
        let c = m.represent(&ctx).unwrap();
        for dir in [Direction::Tail, Direction::Head] {
            let all = m.candidate_scores(&c, 0, dir).unwrap();
            for v in 0..4 {
                let s = open_score(&m, &ctx, 0, v, dir).unwrap();
                assert!((s - all[v]).abs() < 1e-6);
                let k = m.context_query(0, v, dir).unwrap();
                assert!((s - c.dot(&k)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn unknown_ids_fail() {
        let m = model(0);
        let t: &[u32] = &[1];
        assert!(open_score(&m, &[ContextRef::Tokens(t)], 9, 0, Direction::Tail).is_err());
        assert!(open_score(&m, &[ContextRef::Tokens(t)], 0, 9, Direction::Tail).is_err());
        assert!(open_score(&m, &[], 0, 0, Direction::Tail).is_err());
    }
}
