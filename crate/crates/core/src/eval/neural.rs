use std::collections::HashMap;

use ndarray::{Array1, Array2};

use super::{subsample_contexts, Engine, EvalError, RankedList};
use crate::bundle::{ContextId, ContextStore, DatasetBundle, SplitName};
use crate::graph::Direction;
use crate::inductive::{OpenWorldModel, TextSetup};
use crate::rng::{self, sample_sorted};
use crate::text::Features;

/// Projected representations of one open split, cached once.
#[derive(Debug, Clone)]
struct ProjectedCorpus {
    reps: Array2<f64>,
    by_mention: HashMap<String, Vec<usize>>,
}

impl ProjectedCorpus {
    fn new(
        model: &OpenWorldModel,
        store: &ContextStore,
        split: SplitName,
        text: TextSetup<'_>,
    ) -> Result<Self, EvalError> {
        // no masking at inference time
        let features = match text {
            TextSetup::Tokens(vocab) => Features::tokenize(store, vocab, None),
            TextSetup::External(enc) => Features::external(store, split, enc)?,
        };
        let mut by_mention: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in store.records().iter().enumerate() {
            by_mention.entry(r.mention.clone()).or_default().push(i);
        }
        Ok(Self {
            reps: model.project_all(&features)?,
            by_mention,
        })
    }
}

/// A trained text-to-graph model evaluated over cached projections.
///
/// The projection is affine, so the mean of projected contexts equals the
/// projection of their mean encoding.
#[derive(Debug, Clone)]
pub struct NeuralEngine {
    name: String,
    model: OpenWorldModel,
    validation: ProjectedCorpus,
    test: ProjectedCorpus,
}

impl NeuralEngine {
    pub fn new(
        name: impl Into<String>,
        model: OpenWorldModel,
        bundle: &DatasetBundle,
        text: TextSetup<'_>,
    ) -> Result<Self, EvalError> {
        let validation =
            ProjectedCorpus::new(&model, &bundle.validation().contexts, SplitName::Validation, text)?;
        let test = ProjectedCorpus::new(&model, &bundle.test().contexts, SplitName::Test, text)?;
        Ok(Self {
            name: name.into(),
            model,
            validation,
            test,
        })
    }

    pub fn model(&self) -> &OpenWorldModel {
        &self.model
    }

    fn corpus(&self, split: SplitName) -> Result<&ProjectedCorpus, EvalError> {
        match split {
            SplitName::Validation => Ok(&self.validation),
            SplitName::Test => Ok(&self.test),
            SplitName::Closed => Err(EvalError::NoQueryCorpus(split)),
        }
    }

    /// Projected representation of one context of `split`.
    pub fn representation(&self, split: SplitName, context: ContextId) -> Result<Array1<f64>, EvalError> {
        let corpus = self.corpus(split)?;
        if context.index() >= corpus.reps.nrows() {
            return Err(EvalError::Unknown {
                kind: "context",
                id: context.to_string(),
            });
        }
        Ok(corpus.reps.row(context.index()).to_owned())
    }
}

/// Subsampled contexts of `split` ranked by their score in the text slot of
/// `(r, v)`; the reported scores are softmax-normalized over the subsample.
///
/// Order follows the raw scores (ties by context id) so that probabilities
/// underflowing to zero keep their relative order.
pub fn rank_contexts_neural(
    engine: &NeuralEngine,
    split: SplitName,
    v: usize,
    r: usize,
    direction: Direction,
    subsample: usize,
    seed: u64,
) -> Result<RankedList<ContextId>, EvalError> {
    let corpus = engine.corpus(split)?;
    let n = corpus.reps.nrows();
    if n == 0 {
        return Err(EvalError::EmptyCorpus);
    }
    let k = engine.model.context_query(r, v, direction)?;
    let picked = subsample_contexts(n, subsample, rng::derive_seed(seed, "subsample"));
    let raw: Vec<f64> = picked.iter().map(|&i| corpus.reps.row(i).dot(&k)).collect();
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = raw.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    let mut order: Vec<usize> = (0..picked.len()).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]).then(picked[a].cmp(&picked[b])));
    Ok(RankedList::from_ordered(
        order
            .into_iter()
            .map(|j| (ContextId(picked[j] as u32), exp[j] / z))
            .collect(),
    ))
}

/// Closed-world vertices ranked for a mention represented by up to
/// `ctx_per_mention` of its sampled contexts.
pub fn link_rank_neural(
    engine: &NeuralEngine,
    split: SplitName,
    mention: &str,
    r: usize,
    direction: Direction,
    ctx_per_mention: usize,
    seed: u64,
) -> Result<RankedList<usize>, EvalError> {
    let corpus = engine.corpus(split)?;
    let ids = corpus
        .by_mention
        .get(mention)
        .ok_or_else(|| EvalError::NoContexts(mention.to_owned()))?;
    let picked = sample_sorted(ids, ctx_per_mention.max(1), &mut rng::seeded(seed));
    let mut c = Array1::zeros(corpus.reps.ncols());
    for &i in &picked {
        c += &corpus.reps.row(i);
    }
    c /= picked.len() as f64;
    let scores = engine.model.candidate_scores(&c, r, direction)?;
    Ok(RankedList::from_scores(scores.iter().copied().enumerate()))
}

impl Engine for NeuralEngine {
    fn name(&self) -> &str {
        &self.name
    }

    fn rank_contexts(
        &self,
        split: SplitName,
        v: usize,
        r: usize,
        direction: Direction,
        subsample: usize,
        seed: u64,
    ) -> Result<RankedList<ContextId>, EvalError> {
        rank_contexts_neural(self, split, v, r, direction, subsample, seed)
    }

    fn link(
        &self,
        split: SplitName,
        mention: &str,
        r: usize,
        direction: Direction,
        ctx_per_mention: usize,
        seed: u64,
    ) -> Result<RankedList<usize>, EvalError> {
        link_rank_neural(self, split, mention, r, direction, ctx_per_mention, seed)
    }
}
