use std::collections::HashSet;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;

use super::{head_query, tail_query, ComplexEmbeddings, KgcError};
use crate::config::{read_field, ConfigError, KvConfig, KvSchema};
use crate::graph::{Adjacency, Direction, KnowledgeGraph, Triple};
use crate::optim::Adagrad;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KgcTrainConfig {
    pub dim: usize,
    pub learning_rate: f64,
    /// Weight of the mean squared norm of the embedding rows a batch touches.
    pub regularizer_weight: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for KgcTrainConfig {
    fn default() -> Self {
        Self {
            dim: 300,
            learning_rate: 1.0,
            regularizer_weight: 0.3,
            batch_size: 64,
            max_epochs: 1000,
            patience: 5,
            min_delta: 0.001,
            seed: 0,
        }
    }
}

impl KvSchema for KgcTrainConfig {
    const KEYS: &'static [&'static str] = &[
        "dim",
        "learning_rate",
        "regularizer_weight",
        "batch_size",
        "max_epochs",
        "patience",
        "min_delta",
        "seed",
        "optimizer",
    ];

    fn apply(&mut self, kv: &KvConfig) -> Result<(), ConfigError> {
        read_field!(kv, "dim", self.dim);
        read_field!(kv, "learning_rate", self.learning_rate);
        read_field!(kv, "regularizer_weight", self.regularizer_weight);
        read_field!(kv, "batch_size", self.batch_size);
        read_field!(kv, "max_epochs", self.max_epochs);
        read_field!(kv, "patience", self.patience);
        read_field!(kv, "min_delta", self.min_delta);
        read_field!(kv, "seed", self.seed);
        if let Some(opt) = kv.get_raw("optimizer") {
            if opt != "adagrad" {
                return Err(ConfigError::BadValue {
                    key: "optimizer".into(),
                    value: opt.into(),
                    message: "only adagrad is supported".into(),
                });
            }
        }
        Ok(())
    }

    fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("dim", self.dim);
        kv.set("learning_rate", self.learning_rate);
        kv.set("regularizer_weight", self.regularizer_weight);
        kv.set("batch_size", self.batch_size);
        kv.set("max_epochs", self.max_epochs);
        kv.set("patience", self.patience);
        kv.set("min_delta", self.min_delta);
        kv.set("seed", self.seed);
        kv.set("optimizer", "adagrad");
        kv
    }

    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.dim == 0 {
            p.push("dim must be positive".into());
        }
        if !(self.learning_rate > 0.0) {
            p.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.regularizer_weight >= 0.0) {
            p.push("regularizer_weight must be non-negative".into());
        }
        if self.batch_size == 0 {
            p.push("batch_size must be positive".into());
        }
        if self.patience == 0 {
            p.push("patience must be positive".into());
        }
        if !(self.min_delta >= 0.0) {
            p.push("min_delta must be non-negative".into());
        }
        p
    }
}

impl KgcTrainConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        Self::from_kv_over(Self::default(), kv)
    }

    pub(crate) fn init_seed(&self) -> u64 {
        rng::derive_seed(self.seed, "kgc/init")
    }
}

/// Dense gradients with the shapes of [`ComplexEmbeddings`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub entity: Array2<f64>,
    pub relation: Array2<f64>,
}

impl Gradients {
    pub fn zeros(emb: &ComplexEmbeddings) -> Self {
        Self {
            entity: Array2::zeros(emb.entity().raw_dim()),
            relation: Array2::zeros(emb.relation().raw_dim()),
        }
    }
}

/// `logsumexp(logits) - logits[target]` and, optionally, `softmax - onehot`.
pub(crate) fn cross_entropy(logits: &Array1<f64>, target: usize) -> (f64, Array1<f64>) {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let exp = logits.mapv(|x| (x - max).exp());
    let z = exp.sum();
    let loss = z.ln() + max - logits[target];
    let mut g = exp / z;
    g[target] -= 1.0;
    (loss, g)
}

/// Gradient of the tail query `q = h ⊙ r` pulled back to `h` and `r`.
pub(crate) fn pull_tail_query(
    gq: ArrayView1<f64>,
    h: &[f64],
    r: &[f64],
) -> (Array1<f64>, Array1<f64>) {
    let d = h.len() / 2;
    let mut dh = Array1::zeros(2 * d);
    let mut dr = Array1::zeros(2 * d);
    for i in 0..d {
        let (gr, gi) = (gq[i], gq[d + i]);
        dh[i] = gr * r[i] + gi * r[d + i];
        dh[d + i] = -gr * r[d + i] + gi * r[i];
        dr[i] = gr * h[i] + gi * h[d + i];
        dr[d + i] = -gr * h[d + i] + gi * h[i];
    }
    (dh, dr)
}

/// Gradient of the head query `p(r, t)` pulled back to `r` and `t`.
pub(crate) fn pull_head_query(
    gp: ArrayView1<f64>,
    r: &[f64],
    t: &[f64],
) -> (Array1<f64>, Array1<f64>) {
    let d = t.len() / 2;
    let mut dr = Array1::zeros(2 * d);
    let mut dt = Array1::zeros(2 * d);
    for i in 0..d {
        let (a, b) = (gp[i], gp[d + i]);
        dr[i] = a * t[i] + b * t[d + i];
        dr[d + i] = a * t[d + i] - b * t[i];
        dt[i] = a * r[i] - b * r[d + i];
        dt[d + i] = a * r[d + i] + b * r[i];
    }
    (dr, dt)
}

pub(crate) fn add_outer(target: &mut Array2<f64>, g: &Array1<f64>, q: &Array1<f64>) {
    for (mut row, &gu) in target.rows_mut().into_iter().zip(g.iter()) {
        if gu != 0.0 {
            row.scaled_add(gu, q);
        }
    }
}

fn loss_impl(
    emb: &ComplexEmbeddings,
    batch: &[Triple],
    regularizer_weight: f64,
    mut grads: Option<&mut Gradients>,
) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for t in batch {
        let (h, r, tl) = (emb.e(t.head), emb.r(t.relation), emb.e(t.tail));

        let q = tail_query(h, r);
        let (loss, g) = cross_entropy(&emb.entity().dot(&q), t.tail);
        total += loss;
        if let Some(grads) = grads.as_deref_mut() {
            let g = g * scale;
            add_outer(&mut grads.entity, &g, &q);
            let gq = emb.entity().t().dot(&g);
            let (dh, dr) = pull_tail_query(gq.view(), h, r);
            grads.entity.row_mut(t.head).scaled_add(1.0, &dh);
            grads.relation.row_mut(t.relation).scaled_add(1.0, &dr);
        }

        let p = head_query(r, tl);
        let (loss, g) = cross_entropy(&emb.entity().dot(&p), t.head);
        total += loss;
        if let Some(grads) = grads.as_deref_mut() {
            let g = g * scale;
            add_outer(&mut grads.entity, &g, &p);
            let gp = emb.entity().t().dot(&g);
            let (dr, dt) = pull_head_query(gp.view(), r, tl);
            grads.relation.row_mut(t.relation).scaled_add(1.0, &dr);
            grads.entity.row_mut(t.tail).scaled_add(1.0, &dt);
        }
    }
    total *= scale;

    if regularizer_weight > 0.0 {
        let occurrences = 3.0 * batch.len() as f64;
        let w = regularizer_weight / occurrences;
        for t in batch {
            for (row, is_entity, idx) in [
                (emb.entity_row(t.head), true, t.head),
                (emb.relation_row(t.relation), false, t.relation),
                (emb.entity_row(t.tail), true, t.tail),
            ] {
                total += w * row.dot(&row);
                if let Some(grads) = grads.as_deref_mut() {
                    let target = if is_entity {
                        &mut grads.entity
                    } else {
                        &mut grads.relation
                    };
                    target.row_mut(idx).scaled_add(2.0 * w, &row);
                }
            }
        }
    }
    total
}

/// Mean over the batch of tail plus head cross-entropy, plus the row penalty.
pub fn batch_loss(emb: &ComplexEmbeddings, batch: &[Triple], regularizer_weight: f64) -> f64 {
    loss_impl(emb, batch, regularizer_weight, None)
}

pub fn batch_gradient(
    emb: &ComplexEmbeddings,
    batch: &[Triple],
    regularizer_weight: f64,
) -> (f64, Gradients) {
    let mut grads = Gradients::zeros(emb);
    let loss = loss_impl(emb, batch, regularizer_weight, Some(&mut grads));
    (loss, grads)
}

/// Fraction of (triple, direction) pairs whose filtered rank is at most `k`.
///
/// Other known answers from `truths` are ignored when ranking; ties are
/// broken by vertex index.
pub fn filtered_hits(
    emb: &ComplexEmbeddings,
    truths: &KnowledgeGraph,
    triples: &[Triple],
    k: usize,
) -> f64 {
    if triples.is_empty() {
        return 0.0;
    }
    let adj = Adjacency::new(truths.triples());
    let mut hits = 0usize;
    for t in triples {
        for (known, target, dir) in [
            (t.head, t.tail, Direction::Tail),
            (t.tail, t.head, Direction::Head),
        ] {
            let scores = emb
                .candidate_scores(known, t.relation, dir)
                .expect("triple within embedding bounds");
            let others: HashSet<usize> = adj.complete(known, t.relation, dir).iter().copied().collect();
            let s = scores[target];
            let better = scores
                .iter()
                .enumerate()
                .filter(|&(u, &x)| u != target && !others.contains(&u) && (x > s || (x == s && u < target)))
                .count();
            if better < k {
                hits += 1;
            }
        }
    }
    hits as f64 / (2 * triples.len()) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub validation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub embeddings: ComplexEmbeddings,
    pub history: Vec<EpochStats>,
    pub stopped_early: bool,
}

/// Full-softmax training with Adagrad.
///
/// When `validation` is given it is called after every epoch and must return
/// hits@10; training stops once it fails to improve by `min_delta` for
/// `patience` epochs, and the best embeddings are returned.
pub fn train_closed_world(
    graph: &KnowledgeGraph,
    config: &KgcTrainConfig,
    mut validation: Option<&mut dyn FnMut(&ComplexEmbeddings) -> f64>,
) -> Result<TrainOutcome, KgcError> {
    config.validate()?;
    if graph.vertex_count() == 0 || graph.triples().is_empty() {
        return Err(KgcError::EmptyGraph);
    }
    let mut emb = ComplexEmbeddings::random(
        graph.vertex_count(),
        graph.relation_count(),
        config.dim,
        config.init_seed(),
    );
    let mut rng = rng::seeded(rng::derive_seed(config.seed, "kgc/shuffle"));
    let mut ent_opt = Adagrad::new(emb.entity().len(), config.learning_rate);
    let mut rel_opt = Adagrad::new(emb.relation().len(), config.learning_rate);
    let mut order: Vec<Triple> = graph.triples().to_vec();
    let mut history = Vec::new();
    let mut best: Option<(f64, ComplexEmbeddings)> = None;
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, grads) = batch_gradient(&emb, batch, config.regularizer_weight);
            if !loss.is_finite() {
                return Err(KgcError::Diverged { epoch, loss });
            }
            sum += loss * batch.len() as f64;
            ent_opt.step(
                emb.entity_mut().as_slice_mut().expect("standard layout"),
                grads.entity.as_slice().expect("standard layout"),
            );
            rel_opt.step(
                emb.relation_mut().as_slice_mut().expect("standard layout"),
                grads.relation.as_slice().expect("standard layout"),
            );
        }
        let loss = sum / order.len() as f64;
        if !emb.is_finite() {
            return Err(KgcError::Diverged { epoch, loss });
        }
        let val = validation.as_deref_mut().map(|f| f(&emb));
        log::debug!("kgc epoch {epoch}: loss {loss:.5} validation {val:?}");
        history.push(EpochStats {
            epoch,
            loss,
            validation: val,
        });
        if let Some(v) = val {
            match &best {
                Some((b, _)) if v <= b + config.min_delta => {
                    stale += 1;
                    if v > *b {
                        best = Some((v, emb.clone()));
                    }
                }
                _ => {
                    stale = 0;
                    best = Some((v, emb.clone()));
                }
            }
            if stale >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let embeddings = match best {
        Some((_, e)) => e,
        None => emb,
    };
    Ok(TrainOutcome {
        embeddings,
        history,
        stopped_early,
    })
}
