use ndarray::{Array1, Array2};
use rand::seq::{IndexedRandom, SliceRandom};

use super::{InductiveError, Mode, OpenWorldModel};
use crate::bundle::DatasetBundle;
use crate::complex::train::{add_outer, cross_entropy, pull_head_query, pull_tail_query};
use crate::complex::{head_query, tail_query, ComplexEmbeddings, EpochStats};
use crate::config::{read_field, ConfigError, KvConfig, KvSchema};
use crate::graph::{Direction, KnowledgeGraph, Triple};
use crate::optim::Adam;
use crate::rng::{self, Rng};
use crate::text::{
    mean_encoding, ContextRef, Encoder, ExternalEncodings, Features, Projection, TokenEncoder,
    Vocabulary,
};

#[derive(Debug, Clone, PartialEq)]
pub struct InductiveTrainConfig {
    /// Complex dimension d; JOINT only (OWE takes it from the pretrained graph).
    pub dim: usize,
    /// Encoder width d' of the token encoder.
    pub text_dim: usize,
    pub trainable_encoder: bool,
    /// L2 weight on touched graph embedding rows (JOINT).
    pub regularizer_weight: f64,
    pub contexts_per_sample: usize,
    /// Contexts drawn per mention and epoch.
    pub max_contexts: usize,
    /// Replace the mention's surface by `[MASK]` in training contexts.
    pub masked: bool,
    pub batch_size: usize,
    /// Accepted for preset compatibility; has no effect.
    pub subbatch_size: usize,
    pub learning_rate: f64,
    /// Decoupled weight decay on encoder and projection.
    pub weight_decay: f64,
    pub seed: u64,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for InductiveTrainConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            text_dim: 256,
            trainable_encoder: true,
            regularizer_weight: 0.0,
            contexts_per_sample: 1,
            max_contexts: 10,
            masked: false,
            batch_size: 16,
            subbatch_size: 0,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            seed: 0,
            max_epochs: 50,
            patience: 5,
            min_delta: 0.001,
        }
    }
}

impl KvSchema for InductiveTrainConfig {
    const KEYS: &'static [&'static str] = &[
        "dim",
        "text_dim",
        "trainable_encoder",
        "regularizer_weight",
        "contexts_per_sample",
        "max_contexts",
        "masked",
        "batch_size",
        "subbatch_size",
        "learning_rate",
        "weight_decay",
        "seed",
        "max_epochs",
        "patience",
        "min_delta",
    ];

    fn apply(&mut self, kv: &KvConfig) -> Result<(), ConfigError> {
        read_field!(kv, "dim", self.dim);
        read_field!(kv, "text_dim", self.text_dim);
        read_field!(kv, "trainable_encoder", self.trainable_encoder);
        read_field!(kv, "regularizer_weight", self.regularizer_weight);
        read_field!(kv, "contexts_per_sample", self.contexts_per_sample);
        read_field!(kv, "max_contexts", self.max_contexts);
        read_field!(kv, "masked", self.masked);
        read_field!(kv, "batch_size", self.batch_size);
        read_field!(kv, "subbatch_size", self.subbatch_size);
        read_field!(kv, "learning_rate", self.learning_rate);
        read_field!(kv, "weight_decay", self.weight_decay);
        read_field!(kv, "seed", self.seed);
        read_field!(kv, "max_epochs", self.max_epochs);
        read_field!(kv, "patience", self.patience);
        read_field!(kv, "min_delta", self.min_delta);
        Ok(())
    }

    fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("dim", self.dim);
        kv.set("text_dim", self.text_dim);
        kv.set("trainable_encoder", self.trainable_encoder);
        kv.set("regularizer_weight", self.regularizer_weight);
        kv.set("contexts_per_sample", self.contexts_per_sample);
        kv.set("max_contexts", self.max_contexts);
        kv.set("masked", self.masked);
        kv.set("batch_size", self.batch_size);
        kv.set("subbatch_size", self.subbatch_size);
        kv.set("learning_rate", self.learning_rate);
        kv.set("weight_decay", self.weight_decay);
        kv.set("seed", self.seed);
        kv.set("max_epochs", self.max_epochs);
        kv.set("patience", self.patience);
        kv.set("min_delta", self.min_delta);
        kv
    }

    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        for (name, v) in [
            ("dim", self.dim),
            ("text_dim", self.text_dim),
            ("contexts_per_sample", self.contexts_per_sample),
            ("max_contexts", self.max_contexts),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
        ] {
            if v == 0 {
                p.push(format!("{name} must be positive"));
            }
        }
        if !(self.learning_rate > 0.0) {
            p.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, v) in [
            ("weight_decay", self.weight_decay),
            ("regularizer_weight", self.regularizer_weight),
            ("min_delta", self.min_delta),
        ] {
            if !(v >= 0.0) {
                p.push(format!("{name} must be non-negative, got {v}"));
            }
        }
        p
    }
}

impl InductiveTrainConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        Self::from_kv_over(Self::default(), kv)
    }

    pub fn mode(&self) -> Mode {
        if self.contexts_per_sample == 1 {
            Mode::Single
        } else {
            Mode::Multi
        }
    }
}

/// Source of encoder inputs.
#[derive(Debug, Clone, Copy)]
pub enum TextSetup<'a> {
    /// Learnable mean-pooled token table over this vocabulary.
    Tokens(&'a Vocabulary),
    /// Fixed precomputed vectors; the encoder is not trained.
    External(&'a ExternalEncodings),
}

/// One JOINT step: predict `target` in the slot given by `direction` from
/// the text of the other endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSample {
    pub contexts: Vec<usize>,
    pub relation: usize,
    pub target: usize,
    pub direction: Direction,
}

/// One OWE step: pull the text representation towards `vertex`'s embedding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OweSample {
    pub contexts: Vec<usize>,
    pub vertex: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub entity: Array2<f64>,
    pub relation: Array2<f64>,
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    /// Present for a token encoder.
    pub table: Option<Array2<f64>>,
}

impl ModelGradients {
    fn zeros(model: &OpenWorldModel) -> Self {
        Self {
            entity: Array2::zeros(model.graph.entity().raw_dim()),
            relation: Array2::zeros(model.graph.relation().raw_dim()),
            w: Array2::zeros(model.projection.w.raw_dim()),
            b: Array1::zeros(model.projection.b.raw_dim()),
            table: match &model.encoder {
                Encoder::Tokens(t) => Some(Array2::zeros(t.table.raw_dim())),
                Encoder::External { .. } => None,
            },
        }
    }
}

fn refs<'a>(features: &'a Features, ids: &[usize]) -> Vec<ContextRef<'a>> {
    ids.iter().map(|&i| features.get(i)).collect()
}

fn forward_text(
    model: &OpenWorldModel,
    features: &Features,
    contexts: &[usize],
) -> Result<(Array1<f64>, Array1<f64>), InductiveError> {
    let x = mean_encoding(&model.encoder, &refs(features, contexts))?;
    let c = model.projection.project(x.view())?;
    Ok((x, c))
}

/// Backpropagates `dc` through projection and (token) encoder.
fn backward_text(
    model: &OpenWorldModel,
    features: &Features,
    contexts: &[usize],
    x: &Array1<f64>,
    dc: &Array1<f64>,
    grads: &mut ModelGradients,
) {
    add_outer(&mut grads.w, x, dc);
    grads.b += dc;
    if let (Some(table), Features::Tokens(tokens)) = (grads.table.as_mut(), features) {
        let dx = model.projection.w.dot(dc);
        let n = contexts.len() as f64;
        for &i in contexts {
            let toks = &tokens[i];
            if toks.is_empty() {
                continue;
            }
            let w = 1.0 / (n * toks.len() as f64);
            for &t in toks {
                table.row_mut(t as usize).scaled_add(w, &dx);
            }
        }
    }
}

fn joint_impl(
    model: &OpenWorldModel,
    features: &Features,
    batch: &[JointSample],
    regularizer_weight: f64,
    mut grads: Option<&mut ModelGradients>,
) -> Result<f64, InductiveError> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let scale = 1.0 / batch.len() as f64;
    let entity = model.graph.entity();
    let mut total = 0.0;
    for s in batch {
        let (x, c) = forward_text(model, features, &s.contexts)?;
        let cs = c.as_slice().expect("contiguous");
        let r = model.graph.r(s.relation);
        let q = match s.direction {
            Direction::Tail => tail_query(cs, r),
            Direction::Head => head_query(r, cs),
        };
        let (loss, g) = cross_entropy(&entity.dot(&q), s.target);
        total += loss;
        if let Some(grads) = grads.as_deref_mut() {
            let g = g * scale;
            add_outer(&mut grads.entity, &g, &q);
            let gq = entity.t().dot(&g);
            let (dc, dr) = match s.direction {
                Direction::Tail => pull_tail_query(gq.view(), cs, r),
                Direction::Head => {
                    let (dr, dc) = pull_head_query(gq.view(), r, cs);
                    (dc, dr)
                }
            };
            grads.relation.row_mut(s.relation).scaled_add(1.0, &dr);
            backward_text(model, features, &s.contexts, &x, &dc, grads);
        }
    }
    total *= scale;
    if regularizer_weight > 0.0 {
        let w = regularizer_weight / (2.0 * batch.len() as f64);
        for s in batch {
            let rr = model.graph.relation_row(s.relation);
            let ee = model.graph.entity_row(s.target);
            total += w * (rr.dot(&rr) + ee.dot(&ee));
            if let Some(grads) = grads.as_deref_mut() {
                grads.relation.row_mut(s.relation).scaled_add(2.0 * w, &rr);
                grads.entity.row_mut(s.target).scaled_add(2.0 * w, &ee);
            }
        }
    }
    Ok(total)
}

fn owe_impl(
    model: &OpenWorldModel,
    features: &Features,
    batch: &[OweSample],
    mut grads: Option<&mut ModelGradients>,
) -> Result<f64, InductiveError> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let scale = 1.0 / batch.len() as f64;
    let d = model.graph.dim() as f64;
    let mut total = 0.0;
    for s in batch {
        let (x, c) = forward_text(model, features, &s.contexts)?;
        let diff = &c - &model.graph.entity_row(s.vertex);
        total += diff.dot(&diff) / (2.0 * d);
        if let Some(grads) = grads.as_deref_mut() {
            let dc = diff * (scale / d);
            backward_text(model, features, &s.contexts, &x, &dc, grads);
        }
    }
    Ok(total * scale)
}

/// Mean softmax cross-entropy over all closed-world candidates plus the
/// embedding row penalty.
pub fn joint_batch_loss(
    model: &OpenWorldModel,
    features: &Features,
    batch: &[JointSample],
    regularizer_weight: f64,
) -> Result<f64, InductiveError> {
    joint_impl(model, features, batch, regularizer_weight, None)
}

pub fn joint_batch_gradient(
    model: &OpenWorldModel,
    features: &Features,
    batch: &[JointSample],
    regularizer_weight: f64,
) -> Result<(f64, ModelGradients), InductiveError> {
    let mut g = ModelGradients::zeros(model);
    let loss = joint_impl(model, features, batch, regularizer_weight, Some(&mut g))?;
    Ok((loss, g))
}

/// Mean of `(1/2d)·‖c − v‖²` over the batch.
pub fn owe_batch_loss(
    model: &OpenWorldModel,
    features: &Features,
    batch: &[OweSample],
) -> Result<f64, InductiveError> {
    owe_impl(model, features, batch, None)
}

pub fn owe_batch_gradient(
    model: &OpenWorldModel,
    features: &Features,
    batch: &[OweSample],
) -> Result<(f64, ModelGradients), InductiveError> {
    let mut g = ModelGradients::zeros(model);
    let loss = owe_impl(model, features, batch, Some(&mut g))?;
    Ok((loss, g))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleReport {
    pub mentions: usize,
    pub samples_per_epoch: usize,
    pub vertices_without_contexts: usize,
    /// JOINT only: vertices with contexts but no closed triple.
    pub vertices_without_triples: usize,
}

#[derive(Debug, Clone)]
pub struct InductiveOutcome {
    pub model: OpenWorldModel,
    pub history: Vec<EpochStats>,
    pub report: SampleReport,
    pub stopped_early: bool,
}

/// Closed mentions as (vertex, context ids) units.
fn mention_units(bundle: &DatasetBundle) -> (Vec<(usize, Vec<usize>)>, usize) {
    let g = bundle.closed_graph();
    let store = &bundle.closed().contexts;
    let mut units = Vec::new();
    let mut has_contexts = vec![false; g.vertex_count()];
    for (v, mentions) in bundle.closed_mentions_by_vertex().into_iter().enumerate() {
        for m in mentions {
            let ids: Vec<usize> = store.of_mention(m).iter().map(|c| c.index()).collect();
            if !ids.is_empty() {
                has_contexts[v] = true;
                units.push((v, ids));
            }
        }
    }
    let missing = has_contexts.iter().filter(|h| !**h).count();
    (units, missing)
}

/// Per epoch: up to `max_contexts` shuffled contexts per mention, grouped
/// into samples of `contexts_per_sample`.
fn context_groups(
    units: &[(usize, Vec<usize>)],
    config: &InductiveTrainConfig,
    rng: &mut Rng,
) -> Vec<(usize, Vec<usize>)> {
    let mut out = Vec::new();
    for (v, ids) in units {
        let mut ids = ids.clone();
        ids.shuffle(rng);
        ids.truncate(config.max_contexts);
        for chunk in ids.chunks(config.contexts_per_sample) {
            out.push((*v, chunk.to_vec()));
        }
    }
    out
}

fn build_encoder(
    text: TextSetup<'_>,
    config: &InductiveTrainConfig,
) -> Encoder {
    match text {
        TextSetup::Tokens(vocab) => Encoder::Tokens(TokenEncoder::random(
            vocab.len(),
            config.text_dim,
            config.trainable_encoder,
            rng::derive_seed(config.seed, "encoder/init"),
        )),
        TextSetup::External(enc) => Encoder::External { dim: enc.dim() },
    }
}

fn training_features(
    bundle: &DatasetBundle,
    text: TextSetup<'_>,
    masked: bool,
) -> Result<Features, InductiveError> {
    let closed = bundle.closed();
    Ok(match text {
        TextSetup::Tokens(vocab) => {
            Features::tokenize(&closed.contexts, vocab, masked.then_some(&closed.mentions))
        }
        TextSetup::External(enc) => {
            Features::external(&closed.contexts, crate::bundle::SplitName::Closed, enc)?
        }
    })
}

struct Optimizers {
    entity: Option<Adam>,
    relation: Option<Adam>,
    w: Adam,
    b: Adam,
    table: Option<Adam>,
}

impl Optimizers {
    fn new(model: &OpenWorldModel, config: &InductiveTrainConfig, train_graph: bool) -> Self {
        let lr = config.learning_rate;
        let wd = config.weight_decay;
        Self {
            entity: train_graph.then(|| Adam::new(model.graph.entity().len(), lr, 0.0)),
            relation: train_graph.then(|| Adam::new(model.graph.relation().len(), lr, 0.0)),
            w: Adam::new(model.projection.w.len(), lr, wd),
            b: Adam::new(model.projection.b.len(), lr, wd),
            table: match &model.encoder {
                Encoder::Tokens(t) if t.trainable => Some(Adam::new(t.table.len(), lr, wd)),
                _ => None,
            },
        }
    }

    fn step(&mut self, model: &mut OpenWorldModel, g: &ModelGradients) {
        fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
            a.as_slice().expect("standard layout")
        }
        fn flat_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
            a.as_slice_mut().expect("standard layout")
        }
        if let Some(o) = &mut self.entity {
            o.step(flat_mut(model.graph.entity_mut()), flat(&g.entity));
        }
        if let Some(o) = &mut self.relation {
            o.step(flat_mut(model.graph.relation_mut()), flat(&g.relation));
        }
        self.w.step(flat_mut(&mut model.projection.w), flat(&g.w));
        self.b.step(flat_mut(&mut model.projection.b), flat(&g.b));
        if let (Some(o), Encoder::Tokens(t), Some(gt)) =
            (&mut self.table, &mut model.encoder, &g.table)
        {
            o.step(flat_mut(&mut t.table), flat(gt));
        }
    }
}

type Validation<'a> = Option<&'a mut dyn FnMut(&OpenWorldModel) -> f64>;

fn is_finite(model: &OpenWorldModel) -> bool {
    let enc_ok = match &model.encoder {
        Encoder::Tokens(t) => t.table.iter().all(|x| x.is_finite()),
        Encoder::External { .. } => true,
    };
    enc_ok
        && model.graph.is_finite()
        && model.projection.w.iter().chain(model.projection.b.iter()).all(|x| x.is_finite())
}

/// Shared epoch loop with early stopping on the validation callback.
fn drive<S>(
    model: &mut OpenWorldModel,
    config: &InductiveTrainConfig,
    train_graph: bool,
    mut samples: impl FnMut(&mut Rng) -> Vec<S>,
    gradient: impl Fn(&OpenWorldModel, &[S]) -> Result<(f64, ModelGradients), InductiveError>,
    mut validation: Validation<'_>,
) -> Result<(Vec<EpochStats>, bool, usize), InductiveError> {
    let mut rng = rng::seeded(rng::derive_seed(config.seed, "inductive/samples"));
    let mut opt = Optimizers::new(model, config, train_graph);
    let mut history = Vec::new();
    let mut best: Option<(f64, OpenWorldModel)> = None;
    let mut stale = 0;
    let mut stopped_early = false;
    let mut per_epoch = 0;
    for epoch in 1..=config.max_epochs {
        let mut batch = samples(&mut rng);
        if batch.is_empty() {
            return Err(InductiveError::NoSamples);
        }
        per_epoch = batch.len();
        batch.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in batch.chunks(config.batch_size) {
            let (loss, g) = gradient(model, chunk)?;
            if !loss.is_finite() {
                return Err(InductiveError::Diverged { epoch, loss });
            }
            sum += loss * chunk.len() as f64;
            opt.step(model, &g);
        }
        let loss = sum / batch.len() as f64;
        if !is_finite(model) {
            return Err(InductiveError::Diverged { epoch, loss });
        }
        let val = validation.as_deref_mut().map(|f| f(model));
        log::debug!("inductive epoch {epoch}: loss {loss:.5} validation {val:?}");
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
                        best = Some((v, model.clone()));
                    }
                }
                _ => {
                    stale = 0;
                    best = Some((v, model.clone()));
                }
            }
            if stale >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, m)) = best {
        *model = m;
    }
    Ok((history, stopped_early, per_epoch))
}

fn incident_triples(graph: &KnowledgeGraph) -> Vec<Vec<Triple>> {
    let mut out = vec![Vec::new(); graph.vertex_count()];
    for t in graph.triples() {
        out[t.head].push(*t);
        if t.tail != t.head {
            out[t.tail].push(*t);
        }
    }
    out
}

/// Trains encoder, projection and graph embeddings end to end.
///
/// Each sample takes a mention's context group, draws a closed triple
/// incident to the mention's vertex and predicts the other endpoint with a
/// softmax over all closed-world vertices.
pub fn train_joint(
    bundle: &DatasetBundle,
    text: TextSetup<'_>,
    config: &InductiveTrainConfig,
    validation: Validation<'_>,
) -> Result<InductiveOutcome, InductiveError> {
    config.validate()?;
    let graph = bundle.closed_graph();
    let embeddings = ComplexEmbeddings::random(
        graph.vertex_count(),
        graph.relation_count(),
        config.dim,
        rng::derive_seed(config.seed, "joint/graph-init"),
    );
    let encoder = build_encoder(text, config);
    let projection = Projection::random(
        encoder.dim(),
        config.dim,
        rng::derive_seed(config.seed, "projection/init"),
    );
    let mut model = OpenWorldModel::new(encoder, projection, embeddings, config.mode())?;
    let features = training_features(bundle, text, config.masked)?;

    let (units, without_contexts) = mention_units(bundle);
    let incident = incident_triples(graph);
    let mut with_contexts: Vec<usize> = units.iter().map(|(v, _)| *v).collect();
    with_contexts.dedup();
    let without_triples = with_contexts.iter().filter(|v| incident[**v].is_empty()).count();
    let units: Vec<_> = units.into_iter().filter(|(v, _)| !incident[*v].is_empty()).collect();

    let make = |rng: &mut Rng| {
        context_groups(&units, config, rng)
            .into_iter()
            .map(|(v, contexts)| {
                let t = *incident[v].choose(rng).expect("filtered to vertices with triples");
                if t.head == v {
                    JointSample {
                        contexts,
                        relation: t.relation,
                        target: t.tail,
                        direction: Direction::Tail,
                    }
                } else {
                    JointSample {
                        contexts,
                        relation: t.relation,
                        target: t.head,
                        direction: Direction::Head,
                    }
                }
            })
            .collect()
    };
    let reg = config.regularizer_weight;
    let (history, stopped_early, per_epoch) = drive(
        &mut model,
        config,
        true,
        make,
        |m, b| joint_batch_gradient(m, &features, b, reg),
        validation,
    )?;
    Ok(InductiveOutcome {
        model,
        history,
        report: SampleReport {
            mentions: units.len(),
            samples_per_epoch: per_epoch,
            vertices_without_contexts: without_contexts,
            vertices_without_triples: without_triples,
        },
        stopped_early,
    })
}

/// Aligns projected text representations with frozen graph embeddings.
pub fn train_owe(
    bundle: &DatasetBundle,
    pretrained: &ComplexEmbeddings,
    text: TextSetup<'_>,
    config: &InductiveTrainConfig,
    validation: Validation<'_>,
) -> Result<InductiveOutcome, InductiveError> {
    config.validate()?;
    let graph = bundle.closed_graph();
    if pretrained.vertex_count() != graph.vertex_count()
        || pretrained.relation_count() != graph.relation_count()
    {
        return Err(InductiveError::Shape(format!(
            "pretrained embeddings cover {} vertices / {} relations, closed graph has {} / {}",
            pretrained.vertex_count(),
            pretrained.relation_count(),
            graph.vertex_count(),
            graph.relation_count()
        )));
    }
    let encoder = build_encoder(text, config);
    let projection = Projection::random(
        encoder.dim(),
        pretrained.dim(),
        rng::derive_seed(config.seed, "projection/init"),
    );
    let mut model = OpenWorldModel::new(encoder, projection, pretrained.clone(), config.mode())?;
    let features = training_features(bundle, text, config.masked)?;
    let (units, without_contexts) = mention_units(bundle);
    let make = |rng: &mut Rng| {
        context_groups(&units, config, rng)
            .into_iter()
            .map(|(vertex, contexts)| OweSample { contexts, vertex })
            .collect()
    };
    let (history, stopped_early, per_epoch) = drive(
        &mut model,
        config,
        false,
        make,
        |m, b| owe_batch_gradient(m, &features, b),
        validation,
    )?;
    Ok(InductiveOutcome {
        model,
        history,
        report: SampleReport {
            mentions: units.len(),
            samples_per_epoch: per_epoch,
            vertices_without_contexts: without_contexts,
            vertices_without_triples: 0,
        },
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::TokenEncoder;
    use ndarray::array;

    fn tiny_model() -> OpenWorldModel {
        OpenWorldModel::new(
            Encoder::Tokens(TokenEncoder::random(5, 2, true, 1)),
            Projection::random(2, 1, 2),
            ComplexEmbeddings::random(3, 1, 1, 3),
            Mode::Single,
        )
        .unwrap()
    }

    #[test]
    fn owe_loss_hand_example() {
        let mut m = tiny_model();
        m.graph.entity_mut().row_mut(0).fill(0.0);
        m.projection = Projection::new(Array2::zeros((2, 2)), array![1.0, 1.0]).unwrap();
        let f = Features::Tokens(vec![vec![2, 3]]);
        let batch = [OweSample {
            contexts: vec![0],
            vertex: 0,
        }];
        assert!((owe_batch_loss(&m, &f, &batch).unwrap() - 1.0).abs() < 1e-12);

        let target = m.graph.entity_row(1).to_owned();
        m.projection = Projection::new(Array2::zeros((2, 2)), target).unwrap();
        let batch = [OweSample {
            contexts: vec![0],
            vertex: 1,
        }];
        assert_eq!(owe_batch_loss(&m, &f, &batch).unwrap(), 0.0);
    }

    #[test]
    fn uniform_scores_cost_log_n() {
        let mut m = tiny_model();
        m.graph.entity_mut().fill(0.0);
        let f = Features::Tokens(vec![vec![1]]);
        let batch = [JointSample {
            contexts: vec![0],
            relation: 0,
            target: 2,
            direction: Direction::Tail,
        }];
        let loss = joint_batch_loss(&m, &f, &batch, 0.0).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn modes_follow_contexts_per_sample() {
        let mut c = InductiveTrainConfig::default();
        assert_eq!(c.mode(), Mode::Single);
        c.contexts_per_sample = 4;
        assert_eq!(c.mode(), Mode::Multi);
    }

    #[test]
    fn presets_load() {
        for name in crate::config::presets::names().filter(|n| n.starts_with("joint") || n.starts_with("owe")) {
            let kv = crate::config::presets::load(name).unwrap();
            InductiveTrainConfig::from_kv(&kv).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
