#![allow(dead_code)]

use std::collections::BTreeSet;

use ndarray::Array2;
use openlink::bow::{BowBaseline, BowParams};
use openlink::builder::{harvest, split, BuildConfig};
use openlink::bundle::{DatasetBundle, SplitName};
use openlink::complex::{
    batch_gradient, batch_loss, filtered_hits, train_closed_world, ComplexEmbeddings,
    KgcTrainConfig,
};
use openlink::eval::{evaluate, EvalConfig, EvalReport, NeuralEngine, Rank, RankedList, Task};
use openlink::graph::{Direction, KnowledgeGraph, Triple};
use openlink::inductive::{
    joint_batch_gradient, joint_batch_loss, owe_batch_gradient, owe_batch_loss, train_joint,
    train_owe, InductiveTrainConfig, JointSample, Mode, ModelGradients, OpenWorldModel, OweSample,
    TextSetup,
};
use openlink::rng;
use openlink::synthetic::{random_graph, random_records, IdentityFixture};
use openlink::text::{Encoder, Features, Projection, TokenEncoder, Vocabulary};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;

/// `‖a − n‖ / max(‖a‖, ‖n‖)`, zero when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale < 1e-12 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

fn central<F: FnMut(&mut [f64]) -> f64>(params: &mut [f64], mut loss: F) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            let orig = params[i];
            params[i] = orig + FD_STEP;
            let up = loss(params);
            params[i] = orig - FD_STEP;
            let down = loss(params);
            params[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub struct MicroShape {
    pub vertices: usize,
    pub relations: usize,
    pub dim: usize,
    pub text_dim: usize,
    pub vocab: usize,
}

pub fn micro_shape(rng: &mut rng::Rng) -> MicroShape {
    MicroShape {
        vertices: rng.random_range(2..=6),
        relations: rng.random_range(1..=3),
        dim: rng.random_range(1..=4),
        text_dim: rng.random_range(1..=4),
        vocab: rng.random_range(3..=7),
    }
}

/// Largest relative error over entity and relation gradients of the
/// closed-world loss on a random micro-instance.
pub fn kgc_gradient_error(seed: u64) -> f64 {
    let mut rng = rng::seeded(seed);
    let s = micro_shape(&mut rng);
    let mut emb = ComplexEmbeddings::random(s.vertices, s.relations, s.dim, seed);
    // larger values make the softmax non-uniform
    emb.entity_mut().mapv_inplace(|x| x * 5.0);
    emb.relation_mut().mapv_inplace(|x| x * 5.0);
    let batch: Vec<Triple> = (0..rng.random_range(1..=4))
        .map(|_| {
            Triple::new(
                rng.random_range(0..s.vertices),
                rng.random_range(0..s.relations),
                rng.random_range(0..s.vertices),
            )
        })
        .collect();
    let reg = 0.3;
    let (_, g) = batch_gradient(&emb, &batch, reg);

    let mut e = emb.clone();
    let ent = e.entity().clone();
    let mut flat = ent.as_slice().unwrap().to_vec();
    let num_e = central(&mut flat, |p| {
        e.entity_mut()
            .assign(&Array2::from_shape_vec(ent.raw_dim(), p.to_vec()).unwrap());
        batch_loss(&e, &batch, reg)
    });
    let mut e = emb.clone();
    let rel = e.relation().clone();
    let mut flat = rel.as_slice().unwrap().to_vec();
    let num_r = central(&mut flat, |p| {
        e.relation_mut()
            .assign(&Array2::from_shape_vec(rel.raw_dim(), p.to_vec()).unwrap());
        batch_loss(&e, &batch, reg)
    });
    relative_error(g.entity.as_slice().unwrap(), &num_e)
        .max(relative_error(g.relation.as_slice().unwrap(), &num_r))
}

#[derive(Clone, Copy)]
enum Param {
    Entity,
    Relation,
    W,
    B,
    Table,
}

fn param_mut(model: &mut OpenWorldModel, p: Param) -> &mut [f64] {
    match p {
        Param::Entity => model.graph.entity_mut().as_slice_mut().unwrap(),
        Param::Relation => model.graph.relation_mut().as_slice_mut().unwrap(),
        Param::W => model.projection.w.as_slice_mut().unwrap(),
        Param::B => model.projection.b.as_slice_mut().unwrap(),
        Param::Table => match &mut model.encoder {
            Encoder::Tokens(t) => t.table.as_slice_mut().unwrap(),
            Encoder::External { .. } => unreachable!("token encoder expected"),
        },
    }
}

fn analytic(g: &ModelGradients, p: Param) -> Vec<f64> {
    match p {
        Param::Entity => g.entity.as_slice().unwrap().to_vec(),
        Param::Relation => g.relation.as_slice().unwrap().to_vec(),
        Param::W => g.w.as_slice().unwrap().to_vec(),
        Param::B => g.b.as_slice().unwrap().to_vec(),
        Param::Table => g.table.as_ref().unwrap().as_slice().unwrap().to_vec(),
    }
}

fn numeric(
    model: &OpenWorldModel,
    p: Param,
    loss: &dyn Fn(&OpenWorldModel) -> f64,
) -> Vec<f64> {
    let mut m = model.clone();
    let n = param_mut(&mut m, p).len();
    (0..n)
        .map(|i| {
            let orig = param_mut(&mut m, p)[i];
            param_mut(&mut m, p)[i] = orig + FD_STEP;
            let up = loss(&m);
            param_mut(&mut m, p)[i] = orig - FD_STEP;
            let down = loss(&m);
            param_mut(&mut m, p)[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn micro_model(s: &MicroShape, seed: u64, mode: Mode) -> (OpenWorldModel, Features) {
    let mut rng = rng::seeded(rng::derive_seed(seed, "micro/features"));
    let mut enc = TokenEncoder::random(s.vocab, s.text_dim, true, seed);
    enc.table.mapv_inplace(|x| x * 5.0);
    let mut graph = ComplexEmbeddings::random(s.vertices, s.relations, s.dim, seed + 1);
    graph.entity_mut().mapv_inplace(|x| x * 5.0);
    graph.relation_mut().mapv_inplace(|x| x * 5.0);
    let mut proj = Projection::random(s.text_dim, s.dim, seed + 2);
    proj.b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    let model = OpenWorldModel::new(Encoder::Tokens(enc), proj, graph, mode).unwrap();
    let features = Features::Tokens(
        (0..6)
            .map(|_| {
                (0..rng.random_range(1..=4))
                    .map(|_| rng.random_range(0..s.vocab as u32))
                    .collect()
            })
            .collect(),
    );
    (model, features)
}

fn context_group(rng: &mut rng::Rng, mode: Mode) -> Vec<usize> {
    let n = match mode {
        Mode::Single => 1,
        Mode::Multi => rng.random_range(1..=3),
    };
    (0..n).map(|_| rng.random_range(0..6)).collect()
}

/// Largest relative error over all JOINT parameter groups.
pub fn joint_gradient_error(seed: u64, mode: Mode) -> f64 {
    let mut rng = rng::seeded(seed);
    let s = micro_shape(&mut rng);
    let (model, features) = micro_model(&s, seed, mode);
    let batch: Vec<JointSample> = (0..rng.random_range(1..=3))
        .map(|_| JointSample {
            contexts: context_group(&mut rng, mode),
            relation: rng.random_range(0..s.relations),
            target: rng.random_range(0..s.vertices),
            direction: if rng.random_bool(0.5) {
                Direction::Tail
            } else {
                Direction::Head
            },
        })
        .collect();
    let reg = 0.1;
    let (_, g) = joint_batch_gradient(&model, &features, &batch, reg).unwrap();
    let loss = |m: &OpenWorldModel| joint_batch_loss(m, &features, &batch, reg).unwrap();
    [Param::Entity, Param::Relation, Param::W, Param::B, Param::Table]
        .into_iter()
        .map(|p| relative_error(&analytic(&g, p), &numeric(&model, p, &loss)))
        .fold(0.0, f64::max)
}

/// Largest relative error over the trainable OWE parameter groups.
pub fn owe_gradient_error(seed: u64, mode: Mode) -> f64 {
    let mut rng = rng::seeded(seed);
    let s = micro_shape(&mut rng);
    let (model, features) = micro_model(&s, seed, mode);
    let batch: Vec<OweSample> = (0..rng.random_range(1..=3))
        .map(|_| OweSample {
            contexts: context_group(&mut rng, mode),
            vertex: rng.random_range(0..s.vertices),
        })
        .collect();
    let (_, g) = owe_batch_gradient(&model, &features, &batch).unwrap();
    let loss = |m: &OpenWorldModel| owe_batch_loss(m, &features, &batch).unwrap();
    [Param::W, Param::B, Param::Table]
        .into_iter()
        .map(|p| relative_error(&analytic(&g, p), &numeric(&model, p, &loss)))
        .fold(0.0, f64::max)
}

/// Closed-world settings used for the synthetic memorization and
/// pretraining runs.
pub fn synthetic_kgc_config(dim: usize, max_epochs: usize, seed: u64) -> KgcTrainConfig {
    KgcTrainConfig {
        dim,
        learning_rate: 0.5,
        regularizer_weight: 0.0,
        batch_size: 64,
        max_epochs,
        seed,
        ..Default::default()
    }
}

/// Training hits@1 on the 50-vertex, 5-relation permutation graph.
pub fn memorization_hits(seed: u64) -> f64 {
    let graph = openlink::synthetic::permutation_graph(50, 5, seed);
    let out = train_closed_world(&graph, &synthetic_kgc_config(32, 500, seed), None).unwrap();
    filtered_hits(&out.embeddings, &graph, graph.triples(), 1)
}

/// Filtered rank by materializing the filtered list and searching it.
pub fn brute_rank<T: Ord + Clone>(
    ranked: &RankedList<T>,
    truths: &BTreeSet<T>,
    target: &T,
) -> Rank {
    let filtered: Vec<&T> = ranked
        .items()
        .iter()
        .map(|(id, _)| id)
        .filter(|id| *id == target || !truths.contains(*id))
        .collect();
    match filtered.iter().position(|id| *id == target) {
        Some(p) => Rank::Found(p + 1),
        None => Rank::Missed {
            candidates: filtered.len(),
        },
    }
}

/// hits@k and MRR from plain rank numbers; `None` marks a miss.
pub fn brute_metrics(ranks: &[Option<usize>], k: usize) -> (f64, f64) {
    let n = ranks.len() as f64;
    let hits = ranks.iter().filter(|r| matches!(r, Some(x) if *x <= k)).count() as f64 / n;
    let mrr = ranks.iter().map(|r| r.map_or(0.0, |x| 1.0 / x as f64)).sum::<f64>() / n;
    (hits, mrr)
}

/// A random graph plus harvested mentions, split with random settings.
pub struct SplitCase {
    pub graph: KnowledgeGraph,
    pub concepts: BTreeSet<String>,
    pub config: BuildConfig,
    pub harvest: openlink::builder::Harvest,
}

pub fn split_case(seed: u64) -> SplitCase {
    let mut rng = rng::seeded(seed);
    let nv = rng.random_range(8..=30);
    let nr = rng.random_range(1..=4);
    let nt = rng.random_range(nv..=4 * nv);
    let graph = random_graph(nv, nr, nt, rng::derive_seed(seed, "graph"));
    let records = random_records(&graph, 5, 3, rng::derive_seed(seed, "records"));
    let concepts: BTreeSet<String> = (0..nv)
        .filter(|_| rng.random_bool(0.1))
        .map(|v| graph.vertices().id(v).to_owned())
        .collect();
    let config = BuildConfig {
        total_relation_count: nr,
        closed_world_threshold: rng.random_bool(0.5).then(|| rng.random_range(1..=3)),
        target_mention_split: rng.random_range(0.3..0.8),
        target_validation_split: rng.random_range(0.2..0.6),
        mention_threshold: rng.random_range(1..=2),
        seed: rng::derive_seed(seed, "split"),
        ..Default::default()
    };
    let harvest = harvest(records, config.mention_threshold);
    SplitCase {
        graph,
        concepts,
        config,
        harvest,
    }
}

impl SplitCase {
    pub fn run(&self) -> Result<DatasetBundle, openlink::builder::BuildError> {
        split(
            &self.graph,
            &self.harvest.mentions,
            &self.harvest.contexts,
            &self.concepts,
            &self.config,
        )
        .map(|(b, _)| b)
    }
}

/// Every partition and task-triple property a built bundle must satisfy.
pub fn split_violations(case: &SplitCase, bundle: &DatasetBundle) -> Vec<String> {
    let mut out = Vec::new();
    let mentions = &case.harvest.mentions;
    let closed = &bundle.closed().mentions;
    let (val, test) = (&bundle.validation().mentions, &bundle.test().mentions);

    // partition of the harvested mentions
    let mut seen = BTreeSet::new();
    for m in closed.ids().chain(val.ids()).chain(test.ids()) {
        if !seen.insert(m.to_owned()) {
            out.push(format!("mention {m} appears twice"));
        }
        if !mentions.contains(m) {
            out.push(format!("mention {m} was not harvested"));
        }
    }
    if seen.len() != mentions.len() {
        out.push(format!("{} of {} mentions placed", seen.len(), mentions.len()));
    }

    // concepts stay closed
    for (id, m) in mentions.iter() {
        if case.concepts.contains(&m.vertex) && !closed.contains(id) {
            out.push(format!("concept mention {id} left the closed world"));
        }
    }

    // threshold
    if let Some(limit) = case.config.closed_world_threshold {
        for (vertex, ids) in closed.by_vertex() {
            if !case.concepts.contains(vertex) && ids.len() > limit {
                out.push(format!("vertex {vertex} keeps {} closed mentions", ids.len()));
            }
        }
    }

    // contexts follow their mentions
    for (name, split_mentions, store) in [
        ("closed", closed, &bundle.closed().contexts),
        ("validation", val, &bundle.validation().contexts),
        ("test", test, &bundle.test().contexts),
    ] {
        for r in store.records() {
            if !split_mentions.contains(&r.mention) {
                out.push(format!("{name} context of foreign mention {}", r.mention));
            }
        }
        for m in split_mentions.ids() {
            if store.of_mention(m).len() != case.harvest.contexts.of_mention(m).len() {
                out.push(format!("{name} mention {m} lost contexts"));
            }
        }
    }

    // closed triples have closed endpoints and are exactly those
    let closed_vertices: BTreeSet<&str> = closed.iter().map(|(_, m)| m.vertex.as_str()).collect();
    let g = &case.graph;
    let expected: BTreeSet<(String, String, String)> = g
        .triples()
        .iter()
        .map(|t| {
            (
                g.vertices().id(t.head).to_owned(),
                g.relations().id(t.relation).to_owned(),
                g.vertices().id(t.tail).to_owned(),
            )
        })
        .filter(|(h, _, t)| closed_vertices.contains(h.as_str()) && closed_vertices.contains(t.as_str()))
        .collect();
    let cg = &bundle.closed().graph;
    let got: BTreeSet<(String, String, String)> = cg
        .triples()
        .iter()
        .map(|t| {
            (
                cg.vertices().id(t.head).to_owned(),
                cg.relations().id(t.relation).to_owned(),
                cg.vertices().id(t.tail).to_owned(),
            )
        })
        .collect();
    if got != expected {
        out.push("closed triples differ from the closed-endpoint triples".into());
    }

    // task triples: exactly the incident triples with a closed other endpoint
    for (name, split) in [("validation", bundle.validation()), ("test", bundle.test())] {
        let mut want = BTreeSet::new();
        for (id, m) in split.mentions.iter() {
            for (h, r, t) in g.triples().iter().map(|t| {
                (
                    g.vertices().id(t.head),
                    g.relations().id(t.relation),
                    g.vertices().id(t.tail),
                )
            }) {
                if h == m.vertex && closed_vertices.contains(t) {
                    want.insert((id.to_owned(), r.to_owned(), t.to_owned(), Direction::Tail));
                }
                if t == m.vertex && closed_vertices.contains(h) {
                    want.insert((id.to_owned(), r.to_owned(), h.to_owned(), Direction::Head));
                }
            }
        }
        let got: BTreeSet<_> = split
            .tasks
            .iter()
            .map(|t| (t.mention.clone(), t.relation.clone(), t.vertex.clone(), t.direction))
            .collect();
        if got != want {
            out.push(format!(
                "{name}: {} task triples, expected {}",
                got.len(),
                want.len()
            ));
        }
    }
    out
}

/// Neural and BOW linking on the identity-token fixture.
pub struct InductiveLinking {
    pub joint: EvalReport,
    pub owe: EvalReport,
    pub bow_shuffled: EvalReport,
}

pub fn identity_text_config(seed: u64) -> InductiveTrainConfig {
    InductiveTrainConfig {
        dim: 32,
        text_dim: 32,
        trainable_encoder: true,
        regularizer_weight: 0.0,
        contexts_per_sample: 5,
        max_contexts: 5,
        masked: false,
        batch_size: 16,
        learning_rate: 0.01,
        weight_decay: 0.0,
        seed,
        max_epochs: 40,
        ..Default::default()
    }
}

pub fn inductive_linking(seed: u64) -> InductiveLinking {
    let fixture = IdentityFixture {
        seed,
        ..Default::default()
    };
    let (bundle, _) = fixture.bundle().unwrap();
    let vocab = Vocabulary::build(
        bundle
            .closed()
            .contexts
            .records()
            .iter()
            .map(|r| r.sentence.as_str()),
        1,
    );
    let text = TextSetup::Tokens(&vocab);
    let eval_config = EvalConfig {
        seed,
        ..Default::default()
    };
    let config = identity_text_config(seed);

    let joint = train_joint(&bundle, text, &config, None).unwrap().model;
    let engine = NeuralEngine::new("joint-multi", joint, &bundle, text).unwrap();
    let joint = evaluate(Task::Linking, &engine, &bundle, SplitName::Test, &eval_config).unwrap();

    let kgc = train_closed_world(
        bundle.closed_graph(),
        &synthetic_kgc_config(config.dim, 300, seed),
        None,
    )
    .unwrap()
    .embeddings;
    let owe = train_owe(&bundle, &kgc, text, &config, None).unwrap().model;
    let engine = NeuralEngine::new("owe-multi", owe, &bundle, text).unwrap();
    let owe = evaluate(Task::Linking, &engine, &bundle, SplitName::Test, &eval_config).unwrap();

    let shuffled = openlink::synthetic::shuffle_open_contexts(&bundle, seed);
    let bow = BowBaseline::new(&shuffled, BowParams::default());
    let bow_shuffled =
        evaluate(Task::Linking, &bow, &shuffled, SplitName::Test, &eval_config).unwrap();
    InductiveLinking {
        joint,
        owe,
        bow_shuffled,
    }
}

pub fn hits10(r: &EvalReport) -> f64 {
    r.metrics.hits_at(10).unwrap()
}

fn context(mention: &str, sentence: &str) -> openlink::bundle::ContextRecord {
    openlink::bundle::ContextRecord {
        mention: mention.into(),
        origin: "hand".into(),
        sentence: sentence.into(),
    }
}

/// Five closed vertices `A B C D T` with `(A,r,T) (B,r,T) (C,r,D)`; open
/// vertex `X` (test) and `Y` (validation) both point at `T`.
pub fn hand_bundle() -> DatasetBundle {
    use openlink::bundle::{ClosedWorld, ContextStore, MentionMap, OpenSplit, TaskTriple};
    let ids = ["A", "B", "C", "D", "T", "X", "Y", "Z"];
    let graph = KnowledgeGraph::from_ids(
        ids.iter().map(|v| (v.to_string(), format!("vertex {v}"))),
        [("r".to_string(), "relation".to_string())],
        [("A", "T"), ("B", "T"), ("C", "D"), ("X", "T"), ("Y", "T")]
            .iter()
            .map(|(h, t)| (h.to_string(), "r".to_string(), t.to_string())),
    )
    .unwrap();
    let closed_graph = graph.filter_triples(|t| {
        let h = graph.vertices().id(t.head);
        !["X", "Y"].contains(&h)
    });
    let words = [
        ("A", "alpha apple"),
        ("B", "beta banana"),
        ("C", "gamma grape"),
        ("D", "delta date"),
        ("T", "tau tomato"),
    ];
    let mut mentions = MentionMap::new();
    let mut contexts = Vec::new();
    for (v, s) in words {
        let id = format!("{v}#0");
        mentions.insert(id.clone(), v, s.split(' ').next().unwrap());
        contexts.push(context(&id, s));
    }
    let open = |entries: &[(&str, &str, &[&str])], task_vertex: Option<&str>| {
        let mut m = MentionMap::new();
        let mut c = Vec::new();
        let mut tasks = BTreeSet::new();
        for (v, surface, sentences) in entries {
            let id = format!("{v}#0");
            m.insert(id.clone(), *v, *surface);
            for s in *sentences {
                c.push(context(&id, s));
            }
            if let Some(t) = task_vertex.filter(|_| *v != "Z") {
                tasks.insert(TaskTriple {
                    mention: id.clone(),
                    relation: "r".into(),
                    vertex: t.into(),
                    direction: Direction::Tail,
                });
            }
        }
        OpenSplit {
            mentions: m,
            contexts: ContextStore::new(c),
            tasks,
        }
    };
    let test = open(
        &[
            ("X", "alpha", &["alpha apple apple banana"]),
            ("Z", "zeta", &["zeta zucchini"]),
        ],
        Some("T"),
    );
    let validation = open(&[("Y", "beta", &["beta banana"])], Some("T"));
    DatasetBundle::new(
        ClosedWorld {
            graph: closed_graph,
            mentions,
            contexts: ContextStore::new(contexts),
        },
        validation,
        test,
    )
    .unwrap()
}

/// Identity fixture bundle with its closed-context vocabulary.
pub fn identity_bundle(vertices: usize, seed: u64) -> (DatasetBundle, Vocabulary) {
    let (bundle, _) = IdentityFixture {
        vertices,
        seed,
        ..Default::default()
    }
    .bundle()
    .unwrap();
    let vocab = Vocabulary::build(
        bundle.closed().contexts.records().iter().map(|r| r.sentence.as_str()),
        1,
    );
    (bundle, vocab)
}
