mod common;

use common::{hand_bundle, identity_bundle, identity_text_config};
use openlink::bow::{BowBaseline, BowParams};
use openlink::bundle::SplitName;
use openlink::eval::{
    evaluate, link_rank_neural, rank_contexts_neural, EvalConfig, NeuralEngine, Rank, Task,
};
use openlink::graph::Direction;
use openlink::inductive::{train_joint, TextSetup};

fn trained_engine(vertices: usize, epochs: usize) -> (openlink::bundle::DatasetBundle, NeuralEngine) {
    let (bundle, vocab) = identity_bundle(vertices, 1);
    let mut config = identity_text_config(1);
    config.max_epochs = epochs;
    let model = train_joint(&bundle, TextSetup::Tokens(&vocab), &config, None).unwrap().model;
    let engine = NeuralEngine::new("joint", model, &bundle, TextSetup::Tokens(&vocab)).unwrap();
    (bundle, engine)
}

#[test]
fn neural_ranking_is_a_distribution_over_the_subsample() {
    let (bundle, engine) = trained_engine(10, 1);
    let n = bundle.test().contexts.len();
    let full = rank_contexts_neural(&engine, SplitName::Test, 0, 0, Direction::Tail, 400_000, 3).unwrap();
    assert_eq!(full.len(), n);
    let total: f64 = full.items().iter().map(|(_, p)| p).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let part = rank_contexts_neural(&engine, SplitName::Test, 0, 0, Direction::Tail, 7, 3).unwrap();
    assert_eq!(part.len(), 7);
    let again = rank_contexts_neural(&engine, SplitName::Test, 0, 0, Direction::Tail, 7, 3).unwrap();
    assert_eq!(part, again);
}

#[test]
fn neural_linking_ranks_every_closed_vertex() {
    let (bundle, engine) = trained_engine(10, 1);
    let mention = bundle.test().mentions.ids().next().unwrap().to_owned();
    let ranked = link_rank_neural(&engine, SplitName::Test, &mention, 0, Direction::Head, 100, 0).unwrap();
    assert_eq!(ranked.len(), bundle.closed_graph().vertex_count());
    assert!(link_rank_neural(&engine, SplitName::Test, "missing", 0, Direction::Head, 100, 0).is_err());
}

#[test]
fn evaluation_is_deterministic_and_complete() {
    let (bundle, engine) = trained_engine(20, 3);
    let config = EvalConfig {
        seed: 11,
        ..Default::default()
    };
    for task in [Task::Linking, Task::Ranking] {
        let a = evaluate(task, &engine, &bundle, SplitName::Test, &config).unwrap();
        let b = evaluate(task, &engine, &bundle, SplitName::Test, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.metrics.count, bundle.test().tasks.len());
        assert_eq!(a.records.len(), a.metrics.count);
        let h: Vec<f64> = [1, 10, 100].iter().map(|k| a.metrics.hits_at(*k).unwrap()).collect();
        assert!(h[0] <= h[1] && h[1] <= h[2]);
    }
}

#[test]
fn trained_model_links_identity_mentions() {
    let (bundle, engine) = trained_engine(20, 30);
    let report = evaluate(Task::Linking, &engine, &bundle, SplitName::Test, &EvalConfig::default()).unwrap();
    assert!(report.metrics.hits_at(10).unwrap() >= 0.9, "{}", report.to_text());
}

#[test]
fn bow_ranking_on_the_hand_fixture() {
    let bundle = hand_bundle();
    let bow = BowBaseline::new(&bundle, BowParams::default());
    let report = evaluate(Task::Ranking, &bow, &bundle, SplitName::Test, &EvalConfig::default()).unwrap();
    // one query (T, r, tail) with answer X#0
    assert_eq!(report.queries, 1);
    assert_eq!(report.records[0].rank, Rank::Found(1));
    assert_eq!(report.metrics.mrr, 1.0);
    let linking = evaluate(Task::Linking, &bow, &bundle, SplitName::Test, &EvalConfig::default()).unwrap();
    assert_eq!(linking.records[0].rank, Rank::Found(1));
}

#[test]
fn report_renders_every_metric() {
    let bundle = hand_bundle();
    let bow = BowBaseline::new(&bundle, BowParams::default());
    let report = evaluate(Task::Linking, &bow, &bundle, SplitName::Validation, &EvalConfig::default()).unwrap();
    let text = report.to_text();
    for key in ["task = linking", "engine = bow", "hits@1 =", "hits@10 =", "hits@100 =", "mrr =", "ctx_per_mention = 100"] {
        assert!(text.contains(key), "{key}\n{text}");
    }
    let tsv = report.to_tsv();
    assert_eq!(tsv.lines().count(), report.records.len() + 1);
    assert!(evaluate(Task::Linking, &bow, &bundle, SplitName::Closed, &EvalConfig::default()).is_err());
}
