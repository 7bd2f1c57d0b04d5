use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use openlink::bundle::save_graph;
use openlink::synthetic::IdentityFixture;

const BIN: &str = env!("CARGO_BIN_EXE_openlink");

fn openlink(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = openlink(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Raw graph directory and ingestion file of a small identity fixture.
fn raw_inputs(root: &Path) -> (PathBuf, PathBuf) {
    let fx = IdentityFixture {
        vertices: 15,
        seed: 2,
        ..Default::default()
    };
    let graph = root.join("graph");
    save_graph(&fx.graph(), &graph).unwrap();
    let ingestion = root.join("ingestion.tsv");
    let mut text = String::new();
    for r in fx.records() {
        text.push_str(&format!("{}\t{}\t{}\t{}\n", r.vertex, r.mention_surface, r.origin, r.sentence));
    }
    fs::write(&ingestion, text).unwrap();
    (graph, ingestion)
}

const BUILD_SETTINGS: &[&str] = &[
    "--set",
    "concept_relation_count=0",
    "--set",
    "total_relation_count=3",
    "--set",
    "closed_world_threshold=none",
    "--set",
    "mention_threshold=1",
    "--set",
    "target_validation_split=0.2",
    "--seed",
    "4",
];

fn build_dataset(root: &Path, out: &Path) {
    let (graph, ingestion) = raw_inputs(root);
    let mut args = vec!["build-dataset", "--graph", s(&graph), "--ingestion", s(&ingestion), "--out", s(out)];
    args.extend_from_slice(BUILD_SETTINGS);
    ok(&args);
}

const KGC_SETTINGS: &[&str] = &[
    "--preset", "tiny", "--set", "dim=8", "--set", "max_epochs=20", "--set", "learning_rate=0.5", "--set",
    "regularizer_weight=0",
];

fn manifest(dir: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(dir.join("manifest.txt"))
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .collect()
}

fn artifacts(dir: &Path) -> BTreeMap<String, String> {
    manifest(dir)
        .into_iter()
        .filter(|(k, _)| k.starts_with("artifact."))
        .collect()
}

fn assert_one_manifest(dir: &Path) {
    let count = fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("manifest"))
        .count();
    assert_eq!(count, 1, "{}", dir.display());
    // every other file is checksummed
    let files = fs::read_dir(dir).unwrap().count() - 1;
    assert_eq!(artifacts(dir).len(), files, "{}", dir.display());
}

#[test]
fn tiny_kgc_preset_echoes_reference_values() {
    let out = ok(&["train-kgc", "--bundle", "unused", "--preset", "tiny", "--dry-run", "--out", "unused"]);
    for line in ["dim = 300", "learning_rate = 1", "regularizer_weight = 0.3", "batch_size = 64"] {
        assert!(out.lines().any(|l| l == line), "missing {line:?} in\n{out}");
    }
}

#[test]
fn unknown_preset_fails_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    for cmd in ["train-kgc", "train-joint", "train-owe", "build-dataset"] {
        let mut args = vec![cmd, "--preset", "enormous", "--out", s(&out), "--bundle", "b"];
        if cmd == "train-owe" {
            args.extend(["--kgc", "k"]);
        }
        if cmd == "build-dataset" {
            args = vec![cmd, "--preset", "enormous", "--out", s(&out), "--graph", "g", "--ingestion", "i"];
        }
        let r = openlink(&args);
        assert!(!r.status.success(), "{cmd}");
        assert!(String::from_utf8_lossy(&r.stderr).contains("unknown preset"), "{cmd}");
        assert!(!out.exists(), "{cmd} created {}", out.display());
    }
}

#[test]
fn invalid_settings_are_listed_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let r = openlink(&[
        "train-kgc", "--bundle", "missing", "--set", "batch_size=0", "--set", "dim=0", "--out", s(&out),
    ]);
    assert!(!r.status.success());
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("batch_size") && err.contains("dim"), "{err}");
    assert!(!out.exists());
    let r = openlink(&["train-kgc", "--bundle", "missing", "--set", "dimension=3", "--out", s(&out)]);
    assert!(String::from_utf8_lossy(&r.stderr).contains("dimension"));
}

#[test]
fn pipeline_from_raw_inputs_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let bundle = root.join("bundle");
    build_dataset(root, &bundle);
    assert!(bundle.join("tasks.open-test.tsv").is_file());

    let kgc = root.join("kgc");
    let mut args = vec!["train-kgc", "--bundle", s(&bundle), "--out", s(&kgc)];
    args.extend_from_slice(KGC_SETTINGS);
    ok(&args);

    let owe = root.join("owe");
    ok(&[
        "train-owe", "--bundle", s(&bundle), "--kgc", s(&kgc), "--preset", "tiny", "--contexts", "multi", "--set",
        "text_dim=16", "--set", "contexts_per_sample=3", "--set", "max_contexts=5", "--set", "batch_size=8", "--set",
        "learning_rate=0.01", "--set", "max_epochs=3", "--out", s(&owe),
    ]);
    assert!(owe.join("model.ckpt").is_file() && owe.join("vocab.txt").is_file());

    let eval = root.join("eval-owe");
    let text = ok(&[
        "eval", "--task", "linking", "--engine", "owe-multi", "--bundle", s(&bundle), "--model", s(&owe), "--out",
        s(&eval),
    ]);
    let report = fs::read_to_string(eval.join("report.txt")).unwrap();
    assert!(text.starts_with("# eval configuration") && text.ends_with(&report), "{text}");
    for key in ["hits@10 = ", "mrr = ", "ctx_per_mention = 100", "engine = owe-multi", "task = linking"] {
        assert!(report.lines().any(|l| l.starts_with(key)), "missing {key:?} in\n{report}");
    }
    let r = openlink(&[
        "eval", "--task", "linking", "--engine", "owe-single", "--bundle", s(&bundle), "--model", s(&owe), "--out",
        s(&root.join("wrong-mode")),
    ]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("multi"));

    let index = root.join("index");
    ok(&["index-bm25", "--bundle", s(&bundle), "--out", s(&index)]);
    let bow_indexed = root.join("eval-bow-indexed");
    let bow_fresh = root.join("eval-bow");
    ok(&[
        "eval", "--task", "ranking", "--engine", "bow", "--bundle", s(&bundle), "--index", s(&index), "--out",
        s(&bow_indexed),
    ]);
    ok(&["eval", "--task", "ranking", "--engine", "bow", "--bundle", s(&bundle), "--out", s(&bow_fresh)]);
    assert_eq!(
        fs::read(bow_indexed.join("ranks.tsv")).unwrap(),
        fs::read(bow_fresh.join("ranks.tsv")).unwrap()
    );

    let summary = root.join("summary");
    ok(&[
        "report", "--bundle", s(&bundle), "--run", s(&eval), "--run", s(&bow_fresh), "--out", s(&summary),
    ]);
    let table = fs::read_to_string(summary.join("summary.tsv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.contains("owe-multi\tlinking\topen-test"));
    assert!(fs::read_to_string(summary.join("relations.tsv")).unwrap().lines().count() == 4);

    for d in [&bundle, &kgc, &owe, &eval, &index, &bow_indexed, &bow_fresh, &summary] {
        assert_one_manifest(d);
    }
    let verified = ok(&["verify", s(&bundle), s(&kgc), s(&owe), s(&eval), s(&index), s(&summary)]);
    assert_eq!(verified.lines().filter(|l| l.starts_with("ok ")).count(), 6);

    // a tampered artifact is caught
    fs::write(eval.join("ranks.tsv"), "tampered").unwrap();
    assert!(!openlink(&["verify", s(&eval)]).status.success());
    // output directories are never mixed
    let r = openlink(&["eval", "--task", "ranking", "--engine", "bow", "--bundle", s(&bundle), "--out", s(&kgc)]);
    assert!(!r.status.success());
}

#[test]
fn same_command_and_seed_reproduce_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let (a, b) = (root.join("a"), root.join("b"));
    build_dataset(&root.join("ra"), &a);
    build_dataset(&root.join("rb"), &b);
    assert_eq!(artifacts(&a), artifacts(&b));

    let mut runs = Vec::new();
    for name in ["k1", "k2"] {
        let out = root.join(name);
        let mut args = vec!["train-kgc", "--bundle", s(&a), "--out", s(&out)];
        args.extend_from_slice(KGC_SETTINGS);
        ok(&args);
        runs.push(artifacts(&out));
    }
    assert_eq!(runs[0], runs[1]);
    assert!(runs[0].contains_key("artifact.embeddings.ckpt"));

    let mut joint = Vec::new();
    for name in ["j1", "j2"] {
        let out = root.join(name);
        ok(&[
            "train-joint", "--bundle", s(&a), "--set", "dim=8", "--set", "text_dim=8", "--set", "max_epochs=2",
            "--set", "learning_rate=0.01", "--seed", "3", "--out", s(&out),
        ]);
        joint.push(artifacts(&out));
    }
    assert_eq!(joint[0], joint[1]);

    // a different seed changes the result
    let other = root.join("k3");
    let mut args = vec!["train-kgc", "--bundle", s(&a), "--out", s(&other), "--seed", "99"];
    args.extend_from_slice(KGC_SETTINGS);
    ok(&args);
    assert_ne!(artifacts(&other)["artifact.embeddings.ckpt"], runs[0]["artifact.embeddings.ckpt"]);
}

fn http(addr: &str, method: &str, path: &str, body: Option<&str>) -> String {
    let mut stream = TcpStream::connect(addr).unwrap();
    let body = body.unwrap_or("");
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    response
}

#[test]
fn serve_answers_queries_and_seals_the_overlay_on_interrupt() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let bundle = root.join("bundle");
    build_dataset(root, &bundle);
    let session = root.join("session");
    let mut child = Command::new(BIN)
        .args(["serve", "--bundle", s(&bundle), "--addr", "127.0.0.1:0", "--out", s(&session)])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect("address line").to_owned();

    let stats = http(&addr, "GET", "/stats", None);
    assert!(stats.starts_with("HTTP/1.1 200"), "{stats}");
    assert!(stats.contains("\"engines\":[\"bow\"]"));
    let ranking = http(&addr, "GET", "/ranking?vertex=Q0001&relation=P0&limit=2", None);
    assert!(ranking.contains("\"total\""), "{ranking}");
    let missing = http(&addr, "GET", "/linking?mention=nobody&relation=P0", None);
    assert!(missing.contains("unknown-mention"));

    let tasks = fs::read_to_string(bundle.join("tasks.open-test.tsv")).unwrap();
    let mention = tasks.lines().find(|l| !l.starts_with('#')).unwrap().split('\t').next().unwrap().to_owned();
    let body = format!("{{\"mention\":\"{mention}\",\"relation\":\"P0\",\"vertex\":\"Q0002\",\"direction\":\"head\"}}");
    let accepted = http(&addr, "POST", "/triples", Some(&body));
    assert!(accepted.starts_with("HTTP/1.1 201"), "{accepted}");

    let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    assert!(child.wait().unwrap().success());

    let export = fs::read_to_string(session.join("overlay.export.tsv")).unwrap();
    assert!(export.contains(&format!("{mention}\tP0\tQ0002\thead")), "{export}");
    assert_one_manifest(&session);
    assert_eq!(manifest(&session)["command"], "serve");
    ok(&["verify", s(&session)]);
}

#[test]
fn presets_are_listed_and_printed() {
    let list = ok(&["presets"]);
    assert_eq!(list.lines().count(), 40);
    assert!(ok(&["presets", "kgc-tiny"]).contains("regularizer_weight = 0.3"));
    assert!(!openlink(&["presets", "kgc-enormous"]).status.success());
}
