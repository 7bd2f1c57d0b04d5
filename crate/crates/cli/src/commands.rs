//! One function per subcommand. Each resolves and echoes its
//! configuration, prepares the output directory, writes its artifacts and
//! seals them with a manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use openlink::bow::{Bm25Params, BowBaseline, BowParams, InvertedIndex};
use openlink::builder::{build, read_ingestion, relation_ratio, stats_report, BuildConfig};
use openlink::bundle::{load_bundle, load_graph, save_bundle, DatasetBundle, SaveOptions, SplitName};
use openlink::complex::{checkpoint as kgc_checkpoint, filtered_hits, train_closed_world, KgcTrainConfig};
use openlink::config::{KvConfig, KvSchema};
use openlink::eval::{evaluate, Engine, EvalConfig, NeuralEngine, Task};
use openlink::inductive::{
    checkpoint as model_checkpoint, train_joint, train_owe, InductiveOutcome, InductiveTrainConfig, Mode,
    OpenWorldModel, TextSetup,
};
use openlink::rng;
use openlink::text::{Encoder, ExternalEncodings, Vocabulary};
use openlink_workbench::{Overlay, Workspace, WorkspaceConfig};

use crate::manifest::{prepare_output, RunManifest};
use crate::settings::{echo, ConfigArgs, Family};

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Artifact directory; must be empty or absent.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Replace an earlier run of the same command in `--out`.
    #[arg(long)]
    pub overwrite: bool,
}

struct Run {
    command: &'static str,
    started: Instant,
    out: PathBuf,
    inputs: Vec<(String, PathBuf)>,
}

impl Run {
    fn start(command: &'static str, out: &OutArgs) -> Result<Self> {
        prepare_output(&out.out, command, out.overwrite)?;
        Ok(Self {
            command,
            started: Instant::now(),
            out: out.out.clone(),
            inputs: Vec::new(),
        })
    }

    fn input(&mut self, name: &str, path: &Path) {
        self.inputs.push((name.to_owned(), path.to_owned()));
    }

    fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }

    fn write(&self, file: &str, text: &str) -> Result<()> {
        let p = self.path(file);
        fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))
    }

    fn finish(self, config_hash: u64, seed: u64) -> Result<RunManifest> {
        let m = RunManifest {
            command: self.command.to_owned(),
            config_hash,
            seed,
            inputs: self.inputs,
            output: self.out,
            wall_time: self.started.elapsed(),
            artifacts: Vec::new(),
        }
        .seal()?;
        eprintln!(
            "{}: wrote {} artifacts and {}",
            m.command,
            m.artifacts.len(),
            m.output.join(crate::manifest::MANIFEST).display()
        );
        Ok(m)
    }
}

fn load(path: &Path) -> Result<DatasetBundle> {
    load_bundle(path).with_context(|| format!("cannot load bundle {}", path.display()))
}

// ---------------------------------------------------------------- build

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    /// Input graph directory: vertices.tsv, relations.tsv, triples.tsv.
    #[arg(long, value_name = "DIR")]
    pub graph: PathBuf,
    /// Ingestion TSV (vertex, surface, origin, sentence), optionally gzipped.
    #[arg(long, value_name = "FILE")]
    pub ingestion: PathBuf,
    /// Gzip the context files.
    #[arg(long)]
    pub compress: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn build_dataset(args: &BuildArgs) -> Result<()> {
    let resolved = args.config.resolve_over(Family::Build, BuildConfig::default())?;
    echo("build-dataset", &resolved);
    if args.config.dry_run {
        return Ok(());
    }
    let cfg = &resolved.config;
    let graph = load_graph(&args.graph).with_context(|| format!("cannot load graph {}", args.graph.display()))?;
    let records = read_ingestion(&args.ingestion)?;
    let built = build(&graph, records, cfg)?;

    let mut run = Run::start("build-dataset", &args.out)?;
    run.input("graph", &args.graph);
    run.input("ingestion", &args.ingestion);
    save_bundle(
        &built.bundle,
        &run.out,
        SaveOptions {
            compress_contexts: args.compress,
        },
    )?;
    run.write("config.txt", &cfg.to_kv().render())?;

    let mut r = String::new();
    writeln!(r, "kept relations\t{}", built.selection.kept.iter().cloned().collect::<Vec<_>>().join(","))?;
    writeln!(r, "concept relations\t{}", built.selection.concept.join(","))?;
    writeln!(r, "concept vertices\t{}", built.concept_vertices.len())?;
    let h = &built.harvest;
    writeln!(r, "ingested records\t{}", h.records)?;
    writeln!(r, "surface not found\t{}", h.surface_not_found)?;
    writeln!(r, "malformed records\t{}", h.malformed)?;
    writeln!(r, "dropped mentions\t{}", h.dropped_mentions)?;
    writeln!(r, "dropped contexts\t{}", h.dropped_contexts)?;
    let s = &built.split;
    writeln!(r, "pruned by threshold\t{}", s.pruned_by_threshold)?;
    writeln!(r, "discarded open triples\t{}", s.discarded_triples)?;
    write!(r, "{}", stats_report(&built.bundle))?;
    run.write("build_report.txt", &r)?;
    print!("{r}");
    run.finish(cfg.config_hash(), cfg.seed)?;
    Ok(())
}

// ---------------------------------------------------------------- kgc

#[derive(Debug, Clone, Args)]
pub struct KgcArgs {
    #[arg(long, value_name = "DIR")]
    pub bundle: PathBuf,
    /// Train for max_epochs without early stopping.
    #[arg(long)]
    pub no_validation: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Closed triples scored by the early-stopping check.
const KGC_VALIDATION_TRIPLES: usize = 1000;

fn history_tsv(history: &[openlink::complex::EpochStats]) -> String {
    let mut s = String::from("# epoch\tloss\tvalidation_hits@10\n");
    for e in history {
        let v = e.validation.map_or("-".to_owned(), |v| format!("{v:.6}"));
        writeln!(s, "{}\t{:.6}\t{v}", e.epoch, e.loss).expect("write to string");
    }
    s
}

pub fn train_kgc(args: &KgcArgs) -> Result<()> {
    let resolved = args.config.resolve_over(Family::Kgc, KgcTrainConfig::default())?;
    echo("train-kgc", &resolved);
    if args.config.dry_run {
        return Ok(());
    }
    let cfg = &resolved.config;
    let bundle = load(&args.bundle)?;
    let graph = bundle.closed_graph();
    let mut run = Run::start("train-kgc", &args.out)?;
    run.input("bundle", &args.bundle);

    let sample = rng::sample_sorted(
        graph.triples(),
        KGC_VALIDATION_TRIPLES,
        &mut rng::seeded(rng::derive_seed(cfg.seed, "kgc/validation")),
    );
    let mut check = |emb: &openlink::complex::ComplexEmbeddings| filtered_hits(emb, graph, &sample, 10);
    let validation: Option<&mut dyn FnMut(&openlink::complex::ComplexEmbeddings) -> f64> =
        if args.no_validation { None } else { Some(&mut check) };
    let outcome = train_closed_world(graph, cfg, validation)?;

    kgc_checkpoint::save(run.path("embeddings.ckpt"), &outcome.embeddings, cfg.seed, cfg.config_hash())?;
    run.write("history.tsv", &history_tsv(&outcome.history))?;
    run.write("config.txt", &cfg.to_kv().render())?;
    run.finish(cfg.config_hash(), cfg.seed)?;
    Ok(())
}

// ---------------------------------------------------------------- joint / owe

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Contexts {
    Single,
    Multi,
}

impl Contexts {
    fn as_str(self) -> &'static str {
        match self {
            Contexts::Single => "single",
            Contexts::Multi => "multi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Linking,
    Ranking,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Linking => Task::Linking,
            TaskArg::Ranking => Task::Ranking,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InductiveArgs {
    #[arg(long, value_name = "DIR")]
    pub bundle: PathBuf,
    /// Precomputed context encodings; the token encoder is used otherwise.
    #[arg(long, value_name = "FILE")]
    pub encodings: Option<PathBuf>,
    /// Minimum token count for the vocabulary of the token encoder.
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    /// Preset column when `--preset` names only a split.
    #[arg(long, value_enum, default_value_t = Contexts::Multi)]
    pub contexts: Contexts,
    /// Use the ranking column of the preset tables.
    #[arg(long)]
    pub ranking: bool,
    /// Task scored on the validation split for early stopping.
    #[arg(long, value_enum, default_value_t = TaskArg::Linking)]
    pub validate_on: TaskArg,
    #[arg(long)]
    pub no_validation: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OweArgs {
    /// Pretrained closed-world embeddings: a file or a train-kgc output directory.
    #[arg(long, value_name = "PATH")]
    pub kgc: PathBuf,
    #[command(flatten)]
    pub common: InductiveArgs,
}

enum Text {
    Tokens(Vocabulary),
    External(ExternalEncodings),
}

impl Text {
    fn setup(&self) -> TextSetup<'_> {
        match self {
            Text::Tokens(v) => TextSetup::Tokens(v),
            Text::External(e) => TextSetup::External(e),
        }
    }
}

fn open_text(bundle: &DatasetBundle, encodings: Option<&Path>, min_count: usize) -> Result<Text> {
    Ok(match encodings {
        Some(p) => Text::External(
            ExternalEncodings::import(p).with_context(|| format!("cannot read encodings {}", p.display()))?,
        ),
        None => Text::Tokens(Vocabulary::build(
            bundle.closed().contexts.records().iter().map(|r| r.sentence.as_str()),
            min_count,
        )),
    })
}

fn run_inductive(
    method: &'static str,
    args: &InductiveArgs,
    train: impl FnOnce(&DatasetBundle, TextSetup<'_>, &InductiveTrainConfig, &mut dyn FnMut(&OpenWorldModel) -> f64, bool) -> Result<InductiveOutcome>,
    extra_input: Option<&Path>,
) -> Result<()> {
    let family = Family::Inductive {
        method,
        contexts: args.contexts.as_str(),
        ranking: args.ranking,
    };
    let command = if method == "joint" { "train-joint" } else { "train-owe" };
    let resolved = args.config.resolve_over(family, InductiveTrainConfig::default())?;
    echo(command, &resolved);
    if args.config.dry_run {
        return Ok(());
    }
    let cfg = &resolved.config;
    let bundle = load(&args.bundle)?;
    let text = open_text(&bundle, args.encodings.as_deref(), args.min_count)?;
    let mut run = Run::start(command, &args.out)?;
    run.input("bundle", &args.bundle);
    if let Some(p) = &args.encodings {
        run.input("encodings", p);
    }
    if let Some(p) = extra_input {
        run.input("kgc", p);
    }

    let task: Task = args.validate_on.into();
    let eval_cfg = EvalConfig {
        seed: rng::derive_seed(cfg.seed, "validation"),
        ..Default::default()
    };
    let use_validation = !args.no_validation && !bundle.validation().tasks.is_empty();
    let setup = text.setup();
    let mut check = |model: &OpenWorldModel| -> f64 {
        let scored = NeuralEngine::new("validation", model.clone(), &bundle, setup)
            .and_then(|e| evaluate(task, &e, &bundle, SplitName::Validation, &eval_cfg));
        match scored {
            Ok(r) => r.metrics.hits_at(10).unwrap_or(0.0),
            Err(e) => {
                log::warn!("validation failed: {e}");
                0.0
            }
        }
    };
    let outcome = train(&bundle, setup, cfg, &mut check, use_validation)?;

    model_checkpoint::save(run.path("model.ckpt"), &outcome.model, cfg.seed, cfg.config_hash())?;
    if let Text::Tokens(v) = &text {
        v.save(run.path("vocab.txt"))?;
    }
    run.write("history.tsv", &history_tsv(&outcome.history))?;
    let r = &outcome.report;
    run.write(
        "samples.txt",
        &format!(
            "mentions = {}\nsamples_per_epoch = {}\nvertices_without_contexts = {}\nvertices_without_triples = {}\nstopped_early = {}\n",
            r.mentions, r.samples_per_epoch, r.vertices_without_contexts, r.vertices_without_triples, outcome.stopped_early
        ),
    )?;
    run.write("config.txt", &cfg.to_kv().render())?;
    run.finish(cfg.config_hash(), cfg.seed)?;
    Ok(())
}

pub fn train_joint_cmd(args: &InductiveArgs) -> Result<()> {
    run_inductive(
        "joint",
        args,
        |bundle, text, cfg, check, validate| {
            Ok(train_joint(bundle, text, cfg, validate.then_some(check))?)
        },
        None,
    )
}

fn kgc_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("embeddings.ckpt")
    } else {
        path.to_owned()
    }
}

pub fn train_owe_cmd(args: &OweArgs) -> Result<()> {
    let file = kgc_file(&args.kgc);
    run_inductive(
        "owe",
        &args.common,
        |bundle, text, cfg, check, validate| {
            let (_, pretrained) = kgc_checkpoint::load(&file)
                .with_context(|| format!("cannot load embeddings {}", file.display()))?;
            Ok(train_owe(bundle, &pretrained, text, cfg, validate.then_some(check))?)
        },
        Some(&args.kgc),
    )
}

// ---------------------------------------------------------------- bm25

#[derive(Debug, Clone, Args)]
pub struct BowArgs {
    #[arg(long, default_value_t = 1.2)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.75)]
    pub b: f64,
    /// Representatives sampled per ranking query.
    #[arg(long, default_value_t = 10)]
    pub n_repr: usize,
    /// Contexts sampled per representative or mention.
    #[arg(long, default_value_t = 20)]
    pub n_ctx: usize,
    /// Vertex documents retrieved per linking query.
    #[arg(long, default_value_t = 25)]
    pub top_n: usize,
}

impl BowArgs {
    fn params(&self) -> BowParams {
        BowParams {
            bm25: Bm25Params { k1: self.k1, b: self.b },
            n_repr: self.n_repr,
            n_ctx: self.n_ctx,
            top_n: self.top_n,
        }
    }
}

fn params_kv(p: &BowParams) -> KvConfig {
    let mut kv = KvConfig::new();
    kv.set("k1", p.bm25.k1);
    kv.set("b", p.bm25.b);
    kv.set("n_repr", p.n_repr);
    kv.set("n_ctx", p.n_ctx);
    kv.set("top_n", p.top_n);
    kv
}

fn params_from_kv(kv: &KvConfig) -> Result<BowParams> {
    kv.expect_keys(&["k1", "b", "n_repr", "n_ctx", "top_n", "seed"])?;
    let d = BowParams::default();
    Ok(BowParams {
        bm25: Bm25Params {
            k1: kv.get("k1")?.unwrap_or(d.bm25.k1),
            b: kv.get("b")?.unwrap_or(d.bm25.b),
        },
        n_repr: kv.get("n_repr")?.unwrap_or(d.n_repr),
        n_ctx: kv.get("n_ctx")?.unwrap_or(d.n_ctx),
        top_n: kv.get("top_n")?.unwrap_or(d.top_n),
    })
}

fn check_params(p: &BowParams) -> Result<()> {
    let mut problems = Vec::new();
    if !(0.0..=f64::MAX).contains(&p.bm25.k1) {
        problems.push(format!("k1 must be non-negative and finite, got {}", p.bm25.k1));
    }
    if !(0.0..=1.0).contains(&p.bm25.b) {
        problems.push(format!("b must lie in [0, 1], got {}", p.bm25.b));
    }
    for (name, v) in [("n_repr", p.n_repr), ("n_ctx", p.n_ctx), ("top_n", p.top_n)] {
        if v == 0 {
            problems.push(format!("{name} must be positive"));
        }
    }
    if !problems.is_empty() {
        bail!("invalid configuration:\n  {}", problems.join("\n  "));
    }
    Ok(())
}

const INDEX_FILES: [(&str, Option<SplitName>); 3] = [
    ("vertices.idx", None),
    ("open-validation.idx", Some(SplitName::Validation)),
    ("open-test.idx", Some(SplitName::Test)),
];

#[derive(Debug, Clone, Args)]
pub struct IndexArgs {
    #[arg(long, value_name = "DIR")]
    pub bundle: PathBuf,
    #[command(flatten)]
    pub bow: BowArgs,
    /// Recorded with the index and used as the default evaluation seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn index_bm25(args: &IndexArgs) -> Result<()> {
    let params = args.bow.params();
    check_params(&params)?;
    let mut kv = params_kv(&params);
    kv.set("seed", args.seed);
    println!("# index-bm25 configuration");
    print!("{}", kv.render());
    let bundle = load(&args.bundle)?;
    let mut run = Run::start("index-bm25", &args.out)?;
    run.input("bundle", &args.bundle);
    let bow = BowBaseline::new(&bundle, params);
    for (file, split) in INDEX_FILES {
        let index = match split {
            None => bow.vertex_index(),
            Some(s) => bow.context_index(s).context("open split index")?,
        };
        index.save(run.path(file))?;
    }
    run.write("params.txt", &kv.render())?;
    run.finish(kv.hash(), args.seed)?;
    Ok(())
}

fn load_bow(bundle: &DatasetBundle, dir: &Path) -> Result<(BowBaseline, KvConfig)> {
    let kv = KvConfig::load(dir.join("params.txt"))?;
    let params = params_from_kv(&kv)?;
    let mut indexes = Vec::new();
    for (file, _) in INDEX_FILES {
        let p = dir.join(file);
        indexes.push(InvertedIndex::load(&p).with_context(|| format!("cannot load index {}", p.display()))?);
    }
    let [v, val, test]: [InvertedIndex; 3] = indexes.try_into().expect("three index files");
    Ok((BowBaseline::with_indexes(bundle, params, v, val, test)?, kv))
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Validation,
    Test,
}

impl From<SplitArg> for SplitName {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Validation => SplitName::Validation,
            SplitArg::Test => SplitName::Test,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// Trained model: a model.ckpt file or a train-joint/train-owe output directory.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Vocabulary of a token-encoder model; defaults to vocab.txt next to the model.
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    /// Context encodings for a model trained on precomputed vectors.
    #[arg(long, value_name = "FILE")]
    pub encodings: Option<PathBuf>,
    /// index-bm25 output directory; indexes are built in memory otherwise.
    #[arg(long, value_name = "DIR")]
    pub index: Option<PathBuf>,
    #[command(flatten)]
    pub bow: BowArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// bow, joint-single, joint-multi, owe-single or owe-multi.
    #[arg(long)]
    pub engine: String,
    #[arg(long, value_name = "DIR")]
    pub bundle: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Query-corpus contexts sampled per ranking query.
    #[arg(long)]
    pub subsample_ranking: Option<usize>,
    /// Contexts sampled per mention for linking.
    #[arg(long)]
    pub ctx_per_mention: Option<usize>,
    #[command(flatten)]
    pub engine_args: EngineArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

const ENGINES: &[&str] = &["bow", "joint-single", "joint-multi", "owe-single", "owe-multi"];

fn model_paths(args: &EngineArgs) -> Result<Option<(PathBuf, Option<PathBuf>)>> {
    let Some(model) = &args.model else {
        return Ok(None);
    };
    let (file, dir) = if model.is_dir() {
        (model.join("model.ckpt"), model.clone())
    } else {
        (model.clone(), model.parent().map_or_else(PathBuf::new, Path::to_owned))
    };
    let vocab = args.vocab.clone().or_else(|| {
        let v = dir.join("vocab.txt");
        v.is_file().then_some(v)
    });
    Ok(Some((file, vocab)))
}

fn load_neural(bundle: &DatasetBundle, name: &str, args: &EngineArgs) -> Result<NeuralEngine> {
    let (file, vocab) = model_paths(args)?.with_context(|| format!("engine {name} needs --model"))?;
    let (model, _) =
        model_checkpoint::load(&file).with_context(|| format!("cannot load model {}", file.display()))?;
    if let Some(suffix) = name.split('-').nth(1) {
        let want = if suffix == "single" { Mode::Single } else { Mode::Multi };
        if model.mode != want {
            bail!("{} holds a {} model, not {name}", file.display(), model.mode.as_str());
        }
    }
    let engine = match &model.encoder {
        Encoder::Tokens(_) => {
            let vocab = vocab.context("token-encoder model needs --vocab (or vocab.txt next to it)")?;
            let v = Vocabulary::load(&vocab)?;
            NeuralEngine::new(name, model, bundle, TextSetup::Tokens(&v))?
        }
        Encoder::External { .. } => {
            let p = args.encodings.as_ref().context("model uses precomputed encodings; pass --encodings")?;
            let e = ExternalEncodings::import(p)?;
            NeuralEngine::new(name, model, bundle, TextSetup::External(&e))?
        }
    };
    Ok(engine)
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    if !ENGINES.contains(&args.engine.as_str()) {
        bail!("unknown engine {:?} (expected one of {})", args.engine, ENGINES.join(", "));
    }
    let mut base = EvalConfig::default();
    if let Some(n) = args.subsample_ranking {
        base.subsample_ranking = n;
    }
    if let Some(n) = args.ctx_per_mention {
        base.ctx_per_mention = n;
    }
    let resolved = args.config.resolve_over(Family::None, base)?;
    echo("eval", &resolved);
    if args.engine == "bow" {
        check_params(&args.engine_args.bow.params())?;
    } else if args.engine_args.model.is_none() {
        bail!("engine {} needs --model", args.engine);
    }
    if args.config.dry_run {
        return Ok(());
    }
    let cfg = &resolved.config;
    let bundle = load(&args.bundle)?;
    let engine: Box<dyn Engine> = if args.engine == "bow" {
        match &args.engine_args.index {
            Some(dir) => Box::new(load_bow(&bundle, dir)?.0),
            None => Box::new(BowBaseline::new(&bundle, args.engine_args.bow.params())),
        }
    } else {
        Box::new(load_neural(&bundle, &args.engine, &args.engine_args)?)
    };

    let mut run = Run::start("eval", &args.out)?;
    run.input("bundle", &args.bundle);
    if let Some((file, vocab)) = model_paths(&args.engine_args)? {
        run.input("model", &file);
        if let Some(v) = vocab {
            run.input("vocab", &v);
        }
    }
    for (name, p) in [("encodings", &args.engine_args.encodings), ("index", &args.engine_args.index)] {
        if let Some(p) = p {
            run.input(name, p);
        }
    }
    let mut report = evaluate(args.task.into(), engine.as_ref(), &bundle, args.split.into(), cfg)?;
    report.engine = args.engine.clone();
    report.write(run.path("report.txt"), Some(&run.path("ranks.tsv")))?;
    run.write("config.txt", &cfg.to_kv().render())?;
    print!("{}", report.to_text());
    run.finish(cfg.config_hash(), cfg.seed)?;
    Ok(())
}

// ---------------------------------------------------------------- serve

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "DIR")]
    pub bundle: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Open split explored by ranking queries.
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Overlay log to replay and append to; defaults to overlay.log.tsv in `--out`.
    #[arg(long, value_name = "FILE")]
    pub overlay: Option<PathBuf>,
    /// Directory receiving the overlay export and manifest at shutdown.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub subsample_ranking: Option<usize>,
    #[arg(long)]
    pub ctx_per_mention: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub engine_args: EngineArgs,
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    let mut eval = EvalConfig {
        seed: args.seed,
        ..Default::default()
    };
    if let Some(n) = args.subsample_ranking {
        eval.subsample_ranking = n;
    }
    if let Some(n) = args.ctx_per_mention {
        eval.ctx_per_mention = n;
    }
    eval.validate()?;
    check_params(&args.engine_args.bow.params())?;
    let started = Instant::now();
    if let Some(out) = &args.out {
        prepare_output(out, "serve", true)?;
    }
    let bundle = load(&args.bundle)?;
    let neural = match &args.engine_args.model {
        Some(_) => Some(load_neural(&bundle, "neural", &args.engine_args)?),
        None => None,
    };
    let bow = match &args.engine_args.index {
        Some(dir) => load_bow(&bundle, dir)?.0,
        None => BowBaseline::new(&bundle, args.engine_args.bow.params()),
    };
    let overlay_path = args
        .overlay
        .clone()
        .or_else(|| args.out.as_ref().map(|o| o.join("overlay.log.tsv")));
    let overlay = match &overlay_path {
        Some(p) => Overlay::open(p).with_context(|| format!("cannot open overlay {}", p.display()))?,
        None => Overlay::new(),
    };
    let config = WorkspaceConfig {
        split: args.split.into(),
        eval: eval.clone(),
        ..Default::default()
    };
    let ws = Arc::new(Workspace::new(bundle, neural, Some(bow), overlay, config)?);

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .with_context(|| format!("cannot bind {}", args.addr))?;
        println!("listening on http://{}", listener.local_addr()?);
        std::io::stdout().flush()?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        openlink_workbench::serve(ws.clone(), listener, shutdown).await?;
        anyhow::Ok(())
    })?;

    if let Some(out) = &args.out {
        ws.export_overlay(out.join("overlay.export.tsv"))?;
        let mut inputs = vec![("bundle".to_owned(), args.bundle.clone())];
        if let Some(p) = &args.engine_args.model {
            inputs.push(("model".into(), p.clone()));
        }
        if let Some(p) = &args.engine_args.index {
            inputs.push(("index".into(), p.clone()));
        }
        if let Some(p) = &overlay_path {
            inputs.push(("overlay".into(), p.clone()));
        }
        RunManifest {
            command: "serve".into(),
            config_hash: eval.config_hash(),
            seed: eval.seed,
            inputs,
            output: out.clone(),
            wall_time: started.elapsed(),
            artifacts: Vec::new(),
        }
        .seal()?;
    }
    eprintln!("workbench stopped");
    Ok(())
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Bundle to summarize.
    #[arg(long, value_name = "DIR")]
    pub bundle: Option<PathBuf>,
    /// eval output directories to tabulate.
    #[arg(long = "run", value_name = "DIR")]
    pub runs: Vec<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

const SUMMARY_KEYS: &[&str] = &["engine", "task", "split", "queries", "triples", "hits@1", "hits@10", "hits@100", "mrr"];

pub fn report(args: &ReportArgs) -> Result<()> {
    if args.bundle.is_none() && args.runs.is_empty() {
        bail!("nothing to report: pass --bundle and/or --run");
    }
    let mut reports = Vec::new();
    for dir in &args.runs {
        let m = RunManifest::load(dir)?;
        if m.command != "eval" {
            bail!("{} is a {} run, not eval", dir.display(), m.command);
        }
        reports.push(KvConfig::load(dir.join("report.txt"))?);
    }
    let bundle = args.bundle.as_deref().map(load).transpose()?;

    let mut run = Run::start("report", &args.out)?;
    if let (Some(b), Some(p)) = (&bundle, &args.bundle) {
        run.input("bundle", p);
        let stats = stats_report(b).to_string();
        run.write("stats.txt", &stats)?;
        print!("{stats}");
        let g = b.closed_graph();
        let mut rel = String::from("# relation\tlabel\tdomain\trange\ttriples\tratio\n");
        for s in g.stats() {
            let label = g.relations().index_of(&s.relation).map_or("", |i| g.relations().label(i));
            let ratio = relation_ratio(s.domain, s.range).map_or("-".to_owned(), |r| format!("{r:.6e}"));
            writeln!(rel, "{}\t{label}\t{}\t{}\t{}\t{ratio}", s.relation, s.domain, s.range, s.triples)?;
        }
        run.write("relations.tsv", &rel)?;
    }
    if !reports.is_empty() {
        let mut s = format!("# run\t{}\n", SUMMARY_KEYS.join("\t"));
        for (i, (dir, kv)) in args.runs.iter().zip(&reports).enumerate() {
            run.input(&format!("run{i}"), dir);
            let cells: Vec<&str> = SUMMARY_KEYS.iter().map(|k| kv.get_raw(k).unwrap_or("-")).collect();
            writeln!(s, "{}\t{}", dir.display(), cells.join("\t"))?;
        }
        run.write("summary.tsv", &s)?;
        print!("{s}");
    }
    run.finish(KvConfig::new().hash(), 0)?;
    Ok(())
}
