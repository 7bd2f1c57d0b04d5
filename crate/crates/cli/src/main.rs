//! `openlink`: build benchmark bundles, train and evaluate linking models,
//! and serve the interactive workbench.

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use openlink::config::presets;

use crate::commands::{BuildArgs, EvalArgs, IndexArgs, InductiveArgs, KgcArgs, OweArgs, ReportArgs, ServeArgs};
use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "openlink", version, about = "Open-world linking between text mentions and a knowledge graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a graph and an ingestion corpus into a benchmark bundle.
    BuildDataset(BuildArgs),
    /// Train closed-world ComplEx embeddings on a bundle's closed graph.
    TrainKgc(KgcArgs),
    /// Train graph embeddings and the text mapping together.
    TrainJoint(InductiveArgs),
    /// Train a text mapping onto frozen pretrained embeddings.
    TrainOwe(OweArgs),
    /// Build and persist the BM25 indexes of the bag-of-words baseline.
    IndexBm25(IndexArgs),
    /// Score an engine on the ranking or linking task.
    Eval(EvalArgs),
    /// Serve the interactive workbench over HTTP until interrupted.
    Serve(ServeArgs),
    /// Summarize a bundle and tabulate evaluation runs.
    Report(ReportArgs),
    /// List shipped presets, or print one.
    Presets { name: Option<String> },
    /// Check the artifact checksums recorded in run manifests.
    Verify {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

fn show_presets(name: Option<&str>) -> Result<()> {
    match name {
        None => presets::names().for_each(|n| println!("{n}")),
        Some(n) => match presets::text(n) {
            Some(t) => print!("{t}"),
            None => bail!("unknown preset {n:?}"),
        },
    }
    Ok(())
}

fn verify(dirs: &[PathBuf]) -> Result<()> {
    let mut failed = 0;
    for d in dirs {
        let m = RunManifest::load(d)?;
        let bad = m.mismatches()?;
        if bad.is_empty() {
            println!("ok {} ({} artifacts)", d.display(), m.artifacts.len());
        } else {
            failed += 1;
            println!("MISMATCH {}: {}", d.display(), bad.join(", "));
        }
    }
    if failed > 0 {
        bail!("{failed} manifest(s) do not match their artifacts");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::BuildDataset(a) => commands::build_dataset(a),
        Command::TrainKgc(a) => commands::train_kgc(a),
        Command::TrainJoint(a) => commands::train_joint_cmd(a),
        Command::TrainOwe(a) => commands::train_owe_cmd(a),
        Command::IndexBm25(a) => commands::index_bm25(a),
        Command::Eval(a) => commands::eval(a),
        Command::Serve(a) => commands::serve(a),
        Command::Report(a) => commands::report(a),
        Command::Presets { name } => show_presets(name.as_deref()),
        Command::Verify { dirs } => verify(dirs),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
