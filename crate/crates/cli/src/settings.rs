//! Layered configuration: schema defaults, then a preset, then a config
//! file, then `--set` pairs, then `--seed`.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use openlink::config::{presets, KvConfig, KvSchema};

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Shipped preset: a split name (tiny, small, medium, large) or a full preset name.
    #[arg(long)]
    pub preset: Option<String>,
    /// `key = value` config file applied over the preset.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Single config field, applied last; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Validate and print the resolved configuration without running.
    #[arg(long)]
    pub dry_run: bool,
}

/// How a preset shortcut expands for a command family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family<'a> {
    Build,
    Kgc,
    /// `joint` or `owe` with `single`/`multi` and an optional ranking column.
    Inductive {
        method: &'a str,
        contexts: &'a str,
        ranking: bool,
    },
    /// No presets exist for this command.
    None,
}

const SPLITS: &[&str] = &["tiny", "small", "medium", "large"];

/// Full preset name for `given` under `family`.
pub fn preset_name(family: Family<'_>, given: &str) -> Result<String> {
    let prefix = match family {
        Family::Build => "build".to_owned(),
        Family::Kgc => "kgc".to_owned(),
        Family::Inductive { method, .. } => method.to_owned(),
        Family::None => bail!("this command has no presets"),
    };
    let name = if SPLITS.contains(&given) {
        match family {
            Family::Inductive {
                method,
                contexts,
                ranking,
            } => format!("{method}-{contexts}-{given}{}", if ranking { "-ranking" } else { "" }),
            _ => format!("{prefix}-{given}"),
        }
    } else {
        given.to_owned()
    };
    if presets::text(&name).is_none() {
        bail!("unknown preset {given:?} (see `openlink presets`)");
    }
    if !name.starts_with(&format!("{prefix}-")) {
        bail!("preset {name:?} does not configure this command");
    }
    Ok(name)
}

pub struct Resolved<S> {
    pub config: S,
    pub preset: Option<String>,
}

impl ConfigArgs {
    fn layers(&self, family: Family<'_>) -> Result<(KvConfig, Option<String>)> {
        let mut kv = KvConfig::new();
        let preset = match &self.preset {
            Some(p) => {
                let name = preset_name(family, p)?;
                kv.merge(&presets::load(&name)?);
                Some(name)
            }
            None => None,
        };
        if let Some(path) = &self.config {
            kv.merge(&KvConfig::load(path)?);
        }
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got {pair:?}"))?;
            kv.set(k.trim(), v.trim());
        }
        if let Some(seed) = self.seed {
            kv.set("seed", seed);
        }
        Ok((kv, preset))
    }

    /// Resolves `S` over `base`; every problem is reported before any work.
    pub fn resolve_over<S: KvSchema>(&self, family: Family<'_>, base: S) -> Result<Resolved<S>> {
        let (kv, preset) = self.layers(family)?;
        let config = S::from_kv_over(base, &kv)?;
        Ok(Resolved { config, preset })
    }
}

/// Prints the resolved configuration.
pub fn echo<S: KvSchema>(command: &str, resolved: &Resolved<S>) {
    match &resolved.preset {
        Some(p) => println!("# {command} configuration (preset {p})"),
        None => println!("# {command} configuration"),
    }
    print!("{}", resolved.config.to_kv().render());
}
