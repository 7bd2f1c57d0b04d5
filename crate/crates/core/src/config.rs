//! `key = value` configuration files and the shipped presets.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {message}")]
    BadValue {
        key: String,
        value: String,
        message: String,
    },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// An ordered bag of `key = value` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: i + 1,
                    message: format!("expected key = value, found {line:?}"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Parse {
                    line: i + 1,
                    message: "empty key".into(),
                });
            }
            entries.insert(key.to_owned(), value.trim().to_owned());
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_owned(), value.to_string());
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e: T::Err| ConfigError::BadValue {
                key: key.to_owned(),
                value: v.clone(),
                message: e.to_string(),
            }),
        }
    }

    /// Fails on any key outside `allowed`.
    pub fn expect_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(ConfigError::UnknownKey(k.clone())),
            None => Ok(()),
        }
    }

    /// Values from `other` win.
    pub fn merge(&mut self, other: &KvConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical text: sorted `key = value` lines.
    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// First eight bytes of the SHA-256 of [`Self::render`].
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.render().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
    }
}

/// A typed configuration with a `key = value` representation.
pub trait KvSchema: Sized {
    const KEYS: &'static [&'static str];

    /// Reads fields present in `kv` on top of `self`.
    fn apply(&mut self, kv: &KvConfig) -> Result<(), ConfigError>;

    fn to_kv(&self) -> KvConfig;

    /// Human-readable problems; empty when valid.
    fn problems(&self) -> Vec<String>;

    fn validate(&self) -> Result<(), ConfigError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(p))
        }
    }

    fn from_kv_over(mut base: Self, kv: &KvConfig) -> Result<Self, ConfigError> {
        kv.expect_keys(Self::KEYS)?;
        base.apply(kv)?;
        base.validate()?;
        Ok(base)
    }

    fn config_hash(&self) -> u64 {
        self.to_kv().hash()
    }
}

/// Assigns `field` from `kv[key]` when present.
macro_rules! read_field {
    ($kv:expr, $key:literal, $field:expr) => {
        if let Some(v) = $kv.get($key)? {
            $field = v;
        }
    };
}
pub(crate) use read_field;

pub mod presets {
    //! Hyperparameter tables shipped verbatim as config files.
    //!
    //! Names: `build-<split>`, `kgc-<split>`, and
    //! `<joint|owe>-<single|multi>-<split>` (linking columns) with a
    //! `-ranking` suffix for the ranking columns, where split is one of
    //! tiny, small, medium, large.

    use super::{ConfigError, KvConfig};

    macro_rules! presets {
        ($($name:literal),* $(,)?) => {
            &[$(($name, include_str!(concat!("../presets/", $name, ".conf")))),*]
        };
    }

    static PRESETS: &[(&str, &str)] = presets!(
        "build-tiny", "build-small", "build-medium", "build-large",
        "kgc-tiny", "kgc-small", "kgc-medium", "kgc-large",
        "joint-single-tiny", "joint-single-small", "joint-single-medium", "joint-single-large",
        "joint-single-tiny-ranking", "joint-single-small-ranking",
        "joint-single-medium-ranking", "joint-single-large-ranking",
        "joint-multi-tiny", "joint-multi-small", "joint-multi-medium", "joint-multi-large",
        "joint-multi-tiny-ranking", "joint-multi-small-ranking",
        "joint-multi-medium-ranking", "joint-multi-large-ranking",
        "owe-single-tiny", "owe-single-small", "owe-single-medium", "owe-single-large",
        "owe-single-tiny-ranking", "owe-single-small-ranking",
        "owe-single-medium-ranking", "owe-single-large-ranking",
        "owe-multi-tiny", "owe-multi-small", "owe-multi-medium", "owe-multi-large",
        "owe-multi-tiny-ranking", "owe-multi-small-ranking",
        "owe-multi-medium-ranking", "owe-multi-large-ranking",
    );

    pub fn names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(n, _)| *n)
    }

    pub fn text(name: &str) -> Option<&'static str> {
        PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
    }

    pub fn load(name: &str) -> Result<KvConfig, ConfigError> {
        let text = text(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_owned()))?;
        KvConfig::parse(text)
    }
}
