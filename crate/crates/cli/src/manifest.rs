//! Per-run manifest: what ran, on which inputs, and checksums of every
//! artifact written to the output directory.

use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use openlink::config::KvConfig;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: u64,
    pub seed: u64,
    pub inputs: Vec<(String, PathBuf)>,
    pub output: PathBuf,
    pub wall_time: Duration,
    /// File name inside `output` and its SHA-256.
    pub artifacts: Vec<(String, String)>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("command = {}\n", self.command));
        s.push_str(&format!("config_hash = {:016x}\n", self.config_hash));
        s.push_str(&format!("seed = {}\n", self.seed));
        for (name, path) in &self.inputs {
            s.push_str(&format!("input.{name} = {}\n", path.display()));
        }
        s.push_str(&format!("output = {}\n", self.output.display()));
        s.push_str(&format!("wall_time_secs = {:.3}\n", self.wall_time.as_secs_f64()));
        for (file, sum) in &self.artifacts {
            s.push_str(&format!("artifact.{file} = sha256:{sum}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = KvConfig::parse(text)?;
        let get = |k: &str| kv.get_raw(k).with_context(|| format!("manifest lacks {k}"));
        let mut inputs = Vec::new();
        let mut artifacts = Vec::new();
        for (k, v) in kv.iter() {
            if let Some(name) = k.strip_prefix("input.") {
                inputs.push((name.to_owned(), PathBuf::from(v)));
            } else if let Some(file) = k.strip_prefix("artifact.") {
                let sum = v.strip_prefix("sha256:").context("artifact checksum lacks sha256: prefix")?;
                artifacts.push((file.to_owned(), sum.to_owned()));
            }
        }
        Ok(Self {
            command: get("command")?.to_owned(),
            config_hash: u64::from_str_radix(get("config_hash")?, 16).context("bad config_hash")?,
            seed: get("seed")?.parse().context("bad seed")?,
            inputs,
            output: PathBuf::from(get("output")?),
            wall_time: Duration::from_secs_f64(get("wall_time_secs")?.parse().context("bad wall time")?),
            artifacts,
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        Self::parse(&fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?)
    }

    /// Checksums every regular file in `output` except the manifest, then
    /// writes the manifest there.
    pub fn seal(mut self) -> Result<Self> {
        let mut names: Vec<String> = fs::read_dir(&self.output)?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_ok_and(|t| t.is_file()))
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n != MANIFEST)
            .collect();
        names.sort();
        self.artifacts = names
            .into_iter()
            .map(|n| Ok((n.clone(), sha256_file(&self.output.join(&n))?)))
            .collect::<Result<_>>()?;
        fs::write(self.output.join(MANIFEST), self.render())?;
        Ok(self)
    }

    /// Files whose current checksum differs from the recorded one.
    pub fn mismatches(&self) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for (file, sum) in &self.artifacts {
            let path = self.output.join(file);
            if !path.is_file() || sha256_file(&path)? != *sum {
                bad.push(file.clone());
            }
        }
        Ok(bad)
    }
}

/// Prepares an output directory: absent or empty, or holding an earlier
/// run of the same command when `reuse` is set.
pub fn prepare_output(dir: &Path, command: &str, reuse: bool) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))?;
        if entries.next().is_some() {
            let previous = RunManifest::load(dir).ok().map(|m| m.command);
            match previous {
                Some(c) if c == command && reuse => {}
                Some(c) if c == command => {
                    bail!("{} holds an earlier {command} run; pass --overwrite to replace it", dir.display())
                }
                Some(c) => bail!("{} holds artifacts of a different command ({c})", dir.display()),
                None => bail!("{} is not empty", dir.display()),
            }
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip_and_checksums() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "alpha").unwrap();
        fs::write(dir.path().join("b.bin"), [0u8, 1, 2]).unwrap();
        let m = RunManifest {
            command: "report".into(),
            config_hash: 0xabc,
            seed: 7,
            inputs: vec![("bundle".into(), PathBuf::from("/data/b"))],
            output: dir.path().to_owned(),
            wall_time: Duration::from_millis(1500),
            artifacts: Vec::new(),
        }
        .seal()
        .unwrap();
        assert_eq!(m.artifacts.len(), 2);
        // sha256("alpha")
        assert_eq!(
            m.artifacts[0],
            ("a.txt".to_owned(), "8ed3f6ad685b959ead7022518e1af76cd816f8e8ec7ccdda1ed4018e8f2223f8".to_owned())
        );
        let back = RunManifest::load(dir.path()).unwrap();
        assert_eq!(back, m);
        assert!(back.mismatches().unwrap().is_empty());
        fs::write(dir.path().join("a.txt"), "changed").unwrap();
        assert_eq!(back.mismatches().unwrap(), vec!["a.txt".to_owned()]);
    }

    #[test]
    fn output_directories_are_not_mixed() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        prepare_output(&out, "eval", false).unwrap();
        RunManifest {
            command: "eval".into(),
            config_hash: 0,
            seed: 0,
            inputs: Vec::new(),
            output: out.clone(),
            wall_time: Duration::ZERO,
            artifacts: Vec::new(),
        }
        .seal()
        .unwrap();
        assert!(prepare_output(&out, "eval", false).is_err());
        assert!(prepare_output(&out, "eval", true).is_ok());
        assert!(prepare_output(&out, "report", true).is_err());
        fs::write(dir.path().join("stray"), "x").unwrap();
        assert!(prepare_output(dir.path(), "eval", true).is_err());
    }
}
