//! Run manifests: enough to re-run a command and get the same bytes.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Flags that name where results go or how fast they are produced; they
/// never change the contents and are left out of the manifest.
const VOLATILE: [&str; 3] = ["--out", "--out-dir", "--threads"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub flag: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, without output and thread flags.
    pub args: Vec<String>,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex_digest(&bytes))
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn strip_volatile(args: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if VOLATILE.contains(&a.as_str()) {
            skip = true;
            continue;
        }
        if VOLATILE.iter().any(|f| a.starts_with(&format!("{f}="))) {
            continue;
        }
        out.push(a.clone());
    }
    out
}

impl Manifest {
    pub fn new(command: &str, args: &[String], seed: u64, inputs: &[(&str, &Path)]) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|(flag, p)| {
                Ok(InputDigest { flag: flag.to_string(), path: p.display().to_string(), sha256: sha256_file(p)? })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            tool: "qmd".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: strip_volatile(args),
            seed,
            inputs,
        })
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("manifest serializes")
    }

    /// Reads the manifest embedded in a JSON output or in the first line of
    /// a CSV output.
    pub fn read_from(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if let Some(rest) = text.strip_prefix(CSV_PREFIX) {
            let line = rest.lines().next().unwrap_or_default();
            return Ok(serde_json::from_str(line)?);
        }
        let v: serde_json::Value = serde_json::from_str(&text)?;
        match v.get("manifest") {
            Some(m) => Ok(serde_json::from_value(m.clone())?),
            None => bail!("{} carries no manifest", path.display()),
        }
    }

    /// Fails when an input changed since the manifest was written.
    pub fn check_inputs(&self) -> Result<()> {
        for i in &self.inputs {
            let now = sha256_file(Path::new(&i.path))?;
            if now != i.sha256 {
                bail!("input {} changed: {} != {}", i.path, now, i.sha256);
            }
        }
        Ok(())
    }

    pub fn csv_header(&self) -> String {
        format!("{CSV_PREFIX}{}\n", serde_json::to_string(self).expect("manifest serializes"))
    }
}

pub const CSV_PREFIX: &str = "# manifest: ";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volatile_flags_are_dropped() {
        let args: Vec<String> =
            ["analyze", "--set", "a.json", "--out", "r.json", "--threads=4", "--epsilon", "0.1", "--out-dir", "d"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        assert_eq!(strip_volatile(&args), ["analyze", "--set", "a.json", "--epsilon", "0.1"]);
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(hex_digest(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
