use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

impl Artifact {
    pub fn of(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(Artifact { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }
}

/// Record of one command run: what went in, what came out, and how to repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// The command's arguments as parsed.
    pub invocation: serde_json::Value,
    /// Fully resolved configuration, after defaults, files and overrides.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    pub wall_secs: f64,
}

impl RunManifest {
    pub fn output(&self, name: &str) -> Option<&Artifact> {
        self.outputs.iter().find(|a| a.path.file_name().is_some_and(|f| f == name))
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Artifacts whose current contents no longer match the recorded checksum.
    pub fn mismatches(&self) -> Vec<(PathBuf, String)> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .filter_map(|a| match sha256_file(&a.path) {
                Ok(h) if h == a.sha256 => None,
                Ok(h) => Some((a.path.clone(), format!("checksum {h}, expected {}", a.sha256))),
                Err(e) => Some((a.path.clone(), format!("{e:#}"))),
            })
            .collect()
    }
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.txt");
        std::fs::write(&f, "abc").unwrap();
        assert_eq!(
            sha256_file(&f).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let m = RunManifest {
            command: "x".into(),
            version: "0".into(),
            invocation: serde_json::Value::Null,
            config: serde_json::Value::Null,
            seed: None,
            inputs: vec![],
            outputs: vec![Artifact::of(&f).unwrap()],
            wall_secs: 0.0,
        };
        let path = m.write(dir.path()).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap(), m);
        assert!(m.mismatches().is_empty());
        std::fs::write(&f, "abd").unwrap();
        assert_eq!(m.mismatches().len(), 1);
    }
}
