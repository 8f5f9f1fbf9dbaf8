//! Run directories and their manifest.json.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    /// Working directory the arguments are relative to.
    pub cwd: PathBuf,
    pub seed: u64,
    pub threads: usize,
    /// Resolved settings after file and flag merging.
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    /// Paths relative to the run directory.
    pub outputs: Vec<FileHash>,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub struct Run {
    pub dir: PathBuf,
    pub manifest: Manifest,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(dir: PathBuf, command: &str, argv: Vec<String>, seed: u64, threads: usize) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Run {
            dir,
            manifest: Manifest {
                tool: "fovea".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                argv,
                cwd: std::env::current_dir()?,
                seed,
                threads,
                config: serde_json::Value::Null,
                inputs: Vec::new(),
                outputs: Vec::new(),
                summary: serde_json::Value::Null,
            },
            outputs: Vec::new(),
        })
    }

    /// Record an input file with its hash.
    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        let sha256 = sha256_file(path)?;
        self.manifest.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    /// Path of a new output inside the run directory.
    pub fn output(&mut self, name: &str) -> anyhow::Result<PathBuf> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.outputs.push(name.to_string());
        Ok(p)
    }

    pub fn finish(mut self) -> anyhow::Result<Manifest> {
        for name in &self.outputs {
            let sha256 = sha256_file(&self.dir.join(name))?;
            self.manifest.outputs.push(FileHash {
                path: name.clone(),
                sha256,
            });
        }
        let path = self.dir.join(MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)?)?;
        log::info!("wrote {}", path.display());
        Ok(self.manifest)
    }
}
