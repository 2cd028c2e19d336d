//! Staged output directories and provenance headers.
//!
//! Files are written to a staging directory and moved into place only when
//! the whole command succeeds. On failure the staged files are kept under
//! `quarantine/<command>/` instead.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// What every output file records about the run that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub command: String,
    pub config: String,
    pub seed: u64,
    pub model: String,
    /// `(name, sha256)` of every input file, bundled defaults included.
    pub inputs: Vec<(String, String)>,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64, model: &str) -> Result<Self> {
        let json = serde_json::to_string(config)?;
        Ok(Provenance {
            tool: format!("layerdebias {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            config: sha256_hex(json.as_bytes()),
            seed,
            model: model.to_string(),
            inputs: Vec::new(),
        })
    }

    pub fn input(&mut self, name: &str, contents: &str) {
        self.inputs
            .push((name.to_string(), sha256_hex(contents.as_bytes())));
    }

    /// `#`-prefixed lines for text outputs.
    pub fn header(&self) -> String {
        let mut s = format!(
            "# tool {}\n# command {}\n# config {}\n# seed {}\n# model {}\n",
            self.tool, self.command, self.config, self.seed, self.model
        );
        for (name, hash) in &self.inputs {
            s.push_str(&format!("# input {name} {hash}\n"));
        }
        s
    }
}

pub struct OutputDir {
    root: PathBuf,
    staging: PathBuf,
    command: String,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        let staging = root.join(format!(".staging-{command}"));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)
            .with_context(|| format!("output directory {} is not writable", root.display()))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            staging,
            command: command.to_string(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.staging.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `body` after the provenance header.
    pub fn write_with_header(&mut self, name: &str, prov: &Provenance, body: &str) -> Result<()> {
        self.write(name, &format!("{}{body}", prov.header()))
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for f in &self.files {
            let dest = self.root.join(f);
            fs::rename(self.staging.join(f), &dest)
                .with_context(|| format!("cannot move {f} into {}", self.root.display()))?;
            out.push(dest);
        }
        fs::remove_dir_all(&self.staging)?;
        Ok(out)
    }

    pub fn quarantine(self) -> Result<PathBuf> {
        let dir = self.root.join("quarantine").join(&self.command);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(dir.parent().expect("has parent"))?;
        fs::rename(&self.staging, &dir)?;
        Ok(dir)
    }
}
