//! Per-stage manifests with content hashes.
//!
//! Each stage directory holds `stage.json`: the hash of everything the
//! stage depends on (its configuration and the upstream outputs), the
//! SHA-256 of every file it wrote, timings and a summary. A stage whose
//! input hash matches and whose files still hash to the recorded values is
//! up to date.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{PipelineConfig, Stage};

pub const MANIFEST: &str = "stage.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: Stage,
    pub input_hash: String,
    /// Relative path → SHA-256, hex.
    pub files: BTreeMap<String, String>,
    pub seconds: f64,
    pub summary: serde_json::Value,
    pub config: PipelineConfig,
}

impl StageManifest {
    pub fn path(dir: &Path) -> PathBuf {
        dir.join(MANIFEST)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let p = Self::path(dir);
        let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::write(Self::path(dir), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Hash over the output file hashes, used as input of the next stage.
    pub fn output_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.files {
            h.update(k.as_bytes());
            h.update([0]);
            h.update(v.as_bytes());
            h.update([0]);
        }
        hex(h)
    }

    /// True when every recorded file exists with the recorded hash.
    pub fn files_intact(&self, dir: &Path) -> bool {
        self.files.iter().all(|(f, want)| hash_file(&dir.join(f)).is_ok_and(|got| &got == want))
    }
}

fn hex(h: Sha256) -> String {
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_bytes(data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(data);
    hex(h)
}

pub fn hash_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(h))
}

/// Hashes of every regular file below `dir` except the manifest itself.
pub fn hash_tree(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let rel = p.strip_prefix(dir)?.to_string_lossy().replace('\\', "/");
            if rel != MANIFEST {
                out.insert(rel, hash_file(&p)?);
            }
        }
    }
    Ok(out)
}

/// The configuration a stage depends on, as a JSON value.
pub fn stage_inputs(cfg: &PipelineConfig, stage: Stage, input_file_hash: &str) -> serde_json::Value {
    use serde_json::json;
    match stage {
        Stage::Orbits => json!({ "input": input_file_hash, "format": cfg.input.format, "orbits": cfg.orbits }),
        Stage::Expansion => json!({ "expansion": cfg.expansion }),
        Stage::Secular => json!({ "secular": cfg.secular_config() }),
        Stage::Birkhoff => json!({ "birkhoff": cfg.birkhoff }),
        Stage::Stability => json!({ "stability": cfg.stability }),
    }
}

/// Input hash of `stage`: its own configuration plus the upstream output.
pub fn input_hash(stage: Stage, inputs: &serde_json::Value, upstream: Option<&str>) -> String {
    let text = format!("{stage}\n{inputs}\n{}", upstream.unwrap_or(""));
    hash_bytes(text.as_bytes())
}
