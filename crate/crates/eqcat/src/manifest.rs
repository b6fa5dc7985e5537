//! Run manifests: what was built, how, and where the artifacts went.
//!
//! A manifest records the resolved builder config, so replaying it rebuilds
//! the same structure and rewrites byte-identical artifacts. Nothing in a
//! manifest depends on the clock or on randomness.

use crate::config::BuilderConfig;
use crate::error::{Error, Result};
use crate::structure::{Stage, StageStructure};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const EVENTS_FILE: &str = "events.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    /// Snapshot files, one per requested stage, relative to the manifest.
    pub snapshots: Vec<String>,
    /// Event log (JSON lines), relative to the manifest.
    pub events: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: BuilderConfig,
    pub stages: Vec<Stage>,
    /// Attests that the run used no randomness.
    pub seedless: bool,
    pub artifacts: Artifacts,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let m: RunManifest = serde_json::from_str(&text)?;
        if !m.seedless {
            return Err(Error::InvalidSpec(format!("{}: manifest does not attest a seedless run", path.display())));
        }
        Ok(m)
    }

    /// A fresh structure from the recorded config.
    pub fn structure(&self) -> Result<StageStructure> {
        self.config.build()
    }

    /// The stage the recorded run reached.
    pub fn last_stage(&self) -> Stage {
        self.stages.iter().copied().max().unwrap_or(0)
    }
}

/// Accepts either a manifest file or a directory holding `manifest.json`.
pub fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST_FILE)
    } else {
        p.to_path_buf()
    }
}

/// Load a manifest and rebuild its structure.
pub fn load_structure(p: &Path) -> Result<(RunManifest, StageStructure)> {
    let m = RunManifest::load(&manifest_path(p))?;
    let st = m.structure()?;
    Ok((m, st))
}

pub fn snapshot_file(s: Stage) -> String {
    format!("snapshot-{s}.json")
}

/// Pretty JSON with a trailing newline.
pub fn to_json_text<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Build `config` through `stages`, writing one snapshot per stage, the
/// event log up to the last stage, and the manifest into `out_dir`.
pub fn run_build(config: &BuilderConfig, stages: &[Stage], out_dir: &Path) -> Result<RunManifest> {
    if stages.is_empty() {
        return Err(Error::InvalidSpec("at least one stage is required".into()));
    }
    let mut stages = stages.to_vec();
    stages.sort_unstable();
    stages.dedup();
    let mut st = config.build()?;
    fs::create_dir_all(out_dir)?;
    let mut snapshots = Vec::with_capacity(stages.len());
    for &s in &stages {
        let snap = st.snapshot(s)?;
        let name = snapshot_file(s);
        fs::write(out_dir.join(&name), to_json_text(&snap)?)?;
        snapshots.push(name);
    }
    let last = *stages.last().expect("nonempty");
    let mut log = Vec::new();
    for ev in st.events().iter().filter(|e| e.stage <= last) {
        serde_json::to_writer(&mut log, ev)?;
        log.write_all(b"\n")?;
    }
    fs::write(out_dir.join(EVENTS_FILE), log)?;
    let manifest = RunManifest {
        tool: "eqcat".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "build".into(),
        config: config.clone(),
        stages,
        seedless: true,
        artifacts: Artifacts { snapshots, events: EVENTS_FILE.into() },
    };
    fs::write(out_dir.join(MANIFEST_FILE), to_json_text(&manifest)?)?;
    Ok(manifest)
}

/// Rebuild from a manifest into `out_dir`.
pub fn replay(manifest: &RunManifest, out_dir: &Path) -> Result<RunManifest> {
    run_build(&manifest.config, &manifest.stages, out_dir)
}
