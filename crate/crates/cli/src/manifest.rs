use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileRecord {
    fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::metadata(path)
            .with_context(|| format!("cannot stat {}", path.display()))?
            .len();
        let sha256 = sha256_file(path).with_context(|| format!("cannot hash {}", path.display()))?;
        Ok(FileRecord {
            path: path.to_owned(),
            bytes,
            sha256,
        })
    }
}

/// Provenance record written next to every stage's artifacts.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub stage: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub config: Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
    pub timings: BTreeMap<String, f64>,
    pub summary: Value,
}

pub struct StageRecorder {
    stage: String,
    config: Value,
    started_unix: u64,
    start: Instant,
    last: Instant,
    timings: BTreeMap<String, f64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl StageRecorder {
    pub fn new<C: Serialize>(stage: &str, config: &C) -> Result<Self> {
        let now = Instant::now();
        Ok(StageRecorder {
            stage: stage.to_owned(),
            config: serde_json::to_value(config)?,
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            start: now,
            last: now,
            timings: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_owned());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_owned());
    }

    /// Records the time since the previous lap under `step`.
    pub fn lap(&mut self, step: &str) {
        let now = Instant::now();
        self.timings
            .insert(step.to_owned(), now.duration_since(self.last).as_secs_f64());
        self.last = now;
    }

    pub fn finish<S: Serialize>(self, out_dir: &Path, summary: &S) -> Result<PathBuf> {
        let config_sha256 = sha256_hex(&serde_json::to_vec(&self.config)?);
        let manifest = Manifest {
            stage: self.stage.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            config_sha256,
            config: self.config,
            inputs: self.inputs.iter().map(|p| FileRecord::of(p)).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(|p| FileRecord::of(p)).collect::<Result<_>>()?,
            started_unix: self.started_unix,
            elapsed_seconds: self.start.elapsed().as_secs_f64(),
            timings: self.timings,
            summary: serde_json::to_value(summary)?,
        };
        let path = out_dir.join(format!("{}.manifest.json", self.stage));
        lsimpute::io::write_json(&path, &manifest)?;
        Ok(path)
    }
}
