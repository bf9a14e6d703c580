//! Run context: output directory, stage seeds, artifact tracking and the manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use sha2::{Digest, Sha256};
use vic_core::{Error, ErrorClass};

use crate::config::Params;

pub const OUT_ROOT_VAR: &str = "VIC_OUT_ROOT";

#[derive(Debug)]
pub enum CliError {
    Config { field: String, reason: String },
    Stage { stage: &'static str, source: Error },
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Io { .. } => 2,
            CliError::Stage { source, .. } => match source.class() {
                ErrorClass::Config => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numeric => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { field, reason } => write!(f, "invalid configuration: {field}: {reason}"),
            CliError::Stage { stage, source } => write!(f, "{stage}: {source}"),
            CliError::Io { path, source } => write!(f, "cannot write {}: {source}", path.display()),
        }
    }
}

/// Tags core errors with the stage that raised them.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for vic_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Seed of one stage: the first 8 bytes of `sha256("<stage>:<master>")`.
pub fn stage_seed(stage: &str, master: u64) -> u64 {
    let digest = Sha256::digest(format!("{stage}:{master}").as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

pub struct Run {
    command: String,
    pub params: Params,
    pub out: PathBuf,
    started: Instant,
    seeds: BTreeMap<String, u64>,
    inputs: BTreeMap<String, String>,
    artifacts: BTreeMap<String, String>,
    summary: Vec<String>,
}

impl Run {
    pub fn new(command: &str, params: Params) -> Result<Run, CliError> {
        let out = match &params.out {
            Some(p) => p.clone(),
            None => std::env::var_os(OUT_ROOT_VAR)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs"))
                .join(command),
        };
        std::fs::create_dir_all(&out).map_err(|source| CliError::Io {
            path: out.clone(),
            source,
        })?;
        Ok(Run {
            command: command.to_string(),
            params,
            out,
            started: Instant::now(),
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            summary: Vec::new(),
        })
    }

    pub fn seed(&mut self, stage: &str) -> u64 {
        let s = stage_seed(stage, self.params.seed());
        self.seeds.insert(stage.to_string(), s);
        s
    }

    /// Reads an input file and records its hash.
    pub fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Stage {
            stage: "input",
            source: Error::Io {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
        self.note_input(path, text.as_bytes());
        Ok(text)
    }

    pub fn note_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.insert(path.display().to_string(), sha256_hex(bytes));
    }

    pub fn hash_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Stage {
            stage: "input",
            source: Error::Io {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
        self.note_input(path, &bytes);
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write(&mut self, name: &str, body: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        std::fs::write(&path, body).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.artifacts.insert(name.to_string(), sha256_hex(body));
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, v: &serde_json::Value) -> Result<PathBuf, CliError> {
        let mut body = serde_json::to_string_pretty(v).expect("JSON values serialize");
        body.push('\n');
        self.write(name, body.as_bytes())
    }

    /// Registers a file some core routine already wrote.
    pub fn track(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.path(name);
        let bytes = std::fs::read(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.artifacts.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn say(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }

    /// Writes `manifest.json` and returns the summary lines.
    pub fn finish(mut self) -> Result<Vec<String>, CliError> {
        let mut config = serde_json::to_value(&self.params).expect("params serialize");
        if let Some(map) = config.as_object_mut() {
            map.retain(|_, v| !v.is_null());
        }
        let config_hash = sha256_hex(serde_json::to_string(&config).expect("values serialize").as_bytes());
        // `--config config.json` replays the run; it names the output
        // directory, so it is not listed among the artifacts
        let mut replay = serde_json::to_string_pretty(&config).expect("JSON values serialize");
        replay.push('\n');
        let path = self.path("config.json");
        std::fs::write(&path, replay).map_err(|source| CliError::Io { path, source })?;
        let manifest = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "master_seed": self.params.seed(),
            "stage_seeds": self.seeds,
            "config": config,
            "config_sha256": config_hash,
            "inputs": self.inputs,
            "artifacts": self.artifacts,
            "wall_time_seconds": self.started.elapsed().as_secs_f64(),
        });
        let mut body = serde_json::to_string_pretty(&manifest).expect("JSON values serialize");
        body.push('\n');
        let path = self.path("manifest.json");
        std::fs::write(&path, body).map_err(|source| CliError::Io { path, source })?;
        let mut lines = std::mem::take(&mut self.summary);
        lines.push(format!(
            "wrote {} artifacts to {}",
            self.artifacts.len(),
            self.out.display()
        ));
        Ok(lines)
    }
}
