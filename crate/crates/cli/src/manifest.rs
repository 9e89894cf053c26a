use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tlshm::hash::{json_hash, sha256_hex};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

impl Artifact {
    pub fn of(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::artifact(format!("{}: {e}", path.display())))?;
        Ok(Self { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
    }
}

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_path: Option<String>,
    /// Hash of `config` (the fully materialised settings).
    pub config_hash: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<Artifact>,
    /// Output paths are relative to the manifest's directory.
    pub outputs: Vec<Artifact>,
    #[serde(default)]
    pub extra: Value,
    pub started_at: String,
    pub finished_at: String,
}

pub struct ManifestBuilder {
    command: String,
    config_path: Option<PathBuf>,
    config: Value,
    seed: Option<u64>,
    inputs: Vec<Artifact>,
    extra: Value,
    started_at: String,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl ManifestBuilder {
    pub fn start(command: &str, config_path: Option<&Path>, config: Value, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            config_path: config_path.map(Path::to_path_buf),
            config,
            seed,
            inputs: vec![],
            extra: Value::Null,
            started_at: now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(Artifact::of(path)?);
        Ok(())
    }

    pub fn extra(&mut self, value: Value) {
        self.extra = value;
    }

    /// Hashes `outputs` (relative to `dir`) and writes the manifest there.
    pub fn finish(self, dir: &Path, outputs: &[&str]) -> CliResult<RunManifest> {
        let outputs = outputs
            .iter()
            .map(|name| Ok(Artifact { path: name.to_string(), sha256: Artifact::of(&dir.join(name))?.sha256 }))
            .collect::<CliResult<Vec<_>>>()?;
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_path: self.config_path.map(|p| p.display().to_string()),
            config_hash: json_hash(&self.config),
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            outputs,
            extra: self.extra,
            started_at: self.started_at,
            finished_at: now(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(dir.join(MANIFEST_FILE), text).map_err(|e| CliError::artifact(format!("{}: {e}", dir.display())))?;
        Ok(manifest)
    }
}

/// If `dir` holds a manifest, checks that every listed output still has
/// its recorded hash.
pub fn verify_dir(dir: &Path) -> CliResult<()> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(&path).map_err(|e| CliError::artifact(format!("{}: {e}", path.display())))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::artifact(format!("{}: {e}", path.display())))?;
    for out in &manifest.outputs {
        let actual = Artifact::of(&dir.join(&out.path))?;
        if actual.sha256 != out.sha256 {
            return Err(CliError::artifact(format!(
                "{} does not match the hash recorded in {}",
                dir.join(&out.path).display(),
                path.display()
            )));
        }
    }
    Ok(())
}

/// Verifies the manifest in the directory containing `file`, if any.
pub fn verify_file(file: &Path) -> CliResult<()> {
    let dir = file.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(());
    }
    let name = file.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
    let text = fs::read_to_string(&path).map_err(|e| CliError::artifact(format!("{}: {e}", path.display())))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::artifact(format!("{}: {e}", path.display())))?;
    if let Some(out) = manifest.outputs.iter().find(|o| o.path == name) {
        if Artifact::of(file)?.sha256 != out.sha256 {
            return Err(CliError::artifact(format!("{} does not match the hash recorded in {}", file.display(), path.display())));
        }
    }
    Ok(())
}
