//! Per-artifact manifests recording how an artifact was produced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gateway::{BackendDescriptor, BackendKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub name: String,
    pub kind: BackendKind,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    pub instructed: bool,
}

impl From<&BackendDescriptor> for BackendInfo {
    fn from(d: &BackendDescriptor) -> Self {
        Self {
            name: d.name.clone(),
            kind: d.kind,
            model_id: d.model_id.clone(),
            base_url: d.base_url.clone(),
            instructed: d.instructed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub tool_version: String,
    pub config_hash: String,
    pub rng_seed: u64,
    pub dataset_label: String,
    pub backends: Vec<BackendInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<ArtifactRef>,
    pub output: ArtifactRef,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed manifest: {message}")]
    Malformed { path: String, message: String },
    #[error("{artifact} does not match its manifest (expected sha256 {expected}, found {found})")]
    HashMismatch {
        artifact: String,
        expected: String,
        found: String,
    },
}

pub fn sha256_file(path: &Path) -> Result<String, ManifestError> {
    let bytes = std::fs::read(path).map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `dataset.jsonl` → `dataset.manifest.json`.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    let stem = artifact.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    artifact.with_file_name(format!("{stem}.manifest.json"))
}

pub fn artifact_ref(path: &Path) -> Result<ArtifactRef, ManifestError> {
    Ok(ArtifactRef {
        file: path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: sha256_file(path)?,
    })
}

impl Manifest {
    pub fn write(&self, artifact: &Path) -> Result<(), ManifestError> {
        let path = manifest_path(artifact);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(artifact: &Path) -> Result<Self, ManifestError> {
        let path = manifest_path(artifact);
        let text = std::fs::read_to_string(&path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ManifestError::Malformed {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Reads the manifest of `artifact` and checks the artifact's hash.
    pub fn verify(artifact: &Path) -> Result<Self, ManifestError> {
        let manifest = Self::read(artifact)?;
        let found = sha256_file(artifact)?;
        if found != manifest.output.sha256 {
            return Err(ManifestError::HashMismatch {
                artifact: artifact.display().to_string(),
                expected: manifest.output.sha256,
                found,
            });
        }
        Ok(manifest)
    }

    pub fn count(&self, key: &str) -> usize {
        self.counts.get(key).copied().unwrap_or(0)
    }
}
