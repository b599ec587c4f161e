//! Pipeline configuration (TOML).
//!
//! ```toml
//! seed_path = "seed_tasks.jsonl"
//! out_dir = "run"
//! rng_seed = 42
//! threshold = 0.01
//!
//! [targets]
//! a = 100
//! b = 100
//!
//! [roles]
//! generator = "falcon"
//! aux1 = "flan-ul2"
//! aux2 = "flan-t5"
//!
//! [[backends]]
//! name = "falcon"
//! kind = "http"
//! base_url = "http://localhost:8000"
//! model_id = "tiiuae/falcon-40b"
//! api_key_env = "LM_API_KEY"
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ensemble_instruct_core::consensus::DEFAULT_THRESHOLD;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gateway::{BackendDescriptor, BackendKind, DEFAULT_MAX_TOKENS};
use crate::instructions::DEFAULT_BUDGET_FACTOR;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Targets {
    #[serde(default)]
    pub a: usize,
    #[serde(default)]
    pub b: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roles {
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux2: Option<String>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_true() -> bool {
    true
}
fn default_budget_factor() -> usize {
    DEFAULT_BUDGET_FACTOR
}
fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("run")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed_path: PathBuf,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub targets: Targets,
    /// Instruction attempts allowed per requested instruction.
    #[serde(default = "default_budget_factor")]
    pub budget_factor: usize,
    #[serde(default = "default_true")]
    pub include_seeds: bool,
    /// Completion budget for instruction proposals.
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Overrides every backend's request parallelism when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    /// Overrides every backend's retry count when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retries: Option<u32>,
    pub roles: Roles,
    #[serde(default)]
    pub backends: Vec<BackendDescriptor>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it are made relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.seed_path);
        fix(&mut self.out_dir);
        for b in &mut self.backends {
            if let Some(script) = &b.script {
                let p = Path::new(script);
                if p.is_relative() {
                    b.script = Some(base.join(p).display().to_string());
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(invalid("threshold", "must be a finite number >= 0"));
        }
        if self.budget_factor == 0 {
            return Err(invalid("budget_factor", "must be at least 1"));
        }
        if self.max_tokens == 0 {
            return Err(invalid("max_tokens", "must be at least 1"));
        }
        if self.parallelism == Some(0) {
            return Err(invalid("parallelism", "must be at least 1"));
        }
        let mut names = BTreeSet::new();
        for (i, b) in self.backends.iter().enumerate() {
            if !names.insert(b.name.as_str()) {
                return Err(invalid(format!("backends[{i}].name"), format!("duplicate backend {:?}", b.name)));
            }
            b.validate()
                .map_err(|e| invalid(format!("backends[{i}]"), e.to_string()))?;
            if b.kind == BackendKind::Mock && b.script.is_none() {
                return Err(invalid(format!("backends[{i}].script"), "mock backends need a script file"));
            }
        }
        if self.roles.generator.trim().is_empty() {
            return Err(invalid("roles.generator", "must name a backend"));
        }
        let known = |field: &str, name: &str| {
            if names.contains(name) {
                Ok(())
            } else {
                Err(invalid(field, format!("unknown backend {name:?}")))
            }
        };
        known("roles.generator", &self.roles.generator)?;
        match (&self.roles.aux1, &self.roles.aux2) {
            (None, None) => {}
            (Some(a1), Some(a2)) => {
                known("roles.aux1", a1)?;
                known("roles.aux2", a2)?;
                if a1 == a2 {
                    return Err(invalid("roles.aux2", "must differ from roles.aux1"));
                }
            }
            (Some(_), None) => return Err(invalid("roles.aux2", "ensembling needs exactly two auxiliary backends")),
            (None, Some(_)) => return Err(invalid("roles.aux1", "ensembling needs exactly two auxiliary backends")),
        }
        Ok(())
    }

    pub fn backend(&self, name: &str) -> Option<&BackendDescriptor> {
        self.backends.iter().find(|b| b.name == name)
    }

    /// Backend descriptor with the global parallelism/retry overrides applied.
    pub fn effective_backend(&self, name: &str) -> Option<BackendDescriptor> {
        let mut d = self.backend(name)?.clone();
        if let Some(p) = self.parallelism {
            d.parallelism = p;
        }
        if let Some(r) = self.retries {
            d.retries = r;
        }
        Some(d)
    }

    pub fn aux_roles(&self) -> Option<[&str; 2]> {
        Some([self.roles.aux1.as_deref()?, self.roles.aux2.as_deref()?])
    }

    /// Dataset label derived from the roles: `so-<generator>` for single-model
    /// runs, `eo-<generator>-ilm` when both auxiliary models are instruction
    /// tuned and `eo-<generator>-lm` otherwise.
    pub fn dataset_label(&self) -> String {
        match self.aux_roles() {
            None => format!("so-{}", self.roles.generator),
            Some(aux) => {
                let all_instructed = aux
                    .iter()
                    .all(|n| self.backend(n).is_some_and(|b| b.instructed));
                let suffix = if all_instructed { "ilm" } else { "lm" };
                format!("eo-{}-{suffix}", self.roles.generator)
            }
        }
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
