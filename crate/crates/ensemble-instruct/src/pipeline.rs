//! Stage runner. Stages talk through files in `out_dir` so a failed run can
//! be resumed from the last completed stage:
//!
//! | stage              | reads               | writes                                |
//! |--------------------|---------------------|---------------------------------------|
//! | `gen-instructions` | seed file           | `instructions.jsonl`                  |
//! | `gen-instances`    | `instructions.jsonl`| `instances.jsonl`                     |
//! | `ensemble`         | `instances.jsonl`   | `decisions.jsonl`, `dataset.jsonl`    |
//! | `stats`            | the three manifests | `stats.json`                          |
//!
//! Every artifact gets a `*.manifest.json` next to it; the next stage checks
//! the artifact against it before reading.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use ensemble_instruct_core::consensus::{ensemble_select, CandidateOutputs, EnsembleDecision};
use ensemble_instruct_core::dataset::{compute_stats, DatasetError, DatasetStore, EnsembleSummary, SyntheticExample};
use ensemble_instruct_core::instance::RejectionReason;
use ensemble_instruct_core::{SeedPool, TaskType};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, PipelineConfig};
use crate::dataset_io::{render_stats_table, write_dataset, DatasetIoError, StatsRow};
use crate::ensemble::{gather_outputs_batch, OutputJob};
use crate::gateway::{Backend, BackendKind, GatewayError, MockScript};
use crate::instances::synthesize_instances;
use crate::instructions::{InstructionGenerator, SynthesisError};
use crate::jsonl::{self, JsonlError};
use crate::manifest::{artifact_ref, BackendInfo, Manifest, ManifestError};
use crate::seeds::{load_seed_tasks, LoadError};

pub const INSTRUCTIONS_FILE: &str = "instructions.jsonl";
pub const INSTANCES_FILE: &str = "instances.jsonl";
pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const DATASET_FILE: &str = "dataset.jsonl";
pub const STATS_FILE: &str = "stats.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage} needs {path}; run the earlier stage first")]
    StageInputMissing { stage: &'static str, path: String },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Seeds(#[from] LoadError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Dataset(#[from] DatasetIoError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Machine-readable category printed by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::StageInputMissing { .. } => "stage_input_missing",
            PipelineError::Manifest(ManifestError::HashMismatch { .. }) => "manifest_mismatch",
            PipelineError::Manifest(_) => "manifest",
            PipelineError::Seeds(_) => "seed_file",
            PipelineError::Gateway(e) | PipelineError::Synthesis(SynthesisError::Gateway(e)) => e.category(),
            PipelineError::Synthesis(SynthesisError::Prompt(_)) => "prompt",
            PipelineError::Jsonl(_) | PipelineError::Io { .. } => "io",
            PipelineError::Dataset(_) => "dataset",
        }
    }
}

impl From<DatasetError> for PipelineError {
    fn from(e: DatasetError) -> Self {
        PipelineError::Dataset(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub id: String,
    pub instruction: String,
    pub task_type: TaskType,
    pub backend: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub output: String,
    pub task_type: TaskType,
    pub backend: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub id: String,
    pub task_type: TaskType,
    pub candidates: CandidateOutputs,
    pub decision: EnsembleDecision,
}

fn type_key(prefix: &str, t: TaskType) -> String {
    format!("{prefix}_{}", t.as_str().to_ascii_lowercase())
}

/// Distinct RNG stream per stage so stages can be rerun independently.
fn stage_rng(seed: u64, stage: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage);
    rng
}

#[derive(Debug)]
pub struct EnsembleOutcome {
    /// Synthetic examples only; seeds are added when the file is written.
    pub store: DatasetStore,
    pub dataset_path: PathBuf,
    pub records_written: usize,
    pub summary: String,
}

/// A configured run: validated config, loaded seeds and live backends.
pub struct Pipeline {
    config: PipelineConfig,
    pool: SeedPool,
    backends: HashMap<String, Backend>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("config", &self.config)
            .field("seeds", &self.pool.len())
            .finish_non_exhaustive()
    }
}

pub fn connect_backend(config: &PipelineConfig, name: &str) -> Result<Backend, PipelineError> {
    let d = config
        .effective_backend(name)
        .ok_or_else(|| GatewayError::Config(format!("unknown backend {name:?}")))?;
    Ok(match d.kind {
        BackendKind::Http => Backend::http(d)?,
        BackendKind::Mock => {
            let script = PathBuf::from(d.script.clone().unwrap_or_default());
            let file = std::fs::File::open(&script).map_err(|e| {
                GatewayError::Config(format!("backend {name:?}: cannot open script {}: {e}", script.display()))
            })?;
            let entries = MockScript::parse_entries(std::io::BufReader::new(file))?;
            Backend::script_mock(d, entries)?
        }
    })
}

impl Pipeline {
    /// Validates the config, loads the seed file and connects the backends
    /// named in the roles.
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let pool = load_seed_tasks(&config.seed_path)?;
        let mut backends = HashMap::new();
        let mut names = vec![config.roles.generator.clone()];
        names.extend(config.roles.aux1.clone());
        names.extend(config.roles.aux2.clone());
        for name in names {
            if let Entry::Vacant(slot) = backends.entry(name) {
                let backend = connect_backend(&config, slot.key())?;
                slot.insert(backend);
            }
        }
        Ok(Self {
            config,
            pool,
            backends,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn pool(&self) -> &SeedPool {
        &self.pool
    }

    pub fn backend(&self, name: &str) -> Option<&Backend> {
        self.backends.get(name)
    }

    pub fn artifact(&self, file: &str) -> PathBuf {
        self.config.out_dir.join(file)
    }

    fn generator(&self) -> &Backend {
        &self.backends[&self.config.roles.generator]
    }

    fn manifest(&self, stage: &str, input: Option<&Path>, output: &Path, counts: BTreeMap<String, usize>) -> Result<Manifest, PipelineError> {
        let mut names = vec![self.config.roles.generator.as_str()];
        if let Some(aux) = self.config.aux_roles() {
            names.extend(aux);
        }
        names.dedup();
        let backends = names
            .into_iter()
            .filter_map(|n| self.config.effective_backend(n))
            .map(|d| BackendInfo::from(&d))
            .collect();
        Ok(Manifest {
            stage: stage.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: self.config.hash(),
            rng_seed: self.config.rng_seed,
            dataset_label: self.config.dataset_label(),
            backends,
            input: input.map(artifact_ref).transpose()?,
            output: artifact_ref(output)?,
            counts,
        })
    }

    fn ensure_out_dir(&self) -> Result<(), PipelineError> {
        std::fs::create_dir_all(&self.config.out_dir).map_err(|source| PipelineError::Io {
            path: self.config.out_dir.display().to_string(),
            source,
        })
    }

    fn stage_input(&self, stage: &'static str, file: &str) -> Result<(PathBuf, Manifest), PipelineError> {
        let path = self.artifact(file);
        if !path.exists() {
            return Err(PipelineError::StageInputMissing {
                stage,
                path: path.display().to_string(),
            });
        }
        let manifest = Manifest::verify(&path)?;
        Ok((path, manifest))
    }

    /// Generates instructions for both task types.
    pub fn gen_instructions(&self) -> Result<String, PipelineError> {
        self.ensure_out_dir()?;
        let mut rng = stage_rng(self.config.rng_seed, 1);
        let mut generator = InstructionGenerator::new(&self.pool);
        generator.max_tokens = self.config.max_tokens;
        let mut records = Vec::new();
        let mut counts = BTreeMap::new();
        for t in TaskType::ALL {
            let target = match t {
                TaskType::A => self.config.targets.a,
                TaskType::B => self.config.targets.b,
            };
            let set = generator.generate(
                self.generator(),
                &self.pool,
                t,
                target,
                self.config.budget_factor * target,
                &mut rng,
            )?;
            counts.insert(type_key("instructions", t), set.accepted.len());
            counts.insert(type_key("rejected", t), set.rejected_count);
            counts.insert(type_key("attempts", t), set.attempts);
            counts.insert(type_key("partial", t), usize::from(set.partial));
            for (i, a) in set.accepted.into_iter().enumerate() {
                records.push(InstructionRecord {
                    id: format!("syn-{}-{i:05}", t.as_str().to_ascii_lowercase()),
                    instruction: a.instruction,
                    task_type: a.task_type,
                    backend: a.backend,
                });
            }
        }
        let out = self.artifact(INSTRUCTIONS_FILE);
        jsonl::write(&out, &records)?;
        let m = self.manifest("gen-instructions", Some(&self.config.seed_path), &out, counts)?;
        m.write(&out)?;
        Ok(format!(
            "gen-instructions: accepted {} type A, {} type B ({} rejected)",
            m.count("instructions_a"),
            m.count("instructions_b"),
            m.count("rejected_a") + m.count("rejected_b")
        ))
    }

    /// Generates one instance per instruction and keeps the valid ones.
    pub fn gen_instances(&self) -> Result<String, PipelineError> {
        let (input, _) = self.stage_input("gen-instances", INSTRUCTIONS_FILE)?;
        let instructions: Vec<InstructionRecord> = jsonl::read(&input)?;
        let mut rng = stage_rng(self.config.rng_seed, 2);
        let jobs: Vec<(String, TaskType)> = instructions.iter().map(|r| (r.instruction.clone(), r.task_type)).collect();
        let outcomes = synthesize_instances(self.generator(), &jobs, &self.pool, &mut rng)?;

        let mut counts = BTreeMap::new();
        for t in TaskType::ALL {
            counts.insert(type_key("valid", t), 0);
        }
        for reason in RejectionReason::ALL {
            counts.insert(format!("rejected.{reason}"), 0);
        }
        let mut records = Vec::new();
        for (rec, outcome) in instructions.iter().zip(outcomes) {
            match outcome {
                Ok(inst) => {
                    *counts.entry(type_key("valid", rec.task_type)).or_default() += 1;
                    records.push(InstanceRecord {
                        id: rec.id.clone(),
                        instruction: inst.instruction,
                        input: inst.input,
                        output: inst.output,
                        task_type: rec.task_type,
                        backend: self.generator().name().to_string(),
                    });
                }
                Err(reason) => *counts.entry(format!("rejected.{reason}")).or_default() += 1,
            }
        }
        let out = self.artifact(INSTANCES_FILE);
        jsonl::write(&out, &records)?;
        let m = self.manifest("gen-instances", Some(&input), &out, counts)?;
        m.write(&out)?;
        Ok(format!(
            "gen-instances: {} valid of {} ({} type A, {} type B)",
            records.len(),
            instructions.len(),
            m.count("valid_a"),
            m.count("valid_b")
        ))
    }

    /// Collects additional outputs, votes, and writes the dataset.
    pub fn ensemble(&self) -> Result<String, PipelineError> {
        Ok(self.run_ensemble()?.summary)
    }

    /// [`Pipeline::ensemble`], also returning the store that was written.
    pub fn run_ensemble(&self) -> Result<EnsembleOutcome, PipelineError> {
        let (input, _) = self.stage_input("ensemble", INSTANCES_FILE)?;
        let instances: Vec<InstanceRecord> = jsonl::read(&input)?;
        let mut rng = stage_rng(self.config.rng_seed, 3);
        let mut store = DatasetStore::new();
        let mut decisions = Vec::new();
        let mut counts = BTreeMap::new();
        for t in TaskType::ALL {
            counts.insert(type_key("ensembled", t), 0);
        }

        match self.config.aux_roles() {
            Some([a1, a2]) => {
                let aux = [&self.backends[a1], &self.backends[a2]];
                let jobs: Vec<OutputJob> = instances
                    .iter()
                    .map(|r| OutputJob {
                        instruction: r.instruction.clone(),
                        input: r.input.clone(),
                        primary_output: r.output.clone(),
                    })
                    .collect();
                let all = gather_outputs_batch(&jobs, self.generator().name(), aux, &self.pool, &mut rng)?;
                for (rec, candidates) in instances.iter().zip(all) {
                    let decision = ensemble_select(&candidates, self.config.threshold);
                    if let Some(summary) = EnsembleSummary::from_decision(&candidates, &decision) {
                        store.add_example(SyntheticExample {
                            id: rec.id.clone(),
                            instruction: rec.instruction.clone(),
                            input: rec.input.clone(),
                            output: decision.selected.clone().expect("selected when summarized"),
                            task_type: rec.task_type,
                            generator: rec.backend.clone(),
                            ensemble: Some(summary),
                        })?;
                        *counts.entry(type_key("ensembled", rec.task_type)).or_default() += 1;
                    }
                    decisions.push(DecisionRecord {
                        id: rec.id.clone(),
                        task_type: rec.task_type,
                        candidates,
                        decision,
                    });
                }
            }
            None => {
                for rec in &instances {
                    store.add_example(SyntheticExample {
                        id: rec.id.clone(),
                        instruction: rec.instruction.clone(),
                        input: rec.input.clone(),
                        output: rec.output.clone(),
                        task_type: rec.task_type,
                        generator: rec.backend.clone(),
                        ensemble: None,
                    })?;
                    *counts.entry(type_key("ensembled", rec.task_type)).or_default() += 1;
                }
            }
        }
        counts.insert("filtered".into(), instances.len() - store.len());

        let decisions_path = self.artifact(DECISIONS_FILE);
        jsonl::write(&decisions_path, &decisions)?;
        let dataset_path = self.artifact(DATASET_FILE);
        let lines = write_dataset(&dataset_path, &store, self.config.include_seeds, &self.pool)?;
        counts.insert("records".into(), lines);
        let balance = store.type_balance();
        counts.insert("synthetic_a".into(), balance.type_a);
        counts.insert("synthetic_b".into(), balance.type_b);
        self.manifest("ensemble", Some(&input), &dataset_path, counts)?
            .write(&dataset_path)?;
        let summary = format!(
            "ensemble: kept {} of {} ({} type A, {} type B); wrote {} records to {}",
            store.len(),
            instances.len(),
            balance.type_a,
            balance.type_b,
            lines,
            dataset_path.display()
        );
        Ok(EnsembleOutcome {
            store,
            dataset_path,
            records_written: lines,
            summary,
        })
    }

    /// Runs all generation stages and then `stats`.
    pub fn build(&self) -> Result<String, PipelineError> {
        let mut lines = vec![self.gen_instructions()?, self.gen_instances()?, self.ensemble()?];
        lines.push(stats(&self.config.out_dir)?);
        Ok(lines.join("\n"))
    }
}

/// Reads the stage manifests in `out_dir`, prints the per-type acceptance
/// table and writes `stats.json`.
pub fn stats(out_dir: &Path) -> Result<String, PipelineError> {
    let load = |file: &str| {
        let path = out_dir.join(file);
        if !path.exists() {
            return Err(PipelineError::StageInputMissing {
                stage: "stats",
                path: path.display().to_string(),
            });
        }
        Ok(Manifest::verify(&path)?)
    };
    let instr = load(INSTRUCTIONS_FILE)?;
    let inst = load(INSTANCES_FILE)?;
    let ens = load(DATASET_FILE)?;

    let mut rows = Vec::new();
    let mut totals = (0, 0, 0);
    for t in TaskType::ALL {
        let n = (
            instr.count(&type_key("instructions", t)),
            inst.count(&type_key("valid", t)),
            ens.count(&type_key("ensembled", t)),
        );
        totals = (totals.0 + n.0, totals.1 + n.1, totals.2 + n.2);
        rows.push(StatsRow {
            label: t.as_str().into(),
            stats: compute_stats(n.0, n.1, n.2)?,
        });
    }
    rows.push(StatsRow {
        label: "total".into(),
        stats: compute_stats(totals.0, totals.1, totals.2)?,
    });

    let path = out_dir.join(STATS_FILE);
    let mut json = serde_json::to_string_pretty(&rows).expect("stats serialize");
    json.push('\n');
    std::fs::write(&path, json).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(render_stats_table(&rows))
}
