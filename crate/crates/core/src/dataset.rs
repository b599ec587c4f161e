//! Finished examples, the in-memory dataset and acceptance statistics.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::consensus::{CandidateOutputs, EnsembleDecision};
use crate::task::{SeedTask, TaskType};

/// Generator name recorded for seed tasks written into a dataset.
pub const SEED_GENERATOR: &str = "seed";

/// Consensus metadata kept with an accepted example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    /// Backends that produced the three candidates.
    pub sources: [String; 3],
    pub pair_scores: [f64; 3],
    pub selected_index: usize,
    pub threshold: f64,
}

impl EnsembleSummary {
    /// Summarizes a decision that selected an output. `None` if it filtered.
    pub fn from_decision(candidates: &CandidateOutputs, decision: &EnsembleDecision) -> Option<Self> {
        Some(Self {
            sources: candidates.sources.clone(),
            pair_scores: decision.pair_scores,
            selected_index: decision.selected_index?,
            threshold: decision.threshold,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticExample {
    pub id: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub output: String,
    pub task_type: TaskType,
    /// Backend that generated the instruction and instance, or `"seed"`.
    pub generator: String,
    /// Absent for seeds and single-model runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSummary>,
}

impl SyntheticExample {
    pub fn from_seed(task: &SeedTask) -> Self {
        Self {
            id: task.id().to_string(),
            instruction: task.instruction().to_string(),
            input: task.input().map(ToString::to_string),
            output: task.output().to_string(),
            task_type: task.task_type(),
            generator: SEED_GENERATOR.into(),
            ensemble: None,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |reason: &'static str| DatasetError::Invalid {
            id: self.id.clone(),
            reason,
        };
        if self.id.is_empty() {
            return Err(bad("empty id"));
        }
        if self.instruction.trim().is_empty() {
            return Err(bad("empty instruction"));
        }
        if self.output.trim().is_empty() {
            return Err(bad("empty output"));
        }
        match (&self.input, self.task_type) {
            (Some(i), TaskType::A) if i.trim().is_empty() => return Err(bad("blank input on type A task")),
            (Some(_), TaskType::A) | (None, TaskType::B) => {}
            (None, TaskType::A) => return Err(bad("type A task without input")),
            (Some(_), TaskType::B) => return Err(bad("type B task with input")),
        }
        if let Some(e) = &self.ensemble {
            if !(1..=3).contains(&e.selected_index) {
                return Err(bad("selected index outside 1..=3"));
            }
            if e.pair_scores.iter().any(|s| *s <= e.threshold) {
                return Err(bad("ensemble pair score at or below threshold"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("example {id:?} is invalid: {reason}")]
    Invalid { id: String, reason: &'static str },
    #[error("dataset is empty")]
    Empty,
    #[error("stage counts are not monotone: instructions={instructions}, valid_instances={valid_instances}, ensembled={ensembled}")]
    NonMonotone {
        instructions: usize,
        valid_instances: usize,
        ensembled: usize,
    },
}

/// Examples keyed and ordered by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetStore {
    examples: BTreeMap<String, SyntheticExample>,
}

impl DatasetStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_example(&mut self, example: SyntheticExample) -> Result<(), DatasetError> {
        example.validate()?;
        if self.examples.contains_key(&example.id) {
            return Err(DatasetError::DuplicateId(example.id));
        }
        self.examples.insert(example.id.clone(), example);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SyntheticExample> {
        self.examples.get(id)
    }

    /// Examples in id order.
    pub fn iter(&self) -> impl Iterator<Item = &SyntheticExample> {
        self.examples.values()
    }

    /// The records to write: stored examples plus, optionally, the seeds,
    /// merged in id order.
    pub fn export<'a>(
        &self,
        seeds: impl IntoIterator<Item = &'a SeedTask>,
    ) -> Result<Vec<SyntheticExample>, DatasetError> {
        let mut merged = self.examples.clone();
        for seed in seeds {
            let ex = SyntheticExample::from_seed(seed);
            if merged.contains_key(&ex.id) {
                return Err(DatasetError::DuplicateId(ex.id));
            }
            merged.insert(ex.id.clone(), ex);
        }
        if merged.is_empty() {
            return Err(DatasetError::Empty);
        }
        Ok(merged.into_values().collect())
    }

    pub fn type_balance(&self) -> TypeBalance {
        TypeBalance::count(self.iter().map(|e| e.task_type))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeBalance {
    pub type_a: usize,
    pub type_b: usize,
}

impl TypeBalance {
    pub fn count(types: impl IntoIterator<Item = TaskType>) -> Self {
        types.into_iter().fold(Self::default(), |mut acc, t| {
            match t {
                TaskType::A => acc.type_a += 1,
                TaskType::B => acc.type_b += 1,
            }
            acc
        })
    }
}

/// Counts surviving each pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub instructions: usize,
    pub valid_instances: usize,
    pub ensembled: usize,
    /// `ensembled / valid_instances` as a percentage rounded half up.
    pub percent_ensembled: u32,
}

/// Builds stage statistics. Counts must not grow from one stage to the next.
pub fn compute_stats(
    instructions: usize,
    valid_instances: usize,
    ensembled: usize,
) -> Result<PipelineStats, DatasetError> {
    if ensembled > valid_instances || valid_instances > instructions {
        return Err(DatasetError::NonMonotone {
            instructions,
            valid_instances,
            ensembled,
        });
    }
    let percent_ensembled = if valid_instances == 0 {
        0
    } else {
        // Integer half-up rounding of 100·e/v.
        ((200 * ensembled as u64 + valid_instances as u64) / (2 * valid_instances as u64)) as u32
    };
    Ok(PipelineStats {
        instructions,
        valid_instances,
        ensembled,
        percent_ensembled,
    })
}

impl fmt::Display for PipelineStats {
    /// Formats the ensemble column, e.g. `49 (68%)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}%)", self.ensembled, self.percent_ensembled)
    }
}
