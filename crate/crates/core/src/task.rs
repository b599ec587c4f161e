//! Task records and the A/B seed pool.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Whether a task's instruction needs an input to be meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskType {
    /// The instruction requires an input.
    A,
    /// The instruction stands alone.
    B,
}

impl TaskType {
    pub const ALL: [TaskType; 2] = [TaskType::A, TaskType::B];

    pub fn of_input(input: Option<&str>) -> Self {
        match input {
            Some(_) => TaskType::A,
            None => TaskType::B,
        }
    }

    pub fn requires_input(self) -> bool {
        self == TaskType::A
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::A => "A",
            TaskType::B => "B",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Seed,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskError {
    #[error("task {id:?}: field `{field}` is empty")]
    EmptyField { id: String, field: &'static str },
    #[error("duplicate task id {0:?}")]
    DuplicateId(String),
    #[error("requested {requested} type-{task_type} tasks but only {available} are available")]
    NotEnoughTasks {
        task_type: TaskType,
        requested: usize,
        available: usize,
    },
}

/// A validated task: trimmed, nonempty instruction and output, and an input
/// that is either absent or nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTask {
    id: String,
    instruction: String,
    input: Option<String>,
    output: String,
    origin: Origin,
}

impl SeedTask {
    /// Validates and normalizes a task. Surrounding whitespace is trimmed and a
    /// blank input becomes absent, which makes the task type B.
    pub fn new(
        id: impl Into<String>,
        instruction: &str,
        input: Option<&str>,
        output: &str,
        origin: Origin,
    ) -> Result<Self, TaskError> {
        let id = id.into();
        let instruction = instruction.trim();
        let output = output.trim();
        if instruction.is_empty() {
            return Err(TaskError::EmptyField {
                id,
                field: "instruction",
            });
        }
        if output.is_empty() {
            return Err(TaskError::EmptyField { id, field: "output" });
        }
        let input = input
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(ToString::to_string);
        Ok(Self {
            id,
            instruction: instruction.to_string(),
            input,
            output: output.to_string(),
            origin,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn instruction(&self) -> &str {
        &self.instruction
    }

    pub fn input(&self) -> Option<&str> {
        self.input.as_deref()
    }

    pub fn output(&self) -> &str {
        &self.output
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn task_type(&self) -> TaskType {
        TaskType::of_input(self.input())
    }
}

/// Seed tasks split by type. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedPool {
    type_a: Vec<SeedTask>,
    type_b: Vec<SeedTask>,
}

impl SeedPool {
    /// Categorizes tasks by input presence, keeping their order. Fails on a
    /// repeated id.
    pub fn from_tasks(tasks: impl IntoIterator<Item = SeedTask>) -> Result<Self, TaskError> {
        let mut seen = BTreeSet::new();
        let mut pool = Self::default();
        for task in tasks {
            if !seen.insert(task.id.clone()) {
                return Err(TaskError::DuplicateId(task.id));
            }
            match task.task_type() {
                TaskType::A => pool.type_a.push(task),
                TaskType::B => pool.type_b.push(task),
            }
        }
        Ok(pool)
    }

    pub fn type_a(&self) -> &[SeedTask] {
        &self.type_a
    }

    pub fn type_b(&self) -> &[SeedTask] {
        &self.type_b
    }

    pub fn of_type(&self, task_type: TaskType) -> &[SeedTask] {
        match task_type {
            TaskType::A => &self.type_a,
            TaskType::B => &self.type_b,
        }
    }

    pub fn len(&self) -> usize {
        self.type_a.len() + self.type_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All tasks, type A first.
    pub fn iter(&self) -> impl Iterator<Item = &SeedTask> {
        self.type_a.iter().chain(self.type_b.iter())
    }

    /// Draws `n` distinct tasks of one type, uniformly without replacement.
    pub fn sample_demos<R: Rng + ?Sized>(
        &self,
        task_type: TaskType,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<&SeedTask>, TaskError> {
        let tasks = self.of_type(task_type);
        if n > tasks.len() {
            return Err(TaskError::NotEnoughTasks {
                task_type,
                requested: n,
                available: tasks.len(),
            });
        }
        Ok(rand::seq::index::sample(rng, tasks.len(), n)
            .into_iter()
            .map(|i| &tasks[i])
            .collect())
    }
}
