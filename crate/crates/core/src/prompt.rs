//! Few-shot prompt construction.
//!
//! Every prompt renders as a header, the demonstrations separated by one blank
//! line, and a trailing cue the model continues. Demonstrations end with
//! [`STOP_SEQUENCE`] so generation halts after one record. The labels and the
//! terminator form a text protocol that [`crate::instance`] parses back, so
//! they must not change.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::task::{SeedPool, SeedTask, TaskError, TaskType};

/// Record terminator appended to every demonstration.
pub const STOP_SEQUENCE: &str = "|EoS|";
pub const INSTRUCTION_LABEL: &str = "instruction:";
pub const INPUT_LABEL: &str = "input:";
pub const OUTPUT_LABEL: &str = "output:";

/// Instance-generation header for tasks that take an input.
pub const INSTANCE_HEADER_A: &str = "Generate examples for the following instructions. \
The instruction requires input and output instances. And you have to generate both input and output.";
/// Instance-generation header for output-only tasks.
pub const INSTANCE_HEADER_B: &str = "Generate examples for the instructions. \
The instruction does not require input and generate the output directly.";

pub const INSTRUCTION_HEADER_A: &str = "Come up with new instructions. \
Each instruction requires an input to be completed.";
pub const INSTRUCTION_HEADER_B: &str = "Come up with new instructions. \
Each instruction can be completed without any input.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    InstructionGen,
    InstanceGen,
    /// Few-shot additional-output generation for vanilla models.
    OutputGen,
}

/// How many seed and synthetic demonstrations a prompt carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptPlan {
    pub stage: Stage,
    pub task_type: TaskType,
    pub seed_demo_count: usize,
    pub synthetic_demo_count: usize,
}

impl PromptPlan {
    pub const fn new(stage: Stage, task_type: TaskType) -> Self {
        let (seed_demo_count, synthetic_demo_count) = match (stage, task_type) {
            (Stage::InstructionGen, TaskType::A) => (20, 4),
            (Stage::InstructionGen, TaskType::B) => (8, 2),
            (Stage::InstanceGen | Stage::OutputGen, TaskType::A) => (18, 0),
            (Stage::InstanceGen | Stage::OutputGen, TaskType::B) => (15, 0),
        };
        Self {
            stage,
            task_type,
            seed_demo_count,
            synthetic_demo_count,
        }
    }

    pub const fn total(&self) -> usize {
        self.seed_demo_count + self.synthetic_demo_count
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error(transparent)]
    Pool(#[from] TaskError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub header: String,
    pub demos: Vec<String>,
    pub cue: String,
    pub stop_sequence: String,
}

impl Prompt {
    /// The exact text sent to a model.
    pub fn render(&self) -> String {
        let mut parts: Vec<&str> = Vec::with_capacity(self.demos.len() + 2);
        if !self.header.is_empty() {
            parts.push(&self.header);
        }
        parts.extend(self.demos.iter().map(String::as_str));
        parts.push(&self.cue);
        parts.join("\n\n")
    }
}

/// Renders an instruction-only demonstration.
pub fn render_instruction_demo(instruction: &str) -> String {
    format!("{INSTRUCTION_LABEL} {instruction}\n{STOP_SEQUENCE}")
}

/// Renders an instance demonstration, with an input line when one is given.
pub fn render_instance_demo(instruction: &str, input: Option<&str>, output: &str) -> String {
    match input {
        Some(input) => format!(
            "{INSTRUCTION_LABEL} {instruction}\n{INPUT_LABEL} {input}\n{OUTPUT_LABEL} {output}\n{STOP_SEQUENCE}"
        ),
        None => format!("{INSTRUCTION_LABEL} {instruction}\n{OUTPUT_LABEL} {output}\n{STOP_SEQUENCE}"),
    }
}

pub fn render_task_demo(task: &SeedTask) -> String {
    render_instance_demo(task.instruction(), task.input(), task.output())
}

/// The cue that asks a model to continue an instance for `instruction`.
///
/// Type A cues end at `input:`, type B cues at `output:`. When `input` is
/// given the cue spells it out and ends at `output:`.
pub fn instance_cue(instruction: &str, task_type: TaskType, input: Option<&str>) -> String {
    match (task_type, input) {
        (_, Some(input)) => format!("{INSTRUCTION_LABEL} {instruction}\n{INPUT_LABEL} {input}\n{OUTPUT_LABEL}"),
        (TaskType::A, None) => format!("{INSTRUCTION_LABEL} {instruction}\n{INPUT_LABEL}"),
        (TaskType::B, None) => format!("{INSTRUCTION_LABEL} {instruction}\n{OUTPUT_LABEL}"),
    }
}

fn instance_header(task_type: TaskType) -> &'static str {
    match task_type {
        TaskType::A => INSTANCE_HEADER_A,
        TaskType::B => INSTANCE_HEADER_B,
    }
}

/// Builds an instruction-generation prompt.
///
/// Synthetic instructions fill up to the plan's synthetic slots. Slots they
/// cannot fill are taken by extra seed demos, so the total count is fixed.
pub fn build_instruction_prompt<R: Rng + ?Sized>(
    pool: &SeedPool,
    synthetic: &[String],
    task_type: TaskType,
    rng: &mut R,
) -> Result<Prompt, PromptError> {
    let plan = PromptPlan::new(Stage::InstructionGen, task_type);
    let synthetic_count = plan.synthetic_demo_count.min(synthetic.len());
    let seed_count = plan.total() - synthetic_count;

    let mut demos: Vec<String> = pool
        .sample_demos(task_type, seed_count, rng)?
        .into_iter()
        .map(|t| render_instruction_demo(t.instruction()))
        .collect();
    demos.extend(
        rand::seq::index::sample(rng, synthetic.len(), synthetic_count)
            .into_iter()
            .map(|i| render_instruction_demo(synthetic[i].trim())),
    );
    demos.shuffle(rng);

    let header = match task_type {
        TaskType::A => INSTRUCTION_HEADER_A,
        TaskType::B => INSTRUCTION_HEADER_B,
    };
    Ok(Prompt {
        header: header.into(),
        demos,
        cue: INSTRUCTION_LABEL.into(),
        stop_sequence: STOP_SEQUENCE.into(),
    })
}

fn seed_instance_demos<R: Rng + ?Sized>(
    pool: &SeedPool,
    stage: Stage,
    task_type: TaskType,
    rng: &mut R,
) -> Result<Vec<String>, PromptError> {
    let plan = PromptPlan::new(stage, task_type);
    Ok(pool
        .sample_demos(task_type, plan.seed_demo_count, rng)?
        .into_iter()
        .map(render_task_demo)
        .collect())
}

/// Builds the prompt that asks the generator for one instance of `instruction`.
pub fn build_instance_prompt<R: Rng + ?Sized>(
    instruction: &str,
    pool: &SeedPool,
    task_type: TaskType,
    rng: &mut R,
) -> Result<Prompt, PromptError> {
    let instruction = instruction.trim();
    if instruction.is_empty() {
        return Err(PromptError::EmptyInstruction);
    }
    Ok(Prompt {
        header: instance_header(task_type).into(),
        demos: seed_instance_demos(pool, Stage::InstanceGen, task_type, rng)?,
        cue: instance_cue(instruction, task_type, None),
        stop_sequence: STOP_SEQUENCE.into(),
    })
}

/// Builds the prompt for an additional output from an auxiliary model.
///
/// Instruction-tuned models get the bare instruction (and input) zero-shot.
/// Vanilla models get the same cue after instance demos of the matching type.
pub fn build_output_prompt<R: Rng + ?Sized>(
    instruction: &str,
    input: Option<&str>,
    instructed_model: bool,
    pool: &SeedPool,
    rng: &mut R,
) -> Result<Prompt, PromptError> {
    let instruction = instruction.trim();
    if instruction.is_empty() {
        return Err(PromptError::EmptyInstruction);
    }
    let input = input.map(str::trim).filter(|s| !s.is_empty());
    let task_type = TaskType::of_input(input);
    let cue = instance_cue(instruction, task_type, input);
    if instructed_model {
        return Ok(Prompt {
            header: String::new(),
            demos: Vec::new(),
            cue,
            stop_sequence: STOP_SEQUENCE.into(),
        });
    }
    Ok(Prompt {
        header: instance_header(task_type).into(),
        demos: seed_instance_demos(pool, Stage::OutputGen, task_type, rng)?,
        cue,
        stop_sequence: STOP_SEQUENCE.into(),
    })
}
