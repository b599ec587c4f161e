//! Instruction generation with Rouge-L rejection of near-duplicates.

use ensemble_instruct_core::instance::extract_instruction;
use ensemble_instruct_core::novelty::NoveltyIndex;
use ensemble_instruct_core::prompt::{build_instruction_prompt, PromptError, STOP_SEQUENCE};
use ensemble_instruct_core::{SeedPool, TaskType};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gateway::{Backend, CompletionRequest, GatewayError, DEFAULT_MAX_TOKENS, GENERATION_TEMPERATURE};

/// Attempts allowed per requested instruction.
pub const DEFAULT_BUDGET_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedInstruction {
    pub instruction: String,
    pub task_type: TaskType,
    pub backend: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstructionSet {
    pub accepted: Vec<AcceptedInstruction>,
    pub rejected_count: usize,
    pub attempts: usize,
    /// The attempt budget ran out before the target was reached.
    pub partial: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Keeps the accepted set across calls so later runs (and the other task
/// type) are deduplicated against everything accepted so far.
#[derive(Debug, Clone)]
pub struct InstructionGenerator {
    index: NoveltyIndex,
    accepted: Vec<AcceptedInstruction>,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl InstructionGenerator {
    /// Starts from the seed instructions of both types.
    pub fn new(pool: &SeedPool) -> Self {
        Self {
            index: NoveltyIndex::with_entries(pool.iter().map(|t| t.instruction().to_string())),
            accepted: Vec::new(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: GENERATION_TEMPERATURE,
        }
    }

    pub fn accepted(&self) -> &[AcceptedInstruction] {
        &self.accepted
    }

    fn synthetic_of_type(&self, task_type: TaskType) -> Vec<String> {
        self.accepted
            .iter()
            .filter(|a| a.task_type == task_type)
            .map(|a| a.instruction.clone())
            .collect()
    }

    /// Requests candidates until `target` new instructions are accepted or
    /// `budget` attempts are spent. Requests go out in batches bounded by the
    /// backend's parallelism; candidates are checked in request order.
    pub fn generate<R: Rng + ?Sized>(
        &mut self,
        backend: &Backend,
        pool: &SeedPool,
        task_type: TaskType,
        target: usize,
        budget: usize,
        rng: &mut R,
    ) -> Result<InstructionSet, SynthesisError> {
        let mut set = InstructionSet::default();
        let mut accepted_here = 0;
        while accepted_here < target && set.attempts < budget {
            let batch = backend
                .descriptor()
                .parallelism
                .max(1)
                .min(target - accepted_here)
                .min(budget - set.attempts);
            let synthetic = self.synthetic_of_type(task_type);
            let requests = (0..batch)
                .map(|_| {
                    let prompt = build_instruction_prompt(pool, &synthetic, task_type, rng)?;
                    Ok(self.request(backend, prompt.render()))
                })
                .collect::<Result<Vec<CompletionRequest>, PromptError>>()?;

            for result in backend.complete_batch(&requests) {
                let completion = result?;
                set.attempts += 1;
                let candidate = extract_instruction(&completion.text);
                match candidate {
                    Some(c) if accepted_here < target && self.index.try_insert(&c) => {
                        let a = AcceptedInstruction {
                            instruction: c,
                            task_type,
                            backend: backend.name().to_string(),
                        };
                        self.accepted.push(a.clone());
                        set.accepted.push(a);
                        accepted_here += 1;
                    }
                    _ => set.rejected_count += 1,
                }
            }
        }
        set.partial = accepted_here < target;
        if set.partial {
            log::warn!(
                "type {task_type}: accepted {accepted_here}/{target} instructions within {budget} attempts"
            );
        }
        Ok(set)
    }

    fn request(&self, backend: &Backend, prompt: String) -> CompletionRequest {
        backend
            .request(prompt)
            .with_stop(STOP_SEQUENCE)
            .with_temperature(self.temperature)
            .with_max_tokens(self.max_tokens)
    }
}

/// One-shot convenience wrapper around [`InstructionGenerator`].
pub fn generate_instructions<R: Rng + ?Sized>(
    backend: &Backend,
    pool: &SeedPool,
    task_type: TaskType,
    target: usize,
    budget: Option<usize>,
    rng: &mut R,
) -> Result<InstructionSet, SynthesisError> {
    let budget = budget.unwrap_or(DEFAULT_BUDGET_FACTOR * target);
    InstructionGenerator::new(pool).generate(backend, pool, task_type, target, budget, rng)
}
