//! Instance generation: one completion per instruction, parsed or rejected.

use ensemble_instruct_core::instance::{parse_instance, ParsedInstance, RejectionReason};
use ensemble_instruct_core::prompt::{build_instance_prompt, STOP_SEQUENCE};
use ensemble_instruct_core::{SeedPool, TaskType};
use rand::Rng;

use crate::gateway::{Backend, Completion, CompletionRequest, FinishReason, DEFAULT_MAX_TOKENS, GENERATION_TEMPERATURE};
use crate::instructions::SynthesisError;

pub type InstanceOutcome = Result<ParsedInstance, RejectionReason>;

fn instance_request(backend: &Backend, prompt: String) -> CompletionRequest {
    backend
        .request(prompt)
        .with_stop(STOP_SEQUENCE)
        .with_temperature(GENERATION_TEMPERATURE)
        .with_max_tokens(DEFAULT_MAX_TOKENS)
}

/// Turns a completion into an instance. Completions cut off by `max_tokens`
/// are rejected as truncated whatever their text looks like.
pub fn judge_completion(instruction: &str, completion: &Completion, task_type: TaskType) -> InstanceOutcome {
    if completion.finish_reason == FinishReason::Length {
        return Err(RejectionReason::Truncated);
    }
    parse_instance(instruction, &completion.text, task_type)
}

/// Generates and parses a single instance for `instruction`.
pub fn synthesize_instance<R: Rng + ?Sized>(
    backend: &Backend,
    instruction: &str,
    task_type: TaskType,
    pool: &SeedPool,
    rng: &mut R,
) -> Result<InstanceOutcome, SynthesisError> {
    let prompt = build_instance_prompt(instruction, pool, task_type, rng)?;
    let completion = backend.complete(&instance_request(backend, prompt.render()))?;
    Ok(judge_completion(instruction, &completion, task_type))
}

/// Generates instances for many instructions. Prompts are built in order from
/// `rng`, requests run concurrently, and outcomes come back in input order.
pub fn synthesize_instances<R: Rng + ?Sized>(
    backend: &Backend,
    instructions: &[(String, TaskType)],
    pool: &SeedPool,
    rng: &mut R,
) -> Result<Vec<InstanceOutcome>, SynthesisError> {
    let requests = instructions
        .iter()
        .map(|(instruction, task_type)| {
            let prompt = build_instance_prompt(instruction, pool, *task_type, rng)?;
            Ok(instance_request(backend, prompt.render()))
        })
        .collect::<Result<Vec<_>, SynthesisError>>()?;
    backend
        .complete_batch(&requests)
        .into_iter()
        .zip(instructions)
        .map(|(result, (instruction, task_type))| Ok(judge_completion(instruction, &result?, *task_type)))
        .collect()
}
