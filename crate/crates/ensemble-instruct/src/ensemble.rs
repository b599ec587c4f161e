//! Additional outputs from auxiliary models for consensus voting.

use ensemble_instruct_core::consensus::CandidateOutputs;
use ensemble_instruct_core::prompt::{build_output_prompt, STOP_SEQUENCE};
use ensemble_instruct_core::SeedPool;
use rand::Rng;

use crate::gateway::{Backend, CompletionRequest, GatewayError, DEFAULT_MAX_TOKENS, OUTPUT_TEMPERATURE};
use crate::instructions::SynthesisError;

/// An instance awaiting additional outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputJob {
    pub instruction: String,
    pub input: Option<String>,
    /// Output produced with the instance, `o1` in the vote.
    pub primary_output: String,
}

fn output_request<R: Rng + ?Sized>(
    backend: &Backend,
    job: &OutputJob,
    pool: &SeedPool,
    rng: &mut R,
) -> Result<CompletionRequest, SynthesisError> {
    let prompt = build_output_prompt(&job.instruction, job.input.as_deref(), backend.instructed(), pool, rng)?;
    Ok(backend
        .request(prompt.render())
        .with_stop(STOP_SEQUENCE)
        .with_temperature(OUTPUT_TEMPERATURE)
        .with_max_tokens(DEFAULT_MAX_TOKENS))
}

fn candidates(job: &OutputJob, primary_source: &str, aux: [&Backend; 2], o2: String, o3: String) -> CandidateOutputs {
    CandidateOutputs::new(
        [job.primary_output.clone(), o2.trim().to_string(), o3.trim().to_string()],
        [primary_source.to_string(), aux[0].name().to_string(), aux[1].name().to_string()],
    )
}

/// Collects `o2` and `o3` for one instance, querying both auxiliary models
/// concurrently. Instruction-tuned models are prompted zero-shot, vanilla ones
/// few-shot. An empty completion stays an empty candidate.
pub fn gather_outputs<R: Rng + ?Sized>(
    job: &OutputJob,
    primary_source: &str,
    aux: [&Backend; 2],
    pool: &SeedPool,
    rng: &mut R,
) -> Result<CandidateOutputs, SynthesisError> {
    let r2 = output_request(aux[0], job, pool, rng)?;
    let r3 = output_request(aux[1], job, pool, rng)?;
    let (o2, o3) = std::thread::scope(|s| {
        let h = s.spawn(|| aux[1].complete(&r3));
        let o2 = aux[0].complete(&r2);
        (o2, h.join().expect("auxiliary request thread panicked"))
    });
    Ok(candidates(job, primary_source, aux, o2?.text, o3?.text))
}

/// Batch form of [`gather_outputs`]. Both auxiliary models work through
/// their requests at the same time; results keep job order.
pub fn gather_outputs_batch<R: Rng + ?Sized>(
    jobs: &[OutputJob],
    primary_source: &str,
    aux: [&Backend; 2],
    pool: &SeedPool,
    rng: &mut R,
) -> Result<Vec<CandidateOutputs>, SynthesisError> {
    let mut r2 = Vec::with_capacity(jobs.len());
    let mut r3 = Vec::with_capacity(jobs.len());
    for job in jobs {
        r2.push(output_request(aux[0], job, pool, rng)?);
        r3.push(output_request(aux[1], job, pool, rng)?);
    }
    let (o2, o3) = std::thread::scope(|s| {
        let h = s.spawn(|| aux[1].complete_batch(&r3));
        let o2 = aux[0].complete_batch(&r2);
        (o2, h.join().expect("auxiliary request thread panicked"))
    });
    jobs.iter()
        .zip(o2.into_iter().zip(o3))
        .map(|(job, (a, b))| {
            let (a, b) = (a?, b?);
            Ok::<_, GatewayError>(candidates(job, primary_source, aux, a.text, b.text))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(Into::into)
}
