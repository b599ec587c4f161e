//! Allocation-only building blocks for generating instruction-tuning data
//! with ensembles of language models.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. It covers:
//!
//! * [`metric`]: word tokenization, longest common subsequence and Rouge-L.
//! * [`task`]: seed/synthetic task records, A/B categorization, demo sampling.
//! * [`prompt`]: the few-shot prompt builders and the `|EoS|` text protocol.
//! * [`instance`]: parsing of instruction and instance completions.
//! * [`novelty`]: Rouge-L rejection of near-duplicate instructions.
//! * [`consensus`]: greedy pairwise Rouge-L selection over three outputs.
//! * [`dataset`]: finished examples, the in-memory store and run statistics.
//! * [`eval`]: multi-reference Rouge-L scoring and report aggregation.
#![no_std]

extern crate alloc;

pub mod consensus;
pub mod dataset;
pub mod eval;
pub mod instance;
pub mod metric;
pub mod novelty;
pub mod prompt;
pub mod task;

pub use consensus::{ensemble_select, CandidateOutputs, EnsembleDecision, DEFAULT_THRESHOLD};
pub use dataset::{compute_stats, DatasetStore, EnsembleSummary, PipelineStats, SyntheticExample};
pub use eval::{score_record, EvalRecord, EvalReport};
pub use instance::{parse_instance, ParsedInstance, RejectionReason};
pub use metric::{lcs_length, rouge_l, tokenize, RougeScore, TokenSeq};
pub use novelty::{is_novel, NoveltyIndex, NOVELTY_THRESHOLD};
pub use prompt::{Prompt, PromptPlan, Stage};
pub use task::{Origin, SeedPool, SeedTask, TaskError, TaskType};
