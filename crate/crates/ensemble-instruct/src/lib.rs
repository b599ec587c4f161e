//! Pipeline runtime for ensemble instruction-data generation: model
//! gateway, stage runner, file formats and evaluation.
//!
//! The text-level logic (metric, prompts, parsing, voting, dataset model)
//! lives in `ensemble-instruct-core`; this crate adds IO around it.

pub mod config;
pub mod dataset_io;
pub mod ensemble;
pub mod evaluate;
pub mod gateway;
pub mod instances;
pub mod instructions;
pub mod jsonl;
pub mod manifest;
pub mod pipeline;
pub mod seeds;

pub use config::PipelineConfig;
pub use pipeline::{Pipeline, PipelineError};
