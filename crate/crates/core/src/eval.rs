//! Rouge-L scoring of predictions against references.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::metric::{rouge_l, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub task_id: String,
    pub instance_id: String,
    pub prediction: String,
    /// Never empty.
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("record {task_id}/{instance_id} has no references")]
    NoReferences { task_id: String, instance_id: String },
    #[error("duplicate record {task_id}/{instance_id}")]
    Duplicate { task_id: String, instance_id: String },
}

/// Best Rouge-L F1 of the prediction against any reference, in `[0, 1]`.
pub fn score_record(record: &EvalRecord) -> f64 {
    let pred = tokenize(&record.prediction);
    record
        .references
        .iter()
        .map(|r| rouge_l(&pred, &tokenize(r)).f1)
        .fold(0.0, f64::max)
}

/// Aggregated scores, scaled by 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean score per task.
    pub per_task: BTreeMap<String, f64>,
    /// Mean over all records.
    pub overall: f64,
    /// Unweighted mean of the per-task means.
    pub task_mean: f64,
    pub record_count: usize,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Scores and aggregates records.
///
/// Scores are summed in `(task_id, instance_id)` order so the report does not
/// depend on input order.
pub fn evaluate_records(records: &[EvalRecord]) -> Result<EvalReport, EvalError> {
    let mut scored: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for r in records {
        if r.references.is_empty() {
            return Err(EvalError::NoReferences {
                task_id: r.task_id.clone(),
                instance_id: r.instance_id.clone(),
            });
        }
        let key = (r.task_id.as_str(), r.instance_id.as_str());
        if scored.insert(key, score_record(r)).is_some() {
            return Err(EvalError::Duplicate {
                task_id: r.task_id.clone(),
                instance_id: r.instance_id.clone(),
            });
        }
    }

    let mut by_task: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (&(task, _), &score) in &scored {
        by_task.entry(task).or_default().push(score);
    }
    let per_task: BTreeMap<String, f64> = by_task
        .iter()
        .map(|(task, scores)| (String::from(*task), 100.0 * mean(scores)))
        .collect();
    let all: Vec<f64> = scored.values().copied().collect();
    let task_means: Vec<f64> = per_task.values().copied().collect();

    Ok(EvalReport {
        overall: 100.0 * mean(&all),
        task_mean: mean(&task_means),
        per_task,
        record_count: records.len(),
    })
}
