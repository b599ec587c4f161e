//! Rouge-L evaluation of prediction files against reference files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use ensemble_instruct_core::eval::{evaluate_records, EvalError, EvalRecord, EvalReport};
use serde::{Deserialize, Serialize};

use crate::jsonl::{self, JsonlError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub task_id: String,
    pub instance_id: String,
    #[serde(default)]
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub task_id: String,
    pub instance_id: String,
    pub prediction: String,
}

#[derive(Debug, thiserror::Error)]
pub enum EvaluateError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("duplicate {file} record {task_id}/{instance_id}")]
    Duplicate {
        file: &'static str,
        task_id: String,
        instance_id: String,
    },
    #[error("predictions without references: {}", .0.join(", "))]
    MissingReferences(Vec<String>),
    #[error("references without predictions: {}", .0.join(", "))]
    MissingPredictions(Vec<String>),
}

impl EvaluateError {
    pub fn category(&self) -> &'static str {
        match self {
            EvaluateError::Jsonl(JsonlError::Io { .. }) => "io",
            EvaluateError::Jsonl(JsonlError::Parse { .. }) => "format",
            _ => "alignment",
        }
    }
}

type Key = (String, String);

fn index<T>(
    items: Vec<T>,
    file: &'static str,
    key: impl Fn(&T) -> Key,
) -> Result<BTreeMap<Key, T>, EvaluateError> {
    let mut map = BTreeMap::new();
    for item in items {
        let k = key(&item);
        if map.contains_key(&k) {
            return Err(EvaluateError::Duplicate {
                file,
                task_id: k.0,
                instance_id: k.1,
            });
        }
        map.insert(k, item);
    }
    Ok(map)
}

fn show(keys: impl IntoIterator<Item = Key>) -> Vec<String> {
    keys.into_iter().map(|(t, i)| format!("{t}/{i}")).collect()
}

/// Joins predictions to references on `(task_id, instance_id)`. Both sides
/// must cover exactly the same keys.
pub fn align(
    predictions: Vec<PredictionRecord>,
    references: Vec<ReferenceRecord>,
) -> Result<Vec<EvalRecord>, EvaluateError> {
    let preds = index(predictions, "prediction", |p| (p.task_id.clone(), p.instance_id.clone()))?;
    let mut refs = index(references, "reference", |r| (r.task_id.clone(), r.instance_id.clone()))?;

    let missing: BTreeSet<Key> = preds.keys().filter(|k| !refs.contains_key(*k)).cloned().collect();
    if !missing.is_empty() {
        return Err(EvaluateError::MissingReferences(show(missing)));
    }
    let unpredicted: BTreeSet<Key> = refs.keys().filter(|k| !preds.contains_key(*k)).cloned().collect();
    if !unpredicted.is_empty() {
        return Err(EvaluateError::MissingPredictions(show(unpredicted)));
    }
    Ok(preds
        .into_iter()
        .map(|(k, p)| {
            let r = refs.remove(&k).expect("alignment checked");
            EvalRecord {
                task_id: p.task_id,
                instance_id: p.instance_id,
                prediction: p.prediction,
                references: r.references,
            }
        })
        .collect())
}

pub fn evaluate(predictions: &Path, references: &Path) -> Result<EvalReport, EvaluateError> {
    let records = align(jsonl::read(predictions)?, jsonl::read(references)?)?;
    Ok(evaluate_records(&records)?)
}

/// Plain-text report: one row per task, then the two overall aggregates.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let width = report.per_task.keys().map(String::len).max().unwrap_or(0).max(7);
    let _ = writeln!(out, "{:<width$}  {:>7}", "task", "rougeL");
    for (task, score) in &report.per_task {
        let _ = writeln!(out, "{task:<width$}  {score:>7.2}");
    }
    let _ = writeln!(out, "{:<width$}  {:>7.2}", "overall", report.overall);
    let _ = writeln!(out, "{:<width$}  {:>7.2}", "task-mean", report.task_mean);
    let _ = writeln!(out, "records: {}", report.record_count);
    out
}
