//! Seed file loading.
//!
//! Two record shapes are accepted, one JSON object per line:
//!
//! * flat: `{"id"?, "instruction", "input"?, "output"}`
//! * upstream: `{"id", "instruction", "instances": [{"input", "output"}, ...]}`,
//!   of which only the first instance is used.
//!
//! Unknown fields are ignored. Records without an id get `line-<n>`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ensemble_instruct_core::task::{Origin, SeedPool, SeedTask, TaskError};
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: invalid JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: field `{field}`: {message}")]
    Field {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
}

fn field_err(line: usize, field: &'static str, message: impl Into<String>) -> LoadError {
    LoadError::Field {
        line,
        field,
        message: message.into(),
    }
}

fn opt_str<'a>(obj: &'a Map<String, Value>, key: &'static str, line: usize) -> Result<Option<&'a str>, LoadError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(field_err(line, key, "expected a string")),
    }
}

fn req_str<'a>(obj: &'a Map<String, Value>, key: &'static str, line: usize) -> Result<&'a str, LoadError> {
    opt_str(obj, key, line)?.ok_or_else(|| field_err(line, key, "missing"))
}

/// Parses one JSON line into a task.
pub fn parse_seed_record(text: &str, line: usize) -> Result<SeedTask, LoadError> {
    let value: Value = serde_json::from_str(text).map_err(|e| LoadError::Json {
        line,
        message: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(LoadError::Json {
            line,
            message: "expected a JSON object".into(),
        });
    };
    let id = match obj.get("id") {
        None | Some(Value::Null) => format!("line-{line}"),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err(field_err(line, "id", "expected a string")),
    };
    let origin = match opt_str(&obj, "origin", line)? {
        None | Some("seed") => Origin::Seed,
        Some("synthetic") => Origin::Synthetic,
        Some(other) => return Err(field_err(line, "origin", format!("unknown origin {other:?}"))),
    };
    let instruction = req_str(&obj, "instruction", line)?;

    let (input, output) = match obj.get("instances") {
        Some(Value::Array(instances)) => {
            let Some(Value::Object(first)) = instances.first() else {
                return Err(field_err(line, "instances", "expected a nonempty list of objects"));
            };
            (opt_str(first, "input", line)?, req_str(first, "output", line)?)
        }
        Some(_) => return Err(field_err(line, "instances", "expected a list")),
        None => (opt_str(&obj, "input", line)?, req_str(&obj, "output", line)?),
    };

    SeedTask::new(id, instruction, input, output, origin).map_err(|e| match e {
        TaskError::EmptyField { field, .. } => field_err(line, field, "empty"),
        other => field_err(line, "id", other.to_string()),
    })
}

/// Reads tasks from JSON Lines, validating each record and rejecting repeated ids.
pub fn read_seed_tasks(reader: impl BufRead) -> Result<Vec<SeedTask>, LoadError> {
    let mut tasks = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| LoadError::Json {
            line: line_no,
            message: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let task = parse_seed_record(&text, line_no)?;
        if !ids.insert(task.id().to_string()) {
            return Err(LoadError::DuplicateId {
                line: line_no,
                id: task.id().to_string(),
            });
        }
        tasks.push(task);
    }
    Ok(tasks)
}

/// Loads and categorizes a seed file.
pub fn load_seed_tasks(path: impl AsRef<Path>) -> Result<SeedPool, LoadError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let tasks = read_seed_tasks(BufReader::new(file))?;
    let pool = SeedPool::from_tasks(tasks).expect("ids already checked for uniqueness");
    log::info!(
        "loaded {} seed tasks from {} ({} type A, {} type B)",
        pool.len(),
        path.display(),
        pool.type_a().len(),
        pool.type_b().len()
    );
    Ok(pool)
}
