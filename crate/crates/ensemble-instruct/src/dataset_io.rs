//! Dataset files and statistics reports.

use std::fmt::Write as _;
use std::path::Path;

use ensemble_instruct_core::dataset::{DatasetError, DatasetStore, PipelineStats, SyntheticExample};
use ensemble_instruct_core::SeedPool;
use serde::{Deserialize, Serialize};

use crate::jsonl::{self, JsonlError};

#[derive(Debug, thiserror::Error)]
pub enum DatasetIoError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

/// Writes the store, plus the seed tasks when `include_seeds` is set, as JSON
/// Lines sorted by id. Returns the number of lines written.
pub fn write_dataset(
    path: &Path,
    store: &DatasetStore,
    include_seeds: bool,
    pool: &SeedPool,
) -> Result<usize, DatasetIoError> {
    let rows = if include_seeds {
        store.export(pool.iter())?
    } else {
        store.export([])?
    };
    jsonl::write(path, &rows)?;
    Ok(rows.len())
}

/// Reads a dataset file back into a store, validating every record.
pub fn read_dataset(path: &Path) -> Result<DatasetStore, DatasetIoError> {
    let mut store = DatasetStore::new();
    for ex in jsonl::read::<SyntheticExample>(path)? {
        store.add_example(ex)?;
    }
    Ok(store)
}

/// Stage counts for one task type, or the total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub label: String,
    #[serde(flatten)]
    pub stats: PipelineStats,
}

/// Plain-text table of stage counts, one row per entry.
pub fn render_stats_table(rows: &[StatsRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<8} {:>12} {:>10} {:>14}", "type", "instruction", "instance", "ensemble");
    for row in rows {
        let _ = writeln!(
            out,
            "{:<8} {:>12} {:>10} {:>14}",
            row.label,
            row.stats.instructions,
            row.stats.valid_instances,
            row.stats.to_string()
        );
    }
    out
}
