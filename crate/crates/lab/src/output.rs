//! Writers for `trials.csv`, `summary.csv` and `meta.json`.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::experiments::ExperimentOutput;

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the three artifacts into `dir`, creating it when needed.
pub fn write_outputs(dir: &Path, out: &ExperimentOutput, wall_time_s: f64) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_csv(&dir.join("trials.csv"), &out.trials)?;
    write_csv(&dir.join("summary.csv"), &out.summary)?;
    let mut meta = out.meta.clone();
    meta["version"] = serde_json::json!(env!("CARGO_PKG_VERSION"));
    meta["wall_time_s"] = serde_json::json!(wall_time_s);
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}
