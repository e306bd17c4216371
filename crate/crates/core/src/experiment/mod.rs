//! Config-driven experiments: decomposition, the model grid, and reports.

mod config;
mod pipeline;
mod report;
mod run;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{DataConfig, DecompositionConfig, DecompositionMode, EvaluationConfig, ExperimentConfig, ModelsSection, Variant};
pub use pipeline::{build_datasets, decompose, load_frame, split_ranges, Datasets, Decomposed, DecompositionSummary};
pub use report::{build_report, read_report, write_outputs, write_report, Report, RobustnessEntry, RunRow};
pub use run::{cell_grid, run_experiment, CellFailure, CellId, CellResult, RunOutcome};

use crate::datapipe::{synth_generate, write_frame_file};
use crate::error::{Error, Result};

/// Decomposes the configured target series and writes `decomposed.csv`
/// (input schema plus `imf_*` and `residue` columns) and
/// `decomposition_meta.json`.
pub fn cmd_decompose(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    config.decomposition.sift.validate()?;
    let frame = load_frame(&config.data)?;
    let ranges = split_ranges(&config.data, &frame)?;
    let d = decompose(&frame, &ranges, &config.decomposition)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv = out.join("decomposed.csv");
    write_frame_file(&d.frame, &csv)?;
    let meta = out.join("decomposition_meta.json");
    let text = serde_json::to_string_pretty(&d.summary()).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(&meta, text + "\n").map_err(|e| Error::io(&meta, e))?;
    Ok(vec![csv, meta])
}

/// Runs the experiment grid and writes every output. Returns the outcome;
/// callers should treat a non-empty `failures` list as a failed run.
pub fn cmd_run(config: &ExperimentConfig, jobs: usize, out: &Path) -> Result<RunOutcome> {
    let outcome = run_experiment(config, jobs)?;
    write_outputs(&outcome, out)?;
    Ok(outcome)
}

/// Writes `n_hours` of synthetic data in the input schema.
pub fn cmd_synth(n_hours: usize, seed: u64, out: &Path) -> Result<()> {
    let frame = synth_generate(n_hours, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_frame_file(&frame, out)
}

/// Rewrites the tables of a finished run from its `report.json` and returns
/// a plain-text summary.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let report = read_report(dir)?;
    write_report(&report, dir)?;
    Ok(report::summary_text(&report))
}
