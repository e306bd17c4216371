use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Variant};
use super::pipeline::DecompositionSummary;
use super::run::{CellFailure, CellId, RunOutcome};
use crate::error::{Error, Result};
use crate::evaluation::{
    dm_matrix, improvement_csv, improvement_table, metrics_long_csv, metrics_wide_table, robustness_summary, robustness_table, DmMatrix, Improvement, Metrics, ResultRow,
    Robustness,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub model: Variant,
    pub horizon: usize,
    pub replicate: usize,
    pub seed: u64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessEntry {
    pub model: Variant,
    pub horizon: usize,
    pub summary: Robustness,
}

/// The machine-readable report: everything the tables are built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub rows: usize,
    pub split_sizes: [usize; 3],
    pub decomposition: Option<DecompositionSummary>,
    pub notes: Vec<String>,
    pub runs: Vec<RunRow>,
    pub dm: Vec<DmMatrix>,
    pub robustness: Vec<RobustnessEntry>,
    pub proposed: Option<Variant>,
    pub improvements: Vec<Improvement>,
    pub failures: Vec<CellFailure>,
}

fn notes(config: &ExperimentConfig, outcome: &RunOutcome) -> Vec<String> {
    let mut n = vec![
        "one model is trained per horizon (direct strategy)".to_string(),
        "the validation split is recorded per epoch only; the final-epoch parameters are evaluated".to_string(),
        format!(
            "recurrent output head: {}",
            if config.rnn.sigmoid_head {
                "sigmoid mapped onto the training target range"
            } else {
                "identity"
            }
        ),
        "DM loss is the absolute percentage error; cell (row, column) tests column against row, negative favours the column".to_string(),
        format!("DM reference distribution: {}", if config.evaluation.harvey { "Student t with Harvey correction" } else { "standard normal" }),
    ];
    if let Some(d) = &outcome.decomposition {
        n.push(format!("decomposition mode: {}", config.decomposition.attach_mode().name()));
        if d.mode == super::config::DecompositionMode::FullSeries {
            n.push("full_series decomposition uses the whole target series, so decomposed inputs carry information from later rows".into());
        }
    }
    n
}

fn result_rows(runs: &[RunRow], replicate: usize) -> Vec<ResultRow> {
    runs.iter()
        .filter(|r| r.replicate == replicate)
        .map(|r| ResultRow {
            model: r.model.to_string(),
            horizon: r.horizon,
            metrics: r.metrics,
        })
        .collect()
}

/// Builds the report from a finished run.
pub fn build_report(outcome: &RunOutcome) -> Result<Report> {
    let config = &outcome.config;
    let runs: Vec<RunRow> = outcome
        .cells
        .iter()
        .map(|c| RunRow {
            model: c.id.variant,
            horizon: c.id.horizon,
            replicate: c.id.replicate,
            seed: c.seed,
            metrics: c.metrics,
        })
        .collect();

    let mut ranked = config.models.names.clone();
    ranked.sort_by_key(Variant::table_rank);
    let mut dm = Vec::new();
    let harvey = config.evaluation.harvey;
    let mut pooled_y = Vec::new();
    let mut pooled: Vec<(String, Vec<f64>)> = Vec::new();
    let complete: Vec<Variant> = ranked
        .iter()
        .copied()
        .filter(|v| config.models.horizons.iter().all(|&h| outcome.cell(*v, h, 0).is_some()))
        .collect();
    for v in &complete {
        pooled.push((v.to_string(), Vec::new()));
    }
    for &h in &config.models.horizons {
        let present: Vec<_> = ranked.iter().filter_map(|v| outcome.cell(*v, h, 0)).collect();
        if present.len() >= 2 {
            let y = &present[0].actual;
            let forecasts: Vec<(String, Vec<f64>)> = present.iter().map(|c| (c.id.variant.to_string(), c.predicted.clone())).collect();
            dm.push(dm_matrix(format!("h={h}"), y, &forecasts, h, harvey)?);
        }
        if let Some(first) = complete.first().and_then(|v| outcome.cell(*v, h, 0)) {
            pooled_y.extend_from_slice(&first.actual);
            for (v, (_, p)) in complete.iter().zip(&mut pooled) {
                p.extend_from_slice(&outcome.cell(*v, h, 0).expect("complete").predicted);
            }
        }
    }
    if config.models.horizons.len() > 1 && complete.len() >= 2 {
        let h = *config.models.horizons.iter().max().expect("non-empty");
        dm.push(dm_matrix("pooled", &pooled_y, &pooled, h, harvey)?);
    }

    let mut robustness = Vec::new();
    if config.robustness_runs >= 2 {
        for &v in &config.models.names {
            for &h in &config.models.horizons {
                let ms: Vec<Metrics> = runs.iter().filter(|r| r.model == v && r.horizon == h).map(|r| r.metrics).collect();
                if ms.len() >= 2 {
                    robustness.push(RobustnessEntry {
                        model: v,
                        horizon: h,
                        summary: robustness_summary(&ms)?,
                    });
                }
            }
        }
    }

    let proposed = [
        super::config::Variant::ceemdan(crate::models::ModelKind::DeepTcn),
        super::config::Variant::plain(crate::models::ModelKind::DeepTcn),
    ]
    .into_iter()
    .find(|v| config.models.names.contains(v) && config.models.horizons.iter().all(|&h| outcome.cell(*v, h, 0).is_some()));
    let improvements = match proposed {
        Some(p) => {
            let rows: Vec<ResultRow> = result_rows(&runs, 0)
                .into_iter()
                .filter(|r| {
                    let v: Variant = r.model.parse().expect("own name");
                    complete.contains(&v)
                })
                .collect();
            improvement_table(&rows, &p.to_string())?
        }
        None => Vec::new(),
    };

    Ok(Report {
        config: config.clone(),
        rows: outcome.rows,
        split_sizes: outcome.split_sizes,
        decomposition: outcome.decomposition.clone(),
        notes: notes(config, outcome),
        runs,
        dm,
        robustness,
        proposed,
        improvements,
        failures: outcome.failures.clone(),
    })
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn runs_csv(runs: &[RunRow]) -> String {
    let mut out = String::from("model,horizon,replicate,seed,mape,mae,rmse,n\n");
    for r in runs {
        let m = r.metrics;
        writeln!(out, "{},{},{},{},{},{},{},{}", r.model, r.horizon, r.replicate, r.seed, m.mape, m.mae, m.rmse, m.n).unwrap();
    }
    out
}

fn failures_csv(failures: &[CellFailure]) -> String {
    let mut out = String::from("cell,error\n");
    for f in failures {
        writeln!(out, "{},\"{}\"", f.id, f.error.replace('"', "'")).unwrap();
    }
    out
}

/// Writes every table derived from `report` plus `report.json` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let cfg = &report.config;
    let first = result_rows(&report.runs, 0);
    write(dir, "metrics.csv", &metrics_long_csv(&first), &mut written)?;
    write(dir, "runs.csv", &runs_csv(&report.runs), &mut written)?;

    let names: Vec<String> = cfg.models.names.iter().map(Variant::to_string).collect();
    write(dir, "metrics_table.csv", &metrics_wide_table(&first, &names, &cfg.models.horizons), &mut written)?;
    let ceemdan: Vec<String> = cfg.models.names.iter().filter(|v| v.decomposed).map(Variant::to_string).collect();
    if !ceemdan.is_empty() {
        write(dir, "metrics_table_ceemdan.csv", &metrics_wide_table(&first, &ceemdan, &cfg.models.horizons), &mut written)?;
    }
    for m in &report.dm {
        let label = m.label.replace('=', "");
        write(dir, &format!("dm_{label}.tsv"), &m.to_tsv(), &mut written)?;
    }
    if !report.robustness.is_empty() {
        let entries: Vec<(String, usize, Robustness)> = report.robustness.iter().map(|e| (e.model.to_string(), e.horizon, e.summary)).collect();
        write(dir, "robustness.csv", &robustness_table(&entries), &mut written)?;
    }
    if let Some(p) = report.proposed {
        if !report.improvements.is_empty() {
            write(dir, "improvement.csv", &improvement_csv(&p.to_string(), &report.improvements), &mut written)?;
        }
    }
    write(dir, "failures.csv", &failures_csv(&report.failures), &mut written)?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Data(e.to_string()))?;
    write(dir, "report.json", &(json + "\n"), &mut written)?;
    Ok(written)
}

fn trace_csv(outcome: &RunOutcome, id: &CellId) -> String {
    let cell = outcome.cells.iter().find(|c| &c.id == id).expect("cell exists");
    let mut out = String::from("timestamp,actual,predicted\n");
    for ((t, a), p) in cell.timestamps.iter().zip(&cell.actual).zip(&cell.predicted) {
        writeln!(out, "{},{a},{p}", t.format("%Y-%m-%d %H:%M")).unwrap();
    }
    out
}

/// Writes the report, the per-epoch histories and the test prediction traces.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    let report = build_report(outcome)?;
    let mut written = write_report(&report, dir)?;
    for c in &outcome.cells {
        let stem = c.id.stem();
        if !c.history.closed_form {
            write(dir, &format!("histories/{stem}.csv"), &c.history.to_csv(), &mut written)?;
        }
        write(dir, &format!("traces/{stem}.csv"), &trace_csv(outcome, &c.id), &mut written)?;
    }
    Ok(written)
}

/// Reads `report.json` from a previous run.
pub fn read_report(dir: &Path) -> Result<Report> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path,
        line: e.line(),
        message: e.to_string(),
    })
}

/// Short human-readable digest of a report.
pub fn summary_text(report: &Report) -> String {
    let mut out = String::new();
    let [a, b, c] = report.split_sizes;
    writeln!(out, "{} rows, split {a}/{b}/{c}", report.rows).unwrap();
    if let Some(d) = &report.decomposition {
        writeln!(out, "decomposition: {} IMFs + residue, reconstruction error {:.2e}", d.n_imfs, d.reconstruction_error).unwrap();
    }
    let names: Vec<String> = report.config.models.names.iter().map(Variant::to_string).collect();
    out.push_str(&metrics_wide_table(&result_rows(&report.runs, 0), &names, &report.config.models.horizons));
    for m in &report.dm {
        out.push('\n');
        out.push_str(&m.to_tsv());
    }
    if !report.failures.is_empty() {
        writeln!(out, "\n{} failed cell(s):", report.failures.len()).unwrap();
        for f in &report.failures {
            writeln!(out, "  {}: {}", f.id, f.error).unwrap();
        }
    }
    out
}
