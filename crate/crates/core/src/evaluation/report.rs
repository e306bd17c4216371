use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::dm::{dm_test, DmResult};
use super::metrics::CRITERIA;
use super::summary::{Improvement, ResultRow, Robustness};
use crate::error::{Error, Result};

/// Pairwise DM results in lower-triangular layout: row `i` holds one result
/// per earlier model `j < i`, testing model `j` (A) against model `i` (B).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmMatrix {
    pub label: String,
    pub models: Vec<String>,
    pub cells: Vec<Vec<DmResult>>,
}

/// Tests every ordered pair `(j, i)` with `j < i` over a shared target.
pub fn dm_matrix(label: impl Into<String>, y: &[f64], forecasts: &[(String, Vec<f64>)], horizon: usize, harvey: bool) -> Result<DmMatrix> {
    if forecasts.len() < 2 {
        return Err(Error::Data("a DM matrix needs at least two models".into()));
    }
    let mut cells = Vec::with_capacity(forecasts.len());
    for i in 0..forecasts.len() {
        let row = (0..i)
            .map(|j| dm_test(y, &forecasts[j].1, &forecasts[i].1, horizon, harvey))
            .collect::<Result<Vec<_>>>()?;
        cells.push(row);
    }
    Ok(DmMatrix {
        label: label.into(),
        models: forecasts.iter().map(|(m, _)| m.clone()).collect(),
        cells,
    })
}

impl DmMatrix {
    /// Number of filled cells, `n (n - 1) / 2`.
    pub fn cell_count(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    /// Tab-separated grid: columns are all models but the last, rows all but
    /// the first, each cell `statistic (p)`.
    pub fn to_tsv(&self) -> String {
        let n = self.models.len();
        let mut out = String::new();
        writeln!(out, "{}\t{}", self.label, self.models[..n - 1].join("\t")).unwrap();
        for i in 1..n {
            let mut line = self.models[i].clone();
            for j in 0..n - 1 {
                line.push('\t');
                if j < i {
                    line.push_str(&self.cells[i][j].cell());
                }
            }
            writeln!(out, "{}", line.trim_end()).unwrap();
        }
        out
    }
}

/// One line per model, horizon and criterion.
pub fn metrics_long_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("model,horizon,criterion,value,n\n");
    for r in rows {
        for (name, v) in CRITERIA.iter().zip(r.metrics.criteria()) {
            writeln!(out, "{},{},{name},{v},{}", r.model, r.horizon, r.metrics.n).unwrap();
        }
    }
    out
}

/// Horizons down the side, models across: one row per (horizon, criterion).
/// Missing cells are left empty.
pub fn metrics_wide_table(rows: &[ResultRow], models: &[String], horizons: &[usize]) -> String {
    let mut out = format!("h,criterion,{}\n", models.join(","));
    for h in horizons {
        for (c, name) in CRITERIA.iter().enumerate() {
            let cells: Vec<String> = models
                .iter()
                .map(|m| {
                    rows.iter()
                        .find(|r| &r.model == m && r.horizon == *h)
                        .map(|r| format!("{:.4}", r.metrics.criteria()[c]))
                        .unwrap_or_default()
                })
                .collect();
            writeln!(out, "{h},{name},{}", cells.join(",")).unwrap();
        }
    }
    out
}

/// `model,horizon,criterion,mean_std` with `Mean (Std)` cells.
pub fn robustness_table(entries: &[(String, usize, Robustness)]) -> String {
    let mut out = String::from("model,horizon,criterion,runs,mean_std\n");
    for (model, h, r) in entries {
        for (name, cell) in CRITERIA.iter().zip(r.cells()) {
            writeln!(out, "{model},{h},{name},{},{cell}", r.runs).unwrap();
        }
    }
    out
}

/// Percentage reductions, one row per benchmark.
pub fn improvement_csv(proposed: &str, table: &[Improvement]) -> String {
    let mut out = String::from("proposed,benchmark,mape_reduction_pct,mae_reduction_pct,rmse_reduction_pct\n");
    for i in table {
        let [a, b, c] = i.reduction.map(|v| v * 100.0);
        writeln!(out, "{proposed},{},{a:.2},{b:.2},{c:.2}", i.benchmark).unwrap();
    }
    out
}
