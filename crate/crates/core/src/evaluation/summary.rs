use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use crate::error::{Error, Result};

/// Test metrics of one model at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub horizon: usize,
    pub metrics: Metrics,
}

/// Sample mean and standard deviation (`n - 1`) of each criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    pub runs: usize,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Robustness {
    /// `Mean (Std)` cells for MAPE, MAE and RMSE.
    pub fn cells(&self) -> [String; 3] {
        std::array::from_fn(|c| format!("{:.3} ({:.3})", self.mean[c], self.std[c]))
    }
}

pub fn robustness_summary(runs: &[Metrics]) -> Result<Robustness> {
    if runs.len() < 2 {
        return Err(Error::Data(format!("robustness needs at least 2 runs, got {}", runs.len())));
    }
    let n = runs.len() as f64;
    let mut mean = [0.0; 3];
    let mut std = [0.0; 3];
    for c in 0..3 {
        let xs = runs.iter().map(|m| m.criteria()[c]);
        mean[c] = xs.clone().sum::<f64>() / n;
        std[c] = (xs.map(|x| (x - mean[c]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    }
    Ok(Robustness {
        runs: runs.len(),
        mean,
        std,
    })
}

/// Relative reduction of the proposed model's horizon-averaged criteria
/// against one benchmark, as fractions in MAPE, MAE, RMSE order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub benchmark: String,
    pub reduction: [f64; 3],
}

fn horizon_means(rows: &[ResultRow], model: &str, horizons: &[usize]) -> Result<[f64; 3]> {
    let mut sum = [0.0; 3];
    for h in horizons {
        let row = rows
            .iter()
            .find(|r| r.model == model && r.horizon == *h)
            .ok_or_else(|| Error::Data(format!("no result for {model} at horizon {h}")))?;
        for (s, v) in sum.iter_mut().zip(row.metrics.criteria()) {
            *s += v;
        }
    }
    Ok(sum.map(|s| s / horizons.len() as f64))
}

/// `1 - mean_h(proposed) / mean_h(benchmark)` for every other model, over
/// the proposed model's horizons.
pub fn improvement_table(rows: &[ResultRow], proposed: &str) -> Result<Vec<Improvement>> {
    let mut horizons: Vec<usize> = rows.iter().filter(|r| r.model == proposed).map(|r| r.horizon).collect();
    horizons.sort_unstable();
    horizons.dedup();
    if horizons.is_empty() {
        return Err(Error::Data(format!("no results for the proposed model {proposed}")));
    }
    let base = horizon_means(rows, proposed, &horizons)?;
    let mut benchmarks: Vec<&str> = Vec::new();
    for r in rows {
        if r.model != proposed && !benchmarks.contains(&r.model.as_str()) {
            benchmarks.push(&r.model);
        }
    }
    benchmarks
        .into_iter()
        .map(|b| {
            let m = horizon_means(rows, b, &horizons)?;
            Ok(Improvement {
                benchmark: b.to_string(),
                reduction: std::array::from_fn(|c| 1.0 - base[c] / m[c]),
            })
        })
        .collect()
}
