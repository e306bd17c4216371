use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::frame::TimeSeriesFrame;
use crate::error::{Error, Result};

/// Per-column standardization statistics fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation over the training rows.
    pub std: Vec<f64>,
    /// Columns that were constant on the training rows; they standardize to zero.
    pub degenerate: Vec<bool>,
}

impl ScalerParams {
    pub fn index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Schema(format!("scaler has no column {name}")))
    }

    pub fn transform(&self, column: usize, x: f64) -> f64 {
        if self.degenerate[column] {
            0.0
        } else {
            (x - self.mean[column]) / self.std[column]
        }
    }

    pub fn invert(&self, column: usize, z: f64) -> f64 {
        if self.degenerate[column] {
            self.mean[column]
        } else {
            z * self.std[column] + self.mean[column]
        }
    }
}

pub fn fit_scaler(frame: &TimeSeriesFrame, train: Range<usize>) -> Result<ScalerParams> {
    if train.is_empty() || train.end > frame.len() {
        return Err(Error::Data(format!(
            "training range {train:?} is empty or exceeds the {} rows",
            frame.len()
        )));
    }
    let n = train.len() as f64;
    let mut params = ScalerParams {
        names: frame.names.clone(),
        mean: Vec::new(),
        std: Vec::new(),
        degenerate: Vec::new(),
    };
    for (name, col) in frame.names.iter().zip(&frame.columns) {
        let rows = &col[train.clone()];
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("column {name} has missing or non-finite training values")));
        }
        let mean = rows.iter().sum::<f64>() / n;
        let var = rows.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        params.mean.push(mean);
        params.std.push(std);
        // A column that is constant up to rounding carries no information.
        params.degenerate.push(std <= 1e-12 * mean.abs().max(1.0));
    }
    Ok(params)
}

/// Standardizes every column the scaler knows; other columns are untouched.
pub fn apply_scaler(frame: &TimeSeriesFrame, params: &ScalerParams) -> Result<TimeSeriesFrame> {
    let mut out = frame.clone();
    for (j, name) in params.names.iter().enumerate() {
        let c = out
            .column_index(name)
            .ok_or_else(|| Error::Schema(format!("frame lacks scaled column {name}")))?;
        for v in &mut out.columns[c] {
            *v = params.transform(j, *v);
        }
    }
    Ok(out)
}

pub fn invert_scaler(frame: &TimeSeriesFrame, params: &ScalerParams) -> Result<TimeSeriesFrame> {
    let mut out = frame.clone();
    for (j, name) in params.names.iter().enumerate() {
        let c = out
            .column_index(name)
            .ok_or_else(|| Error::Schema(format!("frame lacks scaled column {name}")))?;
        for v in &mut out.columns[c] {
            *v = params.invert(j, *v);
        }
    }
    Ok(out)
}
