use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::mape_value;

/// Point-forecast accuracy over `n` test samples. MAPE is a fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mape: f64,
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

impl Metrics {
    /// Criteria in report order: MAPE, MAE, RMSE.
    pub fn criteria(&self) -> [f64; 3] {
        [self.mape, self.mae, self.rmse]
    }
}

pub const CRITERIA: [&str; 3] = ["MAPE", "MAE", "RMSE"];

pub fn compute_metrics(y: &[f64], pred: &[f64]) -> Result<Metrics> {
    if y.is_empty() || y.len() != pred.len() {
        return Err(Error::Shape(format!(
            "metrics need equal non-empty series, got {} and {}",
            y.len(),
            pred.len()
        )));
    }
    let n = y.len() as f64;
    let mae = y.iter().zip(pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let mse = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    Ok(Metrics {
        mape: mape_value(y, pred),
        mae,
        rmse: mse.sqrt(),
        n: y.len(),
    })
}
