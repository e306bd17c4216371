use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::training::MAPE_GUARD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmStatus {
    Ok,
    /// The loss differential is identically zero, so the statistic is undefined.
    Degenerate,
    /// The truncated long-run variance estimate is not positive.
    NonPositiveVariance,
}

/// Diebold-Mariano comparison of forecast A against forecast B under
/// absolute percentage loss. A negative statistic favours A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub status: DmStatus,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub mean_differential: f64,
    pub variance: f64,
    pub horizon: usize,
    pub n: usize,
    pub harvey: bool,
}

fn ape(y: f64, p: f64) -> f64 {
    let d = if y.abs() <= MAPE_GUARD { MAPE_GUARD.copysign(y) } else { y };
    (1.0 - p / d).abs()
}

/// Lag-`k` autocovariance with the `1/N` normalization.
fn autocovariance(d: &[f64], mean: f64, k: usize) -> f64 {
    let n = d.len();
    (k..n).map(|t| (d[t] - mean) * (d[t - k] - mean)).sum::<f64>() / n as f64
}

/// `harvey` applies the small-sample correction and a Student-t reference
/// with `N - 1` degrees of freedom; otherwise the reference is standard normal.
pub fn dm_test(y: &[f64], pred_a: &[f64], pred_b: &[f64], horizon: usize, harvey: bool) -> Result<DmResult> {
    let n = y.len();
    if n == 0 || pred_a.len() != n || pred_b.len() != n {
        return Err(Error::Shape(format!(
            "DM test needs equal non-empty series, got {n}, {} and {}",
            pred_a.len(),
            pred_b.len()
        )));
    }
    if horizon == 0 || horizon > n {
        return Err(Error::Parameter(format!("DM horizon {horizon} must be in 1..={n}")));
    }
    let d: Vec<f64> = (0..n).map(|t| ape(y[t], pred_a[t]) - ape(y[t], pred_b[t])).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let variance = autocovariance(&d, mean, 0) + 2.0 * (1..horizon).map(|k| autocovariance(&d, mean, k)).sum::<f64>();
    let mut out = DmResult {
        status: DmStatus::Ok,
        statistic: None,
        p_value: None,
        mean_differential: mean,
        variance,
        horizon,
        n,
        harvey,
    };
    if d.iter().all(|v| *v == 0.0) {
        out.status = DmStatus::Degenerate;
        return Ok(out);
    }
    if !(variance > 0.0) {
        out.status = DmStatus::NonPositiveVariance;
        return Ok(out);
    }
    let mut stat = mean / (variance / n as f64).sqrt();
    let p = if harvey {
        if n < 2 {
            return Err(Error::Parameter("Harvey correction needs at least 2 samples".into()));
        }
        let (nf, hf) = (n as f64, horizon as f64);
        stat *= ((nf + 1.0 - 2.0 * hf + hf * (hf - 1.0) / nf) / nf).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| Error::Parameter(e.to_string()))?;
        2.0 * t.cdf(-stat.abs())
    } else {
        2.0 * Normal::standard().cdf(-stat.abs())
    };
    out.statistic = Some(stat);
    out.p_value = Some(p.clamp(0.0, 1.0));
    Ok(out)
}

impl DmResult {
    /// `statistic (p)`, or the failure status.
    pub fn cell(&self) -> String {
        match (self.status, self.statistic, self.p_value) {
            (DmStatus::Ok, Some(s), Some(p)) => format!("{s:.2} ({p:.2})"),
            (DmStatus::Degenerate, ..) => "degenerate".into(),
            _ => "non-positive variance".into(),
        }
    }
}
