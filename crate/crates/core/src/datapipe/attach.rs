use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frame::{TimeSeriesFrame, TARGET};
use crate::decomposition::{ceemdan, CeemdanParams, DecompositionResult, SiftConfig};
use crate::error::{Error, Result};
use crate::seed::child_seed;

/// How decomposition features are aligned with the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AttachMode {
    /// One decomposition of the whole target series. Every row's features
    /// depend on the entire series, including rows after it.
    FullSeries,
    /// The supplied decomposition covers the training rows only. Each later
    /// row `t` gets the last sample of a fresh decomposition of the trailing
    /// `window` target values ending at `t`, so it sees no data after `t`.
    TrainOnlyRefit {
        window: usize,
        params: CeemdanParams,
        sift: SiftConfig,
    },
}

impl AttachMode {
    pub fn name(&self) -> &'static str {
        match self {
            AttachMode::FullSeries => "full_series",
            AttachMode::TrainOnlyRefit { .. } => "train_only_refit",
        }
    }
}

/// Folds a decomposition sample into `k` IMF slots plus a residue slot:
/// extra IMFs go into the residue slot, missing ones are zero.
fn fold_components(imfs: &[Vec<f64>], residue: &[f64], t: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k + 1];
    for (j, imf) in imfs.iter().enumerate() {
        if j < k {
            out[j] = imf[t];
        } else {
            out[k] += imf[t];
        }
    }
    out[k] += residue[t];
    out
}

/// Appends `imf_1..imf_k` and `residue` as continuous columns.
pub fn attach_decomposition(frame: &TimeSeriesFrame, result: &DecompositionResult, mode: &AttachMode) -> Result<TimeSeriesFrame> {
    let n = frame.len();
    let k = result.imfs.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); k + 1];
    match mode {
        AttachMode::FullSeries => {
            if result.len() != n {
                return Err(Error::Shape(format!(
                    "decomposition has {} samples, frame has {n} rows",
                    result.len()
                )));
            }
            for (col, comp) in columns.iter_mut().zip(result.components()) {
                col.extend_from_slice(comp);
            }
        }
        AttachMode::TrainOnlyRefit { window, params, sift } => {
            let train = result.len();
            if train == 0 || train > n {
                return Err(Error::Shape(format!(
                    "training decomposition has {train} samples, frame has {n} rows"
                )));
            }
            if *window < 2 {
                return Err(Error::Parameter("refit window must be at least 2".into()));
            }
            for (col, comp) in columns.iter_mut().zip(result.components()) {
                col.extend_from_slice(comp);
            }
            let target = frame.column(TARGET)?;
            let later: Vec<Vec<f64>> = (train..n)
                .into_par_iter()
                .map(|t| {
                    let start = (t + 1).saturating_sub(*window);
                    let p = CeemdanParams {
                        seed: child_seed(params.seed, t as u64),
                        ..*params
                    };
                    let d = ceemdan(&target[start..=t], &p, sift)?;
                    Ok(fold_components(&d.imfs, &d.residue, t - start, k))
                })
                .collect::<Result<_>>()?;
            for row in later {
                for (col, v) in columns.iter_mut().zip(row) {
                    col.push(v);
                }
            }
        }
    }
    let mut out = frame.clone();
    for (name, col) in result.column_names().into_iter().zip(columns) {
        out.push_column(name, col)?;
    }
    Ok(out)
}
