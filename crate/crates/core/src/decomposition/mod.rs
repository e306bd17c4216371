//! EMD sifting and CEEMDAN ensemble decomposition.

mod ceemdan;
mod emd;
mod spline;

pub use ceemdan::{ceemdan, CeemdanParams};
pub use emd::{count_extrema, emd, zero_crossings, BoundaryPolicy, SiftConfig, MIN_EXTREMA, MIN_LENGTH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Emd,
    Ceemdan,
}

/// Provenance of a decomposition. The noise ratio applies to every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionMeta {
    pub method: Method,
    pub trials: usize,
    pub noise_ratio: f64,
    pub seed: u64,
}

/// IMFs ordered from highest to lowest frequency, plus the residue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub imfs: Vec<Vec<f64>>,
    pub residue: Vec<f64>,
    pub meta: DecompositionMeta,
}

impl DecompositionResult {
    pub fn len(&self) -> usize {
        self.residue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residue.is_empty()
    }

    /// IMFs followed by the residue.
    pub fn components(&self) -> impl Iterator<Item = &[f64]> {
        self.imfs
            .iter()
            .map(Vec::as_slice)
            .chain(std::iter::once(self.residue.as_slice()))
    }

    /// Max absolute difference between the reconstruction and `signal`.
    pub fn reconstruction_error(&self, signal: &[f64]) -> f64 {
        match reconstruct(self) {
            Ok(r) if r.len() == signal.len() => r
                .iter()
                .zip(signal)
                .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())),
            _ => f64::INFINITY,
        }
    }

    /// Column names `imf_1, .., imf_n, residue`.
    pub fn column_names(&self) -> Vec<String> {
        (1..=self.imfs.len())
            .map(|j| format!("imf_{j}"))
            .chain(std::iter::once("residue".to_string()))
            .collect()
    }
}

/// Element-wise sum of all IMFs and the residue.
pub fn reconstruct(result: &DecompositionResult) -> Result<Vec<f64>> {
    if result.residue.is_empty() {
        return Err(Error::Data("cannot reconstruct an empty decomposition".into()));
    }
    let mut out = result.residue.clone();
    for imf in &result.imfs {
        if imf.len() != out.len() {
            return Err(Error::Shape(format!(
                "IMF of length {} in a decomposition of length {}",
                imf.len(),
                out.len()
            )));
        }
        for (o, v) in out.iter_mut().zip(imf) {
            *o += v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstruct_single_imf() {
        let r = DecompositionResult {
            imfs: vec![vec![1.0, -2.0, 3.0]],
            residue: vec![0.0; 3],
            meta: DecompositionMeta {
                method: Method::Emd,
                trials: 1,
                noise_ratio: 0.0,
                seed: 0,
            },
        };
        assert_eq!(reconstruct(&r).unwrap(), vec![1.0, -2.0, 3.0]);
        assert_eq!(r.column_names(), vec!["imf_1", "residue"]);
    }

    #[test]
    fn reconstruct_empty_is_error() {
        let r = DecompositionResult {
            imfs: vec![],
            residue: vec![],
            meta: DecompositionMeta {
                method: Method::Emd,
                trials: 1,
                noise_ratio: 0.0,
                seed: 0,
            },
        };
        assert!(reconstruct(&r).is_err());
    }
}
