//! Complete ensemble EMD with adaptive noise.
//!
//! Each trial `i` draws a white-noise series `w_i` with the standard deviation
//! of the input. Mode 1 is the ensemble mean of `E1(x + eps * w_i)`; every
//! later mode is the ensemble mean of `E1(r_k + eps * E_k(w_i))`, where `r_k`
//! is the running residue and `E_k(w_i)` the k-th EMD mode of that trial's
//! noise. The residue is updated by subtraction, so modes plus residue add
//! back to the input up to rounding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::emd::{count_extrema, first_mode, peak, SiftConfig, MIN_EXTREMA, NEGLIGIBLE_MODE};
use super::{DecompositionMeta, DecompositionResult, Method};
use crate::error::{Error, Result};
use crate::seed::child_seed;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CeemdanParams {
    /// Noise amplitude as a fraction of the input's standard deviation.
    pub noise_ratio: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for CeemdanParams {
    fn default() -> Self {
        Self {
            noise_ratio: 0.2,
            trials: 100,
            seed: 0,
        }
    }
}

/// Per-trial noise whose EMD modes are peeled off one stage at a time.
struct NoiseTrack {
    residue: Vec<f64>,
    exhausted: bool,
}

impl NoiseTrack {
    fn new(len: usize, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let residue = (0..len)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                amplitude * v
            })
            .collect();
        Self {
            residue,
            exhausted: false,
        }
    }

    /// Next EMD mode of the noise, or zeros once the noise residue is monotone.
    fn next_mode(&mut self, config: &SiftConfig) -> Vec<f64> {
        if !self.exhausted {
            if let Some(mode) = first_mode(&self.residue, config) {
                for (r, m) in self.residue.iter_mut().zip(&mode) {
                    *r -= m;
                }
                return mode;
            }
            self.exhausted = true;
        }
        vec![0.0; self.residue.len()]
    }
}

fn population_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Ensemble mean of the first modes of `base + eps * perturbation_i`, summed
/// in trial order so the result does not depend on thread scheduling.
fn ensemble_first_mode(base: &[f64], perturbations: Option<&[Vec<f64>]>, ratio: f64, trials: usize, config: &SiftConfig) -> Vec<f64> {
    let n = base.len();
    let modes: Vec<Option<Vec<f64>>> = match perturbations {
        None => vec![first_mode(base, config)],
        Some(perts) => perts
            .par_iter()
            .map(|p| {
                let noisy: Vec<f64> = base.iter().zip(p).map(|(b, v)| b + ratio * v).collect();
                first_mode(&noisy, config)
            })
            .collect(),
    };
    let mut mean = vec![0.0; n];
    for mode in modes.iter().flatten() {
        for (acc, v) in mean.iter_mut().zip(mode) {
            *acc += v;
        }
    }
    // Without noise every trial is identical, so one evaluation stands for all.
    let divisor = if perturbations.is_some() { trials as f64 } else { 1.0 };
    for v in &mut mean {
        *v /= divisor;
    }
    mean
}

pub fn ceemdan(signal: &[f64], params: &CeemdanParams, config: &SiftConfig) -> Result<DecompositionResult> {
    config.validate()?;
    if params.trials == 0 {
        return Err(Error::Parameter("ceemdan needs at least one trial".into()));
    }
    if !(params.noise_ratio >= 0.0) || !params.noise_ratio.is_finite() {
        return Err(Error::Parameter(format!(
            "noise ratio must be finite and >= 0, got {}",
            params.noise_ratio
        )));
    }
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite value {} at index {i}", signal[i])));
    }

    let n = signal.len();
    let meta = DecompositionMeta {
        method: Method::Ceemdan,
        trials: params.trials,
        noise_ratio: params.noise_ratio,
        seed: params.seed,
    };
    let mut residue = signal.to_vec();
    let mut imfs: Vec<Vec<f64>> = Vec::new();
    if count_extrema(signal) < MIN_EXTREMA {
        return Ok(DecompositionResult { imfs, residue, meta });
    }

    let floor = NEGLIGIBLE_MODE * peak(signal);
    let noisy = params.noise_ratio > 0.0;
    let sigma = population_std(signal);
    let mut tracks: Vec<NoiseTrack> = if noisy {
        (0..params.trials)
            .into_par_iter()
            .map(|i| NoiseTrack::new(n, sigma, child_seed(params.seed, i as u64)))
            .collect()
    } else {
        Vec::new()
    };

    // Stage 1 perturbs with the full noise series.
    let mut perturbations: Option<Vec<Vec<f64>>> = noisy.then(|| tracks.iter().map(|t| t.residue.clone()).collect());
    loop {
        if config.max_imfs.is_some_and(|cap| imfs.len() >= cap) {
            break;
        }
        if count_extrema(&residue) < MIN_EXTREMA {
            break;
        }
        if !imfs.is_empty() && noisy {
            perturbations = Some(tracks.par_iter_mut().map(|t| t.next_mode(config)).collect());
        }
        let mode = ensemble_first_mode(&residue, perturbations.as_deref(), params.noise_ratio, params.trials, config);
        if peak(&mode) <= floor {
            break;
        }
        for (r, m) in residue.iter_mut().zip(&mode) {
            *r -= m;
        }
        imfs.push(mode);
    }
    Ok(DecompositionResult { imfs, residue, meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::emd::emd;

    fn test_signal(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                (t * 0.3).sin() + 0.5 * (t * 0.05).cos() + 0.01 * t + 0.2 * ((t * 1.7).sin() * (t * 0.11).cos())
            })
            .collect()
    }

    #[test]
    fn parameter_errors() {
        let x = test_signal(64);
        let cfg = SiftConfig::default();
        let zero_trials = CeemdanParams { trials: 0, ..Default::default() };
        assert!(matches!(ceemdan(&x, &zero_trials, &cfg), Err(Error::Parameter(_))));
        let negative = CeemdanParams { noise_ratio: -0.1, ..Default::default() };
        assert!(matches!(ceemdan(&x, &negative, &cfg), Err(Error::Parameter(_))));
    }

    #[test]
    fn noiseless_single_trial_is_emd() {
        let x = test_signal(512);
        let cfg = SiftConfig::default();
        let p = CeemdanParams { noise_ratio: 0.0, trials: 1, seed: 3 };
        let a = ceemdan(&x, &p, &cfg).unwrap();
        let b = emd(&x, &cfg).unwrap();
        assert_eq!(a.imfs, b.imfs);
        assert_eq!(a.residue, b.residue);
    }

    #[test]
    fn complete_and_deterministic() {
        let x = test_signal(700);
        let cfg = SiftConfig::default();
        let p = CeemdanParams { noise_ratio: 0.2, trials: 12, seed: 99 };
        let a = ceemdan(&x, &p, &cfg).unwrap();
        assert!(a.reconstruction_error(&x) < 1e-8);
        let b = ceemdan(&x, &p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.meta.trials, 12);
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let x = test_signal(400);
        let cfg = SiftConfig::default();
        let p = CeemdanParams { noise_ratio: 0.3, trials: 8, seed: 5 };
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let multi = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = single.install(|| ceemdan(&x, &p, &cfg).unwrap());
        let b = multi.install(|| ceemdan(&x, &p, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn max_imfs_cap() {
        let x = test_signal(400);
        let cfg = SiftConfig { max_imfs: Some(2), ..Default::default() };
        let p = CeemdanParams { noise_ratio: 0.2, trials: 4, seed: 1 };
        let r = ceemdan(&x, &p, &cfg).unwrap();
        assert_eq!(r.imfs.len(), 2);
        assert!(r.reconstruction_error(&x) < 1e-8);
    }
}
