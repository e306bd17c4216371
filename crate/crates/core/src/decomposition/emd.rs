use super::spline::natural_cubic_on_grid;
use super::{DecompositionMeta, DecompositionResult, Method};
use crate::error::{Error, Result};

/// How the series is extended past its ends before envelope fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Reflect the two extrema nearest each end about the end sample.
    #[default]
    Mirror,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SiftConfig {
    pub max_sift_iterations: usize,
    /// Cauchy-type stop: `sum (h_prev - h)^2 / sum h_prev^2 < sd_threshold`,
    /// accepted once the candidate's extrema and zero crossings differ by at
    /// most one.
    pub sd_threshold: f64,
    pub max_imfs: Option<usize>,
    pub boundary_policy: BoundaryPolicy,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            max_sift_iterations: 100,
            sd_threshold: 0.2,
            max_imfs: None,
            boundary_policy: BoundaryPolicy::Mirror,
        }
    }
}

impl SiftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sd_threshold > 0.0) {
            return Err(Error::Parameter(format!(
                "sd_threshold must be positive, got {}",
                self.sd_threshold
            )));
        }
        if self.max_sift_iterations == 0 {
            return Err(Error::Parameter("max_sift_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Series shorter than this are returned whole as the residue.
pub const MIN_LENGTH: usize = 8;

/// A residue with fewer extrema than this is treated as the trend.
pub const MIN_EXTREMA: usize = 3;

/// Modes whose peak is below this fraction of the input's peak are rounding
/// noise on a monotone residue and end the decomposition.
pub(crate) const NEGLIGIBLE_MODE: f64 = 1e-10;

pub(crate) fn peak(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
}

#[derive(Debug, Default)]
pub(crate) struct Extrema {
    pub maxima: Vec<usize>,
    pub minima: Vec<usize>,
}

impl Extrema {
    pub fn count(&self) -> usize {
        self.maxima.len() + self.minima.len()
    }
}

/// Interior local extrema. A flat run counts once, at its centre.
pub(crate) fn find_extrema(x: &[f64]) -> Extrema {
    let n = x.len();
    let mut ext = Extrema::default();
    if n < 3 {
        return ext;
    }
    let mut i = 1;
    while i < n - 1 {
        if x[i] == x[i - 1] {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < n && x[j] == x[i] {
            j += 1;
        }
        if j == n {
            break;
        }
        let centre = (i + j - 1) / 2;
        if x[i] > x[i - 1] && x[j] < x[i] {
            ext.maxima.push(centre);
        } else if x[i] < x[i - 1] && x[j] > x[i] {
            ext.minima.push(centre);
        }
        i = j;
    }
    ext
}

pub fn count_extrema(x: &[f64]) -> usize {
    find_extrema(x).count()
}

/// Number of sign changes, skipping exact zeros.
pub fn zero_crossings(x: &[f64]) -> usize {
    let mut count = 0;
    let mut prev = 0.0_f64;
    for &v in x {
        if v == 0.0 {
            continue;
        }
        if prev != 0.0 && (v > 0.0) != (prev > 0.0) {
            count += 1;
        }
        prev = v;
    }
    count
}

/// Envelope through the given extrema, with two mirrored knots per side and
/// the end sample added as a knot when it lies outside the nearest extremum.
fn envelope(x: &[f64], idx: &[usize], upper: bool) -> Vec<f64> {
    let n = x.len();
    let last = (n - 1) as f64;
    let outside = |end: f64, ext: f64| if upper { end > ext } else { end < ext };

    let mut knots_x = Vec::with_capacity(idx.len() + 6);
    let mut knots_y = Vec::with_capacity(idx.len() + 6);
    for &p in idx.iter().take(2).rev() {
        knots_x.push(-(p as f64));
        knots_y.push(x[p]);
    }
    if outside(x[0], x[idx[0]]) {
        knots_x.push(0.0);
        knots_y.push(x[0]);
    }
    for &p in idx {
        knots_x.push(p as f64);
        knots_y.push(x[p]);
    }
    if outside(x[n - 1], x[idx[idx.len() - 1]]) {
        knots_x.push(last);
        knots_y.push(x[n - 1]);
    }
    for &p in idx.iter().rev().take(2) {
        knots_x.push(2.0 * last - p as f64);
        knots_y.push(x[p]);
    }
    natural_cubic_on_grid(&knots_x, &knots_y, n)
}

/// Extracts the first intrinsic mode function of `signal` by sifting.
/// Returns `None` when the signal has fewer than two extrema.
pub(crate) fn first_mode(signal: &[f64], config: &SiftConfig) -> Option<Vec<f64>> {
    if signal.len() < MIN_LENGTH {
        return None;
    }
    let ext = find_extrema(signal);
    if ext.count() < 2 || ext.maxima.is_empty() || ext.minima.is_empty() {
        return None;
    }
    let mut h = signal.to_vec();
    let mut ext = Some(ext);
    for _ in 0..config.max_sift_iterations {
        let e = ext.take().unwrap_or_else(|| find_extrema(&h));
        if e.maxima.is_empty() || e.minima.is_empty() {
            break;
        }
        let upper = envelope(&h, &e.maxima, true);
        let lower = envelope(&h, &e.minima, false);
        let mut diff = 0.0;
        let mut energy = 0.0;
        for i in 0..h.len() {
            let mean = 0.5 * (upper[i] + lower[i]);
            energy += h[i] * h[i];
            diff += mean * mean;
            h[i] -= mean;
        }
        if energy == 0.0 {
            break;
        }
        if diff / energy < config.sd_threshold {
            let e = find_extrema(&h);
            let zc = zero_crossings(&h);
            if e.count().abs_diff(zc) <= 1 { break; }
            ext = Some(e);
        }
    }
    Some(h)
}

fn check_finite(signal: &[f64]) -> Result<()> {
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite value {} at index {i}", signal[i])));
    }
    Ok(())
}

/// Empirical mode decomposition into IMFs (highest frequency first) plus residue.
pub fn emd(signal: &[f64], config: &SiftConfig) -> Result<DecompositionResult> {
    config.validate()?;
    check_finite(signal)?;
    let mut residue = signal.to_vec();
    let mut imfs = Vec::new();
    let floor = NEGLIGIBLE_MODE * peak(signal);
    loop {
        if config.max_imfs.is_some_and(|cap| imfs.len() >= cap) {
            break;
        }
        if count_extrema(&residue) < MIN_EXTREMA {
            break;
        }
        let Some(imf) = first_mode(&residue, config) else {
            break;
        };
        if peak(&imf) <= floor {
            break;
        }
        for (r, m) in residue.iter_mut().zip(&imf) {
            *r -= m;
        }
        imfs.push(imf);
    }
    Ok(DecompositionResult {
        imfs,
        residue,
        meta: DecompositionMeta {
            method: Method::Emd,
            trials: 1,
            noise_ratio: 0.0,
            seed: 0,
        },
    })
}
