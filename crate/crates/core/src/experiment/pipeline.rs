use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{DataConfig, DecompositionConfig, DecompositionMode};
use crate::datapipe::{
    apply_scaler, attach_decomposition, fit_scaler, ingest, interpolate_missing, make_windows, split_by_dates, split_chronological, synth_generate, CategoryEncoder, RowTable,
    SplitRanges, SupervisedDataset, TimeSeriesFrame, CONTINUOUS_COLUMNS, TARGET,
};
use crate::decomposition::{ceemdan, DecompositionResult};
use crate::error::{Error, Result};

/// Reads or generates the hourly frame, keeps only the standard continuous
/// columns and fills missing cells.
pub fn load_frame(data: &DataConfig) -> Result<TimeSeriesFrame> {
    let frame = match &data.path {
        Some(path) => ingest(path)?,
        None => synth_generate(data.synthetic_hours, data.synthetic_seed)?,
    };
    let keep: Vec<usize> = CONTINUOUS_COLUMNS
        .iter()
        .map(|n| frame.column_index(n).ok_or_else(|| Error::Schema(format!("frame lacks column {n}"))))
        .collect::<Result<_>>()?;
    let base = TimeSeriesFrame::new(
        frame.timestamps.clone(),
        keep.iter().map(|&i| frame.names[i].clone()).collect(),
        keep.iter().map(|&i| frame.columns[i].clone()).collect(),
        frame.weather.clone(),
    )?;
    interpolate_missing(&base)
}

pub fn split_ranges(data: &DataConfig, frame: &TimeSeriesFrame) -> Result<SplitRanges> {
    match data.split_dates()? {
        Some((v, t)) => split_by_dates(&frame.timestamps, v, t),
        None => split_chronological(frame.len(), data.split_fractions),
    }
}

/// Decomposition of the target plus the frame with the components appended.
#[derive(Debug, Clone)]
pub struct Decomposed {
    pub result: DecompositionResult,
    pub frame: TimeSeriesFrame,
    pub mode: DecompositionMode,
    /// Max absolute reconstruction error over the rows the result covers.
    pub reconstruction_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub mode: DecompositionMode,
    pub noise_ratio: f64,
    pub trials: usize,
    pub seed: u64,
    pub n_imfs: usize,
    pub decomposed_rows: usize,
    pub reconstruction_error: f64,
}

impl Decomposed {
    pub fn summary(&self) -> DecompositionSummary {
        DecompositionSummary {
            mode: self.mode,
            noise_ratio: self.result.meta.noise_ratio,
            trials: self.result.meta.trials,
            seed: self.result.meta.seed,
            n_imfs: self.result.imfs.len(),
            decomposed_rows: self.result.len(),
            reconstruction_error: self.reconstruction_error,
        }
    }
}

/// Full-series mode decomposes every row at once. Train-only mode decomposes
/// the training rows and refits a trailing window for each later row.
pub fn decompose(frame: &TimeSeriesFrame, ranges: &SplitRanges, config: &DecompositionConfig) -> Result<Decomposed> {
    let target = frame.column(TARGET)?;
    let span = match config.mode {
        DecompositionMode::FullSeries => &target[..],
        DecompositionMode::TrainOnlyRefit => &target[ranges.train.clone()],
    };
    let result = ceemdan(span, &config.params(), &config.sift)?;
    let reconstruction_error = result.reconstruction_error(span);
    let augmented = attach_decomposition(frame, &result, &config.attach_mode())?;
    Ok(Decomposed {
        result,
        frame: augmented,
        mode: config.mode,
        reconstruction_error,
    })
}

/// Windowed, standardized train/validation/test sets for one horizon.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub train: SupervisedDataset,
    pub validation: SupervisedDataset,
    pub test: SupervisedDataset,
}

/// Standardizes every continuous column with training-row statistics,
/// encodes weather with the training vocabulary and cuts windows. The target
/// stays on its original scale.
pub fn build_datasets(frame: &TimeSeriesFrame, ranges: &SplitRanges, history: usize, horizon: usize) -> Result<Datasets> {
    let scaler = fit_scaler(frame, ranges.train.clone())?;
    let scaled = apply_scaler(frame, &scaler)?;
    let encoder = CategoryEncoder::fit_weather(frame.weather[ranges.train.clone()].iter().flatten().map(String::as_str));
    let rows = Arc::new(RowTable::new(&scaled, frame.column(TARGET)?, &encoder)?);
    let windows = make_windows(rows, history, horizon)?;
    let (train, validation, test) = windows.split(ranges)?;
    Ok(Datasets { train, validation, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaler_ignores_test_rows() {
        let data = DataConfig {
            synthetic_hours: 300,
            ..Default::default()
        };
        let frame = load_frame(&data).unwrap();
        let ranges = split_ranges(&data, &frame).unwrap();
        let a = build_datasets(&frame, &ranges, 24, 1).unwrap();
        let mut changed = frame.clone();
        for col in &mut changed.columns {
            for v in &mut col[ranges.test.clone()] {
                *v *= 10.0;
            }
        }
        let b = build_datasets(&changed, &ranges, 24, 1).unwrap();
        let n = ranges.train.end * frame.names.len();
        assert_eq!(a.train.rows.num[..n], b.train.rows.num[..n]);
        assert_eq!(a.train.len(), 300 - 60 - 60 - 24);
    }
}
