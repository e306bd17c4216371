use std::ops::Range;
use std::sync::Arc;

use chrono::NaiveDateTime;

use super::encoding::CategoryEncoder;
use super::frame::{calendar_codes, TimeSeriesFrame};
use crate::error::{Error, Result};

/// Row-aligned model inputs shared by all windows cut from one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RowTable {
    pub timestamps: Vec<NaiveDateTime>,
    pub num_names: Vec<String>,
    /// Row-major `[rows, num_names.len()]`, normally standardized.
    pub num: Vec<f64>,
    /// Row-major `[rows, 4]`: month, day of week, hour, weather.
    pub cat: Vec<usize>,
    /// Code counts per categorical channel, including the unknown weather code.
    pub cat_cardinalities: [usize; 4],
    /// Forecast target on its original scale.
    pub target: Vec<f64>,
}

impl RowTable {
    /// `frame` supplies the numeric channels (all of its continuous columns)
    /// and the weather labels; `target` is the raw target series.
    pub fn new(frame: &TimeSeriesFrame, target: &[f64], weather: &CategoryEncoder) -> Result<Self> {
        let n = frame.len();
        if target.len() != n {
            return Err(Error::Shape(format!("target has {} rows, frame has {n}", target.len())));
        }
        if frame.missing.iter().flatten().any(|m| *m) || frame.weather.iter().any(Option::is_none) {
            return Err(Error::Data("frame still has missing cells; interpolate first".into()));
        }
        let c = frame.names.len();
        let mut num = vec![0.0; n * c];
        for (j, col) in frame.columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                num[i * c + j] = *v;
            }
        }
        let mut cat = Vec::with_capacity(n * 4);
        for (t, w) in frame.timestamps.iter().zip(&frame.weather) {
            cat.extend_from_slice(&calendar_codes(t));
            cat.push(weather.encode(w.as_deref().unwrap_or_default()));
        }
        Ok(Self {
            timestamps: frame.timestamps.clone(),
            num_names: frame.names.clone(),
            num,
            cat,
            cat_cardinalities: [12, 7, 24, weather.cardinality()],
            target: target.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_num(&self) -> usize {
        self.num_names.len()
    }
}

/// Supervised samples: sample `i` reads input rows `[s_i, s_i + T)` and
/// predicts the target at row `s_i + T + h - 1`.
#[derive(Debug, Clone)]
pub struct SupervisedDataset {
    pub rows: Arc<RowTable>,
    pub history: usize,
    pub horizon: usize,
    pub starts: Vec<usize>,
}

/// A materialized mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub history: usize,
    pub n_num: usize,
    /// `[size, history, n_num]` row-major.
    pub x_num: Vec<f64>,
    /// One code list per categorical channel, each `[size * history]`.
    pub x_cat: [Vec<usize>; 4],
    pub y: Vec<f64>,
}

impl SupervisedDataset {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn n_num(&self) -> usize {
        self.rows.n_num()
    }

    pub fn target_row(&self, i: usize) -> usize {
        self.starts[i] + self.history + self.horizon - 1
    }

    pub fn target(&self, i: usize) -> f64 {
        self.rows.target[self.target_row(i)]
    }

    pub fn targets(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.target(i)).collect()
    }

    pub fn target_time(&self, i: usize) -> NaiveDateTime {
        self.rows.timestamps[self.target_row(i)]
    }

    /// Numeric inputs of sample `i`, `[history, n_num]` row-major.
    pub fn sample_num(&self, i: usize) -> &[f64] {
        let c = self.n_num();
        let s = self.starts[i];
        &self.rows.num[s * c..(s + self.history) * c]
    }

    /// Categorical codes of sample `i`, `[history, 4]` row-major.
    pub fn sample_cat(&self, i: usize) -> &[usize] {
        let s = self.starts[i];
        &self.rows.cat[s * 4..(s + self.history) * 4]
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        let (t, c) = (self.history, self.n_num());
        let mut x_num = Vec::with_capacity(indices.len() * t * c);
        let mut x_cat: [Vec<usize>; 4] = Default::default();
        for ch in &mut x_cat {
            ch.reserve(indices.len() * t);
        }
        for &i in indices {
            x_num.extend_from_slice(self.sample_num(i));
            for step in self.sample_cat(i).chunks_exact(4) {
                for (ch, &code) in x_cat.iter_mut().zip(step) {
                    ch.push(code);
                }
            }
        }
        Batch {
            size: indices.len(),
            history: t,
            n_num: c,
            x_num,
            x_cat,
            y: indices.iter().map(|&i| self.target(i)).collect(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> SupervisedDataset {
        SupervisedDataset {
            rows: Arc::clone(&self.rows),
            history: self.history,
            horizon: self.horizon,
            starts: indices.iter().map(|&i| self.starts[i]).collect(),
        }
    }

    /// Splits samples by the row range their target falls in.
    pub fn split(&self, ranges: &SplitRanges) -> Result<(SupervisedDataset, SupervisedDataset, SupervisedDataset)> {
        let pick = |r: &Range<usize>| -> Vec<usize> { (0..self.len()).filter(|&i| r.contains(&self.target_row(i))).collect() };
        let parts = [&ranges.train, &ranges.validation, &ranges.test].map(|r| self.subset(&pick(r)));
        for (name, part) in ["train", "validation", "test"].iter().zip(&parts) {
            if part.is_empty() {
                return Err(Error::Data(format!("{name} split has no samples")));
            }
        }
        let [a, b, c] = parts;
        Ok((a, b, c))
    }
}

/// Cuts every complete window of `history` rows with a target `horizon`
/// steps after the last input row.
pub fn make_windows(rows: Arc<RowTable>, history: usize, horizon: usize) -> Result<SupervisedDataset> {
    if history == 0 || horizon == 0 {
        return Err(Error::Parameter("history and horizon must be positive".into()));
    }
    let n = rows.len();
    if n < history + horizon {
        return Err(Error::Data(format!(
            "{n} rows cannot hold a window of {history} inputs and horizon {horizon}"
        )));
    }
    let count = n - history - horizon + 1;
    Ok(SupervisedDataset {
        rows,
        history,
        horizon,
        starts: (0..count).collect(),
    })
}

/// Contiguous, ordered, non-overlapping row ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRanges {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.validation.len(), self.test.len()]
    }
}

/// Fraction split of `n` rows: validation and test get the floor of their
/// share and the remainder goes to training.
pub fn split_chronological(n: usize, fractions: [f64; 3]) -> Result<SplitRanges> {
    if fractions.iter().any(|f| !(*f > 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("split fractions {fractions:?} must be positive and sum to 1")));
    }
    let val = (n as f64 * fractions[1]).floor() as usize;
    let test = (n as f64 * fractions[2]).floor() as usize;
    let train = n - val - test;
    if train == 0 || val == 0 || test == 0 {
        return Err(Error::Data(format!("{n} rows leave an empty split")));
    }
    Ok(SplitRanges {
        train: 0..train,
        validation: train..train + val,
        test: train + val..n,
    })
}

/// Split at the first rows at or after `validation_start` and `test_start`.
pub fn split_by_dates(timestamps: &[NaiveDateTime], validation_start: NaiveDateTime, test_start: NaiveDateTime) -> Result<SplitRanges> {
    if validation_start >= test_start {
        return Err(Error::Parameter("validation must start before test".into()));
    }
    let v = timestamps.partition_point(|t| *t < validation_start);
    let s = timestamps.partition_point(|t| *t < test_start);
    let n = timestamps.len();
    if v == 0 || s == v || s == n {
        return Err(Error::Data("date boundaries leave an empty split".into()));
    }
    Ok(SplitRanges {
        train: 0..v,
        validation: v..s,
        test: s..n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::synth::synth_generate;

    fn table(n: usize) -> Arc<RowTable> {
        let f = synth_generate(n.max(48), 3).unwrap().slice(0..n);
        let target = f.column("pm25").unwrap().to_vec();
        Arc::new(RowTable::new(&f, &target, &CategoryEncoder::weather()).unwrap())
    }

    #[test]
    fn window_counts() {
        let rows = table(100);
        assert_eq!(make_windows(rows.clone(), 24, 1).unwrap().len(), 76);
        assert_eq!(make_windows(rows, 24, 3).unwrap().len(), 74);
        let ds = make_windows(table(25), 24, 1).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.target_row(0), 24);
        assert!(make_windows(table(24), 24, 1).is_err());
    }

    #[test]
    fn targets_follow_inputs() {
        let ds = make_windows(table(120), 24, 3).unwrap();
        for i in 0..ds.len() {
            assert!(ds.target_row(i) > ds.starts[i] + ds.history - 1);
            assert_eq!(ds.target(i), ds.rows.target[i + 26]);
        }
    }

    #[test]
    fn batch_layout() {
        let ds = make_windows(table(60), 24, 1).unwrap();
        let b = ds.batch(&[3, 0]);
        let c = ds.n_num();
        assert_eq!(b.x_num.len(), 2 * 24 * c);
        assert_eq!(&b.x_num[..24 * c], ds.sample_num(3));
        assert_eq!(b.x_cat[2][..24], (3..27).map(|r| ds.rows.cat[r * 4 + 2]).collect::<Vec<_>>()[..]);
        assert_eq!(b.y, vec![ds.target(3), ds.target(0)]);
    }

    #[test]
    fn fraction_split() {
        assert_eq!(split_chronological(10, [0.6, 0.2, 0.2]).unwrap().sizes(), [6, 2, 2]);
        assert!(split_chronological(2, [0.6, 0.2, 0.2]).is_err());
        assert!(split_chronological(10, [0.5, 0.2, 0.2]).is_err());
    }

    #[test]
    fn samples_partition_by_target_row() {
        let ds = make_windows(table(200), 24, 2).unwrap();
        let ranges = split_chronological(200, [0.6, 0.2, 0.2]).unwrap();
        let (a, b, c) = ds.split(&ranges).unwrap();
        assert_eq!(a.len() + b.len() + c.len(), ds.len());
        assert!(a.target_row(a.len() - 1) < b.target_row(0));
        assert!(b.target_row(b.len() - 1) < c.target_row(0));
    }
}
