use chrono::{Datelike, NaiveDateTime, Timelike};

use crate::error::{Error, Result};

/// Continuous columns of an ingested frame, in storage order.
pub const CONTINUOUS_COLUMNS: [&str; 12] = [
    "pm25",
    "pm10",
    "no2",
    "so2",
    "o3",
    "co",
    "wind_x",
    "wind_y",
    "temperature",
    "precipitation",
    "pressure",
    "humidity",
];

/// Name of the forecast target column.
pub const TARGET: &str = "pm25";

/// Plausibility ranges; values outside them are reported but kept.
pub const PLAUSIBLE_RANGES: [(&str, f64, f64); 12] = [
    ("pm25", 2.0, 692.0),
    ("pm10", 1.0, 1000.0),
    ("no2", 2.0, 192.0),
    ("so2", 1.0, 248.0),
    ("o3", 1.0, 339.0),
    ("co", 0.13, 9.63),
    ("wind_x", -44.0, 48.86),
    ("wind_y", -54.16, 44.43),
    ("temperature", -17.0, 46.0),
    ("precipitation", 0.0, 251.7),
    ("pressure", 992.0, 1047.0),
    ("humidity", 5.0, 97.0),
];

/// Categorical channels derived per row, in model input order.
pub const CATEGORICAL_CHANNELS: [&str; 4] = ["month", "day_of_week", "hour", "weather"];

/// Hourly multivariate table.
///
/// Missing continuous cells hold `NaN` and are flagged in `missing`; a missing
/// weather label is `None`. Month, weekday and hour are derived from the
/// timestamps rather than stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    pub timestamps: Vec<NaiveDateTime>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub missing: Vec<Vec<bool>>,
    pub weather: Vec<Option<String>>,
}

impl TimeSeriesFrame {
    /// Builds a frame with no missing cells.
    pub fn new(timestamps: Vec<NaiveDateTime>, names: Vec<String>, columns: Vec<Vec<f64>>, weather: Vec<Option<String>>) -> Result<Self> {
        let missing = columns
            .iter()
            .map(|c| c.iter().map(|v| v.is_nan()).collect())
            .collect();
        let frame = Self {
            timestamps,
            names,
            columns,
            missing,
            weather,
        };
        frame.check()?;
        Ok(frame)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Verifies column lengths and the strictly increasing hourly grid.
    pub fn check(&self) -> Result<()> {
        let n = self.len();
        if self.names.len() != self.columns.len() || self.columns.len() != self.missing.len() {
            return Err(Error::Shape("column names, values and masks disagree in count".into()));
        }
        for (name, (col, mask)) in self.names.iter().zip(self.columns.iter().zip(&self.missing)) {
            if col.len() != n || mask.len() != n {
                return Err(Error::Shape(format!("column {name} has {} rows, frame has {n}", col.len())));
            }
        }
        if self.weather.len() != n {
            return Err(Error::Shape(format!("weather has {} rows, frame has {n}", self.weather.len())));
        }
        for (i, w) in self.timestamps.windows(2).enumerate() {
            if w[1] - w[0] != chrono::Duration::hours(1) {
                return Err(Error::Ordering(format!(
                    "rows {i} and {} are not one hour apart ({} -> {})",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.column_index(name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::Schema(format!("no column named {name}")))
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().flatten().filter(|m| **m).count() + self.weather.iter().filter(|w| w.is_none()).count()
    }

    /// Appends a fully observed continuous column.
    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.len() {
            return Err(Error::Shape(format!(
                "column {name} has {} rows, frame has {}",
                values.len(),
                self.len()
            )));
        }
        if self.column_index(&name).is_some() {
            return Err(Error::Schema(format!("duplicate column {name}")));
        }
        self.missing.push(values.iter().map(|v| v.is_nan()).collect());
        self.columns.push(values);
        self.names.push(name);
        Ok(())
    }

    /// Rows `range` as a new frame.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TimeSeriesFrame {
        TimeSeriesFrame {
            timestamps: self.timestamps[range.clone()].to_vec(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
            missing: self.missing.iter().map(|m| m[range.clone()].to_vec()).collect(),
            weather: self.weather[range].to_vec(),
        }
    }
}

/// Calendar codes of an instant: month 0..12, weekday 0..7 from Sunday, hour 0..24.
pub fn calendar_codes(t: &NaiveDateTime) -> [usize; 3] {
    [
        t.month0() as usize,
        t.weekday().num_days_from_sunday() as usize,
        t.hour() as usize,
    ]
}
