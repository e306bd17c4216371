//! Delimited-text reading and writing of hourly frames.
//!
//! The input schema is the header
//! `timestamp,pm25,pm10,no2,so2,o3,co,wind_speed,wind_dir,temperature,precipitation,pressure,humidity,weather`
//! in any column order. Extra columns named `imf_<k>` or `residue` are read as
//! additional continuous columns. An empty field is a missing value.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDateTime, Timelike};

use super::clean::{components_to_wind, wind_to_components};
use super::frame::{TimeSeriesFrame, CONTINUOUS_COLUMNS, PLAUSIBLE_RANGES};
use crate::error::{Error, Result};

pub const INPUT_COLUMNS: [&str; 14] = [
    "timestamp",
    "pm25",
    "pm10",
    "no2",
    "so2",
    "o3",
    "co",
    "wind_speed",
    "wind_dir",
    "temperature",
    "precipitation",
    "pressure",
    "humidity",
    "weather",
];

const TIMESTAMP_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s.trim(), f).ok())
}

fn is_extra_column(name: &str) -> bool {
    name == "residue"
        || name
            .strip_prefix("imf_")
            .is_some_and(|k| !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit()))
}

/// Result of reading a file: the frame plus human-readable range warnings.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub frame: TimeSeriesFrame,
    pub warnings: Vec<String>,
}

struct RawRow {
    line: usize,
    time: NaiveDateTime,
    values: Vec<f64>,
    weather: Option<String>,
}

/// Reads a frame from delimited text. `source` names the input in errors.
pub fn read_frame<R: Read>(reader: R, source: &Path) -> Result<Ingested> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();

    let mut position = std::collections::HashMap::new();
    let mut extras = Vec::new();
    for (i, name) in header.iter().enumerate() {
        if !INPUT_COLUMNS.contains(&name) && !is_extra_column(name) {
            return Err(Error::Schema(format!("{}: unknown column {name:?}", source.display())));
        }
        if position.insert(name.to_string(), i).is_some() {
            return Err(Error::Schema(format!("{}: duplicate column {name:?}", source.display())));
        }
        if is_extra_column(name) {
            extras.push(name.to_string());
        }
    }
    for required in INPUT_COLUMNS {
        if !position.contains_key(required) {
            return Err(Error::Schema(format!("{}: missing column {required:?}", source.display())));
        }
    }

    // Storage order: the 12 standard continuous columns, then extras.
    let names: Vec<String> = CONTINUOUS_COLUMNS.iter().map(|s| s.to_string()).chain(extras.iter().cloned()).collect();
    let mut rows: Vec<RawRow> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |name: &str| record.get(position[name]).unwrap_or("");
        let number = |name: &str| -> Result<f64> {
            let s = field(name);
            if s.is_empty() {
                return Ok(f64::NAN);
            }
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_err(line, format!("column {name}: cannot parse {s:?} as a finite number"))),
            }
        };
        let ts = field("timestamp");
        let time = parse_timestamp(ts).ok_or_else(|| parse_err(line, format!("cannot parse timestamp {ts:?}")))?;
        if time.minute() != 0 || time.second() != 0 || time.nanosecond() != 0 {
            return Err(parse_err(line, format!("timestamp {ts} is not on the hour")));
        }

        let mut values = Vec::with_capacity(names.len());
        for name in &names[..6] {
            values.push(number(name)?);
        }
        let (speed, dir) = (number("wind_speed")?, number("wind_dir")?);
        let (wx, wy) = if speed.is_nan() || dir.is_nan() {
            (f64::NAN, f64::NAN)
        } else {
            wind_to_components(speed, dir).map_err(|e| parse_err(line, e.to_string()))?
        };
        values.push(wx);
        values.push(wy);
        for name in names[8..].iter() {
            values.push(number(name)?);
        }
        let w = field("weather");
        let weather = (!w.is_empty()).then(|| w.to_string());
        rows.push(RawRow {
            line,
            time,
            values,
            weather,
        });
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", source.display())));
    }

    let ncol = names.len();
    let mut frame = TimeSeriesFrame {
        timestamps: Vec::with_capacity(rows.len()),
        names,
        columns: vec![Vec::with_capacity(rows.len()); ncol],
        missing: vec![Vec::with_capacity(rows.len()); ncol],
        weather: Vec::with_capacity(rows.len()),
    };
    let mut repaired = 0usize;
    for (k, row) in rows.iter().enumerate() {
        if k > 0 {
            let prev = &rows[k - 1];
            if row.time == prev.time {
                return Err(Error::Ordering(format!(
                    "{}:{}: duplicate timestamp {}",
                    source.display(),
                    row.line,
                    row.time
                )));
            }
            if row.time < prev.time {
                return Err(Error::Ordering(format!(
                    "{}:{}: timestamp {} precedes {} on line {}",
                    source.display(),
                    row.line,
                    row.time,
                    prev.time,
                    prev.line
                )));
            }
            // Absent hours become fully missing rows.
            let mut t = prev.time + chrono::Duration::hours(1);
            while t < row.time {
                frame.timestamps.push(t);
                for (col, mask) in frame.columns.iter_mut().zip(frame.missing.iter_mut()) {
                    col.push(f64::NAN);
                    mask.push(true);
                }
                frame.weather.push(None);
                repaired += 1;
                t += chrono::Duration::hours(1);
            }
        }
        frame.timestamps.push(row.time);
        for ((col, mask), &v) in frame.columns.iter_mut().zip(frame.missing.iter_mut()).zip(&row.values) {
            col.push(v);
            mask.push(v.is_nan());
        }
        frame.weather.push(row.weather.clone());
    }

    let mut warnings = Vec::new();
    if repaired > 0 {
        warnings.push(format!("{repaired} absent hour(s) inserted as missing rows"));
    }
    for (name, lo, hi) in PLAUSIBLE_RANGES {
        let col = frame.column(name)?;
        let outside: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan() && (*v < lo || *v > hi)).collect();
        if let Some(first) = outside.first() {
            warnings.push(format!(
                "{name}: {} value(s) outside the plausible range [{lo}, {hi}] (e.g. {first})",
                outside.len()
            ));
        }
    }
    Ok(Ingested { frame, warnings })
}

/// Reads a frame from a file and logs any range warnings.
pub fn ingest(path: &Path) -> Result<TimeSeriesFrame> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let ingested = read_frame(std::io::BufReader::new(file), path)?;
    for w in &ingested.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(ingested.frame)
}

fn fmt_value(v: f64, missing: bool) -> String {
    if missing || v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Writes a frame in the input schema, followed by any extra columns.
///
/// Wind components are converted back to speed and direction, so a
/// write/read cycle reproduces them up to rounding.
pub fn write_frame<W: Write>(frame: &TimeSeriesFrame, writer: W) -> Result<()> {
    let idx: Vec<usize> = CONTINUOUS_COLUMNS
        .iter()
        .map(|n| frame.column_index(n).ok_or_else(|| Error::Schema(format!("frame lacks column {n}"))))
        .collect::<Result<_>>()?;
    let extras: Vec<usize> = (0..frame.names.len()).filter(|i| !idx.contains(i)).collect();
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Data(format!("writing delimited text: {e}"));
    let header: Vec<&str> = INPUT_COLUMNS
        .iter()
        .copied()
        .chain(extras.iter().map(|&i| frame.names[i].as_str()))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in 0..frame.len() {
        let cell = |c: usize| fmt_value(frame.columns[c][r], frame.missing[c][r]);
        let mut rec = vec![frame.timestamps[r].format("%Y-%m-%dT%H:%M:%S").to_string()];
        rec.extend(idx[..6].iter().map(|&c| cell(c)));
        let (wx, wy) = (idx[6], idx[7]);
        if frame.missing[wx][r] || frame.missing[wy][r] {
            rec.push(String::new());
            rec.push(String::new());
        } else {
            let (speed, dir) = components_to_wind(frame.columns[wx][r], frame.columns[wy][r]);
            rec.push(format!("{speed}"));
            rec.push(format!("{dir}"));
        }
        rec.extend(idx[8..].iter().map(|&c| cell(c)));
        rec.push(frame.weather[r].clone().unwrap_or_default());
        rec.extend(extras.iter().map(|&c| cell(c)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Data(format!("writing delimited text: {e}")))?;
    Ok(())
}

pub fn write_frame_file(frame: &TimeSeriesFrame, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_frame(frame, std::io::BufWriter::new(file))
}
