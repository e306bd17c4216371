//! Ingestion and preparation of hourly multivariate data.

mod attach;
mod clean;
mod encoding;
mod frame;
mod io;
mod scaler;
pub mod synth;
mod window;

pub use attach::{attach_decomposition, AttachMode};
pub use clean::{components_to_wind, fill_linear, interpolate_missing, wind_to_components};
pub use encoding::{one_hot_code, CategoryEncoder, WEATHER_CATEGORIES};
pub use frame::{calendar_codes, TimeSeriesFrame, CATEGORICAL_CHANNELS, CONTINUOUS_COLUMNS, PLAUSIBLE_RANGES, TARGET};
pub use io::{ingest, parse_timestamp, read_frame, write_frame, write_frame_file, Ingested, INPUT_COLUMNS};
pub use scaler::{apply_scaler, fit_scaler, invert_scaler, ScalerParams};
pub use synth::synth_generate;
pub use window::{make_windows, split_by_dates, split_chronological, Batch, RowTable, SplitRanges, SupervisedDataset};
