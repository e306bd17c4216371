//! Synthetic hourly frame -> standardized columns -> supervised windows -> splits.

use std::sync::Arc;

use hybridcast::datapipe::{apply_scaler, fit_scaler, make_windows, split_chronological, synth_generate, CategoryEncoder, RowTable, TARGET};

fn main() -> hybridcast::Result<()> {
    let frame = synth_generate(720, 3)?;
    println!("{} rows from {} to {}", frame.len(), frame.timestamps[0], frame.timestamps[frame.len() - 1]);
    println!("columns: {}", frame.names.join(", "));

    let ranges = split_chronological(frame.len(), [0.6, 0.2, 0.2])?;
    let scaler = fit_scaler(&frame, ranges.train.clone())?;
    let scaled = apply_scaler(&frame, &scaler)?;
    let weather = CategoryEncoder::fit_weather(frame.weather[ranges.train.clone()].iter().flatten().map(String::as_str));
    println!("weather vocabulary: {:?}", weather.vocabulary());

    let rows = Arc::new(RowTable::new(&scaled, frame.column(TARGET)?, &weather)?);
    let windows = make_windows(rows, 24, 3)?;
    let (train, val, test) = windows.split(&ranges)?;
    println!("windows of 24 h predicting 3 h ahead: train {}, validation {}, test {}", train.len(), val.len(), test.len());

    let batch = train.batch(&[0, 1, 2, 3]);
    println!("batch: {} samples x {} steps x {} numeric channels, targets {:?}", batch.size, batch.history, batch.n_num, batch.y);
    println!("first test sample predicts {} ({:.1})", test.target_time(0), test.target(0));
    Ok(())
}
