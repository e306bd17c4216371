//! Fit every benchmark family on a short synthetic series and compare test errors.

use hybridcast::evaluation::compute_metrics;
use hybridcast::experiment::{build_datasets, load_frame, split_ranges, DataConfig};
use hybridcast::models::{build_model, predict, InputSpec, ModelConfig, ModelKind};
use hybridcast::training::{train_model, TrainConfig};

fn main() -> hybridcast::Result<()> {
    let data = DataConfig {
        synthetic_hours: 900,
        ..Default::default()
    };
    let frame = load_frame(&data)?;
    let ranges = split_ranges(&data, &frame)?;
    let sets = build_datasets(&frame, &ranges, 24, 1)?;
    let spec = InputSpec::from_dataset(&sets.train)?;

    let mut cfg = ModelConfig::default();
    cfg.rnn.hidden = 16;
    let train_cfg = TrainConfig {
        epochs: 15,
        ..Default::default()
    };
    println!("{:<8} {:>8} {:>8} {:>8}", "model", "MAPE", "MAE", "RMSE");
    for kind in ModelKind::ALL {
        let mut model = build_model(kind, spec.clone(), &cfg, 1)?;
        train_model(model.as_mut(), &sets.train, &sets.validation, &train_cfg)?;
        let pred = predict(model.as_ref(), &sets.test, 256)?;
        let m = compute_metrics(&sets.test.targets(), &pred)?;
        println!("{:<8} {:>8.4} {:>8.3} {:>8.3}", kind.name(), m.mape, m.mae, m.rmse);
    }
    Ok(())
}
