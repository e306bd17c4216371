use hybridcast::experiment::{build_datasets, load_frame, split_ranges, DataConfig};
use hybridcast::models::{DeepTcn, DeepTcnConfig, InputSpec};
use hybridcast::training::{train_model, TrainConfig};

fn main() -> hybridcast::Result<()> {
    let data = DataConfig {
        synthetic_hours: 1200,
        ..Default::default()
    };
    let frame = load_frame(&data)?;
    let ranges = split_ranges(&data, &frame)?;
    let sets = build_datasets(&frame, &ranges, 24, 1)?;
    let spec = InputSpec::from_dataset(&sets.train)?;

    let mut model = DeepTcn::new(spec, &DeepTcnConfig::default(), 42)?;
    let cfg = TrainConfig {
        epochs: 20,
        seed: 42,
        ..Default::default()
    };
    let history = train_model(&mut model, &sets.train, &sets.validation, &cfg)?;
    for e in history.epochs.iter().step_by(4) {
        println!("epoch {:>3}  train MAPE {:.4}  validation MAPE {:.4}", e.epoch, e.train_mape, e.val_mape);
    }
    if history.guarded_targets > 0 {
        println!("{} near-zero targets were clamped in the loss", history.guarded_targets);
    }
    Ok(())
}
