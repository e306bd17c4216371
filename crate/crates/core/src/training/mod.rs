//! Mini-batch Adam training against a MAPE loss.

mod adam;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};

use crate::autodiff::{Graph, Var};
use crate::datapipe::SupervisedDataset;
use crate::error::{Error, Result};
use crate::models::{predict, Forecaster};

/// Denominator guard for MAPE on near-zero targets.
pub const MAPE_GUARD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 128,
            learning_rate: 0.01,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Parameter("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

/// Mean of `|1 - pred/y|` as a graph node, plus the count of guarded targets.
pub fn mape_loss(g: &mut Graph, pred: Var, y: &[f64]) -> Result<(Var, usize)> {
    g.mape(pred, y, MAPE_GUARD)
}

/// Plain MAPE of two slices with the same guard as the loss.
pub fn mape_value(y: &[f64], pred: &[f64]) -> f64 {
    let total: f64 = y
        .iter()
        .zip(pred)
        .map(|(&y, &p)| {
            let d = if y.abs() <= MAPE_GUARD { MAPE_GUARD.copysign(y) } else { y };
            (1.0 - p / d).abs()
        })
        .sum();
    total / y.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mape: f64,
    pub val_mape: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Targets whose MAPE denominator hit the guard, summed over all batches.
    pub guarded_targets: usize,
    /// Set when the model was fitted in closed form and no epochs ran.
    pub closed_form: bool,
}

impl History {
    /// `epoch,train_mape,val_mape` with one line per epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mape,val_mape\n");
        for r in &self.epochs {
            writeln!(out, "{},{},{}", r.epoch, r.train_mape, r.val_mape).unwrap();
        }
        out
    }
}

/// Trains `model` for exactly `config.epochs` epochs and returns the
/// per-epoch history. The final parameters stay in the model. Models with a
/// closed-form fit are fitted once instead.
///
/// Train MAPE is the size-weighted mean of the epoch's batch losses;
/// validation MAPE is evaluated without gradients after each epoch.
pub fn train_model(model: &mut dyn Forecaster, train: &SupervisedDataset, validation: &SupervisedDataset, config: &TrainConfig) -> Result<History> {
    config.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Data("training and validation sets must be non-empty".into()));
    }
    if model.fit_closed_form(train)? {
        return Ok(History {
            closed_form: true,
            ..Default::default()
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(model.params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut weighted = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = train.batch(chunk);
            let mut g = Graph::new();
            let bound = model.params().bind(&mut g, true);
            let pred = model.forward(&mut g, &bound, &batch)?;
            let (loss, guarded) = mape_loss(&mut g, pred, &batch.y)?;
            let value = g.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b + 1,
                    loss: value,
                });
            }
            history.guarded_targets += guarded;
            weighted += value * chunk.len() as f64;
            g.backward(loss)?;
            let params = model.params_mut();
            params.zero_grad();
            params.accumulate_grads(&g, &bound);
            adam_step(params, &mut adam, config.learning_rate)?;
        }
        let val_pred = predict(model, validation, config.batch_size.max(256))?;
        let val_mape = mape_value(&validation.targets(), &val_pred);
        let train_mape = weighted / train.len() as f64;
        log::debug!("{} epoch {epoch}: train {train_mape:.5} val {val_mape:.5}", model.kind());
        history.epochs.push(EpochRecord {
            epoch,
            train_mape,
            val_mape,
        });
    }
    if history.guarded_targets > 0 {
        log::warn!("{} training targets used the MAPE guard", history.guarded_targets);
    }
    Ok(history)
}
