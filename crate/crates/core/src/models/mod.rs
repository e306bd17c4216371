//! Forecasting models built on the autodiff engine.
//!
//! Every model maps a [`Batch`] of windows to one prediction per sample on
//! the original target scale. Neural models work on a standardized target
//! internally and rescale in their last node, so the training loss can be
//! computed directly against raw concentrations.

mod bpnn;
mod lr;
mod rnn;
mod tcn;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Bound, Graph, ParamId, ParamSet, Tensor, Var};
use crate::datapipe::{Batch, SupervisedDataset};
use crate::error::{Error, Result};

pub use bpnn::{Bpnn, BpnnConfig};
pub use lr::{lr_design_row, LinearRegression, LR_RIDGE};
pub use rnn::{gru_step, lstm_step, Gru, GruCell, Lstm, LstmCell, RnnConfig};
pub use tcn::{tcn_block_forward, DeepTcn, DeepTcnConfig, TcnBlock};

/// Shapes and target statistics a model is built against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub history: usize,
    pub n_num: usize,
    pub cat_cardinalities: [usize; 4],
    pub target_mean: f64,
    pub target_std: f64,
    pub target_min: f64,
    pub target_max: f64,
}

impl InputSpec {
    /// Reads shapes from `train` and target statistics from its targets.
    pub fn from_dataset(train: &SupervisedDataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Data("cannot size a model from an empty dataset".into()));
        }
        let y = train.targets();
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let (min, max) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        Ok(Self {
            history: train.history,
            n_num: train.n_num(),
            cat_cardinalities: train.rows.cat_cardinalities,
            target_mean: mean,
            target_std: if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 },
            target_min: min,
            target_max: if max > min { max } else { min + 1.0 },
        })
    }

    pub(crate) fn check(&self, batch: &Batch) -> Result<()> {
        if batch.history != self.history || batch.n_num != self.n_num {
            return Err(Error::Shape(format!(
                "model expects windows of {}x{}, batch has {}x{}",
                self.history, self.n_num, batch.history, batch.n_num
            )));
        }
        if batch.size == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        Ok(())
    }
}

/// The five model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "BPNN")]
    Bpnn,
    #[serde(rename = "LSTM")]
    Lstm,
    #[serde(rename = "GRU")]
    Gru,
    #[serde(rename = "DeepTCN")]
    DeepTcn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Lr, ModelKind::Bpnn, ModelKind::Lstm, ModelKind::Gru, ModelKind::DeepTcn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::Bpnn => "BPNN",
            ModelKind::Lstm => "LSTM",
            ModelKind::Gru => "GRU",
            ModelKind::DeepTcn => "DeepTCN",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}")))
    }
}

/// Hyperparameters for every model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ModelConfig {
    pub tcn: DeepTcnConfig,
    pub bpnn: BpnnConfig,
    pub rnn: RnnConfig,
}

/// A forecaster with a parameter set and a differentiable forward pass.
pub trait Forecaster: Send {
    fn kind(&self) -> ModelKind;

    fn spec(&self) -> &InputSpec;

    fn params(&self) -> &ParamSet;

    fn params_mut(&mut self) -> &mut ParamSet;

    /// Predictions `[batch.size]` on the target's original scale.
    fn forward(&self, graph: &mut Graph, bound: &Bound, batch: &Batch) -> Result<Var>;

    /// Models with a closed-form fit override this and return `true`;
    /// they are not trained by gradient descent.
    fn fit_closed_form(&mut self, _train: &SupervisedDataset) -> Result<bool> {
        Ok(false)
    }
}

/// Builds an untrained model of `kind`.
pub fn build_model(kind: ModelKind, spec: InputSpec, config: &ModelConfig, seed: u64) -> Result<Box<dyn Forecaster>> {
    Ok(match kind {
        ModelKind::Lr => Box::new(LinearRegression::new(spec)),
        ModelKind::Bpnn => Box::new(Bpnn::new(spec, &config.bpnn, seed)?),
        ModelKind::Lstm => Box::new(Lstm::new(spec, &config.rnn, seed)?),
        ModelKind::Gru => Box::new(Gru::new(spec, &config.rnn, seed)?),
        ModelKind::DeepTcn => Box::new(DeepTcn::new(spec, &config.tcn, seed)?),
    })
}

/// Forward pass without gradients, in batches of `batch_size`.
pub fn predict(model: &dyn Forecaster, data: &SupervisedDataset, batch_size: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(data.len());
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let batch = data.batch(chunk);
        let mut g = Graph::new();
        let bound = model.params().bind(&mut g, false);
        let y = model.forward(&mut g, &bound, &batch)?;
        out.extend_from_slice(g.value(y).data());
    }
    Ok(out)
}

pub(crate) fn model_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Half-width of the uniform embedding initialization. A code never seen in
/// training keeps a near-zero vector.
pub const EMBEDDING_INIT: f64 = 0.05;

/// Embedding widths for month, day of week, hour and weather.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSizes {
    pub month: usize,
    pub day: usize,
    pub hour: usize,
    pub weather: usize,
}

impl Default for EmbeddingSizes {
    fn default() -> Self {
        Self {
            month: 2,
            day: 2,
            hour: 4,
            weather: 2,
        }
    }
}

impl EmbeddingSizes {
    pub fn as_array(&self) -> [usize; 4] {
        [self.month, self.day, self.hour, self.weather]
    }

    pub fn total(&self) -> usize {
        self.as_array().iter().sum()
    }
}

/// One lookup table per categorical channel, initialized uniformly in
/// `[-EMBEDDING_INIT, EMBEDDING_INIT]`.
#[derive(Debug, Clone)]
pub struct Embeddings {
    tables: [ParamId; 4],
    sizes: [usize; 4],
}

impl Embeddings {
    pub fn new(params: &mut ParamSet, cardinalities: [usize; 4], sizes: EmbeddingSizes, rng: &mut ChaCha8Rng) -> Result<Self> {
        let sizes = sizes.as_array();
        if sizes.contains(&0) || cardinalities.contains(&0) {
            return Err(Error::Parameter("embedding sizes and vocabularies must be positive".into()));
        }
        let names = ["emb.month", "emb.day", "emb.hour", "emb.weather"];
        let tables = std::array::from_fn(|c| params.add_uniform(names[c], &[cardinalities[c], sizes[c]], EMBEDDING_INIT, rng));
        Ok(Self { tables, sizes })
    }

    pub fn width(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// `[B * T, n_num + width]`: numeric channels then the four embeddings,
    /// one row per (sample, step).
    pub fn features(&self, g: &mut Graph, bound: &Bound, batch: &Batch) -> Result<Var> {
        let rows = batch.size * batch.history;
        let num = g.constant(Tensor::new(vec![rows, batch.n_num], batch.x_num.clone())?);
        let mut parts = vec![num];
        for (table, codes) in self.tables.iter().zip(&batch.x_cat) {
            parts.push(g.embedding(bound.get(*table), codes)?);
        }
        g.concat(&parts, 1)
    }
}

/// Rescales a standardized output node to the target scale.
pub(crate) fn to_target_scale(g: &mut Graph, z: Var, spec: &InputSpec) -> Var {
    g.scale_shift(z, spec.target_std, spec.target_mean)
}

/// `[B, 1]` head output to `[B]`.
pub(crate) fn squeeze_head(g: &mut Graph, y: Var, batch: usize) -> Result<Var> {
    g.reshape(y, vec![batch])
}

#[cfg(test)]
pub(crate) mod testutil {
    use std::sync::Arc;

    use super::*;
    use crate::datapipe::{make_windows, synth_generate, CategoryEncoder, RowTable};

    pub fn dataset(n: usize, history: usize) -> SupervisedDataset {
        let f = synth_generate(n.max(48), 5).unwrap().slice(0..n);
        let target = f.column("pm25").unwrap().to_vec();
        let mut g = f.clone();
        for col in &mut g.columns {
            let m = col.iter().sum::<f64>() / col.len() as f64;
            let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64).sqrt().max(1e-9);
            col.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        let rows = Arc::new(RowTable::new(&g, &target, &CategoryEncoder::weather()).unwrap());
        make_windows(rows, history, 1).unwrap()
    }
}
