use serde::{Deserialize, Serialize};

use super::{model_rng, squeeze_head, to_target_scale, EmbeddingSizes, Embeddings, Forecaster, InputSpec, ModelKind};
use crate::autodiff::{Bound, Graph, ParamId, ParamSet, Var};
use crate::datapipe::Batch;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BpnnConfig {
    pub hidden: usize,
    pub embeddings: EmbeddingSizes,
}

impl Default for BpnnConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            embeddings: EmbeddingSizes::default(),
        }
    }
}

/// One sigmoid hidden layer over the flattened window, linear output.
#[derive(Debug, Clone)]
pub struct Bpnn {
    spec: InputSpec,
    params: ParamSet,
    embeddings: Embeddings,
    pub w_hidden: ParamId,
    pub b_hidden: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
}

impl Bpnn {
    pub fn new(spec: InputSpec, config: &BpnnConfig, seed: u64) -> Result<Self> {
        if config.hidden == 0 {
            return Err(Error::Parameter("hidden size must be positive".into()));
        }
        let mut rng = model_rng(seed);
        let mut params = ParamSet::new();
        let embeddings = Embeddings::new(&mut params, spec.cat_cardinalities, config.embeddings, &mut rng)?;
        let n_in = spec.history * (spec.n_num + embeddings.width());
        let w_hidden = params.add_fan_in("hidden.w", &[config.hidden, n_in], n_in, &mut rng);
        let b_hidden = params.add_fan_in("hidden.b", &[config.hidden], n_in, &mut rng);
        let w_out = params.add_fan_in("out.w", &[1, config.hidden], config.hidden, &mut rng);
        let b_out = params.add_zeros("out.b", &[1]);
        Ok(Self {
            spec,
            params,
            embeddings,
            w_hidden,
            b_hidden,
            w_out,
            b_out,
        })
    }

    /// Hidden activations `[B, hidden]` and the standardized output `[B]`.
    pub fn forward_standardized(&self, g: &mut Graph, bound: &Bound, batch: &Batch) -> Result<(Var, Var)> {
        self.spec.check(batch)?;
        let x = self.embeddings.features(g, bound, batch)?;
        let width = g.shape(x)[1];
        let x = g.reshape(x, vec![batch.size, batch.history * width])?;
        let pre = g.affine(x, bound.get(self.w_hidden), Some(bound.get(self.b_hidden)))?;
        let h = g.sigmoid(pre);
        let y = g.affine(h, bound.get(self.w_out), Some(bound.get(self.b_out)))?;
        let y = squeeze_head(g, y, batch.size)?;
        Ok((h, y))
    }
}

impl Forecaster for Bpnn {
    fn kind(&self) -> ModelKind {
        ModelKind::Bpnn
    }

    fn spec(&self) -> &InputSpec {
        &self.spec
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn forward(&self, g: &mut Graph, bound: &Bound, batch: &Batch) -> Result<Var> {
        let (_, y) = self.forward_standardized(g, bound, batch)?;
        Ok(to_target_scale(g, y, &self.spec))
    }
}
