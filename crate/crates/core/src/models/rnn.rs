use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{model_rng, squeeze_head, to_target_scale, EmbeddingSizes, Embeddings, Forecaster, InputSpec, ModelKind};
use crate::autodiff::{Bound, Graph, ParamId, ParamSet, Tensor, Var};
use crate::datapipe::Batch;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RnnConfig {
    pub hidden: usize,
    pub embeddings: EmbeddingSizes,
    /// Wraps the output head in a sigmoid and maps (0, 1) onto the training
    /// target range. Off by default: the identity head is unbounded.
    pub sigmoid_head: bool,
}

impl Default for RnnConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            embeddings: EmbeddingSizes::default(),
            sigmoid_head: false,
        }
    }
}

fn gate(params: &mut ParamSet, name: &str, hidden: usize, n_in: usize, bias: bool, rng: &mut ChaCha8Rng) -> (ParamId, Option<ParamId>) {
    let w = params.add_fan_in(format!("{name}.w"), &[hidden, hidden + n_in], hidden, rng);
    let b = bias.then(|| params.add_fan_in(format!("{name}.b"), &[hidden], hidden, rng));
    (w, b)
}

/// Gate weights act on `[h_{t-1}, x_t]`.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub hidden: usize,
    pub w_f: ParamId,
    pub w_i: ParamId,
    pub w_c: ParamId,
    pub w_o: ParamId,
    pub b_f: ParamId,
    pub b_i: ParamId,
    pub b_c: ParamId,
    pub b_o: ParamId,
}

impl LstmCell {
    pub fn new(params: &mut ParamSet, hidden: usize, n_in: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut g = |name| {
            let (w, b) = gate(params, name, hidden, n_in, true, rng);
            (w, b.expect("bias requested"))
        };
        let (w_f, b_f) = g("lstm.forget");
        let (w_i, b_i) = g("lstm.input");
        let (w_c, b_c) = g("lstm.cell");
        let (w_o, b_o) = g("lstm.output");
        Self {
            hidden,
            w_f,
            w_i,
            w_c,
            w_o,
            b_f,
            b_i,
            b_c,
            b_o,
        }
    }
}

/// One LSTM step on `x [B, n_in]`, `h [B, H]`, `c [B, H]`; returns `(h_t, C_t)`.
pub fn lstm_step(g: &mut Graph, bound: &Bound, cell: &LstmCell, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
    let hx = g.concat(&[h, x], 1)?;
    let f = g.affine(hx, bound.get(cell.w_f), Some(bound.get(cell.b_f)))?;
    let f = g.sigmoid(f);
    let i = g.affine(hx, bound.get(cell.w_i), Some(bound.get(cell.b_i)))?;
    let i = g.sigmoid(i);
    let cand = g.affine(hx, bound.get(cell.w_c), Some(bound.get(cell.b_c)))?;
    let cand = g.tanh(cand);
    let o = g.affine(hx, bound.get(cell.w_o), Some(bound.get(cell.b_o)))?;
    let o = g.sigmoid(o);
    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c_next = g.add(keep, write)?;
    let squashed = g.tanh(c_next);
    let h_next = g.mul(o, squashed)?;
    Ok((h_next, c_next))
}

/// Bias-free GRU gates acting on `[h_{t-1}, x_t]`.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub hidden: usize,
    pub w_r: ParamId,
    pub w_z: ParamId,
    pub w_h: ParamId,
}

impl GruCell {
    pub fn new(params: &mut ParamSet, hidden: usize, n_in: usize, rng: &mut ChaCha8Rng) -> Self {
        let (w_r, _) = gate(params, "gru.reset", hidden, n_in, false, rng);
        let (w_z, _) = gate(params, "gru.update", hidden, n_in, false, rng);
        let (w_h, _) = gate(params, "gru.candidate", hidden, n_in, false, rng);
        Self { hidden, w_r, w_z, w_h }
    }
}

/// One GRU step: `h_t = (1 - z) * h_{t-1} + z * h~`.
pub fn gru_step(g: &mut Graph, bound: &Bound, cell: &GruCell, x: Var, h: Var) -> Result<Var> {
    let hx = g.concat(&[h, x], 1)?;
    let r = g.affine(hx, bound.get(cell.w_r), None)?;
    let r = g.sigmoid(r);
    let z = g.affine(hx, bound.get(cell.w_z), None)?;
    let z = g.sigmoid(z);
    let rh = g.mul(r, h)?;
    let rhx = g.concat(&[rh, x], 1)?;
    let cand = g.affine(rhx, bound.get(cell.w_h), None)?;
    let cand = g.tanh(cand);
    let delta = g.sub(cand, h)?;
    let step = g.mul(z, delta)?;
    g.add(h, step)
}

/// Shared plumbing of the two recurrent models: embeddings, the per-step
/// input slices and the dense head.
#[derive(Debug, Clone)]
struct RnnFrame {
    spec: InputSpec,
    embeddings: Embeddings,
    hidden: usize,
    sigmoid_head: bool,
    w_fc: ParamId,
    b_fc: ParamId,
}

impl RnnFrame {
    fn new<C>(spec: InputSpec, config: &RnnConfig, seed: u64, make_cell: impl FnOnce(&mut ParamSet, usize, usize, &mut ChaCha8Rng) -> C) -> Result<(Self, C, ParamSet)> {
        if config.hidden == 0 {
            return Err(Error::Parameter("hidden size must be positive".into()));
        }
        let mut rng = model_rng(seed);
        let mut params = ParamSet::new();
        let embeddings = Embeddings::new(&mut params, spec.cat_cardinalities, config.embeddings, &mut rng)?;
        let n_in = spec.n_num + embeddings.width();
        let cell = make_cell(&mut params, config.hidden, n_in, &mut rng);
        let w_fc = params.add_fan_in("head.w", &[1, config.hidden], config.hidden, &mut rng);
        let b_fc = params.add_zeros("head.b", &[1]);
        let frame = Self {
            spec,
            embeddings,
            hidden: config.hidden,
            sigmoid_head: config.sigmoid_head,
            w_fc,
            b_fc,
        };
        Ok((frame, cell, params))
    }

    /// Step inputs `[B, n_in]` for `t = 0..T`.
    fn steps(&self, g: &mut Graph, bound: &Bound, batch: &Batch) -> Result<Vec<Var>> {
        self.spec.check(batch)?;
        let x = self.embeddings.features(g, bound, batch)?;
        let width = g.shape(x)[1];
        let x = g.reshape(x, vec![batch.size, batch.history, width])?;
        (0..batch.history)
            .map(|t| {
                let s = g.narrow(x, 1, t, 1)?;
                g.reshape(s, vec![batch.size, width])
            })
            .collect()
    }

    fn zeros(&self, g: &mut Graph, batch: usize) -> Var {
        g.constant(Tensor::zeros(&[batch, self.hidden]))
    }

    fn head(&self, g: &mut Graph, bound: &Bound, h: Var, batch: usize) -> Result<Var> {
        let y = g.affine(h, bound.get(self.w_fc), Some(bound.get(self.b_fc)))?;
        let y = squeeze_head(g, y, batch)?;
        if self.sigmoid_head {
            let y = g.sigmoid(y);
            let span = self.spec.target_max - self.spec.target_min;
            Ok(g.scale_shift(y, span, self.spec.target_min))
        } else {
            Ok(to_target_scale(g, y, &self.spec))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lstm {
    frame: RnnFrame,
    params: ParamSet,
    pub cell: LstmCell,
}

impl Lstm {
    pub fn new(spec: InputSpec, config: &RnnConfig, seed: u64) -> Result<Self> {
        let (frame, cell, params) = RnnFrame::new(spec, config, seed, LstmCell::new)?;
        Ok(Self { frame, params, cell })
    }

    /// Final hidden state after unrolling over the window.
    pub fn last_hidden(&self, g: &mut Graph, bound: &Bound, batch: &Batch) -> Result<Var> {
        let steps = self.frame.steps(g, bound, batch)?;
        let mut h = self.frame.zeros(g, batch.size);
        let mut c = self.frame.zeros(g, batch.size);
        for x in steps {
            (h, c) = lstm_step(g, bound, &self.cell, x, h, c)?;
        }
        Ok(h)
    }
}

impl Forecaster for Lstm {
    fn kind(&self) -> ModelKind {
        ModelKind::Lstm
    }

    fn spec(&self) -> &InputSpec {
        &self.frame.spec
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn forward(&self, g: &mut Graph, bound: &Bound, batch: &Batch) -> Result<Var> {
        let h = self.last_hidden(g, bound, batch)?;
        self.frame.head(g, bound, h, batch.size)
    }
}

#[derive(Debug, Clone)]
pub struct Gru {
    frame: RnnFrame,
    params: ParamSet,
    pub cell: GruCell,
}

impl Gru {
    pub fn new(spec: InputSpec, config: &RnnConfig, seed: u64) -> Result<Self> {
        let (frame, cell, params) = RnnFrame::new(spec, config, seed, GruCell::new)?;
        Ok(Self { frame, params, cell })
    }

    pub fn last_hidden(&self, g: &mut Graph, bound: &Bound, batch: &Batch) -> Result<Var> {
        let steps = self.frame.steps(g, bound, batch)?;
        let mut h = self.frame.zeros(g, batch.size);
        for x in steps {
            h = gru_step(g, bound, &self.cell, x, h)?;
        }
        Ok(h)
    }
}

impl Forecaster for Gru {
    fn kind(&self) -> ModelKind {
        ModelKind::Gru
    }

    fn spec(&self) -> &InputSpec {
        &self.frame.spec
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn forward(&self, g: &mut Graph, bound: &Bound, batch: &Batch) -> Result<Var> {
        let h = self.last_hidden(g, bound, batch)?;
        self.frame.head(g, bound, h, batch.size)
    }
}
