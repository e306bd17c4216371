use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{model_rng, squeeze_head, to_target_scale, Embeddings, EmbeddingSizes, Forecaster, InputSpec, ModelKind};
use crate::autodiff::{Bound, Graph, ParamId, ParamSet, Tensor, Var};
use crate::datapipe::Batch;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeepTcnConfig {
    pub dilations: Vec<usize>,
    pub channels: Vec<usize>,
    pub kernel_size: usize,
    pub embeddings: EmbeddingSizes,
}

impl Default for DeepTcnConfig {
    fn default() -> Self {
        Self {
            dilations: vec![1, 2, 4, 8],
            channels: vec![32, 32, 16, 16],
            kernel_size: 2,
            embeddings: EmbeddingSizes::default(),
        }
    }
}

impl DeepTcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dilations.is_empty() || self.dilations.len() != self.channels.len() {
            return Err(Error::Parameter(format!(
                "{} dilations for {} blocks",
                self.dilations.len(),
                self.channels.len()
            )));
        }
        if self.kernel_size == 0 || self.dilations.contains(&0) || self.channels.contains(&0) {
            return Err(Error::Parameter("kernel size, dilations and channels must be positive".into()));
        }
        Ok(())
    }

    /// Trailing steps that can reach the last output: two convolutions per
    /// block, each spanning `(k - 1) * d` extra steps.
    pub fn receptive_field(&self) -> usize {
        1 + 2 * (self.kernel_size - 1) * self.dilations.iter().sum::<usize>()
    }
}

/// Parameters of one residual block.
#[derive(Debug, Clone)]
pub struct TcnBlock {
    pub dilation: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub v1: ParamId,
    pub g1: ParamId,
    pub b1: ParamId,
    pub v2: ParamId,
    pub g2: ParamId,
    pub b2: ParamId,
    /// 1x1 convolution kernel and bias, present iff the channel count changes.
    pub projection: Option<(ParamId, ParamId)>,
}

impl TcnBlock {
    pub fn new(params: &mut ParamSet, prefix: &str, c_in: usize, c_out: usize, kernel: usize, dilation: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut conv = |params: &mut ParamSet, tag: &str, c_in: usize| {
            let v = params.add_fan_in(format!("{prefix}.{tag}.v"), &[c_out, c_in, kernel], c_in * kernel, rng);
            let norms = params
                .value(v)
                .data()
                .chunks(c_in * kernel)
                .map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt())
                .collect();
            let g = params.add(format!("{prefix}.{tag}.g"), Tensor::from_vec(norms));
            let b = params.add_zeros(format!("{prefix}.{tag}.b"), &[c_out]);
            (v, g, b)
        };
        let (v1, g1, b1) = conv(params, "conv1", c_in);
        let (v2, g2, b2) = conv(params, "conv2", c_out);
        let projection = (c_in != c_out).then(|| {
            let w = params.add_fan_in(format!("{prefix}.proj.w"), &[c_out, c_in, 1], c_in, rng);
            let b = params.add_zeros(format!("{prefix}.proj.b"), &[c_out]);
            (w, b)
        });
        Self {
            dilation,
            in_channels: c_in,
            out_channels: c_out,
            v1,
            g1,
            b1,
            v2,
            g2,
            b2,
            projection,
        }
    }
}

/// `ReLU(skip(x) + F(x))` with `F = conv -> ReLU -> conv`, both convolutions
/// weight-normalized, causal and dilated. `x` is `[C_in, T]` or `[B, C_in, T]`.
pub fn tcn_block_forward(g: &mut Graph, bound: &Bound, block: &TcnBlock, x: Var) -> Result<Var> {
    let shape = g.shape(x).to_vec();
    let channels = shape.len().checked_sub(2).map(|i| shape[i]);
    if channels != Some(block.in_channels) {
        return Err(Error::Shape(format!(
            "block expects {} input channels, got {shape:?}",
            block.in_channels
        )));
    }
    let w1 = g.weight_norm(bound.get(block.v1), bound.get(block.g1))?;
    let h = g.conv1d_causal(x, w1, block.dilation)?;
    let h = g.channel_bias(h, bound.get(block.b1))?;
    let h = g.relu(h);
    let w2 = g.weight_norm(bound.get(block.v2), bound.get(block.g2))?;
    let f = g.conv1d_causal(h, w2, block.dilation)?;
    let f = g.channel_bias(f, bound.get(block.b2))?;
    let skip = match block.projection {
        Some((w, b)) => {
            let p = g.conv1d_causal(x, bound.get(w), 1)?;
            g.channel_bias(p, bound.get(b))?
        }
        None => x,
    };
    let sum = g.add(skip, f)?;
    Ok(g.relu(sum))
}

/// Embeddings, stacked residual blocks and a dense head on the last step.
#[derive(Debug, Clone)]
pub struct DeepTcn {
    spec: InputSpec,
    config: DeepTcnConfig,
    params: ParamSet,
    embeddings: Embeddings,
    blocks: Vec<TcnBlock>,
    head_w: ParamId,
    head_b: ParamId,
}

impl DeepTcn {
    pub fn new(spec: InputSpec, config: &DeepTcnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = model_rng(seed);
        let mut params = ParamSet::new();
        let embeddings = Embeddings::new(&mut params, spec.cat_cardinalities, config.embeddings, &mut rng)?;
        let mut c_in = spec.n_num + embeddings.width();
        let mut blocks = Vec::with_capacity(config.channels.len());
        for (i, (&c_out, &d)) in config.channels.iter().zip(&config.dilations).enumerate() {
            blocks.push(TcnBlock::new(&mut params, &format!("block{i}"), c_in, c_out, config.kernel_size, d, &mut rng));
            c_in = c_out;
        }
        let head_w = params.add_fan_in("head.w", &[1, c_in], c_in, &mut rng);
        let head_b = params.add_zeros("head.b", &[1]);
        Ok(Self {
            spec,
            config: config.clone(),
            params,
            embeddings,
            blocks,
            head_w,
            head_b,
        })
    }

    pub fn config(&self) -> &DeepTcnConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[TcnBlock] {
        &self.blocks
    }

    pub fn head(&self) -> (ParamId, ParamId) {
        (self.head_w, self.head_b)
    }

    /// Output of the block stack, `[B, C_last, T]`.
    pub fn encode(&self, g: &mut Graph, bound: &Bound, batch: &Batch) -> Result<Var> {
        self.spec.check(batch)?;
        let x = self.embeddings.features(g, bound, batch)?;
        let width = g.shape(x)[1];
        let x = g.reshape(x, vec![batch.size, batch.history, width])?;
        let mut z = g.swap_last_axes(x)?;
        for block in &self.blocks {
            z = tcn_block_forward(g, bound, block, z)?;
        }
        Ok(z)
    }
}

impl Forecaster for DeepTcn {
    fn kind(&self) -> ModelKind {
        ModelKind::DeepTcn
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
        let z = self.encode(g, bound, batch)?;
        let c = g.shape(z)[1];
        let last = g.narrow(z, 2, batch.history - 1, 1)?;
        let last = g.reshape(last, vec![batch.size, c])?;
        let y = g.affine(last, bound.get(self.head_w), Some(bound.get(self.head_b)))?;
        let y = squeeze_head(g, y, batch.size)?;
        Ok(to_target_scale(g, y, &self.spec))
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::dataset;
    use super::*;

    fn zero_block(c: usize, dilation: usize) -> (ParamSet, TcnBlock) {
        let mut p = ParamSet::new();
        let block = TcnBlock::new(&mut p, "b", c, c, 2, dilation, &mut model_rng(0));
        for id in [block.g1, block.g2, block.b1, block.b2] {
            p.value_mut(id).data_mut().fill(0.0);
        }
        (p, block)
    }

    #[test]
    fn zero_residual_branch_gives_relu() {
        let (p, block) = zero_block(3, 2);
        let mut g = Graph::new();
        let bound = p.bind(&mut g, false);
        let data: Vec<f64> = (0..15).map(|i| (i as f64 - 7.0) * 0.3).collect();
        let x = g.constant(Tensor::new(vec![3, 5], data.clone()).unwrap());
        let y = tcn_block_forward(&mut g, &bound, &block, x).unwrap();
        let expect: Vec<f64> = data.iter().map(|v| v.max(0.0)).collect();
        assert_eq!(g.value(y).data(), &expect[..]);
    }

    #[test]
    fn length_preserved_and_causal() {
        for d in [1, 2, 4, 8] {
            let mut p = ParamSet::new();
            let block = TcnBlock::new(&mut p, "b", 2, 3, 2, d, &mut model_rng(d as u64));
            let run = |data: Vec<f64>| {
                let mut g = Graph::new();
                let bound = p.bind(&mut g, false);
                let x = g.constant(Tensor::new(vec![2, 12], data).unwrap());
                let y = tcn_block_forward(&mut g, &bound, &block, x).unwrap();
                g.value(y).clone()
            };
            let base: Vec<f64> = (0..24).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
            let a = run(base.clone());
            assert_eq!(a.shape(), &[3, 12]);
            let mut bumped = base;
            bumped[9] += 1.0;
            bumped[12 + 9] -= 2.0;
            let b = run(bumped);
            for c in 0..3 {
                for t in 0..9 {
                    assert_eq!(a.data()[c * 12 + t], b.data()[c * 12 + t]);
                }
            }
        }
    }

    #[test]
    fn projection_only_when_channels_change() {
        let ds = dataset(60, 24);
        let spec = InputSpec::from_dataset(&ds).unwrap();
        let m = DeepTcn::new(spec.clone(), &DeepTcnConfig::default(), 1).unwrap();
        let present: Vec<bool> = m.blocks().iter().map(|b| b.projection.is_some()).collect();
        assert_eq!(present, [true, false, true, false]);
        assert_eq!(m.blocks()[0].in_channels, spec.n_num + 10);
    }

    #[test]
    fn zero_head_returns_bias() {
        let ds = dataset(60, 24);
        let spec = InputSpec::from_dataset(&ds).unwrap();
        let mut m = DeepTcn::new(spec.clone(), &DeepTcnConfig::default(), 1).unwrap();
        let (w, b) = m.head();
        m.params_mut().value_mut(w).data_mut().fill(0.0);
        m.params_mut().value_mut(b).data_mut()[0] = 0.75;
        let y = super::super::predict(&m, &ds, 64).unwrap();
        let c = spec.target_mean + spec.target_std * 0.75;
        assert!(y.iter().all(|v| (v - c).abs() < 1e-12));
    }

    #[test]
    fn receptive_field_of_default_stack() {
        assert_eq!(DeepTcnConfig::default().receptive_field(), 31);
    }
}
