//! Append-only computation graph with reverse-mode differentiation.
//!
//! Every op appends one node whose inputs precede it, so insertion order is a
//! valid topological order and `backward` is a single reverse sweep.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the input `x` and the output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv1d {
        input: Var,
        kernel: Var,
        dilation: usize,
    },
    WeightNorm {
        direction: Var,
        gain: Var,
        norms: Vec<f64>,
    },
    Activation {
        input: Var,
        kind: Activation,
    },
    Affine {
        input: Var,
        weight: Var,
        bias: Option<Var>,
    },
    Embedding {
        table: Var,
        indices: Vec<usize>,
    },
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    Narrow {
        input: Var,
        axis: usize,
        start: usize,
    },
    Reshape {
        input: Var,
    },
    SwapLastAxes {
        input: Var,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    ChannelBias {
        input: Var,
        bias: Var,
    },
    ScaleShift {
        input: Var,
        scale: f64,
    },
    Sum {
        input: Var,
    },
    Dot {
        input: Var,
        weights: Vec<f64>,
    },
    Mape {
        pred: Var,
        denominators: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// Single-writer tape of tensor operations.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Splits a `[C, L]` or `[B, C, L]` shape into `(B, C, L)`.
fn batch_channels_length(shape: &[usize]) -> Option<(usize, usize, usize)> {
    match shape {
        [c, l] => Some((1, *c, *l)),
        [b, c, l] => Some((*b, *c, *l)),
        _ => None,
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// Accumulated gradient of the last `backward` calls, if any reached `var`.
    pub fn grad(&self, var: Var) -> Option<&[f64]> {
        self.nodes[var.0].grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    /// Smallest |pre-activation| over all ReLU nodes; finite-difference checks
    /// are only meaningful when this exceeds the probe step.
    pub fn relu_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            if let Op::Activation {
                input,
                kind: Activation::Relu,
            } = node.op
            {
                for v in self.nodes[input.0].value.data() {
                    margin = margin.min(v.abs());
                }
            }
        }
        margin
    }

    /// Causal dilated 1-D convolution with `(k-1)*dilation` implicit left zero padding.
    ///
    /// `input` is `[C_in, L]` or `[B, C_in, L]`, `kernel` is `[C_out, C_in, k]`.
    pub fn conv1d_causal(&mut self, input: Var, kernel: Var, dilation: usize) -> Result<Var> {
        if dilation == 0 {
            return Err(Error::Parameter("dilation must be >= 1".into()));
        }
        let in_shape = self.shape(input).to_vec();
        let k_shape = self.shape(kernel).to_vec();
        let (batch, c_in, len) = batch_channels_length(&in_shape)
            .ok_or_else(|| Error::Shape(format!("conv input must be rank 2 or 3, got {in_shape:?}")))?;
        let [c_out, k_in, width] = k_shape[..] else {
            return Err(Error::Shape(format!("conv kernel must be rank 3, got {k_shape:?}")));
        };
        if k_in != c_in {
            return Err(Error::Shape(format!(
                "kernel expects {k_in} input channels, input has {c_in}"
            )));
        }
        let x = self.value(input).data();
        let w = self.value(kernel).data();
        let mut out = vec![0.0; batch * c_out * len];
        for b in 0..batch {
            for o in 0..c_out {
                let out_row = &mut out[(b * c_out + o) * len..(b * c_out + o + 1) * len];
                for c in 0..c_in {
                    let x_row = &x[(b * c_in + c) * len..(b * c_in + c + 1) * len];
                    for l in 0..width {
                        let weight = w[(o * c_in + c) * width + l];
                        let shift = dilation * l;
                        if weight == 0.0 || shift >= len {
                            continue;
                        }
                        for (dst, src) in out_row[shift..].iter_mut().zip(&x_row[..len - shift]) {
                            *dst += weight * src;
                        }
                    }
                }
            }
        }
        let shape = if in_shape.len() == 2 {
            vec![c_out, len]
        } else {
            vec![batch, c_out, len]
        };
        let rg = self.needs_grad(&[input, kernel]);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Conv1d {
                input,
                kernel,
                dilation,
            },
            rg,
        ))
    }

    /// Weight normalization: each output unit's weights become `g / ||v|| * v`.
    ///
    /// The leading axis of `direction` indexes output units; `gain` holds one
    /// value per unit.
    pub fn weight_norm(&mut self, direction: Var, gain: Var) -> Result<Var> {
        let v = self.value(direction);
        let g = self.value(gain);
        let units = v.shape()[0];
        if g.numel() != units {
            return Err(Error::Shape(format!(
                "weight norm needs {units} gains, got {}",
                g.numel()
            )));
        }
        let per_unit = v.numel() / units;
        let mut norms = Vec::with_capacity(units);
        let mut out = Vec::with_capacity(v.numel());
        for (u, row) in v.data().chunks(per_unit).enumerate() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::DegenerateWeight(format!(
                    "output unit {u} has a zero direction vector"
                )));
            }
            let scale = g.data()[u] / norm;
            out.extend(row.iter().map(|x| scale * x));
            norms.push(norm);
        }
        let shape = v.shape().to_vec();
        let rg = self.needs_grad(&[direction, gain]);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::WeightNorm {
                direction,
                gain,
                norms,
            },
            rg,
        ))
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Var {
        let x = self.value(input);
        let data = x.data().iter().map(|&v| kind.apply(v)).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        let rg = self.needs_grad(&[input]);
        self.push(value, Op::Activation { input, kind }, rg)
    }

    pub fn relu(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Relu)
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Tanh)
    }

    /// `x W^T + b` for `x` of shape `[in]` or `[B, in]` and `W` of shape `[out, in]`.
    pub fn affine(&mut self, input: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
        let x_shape = self.shape(input).to_vec();
        let w_shape = self.shape(weight).to_vec();
        let (batch, n_in) = match x_shape[..] {
            [n] => (1, n),
            [b, n] => (b, n),
            _ => return Err(Error::Shape(format!("affine input must be rank 1 or 2, got {x_shape:?}"))),
        };
        let [n_out, w_in] = w_shape[..] else {
            return Err(Error::Shape(format!("affine weight must be rank 2, got {w_shape:?}")));
        };
        if w_in != n_in {
            return Err(Error::Shape(format!(
                "affine weight expects {w_in} inputs, got {n_in}"
            )));
        }
        if let Some(b) = bias {
            if self.value(b).numel() != n_out {
                return Err(Error::Shape(format!(
                    "affine bias needs {n_out} values, got {}",
                    self.value(b).numel()
                )));
            }
        }
        let x = self.value(input).data();
        let w = self.value(weight).data();
        let b = bias.map(|b| self.value(b).data());
        let mut out = vec![0.0; batch * n_out];
        for r in 0..batch {
            let xr = &x[r * n_in..(r + 1) * n_in];
            for o in 0..n_out {
                let wr = &w[o * n_in..(o + 1) * n_in];
                let mut acc: f64 = wr.iter().zip(xr).map(|(a, b)| a * b).sum();
                if let Some(b) = b {
                    acc += b[o];
                }
                out[r * n_out + o] = acc;
            }
        }
        let shape = if x_shape.len() == 1 {
            vec![n_out]
        } else {
            vec![batch, n_out]
        };
        let mut deps = vec![input, weight];
        deps.extend(bias);
        let rg = self.needs_grad(&deps);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Affine {
                input,
                weight,
                bias,
            },
            rg,
        ))
    }

    /// Row gather from a `[V, E]` table, producing `[indices.len(), E]`.
    pub fn embedding(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let t_shape = self.shape(table).to_vec();
        let [vocab, dim] = t_shape[..] else {
            return Err(Error::Shape(format!("embedding table must be rank 2, got {t_shape:?}")));
        };
        if indices.is_empty() {
            return Err(Error::Shape("embedding lookup with no indices".into()));
        }
        let t = self.value(table).data();
        let mut out = Vec::with_capacity(indices.len() * dim);
        for &i in indices {
            if i >= vocab {
                return Err(Error::Index(format!(
                    "category code {i} outside vocabulary of size {vocab}"
                )));
            }
            out.extend_from_slice(&t[i * dim..(i + 1) * dim]);
        }
        let rg = self.needs_grad(&[table]);
        Ok(self.push(
            Tensor::new(vec![indices.len(), dim], out)?,
            Op::Embedding {
                table,
                indices: indices.to_vec(),
            },
            rg,
        ))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::Shape(format!("concat axis {axis} out of range for {base:?}")));
        }
        let mut axis_total = 0;
        for p in parts {
            let s = self.shape(*p);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::Shape(format!("cannot concat {s:?} with {base:?} on axis {axis}")));
            }
            axis_total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * axis_total * inner);
        for o in 0..outer {
            for p in parts {
                let v = self.value(*p);
                let chunk = v.shape()[axis] * inner;
                out.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = axis_total;
        let rg = self.needs_grad(parts);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Slice `len` entries starting at `start` along `axis`.
    pub fn narrow(&mut self, input: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::Shape(format!(
                "narrow({axis}, {start}, {len}) out of range for {shape:?}"
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * shape[axis] * inner;
            out.extend_from_slice(&x[base + start * inner..base + (start + len) * inner]);
        }
        let mut new_shape = shape;
        new_shape[axis] = len;
        let rg = self.needs_grad(&[input]);
        Ok(self.push(
            Tensor::new(new_shape, out)?,
            Op::Narrow { input, axis, start },
            rg,
        ))
    }

    pub fn reshape(&mut self, input: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        let rg = self.needs_grad(&[input]);
        Ok(self.push(value, Op::Reshape { input }, rg))
    }

    /// Transposes the two trailing axes: `[.., a, b]` becomes `[.., b, a]`.
    pub fn swap_last_axes(&mut self, input: Var) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let r = shape.len();
        if r < 2 {
            return Err(Error::Shape(format!("swap_last_axes needs rank >= 2, got {shape:?}")));
        }
        let (a, b) = (shape[r - 2], shape[r - 1]);
        let outer = shape[..r - 2].iter().product::<usize>();
        let x = self.value(input).data();
        let mut out = vec![0.0; x.len()];
        for o in 0..outer {
            let base = o * a * b;
            for i in 0..a {
                for j in 0..b {
                    out[base + j * a + i] = x[base + i * b + j];
                }
            }
        }
        let mut new_shape = shape;
        new_shape.swap(r - 2, r - 1);
        let rg = self.needs_grad(&[input]);
        Ok(self.push(Tensor::new(new_shape, out)?, Op::SwapLastAxes { input }, rg))
    }

    fn elementwise(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<(Tensor, bool)> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::Shape(format!(
                "{name} of mismatched shapes {:?} and {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        Ok((value, self.needs_grad(&[a, b])))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (value, rg) = self.elementwise(a, b, "add", |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (value, rg) = self.elementwise(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (value, rg) = self.elementwise(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    /// Adds a per-channel bias to a `[C, L]` or `[B, C, L]` tensor.
    pub fn channel_bias(&mut self, input: Var, bias: Var) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let (batch, channels, len) = batch_channels_length(&shape)
            .ok_or_else(|| Error::Shape(format!("channel bias needs rank 2 or 3, got {shape:?}")))?;
        if self.value(bias).numel() != channels {
            return Err(Error::Shape(format!(
                "channel bias needs {channels} values, got {}",
                self.value(bias).numel()
            )));
        }
        let mut out = self.value(input).data().to_vec();
        let b = self.value(bias).data();
        for bi in 0..batch {
            for c in 0..channels {
                let start = (bi * channels + c) * len;
                for v in &mut out[start..start + len] {
                    *v += b[c];
                }
            }
        }
        let rg = self.needs_grad(&[input, bias]);
        Ok(self.push(Tensor::new(shape, out)?, Op::ChannelBias { input, bias }, rg))
    }

    /// `scale * x + shift` with constant scale and shift.
    pub fn scale_shift(&mut self, input: Var, scale: f64, shift: f64) -> Var {
        let x = self.value(input);
        let data = x.data().iter().map(|v| scale * v + shift).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        let rg = self.needs_grad(&[input]);
        self.push(value, Op::ScaleShift { input, scale }, rg)
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let total = self.value(input).data().iter().sum();
        let rg = self.needs_grad(&[input]);
        self.push(Tensor::scalar(total), Op::Sum { input }, rg)
    }

    /// Scalar `sum_i weights[i] * x[i]` with constant weights.
    pub fn dot(&mut self, input: Var, weights: &[f64]) -> Result<Var> {
        let x = self.value(input).data();
        if x.len() != weights.len() {
            return Err(Error::Shape(format!(
                "dot of {} values with {} weights",
                x.len(),
                weights.len()
            )));
        }
        let total = x.iter().zip(weights).map(|(a, b)| a * b).sum();
        let rg = self.needs_grad(&[input]);
        Ok(self.push(
            Tensor::scalar(total),
            Op::Dot {
                input,
                weights: weights.to_vec(),
            },
            rg,
        ))
    }

    /// Mean absolute percentage error `mean |1 - pred/target|` as a scalar node.
    ///
    /// Targets with `|y| <= delta` use the clamped denominator `sign(y) * delta`;
    /// the number of clamped targets is returned alongside the node.
    pub fn mape(&mut self, pred: Var, targets: &[f64], delta: f64) -> Result<(Var, usize)> {
        let p = self.value(pred).data();
        if p.len() != targets.len() {
            return Err(Error::Shape(format!(
                "mape of {} predictions against {} targets",
                p.len(),
                targets.len()
            )));
        }
        let mut clamped = 0;
        let denominators: Vec<f64> = targets
            .iter()
            .map(|&y| {
                if y.abs() <= delta {
                    clamped += 1;
                    if y < 0.0 {
                        -delta
                    } else {
                        delta
                    }
                } else {
                    y
                }
            })
            .collect();
        let loss = p
            .iter()
            .zip(&denominators)
            .map(|(p, y)| (1.0 - p / y).abs())
            .sum::<f64>()
            / p.len() as f64;
        let rg = self.needs_grad(&[pred]);
        let var = self.push(Tensor::scalar(loss), Op::Mape { pred, denominators }, rg);
        Ok((var, clamped))
    }

    /// Reverse-mode sweep from a scalar `loss`. Gradients are added to any
    /// already stored, so repeated calls accumulate until [`Graph::zero_grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let loss_value = self.value(loss);
        if !loss_value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.propagate(idx, &upstream, &mut grads);
            let node = &mut self.nodes[idx];
            match &mut node.grad {
                Some(existing) => {
                    for (e, u) in existing.iter_mut().zip(&upstream) {
                        *e += u;
                    }
                }
                None => node.grad = Some(upstream),
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, up: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let nodes = &self.nodes;
        // Lazily allocated accumulator for an input, skipped if it needs no gradient.
        let with_grad = |var: Var, grads: &mut [Option<Vec<f64>>], f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[var.0].requires_grad {
                return;
            }
            let slot = grads[var.0].get_or_insert_with(|| vec![0.0; nodes[var.0].value.numel()]);
            f(slot);
        };

        match &node.op {
            Op::Leaf => {}
            Op::Conv1d {
                input,
                kernel,
                dilation,
            } => {
                let x = nodes[input.0].value.data();
                let (batch, c_in, len) = batch_channels_length(nodes[input.0].value.shape()).unwrap();
                let w = nodes[kernel.0].value.data();
                let k_shape = nodes[kernel.0].value.shape();
                let (c_out, width) = (k_shape[0], k_shape[2]);
                let d = *dilation;
                with_grad(*input, grads, &mut |gx| {
                    for b in 0..batch {
                        for o in 0..c_out {
                            let g_row = &up[(b * c_out + o) * len..(b * c_out + o + 1) * len];
                            for c in 0..c_in {
                                let gx_row = &mut gx[(b * c_in + c) * len..(b * c_in + c + 1) * len];
                                for l in 0..width {
                                    let shift = d * l;
                                    if shift >= len {
                                        continue;
                                    }
                                    let weight = w[(o * c_in + c) * width + l];
                                    for (dst, g) in gx_row[..len - shift].iter_mut().zip(&g_row[shift..]) {
                                        *dst += weight * g;
                                    }
                                }
                            }
                        }
                    }
                });
                with_grad(*kernel, grads, &mut |gw| {
                    for b in 0..batch {
                        for o in 0..c_out {
                            let g_row = &up[(b * c_out + o) * len..(b * c_out + o + 1) * len];
                            for c in 0..c_in {
                                let x_row = &x[(b * c_in + c) * len..(b * c_in + c + 1) * len];
                                for l in 0..width {
                                    let shift = d * l;
                                    if shift >= len {
                                        continue;
                                    }
                                    let s: f64 = g_row[shift..].iter().zip(&x_row[..len - shift]).map(|(g, x)| g * x).sum();
                                    gw[(o * c_in + c) * width + l] += s;
                                }
                            }
                        }
                    }
                });
            }
            Op::WeightNorm {
                direction,
                gain,
                norms,
            } => {
                let v = nodes[direction.0].value.data();
                let g = nodes[gain.0].value.data();
                let per_unit = v.len() / norms.len();
                with_grad(*gain, grads, &mut |gg| {
                    for (u, norm) in norms.iter().enumerate() {
                        let range = u * per_unit..(u + 1) * per_unit;
                        let s: f64 = up[range.clone()].iter().zip(&v[range]).map(|(a, b)| a * b).sum();
                        gg[u] += s / norm;
                    }
                });
                with_grad(*direction, grads, &mut |gv| {
                    for (u, norm) in norms.iter().enumerate() {
                        let range = u * per_unit..(u + 1) * per_unit;
                        let proj: f64 = up[range.clone()].iter().zip(&v[range.clone()]).map(|(a, b)| a * b).sum::<f64>()
                            / (norm * norm);
                        let scale = g[u] / norm;
                        for i in range {
                            gv[i] += scale * (up[i] - proj * v[i]);
                        }
                    }
                });
            }
            Op::Activation { input, kind } => {
                let x = nodes[input.0].value.data();
                let y = node.value.data();
                with_grad(*input, grads, &mut |gx| {
                    for i in 0..gx.len() {
                        gx[i] += up[i] * kind.derivative(x[i], y[i]);
                    }
                });
            }
            Op::Affine {
                input,
                weight,
                bias,
            } => {
                let x = nodes[input.0].value.data();
                let w = nodes[weight.0].value.data();
                let w_shape = nodes[weight.0].value.shape();
                let (n_out, n_in) = (w_shape[0], w_shape[1]);
                let batch = x.len() / n_in;
                with_grad(*input, grads, &mut |gx| {
                    for r in 0..batch {
                        let gxr = &mut gx[r * n_in..(r + 1) * n_in];
                        for o in 0..n_out {
                            let g = up[r * n_out + o];
                            if g == 0.0 {
                                continue;
                            }
                            for (dst, wv) in gxr.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                                *dst += g * wv;
                            }
                        }
                    }
                });
                with_grad(*weight, grads, &mut |gw| {
                    for r in 0..batch {
                        let xr = &x[r * n_in..(r + 1) * n_in];
                        for o in 0..n_out {
                            let g = up[r * n_out + o];
                            if g == 0.0 {
                                continue;
                            }
                            for (dst, xv) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(xr) {
                                *dst += g * xv;
                            }
                        }
                    }
                });
                if let Some(b) = bias {
                    with_grad(*b, grads, &mut |gb| {
                        for r in 0..batch {
                            for o in 0..n_out {
                                gb[o] += up[r * n_out + o];
                            }
                        }
                    });
                }
            }
            Op::Embedding { table, indices } => {
                let dim = nodes[table.0].value.shape()[1];
                with_grad(*table, grads, &mut |gt| {
                    for (row, &i) in indices.iter().enumerate() {
                        for e in 0..dim {
                            gt[i * dim + e] += up[row * dim + e];
                        }
                    }
                });
            }
            Op::Concat { parts, axis } => {
                let shape = node.value.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let total = shape[*axis] * inner;
                let mut offset = 0;
                for p in parts {
                    let chunk = nodes[p.0].value.shape()[*axis] * inner;
                    with_grad(*p, grads, &mut |gp| {
                        for o in 0..outer {
                            let src = &up[o * total + offset..o * total + offset + chunk];
                            for (dst, s) in gp[o * chunk..(o + 1) * chunk].iter_mut().zip(src) {
                                *dst += s;
                            }
                        }
                    });
                    offset += chunk;
                }
            }
            Op::Narrow { input, axis, start } => {
                let in_shape = nodes[input.0].value.shape();
                let len = node.value.shape()[*axis];
                let outer: usize = in_shape[..*axis].iter().product();
                let inner: usize = in_shape[axis + 1..].iter().product();
                with_grad(*input, grads, &mut |gx| {
                    for o in 0..outer {
                        let base = o * in_shape[*axis] * inner + start * inner;
                        let src = &up[o * len * inner..(o + 1) * len * inner];
                        for (dst, s) in gx[base..base + len * inner].iter_mut().zip(src) {
                            *dst += s;
                        }
                    }
                });
            }
            Op::Reshape { input } => {
                with_grad(*input, grads, &mut |gx| {
                    for (dst, s) in gx.iter_mut().zip(up) {
                        *dst += s;
                    }
                });
            }
            Op::SwapLastAxes { input } => {
                let in_shape = nodes[input.0].value.shape();
                let r = in_shape.len();
                let (a, b) = (in_shape[r - 2], in_shape[r - 1]);
                let outer = up.len() / (a * b);
                with_grad(*input, grads, &mut |gx| {
                    for o in 0..outer {
                        let base = o * a * b;
                        for i in 0..a {
                            for j in 0..b {
                                gx[base + i * b + j] += up[base + j * a + i];
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                with_grad(*a, grads, &mut |ga| ga.iter_mut().zip(up).for_each(|(d, s)| *d += s));
                with_grad(*b, grads, &mut |gb| gb.iter_mut().zip(up).for_each(|(d, s)| *d += s));
            }
            Op::Sub(a, b) => {
                with_grad(*a, grads, &mut |ga| ga.iter_mut().zip(up).for_each(|(d, s)| *d += s));
                with_grad(*b, grads, &mut |gb| gb.iter_mut().zip(up).for_each(|(d, s)| *d -= s));
            }
            Op::Mul(a, b) => {
                let va = nodes[a.0].value.data();
                let vb = nodes[b.0].value.data();
                with_grad(*a, grads, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += up[i] * vb[i];
                    }
                });
                with_grad(*b, grads, &mut |gb| {
                    for i in 0..gb.len() {
                        gb[i] += up[i] * va[i];
                    }
                });
            }
            Op::ChannelBias { input, bias } => {
                with_grad(*input, grads, &mut |gx| gx.iter_mut().zip(up).for_each(|(d, s)| *d += s));
                let (batch, channels, len) = batch_channels_length(node.value.shape()).unwrap();
                with_grad(*bias, grads, &mut |gb| {
                    for bi in 0..batch {
                        for c in 0..channels {
                            let start = (bi * channels + c) * len;
                            gb[c] += up[start..start + len].iter().sum::<f64>();
                        }
                    }
                });
            }
            Op::ScaleShift { input, scale } => {
                with_grad(*input, grads, &mut |gx| gx.iter_mut().zip(up).for_each(|(d, s)| *d += scale * s));
            }
            Op::Sum { input } => {
                with_grad(*input, grads, &mut |gx| gx.iter_mut().for_each(|d| *d += up[0]));
            }
            Op::Dot { input, weights } => {
                with_grad(*input, grads, &mut |gx| {
                    gx.iter_mut().zip(weights).for_each(|(d, w)| *d += up[0] * w)
                });
            }
            Op::Mape { pred, denominators } => {
                let p = nodes[pred.0].value.data();
                let n = p.len() as f64;
                with_grad(*pred, grads, &mut |gp| {
                    for i in 0..gp.len() {
                        let y = denominators[i];
                        let r = 1.0 - p[i] / y;
                        // Subgradient 0 at an exact hit.
                        let sign = if r > 0.0 {
                            1.0
                        } else if r < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        gp[i] += up[0] * (-sign / y) / n;
                    }
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(g: &mut Graph, v: &[f64]) -> Var {
        g.leaf(Tensor::new(vec![1, v.len()], v.to_vec()).unwrap(), true)
    }

    fn kernel(g: &mut Graph, w: &[f64]) -> Var {
        g.leaf(Tensor::new(vec![1, 1, w.len()], w.to_vec()).unwrap(), true)
    }

    #[test]
    fn conv_identity_kernel() {
        let mut g = Graph::new();
        let x = row(&mut g, &[1.0, 2.0, 3.0, 4.0]);
        let k = kernel(&mut g, &[1.0, 0.0]);
        let y = g.conv1d_causal(x, k, 1).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn conv_dilated_shift() {
        let mut g = Graph::new();
        let x = row(&mut g, &[1.0, 2.0, 3.0, 4.0]);
        let k = kernel(&mut g, &[0.0, 1.0]);
        let y = g.conv1d_causal(x, k, 2).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn conv_moving_average() {
        let mut g = Graph::new();
        let x = row(&mut g, &[1.0, 1.0, 1.0, 1.0]);
        let k = kernel(&mut g, &[0.5, 0.5]);
        let y = g.conv1d_causal(x, k, 1).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn conv_channel_mismatch() {
        let mut g = Graph::new();
        let x = row(&mut g, &[1.0, 2.0]);
        let k = g.leaf(Tensor::zeros(&[1, 2, 2]), true);
        assert!(matches!(g.conv1d_causal(x, k, 1), Err(Error::Shape(_))));
    }

    #[test]
    fn weight_norm_examples() {
        let mut g = Graph::new();
        let v = g.leaf(Tensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap(), true);
        let gain = g.leaf(Tensor::scalar(1.0), true);
        let w = g.weight_norm(v, gain).unwrap();
        assert!((g.value(w).data()[0] - 0.6).abs() < 1e-15);
        assert!((g.value(w).data()[1] - 0.8).abs() < 1e-15);

        let zero_gain = g.leaf(Tensor::scalar(0.0), true);
        let w0 = g.weight_norm(v, zero_gain).unwrap();
        assert_eq!(g.value(w0).data(), &[0.0, 0.0]);

        // ||V|| = 2, g = 3
        let v2 = g.leaf(Tensor::new(vec![1, 4], vec![1.0, 1.0, 1.0, 1.0]).unwrap(), true);
        let g3 = g.leaf(Tensor::scalar(3.0), true);
        let w3 = g.weight_norm(v2, g3).unwrap();
        let norm = g.value(w3).data().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 3.0).abs() < 1e-12);
    }

    #[test]
    fn weight_norm_zero_direction() {
        let mut g = Graph::new();
        let v = g.leaf(Tensor::zeros(&[1, 3]), true);
        let gain = g.leaf(Tensor::scalar(1.0), true);
        assert!(matches!(g.weight_norm(v, gain), Err(Error::DegenerateWeight(_))));
    }

    #[test]
    fn activations() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(vec![-1.0, 2.0, 0.0]), true);
        let r = g.relu(x);
        assert_eq!(g.value(r).data(), &[0.0, 2.0, 0.0]);
        let s = g.sigmoid(x);
        assert_eq!(g.value(s).data()[2], 0.5);
        let t = g.tanh(x);
        assert_eq!(g.value(t).data()[2], 0.0);
    }

    #[test]
    fn affine_examples() {
        let mut g = Graph::new();
        let w = g.leaf(Tensor::new(vec![1, 1], vec![2.0]).unwrap(), true);
        let b = g.leaf(Tensor::from_vec(vec![1.0]), true);
        let x = g.leaf(Tensor::from_vec(vec![3.0]), true);
        let y = g.affine(x, w, Some(b)).unwrap();
        assert_eq!(g.value(y).data(), &[7.0]);

        let w = g.leaf(Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap(), true);
        let x = g.leaf(Tensor::from_vec(vec![2.0, 3.0]), true);
        let b = g.leaf(Tensor::from_vec(vec![0.0]), true);
        let y = g.affine(x, w, Some(b)).unwrap();
        assert_eq!(g.value(y).data(), &[5.0]);

        let eye = g.leaf(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(), true);
        let y = g.affine(x, eye, None).unwrap();
        assert_eq!(g.value(y).data(), &[2.0, 3.0]);

        let bad = g.leaf(Tensor::new(vec![1, 3], vec![1.0; 3]).unwrap(), true);
        assert!(matches!(g.affine(x, bad, None), Err(Error::Shape(_))));
    }

    #[test]
    fn embedding_gathers_and_routes_gradient() {
        let mut g = Graph::new();
        let table_data: Vec<f64> = (0..24 * 4).map(|i| i as f64).collect();
        let table = g.leaf(Tensor::new(vec![24, 4], table_data).unwrap(), true);
        let out = g.embedding(table, &[0, 5]).unwrap();
        assert_eq!(g.shape(out), &[2, 4]);
        assert_eq!(&g.value(out).data()[..4], &[0.0, 1.0, 2.0, 3.0]);
        let loss = g.sum(out);
        g.backward(loss).unwrap();
        let grad = g.grad(table).unwrap();
        for r in 0..24 {
            let expected = if r == 0 || r == 5 { 1.0 } else { 0.0 };
            assert!(grad[r * 4..(r + 1) * 4].iter().all(|&v| v == expected));
        }
        assert!(matches!(g.embedding(table, &[24]), Err(Error::Index(_))));
    }

    #[test]
    fn concat_and_narrow_roundtrip() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::new(vec![3, 2], (0..6).map(f64::from).collect()).unwrap(), true);
        let b = g.leaf(Tensor::new(vec![2, 2], (10..14).map(f64::from).collect()).unwrap(), true);
        let c = g.concat(&[a, b], 0).unwrap();
        assert_eq!(g.shape(c), &[5, 2]);
        let a2 = g.narrow(c, 0, 0, 3).unwrap();
        let b2 = g.narrow(c, 0, 3, 2).unwrap();
        assert_eq!(g.value(a2), g.value(a));
        assert_eq!(g.value(b2), g.value(b));
        let single = g.concat(&[a], 1).unwrap();
        assert_eq!(g.value(single), g.value(a));
        assert!(g.concat(&[a, b], 1).is_err());
    }

    #[test]
    fn backward_basics() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0), true);
        g.backward(x).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[1.0]);

        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(-1.0), true);
        let r = g.relu(x);
        g.backward(r).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0]);

        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(vec![1.0, 2.0]), true);
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn backward_accumulates_until_reset() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(vec![1.0, 2.0]), true);
        let y = g.mul(x, x).unwrap();
        let s = g.sum(y);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[2.0, 4.0]);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[4.0, 8.0]);
        g.zero_grad();
        assert!(g.grad(x).is_none());
    }

    #[test]
    fn mape_values_and_clamp() {
        let mut g = Graph::new();
        let p = g.leaf(Tensor::from_vec(vec![110.0, 180.0]), true);
        let (l, clamped) = g.mape(p, &[100.0, 200.0], 1e-3).unwrap();
        assert!((g.value(l).item() - 0.10).abs() < 1e-15);
        assert_eq!(clamped, 0);
        let q = g.leaf(Tensor::from_vec(vec![1.0]), true);
        let (_, clamped) = g.mape(q, &[0.0], 1e-3).unwrap();
        assert_eq!(clamped, 1);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut g = Graph::new();
        let c = g.constant(Tensor::from_vec(vec![1.0, 2.0]));
        let x = g.leaf(Tensor::from_vec(vec![3.0, 4.0]), true);
        let y = g.mul(c, x).unwrap();
        let s = g.sum(y);
        g.backward(s).unwrap();
        assert!(g.grad(c).is_none());
        assert_eq!(g.grad(x).unwrap(), &[1.0, 2.0]);
    }
}
