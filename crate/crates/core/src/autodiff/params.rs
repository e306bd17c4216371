//! Named parameter storage and the text checkpoint format.
//!
//! A checkpoint is UTF-8 text:
//!
//! ```text
//! hybridcast-params 1
//! <count>
//! <name> <rank> <dim_0> .. <dim_{rank-1}>
//! <value_0> <value_1> ..
//! ```
//!
//! one header line and one value line per parameter, in insertion order.
//! Values are written with Rust's shortest round-trip `{:e}` formatting, so a
//! save/load cycle reproduces every bit of every finite value.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &str = "hybridcast-params 1";

/// Ordered, named collection of trainable tensors with matching gradient buffers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Vec<f64>>,
}

/// Index of a parameter inside its [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Graph handles for every parameter of a set, in the set's order.
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn get(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.grads.push(vec![0.0; value.numel()]);
        self.values.push(value);
        self.names.push(name);
        ParamId(self.values.len() - 1)
    }

    /// Uniform in `[-sqrt(1/fan_in), sqrt(1/fan_in)]`.
    pub fn add_fan_in(&mut self, name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> ParamId {
        let bound = (1.0 / fan_in as f64).sqrt();
        self.add_uniform(name, shape, bound, rng)
    }

    pub fn add_uniform(&mut self, name: impl Into<String>, shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> ParamId {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| rng.random_range(-bound..=bound)).collect();
        self.add(name, Tensor::new(shape.to_vec(), data).expect("shape matches"))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.grads[id.0]
    }

    pub fn total_size(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Mutable access to every (value, gradient) pair, for optimizers.
    pub fn values_and_grads_mut(&mut self) -> impl Iterator<Item = (&mut [f64], &[f64])> {
        self.values
            .iter_mut()
            .zip(&self.grads)
            .map(|(v, g)| (v.data_mut(), g.as_slice()))
    }

    /// Copies every parameter into `graph` as a leaf.
    pub fn bind(&self, graph: &mut Graph, requires_grad: bool) -> Bound {
        let vars = self
            .values
            .iter()
            .map(|v| graph.leaf(v.clone(), requires_grad))
            .collect();
        Bound { vars }
    }

    /// Adds the gradients accumulated on `bound` leaves to this set's buffers.
    pub fn accumulate_grads(&mut self, graph: &Graph, bound: &Bound) {
        for (grad, var) in self.grads.iter_mut().zip(&bound.vars) {
            if let Some(g) = graph.grad(*var) {
                for (dst, src) in grad.iter_mut().zip(g) {
                    *dst += src;
                }
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "{}", self.values.len()).unwrap();
        for (name, value) in self.names.iter().zip(&self.values) {
            write!(out, "{name} {}", value.rank()).unwrap();
            for d in value.shape() {
                write!(out, " {d}").unwrap();
            }
            out.push('\n');
            let line: Vec<String> = value.data().iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse {
            path: "<params>".into(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| bad(0, format!("unexpected end of input, expected {what}")))
        };
        let (ln, magic) = next("header")?;
        if magic.trim() != MAGIC {
            return Err(bad(ln + 1, format!("expected '{MAGIC}'")));
        }
        let (ln, count) = next("parameter count")?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|e| bad(ln + 1, format!("bad count: {e}")))?;
        let mut set = ParamSet::new();
        for _ in 0..count {
            let (ln, header) = next("parameter header")?;
            let mut fields = header.split_whitespace();
            let name = fields
                .next()
                .ok_or_else(|| bad(ln + 1, "missing name".into()))?
                .to_string();
            let rank: usize = fields
                .next()
                .ok_or_else(|| bad(ln + 1, "missing rank".into()))?
                .parse()
                .map_err(|e| bad(ln + 1, format!("bad rank: {e}")))?;
            let shape = fields
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(ln + 1, format!("bad dimension: {e}")))?;
            if shape.len() != rank {
                return Err(bad(ln + 1, format!("rank {rank} but {} dimensions", shape.len())));
            }
            let (ln, values) = next("parameter values")?;
            let data = values
                .split_whitespace()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(ln + 1, format!("bad value: {e}")))?;
            let tensor = Tensor::new(shape, data).map_err(|e| bad(ln + 1, e.to_string()))?;
            set.add(name, tensor);
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Replaces values with those of `other`, which must have identical names and shapes.
    pub fn copy_values_from(&mut self, other: &ParamSet) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Shape("parameter names differ".into()));
        }
        for (dst, src) in self.values.iter_mut().zip(&other.values) {
            if dst.shape() != src.shape() {
                return Err(Error::Shape(format!(
                    "parameter shape {:?} differs from {:?}",
                    dst.shape(),
                    src.shape()
                )));
            }
            *dst = src.clone();
        }
        Ok(())
    }
}
