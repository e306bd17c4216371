//! Minimal dense tensor engine with reverse-mode differentiation.
//!
//! Supports exactly what the forecasting models need: causal dilated
//! convolution, weight normalization, activations, affine maps, embeddings,
//! concatenation/slicing and a MAPE loss node.

mod graph;
mod params;
mod tensor;

pub use graph::{Activation, Graph, Var};
pub use params::{Bound, ParamId, ParamSet};
pub use tensor::Tensor;
