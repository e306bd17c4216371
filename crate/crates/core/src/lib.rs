//! Decomposition-augmented forecasting of hourly pollutant concentrations.
//!
//! The crate covers the whole workflow: ingesting hourly data, CEEMDAN
//! decomposition of the target series, a deep temporal convolutional network
//! with categorical embeddings, four benchmark models (linear regression,
//! a back-propagation network, LSTM and GRU), a seeded Adam/MAPE training
//! loop, and an evaluation suite with the Diebold–Mariano test.
//!
//! See `examples/` for one runnable program per capability.

pub mod autodiff;
pub mod datapipe;
pub mod decomposition;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod models;
pub mod seed;
pub mod training;

pub use error::{Error, Result};
