//! Hybrid quantum-classical convolutional network laboratory.
//!
//! A classical CNN feature extractor feeds a statevector-simulated quantum
//! layer (data feature map followed by a trainable TwoLocal ansatz) whose
//! Pauli-Z expectations go to a linear classifier head. Gradients through
//! the quantum layer use the parameter-shift rule. The crate also carries
//! a synthetic causal-heatmap generator, training-curve and embedding
//! diagnostics, and the `hqcnn` experiment runner.

pub mod cli;
pub mod datagen;
pub mod diagnostics;
pub mod encodings;
pub mod error;
pub mod model;
pub mod nn;
pub mod qnn;
pub mod quantum;
pub mod train;

pub use error::{Error, Result};
