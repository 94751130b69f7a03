//! A from-scratch convolutional neural network engine for gearbox fault
//! diagnosis with small training sets.
//!
//! The crate is organized around five subsystems:
//!
//! - [`nn`] — tensors and the forward/backward mechanics of every layer type
//!   (convolution, ReLU, local response normalization, max pooling, dense,
//!   dropout, softmax) plus the cross-entropy loss.
//! - [`optim`] — SGD with momentum, per-layer learning-rate multipliers, and
//!   the mini-batch training loop.
//! - [`network`] — network assembly from declarative stage configs, binary
//!   checkpoints, and the layer-transplant transfer-learning mechanism.
//! - [`signal`] — the vibration-signal pipeline: tachometer-based angle-even
//!   resampling, decimation, image encoding, and dataset splitting.
//! - [`synth`] — deterministic synthetic gearbox signal generation (nine gear
//!   health conditions) and a synthetic source task for pretraining.
//!
//! [`experiment`] wires everything into the training-fraction sweep protocol
//! and emits CSV results; [`gradcheck`] provides finite-difference gradient
//! verification used by both the test suites and the CLI.

pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod network;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
pub use nn::tensor::Tensor;
