//! SGD with momentum and per-layer learning-rate multipliers, plus the
//! mini-batch training loop.
//!
//! The update is the velocity form of the classic momentum recurrence
//! `theta_{i+1} = theta_i - alpha * grad + beta * (theta_i - theta_{i-1})`:
//! with `v = theta_i - theta_{i-1}` held as state,
//! `v <- beta * v - alpha_eff * grad; theta <- theta + v`. The two forms are
//! algebraically identical; velocity starts at zero so the first step is
//! plain gradient descent.

use crate::error::{Error, Result};
use crate::network::{Gradients, Network, ParamGrads};
use crate::nn::{cross_entropy_loss, LossConfig, Mode};
use crate::rng::{derive_seed, label, rng_from_seed};
use crate::signal::ImageSample;
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub base_learning_rate: f64,
    /// Momentum coefficient in `[0, 1)`.
    pub momentum: f64,
    /// Per-layer multipliers on the base rate; absent layers use 1.0. A
    /// multiplier of 0 freezes the layer bitwise.
    pub per_layer_lr_multipliers: BTreeMap<usize, f64>,
    pub iteration: u64,
}

impl OptimizerConfig {
    pub fn new(base_learning_rate: f64, momentum: f64) -> Result<Self> {
        if base_learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {base_learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        Ok(Self {
            base_learning_rate,
            momentum,
            per_layer_lr_multipliers: BTreeMap::new(),
            iteration: 0,
        })
    }

    pub fn with_multipliers(mut self, multipliers: BTreeMap<usize, f64>) -> Self {
        self.per_layer_lr_multipliers = multipliers;
        self
    }

    pub fn multiplier(&self, layer_idx: usize) -> f64 {
        self.per_layer_lr_multipliers
            .get(&layer_idx)
            .copied()
            .unwrap_or(1.0)
    }
}

/// One velocity tensor per parameter tensor, zero-initialized.
#[derive(Debug, Clone)]
pub struct VelocityState {
    pub layers: Vec<Option<ParamGrads>>,
}

impl VelocityState {
    pub fn zeros_for(network: &Network) -> Self {
        let g = Gradients::zeros_like(network);
        Self { layers: g.layers }
    }
}

/// Elementwise momentum update: `v <- beta*v - lr*g; p <- p + v`.
fn update_slice(params: &mut [f64], grads: &[f64], velocity: &mut [f64], lr: f64, beta: f64) {
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = beta * *v - lr * g;
        *p += *v;
    }
}

/// Applies one momentum step to every parameterized layer. Layers with a
/// zero multiplier are skipped entirely, leaving their parameters and
/// velocity bitwise untouched.
pub fn sgd_momentum_step(
    network: &mut Network,
    grads: &Gradients,
    velocity: &mut VelocityState,
    config: &mut OptimizerConfig,
) -> Result<()> {
    if grads.layers.len() != velocity.layers.len() || grads.layers.len() != network.num_layers() {
        return Err(Error::ShapeMismatch(format!(
            "gradients cover {} layers, velocity {}, network {}",
            grads.layers.len(),
            velocity.layers.len(),
            network.num_layers()
        )));
    }
    for idx in network.parameterized_layers() {
        let mult = config.multiplier(idx);
        if mult == 0.0 {
            continue;
        }
        let lr = config.base_learning_rate * mult;
        let g = grads.layers[idx]
            .as_ref()
            .ok_or_else(|| Error::ShapeMismatch(format!("no gradients for layer {idx}")))?;
        let v = velocity.layers[idx]
            .as_mut()
            .ok_or_else(|| Error::ShapeMismatch(format!("no velocity for layer {idx}")))?;
        let (w, b) = network.layer_mut(idx).params_mut().expect("parameterized");
        if g.weights.shape() != w.shape() || g.bias.shape() != b.shape() {
            return Err(Error::ShapeMismatch(format!(
                "layer {idx}: gradient shapes {:?}/{:?} vs parameter shapes {:?}/{:?}",
                g.weights.shape(),
                g.bias.shape(),
                w.shape(),
                b.shape()
            )));
        }
        update_slice(
            w.data_mut(),
            g.weights.data(),
            v.weights.data_mut(),
            lr,
            config.momentum,
        );
        update_slice(
            b.data_mut(),
            g.bias.data(),
            v.bias.data_mut(),
            lr,
            config.momentum,
        );
    }
    config.iteration += 1;
    Ok(())
}

/// Optimizer state bundle: configuration plus velocity.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub config: OptimizerConfig,
    pub velocity: VelocityState,
}

impl Sgd {
    pub fn new(config: OptimizerConfig, network: &Network) -> Self {
        Self {
            config,
            velocity: VelocityState::zeros_for(network),
        }
    }

    pub fn step(&mut self, network: &mut Network, grads: &Gradients) -> Result<()> {
        sgd_momentum_step(network, grads, &mut self.velocity, &mut self.config)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BatchStat {
    pub loss: f64,
    pub accuracy: f64,
}

/// Runs one epoch of seeded-shuffled mini-batches (the final partial batch
/// included): forward, batch-averaged loss, backward, one optimizer step per
/// batch. Returns one `(loss, accuracy)` entry per mini-batch.
pub fn train_epoch(
    network: &mut Network,
    dataset: &[ImageSample],
    batch_size: usize,
    sgd: &mut Sgd,
    loss_config: &LossConfig,
    shuffle_seed: u64,
) -> Result<Vec<BatchStat>> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData("train_epoch on empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = rng_from_seed(derive_seed(shuffle_seed, &[label("shuffle")]));
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }

    network.set_mode(Mode::Train);
    let mut history = Vec::new();
    for (step, chunk) in order.chunks(batch_size).enumerate() {
        // Per-sample forward/backward in parallel; reduction runs in slot
        // order, so results are identical to the sequential loop.
        let net_ref: &Network = network;
        let per_sample: Vec<Result<(f64, bool, Gradients)>> = chunk
            .par_iter()
            .enumerate()
            .map(|(slot, &sample_idx)| {
                let sample = &dataset[sample_idx];
                let sample_seed = derive_seed(
                    shuffle_seed,
                    &[label("dropout"), step as u64, slot as u64],
                );
                let trace = net_ref.forward_train(&sample.pixels, sample_seed)?;
                let data_loss = cross_entropy_loss(
                    &trace.probs,
                    sample.label,
                    &[],
                    &LossConfig {
                        gamma: 0.0,
                        num_classes: loss_config.num_classes,
                    },
                )?;
                let correct = trace.probs.argmax() == sample.label;
                let grads = net_ref.backward(&trace, sample.label)?;
                Ok((data_loss, correct, grads))
            })
            .collect();

        let mut total = Gradients::zeros_like(network);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for r in per_sample {
            let (l, c, g) = r?;
            loss_sum += l;
            correct += usize::from(c);
            total.add_assign(&g)?;
        }
        let n = chunk.len() as f64;
        total.scale(1.0 / n);
        // L2 term: added once to the batch loss, its gradient 2*gamma*theta
        // applied to trainable layers only.
        let loss = loss_sum / n + loss_config.gamma * network.param_sum_squares();
        if loss_config.gamma > 0.0 {
            for idx in network.parameterized_layers() {
                if sgd.config.multiplier(idx) == 0.0 {
                    continue;
                }
                let (w, b) = network.layer(idx).params().unwrap();
                let g = total.layers[idx].as_mut().unwrap();
                add_scaled(g.weights.data_mut(), w.data(), 2.0 * loss_config.gamma);
                add_scaled(g.bias.data_mut(), b.data(), 2.0 * loss_config.gamma);
            }
        }
        let accuracy = correct as f64 / n;
        sgd.step(network, &total)?;
        history.push(BatchStat { loss, accuracy });
    }
    Ok(history)
}

fn add_scaled(dst: &mut [f64], src: &[f64], factor: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += factor * s;
    }
}

#[derive(Debug, Clone)]
pub struct HistoryRow {
    pub iteration: u64,
    pub epoch: usize,
    pub minibatch_loss: f64,
    pub minibatch_accuracy: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub rows: Vec<HistoryRow>,
}

impl TrainHistory {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("iteration,epoch,minibatch_loss,minibatch_accuracy\n");
        for r in &self.rows {
            writeln!(
                text,
                "{},{},{},{}",
                r.iteration, r.epoch, r.minibatch_loss, r.minibatch_accuracy
            )
            .expect("string write");
        }
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Multi-epoch training driver. Epoch `e` shuffles with a seed derived from
/// `train_seed` and `e`, so the whole run is a pure function of its inputs.
/// Leaves the network in eval mode.
pub fn fit(
    network: &mut Network,
    dataset: &[ImageSample],
    epochs: usize,
    batch_size: usize,
    sgd: &mut Sgd,
    loss_config: &LossConfig,
    train_seed: u64,
) -> Result<TrainHistory> {
    let mut history = TrainHistory::default();
    for epoch in 1..=epochs {
        let shuffle_seed = derive_seed(train_seed, &[label("epoch"), epoch as u64]);
        let start_iter = sgd.config.iteration;
        let stats = train_epoch(network, dataset, batch_size, sgd, loss_config, shuffle_seed)?;
        for (k, s) in stats.iter().enumerate() {
            history.rows.push(HistoryRow {
                iteration: start_iter + k as u64 + 1,
                epoch,
                minibatch_loss: s.loss,
                minibatch_accuracy: s.accuracy,
            });
        }
    }
    network.set_mode(Mode::Eval);
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, spec_by_name, LayerSpec, NetworkSpec};

    fn micro_spec() -> NetworkSpec {
        NetworkSpec {
            name: "micro".into(),
            input_shape: [1, 1, 2],
            stages: vec![vec![
                LayerSpec::Dense {
                    in_features: 2,
                    out_features: 2,
                },
                LayerSpec::Softmax,
                LayerSpec::Classification,
            ]],
            num_classes: 2,
        }
    }

    fn custom_grads(network: &Network, value: f64) -> Gradients {
        let mut g = Gradients::zeros_like(network);
        for layer in g.layers.iter_mut().flatten() {
            for v in layer.weights.data_mut() {
                *v = value;
            }
            for v in layer.bias.data_mut() {
                *v = value;
            }
        }
        g
    }

    #[test]
    fn plain_gd_step() {
        // theta = 1.0, grad = 0.5, lr = 0.1, beta = 0 -> theta' = 0.95
        let mut net = build_network(&micro_spec(), 1).unwrap();
        let (w, _) = net.layer_mut(0).params_mut().unwrap();
        for v in w.data_mut() {
            *v = 1.0;
        }
        let mut sgd = Sgd::new(OptimizerConfig::new(0.1, 0.0).unwrap(), &net);
        let grads = custom_grads(&net, 0.5);
        sgd.step(&mut net, &grads).unwrap();
        let (w, b) = net.layer(0).params().unwrap();
        for &v in w.data() {
            assert!((v - 0.95).abs() < 1e-15);
        }
        for &v in b.data() {
            assert!((v + 0.05).abs() < 1e-15);
        }
    }

    #[test]
    fn two_step_momentum_unroll() {
        // theta0 = 0, grad = 1, lr = 0.1, beta = 0.9:
        // step 1 -> -0.1; step 2 -> theta1 - 0.1 + 0.9*(theta1 - theta0) = -0.29
        let mut net = build_network(&micro_spec(), 1).unwrap();
        let (w, _) = net.layer_mut(0).params_mut().unwrap();
        for v in w.data_mut() {
            *v = 0.0;
        }
        let mut sgd = Sgd::new(OptimizerConfig::new(0.1, 0.9).unwrap(), &net);
        let grads = custom_grads(&net, 1.0);
        sgd.step(&mut net, &grads).unwrap();
        let (w, _) = net.layer(0).params().unwrap();
        for &v in w.data() {
            assert!((v + 0.1).abs() < 1e-15);
        }
        sgd.step(&mut net, &grads).unwrap();
        let (w, _) = net.layer(0).params().unwrap();
        for &v in w.data() {
            assert!((v + 0.29).abs() < 1e-12, "got {v}");
        }
        assert_eq!(sgd.config.iteration, 2);
    }

    #[test]
    fn zero_multiplier_freezes_bitwise() {
        let spec = spec_by_name("mini-local", 9).unwrap();
        let mut net = build_network(&spec, 3).unwrap();
        let frozen: Vec<f64> = net.layer(0).params().unwrap().0.data().to_vec();
        let mut multipliers = BTreeMap::new();
        multipliers.insert(0usize, 0.0);
        let mut sgd = Sgd::new(
            OptimizerConfig::new(0.05, 0.9)
                .unwrap()
                .with_multipliers(multipliers),
            &net,
        );
        let grads = custom_grads(&net, 0.7);
        for _ in 0..100 {
            sgd.step(&mut net, &grads).unwrap();
        }
        let after = net.layer(0).params().unwrap().0.data().to_vec();
        assert!(frozen.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits()));
        // other layers did move
        let moved = net.layer(4).params().unwrap().0.data().to_vec();
        let fresh = build_network(&spec, 3).unwrap();
        assert_ne!(moved, fresh.layer(4).params().unwrap().0.data());
    }

    #[test]
    fn velocity_form_matches_displacement_form() {
        // Unroll both recurrences over a random gradient sequence.
        let mut rng = rng_from_seed(77);
        let (alpha, beta) = (0.03, 0.9);
        let mut theta_v = 0.4_f64;
        let mut v = 0.0_f64;
        let mut theta_d = 0.4_f64;
        let mut theta_prev = 0.4_f64;
        for _ in 0..100 {
            let g: f64 = rng.gen_range(-1.0..1.0);
            v = beta * v - alpha * g;
            theta_v += v;
            let next = theta_d - alpha * g + beta * (theta_d - theta_prev);
            theta_prev = theta_d;
            theta_d = next;
            assert!((theta_v - theta_d).abs() < 1e-12);
        }
    }
}
