//! Network assembly from declarative stage configs, forward/backward over the
//! whole layer chain, and accuracy evaluation.
//!
//! A [`NetworkSpec`] is the serializable description (stages of layer specs,
//! no parameters); a [`Network`] is the materialized chain with initialized
//! parameter tensors. Specs for the architectures used in this project are in
//! [`registry`].

pub mod checkpoint;
pub mod registry;
pub mod transfer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, DType};
pub use registry::spec_by_name;
pub use transfer::{transplant, TransferPlan, TransplantOutcome};

use crate::error::{Error, Result};
use crate::nn::{
    conv_backward, conv_forward, conv_output_extent, dense_backward, dense_forward,
    dropout_backward, dropout_forward, lrn_backward, lrn_forward, maxpool_backward,
    maxpool_forward, relu_backward, relu_forward, softmax_cross_entropy_grad, softmax_forward,
    ConvSpec, DenseSpec, DropoutSpec, LrnSpec, MaxPoolSpec, Mode, Tensor,
};
use crate::rng::{derive_seed, label, next_standard_normal, rng_from_seed};
use crate::signal::ImageSample;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// One layer's declarative configuration (no parameters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        filter_h: usize,
        filter_w: usize,
        in_channels: usize,
        num_filters: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    Lrn {
        channel_span: usize,
        bias_k: f64,
        scale_alpha: f64,
        exponent_beta: f64,
    },
    MaxPool {
        window_h: usize,
        window_w: usize,
        stride: usize,
    },
    Dense {
        in_features: usize,
        out_features: usize,
    },
    Dropout {
        rate: f64,
    },
    Softmax,
    Classification,
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Relu => "relu",
            LayerSpec::Lrn { .. } => "lrn",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Softmax => "softmax",
            LayerSpec::Classification => "classification",
        }
    }

    pub fn lrn_default() -> Self {
        let d = LrnSpec::default();
        LayerSpec::Lrn {
            channel_span: d.channel_span,
            bias_k: d.bias_k,
            scale_alpha: d.scale_alpha,
            exponent_beta: d.exponent_beta,
        }
    }
}

/// Ordered stages of layers plus the input geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    /// `[H, W, C]`
    pub input_shape: [usize; 3],
    pub stages: Vec<Vec<LayerSpec>>,
    pub num_classes: usize,
}

impl NetworkSpec {
    /// Layers of all stages flattened, in execution order.
    pub fn flat_layers(&self) -> Vec<&LayerSpec> {
        self.stages.iter().flatten().collect()
    }

    pub fn total_layers(&self) -> usize {
        self.stages.iter().map(Vec::len).sum()
    }

    /// Number of layers in every stage except the last — the default
    /// transplant boundary (transfer everything but the classifier stage).
    pub fn default_transfer_layers(&self) -> usize {
        self.total_layers() - self.stages.last().map_or(0, Vec::len)
    }

    /// Walks the layer chain and returns each layer's output shape, erroring
    /// on the first layer whose input does not compose.
    pub fn shape_walk(&self) -> Result<Vec<ValueShape>> {
        let mut shape = ValueShape::Spatial(
            self.input_shape[0],
            self.input_shape[1],
            self.input_shape[2],
        );
        let mut shapes = Vec::new();
        for (idx, layer) in self.flat_layers().iter().enumerate() {
            shape = layer_output_shape(layer, &shape).map_err(|e| {
                Error::Config(format!(
                    "layer {} ({}) does not compose: {}",
                    idx,
                    layer.kind_name(),
                    e
                ))
            })?;
            shapes.push(shape.clone());
        }
        match shapes.last() {
            Some(ValueShape::Flat(n)) if *n == self.num_classes => Ok(shapes),
            other => Err(Error::Config(format!(
                "network output shape {:?} does not match num_classes {}",
                other, self.num_classes
            ))),
        }
    }
}

/// Shape of a value flowing through the chain.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueShape {
    Spatial(usize, usize, usize),
    Flat(usize),
}

impl ValueShape {
    pub fn element_count(&self) -> usize {
        match self {
            ValueShape::Spatial(h, w, c) => h * w * c,
            ValueShape::Flat(n) => *n,
        }
    }
}

fn layer_output_shape(layer: &LayerSpec, input: &ValueShape) -> Result<ValueShape> {
    match layer {
        LayerSpec::Conv {
            filter_h,
            filter_w,
            in_channels,
            num_filters,
            stride,
            padding,
        } => match input {
            ValueShape::Spatial(h, w, c) => {
                if c != in_channels {
                    return Err(Error::ShapeMismatch(format!(
                        "input channels {c} vs conv in_channels {in_channels}"
                    )));
                }
                let oh = conv_output_extent(*h, *filter_h, *stride, *padding)
                    .ok_or_else(|| Error::Config("conv output height < 1".into()))?;
                let ow = conv_output_extent(*w, *filter_w, *stride, *padding)
                    .ok_or_else(|| Error::Config("conv output width < 1".into()))?;
                Ok(ValueShape::Spatial(oh, ow, *num_filters))
            }
            ValueShape::Flat(_) => Err(Error::ShapeMismatch("conv needs a spatial input".into())),
        },
        LayerSpec::Relu | LayerSpec::Dropout { .. } => Ok(input.clone()),
        LayerSpec::Lrn { .. } => match input {
            ValueShape::Spatial(..) => Ok(input.clone()),
            ValueShape::Flat(_) => Err(Error::ShapeMismatch("LRN needs a spatial input".into())),
        },
        LayerSpec::MaxPool {
            window_h,
            window_w,
            stride,
        } => match input {
            ValueShape::Spatial(h, w, c) => {
                if h < window_h || w < window_w {
                    return Err(Error::Config(format!(
                        "pool window {window_h}x{window_w} larger than input {h}x{w}"
                    )));
                }
                let oh = conv_output_extent(*h, *window_h, *stride, 0).unwrap();
                let ow = conv_output_extent(*w, *window_w, *stride, 0).unwrap();
                Ok(ValueShape::Spatial(oh, ow, *c))
            }
            ValueShape::Flat(_) => Err(Error::ShapeMismatch("pool needs a spatial input".into())),
        },
        LayerSpec::Dense {
            in_features,
            out_features,
        } => {
            if input.element_count() != *in_features {
                return Err(Error::ShapeMismatch(format!(
                    "flattened input {} vs dense in_features {}",
                    input.element_count(),
                    in_features
                )));
            }
            Ok(ValueShape::Flat(*out_features))
        }
        LayerSpec::Softmax => match input {
            ValueShape::Flat(n) if *n >= 2 => Ok(input.clone()),
            _ => Err(Error::ShapeMismatch(
                "softmax needs a flat input with >= 2 classes".into(),
            )),
        },
        LayerSpec::Classification => match input {
            ValueShape::Flat(_) => Ok(input.clone()),
            _ => Err(Error::ShapeMismatch(
                "classification needs a flat input".into(),
            )),
        },
    }
}

/// A materialized layer: spec plus its parameter tensors, if any.
#[derive(Debug, Clone)]
pub enum LayerState {
    Conv(ConvSpec),
    Relu,
    Lrn(LrnSpec),
    MaxPool(MaxPoolSpec),
    Dense(DenseSpec),
    Dropout { rate: f64 },
    Softmax,
    Classification,
}

impl LayerState {
    pub fn params(&self) -> Option<(&Tensor, &Tensor)> {
        match self {
            LayerState::Conv(s) => Some((&s.weights, &s.bias)),
            LayerState::Dense(s) => Some((&s.weights, &s.bias)),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut Tensor, &mut Tensor)> {
        match self {
            LayerState::Conv(s) => Some((&mut s.weights, &mut s.bias)),
            LayerState::Dense(s) => Some((&mut s.weights, &mut s.bias)),
            _ => None,
        }
    }
}

/// Per-layer parameter gradients aligned with the network's layer list.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Option<ParamGrads>>,
}

#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl Gradients {
    pub fn zeros_like(network: &Network) -> Self {
        let layers = network
            .layers
            .iter()
            .map(|l| {
                l.params().map(|(w, b)| ParamGrads {
                    weights: Tensor::zeros_like(w),
                    bias: Tensor::zeros_like(b),
                })
            })
            .collect();
        Self { layers }
    }

    pub fn add_assign(&mut self, other: &Gradients) -> Result<()> {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(a), Some(b)) = (a.as_mut(), b.as_ref()) {
                a.weights.add_assign(&b.weights)?;
                a.bias.add_assign(&b.bias)?;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.layers.iter_mut().flatten() {
            g.weights.scale(factor);
            g.bias.scale(factor);
        }
    }
}

/// Activations and dropout masks captured by a training-mode forward pass.
pub struct ForwardTrace {
    /// Input tensor of each layer, indexed by layer.
    pub layer_inputs: Vec<Tensor>,
    pub dropout_masks: Vec<Option<Tensor>>,
    pub probs: Tensor,
}

#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<LayerState>,
    mode: Mode,
}

/// Instantiates a network from its spec: He-scaled Gaussian weights for conv
/// and dense layers, zero biases, all seeded per layer.
pub fn build_network(spec: &NetworkSpec, init_seed: u64) -> Result<Network> {
    spec.shape_walk()?;
    let mut layers = Vec::new();
    for (idx, layer) in spec.flat_layers().into_iter().enumerate() {
        let state = match layer {
            LayerSpec::Conv {
                filter_h,
                filter_w,
                in_channels,
                num_filters,
                stride,
                padding,
            } => {
                let fan_in = filter_h * filter_w * in_channels;
                let weights = he_init(
                    &[*filter_h, *filter_w, *in_channels, *num_filters],
                    fan_in,
                    derive_seed(init_seed, &[label("init"), idx as u64]),
                );
                LayerState::Conv(ConvSpec::new(
                    *filter_h,
                    *filter_w,
                    *in_channels,
                    *num_filters,
                    *stride,
                    *padding,
                    weights,
                    Tensor::zeros(&[*num_filters]),
                )?)
            }
            LayerSpec::Relu => LayerState::Relu,
            LayerSpec::Lrn {
                channel_span,
                bias_k,
                scale_alpha,
                exponent_beta,
            } => LayerState::Lrn(LrnSpec::new(
                *channel_span,
                *bias_k,
                *scale_alpha,
                *exponent_beta,
            )?),
            LayerSpec::MaxPool {
                window_h,
                window_w,
                stride,
            } => LayerState::MaxPool(MaxPoolSpec::new(*window_h, *window_w, *stride)?),
            LayerSpec::Dense {
                in_features,
                out_features,
            } => {
                let weights = he_init(
                    &[*out_features, *in_features],
                    *in_features,
                    derive_seed(init_seed, &[label("init"), idx as u64]),
                );
                LayerState::Dense(DenseSpec::new(
                    *in_features,
                    *out_features,
                    weights,
                    Tensor::zeros(&[*out_features]),
                )?)
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(Error::Config(format!(
                        "layer {idx}: dropout rate {rate} out of [0, 1)"
                    )));
                }
                LayerState::Dropout { rate: *rate }
            }
            LayerSpec::Softmax => LayerState::Softmax,
            LayerSpec::Classification => LayerState::Classification,
        };
        layers.push(state);
    }
    Ok(Network {
        spec: spec.clone(),
        layers,
        mode: Mode::Eval,
    })
}

fn he_init(shape: &[usize], fan_in: usize, seed: u64) -> Tensor {
    let std = (2.0 / fan_in as f64).sqrt();
    let mut rng = rng_from_seed(seed);
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = std * next_standard_normal(&mut rng);
    }
    t
}

impl Network {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, idx: usize) -> &LayerState {
        &self.layers[idx]
    }

    pub fn layer_mut(&mut self, idx: usize) -> &mut LayerState {
        &mut self.layers[idx]
    }

    /// Indices of layers carrying parameters (conv and dense).
    pub fn parameterized_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.params().map(|_| i))
            .collect()
    }

    pub fn layer_parameter_count(&self, idx: usize) -> usize {
        self.layers[idx]
            .params()
            .map_or(0, |(w, b)| w.len() + b.len())
    }

    pub fn parameter_count(&self) -> usize {
        (0..self.layers.len())
            .map(|i| self.layer_parameter_count(i))
            .sum()
    }

    pub fn param_sum_squares(&self) -> f64 {
        self.layers
            .iter()
            .filter_map(|l| l.params())
            .map(|(w, b)| w.sum_squares() + b.sum_squares())
            .sum()
    }

    /// References to all parameter tensors, for the loss's L2 term.
    pub fn param_tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for l in &self.layers {
            if let Some((w, b)) = l.params() {
                out.push(w);
                out.push(b);
            }
        }
        out
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape() != self.spec.input_shape {
            return Err(Error::ShapeMismatch(format!(
                "network input shape {:?}, spec expects {:?}",
                input.shape(),
                self.spec.input_shape
            )));
        }
        Ok(())
    }

    /// Inference forward pass: dropout is the identity. Returns class
    /// probabilities summing to 1.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut value = input.clone();
        for layer in &self.layers {
            value = match layer {
                LayerState::Conv(s) => conv_forward(&value, s)?,
                LayerState::Relu => relu_forward(&value),
                LayerState::Lrn(s) => lrn_forward(&value, s)?,
                LayerState::MaxPool(s) => maxpool_forward(&value, s)?,
                LayerState::Dense(s) => dense_forward(&value, s)?,
                LayerState::Dropout { .. } => value,
                LayerState::Softmax => softmax_forward(&value)?,
                LayerState::Classification => value,
            };
        }
        Ok(value)
    }

    /// Training forward pass with active dropout; `sample_seed` drives every
    /// dropout layer's mask (per-layer seeds are derived from it).
    pub fn forward_train(&self, input: &Tensor, sample_seed: u64) -> Result<ForwardTrace> {
        self.check_input(input)?;
        let mut value = input.clone();
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut dropout_masks = vec![None; self.layers.len()];
        for (idx, layer) in self.layers.iter().enumerate() {
            layer_inputs.push(value.clone());
            value = match layer {
                LayerState::Conv(s) => conv_forward(&value, s)?,
                LayerState::Relu => relu_forward(&value),
                LayerState::Lrn(s) => lrn_forward(&value, s)?,
                LayerState::MaxPool(s) => maxpool_forward(&value, s)?,
                LayerState::Dense(s) => dense_forward(&value, s)?,
                LayerState::Dropout { rate } => {
                    let spec = DropoutSpec::new(
                        *rate,
                        Mode::Train,
                        derive_seed(sample_seed, &[label("mask"), idx as u64]),
                    )?;
                    let (out, mask) = dropout_forward(&value, &spec);
                    dropout_masks[idx] = Some(mask);
                    out
                }
                LayerState::Softmax => softmax_forward(&value)?,
                LayerState::Classification => value,
            };
        }
        Ok(ForwardTrace {
            layer_inputs,
            dropout_masks,
            probs: value,
        })
    }

    /// Backpropagates the fused softmax+cross-entropy gradient through the
    /// chain, returning parameter gradients for the data term only (no L2).
    pub fn backward(&self, trace: &ForwardTrace, label_idx: usize) -> Result<Gradients> {
        let softmax_idx = self
            .layers
            .iter()
            .position(|l| matches!(l, LayerState::Softmax))
            .ok_or_else(|| Error::Config("network has no softmax layer".into()))?;
        let mut grads = Gradients::zeros_like(self);
        let mut g = softmax_cross_entropy_grad(&trace.probs, label_idx)?;
        for idx in (0..softmax_idx).rev() {
            let input = &trace.layer_inputs[idx];
            g = match &self.layers[idx] {
                LayerState::Conv(s) => {
                    let (gx, gw, gb) = conv_backward(input, s, &g)?;
                    grads.layers[idx] = Some(ParamGrads {
                        weights: gw,
                        bias: gb,
                    });
                    gx
                }
                LayerState::Relu => relu_backward(input, &g)?,
                LayerState::Lrn(s) => lrn_backward(input, s, &g)?,
                LayerState::MaxPool(s) => maxpool_backward(input, s, &g)?,
                LayerState::Dense(s) => {
                    let (gx, gw, gb) = dense_backward(input, s, &g)?;
                    grads.layers[idx] = Some(ParamGrads {
                        weights: gw,
                        bias: gb,
                    });
                    gx
                }
                LayerState::Dropout { .. } => {
                    let mask = trace.dropout_masks[idx]
                        .as_ref()
                        .expect("dropout mask missing from trace");
                    dropout_backward(&g, mask)?
                }
                LayerState::Softmax | LayerState::Classification => unreachable!(),
            };
        }
        Ok(grads)
    }
}

/// Argmax class of the forward probabilities; ties break to the lowest index.
pub fn predict(network: &Network, input: &Tensor) -> Result<usize> {
    Ok(network.forward(input)?.argmax())
}

/// Fraction of samples whose prediction matches the label. The network must
/// be in eval mode.
pub fn evaluate_accuracy(network: &Network, dataset: &[ImageSample]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData(
            "evaluate_accuracy on an empty dataset".into(),
        ));
    }
    if network.mode() != Mode::Eval {
        return Err(Error::Config(
            "evaluate_accuracy requires the network in eval mode".into(),
        ));
    }
    let correct: usize = dataset
        .iter()
        .map(|s| {
            predict(network, &s.pixels).map(|p| usize::from(p == s.label))
        })
        .sum::<Result<usize>>()?;
    Ok(correct as f64 / dataset.len() as f64)
}

/// Runs an eval forward pass and writes each convolution stage's post-ReLU
/// activation as one tensor-record file in `out_dir`. Returns the paths.
pub fn dump_feature_maps(network: &Network, input: &Tensor, out_dir: &Path) -> Result<Vec<PathBuf>> {
    network.check_input(input)?;
    std::fs::create_dir_all(out_dir)?;
    let mut value = input.clone();
    let mut paths = Vec::new();
    let mut conv_counter = 0usize;
    let mut prev_was_conv = false;
    for layer in &network.layers {
        let this_is_conv = matches!(layer, LayerState::Conv(_));
        value = match layer {
            LayerState::Conv(s) => conv_forward(&value, s)?,
            LayerState::Relu => relu_forward(&value),
            LayerState::Lrn(s) => lrn_forward(&value, s)?,
            LayerState::MaxPool(s) => maxpool_forward(&value, s)?,
            LayerState::Dense(s) => dense_forward(&value, s)?,
            LayerState::Dropout { .. } => value,
            LayerState::Softmax => softmax_forward(&value)?,
            LayerState::Classification => value,
        };
        if prev_was_conv && matches!(layer, LayerState::Relu) {
            conv_counter += 1;
            let name = format!("featuremap_conv{conv_counter}");
            let path = out_dir.join(format!("{name}.tns"));
            checkpoint::write_tensor_file(&path, &name, &value, DType::F64)?;
            paths.push(path);
        }
        prev_was_conv = this_is_conv;
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mini_spec_composes_and_counts_layers() {
        let spec = spec_by_name("mini", 9).unwrap();
        assert_eq!(spec.total_layers(), 17);
        assert_eq!(spec.stages.len(), 5);
        let shapes = spec.shape_walk().unwrap();
        assert_eq!(*shapes.last().unwrap(), ValueShape::Flat(9));
    }

    #[test]
    fn build_is_deterministic() {
        let spec = spec_by_name("mini", 9).unwrap();
        let a = build_network(&spec, 7).unwrap();
        let b = build_network(&spec, 7).unwrap();
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            if let (Some((wa, ba)), Some((wb, bb))) = (la.params(), lb.params()) {
                assert_eq!(wa.data(), wb.data());
                assert_eq!(ba.data(), bb.data());
            }
        }
    }

    #[test]
    fn non_composing_spec_names_layer() {
        let spec = NetworkSpec {
            name: "broken".into(),
            input_shape: [8, 8, 3],
            stages: vec![vec![
                LayerSpec::Conv {
                    filter_h: 3,
                    filter_w: 3,
                    in_channels: 4, // wrong: input has 3 channels
                    num_filters: 2,
                    stride: 1,
                    padding: 0,
                },
                LayerSpec::Softmax,
            ]],
            num_classes: 2,
        };
        let err = spec.shape_walk().unwrap_err();
        assert!(err.to_string().contains("layer 0"), "{err}");
    }

    #[test]
    fn forward_probabilities_sum_to_one() {
        let spec = spec_by_name("mini", 9).unwrap();
        let net = build_network(&spec, 3).unwrap();
        let input = Tensor::filled(&[32, 32, 3], 0.25);
        let probs = net.forward(&input).unwrap();
        assert_eq!(probs.shape(), [9]);
        assert!((probs.sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eval_forward_is_repeatable() {
        let spec = spec_by_name("mini", 9).unwrap();
        let net = build_network(&spec, 3).unwrap();
        let input = Tensor::filled(&[32, 32, 3], 0.5);
        let a = net.forward(&input).unwrap();
        let b = net.forward(&input).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn predict_breaks_ties_low() {
        // the tie rule lives in Tensor::argmax, which predict delegates to
        let t = Tensor::from_vec(vec![6], vec![0.1, 0.3, 0.3, 0.1, 0.1, 0.1]).unwrap();
        assert_eq!(t.argmax(), 1);
    }
}
