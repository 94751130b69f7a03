//! Cross-entropy loss with L2 weight decay, and the fused
//! softmax-plus-cross-entropy logit gradient.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Probabilities below this floor are clamped before the log so confident
/// wrong predictions keep the loss finite.
pub const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    /// L2 coefficient; the penalty added to the data term is
    /// `gamma * sum(theta^2)` over all parameters.
    pub gamma: f64,
    pub num_classes: usize,
}

impl LossConfig {
    pub fn new(gamma: f64, num_classes: usize) -> Result<Self> {
        if gamma < 0.0 {
            return Err(Error::Config(format!("gamma must be >= 0, got {gamma}")));
        }
        if num_classes < 2 {
            return Err(Error::Config(format!(
                "num_classes must be >= 2, got {num_classes}"
            )));
        }
        Ok(Self { gamma, num_classes })
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 5e-4,
            num_classes: 9,
        }
    }
}

/// `-ln(p[label]) + gamma * sum(theta^2)` over all parameter tensors.
pub fn cross_entropy_loss(
    probabilities: &Tensor,
    label: usize,
    params: &[&Tensor],
    config: &LossConfig,
) -> Result<f64> {
    if probabilities.len() != config.num_classes {
        return Err(Error::ShapeMismatch(format!(
            "probabilities length {} vs num_classes {}",
            probabilities.len(),
            config.num_classes
        )));
    }
    if label >= config.num_classes {
        return Err(Error::Config(format!(
            "label {} out of range for {} classes",
            label, config.num_classes
        )));
    }
    let p = probabilities.data()[label].max(PROB_FLOOR);
    let reg: f64 = params.iter().map(|t| t.sum_squares()).sum();
    Ok(-p.ln() + config.gamma * reg)
}

/// Gradient of cross-entropy w.r.t. the logits feeding the softmax:
/// `softmax(z) - onehot(label)`.
pub fn softmax_cross_entropy_grad(probabilities: &Tensor, label: usize) -> Result<Tensor> {
    if label >= probabilities.len() {
        return Err(Error::Config(format!(
            "label {} out of range for {} probabilities",
            label,
            probabilities.len()
        )));
    }
    let mut g = probabilities.clone();
    g.data_mut()[label] -= 1.0;
    Ok(g)
}
