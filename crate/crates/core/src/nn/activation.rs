//! ReLU and softmax.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Elementwise `max(0, x)`.
pub fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if input.shape() != grad_out.shape() {
        return Err(Error::ShapeMismatch(format!(
            "relu grad_out shape {:?} vs input {:?}",
            grad_out.shape(),
            input.shape()
        )));
    }
    let mut gx = grad_out.clone();
    for (g, &x) in gx.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
    Ok(gx)
}

/// Numerically stable softmax over a rank-1 logit vector.
pub fn softmax_forward(logits: &Tensor) -> Result<Tensor> {
    if logits.shape().len() != 1 || logits.len() < 2 {
        return Err(Error::ShapeMismatch(format!(
            "softmax expects a rank-1 tensor with >= 2 classes, got {:?}",
            logits.shape()
        )));
    }
    let max = logits.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.clone();
    let mut sum = 0.0;
    for v in out.data_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in out.data_mut() {
        *v /= sum;
    }
    Ok(out)
}
