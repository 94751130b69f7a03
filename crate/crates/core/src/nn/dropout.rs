//! Inverted dropout with an explicit seeded mask.
//!
//! Train mode keeps each element with probability `1 - rate` and scales kept
//! elements by `1/(1 - rate)`; eval mode is the identity. The returned mask
//! holds the per-element multipliers so the backward pass reuses the exact
//! draw.

use super::tensor::Tensor;
use super::Mode;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct DropoutSpec {
    /// Drop probability, in `[0, 1)`.
    pub rate: f64,
    pub mode: Mode,
    pub mask_seed: u64,
}

impl DropoutSpec {
    pub fn new(rate: f64, mode: Mode, mask_seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Self {
            rate,
            mode,
            mask_seed,
        })
    }
}

/// Returns `(output, mask)` with `output = input * mask` elementwise.
pub fn dropout_forward(input: &Tensor, spec: &DropoutSpec) -> (Tensor, Tensor) {
    if spec.mode == Mode::Eval || spec.rate == 0.0 {
        return (input.clone(), Tensor::filled(input.shape(), 1.0));
    }
    let keep = 1.0 - spec.rate;
    let scale = 1.0 / keep;
    let mut rng = rng_from_seed(spec.mask_seed);
    let mut mask = Tensor::zeros_like(input);
    let mut out = input.clone();
    for (m, o) in mask.data_mut().iter_mut().zip(out.data_mut()) {
        if rng.gen::<f64>() < keep {
            *m = scale;
            *o *= scale;
        } else {
            *m = 0.0;
            *o = 0.0;
        }
    }
    (out, mask)
}

pub fn dropout_backward(grad_out: &Tensor, mask: &Tensor) -> Result<Tensor> {
    if grad_out.shape() != mask.shape() {
        return Err(Error::ShapeMismatch(format!(
            "dropout grad_out shape {:?} vs mask {:?}",
            grad_out.shape(),
            mask.shape()
        )));
    }
    let mut gx = grad_out.clone();
    for (g, m) in gx.data_mut().iter_mut().zip(mask.data()) {
        *g *= *m;
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_mode_is_identity() {
        let x = Tensor::from_vec(vec![5], vec![1.0, -2.0, 3.0, 0.0, 9.9]).unwrap();
        let spec = DropoutSpec::new(0.5, Mode::Eval, 1).unwrap();
        let (y, mask) = dropout_forward(&x, &spec);
        assert_eq!(y.data(), x.data());
        assert!(mask.data().iter().all(|&m| m == 1.0));
    }

    #[test]
    fn zero_rate_is_identity_in_train() {
        let x = Tensor::from_vec(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let spec = DropoutSpec::new(0.0, Mode::Train, 7).unwrap();
        let (y, _) = dropout_forward(&x, &spec);
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn kept_fraction_and_mean_are_preserved() {
        let n = 10_000;
        let x = Tensor::filled(&[n], 1.0);
        let spec = DropoutSpec::new(0.5, Mode::Train, 42).unwrap();
        let (y, mask) = dropout_forward(&x, &spec);
        let kept = mask.data().iter().filter(|&&m| m != 0.0).count() as f64 / n as f64;
        assert!((0.47..=0.53).contains(&kept), "kept fraction {kept}");
        let mean_out = y.sum() / n as f64;
        assert!((mean_out - 1.0).abs() < 0.05, "mean {mean_out}");
    }

    #[test]
    fn same_seed_same_mask() {
        let x = Tensor::filled(&[64], 1.0);
        let spec = DropoutSpec::new(0.5, Mode::Train, 9).unwrap();
        let (_, m1) = dropout_forward(&x, &spec);
        let (_, m2) = dropout_forward(&x, &spec);
        assert_eq!(m1.data(), m2.data());
    }
}
