//! Central finite-difference verification of every layer's backward pass.
//!
//! Each check builds a scalar objective `f = sum(r * layer_forward(...))` with
//! a fixed random weighting `r`, computes the analytic gradient through the
//! layer's backward function, and compares against `(f(x+h) - f(x-h)) / 2h`
//! elementwise. The reported error is `|a - n| / max(1, |a| + |n|)` so that
//! near-zero gradients are judged on absolute error.

use crate::nn::{
    conv_backward, conv_forward, cross_entropy_loss, dense_backward, dense_forward,
    dropout_backward, dropout_forward, lrn_backward, lrn_forward, maxpool_backward,
    maxpool_forward, relu_backward, relu_forward, softmax_cross_entropy_grad, softmax_forward,
    ConvSpec, DenseSpec, DropoutSpec, LossConfig, LrnSpec, MaxPoolSpec, Mode, Tensor,
};
use crate::rng::rng_from_seed;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Relu,
    Lrn,
    MaxPool,
    Dense,
    Dropout,
    SoftmaxCrossEntropy,
}

impl LayerKind {
    pub const ALL: [LayerKind; 7] = [
        LayerKind::Conv,
        LayerKind::Relu,
        LayerKind::Lrn,
        LayerKind::MaxPool,
        LayerKind::Dense,
        LayerKind::Dropout,
        LayerKind::SoftmaxCrossEntropy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Relu => "relu",
            LayerKind::Lrn => "lrn",
            LayerKind::MaxPool => "maxpool",
            LayerKind::Dense => "dense",
            LayerKind::Dropout => "dropout",
            LayerKind::SoftmaxCrossEntropy => "softmax_cross_entropy",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerCheck {
    pub kind: LayerKind,
    pub cases: usize,
    pub max_rel_err: f64,
}

impl LayerCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Central finite-difference gradient of `f` at `x`.
pub fn finite_difference_grad(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let fp = f(&probe);
        probe[i] = orig - step;
        let fm = f(&probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * step);
    }
    grad
}

/// Max elementwise error between analytic and numeric gradients under the
/// module's error metric.
pub fn max_gradient_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / f64::max(1.0, a.abs() + n.abs()))
        .fold(0.0, f64::max)
}

fn compare(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    step: f64,
) -> f64 {
    let numeric = finite_difference_grad(f, x, step);
    max_gradient_error(analytic, &numeric)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Values bounded away from zero, for kinked activations.
fn off_kink(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            sign * rng.gen_range(0.2..2.0)
        })
        .collect()
}

/// Pairwise well-separated values, for max pooling (no ties, no argmax flips
/// under the finite-difference step).
fn spaced(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.into_iter()
        .map(|i| i as f64 * 0.37 + rng.gen_range(-0.001..0.001))
        .collect()
}

fn check_conv_case(rng: &mut ChaCha8Rng, step: f64) -> f64 {
    let h = rng.gen_range(3..=7);
    let w = rng.gen_range(3..=7);
    let c = rng.gen_range(1..=3);
    let k = rng.gen_range(1..=3);
    let fh = rng.gen_range(1..=3);
    let fw = rng.gen_range(1..=3);
    let stride = rng.gen_range(1..=2);
    let padding = rng.gen_range(0..=1);

    let x = uniform(rng, h * w * c, -1.0, 1.0);
    let wts = uniform(rng, fh * fw * c * k, -1.0, 1.0);
    let bias = uniform(rng, k, -0.5, 0.5);

    let make_spec = |wv: &[f64], bv: &[f64]| {
        ConvSpec::new(
            fh,
            fw,
            c,
            k,
            stride,
            padding,
            Tensor::from_vec(vec![fh, fw, c, k], wv.to_vec()).unwrap(),
            Tensor::from_vec(vec![k], bv.to_vec()).unwrap(),
        )
        .unwrap()
    };
    let spec = make_spec(&wts, &bias);
    let input = Tensor::from_vec(vec![h, w, c], x.clone()).unwrap();
    let out = conv_forward(&input, &spec).unwrap();
    let r = uniform(rng, out.len(), -1.0, 1.0);
    let grad_out = Tensor::from_vec(out.shape().to_vec(), r.clone()).unwrap();
    let (gx, gw, gb) = conv_backward(&input, &spec, &grad_out).unwrap();

    let objective = |input: &Tensor, spec: &ConvSpec| -> f64 {
        conv_forward(input, spec)
            .unwrap()
            .data()
            .iter()
            .zip(&r)
            .map(|(o, ri)| o * ri)
            .sum()
    };

    let mut err: f64 = 0.0;
    err = err.max(compare(
        &mut |xv| objective(&Tensor::from_vec(vec![h, w, c], xv.to_vec()).unwrap(), &spec),
        &x,
        gx.data(),
        step,
    ));
    err = err.max(compare(
        &mut |wv| objective(&input, &make_spec(wv, &bias)),
        &wts,
        gw.data(),
        step,
    ));
    err = err.max(compare(
        &mut |bv| objective(&input, &make_spec(&wts, bv)),
        &bias,
        gb.data(),
        step,
    ));
    err
}

fn check_relu_case(rng: &mut ChaCha8Rng, step: f64) -> f64 {
    let n = rng.gen_range(4..=48);
    let x = off_kink(rng, n);
    let r = uniform(rng, n, -1.0, 1.0);
    let input = Tensor::from_vec(vec![n], x.clone()).unwrap();
    let grad_out = Tensor::from_vec(vec![n], r.clone()).unwrap();
    let gx = relu_backward(&input, &grad_out).unwrap();
    compare(
        &mut |xv| {
            relu_forward(&Tensor::from_vec(vec![n], xv.to_vec()).unwrap())
                .data()
                .iter()
                .zip(&r)
                .map(|(o, ri)| o * ri)
                .sum()
        },
        &x,
        gx.data(),
        step,
    )
}

fn check_lrn_case(rng: &mut ChaCha8Rng, step: f64) -> f64 {
    let h = rng.gen_range(1..=4);
    let w = rng.gen_range(1..=4);
    let c = rng.gen_range(3..=8);
    let spec = LrnSpec::default();
    let x = uniform(rng, h * w * c, -2.0, 2.0);
    let r = uniform(rng, h * w * c, -1.0, 1.0);
    let input = Tensor::from_vec(vec![h, w, c], x.clone()).unwrap();
    let grad_out = Tensor::from_vec(vec![h, w, c], r.clone()).unwrap();
    let gx = lrn_backward(&input, &spec, &grad_out).unwrap();
    compare(
        &mut |xv| {
            lrn_forward(&Tensor::from_vec(vec![h, w, c], xv.to_vec()).unwrap(), &spec)
                .unwrap()
                .data()
                .iter()
                .zip(&r)
                .map(|(o, ri)| o * ri)
                .sum()
        },
        &x,
        gx.data(),
        step,
    )
}

fn check_maxpool_case(rng: &mut ChaCha8Rng, step: f64) -> f64 {
    let wh = rng.gen_range(2..=3);
    let ww = rng.gen_range(2..=3);
    let stride = rng.gen_range(1..=2);
    let h = rng.gen_range(wh..=8);
    let w = rng.gen_range(ww..=8);
    let c = rng.gen_range(1..=3);
    let spec = MaxPoolSpec::new(wh, ww, stride).unwrap();
    let x = spaced(rng, h * w * c);
    let input = Tensor::from_vec(vec![h, w, c], x.clone()).unwrap();
    let out = maxpool_forward(&input, &spec).unwrap();
    let r = uniform(rng, out.len(), -1.0, 1.0);
    let grad_out = Tensor::from_vec(out.shape().to_vec(), r.clone()).unwrap();
    let gx = maxpool_backward(&input, &spec, &grad_out).unwrap();
    compare(
        &mut |xv| {
            maxpool_forward(&Tensor::from_vec(vec![h, w, c], xv.to_vec()).unwrap(), &spec)
                .unwrap()
                .data()
                .iter()
                .zip(&r)
                .map(|(o, ri)| o * ri)
                .sum()
        },
        &x,
        gx.data(),
        step,
    )
}

fn check_dense_case(rng: &mut ChaCha8Rng, step: f64) -> f64 {
    let n_in = rng.gen_range(2..=10);
    let n_out = rng.gen_range(2..=6);
    let x = uniform(rng, n_in, -1.0, 1.0);
    let wts = uniform(rng, n_in * n_out, -1.0, 1.0);
    let bias = uniform(rng, n_out, -0.5, 0.5);
    let r = uniform(rng, n_out, -1.0, 1.0);

    let make_spec = |wv: &[f64], bv: &[f64]| {
        DenseSpec::new(
            n_in,
            n_out,
            Tensor::from_vec(vec![n_out, n_in], wv.to_vec()).unwrap(),
            Tensor::from_vec(vec![n_out], bv.to_vec()).unwrap(),
        )
        .unwrap()
    };
    let spec = make_spec(&wts, &bias);
    let input = Tensor::from_vec(vec![n_in], x.clone()).unwrap();
    let grad_out = Tensor::from_vec(vec![n_out], r.clone()).unwrap();
    let (gx, gw, gb) = dense_backward(&input, &spec, &grad_out).unwrap();

    let objective = |input: &Tensor, spec: &DenseSpec| -> f64 {
        dense_forward(input, spec)
            .unwrap()
            .data()
            .iter()
            .zip(&r)
            .map(|(o, ri)| o * ri)
            .sum()
    };

    let mut err: f64 = 0.0;
    err = err.max(compare(
        &mut |xv| objective(&Tensor::from_vec(vec![n_in], xv.to_vec()).unwrap(), &spec),
        &x,
        gx.data(),
        step,
    ));
    err = err.max(compare(
        &mut |wv| objective(&input, &make_spec(wv, &bias)),
        &wts,
        gw.data(),
        step,
    ));
    err = err.max(compare(
        &mut |bv| objective(&input, &make_spec(&wts, bv)),
        &bias,
        gb.data(),
        step,
    ));
    err
}

fn check_dropout_case(rng: &mut ChaCha8Rng, step: f64) -> f64 {
    let n = rng.gen_range(8..=64);
    let x = uniform(rng, n, -2.0, 2.0);
    let input = Tensor::from_vec(vec![n], x.clone()).unwrap();
    // Freeze one sampled mask and differentiate through the masked product.
    let spec = DropoutSpec::new(0.5, Mode::Train, rng.gen()).unwrap();
    let (_, mask) = dropout_forward(&input, &spec);
    let r = uniform(rng, n, -1.0, 1.0);
    let grad_out = Tensor::from_vec(vec![n], r.clone()).unwrap();
    let gx = dropout_backward(&grad_out, &mask).unwrap();
    compare(
        &mut |xv| {
            xv.iter()
                .zip(mask.data())
                .zip(&r)
                .map(|((xi, mi), ri)| xi * mi * ri)
                .sum()
        },
        &x,
        gx.data(),
        step,
    )
}

fn check_softmax_ce_case(rng: &mut ChaCha8Rng, step: f64) -> f64 {
    let c = rng.gen_range(2..=9);
    let z = uniform(rng, c, -3.0, 3.0);
    let label = rng.gen_range(0..c);
    let config = LossConfig::new(0.0, c).unwrap();
    let probs = softmax_forward(&Tensor::from_vec(vec![c], z.clone()).unwrap()).unwrap();
    let analytic = softmax_cross_entropy_grad(&probs, label).unwrap();
    compare(
        &mut |zv| {
            let p = softmax_forward(&Tensor::from_vec(vec![c], zv.to_vec()).unwrap()).unwrap();
            cross_entropy_loss(&p, label, &[], &config).unwrap()
        },
        &z,
        analytic.data(),
        step,
    )
}

/// Runs `cases` random-shape finite-difference checks for one layer kind.
pub fn check_layer(kind: LayerKind, cases: usize, step: f64, seed: u64) -> LayerCheck {
    let mut rng = rng_from_seed(seed);
    let mut max_rel_err: f64 = 0.0;
    for _ in 0..cases {
        let err = match kind {
            LayerKind::Conv => check_conv_case(&mut rng, step),
            LayerKind::Relu => check_relu_case(&mut rng, step),
            LayerKind::Lrn => check_lrn_case(&mut rng, step),
            LayerKind::MaxPool => check_maxpool_case(&mut rng, step),
            LayerKind::Dense => check_dense_case(&mut rng, step),
            LayerKind::Dropout => check_dropout_case(&mut rng, step),
            LayerKind::SoftmaxCrossEntropy => check_softmax_ce_case(&mut rng, step),
        };
        max_rel_err = max_rel_err.max(err);
    }
    LayerCheck {
        kind,
        cases,
        max_rel_err,
    }
}

/// Checks every layer kind; the standard suite behind `gradcheck` and the
/// gradient acceptance criterion.
pub fn check_all_layers(cases: usize, step: f64, seed: u64) -> Vec<LayerCheck> {
    LayerKind::ALL
        .iter()
        .enumerate()
        .map(|(i, &kind)| check_layer(kind, cases, step, seed.wrapping_add(i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_difference_of_quadratic() {
        let mut f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let x = [1.0, -2.0, 0.5];
        let g = finite_difference_grad(&mut f, &x, 1e-5);
        let expected = [2.0, -4.0, 1.0];
        assert!(max_gradient_error(&expected, &g) < 1e-9);
    }
}
