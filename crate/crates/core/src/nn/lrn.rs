//! Local response normalization across channels.
//!
//! `b[h,w,c] = a[h,w,c] / (k + alpha * sum_{c' in span(c)} a[h,w,c']^2)^beta`
//! where the span is `channel_span` channels centered at `c`, clipped at the
//! channel edges.

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LrnSpec {
    /// Number of channels in the normalization span, odd.
    pub channel_span: usize,
    pub bias_k: f64,
    pub scale_alpha: f64,
    pub exponent_beta: f64,
}

impl Default for LrnSpec {
    fn default() -> Self {
        Self {
            channel_span: 5,
            bias_k: 2.0,
            scale_alpha: 1e-4,
            exponent_beta: 0.75,
        }
    }
}

impl LrnSpec {
    pub fn new(channel_span: usize, bias_k: f64, scale_alpha: f64, exponent_beta: f64) -> Result<Self> {
        if channel_span == 0 || channel_span % 2 == 0 {
            return Err(Error::Config(format!(
                "LRN channel span must be a positive odd integer, got {channel_span}"
            )));
        }
        Ok(Self {
            channel_span,
            bias_k,
            scale_alpha,
            exponent_beta,
        })
    }
}

fn check_rank3(input: &Tensor) -> Result<(usize, usize, usize)> {
    let shape = input.shape();
    if shape.len() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "LRN input must be rank 3 [H, W, C], got {shape:?}"
        )));
    }
    Ok((shape[0], shape[1], shape[2]))
}

pub fn lrn_forward(input: &Tensor, spec: &LrnSpec) -> Result<Tensor> {
    let (h, w, nc) = check_rank3(input)?;
    let half = spec.channel_span / 2;
    let x = input.data();
    let mut out = vec![0.0; x.len()];
    for pos in 0..h * w {
        let base = pos * nc;
        for c in 0..nc {
            let lo = c.saturating_sub(half);
            let hi = (c + half).min(nc - 1);
            let mut ss = 0.0;
            for cc in lo..=hi {
                ss += x[base + cc] * x[base + cc];
            }
            let denom = (spec.bias_k + spec.scale_alpha * ss).powf(spec.exponent_beta);
            out[base + c] = x[base + c] / denom;
        }
    }
    Tensor::from_vec(vec![h, w, nc], out)
}

/// Backward pass. For `S_c = k + alpha * sum(span)` the gradient is
/// `g_e * S_e^-beta - 2*alpha*beta * a_e * sum_{c in span(e)} g_c * a_c * S_c^(-beta-1)`
/// (the span relation is symmetric, so the second sum runs over the span
/// centered at `e`).
pub fn lrn_backward(input: &Tensor, spec: &LrnSpec, grad_out: &Tensor) -> Result<Tensor> {
    let (h, w, nc) = check_rank3(input)?;
    if grad_out.shape() != input.shape() {
        return Err(Error::ShapeMismatch(format!(
            "LRN grad_out shape {:?}, expected {:?}",
            grad_out.shape(),
            input.shape()
        )));
    }
    let half = spec.channel_span / 2;
    let x = input.data();
    let g = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    let mut s_pow = vec![0.0; nc]; // S_c^-beta per channel at the current pixel
    let mut s_pow1 = vec![0.0; nc]; // S_c^(-beta-1)
    for pos in 0..h * w {
        let base = pos * nc;
        for c in 0..nc {
            let lo = c.saturating_sub(half);
            let hi = (c + half).min(nc - 1);
            let mut ss = 0.0;
            for cc in lo..=hi {
                ss += x[base + cc] * x[base + cc];
            }
            let s = spec.bias_k + spec.scale_alpha * ss;
            s_pow[c] = s.powf(-spec.exponent_beta);
            s_pow1[c] = s.powf(-spec.exponent_beta - 1.0);
        }
        for e in 0..nc {
            let lo = e.saturating_sub(half);
            let hi = (e + half).min(nc - 1);
            let mut cross = 0.0;
            for c in lo..=hi {
                cross += g[base + c] * x[base + c] * s_pow1[c];
            }
            gx[base + e] = g[base + e] * s_pow[e]
                - 2.0 * spec.scale_alpha * spec.exponent_beta * x[base + e] * cross;
        }
    }
    Tensor::from_vec(vec![h, w, nc], gx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_zero_output() {
        let input = Tensor::zeros(&[2, 2, 8]);
        let out = lrn_forward(&input, &LrnSpec::default()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_active_channel_matches_scalar_formula() {
        // one channel at 1.0, neighbors zero: b = 1 / (2 + 1e-4)^0.75
        let mut input = Tensor::zeros(&[1, 1, 8]);
        input.set3(0, 0, 3, 1.0);
        let out = lrn_forward(&input, &LrnSpec::default()).unwrap();
        let expected = 1.0 / (2.0_f64 + 1e-4).powf(0.75);
        assert!((out.at3(0, 0, 3) - expected).abs() < 1e-15);
    }

    #[test]
    fn matches_elementwise_oracle() {
        use crate::rng::rng_from_seed;
        use rand::Rng;
        let mut rng = rng_from_seed(11);
        let (h, w, nc) = (3, 4, 7);
        let data: Vec<f64> = (0..h * w * nc).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let input = Tensor::from_vec(vec![h, w, nc], data).unwrap();
        let spec = LrnSpec::default();
        let out = lrn_forward(&input, &spec).unwrap();
        let half = spec.channel_span / 2;
        for hh in 0..h {
            for ww in 0..w {
                for c in 0..nc {
                    let mut ss = 0.0;
                    for cc in c.saturating_sub(half)..=(c + half).min(nc - 1) {
                        let a = input.at3(hh, ww, cc);
                        ss += a * a;
                    }
                    let expected = input.at3(hh, ww, c)
                        / (spec.bias_k + spec.scale_alpha * ss).powf(spec.exponent_beta);
                    assert!((out.at3(hh, ww, c) - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn even_span_rejected() {
        assert!(LrnSpec::new(4, 2.0, 1e-4, 0.75).is_err());
    }
}
