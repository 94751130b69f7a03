//! Max pooling over spatial windows, per channel.

use super::conv::conv_output_extent;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MaxPoolSpec {
    pub window_h: usize,
    pub window_w: usize,
    pub stride: usize,
}

impl MaxPoolSpec {
    pub fn new(window_h: usize, window_w: usize, stride: usize) -> Result<Self> {
        if window_h == 0 || window_w == 0 || stride == 0 {
            return Err(Error::Config("pool window and stride must be >= 1".into()));
        }
        Ok(Self {
            window_h,
            window_w,
            stride,
        })
    }

    fn output_dims(&self, input: &Tensor) -> Result<(usize, usize, usize, usize, usize)> {
        let shape = input.shape();
        if shape.len() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "pool input must be rank 3 [H, W, C], got {shape:?}"
            )));
        }
        let (h, w, c) = (shape[0], shape[1], shape[2]);
        if h < self.window_h || w < self.window_w {
            return Err(Error::Config(format!(
                "pool window {}x{} larger than input {}x{}",
                self.window_h, self.window_w, h, w
            )));
        }
        let out_h = conv_output_extent(h, self.window_h, self.stride, 0).unwrap();
        let out_w = conv_output_extent(w, self.window_w, self.stride, 0).unwrap();
        Ok((h, w, c, out_h, out_w))
    }
}

/// Downsamples each window to its maximum value, channel by channel.
pub fn maxpool_forward(input: &Tensor, spec: &MaxPoolSpec) -> Result<Tensor> {
    let (_, in_w, nc, out_h, out_w) = spec.output_dims(input)?;
    let x = input.data();
    let mut out = vec![f64::NEG_INFINITY; out_h * out_w * nc];
    for oh in 0..out_h {
        for ow in 0..out_w {
            let out_base = (oh * out_w + ow) * nc;
            for i in 0..spec.window_h {
                let ih = oh * spec.stride + i;
                for j in 0..spec.window_w {
                    let iw = ow * spec.stride + j;
                    let x_base = (ih * in_w + iw) * nc;
                    for c in 0..nc {
                        let v = x[x_base + c];
                        if v > out[out_base + c] {
                            out[out_base + c] = v;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(vec![out_h, out_w, nc], out)
}

/// Routes each output gradient to the first (row-major) maximum position of
/// its source window.
pub fn maxpool_backward(input: &Tensor, spec: &MaxPoolSpec, grad_out: &Tensor) -> Result<Tensor> {
    let (_, in_w, nc, out_h, out_w) = spec.output_dims(input)?;
    if grad_out.shape() != [out_h, out_w, nc] {
        return Err(Error::ShapeMismatch(format!(
            "pool grad_out shape {:?}, expected [{}, {}, {}]",
            grad_out.shape(),
            out_h,
            out_w,
            nc
        )));
    }
    let x = input.data();
    let g = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    for oh in 0..out_h {
        for ow in 0..out_w {
            let g_base = (oh * out_w + ow) * nc;
            for c in 0..nc {
                let mut best_idx = 0;
                let mut best = f64::NEG_INFINITY;
                for i in 0..spec.window_h {
                    let ih = oh * spec.stride + i;
                    for j in 0..spec.window_w {
                        let iw = ow * spec.stride + j;
                        let idx = (ih * in_w + iw) * nc + c;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                gx[best_idx] += g[g_base + c];
            }
        }
    }
    Tensor::from_vec(input.shape().to_vec(), gx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrant_maxima() {
        let data: Vec<f64> = (1..=16).map(f64::from).collect();
        let input = Tensor::from_vec(vec![4, 4, 1], data).unwrap();
        let spec = MaxPoolSpec::new(2, 2, 2).unwrap();
        let out = maxpool_forward(&input, &spec).unwrap();
        assert_eq!(out.shape(), [2, 2, 1]);
        assert_eq!(out.data(), &[6.0, 8.0, 14.0, 16.0]);
    }

    #[test]
    fn constant_input_constant_output() {
        let input = Tensor::filled(&[5, 5, 3], 2.5);
        let spec = MaxPoolSpec::new(3, 3, 2).unwrap();
        let out = maxpool_forward(&input, &spec).unwrap();
        assert_eq!(out.shape(), [2, 2, 3]);
        assert!(out.data().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn window_larger_than_input_is_config_error() {
        let input = Tensor::filled(&[2, 2, 1], 1.0);
        let spec = MaxPoolSpec::new(3, 3, 2).unwrap();
        assert!(maxpool_forward(&input, &spec).is_err());
    }

    #[test]
    fn backward_routes_to_max() {
        let input = Tensor::from_vec(vec![2, 2, 1], vec![1.0, 4.0, 3.0, 2.0]).unwrap();
        let spec = MaxPoolSpec::new(2, 2, 2).unwrap();
        let g = Tensor::from_vec(vec![1, 1, 1], vec![7.0]).unwrap();
        let gx = maxpool_backward(&input, &spec, &g).unwrap();
        assert_eq!(gx.data(), &[0.0, 7.0, 0.0, 0.0]);
    }
}
