//! 2D convolution (cross-correlation) over `[H, W, C]` inputs with stride and
//! zero padding, plus its backward pass.
//!
//! Weight layout is `[filter_h, filter_w, in_channels, num_filters]` so the
//! innermost loop runs over filters with unit stride in both the weight and
//! output buffers.

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ConvSpec {
    pub filter_h: usize,
    pub filter_w: usize,
    pub in_channels: usize,
    pub num_filters: usize,
    pub stride: usize,
    pub padding: usize,
    /// `[filter_h, filter_w, in_channels, num_filters]`
    pub weights: Tensor,
    /// `[num_filters]`
    pub bias: Tensor,
}

impl ConvSpec {
    pub fn new(
        filter_h: usize,
        filter_w: usize,
        in_channels: usize,
        num_filters: usize,
        stride: usize,
        padding: usize,
        weights: Tensor,
        bias: Tensor,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Config("conv stride must be >= 1".into()));
        }
        let expected = [filter_h, filter_w, in_channels, num_filters];
        if weights.shape() != expected {
            return Err(Error::ShapeMismatch(format!(
                "conv weights shape {:?}, expected {:?}",
                weights.shape(),
                expected
            )));
        }
        if bias.shape() != [num_filters] {
            return Err(Error::ShapeMismatch(format!(
                "conv bias shape {:?}, expected [{}]",
                bias.shape(),
                num_filters
            )));
        }
        Ok(Self {
            filter_h,
            filter_w,
            in_channels,
            num_filters,
            stride,
            padding,
            weights,
            bias,
        })
    }

    fn check_input(&self, input: &Tensor) -> Result<(usize, usize, usize, usize)> {
        let shape = input.shape();
        if shape.len() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "conv input must be rank 3 [H, W, C], got {shape:?}"
            )));
        }
        let (h, w, c) = (shape[0], shape[1], shape[2]);
        if c != self.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "conv input has {} channels, spec expects {}",
                c, self.in_channels
            )));
        }
        let out_h = conv_output_extent(h, self.filter_h, self.stride, self.padding)
            .ok_or_else(|| {
                Error::Config(format!(
                    "conv output height < 1 for input height {} (filter {}, stride {}, padding {})",
                    h, self.filter_h, self.stride, self.padding
                ))
            })?;
        let out_w = conv_output_extent(w, self.filter_w, self.stride, self.padding)
            .ok_or_else(|| {
                Error::Config(format!(
                    "conv output width < 1 for input width {} (filter {}, stride {}, padding {})",
                    w, self.filter_w, self.stride, self.padding
                ))
            })?;
        Ok((h, w, out_h, out_w))
    }
}

/// Output extent along one axis: `floor((in + 2*padding - filter)/stride) + 1`,
/// or `None` when no window fits.
pub fn conv_output_extent(
    input: usize,
    filter: usize,
    stride: usize,
    padding: usize,
) -> Option<usize> {
    let padded = input + 2 * padding;
    if padded < filter {
        return None;
    }
    Some((padded - filter) / stride + 1)
}

/// Convolves `input [H, W, C]` into `[H', W', K]`: each output element is the
/// dot product of one filter with the zero-padded input window at the strided
/// location, plus that filter's bias.
pub fn conv_forward(input: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let (in_h, in_w, out_h, out_w) = spec.check_input(input)?;
    let (fh, fw, nc, nk) = (
        spec.filter_h,
        spec.filter_w,
        spec.in_channels,
        spec.num_filters,
    );
    let x = input.data();
    let w = spec.weights.data();
    let bias = spec.bias.data();

    let mut out = vec![0.0; out_h * out_w * nk];
    for oh in 0..out_h {
        for ow in 0..out_w {
            let out_base = (oh * out_w + ow) * nk;
            out[out_base..out_base + nk].copy_from_slice(bias);
            // top-left corner of the window in padded coordinates
            let h0 = oh * spec.stride;
            let w0 = ow * spec.stride;
            for i in 0..fh {
                let ih = h0 + i;
                if ih < spec.padding || ih >= in_h + spec.padding {
                    continue;
                }
                let ih = ih - spec.padding;
                for j in 0..fw {
                    let iw = w0 + j;
                    if iw < spec.padding || iw >= in_w + spec.padding {
                        continue;
                    }
                    let iw = iw - spec.padding;
                    let x_base = (ih * in_w + iw) * nc;
                    let w_base = (i * fw + j) * nc * nk;
                    for c in 0..nc {
                        let xv = x[x_base + c];
                        if xv == 0.0 {
                            continue;
                        }
                        let wrow = &w[w_base + c * nk..w_base + (c + 1) * nk];
                        let orow = &mut out[out_base..out_base + nk];
                        for k in 0..nk {
                            orow[k] += xv * wrow[k];
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(vec![out_h, out_w, nk], out)
}

/// Gradients of a scalar objective w.r.t. conv input, weights, and bias given
/// the objective's gradient at the conv output.
pub fn conv_backward(
    input: &Tensor,
    spec: &ConvSpec,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (in_h, in_w, out_h, out_w) = spec.check_input(input)?;
    let (fh, fw, nc, nk) = (
        spec.filter_h,
        spec.filter_w,
        spec.in_channels,
        spec.num_filters,
    );
    if grad_out.shape() != [out_h, out_w, nk] {
        return Err(Error::ShapeMismatch(format!(
            "conv grad_out shape {:?}, expected [{}, {}, {}]",
            grad_out.shape(),
            out_h,
            out_w,
            nk
        )));
    }
    let x = input.data();
    let w = spec.weights.data();
    let g = grad_out.data();

    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; nk];

    for oh in 0..out_h {
        for ow in 0..out_w {
            let g_base = (oh * out_w + ow) * nk;
            let grow = &g[g_base..g_base + nk];
            for k in 0..nk {
                gb[k] += grow[k];
            }
            let h0 = oh * spec.stride;
            let w0 = ow * spec.stride;
            for i in 0..fh {
                let ih = h0 + i;
                if ih < spec.padding || ih >= in_h + spec.padding {
                    continue;
                }
                let ih = ih - spec.padding;
                for j in 0..fw {
                    let iw = w0 + j;
                    if iw < spec.padding || iw >= in_w + spec.padding {
                        continue;
                    }
                    let iw = iw - spec.padding;
                    let x_base = (ih * in_w + iw) * nc;
                    let w_base = (i * fw + j) * nc * nk;
                    for c in 0..nc {
                        let xv = x[x_base + c];
                        let wrow = &w[w_base + c * nk..w_base + (c + 1) * nk];
                        let gwrow = &mut gw[w_base + c * nk..w_base + (c + 1) * nk];
                        let mut acc = 0.0;
                        for k in 0..nk {
                            gwrow[k] += xv * grow[k];
                            acc += wrow[k] * grow[k];
                        }
                        gx[x_base + c] += acc;
                    }
                }
            }
        }
    }
    Ok((
        Tensor::from_vec(vec![in_h, in_w, nc], gx)?,
        Tensor::from_vec(vec![fh, fw, nc, nk], gw)?,
        Tensor::from_vec(vec![nk], gb)?,
    ))
}
