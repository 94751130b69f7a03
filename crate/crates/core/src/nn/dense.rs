//! Fully connected layer: `y = W x + b` over the flattened input.

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DenseSpec {
    pub in_features: usize,
    pub out_features: usize,
    /// `[out_features, in_features]`
    pub weights: Tensor,
    /// `[out_features]`
    pub bias: Tensor,
}

impl DenseSpec {
    pub fn new(in_features: usize, out_features: usize, weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.shape() != [out_features, in_features] {
            return Err(Error::ShapeMismatch(format!(
                "dense weights shape {:?}, expected [{}, {}]",
                weights.shape(),
                out_features,
                in_features
            )));
        }
        if bias.shape() != [out_features] {
            return Err(Error::ShapeMismatch(format!(
                "dense bias shape {:?}, expected [{}]",
                bias.shape(),
                out_features
            )));
        }
        Ok(Self {
            in_features,
            out_features,
            weights,
            bias,
        })
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.len() != self.in_features {
            return Err(Error::ShapeMismatch(format!(
                "dense input has {} elements, spec expects {}",
                input.len(),
                self.in_features
            )));
        }
        Ok(())
    }
}

/// The input may have any rank; it is consumed flattened in row-major order.
pub fn dense_forward(input: &Tensor, spec: &DenseSpec) -> Result<Tensor> {
    spec.check_input(input)?;
    let x = input.data();
    let w = spec.weights.data();
    let mut out = spec.bias.data().to_vec();
    for (o, acc) in out.iter_mut().enumerate() {
        let row = &w[o * spec.in_features..(o + 1) * spec.in_features];
        let mut dot = 0.0;
        for (wv, xv) in row.iter().zip(x) {
            dot += wv * xv;
        }
        *acc += dot;
    }
    Tensor::from_vec(vec![spec.out_features], out)
}

/// Returns `(grad_input, grad_weights, grad_bias)`; `grad_input` carries the
/// input's original shape so it chains back into spatial layers.
pub fn dense_backward(
    input: &Tensor,
    spec: &DenseSpec,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    spec.check_input(input)?;
    if grad_out.len() != spec.out_features {
        return Err(Error::ShapeMismatch(format!(
            "dense grad_out has {} elements, expected {}",
            grad_out.len(),
            spec.out_features
        )));
    }
    let x = input.data();
    let w = spec.weights.data();
    let g = grad_out.data();
    let mut gx = vec![0.0; spec.in_features];
    let mut gw = vec![0.0; w.len()];
    for o in 0..spec.out_features {
        let go = g[o];
        let row = &w[o * spec.in_features..(o + 1) * spec.in_features];
        let grow = &mut gw[o * spec.in_features..(o + 1) * spec.in_features];
        if go == 0.0 {
            continue;
        }
        for i in 0..spec.in_features {
            gx[i] += row[i] * go;
            grow[i] = x[i] * go;
        }
    }
    Ok((
        Tensor::from_vec(input.shape().to_vec(), gx)?,
        Tensor::from_vec(vec![spec.out_features, spec.in_features], gw)?,
        Tensor::from_vec(vec![spec.out_features], g.to_vec())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_input_through() {
        let n = 4;
        let mut w = Tensor::zeros(&[n, n]);
        for i in 0..n {
            w.data_mut()[i * n + i] = 1.0;
        }
        let spec = DenseSpec::new(n, n, w, Tensor::zeros(&[n])).unwrap();
        let x = Tensor::from_vec(vec![n], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let y = dense_forward(&x, &spec).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn zero_weights_yield_bias() {
        let spec = DenseSpec::new(
            2,
            3,
            Tensor::zeros(&[3, 2]),
            Tensor::from_vec(vec![3], vec![1.0, 2.0, 3.0]).unwrap(),
        )
        .unwrap();
        let x = Tensor::from_vec(vec![2], vec![9.0, -9.0]).unwrap();
        let y = dense_forward(&x, &spec).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn matches_row_dot_product_oracle() {
        use crate::rng::rng_from_seed;
        use rand::Rng;
        let mut rng = rng_from_seed(3);
        let (n_in, n_out) = (7, 5);
        let w: Vec<f64> = (0..n_in * n_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec = DenseSpec::new(
            n_in,
            n_out,
            Tensor::from_vec(vec![n_out, n_in], w.clone()).unwrap(),
            Tensor::from_vec(vec![n_out], b.clone()).unwrap(),
        )
        .unwrap();
        let y = dense_forward(&Tensor::from_vec(vec![n_in], x.clone()).unwrap(), &spec).unwrap();
        for o in 0..n_out {
            let mut expected = b[o];
            for i in 0..n_in {
                expected += w[o * n_in + i] * x[i];
            }
            assert!((y.data()[o] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_is_error() {
        let spec = DenseSpec::new(3, 2, Tensor::zeros(&[2, 3]), Tensor::zeros(&[2])).unwrap();
        let x = Tensor::from_vec(vec![4], vec![0.0; 4]).unwrap();
        assert!(dense_forward(&x, &spec).is_err());
    }
}
