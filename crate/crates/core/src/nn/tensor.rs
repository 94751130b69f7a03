//! Dense n-dimensional arrays of `f64` in row-major order.
//!
//! This is the universal value/gradient carrier for the whole engine. All
//! arithmetic runs at 64-bit; checkpoints may downcast to 32-bit storage but
//! in-memory computation never does.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Creates a tensor from a shape and row-major data.
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::ShapeMismatch("tensor shape must be non-empty".into()));
        }
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch(format!(
                "tensor dimensions must be >= 1, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match shape {:?} (= {} elements)",
                data.len(),
                shape,
                expected
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Self::zeros(other.shape())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterprets the same data under a new shape with equal element count.
    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() || shape.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {} elements to {:?}",
                self.data.len(),
                shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Element at `[h, w, c]` of a rank-3 tensor.
    #[inline]
    pub fn at3(&self, h: usize, w: usize, c: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 3);
        let (nw, nc) = (self.shape[1], self.shape[2]);
        self.data[(h * nw + w) * nc + c]
    }

    #[inline]
    pub fn set3(&mut self, h: usize, w: usize, c: usize, v: f64) {
        debug_assert_eq!(self.shape.len(), 3);
        let (nw, nc) = (self.shape[1], self.shape[2]);
        self.data[(h * nw + w) * nc + c] = v;
    }

    /// Element at `[i, j, k, l]` of a rank-4 tensor.
    #[inline]
    pub fn at4(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 4);
        let (n1, n2, n3) = (self.shape[1], self.shape[2], self.shape[3]);
        self.data[((i * n1 + j) * n2 + k) * n3 + l]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Index of the maximum element; ties broken by the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    /// In-place `self += other`, shapes must match.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "add_assign {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
