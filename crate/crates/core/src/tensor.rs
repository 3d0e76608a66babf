//! Dense row-major f64 tensors.
//!
//! Every numeric quantity in the crate (samples, latents, logits, gradients,
//! optimizer moments) is carried by [`Tensor`]. Shapes are explicit and every
//! operation validates them; extents must be positive.

use crate::error::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a shape and row-major data.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::shape("tensor", format!("extents must be positive, got {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(Error::shape(
                "tensor",
                format!("data length {} does not match shape {:?} ({} elements)", data.len(), shape, numel),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        assert!(!shape.is_empty() && numel > 0, "extents must be positive");
        Tensor { shape, data: vec![0.0; numel] }
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Self {
        let mut t = Tensor::zeros(shape);
        t.data.iter_mut().for_each(|v| *v = value);
        t
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
    }

    /// One-hot encodes `labels` into a `labels.len() x classes` matrix.
    pub fn one_hot(labels: &[usize], classes: usize) -> Result<Self> {
        let mut t = Tensor::zeros(vec![labels.len(), classes]);
        for (row, &label) in labels.iter().enumerate() {
            if label >= classes {
                return Err(Error::LabelOutOfRange { label, classes });
            }
            t.data[row * classes + label] = 1.0;
        }
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Row count of a matrix, or 1 for a vector.
    pub fn rows(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[0]
        } else {
            1
        }
    }

    /// Column count of a matrix, or the length of a vector.
    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.data[row * c..(row + 1) * c]
    }

    /// Builds a matrix out of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::shape("tensor", "from_rows needs at least one row"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("tensor", "rows have unequal lengths"));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend_from_slice(r);
        }
        Tensor::new(vec![rows.len(), cols], data)
    }

    /// Keeps the first `n` rows of a matrix.
    pub fn take_rows(&self, n: usize) -> Result<Self> {
        if self.shape.len() != 2 || n == 0 || n > self.rows() {
            return Err(Error::shape(
                "take_rows",
                format!("cannot take {n} rows from shape {:?}", self.shape),
            ));
        }
        Tensor::new(vec![n, self.cols()], self.data[..n * self.cols()].to_vec())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }
}

/// Xavier (Glorot) uniform initialization: values drawn uniformly from
/// `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<R: Rng>(fan_in: usize, fan_out: usize, shape: Vec<usize>, rng: &mut R) -> Result<Tensor> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidArg(format!(
            "xavier_uniform requires positive fan sizes, got fan_in={fan_in}, fan_out={fan_out}"
        )));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.gen_range(-bound..=bound);
    }
    Ok(t)
}
