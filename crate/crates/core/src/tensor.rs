//! Dense row-major tensors and per-pixel probability maps.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};

/// Shape-tagged dense array. Defaults to `f32` storage; the loss kernels are
/// generic so gradient checks can run on `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Float> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch("data length differs from shape product"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite tensor entry"));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![T::zero(); shape.iter().product()] }
    }

    /// Builds a tensor from a function of the flat row-major index.
    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> T) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, (0..n).map(f).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Row-major flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| {
                debug_assert!(i < n);
                acc * n + i
            })
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.data[self.offset(index)]
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::ShapeMismatch("reshape changes element count"));
        }
        Ok(Self { shape: shape.to_vec(), data: self.data })
    }

    pub fn cast<U: Float>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::from(v).unwrap_or_else(U::nan)).collect(),
        }
    }

    pub(crate) fn from_f64(shape: &[usize], data: &[f64]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: data.iter().map(|&v| T::from(v).unwrap_or_else(T::nan)).collect(),
        }
    }

    pub(crate) fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| to_f64(*v)).collect()
    }
}

#[inline]
pub(crate) fn to_f64<T: Float>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Largest tolerated deviation of a pixel's channel sum from 1.
pub const SIMPLEX_TOLERANCE: f64 = 1e-5;

/// `K x H x W` tensor whose channels form a distribution at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap<T = f32> {
    tensor: Tensor<T>,
}

impl<T: Float> ProbabilityMap<T> {
    pub fn new(tensor: Tensor<T>) -> Result<Self> {
        let &[k, h, w] = tensor.shape() else {
            return Err(Error::ShapeMismatch("probability map must be K x H x W"));
        };
        if k == 0 || h == 0 || w == 0 {
            return Err(Error::ShapeMismatch("probability map has an empty axis"));
        }
        let hw = h * w;
        for i in 0..hw {
            let mut sum = 0.0;
            for c in 0..k {
                let p = to_f64(tensor.data[c * hw + i]);
                if p < 0.0 {
                    return Err(Error::InvalidValue("negative probability"));
                }
                sum += p;
            }
            if libm::fabs(sum - 1.0) > SIMPLEX_TOLERANCE {
                return Err(Error::InvalidValue("channel sum differs from 1"));
            }
        }
        Ok(Self { tensor })
    }

    /// The same distribution `1/K` at every pixel.
    pub fn uniform(classes: usize, height: usize, width: usize) -> Result<Self> {
        let p = T::from(1.0 / classes as f64).unwrap_or_else(T::nan);
        Self::new(Tensor::new(&[classes, height, width], vec![p; classes * height * width])?)
    }

    /// Channel-wise softmax of a `K x H x W` logit tensor.
    pub fn from_logits(logits: &Tensor<T>) -> Result<Self> {
        let &[k, h, w] = logits.shape() else {
            return Err(Error::ShapeMismatch("logits must be K x H x W"));
        };
        let hw = h * w;
        let z = logits.to_f64_vec();
        let mut out = vec![0.0; z.len()];
        for i in 0..hw {
            let m = (0..k).map(|c| z[c * hw + i]).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for c in 0..k {
                let e = libm::exp(z[c * hw + i] - m);
                out[c * hw + i] = e;
                sum += e;
            }
            for c in 0..k {
                out[c * hw + i] /= sum;
            }
        }
        Self::new(Tensor::from_f64(&[k, h, w], &out))
    }

    pub fn classes(&self) -> usize {
        self.tensor.shape[0]
    }

    pub fn height(&self) -> usize {
        self.tensor.shape[1]
    }

    pub fn width(&self) -> usize {
        self.tensor.shape[2]
    }

    pub fn pixels(&self) -> usize {
        self.height() * self.width()
    }

    /// Probability of class `c` at row-major pixel `i`.
    pub fn prob(&self, c: usize, i: usize) -> T {
        self.tensor.data[c * self.pixels() + i]
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.tensor
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.tensor
    }
}
