use std::fmt;

use super::{NnError, Scalar};

/// Per-sample shape `(channels, height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.c, self.h, self.w)
    }
}

/// Dense `(batch, channels, height, width)` tensor, width fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    data: Vec<T>,
    batch: usize,
    shape: Shape,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(batch: usize, shape: Shape) -> Self {
        Self {
            data: vec![T::zero(); batch * shape.len()],
            batch,
            shape,
        }
    }

    pub fn from_vec(data: Vec<T>, batch: usize, shape: Shape) -> Result<Self, NnError> {
        if data.len() != batch * shape.len() {
            return Err(NnError::Shape {
                layer: None,
                expected: format!("{} values for batch {batch} x {shape}", batch * shape.len()),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Self { data, batch, shape })
    }

    /// Resizes in place for a new batch and shape, keeping the allocation
    /// when it is large enough. Contents are unspecified afterwards.
    pub(crate) fn reset(&mut self, batch: usize, shape: Shape) {
        self.data.resize(batch * shape.len(), T::zero());
        self.batch = batch;
        self.shape = shape;
    }

    pub fn filled(batch: usize, shape: Shape, value: T) -> Self {
        Self {
            data: vec![value; batch * shape.len()],
            batch,
            shape,
        }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.batch, self.shape.c, self.shape.h, self.shape.w]
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

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Same buffer, new per-sample shape of equal size.
    pub fn reshaped(self, shape: Shape) -> Result<Self, NnError> {
        if shape.len() != self.shape.len() {
            return Err(NnError::Shape {
                layer: None,
                expected: format!("{} elements per sample", shape.len()),
                actual: format!("{} in {}", self.shape.len(), self.shape),
            });
        }
        Ok(Self {
            data: self.data,
            batch: self.batch,
            shape,
        })
    }

    pub fn sample(&self, b: usize) -> &[T] {
        let n = self.shape.len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> T {
        let s = self.shape;
        self.data[((b * s.c + c) * s.h + y) * s.w + x]
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor4<U> {
        Tensor4 {
            data: self
                .data
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
            batch: self.batch,
            shape: self.shape,
        }
    }

    pub(crate) fn expect_shape(&self, shape: Shape) -> Result<(), NnError> {
        if self.shape != shape {
            return Err(NnError::Shape {
                layer: None,
                expected: shape.to_string(),
                actual: self.shape.to_string(),
            });
        }
        Ok(())
    }
}
