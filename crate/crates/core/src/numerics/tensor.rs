use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major array of `f64`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!("zero extent in shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero extent in {shape:?}");
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let mut t = Self::zeros(shape);
        for (i, v) in t.data.iter_mut().enumerate() {
            *v = f(i);
        }
        t
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

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
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

    /// Same data under a new shape with the same element count.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.expect_shape(other.shape())?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn expect_shape(&self, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Dimension(format!(
                "expected shape {shape:?}, found {:?}",
                self.shape
            )));
        }
        Ok(())
    }
}

/// Complex array stored as separate real and imaginary planes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexTensor {
    pub re: Tensor,
    pub im: Tensor,
}

impl ComplexTensor {
    pub fn new(re: Tensor, im: Tensor) -> Result<Self> {
        re.expect_shape(im.shape())?;
        Ok(Self { re, im })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            re: Tensor::zeros(shape),
            im: Tensor::zeros(shape),
        }
    }

    pub fn shape(&self) -> &[usize] {
        self.re.shape()
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn get(&self, i: usize) -> (f64, f64) {
        (self.re.data()[i], self.im.data()[i])
    }

    pub fn set(&mut self, i: usize, re: f64, im: f64) {
        self.re.data_mut()[i] = re;
        self.im.data_mut()[i] = im;
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.re.sum_squares() + self.im.sum_squares()
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Ok(Self {
            re: self.re.reshape(shape)?,
            im: self.im.reshape(shape)?,
        })
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            re: self.re.map(|v| alpha * v),
            im: self.im.map(|v| alpha * v),
        }
    }

    pub fn max_abs_diff(&self, other: &ComplexTensor) -> f64 {
        self.re
            .max_abs_diff(&other.re)
            .max(self.im.max_abs_diff(&other.im))
    }

    pub fn all_finite(&self) -> bool {
        self.re.all_finite() && self.im.all_finite()
    }

    /// Contiguous slice of leading-axis rows `[start, start + count)`.
    pub fn slice_rows(&self, start: usize, count: usize) -> Result<Self> {
        let shape = self.shape();
        if shape.is_empty() || count == 0 || start + count > shape[0] {
            return Err(Error::Dimension(format!(
                "rows [{start}, {}) out of range for {shape:?}",
                start + count
            )));
        }
        let row: usize = shape[1..].iter().product();
        let mut new_shape = shape.to_vec();
        new_shape[0] = count;
        let range = start * row..(start + count) * row;
        Ok(Self {
            re: Tensor::new(new_shape.clone(), self.re.data()[range.clone()].to_vec())?,
            im: Tensor::new(new_shape, self.im.data()[range].to_vec())?,
        })
    }

    /// Interleave into a real tensor with a trailing (re, im) axis of length 2.
    pub fn realify(&self) -> Tensor {
        let mut shape = self.shape().to_vec();
        shape.push(2);
        let mut data = Vec::with_capacity(2 * self.len());
        for (r, i) in self.re.data().iter().zip(self.im.data()) {
            data.push(*r);
            data.push(*i);
        }
        Tensor { shape, data }
    }

    /// Inverse of [`ComplexTensor::realify`]: pairs consecutive scalars into
    /// complex entries and reshapes to `shape`.
    pub fn from_realified(real: &Tensor, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if real.len() != 2 * n {
            return Err(Error::Dimension(format!(
                "{} real scalars cannot fill complex shape {shape:?}",
                real.len()
            )));
        }
        let d = real.data();
        let re = (0..n).map(|i| d[2 * i]).collect();
        let im = (0..n).map(|i| d[2 * i + 1]).collect();
        Ok(Self {
            re: Tensor::new(shape.to_vec(), re)?,
            im: Tensor::new(shape.to_vec(), im)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn realify_round_trip() {
        let c = ComplexTensor::new(
            Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            Tensor::new(vec![2, 2], vec![-1.0, -2.0, -3.0, -4.0]).unwrap(),
        )
        .unwrap();
        let r = c.realify();
        assert_eq!(r.shape(), &[2, 2, 2]);
        assert_eq!(&r.data()[..4], &[1.0, -1.0, 2.0, -2.0]);
        let back = ComplexTensor::from_realified(&r, &[2, 2]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn slice_rows_picks_leading_axis() {
        let c = ComplexTensor::new(
            Tensor::from_fn(&[3, 2], |i| i as f64),
            Tensor::zeros(&[3, 2]),
        )
        .unwrap();
        let s = c.slice_rows(1, 2).unwrap();
        assert_eq!(s.re.data(), &[2.0, 3.0, 4.0, 5.0]);
        assert!(c.slice_rows(2, 2).is_err());
    }
}
