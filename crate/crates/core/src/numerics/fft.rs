//! Unitary discrete Fourier transforms.
//!
//! Both directions scale by `1/sqrt(n)`, so every transform here preserves the
//! Euclidean norm. Power-of-two lengths use an iterative radix-2 kernel; other
//! lengths fall back to direct O(n^2) summation.

use std::f64::consts::PI;

use super::tensor::{ComplexTensor, Tensor};
use crate::error::{Error, Result};

/// Precomputed twiddles for one transform length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    scale: f64,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "transform length must be positive");
        let (cos, sin) = (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                (a.cos(), a.sin())
            })
            .unzip();
        Self {
            n,
            cos,
            sin,
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place unitary transform. Forward uses `exp(-j 2 pi k n / N)`.
    pub fn process(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        debug_assert_eq!(re.len(), self.n);
        debug_assert_eq!(im.len(), self.n);
        if self.n == 1 {
            return;
        }
        if self.n.is_power_of_two() {
            self.radix2(re, im, inverse);
        } else {
            self.direct(re, im, inverse);
        }
        for v in re.iter_mut().chain(im.iter_mut()) {
            *v *= self.scale;
        }
    }

    fn direct(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut out_re = vec![0.0; n];
        let mut out_im = vec![0.0; n];
        for k in 0..n {
            let (mut acc_re, mut acc_im) = (0.0, 0.0);
            for t in 0..n {
                let idx = (k * t) % n;
                let (c, s) = (self.cos[idx], sign * self.sin[idx]);
                acc_re += re[t] * c - im[t] * s;
                acc_im += re[t] * s + im[t] * c;
            }
            out_re[k] = acc_re;
            out_im[k] = acc_im;
        }
        re.copy_from_slice(&out_re);
        im.copy_from_slice(&out_im);
    }

    fn radix2(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let (c, s) = (self.cos[k * step], sign * self.sin[k * step]);
                    let (a, b) = (start + k, start + k + half);
                    let t_re = re[b] * c - im[b] * s;
                    let t_im = re[b] * s + im[b] * c;
                    re[b] = re[a] - t_re;
                    im[b] = im[a] - t_im;
                    re[a] += t_re;
                    im[a] += t_im;
                }
            }
            len <<= 1;
        }
    }
}

/// Unitary (inverse) DFT of `x` along `axis`.
pub fn dft_axis(x: &ComplexTensor, axis: usize, inverse: bool) -> Result<ComplexTensor> {
    let shape = x.shape();
    if axis >= shape.len() {
        return Err(Error::Dimension(format!(
            "axis {axis} out of range for shape {shape:?}"
        )));
    }
    let n = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let plan = FftPlan::new(n);
    let mut out = x.clone();
    let mut buf_re = vec![0.0; n];
    let mut buf_im = vec![0.0; n];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * n * inner + i;
            for t in 0..n {
                let (r, im) = x.get(base + t * inner);
                buf_re[t] = r;
                buf_im[t] = im;
            }
            plan.process(&mut buf_re, &mut buf_im, inverse);
            for t in 0..n {
                out.set(base + t * inner, buf_re[t], buf_im[t]);
            }
        }
    }
    Ok(out)
}

/// Number of non-negative-frequency bins kept by a real transform of length `t`.
pub fn rfft_bins(t: usize) -> usize {
    t / 2 + 1
}

/// Column-wise real-input DFT of a `T x C` tensor, keeping `T/2 + 1` bins.
pub fn rfft_t(z: &Tensor) -> Result<ComplexTensor> {
    let (t, c) = matrix_dims(z)?;
    let plan = FftPlan::new(t);
    let bins = rfft_bins(t);
    let mut out = ComplexTensor::zeros(&[bins, c]);
    let mut re = vec![0.0; t];
    let mut im = vec![0.0; t];
    for col in 0..c {
        rfft_column(&plan, z.data(), c, col, &mut re, &mut im);
        for w in 0..bins {
            out.set(w * c + col, re[w], im[w]);
        }
    }
    Ok(out)
}

/// Inverse of [`rfft_t`]. Imaginary parts of bin 0 (and of bin `T/2` for even
/// `T`) are ignored.
pub fn irfft_t(s: &ComplexTensor, t_len: usize) -> Result<Tensor> {
    if s.shape().len() != 2 || t_len == 0 || s.shape()[0] != rfft_bins(t_len) {
        return Err(Error::Dimension(format!(
            "spectrum of shape {:?} does not match signal length {t_len}",
            s.shape()
        )));
    }
    let c = s.shape()[1];
    let plan = FftPlan::new(t_len);
    let mut out = Tensor::zeros(&[t_len, c]);
    let mut re = vec![0.0; t_len];
    let mut im = vec![0.0; t_len];
    for col in 0..c {
        for (w, (r, i)) in re.iter_mut().zip(im.iter_mut()).enumerate().take(rfft_bins(t_len)) {
            (*r, *i) = s.get(w * c + col);
        }
        irfft_column(&plan, &mut re, &mut im);
        for t in 0..t_len {
            out.data_mut()[t * c + col] = re[t];
        }
    }
    Ok(out)
}

/// Forward transform of one strided column into `re`/`im` (full length).
pub(crate) fn rfft_column(
    plan: &FftPlan,
    data: &[f64],
    stride: usize,
    col: usize,
    re: &mut [f64],
    im: &mut [f64],
) {
    for t in 0..plan.len() {
        re[t] = data[t * stride + col];
        im[t] = 0.0;
    }
    plan.process(re, im, false);
}

/// Hermitian-extends the first `T/2 + 1` bins held in `re`/`im` and inverts
/// in place; the real signal is left in `re`.
pub(crate) fn irfft_column(plan: &FftPlan, re: &mut [f64], im: &mut [f64]) {
    let t = plan.len();
    let bins = rfft_bins(t);
    im[0] = 0.0;
    if t % 2 == 0 {
        im[t / 2] = 0.0;
    }
    for w in bins..t {
        re[w] = re[t - w];
        im[w] = -im[t - w];
    }
    plan.process(re, im, true);
}

fn matrix_dims(z: &Tensor) -> Result<(usize, usize)> {
    match z.shape() {
        [t, c] => Ok((*t, *c)),
        other => Err(Error::Dimension(format!(
            "expected a T x C matrix, found shape {other:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complex(re: Vec<f64>, im: Vec<f64>) -> ComplexTensor {
        let n = re.len();
        ComplexTensor::new(
            Tensor::new(vec![n], re).unwrap(),
            Tensor::new(vec![n], im).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn length_one_is_identity() {
        let x = complex(vec![0.3], vec![-1.7]);
        assert_eq!(dft_axis(&x, 0, false).unwrap(), x);
        assert_eq!(dft_axis(&x, 0, true).unwrap(), x);
    }

    #[test]
    fn flat_spectrum_inverts_to_scaled_impulse() {
        let x = complex(vec![1.0; 4], vec![0.0; 4]);
        let y = dft_axis(&x, 0, true).unwrap();
        let expect = [2.0, 0.0, 0.0, 0.0];
        for (k, e) in expect.iter().enumerate() {
            let (r, i) = y.get(k);
            assert!((r - e).abs() < 1e-15 && i.abs() < 1e-15, "bin {k}: {r} {i}");
        }
    }

    #[test]
    fn axis_out_of_range_is_rejected() {
        let x = complex(vec![1.0; 4], vec![0.0; 4]);
        assert!(matches!(dft_axis(&x, 1, false), Err(Error::Dimension(_))));
    }

    #[test]
    fn rfft_bin_count() {
        assert_eq!(rfft_t(&Tensor::zeros(&[16, 3])).unwrap().shape(), &[9, 3]);
        assert_eq!(rfft_t(&Tensor::zeros(&[7, 1])).unwrap().shape(), &[4, 1]);
        assert_eq!(rfft_t(&Tensor::zeros(&[1, 1])).unwrap().shape(), &[1, 1]);
    }

    #[test]
    fn zeros_map_to_zeros() {
        let s = rfft_t(&Tensor::zeros(&[8, 2])).unwrap();
        assert_eq!(s.energy(), 0.0);
        let z = irfft_t(&ComplexTensor::zeros(&[5, 2]), 8).unwrap();
        assert_eq!(z.sum_squares(), 0.0);
    }

    #[test]
    fn irfft_rejects_wrong_bin_count() {
        assert!(irfft_t(&ComplexTensor::zeros(&[4, 1]), 8).is_err());
    }
}
