use std::f64::consts::PI;

use channelkan::numerics::{dft_axis, dft_k, irfft_t, rfft_bins, rfft_t, ComplexTensor, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIZES: [usize; 7] = [1, 2, 7, 8, 15, 16, 48];

/// O(n^2) unitary DFT.
fn naive_dft(re: &[f64], im: &[f64], inverse: bool) -> (Vec<f64>, Vec<f64>) {
    let n = re.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let scale = 1.0 / (n as f64).sqrt();
    let mut out_re = vec![0.0; n];
    let mut out_im = vec![0.0; n];
    for k in 0..n {
        for t in 0..n {
            let a = sign * 2.0 * PI * (k * t % n) as f64 / n as f64;
            let (s, c) = a.sin_cos();
            out_re[k] += re[t] * c - im[t] * s;
            out_im[k] += re[t] * s + im[t] * c;
        }
        out_re[k] *= scale;
        out_im[k] *= scale;
    }
    (out_re, out_im)
}

fn random_complex(rng: &mut impl Rng, shape: &[usize]) -> ComplexTensor {
    let n: usize = shape.iter().product();
    ComplexTensor::new(
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
    )
    .unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn dft_matches_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in SIZES {
        let x = random_complex(&mut rng, &[n]);
        for inverse in [false, true] {
            let fast = dft_axis(&x, 0, inverse).unwrap();
            let (re, im) = naive_dft(x.re.data(), x.im.data(), inverse);
            assert!(max_diff(fast.re.data(), &re) < 1e-10, "n = {n}");
            assert!(max_diff(fast.im.data(), &im) < 1e-10, "n = {n}");
        }
    }
}

#[test]
fn dft_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in SIZES {
        let x = random_complex(&mut rng, &[3, n, 2]);
        let back = dft_k(&dft_k(&x, false).unwrap(), true).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-10, "n = {n}");
    }
}

#[test]
fn rfft_matches_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for t in SIZES {
        let cols = 3;
        let z = Tensor::from_fn(&[t, cols], |_| rng.gen_range(-1.0..1.0));
        let spec = rfft_t(&z).unwrap();
        assert_eq!(spec.shape(), [rfft_bins(t), cols]);
        for c in 0..cols {
            let col: Vec<f64> = (0..t).map(|i| z.data()[i * cols + c]).collect();
            let (re, im) = naive_dft(&col, &vec![0.0; t], false);
            for w in 0..rfft_bins(t) {
                let (r, i) = spec.get(w * cols + c);
                assert!((r - re[w]).abs() < 1e-10 && (i - im[w]).abs() < 1e-10, "t = {t}, bin {w}");
            }
        }
    }
}

#[test]
fn rfft_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for t in SIZES {
        let z = Tensor::from_fn(&[t, 5], |_| rng.gen_range(-2.0..2.0));
        let back = irfft_t(&rfft_t(&z).unwrap(), t).unwrap();
        assert!(back.max_abs_diff(&z) < 1e-10, "t = {t}");
    }
}

#[test]
fn irfft_rejects_wrong_bin_count() {
    let s = ComplexTensor::zeros(&[4, 2]);
    assert!(irfft_t(&s, 8).is_err());
}

proptest! {
    #[test]
    fn dft_is_unitary(n in 1usize..40, seed in any::<u64>(), inverse in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_complex(&mut rng, &[2, n, 3]);
        let y = dft_k(&x, inverse).unwrap();
        prop_assert!((y.energy().sqrt() - x.energy().sqrt()).abs() < 1e-10);
    }

    #[test]
    fn rfft_round_trips_any_length(t in 1usize..64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Tensor::from_fn(&[t, 2], |_| rng.gen_range(-1.0..1.0));
        let back = irfft_t(&rfft_t(&z).unwrap(), t).unwrap();
        prop_assert!(back.max_abs_diff(&z) < 1e-10);
    }

    #[test]
    fn transforms_are_deterministic(n in 1usize..32, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_complex(&mut rng, &[n]);
        let a = dft_axis(&x, 0, false).unwrap();
        let b = dft_axis(&x, 0, false).unwrap();
        prop_assert_eq!(a, b);
    }
}
