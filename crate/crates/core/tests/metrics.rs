use channelkan::eval::{bit_error_rate, effective_gains, spectral_efficiency};
use channelkan::numerics::{ComplexTensor, Tensor};
use channelkan::train::nmse_loss;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

fn random_channel(rng: &mut impl Rng, shape: &[usize]) -> ComplexTensor {
    let n: usize = shape.iter().product();
    ComplexTensor::new(
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
    )
    .unwrap()
}

fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

#[test]
fn nmse_limits_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let h = random_channel(&mut rng, &[4, 4, 2]);
    assert_eq!(nmse_loss(&h, &h).unwrap(), 0.0);
    assert_eq!(nmse_loss(&ComplexTensor::zeros(h.shape()), &h).unwrap(), 1.0);
}

#[test]
fn se_with_perfect_prediction_is_mrt_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let n_t = 4;
    let h = random_channel(&mut rng, &[3, 5, n_t * 2]);
    for snr_db in [0.0, 10.0, 20.0] {
        let rho = 10f64.powf(snr_db / 10.0);
        let mut expect = 0.0;
        let mut count = 0;
        for beam in 0..h.len() / n_t {
            let norm2: f64 = (0..n_t)
                .map(|i| {
                    let (r, im) = h.get(beam * n_t + i);
                    r * r + im * im
                })
                .sum();
            expect += (1.0 + rho * norm2).log2();
            count += 1;
        }
        expect /= count as f64;
        let se = spectral_efficiency(&h, &h, n_t, snr_db).unwrap();
        assert!((se.se_bps_hz - expect).abs() < 1e-10, "{snr_db} dB");
        assert_eq!(se.fallbacks, 0);
    }
}

#[test]
fn ber_lies_in_binomial_band_of_qpsk_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let n_t = 2;
    // Small gains keep the error rate measurable at 20 dB.
    let h = random_channel(&mut rng, &[2, 4, n_t]).scale(0.15);
    let (gains, _) = effective_gains(&h, &h, n_t).unwrap();
    let n_bits = 200_000;
    for snr_db in [0.0, 10.0, 20.0] {
        let rho = 10f64.powf(snr_db / 10.0);
        let symbols = n_bits / 2;
        let p: f64 = (0..symbols)
            .map(|i| {
                let (r, im) = gains[i % gains.len()];
                q_function((rho * (r * r + im * im)).sqrt())
            })
            .sum::<f64>()
            / symbols as f64;
        let sigma = (p * (1.0 - p) / n_bits as f64).sqrt();
        let mut sim_rng = ChaCha8Rng::seed_from_u64(54 + snr_db as u64);
        let ber = bit_error_rate(&h, &h, n_t, snr_db, n_bits, &mut sim_rng).unwrap();
        assert!(
            (ber - p).abs() <= 3.0 * sigma,
            "{snr_db} dB: simulated {ber}, oracle {p} +- {}",
            3.0 * sigma
        );
    }
}

#[test]
fn ber_estimates_scatter_around_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let h = random_channel(&mut rng, &[1, 2, 2]).scale(0.5);
    let (gains, _) = effective_gains(&h, &h, 2).unwrap();
    let rho: f64 = 1.0;
    let p = gains
        .iter()
        .map(|(r, i)| q_function((rho * (r * r + i * i)).sqrt()))
        .sum::<f64>()
        / gains.len() as f64;
    let trials = 30;
    let n_bits = 20_000;
    let mean = (0..trials)
        .map(|s| {
            let mut sim = ChaCha8Rng::seed_from_u64(s);
            bit_error_rate(&h, &h, 2, 0.0, n_bits, &mut sim).unwrap()
        })
        .sum::<f64>()
        / trials as f64;
    let sigma = (p * (1.0 - p) / (n_bits * trials as usize) as f64).sqrt();
    assert!((mean - p).abs() <= 3.0 * sigma, "mean {mean}, oracle {p}");
}

proptest! {
    #[test]
    fn nmse_of_scaled_truth(alpha in -3.0f64..3.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_channel(&mut rng, &[2, 3, 2]);
        let v = nmse_loss(&h.scale(alpha), &h).unwrap();
        prop_assert!((v - (alpha - 1.0).powi(2)).abs() <= 1e-12 * (1.0 + v));
    }

    #[test]
    fn perfect_prediction_maximises_se(seed in any::<u64>(), snr_db in -5.0f64..30.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_channel(&mut rng, &[2, 3, 4]);
        let other = random_channel(&mut rng, &[2, 3, 4]);
        let best = spectral_efficiency(&h, &h, 4, snr_db).unwrap().se_bps_hz;
        let se = spectral_efficiency(&other, &h, 4, snr_db).unwrap().se_bps_hz;
        prop_assert!(se <= best + 1e-12);
        prop_assert!(se >= 0.0);
    }

    #[test]
    fn ber_is_a_probability(seed in any::<u64>(), snr_db in -10.0f64..30.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_channel(&mut rng, &[1, 2, 2]);
        let p = random_channel(&mut rng, &[1, 2, 2]);
        let ber = bit_error_rate(&p, &h, 2, snr_db, 2000, &mut rng).unwrap();
        prop_assert!((0.0..=1.0).contains(&ber));
    }
}
