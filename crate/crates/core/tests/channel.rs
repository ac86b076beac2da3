use std::f64::consts::PI;

use channelkan::channel::{
    add_noise, channel_vector, generate_dataset, generate_sequence, kmh_to_mps, sample_clusters,
    steering_vector, window, ClusterProfile, DatasetSpec, SystemConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cis(phase: f64) -> (f64, f64) {
    (phase.cos(), phase.sin())
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn small_system(n_h: usize, n_v: usize) -> SystemConfig {
    SystemConfig {
        n_h,
        n_v,
        n_r: 1,
        subcarriers: 4,
        ..SystemConfig::default()
    }
}

proptest! {
    #[test]
    fn steering_is_kronecker_of_axis_responses(
        n_h in 1usize..6,
        n_v in 1usize..4,
        theta in -PI..PI,
        varphi in -PI..PI,
    ) {
        let cfg = small_system(n_h, n_v);
        let a_h: Vec<_> = (0..n_h).map(|p| cis(PI * p as f64 * varphi.sin() * theta.cos())).collect();
        let a_v: Vec<_> = (0..n_v).map(|q| cis(PI * q as f64 * theta.sin())).collect();
        let a = steering_vector(theta, varphi, &cfg);
        prop_assert_eq!(a.shape(), &[n_h * n_v][..]);
        for (p, h) in a_h.iter().enumerate() {
            for (q, v) in a_v.iter().enumerate() {
                let expect = cmul(*h, *v);
                let got = a.get(p * n_v + q);
                prop_assert!((got.0 - expect.0).abs() < 1e-12 && (got.1 - expect.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_is_linear_in_clusters(seed in any::<u64>(), t in 0.0f64..0.01, k in 0usize..4) {
        let cfg = small_system(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profile = ClusterProfile::default();
        let a = sample_clusters(20.0, &cfg, &profile, &mut rng).unwrap();
        let b = sample_clusters(20.0, &cfg, &profile, &mut rng).unwrap();
        let f = cfg.subcarrier_hz(k);
        let merged = channel_vector(t, f, &a.merge(&b), &cfg);
        let ha = channel_vector(t, f, &a, &cfg);
        let hb = channel_vector(t, f, &b, &cfg);
        for i in 0..cfg.n_t() {
            let (m, x, y) = (merged.get(i), ha.get(i), hb.get(i));
            prop_assert!((m.0 - x.0 - y.0).abs() < 1e-12 && (m.1 - x.1 - y.1).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_velocity_frames_are_constant() {
    let cfg = small_system(2, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let set = sample_clusters(0.0, &cfg, &ClusterProfile::default(), &mut rng).unwrap();
    let seq = generate_sequence(&[set], &cfg, 10).unwrap();
    let frame = seq.frames.len() / 10;
    for t in 1..10 {
        for i in 0..frame {
            assert_eq!(seq.frames.get(t * frame + i), seq.frames.get(i));
        }
    }
}

#[test]
fn gains_are_normalised_to_array_size() {
    let cfg = small_system(4, 2);
    let profile = ClusterProfile::default();
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let runs = 10_000;
    let mut total = 0.0;
    for _ in 0..runs {
        let set = sample_clusters(kmh_to_mps(60.0), &cfg, &profile, &mut rng).unwrap();
        total += channel_vector(0.0, cfg.carrier_hz, &set, &cfg).energy();
    }
    let ratio = total / runs as f64 / cfg.n_t() as f64;
    assert!((0.8..=1.2).contains(&ratio), "E|h|^2 / n_t = {ratio}");
}

#[test]
fn measured_snr_matches_requested() {
    let cfg = small_system(2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let set = sample_clusters(kmh_to_mps(60.0), &cfg, &ClusterProfile::default(), &mut rng).unwrap();
    let clean = generate_sequence(&[set], &cfg, 400).unwrap();
    for snr_db in [0.0, 10.0, 20.0] {
        let noisy = add_noise(&clean, snr_db, &mut rng).unwrap();
        let noise: f64 = (0..clean.frames.len())
            .map(|i| {
                let (a, b) = (clean.frames.get(i), noisy.frames.get(i));
                (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
            })
            .sum();
        let measured = 10.0 * (clean.frames.energy() / noise).log10();
        assert!((measured - snr_db).abs() < 0.5, "asked {snr_db} dB, got {measured}");
    }
    assert_eq!(add_noise(&clean, f64::INFINITY, &mut rng).unwrap(), clean);
    assert!(add_noise(&clean, f64::NAN, &mut rng).is_err());
}

#[test]
fn stride_one_windows_tile_the_sequence() {
    let cfg = small_system(2, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let set = sample_clusters(kmh_to_mps(30.0), &cfg, &ClusterProfile::default(), &mut rng).unwrap();
    let (t, l, total) = (5, 2, 12);
    let seq = generate_sequence(&[set], &cfg, total).unwrap();
    let wins = window(&seq, t, l, 1).unwrap();
    assert_eq!(wins.len(), total - t - l + 1);
    let frame = seq.frames.len() / total;
    // First history, then the last history frame of every following window.
    let mut rebuilt = Vec::new();
    for i in 0..t * frame {
        rebuilt.push(wins[0].history.get(i));
    }
    for w in &wins[1..] {
        for i in 0..frame {
            rebuilt.push(w.history.get((t - 1) * frame + i));
        }
    }
    for i in 0..rebuilt.len() {
        assert_eq!(rebuilt[i], seq.frames.get(i));
    }
    let last = wins.last().unwrap();
    for i in 0..l * frame {
        assert_eq!(last.future.get(i), seq.frames.get((total - l) * frame + i));
    }
}

#[test]
fn datasets_are_deterministic_and_splits_differ() {
    let cfg = SystemConfig::desk();
    let spec = DatasetSpec {
        windows: 6,
        ..DatasetSpec::default()
    };
    let a = generate_dataset(&spec, &cfg, 5, 0).unwrap();
    let b = generate_dataset(&spec, &cfg, 5, 0).unwrap();
    let c = generate_dataset(&spec, &cfg, 5, 1).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.samples[0], c.samples[0]);
    assert_eq!(a.samples[0].history.shape(), [16, 4, 2]);
    assert_eq!(a.samples[0].future.shape(), [4, 4, 2]);
}
