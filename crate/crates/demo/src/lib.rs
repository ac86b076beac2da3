//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The plain functions do the work and are tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use channelkan::channel::{
    add_noise, generate_sequence, kmh_to_mps, sample_clusters, ClusterProfile, CsiSequence,
    SystemConfig,
};
use channelkan::model::{kan_map, multiscale_enhance};
use channelkan::numerics::{rfft_bins, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Subcarriers shown in the heatmap.
pub const SUBCARRIERS: usize = 32;
pub const MAX_FRAMES: usize = 512;

fn system() -> SystemConfig {
    SystemConfig {
        n_h: 2,
        n_v: 1,
        n_r: 1,
        subcarriers: SUBCARRIERS,
        ..SystemConfig::default()
    }
}

/// Clean and noisy copies of one synthetic sequence. A non-finite `snr_db`
/// leaves the noisy copy clean.
fn sequences(
    velocity_kmh: f64,
    snr_db: f64,
    seed: u64,
    frames: usize,
) -> channelkan::Result<(CsiSequence, CsiSequence)> {
    if frames == 0 || frames > MAX_FRAMES {
        return Err(channelkan::Error::Precondition(format!(
            "frames must be in 1..={MAX_FRAMES}, got {frames}"
        )));
    }
    let cfg = system();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set = sample_clusters(kmh_to_mps(velocity_kmh), &cfg, &ClusterProfile::default(), &mut rng)?;
    let clean = generate_sequence(&[set], &cfg, frames)?;
    let snr = if snr_db.is_finite() { snr_db } else { f64::INFINITY };
    let noisy = add_noise(&clean, snr, &mut rng)?;
    Ok((clean, noisy))
}

/// `|H|` of the first antenna pair, `frames x SUBCARRIERS`, row-major.
pub fn heatmap(velocity_kmh: f64, snr_db: f64, seed: u64, frames: usize) -> channelkan::Result<Vec<f64>> {
    let (_, noisy) = sequences(velocity_kmh, snr_db, seed, frames)?;
    let pairs = noisy.config.pairs();
    Ok((0..frames * SUBCARRIERS)
        .map(|i| {
            let (re, im) = noisy.frames.get(i * pairs);
            re.hypot(im)
        })
        .collect())
}

/// Real part of one subcarrier over time: `[noisy, filtered, clean]`
/// concatenated, each `frames` long. The filter keeps the `rank` strongest
/// temporal frequencies of the noisy trace.
pub fn spectral_filter(
    velocity_kmh: f64,
    snr_db: f64,
    seed: u64,
    frames: usize,
    rank: usize,
    subcarrier: usize,
) -> channelkan::Result<Vec<f64>> {
    if subcarrier >= SUBCARRIERS {
        return Err(channelkan::Error::Precondition(format!(
            "subcarrier {subcarrier} out of range"
        )));
    }
    if rank == 0 || rank > rfft_bins(frames) {
        return Err(channelkan::Error::Precondition(format!(
            "rank must be in 1..={}, got {rank}",
            rfft_bins(frames)
        )));
    }
    let (clean, noisy) = sequences(velocity_kmh, snr_db, seed, frames)?;
    let stride = SUBCARRIERS * clean.config.pairs();
    let column = |s: &CsiSequence| -> Vec<f64> {
        (0..frames).map(|t| s.frames.get(t * stride + subcarrier * clean.config.pairs()).0).collect()
    };
    let noisy_col = column(&noisy);
    let z = Tensor::new(vec![frames, 1], noisy_col.clone())?;
    let filtered = multiscale_enhance(&z, &[Tensor::full(&[frames, 1], 1.0)], &[rank])?;
    let mut out = noisy_col;
    out.extend_from_slice(filtered.data());
    out.extend(column(&clean));
    Ok(out)
}

/// One KAN edge function `sum_m c_m T_m(tanh(prescale * q))` sampled at
/// `points` evenly spaced `q` in `[-range, range]`.
pub fn edge_function(coeffs: &[f64], prescale: f64, range: f64, points: usize) -> channelkan::Result<Vec<f64>> {
    if coeffs.is_empty() || points < 2 || !(range > 0.0) {
        return Err(channelkan::Error::Precondition(
            "need at least one coefficient, two points and a positive range".into(),
        ));
    }
    let q = Tensor::from_fn(&[points], |i| -range + 2.0 * range * i as f64 / (points - 1) as f64);
    let w: Vec<Tensor> = coeffs.iter().map(|&c| Tensor::full(&[points], c)).collect();
    Ok(kan_map(&q, &w, prescale)?.into_data())
}

fn js(e: channelkan::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn csi_heatmap(velocity_kmh: f64, snr_db: f64, seed: u32, frames: usize) -> Result<Vec<f64>, JsError> {
    heatmap(velocity_kmh, snr_db, u64::from(seed), frames).map_err(js)
}

#[wasm_bindgen]
pub fn msfe_filter(
    velocity_kmh: f64,
    snr_db: f64,
    seed: u32,
    frames: usize,
    rank: usize,
    subcarrier: usize,
) -> Result<Vec<f64>, JsError> {
    spectral_filter(velocity_kmh, snr_db, u64::from(seed), frames, rank, subcarrier).map_err(js)
}

#[wasm_bindgen]
pub fn kan_curve(coeffs: Vec<f64>, prescale: f64, range: f64, points: usize) -> Result<Vec<f64>, JsError> {
    edge_function(&coeffs, prescale, range, points).map_err(js)
}

#[wasm_bindgen]
pub fn subcarriers() -> usize {
    SUBCARRIERS
}
