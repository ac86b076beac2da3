use rand::Rng;
use rand_distr::StandardNormal;

use super::CsiSequence;
use crate::error::{Error, Result};
use crate::numerics::ComplexTensor;

/// A `(history, future)` pair cut from consecutive frames.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    /// `T x K x A`
    pub history: ComplexTensor,
    /// `L x K x A`
    pub future: ComplexTensor,
}

/// Adds circularly-symmetric complex Gaussian noise whose power is the
/// sequence-mean `|H|^2` divided by `10^(snr_db / 10)`. `+inf` returns the
/// input unchanged.
pub fn add_noise<R: Rng + ?Sized>(
    seq: &CsiSequence,
    snr_db: f64,
    rng: &mut R,
) -> Result<CsiSequence> {
    if snr_db == f64::INFINITY {
        return Ok(seq.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::Precondition(format!("SNR must be finite or +inf, got {snr_db}")));
    }
    let signal = seq.frames.energy() / seq.frames.len() as f64;
    let noise = signal / 10f64.powf(snr_db / 10.0);
    let sigma = (noise / 2.0).sqrt();
    let mut out = seq.clone();
    for i in 0..out.frames.len() {
        let (r, im) = out.frames.get(i);
        let nr: f64 = rng.sample(StandardNormal);
        let ni: f64 = rng.sample(StandardNormal);
        out.frames.set(i, r + sigma * nr, im + sigma * ni);
    }
    Ok(out)
}

/// Sliding `(T, L)` windows with the given stride. Produces
/// `(T_total - T - L) / stride + 1` samples.
pub fn window(
    seq: &CsiSequence,
    history_len: usize,
    horizon: usize,
    stride: usize,
) -> Result<Vec<WindowedSample>> {
    windows_from(seq, seq, history_len, horizon, stride)
}

/// Like [`window`] but takes histories from `observed` (e.g. a noisy copy)
/// and futures from `truth`.
pub(crate) fn windows_from(
    observed: &CsiSequence,
    truth: &CsiSequence,
    history_len: usize,
    horizon: usize,
    stride: usize,
) -> Result<Vec<WindowedSample>> {
    if history_len == 0 || horizon == 0 || stride == 0 {
        return Err(Error::Precondition(
            "history length, horizon and stride must be >= 1".into(),
        ));
    }
    if observed.frames.shape() != truth.frames.shape() {
        return Err(Error::Dimension("observed/truth sequences differ in shape".into()));
    }
    let total = truth.len();
    if history_len + horizon > total {
        return Err(Error::EmptyDataset(format!(
            "T + L = {} exceeds sequence length {total}",
            history_len + horizon
        )));
    }
    let count = (total - history_len - horizon) / stride + 1;
    (0..count)
        .map(|w| {
            let start = w * stride;
            Ok(WindowedSample {
                history: observed.frames.slice_rows(start, history_len)?,
                future: truth.frames.slice_rows(start + history_len, horizon)?,
            })
        })
        .collect()
}
