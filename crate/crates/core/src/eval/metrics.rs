use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::ComplexTensor;
use crate::train::nmse_loss;

/// Mean NMSE over samples with non-zero truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmseSummary {
    pub nmse: f64,
    /// Samples skipped because their truth has zero energy.
    pub excluded: usize,
}

pub fn nmse_over(preds: &[ComplexTensor], truths: &[ComplexTensor]) -> Result<NmseSummary> {
    if preds.len() != truths.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} targets",
            preds.len(),
            truths.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset("no samples to evaluate".into()));
    }
    let mut total = 0.0;
    let mut used = 0;
    for (p, t) in preds.iter().zip(truths) {
        match nmse_loss(p, t) {
            Ok(v) => {
                total += v;
                used += 1;
            }
            Err(Error::UndefinedNormalization) => {}
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::UndefinedNormalization);
    }
    Ok(NmseSummary {
        nmse: total / used as f64,
        excluded: preds.len() - used,
    })
}

/// Splits a `... x A` tensor into per-UE-antenna transmit vectors of length
/// `n_t`, returned as flat `(re, im)` slices in order.
fn beams(x: &ComplexTensor, n_t: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let a = *x
        .shape()
        .last()
        .ok_or_else(|| Error::Dimension("scalar channel tensor".into()))?;
    if n_t == 0 || a % n_t != 0 {
        return Err(Error::Dimension(format!(
            "antenna axis {a} is not a multiple of n_t = {n_t}"
        )));
    }
    Ok(x.re
        .data()
        .chunks(n_t)
        .zip(x.im.data().chunks(n_t))
        .map(|(r, i)| (r.to_vec(), i.to_vec()))
        .collect())
}

/// Effective gains `h^H w` with `w` the unit-norm MRT beam of the predicted
/// vector; also returns how many predictions were zero and got a uniform beam.
pub fn effective_gains(
    pred: &ComplexTensor,
    truth: &ComplexTensor,
    n_t: usize,
) -> Result<(Vec<(f64, f64)>, usize)> {
    if pred.shape() != truth.shape() {
        return Err(Error::Dimension(format!(
            "prediction {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let mut fallbacks = 0;
    let gains = beams(pred, n_t)?
        .into_iter()
        .zip(beams(truth, n_t)?)
        .map(|((pr, pi), (hr, hi))| {
            let norm = pr.iter().chain(&pi).map(|v| v * v).sum::<f64>().sqrt();
            let (wr, wi): (Vec<f64>, Vec<f64>) = if norm > 0.0 {
                (pr.iter().map(|v| v / norm).collect(), pi.iter().map(|v| v / norm).collect())
            } else {
                fallbacks += 1;
                let u = 1.0 / (n_t as f64).sqrt();
                (vec![u; n_t], vec![0.0; n_t])
            };
            // conj(h) . w
            let mut g = (0.0, 0.0);
            for i in 0..n_t {
                g.0 += hr[i] * wr[i] + hi[i] * wi[i];
                g.1 += hr[i] * wi[i] - hi[i] * wr[i];
            }
            g
        })
        .collect();
    Ok((gains, fallbacks))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeSummary {
    pub se_bps_hz: f64,
    pub fallbacks: usize,
}

/// Mean `log2(1 + rho |h^H w|^2)` over every step, subcarrier and UE antenna,
/// with `w` steered by the prediction and `h` the true channel.
pub fn spectral_efficiency(
    pred: &ComplexTensor,
    truth: &ComplexTensor,
    n_t: usize,
    snr_db: f64,
) -> Result<SeSummary> {
    let rho = 10f64.powf(snr_db / 10.0);
    let (gains, fallbacks) = effective_gains(pred, truth, n_t)?;
    let se = gains
        .iter()
        .map(|(r, i)| (1.0 + rho * (r * r + i * i)).log2())
        .sum::<f64>()
        / gains.len() as f64;
    Ok(SeSummary {
        se_bps_hz: se,
        fallbacks,
    })
}

/// Monte-Carlo uncoded Gray-mapped QPSK over the beamformed channel. Symbol
/// `i` uses effective gain `i mod N`; the receiver knows the true gain.
pub fn bit_error_rate<R: Rng + ?Sized>(
    pred: &ComplexTensor,
    truth: &ComplexTensor,
    n_t: usize,
    snr_db: f64,
    n_bits: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_bits < 1000 {
        return Err(Error::Precondition(format!("n_bits must be >= 1000, got {n_bits}")));
    }
    let (gains, _) = effective_gains(pred, truth, n_t)?;
    let rho = 10f64.powf(snr_db / 10.0);
    let sigma = (0.5 / rho).sqrt();
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let mut errors = 0usize;
    let mut sent = 0usize;
    let mut i = 0;
    while sent < n_bits {
        let (gr, gi) = gains[i % gains.len()];
        i += 1;
        let b0 = rng.gen::<bool>();
        let b1 = rng.gen::<bool>();
        let sr = if b0 { -amp } else { amp };
        let si = if b1 { -amp } else { amp };
        let nr: f64 = rng.sample(StandardNormal);
        let ni: f64 = rng.sample(StandardNormal);
        let yr = gr * sr - gi * si + sigma * nr;
        let yi = gr * si + gi * sr + sigma * ni;
        // Matched filter with the true gain: conj(g) y.
        let zr = gr * yr + gi * yi;
        let zi = gr * yi - gi * yr;
        errors += usize::from((zr < 0.0) != b0);
        sent += 1;
        if sent < n_bits {
            errors += usize::from((zi < 0.0) != b1);
            sent += 1;
        }
    }
    Ok(errors as f64 / n_bits as f64)
}

/// Stacks equally-shaped tensors along a new leading axis.
pub fn stack(items: &[ComplexTensor]) -> Result<ComplexTensor> {
    let first = items
        .first()
        .ok_or_else(|| Error::EmptyDataset("nothing to stack".into()))?;
    let mut shape = vec![items.len()];
    shape.extend_from_slice(first.shape());
    let mut re = Vec::with_capacity(first.len() * items.len());
    let mut im = Vec::with_capacity(first.len() * items.len());
    for t in items {
        if t.shape() != first.shape() {
            return Err(Error::Dimension(format!(
                "cannot stack {:?} with {:?}",
                t.shape(),
                first.shape()
            )));
        }
        re.extend_from_slice(t.re.data());
        im.extend_from_slice(t.im.data());
    }
    ComplexTensor::new(
        crate::numerics::Tensor::new(shape.clone(), re)?,
        crate::numerics::Tensor::new(shape, im)?,
    )
}
