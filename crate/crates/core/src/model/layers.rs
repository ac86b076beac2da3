//! Individual stages of the network, each usable on its own.
//!
//! The `record_*` functions append a stage to a [`Tape`]; the public
//! functions of the same name evaluate a stage on plain tensors.

use super::Activation;
use crate::error::{Error, Result};
use crate::numerics::{dft_k, ComplexTensor, Tape, Tensor, Var};

/// Real-valued views of a history window, both `T x C`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainFeatures {
    /// Channel frequency response, flattened with `(re, im)` pairs.
    pub freq: Tensor,
    /// Channel impulse response (unitary IDFT over subcarriers), same layout.
    pub delay: Tensor,
}

/// Splits a `T x K x A` history into frequency- and delay-domain matrices of
/// width `C = 2 K A`.
pub fn dual_domain_expand(history: &ComplexTensor) -> Result<DomainFeatures> {
    let (t, width) = match history.shape() {
        [t, k, a] => (*t, 2 * k * a),
        s => {
            return Err(Error::Dimension(format!(
                "history must be T x K x A, found {s:?}"
            )))
        }
    };
    let freq = history.realify().reshape(&[t, width])?;
    let delay = dft_k(history, true)?.realify().reshape(&[t, width])?;
    Ok(DomainFeatures { freq, delay })
}

pub(crate) fn record_multiscale(
    tape: &mut Tape,
    z0: Var,
    weights: &[Var],
    ranks: &[usize],
) -> Result<Var> {
    if weights.len() != ranks.len() || ranks.is_empty() {
        return Err(Error::Config(format!(
            "{} scale weights for {} scales",
            weights.len(),
            ranks.len()
        )));
    }
    let mut acc: Option<Var> = None;
    for (&w, &r) in weights.iter().zip(ranks) {
        let filtered = tape.spectral_top_k(z0, r)?;
        let weighted = tape.mul(w, filtered)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, weighted)?,
            None => weighted,
        });
    }
    Ok(acc.expect("at least one scale"))
}

/// `sum_q U_q * irfft(top_{r_q}(rfft(z0)))` with per-column top-`r` masks.
pub fn multiscale_enhance(z0: &Tensor, weights: &[Tensor], ranks: &[usize]) -> Result<Tensor> {
    let mut tape = Tape::new();
    let z = tape.constant(z0.clone());
    let w: Vec<Var> = weights.iter().map(|w| tape.constant(w.clone())).collect();
    let out = record_multiscale(&mut tape, z, &w, ranks)?;
    Ok(tape.value(out).clone())
}

pub(crate) fn record_cnn(
    tape: &mut Tape,
    z: Var,
    layers: &[(Var, Var)],
    activation: Activation,
) -> Result<Var> {
    let (t, c) = match tape.value(z).shape() {
        [t, c] => (*t, *c),
        s => return Err(Error::Dimension(format!("CNN input must be T x C, found {s:?}"))),
    };
    if c % 2 != 0 {
        return Err(Error::Config(format!("feature width {c} is not even")));
    }
    let mut x = tape.reshape(z, &[t, c / 2, 2])?;
    for (i, &(w, b)) in layers.iter().enumerate() {
        if i > 0 && activation == Activation::Gelu {
            x = tape.gelu(x);
        }
        x = tape.conv1d(x, w, b)?;
    }
    tape.reshape(x, &[t, c])
}

/// Cascaded same-padded convolutions along the feature axis of each time step,
/// with `(re, im)` as the two input channels and `activation` between layers.
/// `layers` holds `(weight [C_out, C_in, K], bias [C_out])`.
pub fn cnn_extract(
    z: &Tensor,
    layers: &[(Tensor, Tensor)],
    activation: Activation,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let vars: Vec<(Var, Var)> = layers
        .iter()
        .map(|(w, b)| (tape.constant(w.clone()), tape.constant(b.clone())))
        .collect();
    let out = record_cnn(&mut tape, zv, &vars, activation)?;
    Ok(tape.value(out).clone())
}

pub(crate) fn record_kan(tape: &mut Tape, q: Var, coeffs: &[Var], prescale: f64) -> Result<Var> {
    let scaled = if prescale == 1.0 { q } else { tape.scale(q, prescale) };
    let squashed = tape.tanh(scaled);
    tape.chebyshev(squashed, coeffs)
}

/// `sum_m W_m * T_m(tanh(prescale * q))`, element-wise.
pub fn kan_map(q: &Tensor, coeffs: &[Tensor], prescale: f64) -> Result<Tensor> {
    let mut tape = Tape::new();
    let qv = tape.constant(q.clone());
    let w: Vec<Var> = coeffs.iter().map(|c| tape.constant(c.clone())).collect();
    let out = record_kan(&mut tape, qv, &w, prescale)?;
    Ok(tape.value(out).clone())
}

/// Stand-in for the CNN and KAN stages: one hidden dense layer per time step.
pub(crate) fn record_dense_stage(tape: &mut Tape, z: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.dense(z, w, b)?;
    Ok(tape.gelu(y))
}

pub(crate) fn record_fusion(
    tape: &mut Tape,
    branches: &[Var],
    weight: Var,
    bias: Var,
    activation: Activation,
    horizon: usize,
) -> Result<Var> {
    let mut fused = *branches
        .first()
        .ok_or_else(|| Error::Config("fusion needs at least one branch".into()))?;
    for &b in &branches[1..] {
        fused = tape.concat_cols(fused, b)?;
    }
    let n = tape.value(fused).len();
    let flat = tape.reshape(fused, &[n])?;
    let mut out = tape.dense(flat, weight, bias)?;
    if activation == Activation::Gelu {
        out = tape.gelu(out);
    }
    let width = tape.value(out).len() / horizon;
    tape.reshape(out, &[horizon, width])
}

/// Concatenates branch features, applies the dense map and rebuilds a complex
/// `P x K x A` prediction from the `(re, im)` pairs.
pub fn fuse_and_predict(
    branches: &[&Tensor],
    weight: &Tensor,
    bias: &Tensor,
    activation: Activation,
    out_shape: [usize; 3],
) -> Result<ComplexTensor> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = branches.iter().map(|b| tape.constant((*b).clone())).collect();
    let w = tape.constant(weight.clone());
    let b = tape.constant(bias.clone());
    let out = record_fusion(&mut tape, &vars, w, b, activation, out_shape[0])?;
    ComplexTensor::from_realified(tape.value(out), &out_shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rfft_bins;

    #[test]
    fn freq_branch_inverts_exactly() {
        let h = ComplexTensor::new(
            Tensor::from_fn(&[3, 2, 2], |i| i as f64 * 0.5),
            Tensor::from_fn(&[3, 2, 2], |i| 1.0 - i as f64),
        )
        .unwrap();
        let f = dual_domain_expand(&h).unwrap();
        assert_eq!(f.freq.shape(), &[3, 8]);
        assert_eq!(ComplexTensor::from_realified(&f.freq, &[3, 2, 2]).unwrap(), h);
    }

    #[test]
    fn full_spectrum_scales_are_identity() {
        let t = 16;
        let z = Tensor::from_fn(&[t, 3], |i| ((i * 37) % 11) as f64 - 5.0);
        let r = rfft_bins(t);
        let u = vec![Tensor::full(&[t, 3], 1.0 / 3.0); 3];
        let out = multiscale_enhance(&z, &u, &[r, r, r]).unwrap();
        assert!(out.max_abs_diff(&z) < 1e-10);
    }

    #[test]
    fn zero_convolution_with_gelu_is_zero() {
        let z = Tensor::from_fn(&[4, 8], |i| i as f64);
        let layers = vec![
            (Tensor::zeros(&[4, 2, 3]), Tensor::zeros(&[4])),
            (Tensor::zeros(&[2, 4, 3]), Tensor::zeros(&[2])),
        ];
        let out = cnn_extract(&z, &layers, Activation::Gelu).unwrap();
        assert_eq!(out.sum_squares(), 0.0);
    }

    #[test]
    fn odd_feature_width_is_rejected() {
        let z = Tensor::zeros(&[4, 7]);
        let layers = vec![(Tensor::zeros(&[2, 2, 3]), Tensor::zeros(&[2]))];
        assert!(matches!(
            cnn_extract(&z, &layers, Activation::Identity),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn kan_constant_and_linear_terms() {
        let q = Tensor::from_fn(&[2, 3], |i| i as f64 - 2.5);
        let ones = Tensor::full(&[2, 3], 1.0);
        let zeros = Tensor::zeros(&[2, 3]);
        let c0 = kan_map(&q, &[ones.clone(), zeros.clone(), zeros.clone()], 1.0).unwrap();
        assert_eq!(c0, ones);
        let c1 = kan_map(&q, &[zeros.clone(), ones, zeros], 1.0).unwrap();
        assert_eq!(c1, q.map(f64::tanh));
    }

    #[test]
    fn zero_fusion_predicts_zero() {
        let f = Tensor::from_fn(&[4, 8], |i| i as f64);
        let w = Tensor::zeros(&[16, 64]);
        let b = Tensor::zeros(&[16]);
        let y = fuse_and_predict(&[&f, &f], &w, &b, Activation::Gelu, [2, 2, 2]).unwrap();
        assert_eq!(y.shape(), &[2, 2, 2]);
        assert_eq!(y.energy(), 0.0);
    }
}
