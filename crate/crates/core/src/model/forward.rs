use super::layers::{
    dual_domain_expand, record_cnn, record_dense_stage, record_fusion, record_kan,
    record_multiscale,
};
use super::params::BRANCHES;
use super::{Activation, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::{ComplexTensor, Tape, Tensor, Var};

/// A forward pass left on its tape so a loss can be attached and
/// differentiated. `output` is the real `P x C` prediction.
#[derive(Debug)]
pub struct RecordedForward {
    pub tape: Tape,
    pub output: Var,
}

/// Every parameter recorded once on `tape`, indexed by [`ParamId`].
///
/// [`ParamId`]: crate::numerics::ParamId
pub fn record_params(tape: &mut Tape, params: &ModelParams) -> Vec<Var> {
    params
        .iter()
        .map(|(id, _, t)| tape.param(id, t.clone()))
        .collect()
}

fn lookup(vars: &[Var], params: &ModelParams, name: &str) -> Result<Var> {
    params
        .id(name)
        .map(|id| vars[id.0])
        .ok_or_else(|| Error::ConfigMismatch(format!("missing parameter {name}")))
}

/// Appends one forward pass to `tape`, reading weights from `vars` (as
/// returned by [`record_params`]). Returns the real `P x C` prediction.
pub fn record_forward_with(
    tape: &mut Tape,
    vars: &[Var],
    params: &ModelParams,
    history: &ComplexTensor,
    cfg: &ModelConfig,
) -> Result<Var> {
    let expected = [cfg.history_len, cfg.subcarriers, cfg.pairs];
    if history.shape() != expected {
        return Err(Error::Dimension(format!(
            "history shape {:?}, model expects {expected:?}",
            history.shape()
        )));
    }
    let features = dual_domain_expand(history)?;
    let inputs = [features.freq, features.delay];
    let mut outputs = Vec::with_capacity(cfg.branches());
    let p = |name: String| lookup(vars, params, &name);

    for (branch, input) in BRANCHES.iter().zip(inputs).take(cfg.branches()) {
        let z0 = tape.constant(input);
        let z = if cfg.ablation.multiscale {
            let weights = (0..cfg.scales.len())
                .map(|q| p(format!("{branch}.scale.{q}")))
                .collect::<Result<Vec<_>>>()?;
            record_multiscale(tape, z0, &weights, &cfg.scales)?
        } else {
            z0
        };
        let f = if cfg.ablation.cnn_kan {
            let layers = (0..cfg.conv_layers.len())
                .map(|l| {
                    Ok((
                        p(format!("{branch}.conv.{l}.weight"))?,
                        p(format!("{branch}.conv.{l}.bias"))?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let q = record_cnn(tape, z, &layers, Activation::Gelu)?;
            if cfg.ablation.kan {
                let coeffs = (0..=cfg.cheb_order)
                    .map(|m| p(format!("{branch}.cheb.{m}")))
                    .collect::<Result<Vec<_>>>()?;
                record_kan(tape, q, &coeffs, cfg.kan_prescale)?
            } else {
                q
            }
        } else {
            let w = p(format!("{branch}.dense.weight"))?;
            let b = p(format!("{branch}.dense.bias"))?;
            record_dense_stage(tape, z, w, b)?
        };
        outputs.push(f);
    }

    let w = p("fusion.weight".into())?;
    let b = p("fusion.bias".into())?;
    record_fusion(tape, &outputs, w, b, cfg.fusion_activation, cfg.horizon)
}

/// One forward pass on a fresh tape with every parameter recorded.
pub fn record_forward(
    history: &ComplexTensor,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<RecordedForward> {
    let mut tape = Tape::new();
    let vars = record_params(&mut tape, params);
    let output = record_forward_with(&mut tape, &vars, params, history, cfg)?;
    Ok(RecordedForward { tape, output })
}

/// Predicts the next `horizon` frames, `P x K x A`.
pub fn forward(
    history: &ComplexTensor,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<ComplexTensor> {
    let rec = record_forward(history, params, cfg)?;
    ComplexTensor::from_realified(
        rec.tape.value(rec.output),
        &[cfg.horizon, cfg.subcarriers, cfg.pairs],
    )
}

/// A `P x K x A` target in the `P x C` layout of the model output.
pub fn realified_target(future: &ComplexTensor) -> Result<Tensor> {
    let p = future.shape()[0];
    let n = 2 * future.len() / p;
    future.realify().reshape(&[p, n])
}
