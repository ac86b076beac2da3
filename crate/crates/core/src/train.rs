//! NMSE loss and the Adam training loop.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Dataset, WindowedSample};
use crate::error::{Error, Result};
use crate::model::{
    forward, realified_target, record_forward_with, record_params, save_checkpoint, Checkpoint,
    ModelConfig, ModelParams, OptimizerState,
};
use crate::numerics::{ComplexTensor, ParamId, Tape, Tensor};

/// `||pred - truth||^2 / ||truth||^2`.
pub fn nmse_loss(pred: &ComplexTensor, truth: &ComplexTensor) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::Dimension(format!(
            "prediction {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    // Both sums run in the same order so a zero prediction gives exactly 1.
    let (mut err, mut energy) = (0.0, 0.0);
    for i in 0..pred.len() {
        let (a, b) = (pred.get(i), truth.get(i));
        err += (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
        energy += b.0.powi(2) + b.1.powi(2);
    }
    if energy == 0.0 {
        return Err(Error::UndefinedNormalization);
    }
    Ok(err / energy)
}

/// Mean of per-sample NMSE values.
pub fn batch_nmse(preds: &[ComplexTensor], truths: &[ComplexTensor]) -> Result<f64> {
    if preds.len() != truths.len() || preds.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} targets",
            preds.len(),
            truths.len()
        )));
    }
    let total = preds
        .iter()
        .zip(truths)
        .map(|(p, t)| nmse_loss(p, t))
        .sum::<Result<f64>>()?;
    Ok(total / preds.len() as f64)
}

/// Order-preserving forward over a batch of histories.
pub fn predict_batch(
    params: &ModelParams,
    cfg: &ModelConfig,
    histories: &[ComplexTensor],
) -> Result<Vec<ComplexTensor>> {
    histories.iter().map(|h| forward(h, params, cfg)).collect()
}

/// Mean per-sample NMSE over `samples` and its gradient, one tensor per
/// parameter in canonical order.
pub fn batch_gradients(
    params: &ModelParams,
    cfg: &ModelConfig,
    samples: &[&WindowedSample],
) -> Result<(f64, Vec<Tensor>)> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset("gradient of an empty batch".into()));
    }
    let mut tape = Tape::new();
    let vars = record_params(&mut tape, params);
    let mut total = None;
    for s in samples {
        let energy = s.future.energy();
        if energy == 0.0 {
            return Err(Error::UndefinedNormalization);
        }
        let out = record_forward_with(&mut tape, &vars, params, &s.history, cfg)?;
        let sq = tape.sum_squared_diff(out, realified_target(&s.future)?)?;
        let nmse = tape.scale(sq, 1.0 / energy);
        total = Some(match total {
            Some(acc) => tape.add(acc, nmse)?,
            None => nmse,
        });
    }
    let loss = tape.scale(total.expect("non-empty batch"), 1.0 / samples.len() as f64);
    let value = tape.value(loss).data()[0];
    let grads = tape.backward(loss)?;
    let per_param = (0..params.len())
        .map(|i| {
            grads
                .get(ParamId(i))
                .cloned()
                .ok_or_else(|| Error::Gradient(format!("no gradient for {}", params.name(ParamId(i)))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((value, per_param))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    /// Learning-rate factor per epoch.
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            lr0: 1e-3,
            decay: 0.98,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            patience: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be finite and >= 0, got {}", self.lr0)));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!("decay must lie in (0, 1], got {}", self.decay)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return Err(Error::Config("invalid Adam constants".into()));
        }
        Ok(())
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        self.lr0 * self.decay.powi(epoch as i32)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    state: OptimizerState,
}

impl Adam {
    pub fn new(params: &ModelParams, tc: &TrainConfig) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        Self::resume(
            OptimizerState {
                step: 0,
                m: zeros.clone(),
                v: zeros,
            },
            tc,
        )
    }

    pub fn resume(state: OptimizerState, tc: &TrainConfig) -> Self {
        Self {
            beta1: tc.beta1,
            beta2: tc.beta2,
            eps: tc.eps,
            state,
        }
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[Tensor], lr: f64) {
        let s = &mut self.state;
        s.step += 1;
        let c1 = 1.0 - self.beta1.powi(s.step as i32);
        let c2 = 1.0 - self.beta2.powi(s.step as i32);
        for (i, g) in grads.iter().enumerate() {
            let p = params.get_mut(ParamId(i)).data_mut();
            let m = s.m[i].data_mut();
            let v = s.v[i].data_mut();
            for (j, &gj) in g.data().iter().enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let update = lr * (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
                p[j] -= update;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_nmse: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
    pub best_val_nmse: Option<f64>,
    pub checkpoint: Option<PathBuf>,
    pub early_stopped: bool,
}

impl TrainReport {
    /// `epoch,train_loss,val_nmse,lr`. Wall times go to [`write_timing_csv`]
    /// so this file depends only on the inputs.
    ///
    /// [`write_timing_csv`]: TrainReport::write_timing_csv
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,train_loss,val_nmse,lr\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{:e},{:e},{:e}\n", e.epoch, e.train_loss, e.val_nmse, e.lr));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn write_timing_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "epoch,seconds")?;
        for e in &self.epochs {
            writeln!(f, "{},{:.3}", e.epoch, e.seconds)?;
        }
        Ok(())
    }
}

/// Where training starts and what it writes.
#[derive(Debug, Clone, Default)]
pub struct TrainSession {
    /// Best-validation checkpoint path, rewritten on every improvement.
    pub checkpoint: Option<PathBuf>,
    /// Continue from a checkpoint: its parameters, optimizer moments and
    /// epoch count.
    pub resume: Option<Checkpoint>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub params: ModelParams,
    pub report: TrainReport,
}

/// Mean NMSE of the model over `data`.
pub fn dataset_nmse(params: &ModelParams, cfg: &ModelConfig, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("cannot evaluate on an empty dataset".into()));
    }
    let mut total = 0.0;
    for s in &data.samples {
        total += nmse_loss(&forward(&s.history, params, cfg)?, &s.future)?;
    }
    Ok(total / data.len() as f64)
}

fn check_dims(cfg: &ModelConfig, data: &Dataset, name: &str) -> Result<()> {
    let found = (data.history_len, data.horizon, data.system.subcarriers, data.system.pairs());
    let expected = (cfg.history_len, cfg.horizon, cfg.subcarriers, cfg.pairs);
    if found != expected {
        return Err(Error::ConfigMismatch(format!(
            "{name} set has (T, L, K, A) = {found:?}, model expects {expected:?}"
        )));
    }
    Ok(())
}

/// Trains from `params` (or from `session.resume`) for `tc.epochs` epochs
/// in total, counting epochs already done by a resumed checkpoint.
pub fn train(
    cfg: &ModelConfig,
    params: ModelParams,
    train_set: &Dataset,
    val_set: &Dataset,
    tc: &TrainConfig,
    session: &TrainSession,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    tc.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyDataset("training needs non-empty train and val sets".into()));
    }
    check_dims(cfg, train_set, "train")?;
    check_dims(cfg, val_set, "val")?;

    let (mut params, mut adam, start) = match &session.resume {
        Some(ckpt) => {
            if let Some(diff) = ckpt.config.diff(cfg) {
                return Err(Error::ConfigMismatch(diff));
            }
            let adam = match &ckpt.optimizer {
                Some(s) => Adam::resume(s.clone(), tc),
                None => Adam::new(&ckpt.params, tc),
            };
            (ckpt.params.clone(), adam, ckpt.epochs_done)
        }
        None => {
            params.check_layout(cfg)?;
            let adam = Adam::new(&params, tc);
            (params, adam, 0)
        }
    };

    let save = |params: &ModelParams, adam: &Adam, epochs_done: usize| -> Result<()> {
        if let Some(path) = &session.checkpoint {
            save_checkpoint(
                &Checkpoint {
                    config: cfg.clone(),
                    params: params.clone(),
                    epochs_done,
                    optimizer: Some(adam.state().clone()),
                },
                path,
            )?;
        }
        Ok(())
    };

    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: None,
        best_val_nmse: None,
        checkpoint: session.checkpoint.clone(),
        early_stopped: false,
    };
    let mut best = params.clone();
    if start >= tc.epochs {
        save(&params, &adam, start)?;
        return Ok(TrainOutcome { params, report });
    }

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stale = 0;
    for epoch in start..tc.epochs {
        let clock = Instant::now();
        let lr = tc.lr(epoch);
        let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(tc.batch_size).enumerate() {
            let batch: Vec<&WindowedSample> = chunk.iter().map(|&i| &train_set.samples[i]).collect();
            let (loss, grads) = batch_gradients(&params, cfg, &batch)?;
            if !loss.is_finite() || !grads.iter().all(Tensor::all_finite) {
                return Err(Error::Divergence { epoch, batch: b, loss });
            }
            adam.step(&mut params, &grads, lr);
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_nmse = dataset_nmse(&params, cfg, val_set)?;
        if !val_nmse.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: order.len().div_ceil(tc.batch_size),
                loss: val_nmse,
            });
        }
        report.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_nmse,
            lr,
            seconds: clock.elapsed().as_secs_f64(),
        });

        if report.best_val_nmse.map_or(true, |b| val_nmse < b) {
            report.best_val_nmse = Some(val_nmse);
            report.best_epoch = Some(epoch);
            best = params.clone();
            save(&params, &adam, epoch + 1)?;
            stale = 0;
        } else {
            stale += 1;
            if stale >= tc.patience {
                report.early_stopped = true;
                break;
            }
        }
    }
    Ok(TrainOutcome { params: best, report })
}
