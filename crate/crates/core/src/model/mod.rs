//! The prediction network.
//!
//! ```text
//! history (T x K x A complex)
//!   |-- realify ------------------> X_F (T x C) --+
//!   '-- IDFT over K, realify -----> X_D (T x C) --+-- per branch:
//!          top-k spectral filters, weighted sum      (multi-scale)
//!          cascaded 1-D convs over the feature axis   (CNN)
//!          tanh, element-wise Chebyshev expansion     (KAN)
//!   concat branches -> flatten -> dense -> P x C -> complex P x K x A
//! ```
//!
//! `C = 2 K A`: every complex entry contributes its real and imaginary part as
//! a pair of adjacent features, which the convolutions see as two channels.

mod checkpoint;
mod forward;
mod layers;
mod params;

use serde::{Deserialize, Serialize};

use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::numerics::rfft_bins;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, OptimizerState, CHECKPOINT_VERSION};
pub use forward::{
    forward, realified_target, record_forward, record_forward_with, record_params, RecordedForward,
};
pub use layers::{
    cnn_extract, dual_domain_expand, fuse_and_predict, kan_map, multiscale_enhance, DomainFeatures,
};
pub use params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Gelu,
}

/// One convolution in the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub kernel: usize,
    pub out_channels: usize,
}

/// Stage switches. All `true` is the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub multiscale: bool,
    pub dual_domain: bool,
    pub kan: bool,
    pub cnn_kan: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self::FULL
    }
}

impl Ablation {
    pub const FULL: Ablation = Ablation {
        multiscale: true,
        dual_domain: true,
        kan: true,
        cnn_kan: true,
    };

    /// Short label: `full` or the `no-*` name of the single disabled stage
    /// (several disabled stages are joined with `+`).
    pub fn label(&self) -> String {
        let mut off = Vec::new();
        if !self.multiscale {
            off.push("no-multiscale");
        }
        if !self.cnn_kan {
            off.push("no-cnnkan");
        }
        if !self.dual_domain {
            off.push("no-dualdomain");
        }
        if !self.kan {
            off.push("no-kan");
        }
        if off.is_empty() {
            "full".into()
        } else {
            off.join("+")
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        let mut a = Self::FULL;
        if label == "full" {
            return Ok(a);
        }
        for part in label.split('+') {
            match part {
                "no-multiscale" => a.multiscale = false,
                "no-cnnkan" => a.cnn_kan = false,
                "no-dualdomain" => a.dual_domain = false,
                "no-kan" => a.kan = false,
                other => return Err(Error::Config(format!("unknown ablation `{other}`"))),
            }
        }
        Ok(a)
    }

    /// All 16 switch combinations.
    pub fn grid() -> impl Iterator<Item = Ablation> {
        (0..16u8).map(|b| Ablation {
            multiscale: b & 1 != 0,
            dual_domain: b & 2 != 0,
            kan: b & 4 != 0,
            cnn_kan: b & 8 != 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// History length `T`.
    pub history_len: usize,
    /// Prediction length.
    pub horizon: usize,
    pub subcarriers: usize,
    /// Antenna pairs `n_t n_r`.
    pub pairs: usize,
    /// Kept rFFT bins per scale; the number of scales is `scales.len()`.
    pub scales: Vec<usize>,
    /// Convolution cascade. The last layer must output 2 channels.
    pub conv_layers: Vec<ConvLayer>,
    /// Highest Chebyshev order `M`.
    pub cheb_order: usize,
    /// Factor applied before `tanh` in the KAN.
    pub kan_prescale: f64,
    pub fusion_activation: Activation,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            history_len: 16,
            horizon: 4,
            subcarriers: 48,
            pairs: 16,
            scales: vec![2, 4, 8],
            conv_layers: vec![
                ConvLayer { kernel: 3, out_channels: 16 },
                ConvLayer { kernel: 3, out_channels: 16 },
                ConvLayer { kernel: 3, out_channels: 2 },
            ],
            cheb_order: 4,
            kan_prescale: 0.5,
            fusion_activation: Activation::Identity,
            ablation: Ablation::FULL,
        }
    }
}

impl ModelConfig {
    /// Default architecture sized for `system`.
    pub fn for_system(system: &SystemConfig) -> Self {
        Self {
            subcarriers: system.subcarriers,
            pairs: system.pairs(),
            ..Self::default()
        }
    }

    /// Feature width `C = 2 K A` of one branch.
    pub fn feature_width(&self) -> usize {
        2 * self.subcarriers * self.pairs
    }

    pub fn branches(&self) -> usize {
        if self.ablation.dual_domain {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.history_len == 0 || self.horizon == 0 || self.subcarriers == 0 || self.pairs == 0 {
            return Err(Error::Config("T, horizon, K and A must be >= 1".into()));
        }
        let bins = rfft_bins(self.history_len);
        if self.scales.is_empty() {
            return Err(Error::Config("at least one scale is required".into()));
        }
        if let Some(r) = self.scales.iter().find(|&&r| r == 0 || r > bins) {
            return Err(Error::Config(format!(
                "kept-bin count {r} outside [1, {bins}] for T = {}",
                self.history_len
            )));
        }
        if self.cheb_order == 0 {
            return Err(Error::Config("Chebyshev order must be >= 1".into()));
        }
        if !self.kan_prescale.is_finite() || self.kan_prescale <= 0.0 {
            return Err(Error::Config("KAN prescale must be positive".into()));
        }
        match self.conv_layers.last() {
            None => return Err(Error::Config("at least one convolution layer is required".into())),
            Some(l) if l.out_channels != 2 => {
                return Err(Error::Config(
                    "the last convolution must return 2 channels (re, im)".into(),
                ))
            }
            _ => {}
        }
        if let Some(l) = self
            .conv_layers
            .iter()
            .find(|l| l.kernel % 2 == 0 || l.out_channels == 0)
        {
            return Err(Error::Config(format!("invalid convolution layer {l:?}")));
        }
        Ok(())
    }

    /// Describes every field that differs from `other`, or `None` when equal.
    pub fn diff(&self, other: &ModelConfig) -> Option<String> {
        let a = serde_json::to_value(self).ok()?;
        let b = serde_json::to_value(other).ok()?;
        let (a, b) = (a.as_object()?, b.as_object()?);
        let diffs: Vec<String> = a
            .iter()
            .filter(|(k, v)| b.get(*k) != Some(v))
            .map(|(k, v)| format!("{k}: expected {}, found {}", b.get(k).unwrap_or(&serde_json::Value::Null), v))
            .collect();
        (!diffs.is_empty()).then(|| diffs.join("; "))
    }
}
