use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::numerics::{ParamId, Tensor};

/// Named trainable tensors in a fixed canonical order. The index of a tensor
/// in this list is its [`ParamId`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    entries: Vec<(String, Tensor)>,
}

pub(crate) const BRANCHES: [&str; 2] = ["freq", "delay"];

impl ModelParams {
    /// Canonical names and shapes for `cfg`.
    pub fn layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
        let (t, c) = (cfg.history_len, cfg.feature_width());
        let mut out = Vec::new();
        for branch in &BRANCHES[..cfg.branches()] {
            if cfg.ablation.multiscale {
                for q in 0..cfg.scales.len() {
                    out.push((format!("{branch}.scale.{q}"), vec![t, c]));
                }
            }
            if cfg.ablation.cnn_kan {
                let mut cin = 2;
                for (l, layer) in cfg.conv_layers.iter().enumerate() {
                    out.push((
                        format!("{branch}.conv.{l}.weight"),
                        vec![layer.out_channels, cin, layer.kernel],
                    ));
                    out.push((format!("{branch}.conv.{l}.bias"), vec![layer.out_channels]));
                    cin = layer.out_channels;
                }
                if cfg.ablation.kan {
                    for m in 0..=cfg.cheb_order {
                        out.push((format!("{branch}.cheb.{m}"), vec![t, c]));
                    }
                }
            } else {
                out.push((format!("{branch}.dense.weight"), vec![c, c]));
                out.push((format!("{branch}.dense.bias"), vec![c]));
            }
        }
        let fused = t * c * cfg.branches();
        let out_dim = cfg.horizon * c;
        out.push(("fusion.weight".into(), vec![out_dim, fused]));
        out.push(("fusion.bias".into(), vec![out_dim]));
        out
    }

    /// Seeded initialisation.
    ///
    /// Convolution, dense and fusion weights are uniform with variance
    /// `1 / fan_in`; biases start at zero; scale weights at `1 / k`. The
    /// Chebyshev coefficients are zero except `W_1`, which starts near the
    /// value that makes `W_1 tanh(s x)` the identity for small `x`.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = cfg.scales.len() as f64;
        let entries = Self::layout(cfg)
            .into_iter()
            .map(|(name, shape)| {
                let tensor = if name.contains(".scale.") {
                    Tensor::full(&shape, 1.0 / k)
                } else if name.ends_with(".bias") {
                    Tensor::zeros(&shape)
                } else if name.contains(".cheb.") {
                    if name.ends_with(".cheb.1") {
                        let centre = 1.0 / cfg.kan_prescale;
                        Tensor::from_fn(&shape, |_| centre * (1.0 + 0.1 * symmetric(&mut rng)))
                    } else {
                        Tensor::zeros(&shape)
                    }
                } else {
                    let fan_in: usize = shape[1..].iter().product();
                    let bound = (3.0 / fan_in as f64).sqrt();
                    Tensor::from_fn(&shape, |_| bound * symmetric(&mut rng))
                };
                (name, tensor)
            })
            .collect();
        Ok(Self { entries })
    }

    pub fn from_entries(entries: Vec<(String, Tensor)>) -> Self {
        Self { entries }
    }

    /// Checks names and shapes against the layout of `cfg`.
    pub fn check_layout(&self, cfg: &ModelConfig) -> Result<()> {
        let layout = Self::layout(cfg);
        if layout.len() != self.entries.len() {
            return Err(Error::ConfigMismatch(format!(
                "expected {} parameter tensors, found {}",
                layout.len(),
                self.entries.len()
            )));
        }
        for ((name, shape), (n, t)) in layout.iter().zip(&self.entries) {
            if name != n || shape.as_slice() != t.shape() {
                return Err(Error::ConfigMismatch(format!(
                    "expected {name} {shape:?}, found {n} {:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].1
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].1
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].0
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|(n, _)| n == name).map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.id(name).map(move |id| self.get_mut(id))
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.all_finite())
    }
}

fn symmetric(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen::<f64>() * 2.0 - 1.0
}
