//! Synthetic MIMO-OFDM channels from a clustered multipath model.
//!
//! A [`ClusterSet`] lists the rays between the base-station array and one UE
//! antenna. [`generate_sequence`] evaluates every ray at each frame time and
//! subcarrier frequency, giving a `T x K x (n_t n_r)` [`CsiSequence`].

mod dataset;
mod geometry;
mod sampler;
mod window;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ComplexTensor;

pub use dataset::{
    generate_dataset, generate_splits, load_dataset, save_dataset, write_metadata, Dataset,
    DatasetSpec, SplitSizes, DATASET_MAGIC, DATASET_VERSION, SPLIT_NAMES,
};
pub use geometry::{channel_vector, generate_sequence, steering_vector};
pub use sampler::{kmh_to_mps, max_doppler_hz, sample_clusters, ClusterProfile, SPEED_OF_LIGHT};
pub use window::{add_noise, window, WindowedSample};

/// Array and OFDM numerology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Horizontal elements of the base-station UPA.
    pub n_h: usize,
    /// Vertical elements of the base-station UPA.
    pub n_v: usize,
    /// UE antennas.
    pub n_r: usize,
    /// Subcarriers, `K`.
    pub subcarriers: usize,
    pub carrier_hz: f64,
    pub subcarrier_spacing_hz: f64,
    /// Time between consecutive CSI frames.
    pub frame_interval_s: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_h: 4,
            n_v: 2,
            n_r: 2,
            subcarriers: 48,
            carrier_hz: 2.4e9,
            subcarrier_spacing_hz: 180e3,
            frame_interval_s: 0.5e-3,
        }
    }
}

impl SystemConfig {
    /// Reduced array and band used by the experiment presets. The full default
    /// makes the fusion layer of the model impractically large.
    pub fn desk() -> Self {
        Self {
            n_h: 2,
            n_v: 1,
            n_r: 1,
            subcarriers: 4,
            ..Self::default()
        }
    }

    pub fn n_t(&self) -> usize {
        self.n_h * self.n_v
    }

    /// Antenna pairs per subcarrier, `n_t * n_r`.
    pub fn pairs(&self) -> usize {
        self.n_t() * self.n_r
    }

    /// Subcarrier frequencies centred on the carrier.
    pub fn subcarrier_hz(&self, k: usize) -> f64 {
        self.carrier_hz
            + (k as f64 - (self.subcarriers as f64 - 1.0) / 2.0) * self.subcarrier_spacing_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_h == 0 || self.n_v == 0 || self.n_r == 0 || self.subcarriers == 0 {
            return Err(Error::Config(format!(
                "antenna and subcarrier counts must be >= 1: {self:?}"
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.carrier_hz)
            || !positive(self.subcarrier_spacing_hz)
            || !positive(self.frame_interval_s)
        {
            return Err(Error::Config(format!(
                "carrier, spacing and frame interval must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// One propagation path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// Gain magnitude, `>= 0`.
    pub beta: f64,
    /// Doppler shift in Hz.
    pub nu: f64,
    /// Delay in seconds, `>= 0`.
    pub tau: f64,
    /// Initial phase in radians.
    pub phi0: f64,
    /// Elevation in radians.
    pub theta: f64,
    /// Azimuth in radians.
    pub varphi: f64,
}

impl PathParams {
    /// A unit-gain static path from broadside.
    pub fn unit() -> Self {
        Self {
            beta: 1.0,
            nu: 0.0,
            tau: 0.0,
            phi0: 0.0,
            theta: 0.0,
            varphi: 0.0,
        }
    }
}

/// Scattering clusters, each a non-empty list of rays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<PathParams>>,
}

impl ClusterSet {
    pub fn new(clusters: Vec<Vec<PathParams>>) -> Result<Self> {
        if clusters.is_empty() || clusters.iter().any(Vec::is_empty) {
            return Err(Error::Config(
                "a cluster set needs at least one cluster and one ray per cluster".into(),
            ));
        }
        Ok(Self { clusters })
    }

    pub fn paths(&self) -> impl Iterator<Item = &PathParams> {
        self.clusters.iter().flatten()
    }

    /// Concatenation of two cluster sets.
    pub fn merge(&self, other: &ClusterSet) -> ClusterSet {
        let mut clusters = self.clusters.clone();
        clusters.extend(other.clusters.iter().cloned());
        ClusterSet { clusters }
    }
}

/// CSI frames over time: `frames` is `T x K x (n_t n_r)`, antenna pairs ordered
/// UE-antenna major.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiSequence {
    pub frames: ComplexTensor,
    pub config: SystemConfig,
}

impl CsiSequence {
    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame_interval_s(&self) -> f64 {
        self.config.frame_interval_s
    }
}
