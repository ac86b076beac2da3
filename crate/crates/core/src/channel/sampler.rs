use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClusterSet, PathParams, SystemConfig};
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

/// Largest Doppler shift `v f_c / c` for a UE moving at `velocity_mps`.
pub fn max_doppler_hz(velocity_mps: f64, carrier_hz: f64) -> f64 {
    velocity_mps * carrier_hz / SPEED_OF_LIGHT
}

/// Statistics of the clustered ray sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterProfile {
    pub clusters: usize,
    pub rays_per_cluster: usize,
    /// Upper bound on any ray delay.
    pub max_delay_s: f64,
    /// Half-width of the per-ray angular offset around the cluster centre.
    pub angle_spread_rad: f64,
}

impl Default for ClusterProfile {
    fn default() -> Self {
        Self {
            clusters: 3,
            rays_per_cluster: 8,
            max_delay_s: 3e-6,
            angle_spread_rad: 0.1,
        }
    }
}

/// Draws one cluster set.
///
/// Cluster delays are uniform in `[0, 0.9 max_delay]`, rays spread a further
/// `0.1 max_delay`. Cluster powers decay exponentially with delay and are
/// normalised so the ray powers sum to one, which gives `E|h|^2 = n_t`.
/// Each ray's Doppler is `nu_max cos(alpha)` with `alpha` uniform.
pub fn sample_clusters<R: Rng + ?Sized>(
    velocity_mps: f64,
    cfg: &SystemConfig,
    profile: &ClusterProfile,
    rng: &mut R,
) -> Result<ClusterSet> {
    if !(velocity_mps >= 0.0) || !velocity_mps.is_finite() {
        return Err(Error::Precondition(format!(
            "velocity must be finite and >= 0, got {velocity_mps}"
        )));
    }
    if profile.clusters == 0 || profile.rays_per_cluster == 0 {
        return Err(Error::Config("cluster profile needs >= 1 cluster and ray".into()));
    }
    let nu_max = max_doppler_hz(velocity_mps, cfg.carrier_hz);
    let decay = (profile.max_delay_s / 3.0).max(f64::MIN_POSITIVE);

    let mut clusters = Vec::with_capacity(profile.clusters);
    let mut powers = Vec::with_capacity(profile.clusters);
    for _ in 0..profile.clusters {
        let delay = rng.gen::<f64>() * 0.9 * profile.max_delay_s;
        let azimuth = rng.gen_range(-PI / 2.0..PI / 2.0);
        let elevation = rng.gen_range(-PI / 6.0..PI / 6.0);
        powers.push((-delay / decay).exp());
        let rays = (0..profile.rays_per_cluster)
            .map(|_| {
                let jitter = |rng: &mut R| {
                    (rng.gen::<f64>() * 2.0 - 1.0) * profile.angle_spread_rad
                };
                let varphi = (azimuth + jitter(rng)).clamp(-PI, PI);
                let theta = (elevation + jitter(rng)).clamp(-PI, PI);
                let alpha = rng.gen::<f64>() * 2.0 * PI;
                PathParams {
                    beta: 0.0,
                    nu: nu_max * alpha.cos(),
                    tau: delay + rng.gen::<f64>() * 0.1 * profile.max_delay_s,
                    phi0: rng.gen::<f64>() * 2.0 * PI - PI,
                    theta,
                    varphi,
                }
            })
            .collect::<Vec<_>>();
        clusters.push(rays);
    }
    let total: f64 = powers.iter().sum();
    for (rays, p) in clusters.iter_mut().zip(&powers) {
        let beta = (p / total / profile.rays_per_cluster as f64).sqrt();
        for ray in rays.iter_mut() {
            ray.beta = beta;
        }
    }
    ClusterSet::new(clusters)
}
