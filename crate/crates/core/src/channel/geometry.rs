use std::f64::consts::PI;

use super::{ClusterSet, CsiSequence, PathParams, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{ComplexTensor, Tensor};

/// Half-wavelength UPA response `a_h(theta, varphi) (x) a_v(theta)`.
///
/// `a_h[p] = exp(j pi p sin(varphi) cos(theta))`, `a_v[q] = exp(j pi q sin(theta))`;
/// entry `p * n_v + q` holds `a_h[p] a_v[q]`.
pub fn steering_vector(theta: f64, varphi: f64, cfg: &SystemConfig) -> ComplexTensor {
    let mut out = ComplexTensor::zeros(&[cfg.n_t()]);
    let h_step = PI * varphi.sin() * theta.cos();
    let v_step = PI * theta.sin();
    for p in 0..cfg.n_h {
        for q in 0..cfg.n_v {
            let phase = p as f64 * h_step + q as f64 * v_step;
            out.set(p * cfg.n_v + q, phase.cos(), phase.sin());
        }
    }
    out
}

fn path_coefficient(path: &PathParams, t: f64, f: f64) -> (f64, f64) {
    let phase = 2.0 * PI * (path.nu * t - f * path.tau) + path.phi0;
    (path.beta * phase.cos(), path.beta * phase.sin())
}

/// Superposition of all rays at time `t` and frequency `f_hz`: a length-`n_t` vector.
pub fn channel_vector(
    t: f64,
    f_hz: f64,
    clusters: &ClusterSet,
    cfg: &SystemConfig,
) -> ComplexTensor {
    let n_t = cfg.n_t();
    let mut re = vec![0.0; n_t];
    let mut im = vec![0.0; n_t];
    for path in clusters.paths() {
        let (cr, ci) = path_coefficient(path, t, f_hz);
        let a = steering_vector(path.theta, path.varphi, cfg);
        for i in 0..n_t {
            let (ar, ai) = a.get(i);
            re[i] += cr * ar - ci * ai;
            im[i] += cr * ai + ci * ar;
        }
    }
    ComplexTensor {
        re: Tensor::new(vec![n_t], re).expect("n_t >= 1"),
        im: Tensor::new(vec![n_t], im).expect("n_t >= 1"),
    }
}

/// Frames `0..t_total` sampled every `frame_interval_s`. `per_ue[r]` holds the
/// rays seen by UE antenna `r`.
pub fn generate_sequence(
    per_ue: &[ClusterSet],
    cfg: &SystemConfig,
    t_total: usize,
) -> Result<CsiSequence> {
    cfg.validate()?;
    if t_total == 0 {
        return Err(Error::Precondition("sequence length must be >= 1".into()));
    }
    if per_ue.len() != cfg.n_r {
        return Err(Error::Dimension(format!(
            "{} cluster sets for {} UE antennas",
            per_ue.len(),
            cfg.n_r
        )));
    }
    let (n_t, k_count, pairs) = (cfg.n_t(), cfg.subcarriers, cfg.pairs());
    // Steering vectors do not depend on time or frequency.
    let steering: Vec<Vec<(PathParams, ComplexTensor)>> = per_ue
        .iter()
        .map(|set| {
            set.paths()
                .map(|p| (p.clone(), steering_vector(p.theta, p.varphi, cfg)))
                .collect()
        })
        .collect();

    let mut frames = ComplexTensor::zeros(&[t_total, k_count, pairs]);
    for ti in 0..t_total {
        let t = ti as f64 * cfg.frame_interval_s;
        for k in 0..k_count {
            let f = cfg.subcarrier_hz(k);
            for (r, rays) in steering.iter().enumerate() {
                let base = (ti * k_count + k) * pairs + r * n_t;
                for (path, a) in rays {
                    let (cr, ci) = path_coefficient(path, t, f);
                    for i in 0..n_t {
                        let (ar, ai) = a.get(i);
                        let (er, ei) = frames.get(base + i);
                        frames.set(base + i, er + cr * ar - ci * ai, ei + cr * ai + ci * ar);
                    }
                }
            }
        }
    }
    Ok(CsiSequence {
        frames,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_h: usize, n_v: usize) -> SystemConfig {
        SystemConfig {
            n_h,
            n_v,
            n_r: 1,
            subcarriers: 4,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn single_element_array() {
        let a = steering_vector(0.4, -1.1, &cfg(1, 1));
        assert_eq!(a.get(0), (1.0, 0.0));
    }

    #[test]
    fn broadside_is_all_ones() {
        let a = steering_vector(0.0, 0.0, &cfg(4, 2));
        for i in 0..8 {
            assert_eq!(a.get(i), (1.0, 0.0));
        }
    }

    #[test]
    fn steering_entries_have_unit_modulus() {
        let a = steering_vector(0.7, 2.1, &cfg(3, 5));
        for i in 0..15 {
            let (r, im) = a.get(i);
            assert!((r * r + im * im - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn static_unit_path_is_constant_one() {
        let set = ClusterSet::new(vec![vec![PathParams::unit()]]).unwrap();
        let c = cfg(1, 1);
        for &t in &[0.0, 0.013, 1.7] {
            let h = channel_vector(t, 0.0, &set, &c);
            assert_eq!(h.get(0), (1.0, 0.0));
        }
    }

    #[test]
    fn wrong_ue_count_is_rejected() {
        let set = ClusterSet::new(vec![vec![PathParams::unit()]]).unwrap();
        let mut c = cfg(1, 1);
        c.n_r = 2;
        assert!(generate_sequence(&[set], &c, 3).is_err());
    }
}
