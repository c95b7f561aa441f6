//! Geometry, path loss and small-scale fading for the three links.
//!
//! Channels are stored in row form: `g0[t][k]` holds the entries of the
//! direct row `h0k^H` before large-scale scaling, `g1[t][n]` the n-th row of
//! the UAV-RIS matrix, and `g2[k][n]` the n-th entry of `h2k^H`. The effective
//! channel of UE `k` is then the row `h0k^H + h2k^H diag(alpha) H1`, applied to
//! a beamformer as a plain (unconjugated) dot product.
//!
//! Large-scale factors are never stored; they are recomputed from the UAV
//! position passed to each accessor.

use nalgebra::Vector3;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SystemConfig;

pub type Pos = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("path loss undefined between coincident points")]
    Coincident,
    #[error("path-loss exponent must be positive, got {0}")]
    BadExponent(f64),
    #[error("track has {got} positions, expected 1 or {slots}")]
    TrackLength { got: usize, slots: usize },
    #[error("CSI error levels must be nonnegative")]
    NegativeError,
}

pub type Result<T> = std::result::Result<T, ChannelError>;

const STREAM_POSITIONS: u64 = 1;
const STREAM_DIRECT: u64 = 2;
const STREAM_RIS_UE: u64 = 3;
const STREAM_CSI: u64 = 5;

/// Seeded generator for one named purpose. Different purposes never share
/// draws, so changing e.g. the RIS size leaves the direct links untouched.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Zero-mean, unit-variance circular complex Gaussian sample.
pub fn cn01<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `zeta0 * d^-exponent`, with distances below 1 m treated as 1 m.
pub fn large_scale_gain(a: &Pos, b: &Pos, exponent: f64, zeta0: f64) -> Result<f64> {
    if !(exponent > 0.0) {
        return Err(ChannelError::BadExponent(exponent));
    }
    let d = (a - b).norm();
    if d == 0.0 {
        return Err(ChannelError::Coincident);
    }
    Ok(zeta0 * d.max(1.0).powf(-exponent))
}

fn gain_clamped(a: &Pos, b: &Pos, exponent: f64, zeta0: f64) -> f64 {
    zeta0 * (a - b).norm().max(1.0).powf(-exponent)
}

/// Planar-array response `exp(j 2 pi (d0/lambda) f(n, phi, phi'))`.
pub fn upa_response(n: usize, azimuth: f64, elevation: f64, nx: usize, spacing: f64) -> C64 {
    let row = (n / nx) as f64;
    let col = (n % nx) as f64;
    let f = row * azimuth.sin() * elevation.sin() + col * azimuth.sin() * elevation.cos();
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * spacing * f)
}

/// Angles of `target` seen from a panel in the x-z plane at `origin`.
///
/// Returns `(phi, phi')` with `sin(phi) cos(phi')` the x direction cosine and
/// `sin(phi) sin(phi')` the z direction cosine.
pub fn panel_angles(origin: &Pos, target: &Pos) -> (f64, f64) {
    let d = target - origin;
    let norm = d.norm();
    if norm == 0.0 {
        return (0.0, 0.0);
    }
    let u = d / norm;
    let s = (u.x * u.x + u.z * u.z).sqrt().min(1.0);
    (s.asin(), u.z.atan2(u.x))
}

/// Per-link uncertainty levels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CsiErrorSpec {
    pub eps_direct: f64,
    pub eps_uav_ris: f64,
    pub eps_ris_ue: f64,
}

impl CsiErrorSpec {
    pub fn uniform(eps: f64) -> Self {
        CsiErrorSpec {
            eps_direct: eps,
            eps_uav_ris: eps,
            eps_ris_ue: eps,
        }
    }

    pub fn is_perfect(&self) -> bool {
        self.eps_direct == 0.0 && self.eps_uav_ris == 0.0 && self.eps_ris_ue == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub zeta0: f64,
    pub exponents: [f64; 3],
    pub ue_positions: Vec<Pos>,
    pub ris_position: Pos,
    /// UAV positions the LoS blocks were generated for.
    pub track: Vec<Pos>,
    pub g0: Vec<Vec<Vec<C64>>>,
    pub g1: Vec<Vec<Vec<C64>>>,
    pub g2: Vec<Vec<C64>>,
}

/// UE positions from the config, or uniform over the area.
pub fn ue_positions(cfg: &SystemConfig, seed: u64) -> Vec<Pos> {
    if let Some(p) = &cfg.ue_positions_m {
        return p.iter().map(|u| Pos::new(u[0], u[1], u[2])).collect();
    }
    let mut rng = rng_stream(seed, STREAM_POSITIONS);
    (0..cfg.num_ues)
        .map(|_| {
            let x = rng.gen::<f64>() * cfg.area_side_m;
            let y = rng.gen::<f64>() * cfg.area_side_m;
            Pos::new(x, y, 0.0)
        })
        .collect()
}

/// Hover point above the centre of the area.
pub fn area_center(cfg: &SystemConfig) -> Pos {
    Pos::new(cfg.area_side_m / 2.0, cfg.area_side_m / 2.0, cfg.altitude_m)
}

fn uav_array_response(m: usize, uav: &Pos, ris: &Pos, spacing: f64) -> C64 {
    // linear array along x at the UAV
    let d = ris - uav;
    let ux = if d.norm() > 0.0 { d.x / d.norm() } else { 0.0 };
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * spacing * m as f64 * ux)
}

/// LoS UAV-RIS block for one UAV position.
pub fn los_block(cfg: &SystemConfig, uav: &Pos) -> Vec<Vec<C64>> {
    let ris = cfg.ris_position();
    let (phi, phi_p) = panel_angles(&ris, uav);
    (0..cfg.num_elements())
        .map(|n| {
            let a = upa_response(n, phi, phi_p, cfg.ris_nx, cfg.spacing_ratio);
            (0..cfg.num_antennas)
                .map(|m| a * uav_array_response(m, uav, &ris, cfg.spacing_ratio).conj())
                .collect()
        })
        .collect()
}

impl ChannelSet {
    /// Draws all small-scale blocks. `track` holds one position (static) or
    /// one per slot (mobile).
    pub fn sample(cfg: &SystemConfig, track: &[Pos], seed: u64) -> Result<Self> {
        if track.is_empty() || (track.len() != 1 && track.len() != cfg.slots) {
            return Err(ChannelError::TrackLength {
                got: track.len(),
                slots: cfg.slots,
            });
        }
        let ues = ue_positions(cfg, seed);
        let ris = cfg.ris_position();
        let (k_n, nt, n) = (cfg.num_ues, cfg.num_antennas, cfg.num_elements());

        let mut rng = rng_stream(seed, STREAM_DIRECT);
        let g0 = (0..track.len())
            .map(|_| {
                (0..k_n)
                    .map(|_| (0..nt).map(|_| cn01(&mut rng)).collect())
                    .collect()
            })
            .collect();

        let g1 = track.iter().map(|v| los_block(cfg, v)).collect();

        let kappa = cfg.rician_kappa;
        let (w_los, w_nlos) = if kappa.is_infinite() {
            (1.0, 0.0)
        } else {
            ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
        };
        let mut rng = rng_stream(seed, STREAM_RIS_UE);
        let g2 = ues
            .iter()
            .map(|u| {
                let (phi, phi_p) = panel_angles(&ris, u);
                (0..n)
                    .map(|i| {
                        let los = upa_response(i, phi, phi_p, cfg.ris_nx, cfg.spacing_ratio);
                        los * w_los + cn01(&mut rng) * w_nlos
                    })
                    .collect()
            })
            .collect();

        Ok(ChannelSet {
            zeta0: cfg.zeta0_lin(),
            exponents: cfg.path_loss_exponents,
            ue_positions: ues,
            ris_position: ris,
            track: track.to_vec(),
            g0,
            g1,
            g2,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.g0[0][0].len()
    }

    pub fn num_elements(&self) -> usize {
        self.g2.first().map_or(0, Vec::len)
    }

    pub fn num_slots(&self) -> usize {
        self.g0.len()
    }

    pub fn beta0(&self, k: usize, v: &Pos) -> f64 {
        gain_clamped(v, &self.ue_positions[k], self.exponents[0], self.zeta0)
    }

    pub fn beta1(&self, v: &Pos) -> f64 {
        gain_clamped(v, &self.ris_position, self.exponents[1], self.zeta0)
    }

    pub fn beta2(&self, k: usize) -> f64 {
        gain_clamped(&self.ris_position, &self.ue_positions[k], self.exponents[2], self.zeta0)
    }

    /// Scaled direct row `h0k^H`.
    pub fn h0(&self, k: usize, t: usize, v: &Pos) -> Vec<C64> {
        let s = self.beta0(k, v).sqrt();
        self.g0[t][k].iter().map(|g| g * s).collect()
    }

    /// Scaled row `n` of the UAV-RIS matrix.
    pub fn h1(&self, n: usize, t: usize, v: &Pos) -> Vec<C64> {
        let s = self.beta1(v).sqrt();
        self.g1[t][n].iter().map(|g| g * s).collect()
    }

    /// Scaled entry `n` of `h2k^H`.
    pub fn h2(&self, k: usize, n: usize) -> C64 {
        self.g2[k][n] * self.beta2(k).sqrt()
    }

    pub fn h1_norm2(&self, n: usize, t: usize, v: &Pos) -> f64 {
        self.beta1(v) * self.g1[t][n].iter().map(|g| g.norm_sqr()).sum::<f64>()
    }

    /// Per-element cascaded rows `h2k,n * h1,n`; the reflected part of the
    /// effective channel is `sum_n alpha_n * cascade[n]`.
    pub fn cascade(&self, k: usize, t: usize, v: &Pos) -> Vec<Vec<C64>> {
        let s = (self.beta1(v) * self.beta2(k)).sqrt();
        (0..self.num_elements())
            .map(|n| {
                let c = self.g2[k][n] * s;
                self.g1[t][n].iter().map(|g| c * g).collect()
            })
            .collect()
    }

    /// Effective row of UE `k` in slot `t` with the UAV at `v`.
    pub fn effective(&self, k: usize, t: usize, v: &Pos, alpha: &[C64]) -> Vec<C64> {
        let mut h = self.h0(k, t, v);
        if self.num_elements() == 0 {
            return h;
        }
        let s = (self.beta1(v) * self.beta2(k)).sqrt();
        for (n, a) in alpha.iter().enumerate() {
            if *a == C64::new(0.0, 0.0) {
                continue;
            }
            let c = self.g2[k][n] * a * s;
            for (hm, g) in h.iter_mut().zip(&self.g1[t][n]) {
                *hm += c * g;
            }
        }
        h
    }

    /// Imperfect estimate `g - dg` with `dg ~ CN(0, eps^2)` on each block.
    ///
    /// The unit draws do not depend on the levels, so estimates at different
    /// levels share one error direction.
    pub fn with_csi_error(&self, spec: &CsiErrorSpec, seed: u64) -> Result<ChannelSet> {
        if spec.eps_direct < 0.0 || spec.eps_uav_ris < 0.0 || spec.eps_ris_ue < 0.0 {
            return Err(ChannelError::NegativeError);
        }
        let mut out = self.clone();
        if spec.is_perfect() {
            return Ok(out);
        }
        let mut rng = rng_stream(seed, STREAM_CSI);
        for slot in out.g0.iter_mut() {
            for row in slot.iter_mut() {
                for g in row.iter_mut() {
                    *g -= cn01(&mut rng) * spec.eps_direct;
                }
            }
        }
        for slot in out.g1.iter_mut() {
            for row in slot.iter_mut() {
                for g in row.iter_mut() {
                    *g -= cn01(&mut rng) * spec.eps_uav_ris;
                }
            }
        }
        for row in out.g2.iter_mut() {
            for g in row.iter_mut() {
                *g -= cn01(&mut rng) * spec.eps_ris_ue;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn large_scale_examples() {
        let o = Pos::zeros();
        assert_relative_eq!(large_scale_gain(&o, &Pos::new(1.0, 0.0, 0.0), 3.2, 1e-3).unwrap(), 1e-3);
        let far = Pos::new(0.0, 100.0, 0.0);
        assert_relative_eq!(large_scale_gain(&o, &far, 2.0, 1e-3).unwrap(), 1e-7, max_relative = 1e-12);
        assert_relative_eq!(
            large_scale_gain(&o, &far, 3.2, 1e-3).unwrap(),
            3.981071705534969e-10,
            max_relative = 1e-12
        );
        assert_eq!(large_scale_gain(&o, &o, 2.0, 1e-3), Err(ChannelError::Coincident));
        assert!(large_scale_gain(&o, &far, 0.0, 1e-3).is_err());
        // clamped below the reference distance
        assert_relative_eq!(large_scale_gain(&o, &Pos::new(0.1, 0.0, 0.0), 2.0, 1e-3).unwrap(), 1e-3);
    }

    #[test]
    fn upa_examples() {
        assert_eq!(upa_response(0, 0.3, 1.1, 4, 0.5), C64::new(1.0, 0.0));
        let r = upa_response(1, FRAC_PI_2, 0.0, 4, 0.5);
        assert!((r - C64::new(-1.0, 0.0)).norm() < 1e-12);
        let r = upa_response(4, FRAC_PI_2, FRAC_PI_2, 4, 0.5);
        assert!((r - C64::from_polar(1.0, PI)).norm() < 1e-12);
    }

    #[test]
    fn panel_angles_match_direction_cosines() {
        let o = Pos::new(1.0, 2.0, 3.0);
        let t = Pos::new(4.0, -5.0, 7.0);
        let (phi, phi_p) = panel_angles(&o, &t);
        let u = (t - o).normalize();
        assert_relative_eq!(phi.sin() * phi_p.cos(), u.x, epsilon = 1e-12);
        assert_relative_eq!(phi.sin() * phi_p.sin(), u.z, epsilon = 1e-12);
    }

    #[test]
    fn seeded_and_los_unit_modulus() {
        let cfg = SystemConfig::desk();
        let track = vec![area_center(&cfg)];
        let a = ChannelSet::sample(&cfg, &track, 7).unwrap();
        let b = ChannelSet::sample(&cfg, &track, 7).unwrap();
        assert_eq!(a, b);
        let c = ChannelSet::sample(&cfg, &track, 8).unwrap();
        assert_ne!(a, c);
        for row in &a.g1[0] {
            for g in row {
                assert_relative_eq!(g.norm(), 1.0, epsilon = 1e-12);
            }
        }
        assert!(ChannelSet::sample(&cfg, &[track[0], track[0]], 7).is_err());
    }

    #[test]
    fn rician_limit() {
        let cfg = SystemConfig {
            rician_kappa: 1e12,
            ..SystemConfig::desk()
        };
        let ch = ChannelSet::sample(&cfg, &[area_center(&cfg)], 3).unwrap();
        let ris = cfg.ris_position();
        for (k, u) in ch.ue_positions.iter().enumerate() {
            let (phi, phi_p) = panel_angles(&ris, u);
            for n in 0..cfg.num_elements() {
                let los = upa_response(n, phi, phi_p, cfg.ris_nx, 0.5);
                assert!((ch.g2[k][n] - los).norm() <= 1e-5);
            }
        }
    }

    #[test]
    fn direct_draws_independent_of_ris_size() {
        let cfg = SystemConfig::desk();
        let bare = SystemConfig {
            ris_nx: 0,
            ris_ny: 0,
            num_active: 0,
            ..cfg.clone()
        };
        let a = ChannelSet::sample(&cfg, &[area_center(&cfg)], 11).unwrap();
        let b = ChannelSet::sample(&bare, &[area_center(&cfg)], 11).unwrap();
        assert_eq!(a.g0, b.g0);
        assert_eq!(b.num_elements(), 0);
        let v = area_center(&cfg);
        assert_eq!(b.effective(0, 0, &v, &[]), b.h0(0, 0, &v));
    }

    #[test]
    fn effective_with_zero_alpha_is_direct() {
        let cfg = SystemConfig::desk();
        let v = area_center(&cfg);
        let ch = ChannelSet::sample(&cfg, &[v], 1).unwrap();
        let zero = vec![C64::new(0.0, 0.0); cfg.num_elements()];
        assert_eq!(ch.effective(1, 0, &v, &zero), ch.h0(1, 0, &v));
    }

    #[test]
    fn csi_error_zero_is_identity() {
        let cfg = SystemConfig::desk();
        let ch = ChannelSet::sample(&cfg, &[area_center(&cfg)], 1).unwrap();
        assert_eq!(ch.with_csi_error(&CsiErrorSpec::uniform(0.0), 9).unwrap(), ch);
        let e1 = ch.with_csi_error(&CsiErrorSpec::uniform(0.1), 9).unwrap();
        let e2 = ch.with_csi_error(&CsiErrorSpec::uniform(0.1), 9).unwrap();
        assert_eq!(e1, e2);
        assert_ne!(e1, ch);
        assert!(ch.with_csi_error(&CsiErrorSpec::uniform(-0.1), 9).is_err());
    }
}
