//! Rates, RIS power and constraint residuals on a given channel set.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, Pos};
use crate::config::SystemConfig;

/// RIS coefficients with the active-element mask and amplitude cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisProfile {
    pub alpha: Vec<C64>,
    pub active: Vec<bool>,
    pub a_max: f64,
}

impl RisProfile {
    pub fn new(alpha: Vec<C64>, active: Vec<bool>, a_max: f64) -> Self {
        assert_eq!(alpha.len(), active.len(), "mask length must match alpha");
        RisProfile { alpha, active, a_max }
    }

    pub fn zeros(cfg: &SystemConfig) -> Self {
        Self::new(vec![C64::new(0.0, 0.0); cfg.num_elements()], cfg.active_mask(), cfg.a_max_lin())
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn cap(&self, n: usize) -> f64 {
        if self.active[n] {
            self.a_max
        } else {
            1.0
        }
    }

    /// Coefficients off the active set (zero elsewhere).
    pub fn passive_part(&self) -> Vec<C64> {
        self.masked(false)
    }

    /// Coefficients on the active set (zero elsewhere).
    pub fn active_part(&self) -> Vec<C64> {
        self.masked(true)
    }

    fn masked(&self, keep_active: bool) -> Vec<C64> {
        self.alpha
            .iter()
            .zip(&self.active)
            .map(|(a, &act)| if act == keep_active { *a } else { C64::new(0.0, 0.0) })
            .collect()
    }

    /// Largest relative amplitude excess over the per-element caps.
    pub fn amplitude_residual(&self) -> f64 {
        (0..self.len())
            .map(|n| ((self.alpha[n].norm() - self.cap(n)) / self.cap(n)).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Clips every amplitude to its cap, keeping phases.
    pub fn clip(&mut self) {
        for n in 0..self.len() {
            let cap = self.cap(n);
            let a = self.alpha[n];
            if a.norm() > cap {
                self.alpha[n] = a * (cap / a.norm());
            }
        }
    }
}

/// Transmit vectors: one per UE (static) or one per slot (mobile).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beamformers(pub Vec<Vec<C64>>);

impl Beamformers {
    pub fn power(&self, i: usize) -> f64 {
        norm2(&self.0[i])
    }

    pub fn total_power(&self) -> f64 {
        self.0.iter().map(|w| norm2(w)).sum()
    }
}

/// Relaxed TDMA schedule `b[k][t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub b: Vec<Vec<f64>>,
}

impl Schedule {
    pub fn single(k: usize, num_ues: usize, slots: usize) -> Self {
        let mut b = vec![vec![0.0; slots]; num_ues];
        b[k] = vec![1.0; slots];
        Schedule { b }
    }

    pub fn num_slots(&self) -> usize {
        self.b.first().map_or(0, Vec::len)
    }

    /// UE with the largest share of slot `t`; ties go to the lowest index.
    pub fn leader(&self, t: usize) -> usize {
        let mut best = 0;
        for k in 1..self.b.len() {
            if self.b[k][t] > self.b[best][t] {
                best = k;
            }
        }
        best
    }

    /// Binary view: each slot goes to its leader, or to nobody if unused.
    pub fn rounded(&self) -> Schedule {
        let mut b = vec![vec![0.0; self.num_slots()]; self.b.len()];
        for t in 0..self.num_slots() {
            let k = self.leader(t);
            if self.b[k][t] > 0.0 {
                b[k][t] = 1.0;
            }
        }
        Schedule { b }
    }

    pub fn is_binary(&self, tol: f64) -> bool {
        self.b
            .iter()
            .flatten()
            .all(|&x| x.abs() <= tol || (x - 1.0).abs() <= tol)
    }

    /// Largest violation of `0 <= b <= 1` and `sum_k b[k][t] <= 1`.
    pub fn residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.b {
            for &x in row {
                worst = worst.max(-x).max(x - 1.0);
            }
        }
        for t in 0..self.num_slots() {
            let s: f64 = self.b.iter().map(|r| r[t]).sum();
            worst = worst.max(s - 1.0);
        }
        worst.max(0.0)
    }
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Plain dot product `h w` of a row channel with a beamformer.
pub fn apply(h: &[C64], w: &[C64]) -> C64 {
    h.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// `sigma_r^2 ||h2k^H Psi||^2 + sigma_u^2`.
pub fn noise_power(cfg: &SystemConfig, ch: &ChannelSet, k: usize, ris: &RisProfile) -> f64 {
    let amplified: f64 = (0..ris.len())
        .filter(|&n| ris.active[n])
        .map(|n| ch.h2(k, n).norm_sqr() * ris.alpha[n].norm_sqr())
        .sum();
    cfg.sigma_r2_w() * amplified + cfg.sigma_u2_w()
}

/// Rate of UE `k` with a hovering UAV, in nats/s/Hz.
pub fn rate_static(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    v: &Pos,
    w: &Beamformers,
    ris: &RisProfile,
    k: usize,
) -> f64 {
    let h = ch.effective(k, 0, v, &ris.alpha);
    let signal = apply(&h, &w.0[k]).norm_sqr();
    let interference: f64 = (0..w.0.len())
        .filter(|&j| j != k)
        .map(|j| apply(&h, &w.0[j]).norm_sqr())
        .sum();
    (signal / (interference + noise_power(cfg, ch, k, ris))).ln_1p()
}

pub fn rates_static(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    v: &Pos,
    w: &Beamformers,
    ris: &RisProfile,
) -> Vec<f64> {
    (0..ch.num_ues()).map(|k| rate_static(cfg, ch, v, w, ris, k)).collect()
}

/// Rate of UE `k` if served alone in slot `t`.
pub fn rate_mobile_slot(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    k: usize,
    t: usize,
    v: &Pos,
    w: &[C64],
    ris: &RisProfile,
) -> f64 {
    let h = ch.effective(k, t, v, &ris.alpha);
    (apply(&h, w).norm_sqr() / noise_power(cfg, ch, k, ris)).ln_1p()
}

/// `(1/T) sum_t b[t] r[t]`.
pub fn average_rate_mobile(b: &[f64], rates: &[f64]) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    b.iter().zip(rates).map(|(x, r)| x * r).sum::<f64>() / b.len() as f64
}

/// Per-slot rate table `r[k][t]`.
pub fn mobile_rate_table(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    track: &[Pos],
    w: &Beamformers,
    ris: &[RisProfile],
) -> Vec<Vec<f64>> {
    (0..ch.num_ues())
        .map(|k| {
            (0..track.len())
                .map(|t| rate_mobile_slot(cfg, ch, k, t, &track[t], &w.0[t], &ris[t]))
                .collect()
        })
        .collect()
}

pub fn average_rates(schedule: &Schedule, table: &[Vec<f64>]) -> Vec<f64> {
    schedule
        .b
        .iter()
        .zip(table)
        .map(|(b, r)| average_rate_mobile(b, r))
        .collect()
}

/// Transmit power of the active elements, `sum_A |alpha_n|^2 xi_n` with
/// `xi_n = sigma_r^2 + ||h1,n||^2 * tx_power`.
pub fn ris_tx_power(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    ris: &RisProfile,
    tx_power: f64,
    t: usize,
    v: &Pos,
) -> f64 {
    let sr2 = cfg.sigma_r2_w();
    (0..ris.len())
        .filter(|&n| ris.active[n])
        .map(|n| ris.alpha[n].norm_sqr() * (sr2 + ch.h1_norm2(n, t, v) * tx_power))
        .sum()
}

pub fn min_rate(rates: &[f64]) -> f64 {
    rates.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Largest relative violation of the hovering-UAV constraints: UAV power,
/// amplitude caps and RIS power.
pub fn static_residual(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    v: &Pos,
    w: &Beamformers,
    ris: &RisProfile,
) -> f64 {
    let pt = cfg.pt_max_w();
    let pr = cfg.pris_max_w();
    let power = w.total_power();
    let ris_power = ris_tx_power(cfg, ch, ris, power, 0, v);
    let alt = (v.z - cfg.altitude_m).abs() / cfg.altitude_m;
    [
        (power - pt) / pt,
        ris.amplitude_residual(),
        (ris_power - pr) / pr,
        alt,
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Largest relative violation of the mobile constraints: closure, speed,
/// schedule, per-slot UAV power, amplitude caps and RIS power.
pub fn mobile_residual(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    track: &[Pos],
    schedule: &Schedule,
    w: &Beamformers,
    ris: &[RisProfile],
) -> f64 {
    let pt = cfg.pt_max_w();
    let pr = cfg.pris_max_w();
    let dmax = cfg.d_max_m();
    let scale = if dmax > 0.0 { dmax } else { cfg.area_side_m };
    let mut worst: f64 = schedule.residual();
    if let (Some(a), Some(b)) = (track.first(), track.last()) {
        worst = worst.max((a - b).norm() / cfg.area_side_m);
    }
    for pair in track.windows(2) {
        worst = worst.max(((pair[1] - pair[0]).norm() - dmax) / scale);
    }
    for (t, v) in track.iter().enumerate() {
        worst = worst.max((v.z - cfg.altitude_m).abs() / cfg.altitude_m);
        let p = w.power(t);
        worst = worst.max((p - pt) / pt);
        worst = worst.max(ris[t].amplitude_residual());
        worst = worst.max((ris_tx_power(cfg, ch, &ris[t], p, t, v) - pr) / pr);
    }
    worst.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::area_center;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn setup() -> (SystemConfig, ChannelSet, Pos) {
        let cfg = SystemConfig::desk();
        let v = area_center(&cfg);
        let ch = ChannelSet::sample(&cfg, &[v], 5).unwrap();
        (cfg, ch, v)
    }

    fn random_alpha(cfg: &SystemConfig, seed: u64) -> RisProfile {
        let mut rng = crate::channel::rng_stream(seed, 99);
        let alpha = (0..cfg.num_elements())
            .map(|_| crate::channel::cn01(&mut rng) * 3.0)
            .collect();
        RisProfile::new(alpha, cfg.active_mask(), cfg.a_max_lin())
    }

    #[test]
    fn zero_beams_give_zero_rate() {
        let (cfg, ch, v) = setup();
        let w = Beamformers(vec![vec![C64::new(0.0, 0.0); 2]; 2]);
        let ris = RisProfile::zeros(&cfg);
        assert_eq!(rate_static(&cfg, &ch, &v, &w, &ris, 0), 0.0);
    }

    #[test]
    fn unit_snr_is_ln2() {
        let cfg = SystemConfig {
            num_ues: 1,
            num_antennas: 1,
            ris_nx: 0,
            ris_ny: 0,
            num_active: 0,
            ..SystemConfig::desk()
        };
        let v = area_center(&cfg);
        let ch = ChannelSet::sample(&cfg, &[v], 1).unwrap();
        let h = ch.h0(0, 0, &v)[0];
        let w = Beamformers(vec![vec![C64::new(cfg.sigma_u2_w().sqrt() / h.norm(), 0.0)]]);
        let r = rate_static(&cfg, &ch, &v, &w, &RisProfile::zeros(&cfg), 0);
        assert_relative_eq!(r, 2f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(
            rate_mobile_slot(&cfg, &ch, 0, 0, &v, &w.0[0], &RisProfile::zeros(&cfg)),
            2f64.ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn averages_and_min() {
        assert_eq!(average_rate_mobile(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
        let l2 = 2f64.ln();
        assert_relative_eq!(average_rate_mobile(&[1.0, 1.0], &[l2, l2]), l2);
        assert_eq!(min_rate(&[0.3, 0.7]), 0.3);
        assert_eq!(min_rate(&[0.7, 0.3]), 0.3);
        assert_eq!(min_rate(&[0.5]), 0.5);
    }

    #[test]
    fn ris_power_empty_active_set_is_zero() {
        let (cfg, ch, v) = setup();
        let mut ris = random_alpha(&cfg, 1);
        ris.active = vec![false; ris.len()];
        assert_eq!(ris_tx_power(&cfg, &ch, &ris, 0.1, 0, &v), 0.0);
    }

    #[test]
    fn ris_power_matches_trace_form() {
        let (cfg, ch, v) = setup();
        let ris = random_alpha(&cfg, 2);
        let p = 0.07;
        let n = ris.len();
        let nt = ch.num_antennas();
        let psi = DMatrix::from_fn(n, n, |i, j| {
            if i == j && ris.active[i] {
                ris.alpha[i]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let h1 = DMatrix::from_fn(n, nt, |i, m| ch.h1(i, 0, &v)[m]);
        let sr2 = C64::new(cfg.sigma_r2_w(), 0.0);
        let noise = (&psi * psi.adjoint()).trace() * sr2;
        let ph = &psi * &h1;
        let signal = (&ph * ph.adjoint()).trace() * p;
        let want = (noise + signal).re;
        let got = ris_tx_power(&cfg, &ch, &ris, p, 0, &v);
        assert_relative_eq!(got, want, max_relative = 1e-12);
    }

    #[test]
    fn effective_matches_triple_loop() {
        let (cfg, ch, v) = setup();
        let ris = random_alpha(&cfg, 3);
        for k in 0..cfg.num_ues {
            let h = ch.effective(k, 0, &v, &ris.alpha);
            let h0 = ch.h0(k, 0, &v);
            for m in 0..cfg.num_antennas {
                let mut acc = h0[m];
                for n in 0..cfg.num_elements() {
                    acc += ch.h2(k, n) * ris.alpha[n] * ch.h1(n, 0, &v)[m];
                }
                assert!((acc - h[m]).norm() <= 1e-12 * (1.0 + acc.norm()));
            }
        }
    }

    #[test]
    fn schedule_rounding() {
        let s = Schedule {
            b: vec![vec![0.5, 0.2, 0.0], vec![0.5, 0.8, 0.0]],
        };
        let r = s.rounded();
        assert_eq!(r.b, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        assert!(r.is_binary(0.0));
        assert_eq!(s.residual(), 0.0);
    }

    #[test]
    fn profile_parts_recombine() {
        let cfg = SystemConfig::desk();
        let ris = random_alpha(&cfg, 4);
        let p = ris.passive_part();
        let a = ris.active_part();
        for n in 0..ris.len() {
            assert_eq!(p[n] + a[n], ris.alpha[n]);
            assert!(p[n] == C64::new(0.0, 0.0) || a[n] == C64::new(0.0, 0.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn effective_is_linear_in_alpha(s1 in 0u64..1000, s2 in 0u64..1000) {
            let (cfg, ch, v) = setup();
            let a1 = random_alpha(&cfg, s1).alpha;
            let a2 = random_alpha(&cfg, s2).alpha;
            let sum: Vec<C64> = a1.iter().zip(&a2).map(|(x, y)| x + y).collect();
            let zero = vec![C64::new(0.0, 0.0); a1.len()];
            let h0 = ch.effective(0, 0, &v, &zero);
            let h1 = ch.effective(0, 0, &v, &a1);
            let h2 = ch.effective(0, 0, &v, &a2);
            let h12 = ch.effective(0, 0, &v, &sum);
            for m in 0..h0.len() {
                let lhs = h12[m] - h0[m];
                let rhs = (h1[m] - h0[m]) + (h2[m] - h0[m]);
                prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + h0[m].norm()));
            }
        }

        #[test]
        fn slot_rate_is_phase_invariant(theta in 0.0f64..6.28) {
            let (cfg, ch, v) = setup();
            let ris = random_alpha(&cfg, 7);
            let w = vec![C64::new(0.1, 0.2), C64::new(-0.05, 0.1)];
            let rot: Vec<C64> = w.iter().map(|x| x * C64::from_polar(1.0, theta)).collect();
            let a = rate_mobile_slot(&cfg, &ch, 1, 0, &v, &w, &ris);
            let b = rate_mobile_slot(&cfg, &ch, 1, 0, &v, &rot, &ris);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }

        #[test]
        fn rate_decreases_with_noise(extra in 0.0f64..40.0) {
            let (cfg, ch, v) = setup();
            let ris = random_alpha(&cfg, 8);
            let w = Beamformers(vec![vec![C64::new(0.1, 0.0); 2]; 2]);
            let louder = SystemConfig { sigma_u2_dbm: cfg.sigma_u2_dbm + extra, ..cfg.clone() };
            prop_assert!(rate_static(&louder, &ch, &v, &w, &ris, 0) <= rate_static(&cfg, &ch, &v, &w, &ris, 0) + 1e-15);
        }

        #[test]
        fn ris_power_scales_quadratically(scale in 0.1f64..10.0) {
            let (cfg, ch, v) = setup();
            let ris = random_alpha(&cfg, 9);
            let mut big = ris.clone();
            for a in &mut big.alpha { *a *= scale; }
            let p0 = ris_tx_power(&cfg, &ch, &ris, 0.1, 0, &v);
            let p1 = ris_tx_power(&cfg, &ch, &big, 0.1, 0, &v);
            prop_assert!((p1 - scale * scale * p0).abs() <= 1e-12 * p1.abs().max(1e-30));
        }
    }
}
