//! Oracle-driven self checks behind `hris verify`.
//!
//! Each suite returns named checks with the measured value and its
//! threshold, so reports can be diffed across builds.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{area_center, cn01, rng_stream, ChannelSet, Pos};
use crate::config::SystemConfig;
use crate::conic::SolveSettings;
use crate::evaluation::{self, Beamformers, RisProfile, Schedule};
use crate::mobile_opt::{optimal_power, passive_phases, MobileState};
use crate::oracle::{self, BoundFamily, BoundTable};
use crate::static_opt::{self, matched};

const STREAM_VERIFY: u64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Bounds,
    PhaseClosedForm,
    PowerClosedForm,
    TinyRis,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Bounds,
        Suite::PhaseClosedForm,
        Suite::PowerClosedForm,
        Suite::TinyRis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Bounds => "bounds",
            Suite::PhaseClosedForm => "phase-closed-form",
            Suite::PowerClosedForm => "power-closed-form",
            Suite::TinyRis => "tiny-ris",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
        }
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            passed: value >= threshold,
            value,
            threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Sizes of the suites; the defaults are the acceptance sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifySizes {
    pub bound_samples: usize,
    pub slots: usize,
    pub power_points: usize,
    pub phase_points: usize,
    pub tiny_seeds: usize,
}

impl Default for VerifySizes {
    fn default() -> Self {
        VerifySizes {
            bound_samples: 10_000,
            slots: 50,
            power_points: 10_000,
            phase_points: 360,
            tiny_seeds: 20,
        }
    }
}

pub fn run_suite(suite: Suite, sizes: &VerifySizes, seed: u64) -> SuiteReport {
    match suite {
        Suite::Bounds => bounds_suite(BoundTable::default(), sizes.bound_samples, seed),
        Suite::PhaseClosedForm => phase_closed_form_suite(sizes.slots, sizes.phase_points, seed),
        Suite::PowerClosedForm => power_closed_form_suite(sizes.slots, sizes.power_points, seed),
        Suite::TinyRis => tiny_ris_suite(sizes.tiny_seeds, sizes.phase_points, seed),
    }
}

/// Majorization, tangency and gradient match for every bound family.
pub fn bounds_suite(table: BoundTable, samples: usize, seed: u64) -> SuiteReport {
    let mut checks = Vec::new();
    for family in BoundFamily::ALL {
        let r = oracle::bound_properties(family, table, samples, seed);
        let name = family.name();
        checks.push(Check::at_least(format!("{name}/majorization"), r.worst_slack, -1e-9));
        checks.push(Check::at_most(format!("{name}/tangency"), r.worst_tangency, 1e-9));
        checks.push(Check::at_most(format!("{name}/gradient"), r.worst_gradient, 1e-4));
    }
    SuiteReport {
        suite: Suite::Bounds,
        checks,
    }
}

fn wrap(x: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = x.rem_euclid(t);
    if r > t / 2.0 {
        r - t
    } else {
        r
    }
}

/// One random single-slot scenario with two passive and one active element.
fn slot_instance(i: usize, seed: u64) -> (SystemConfig, ChannelSet, MobileState, usize) {
    let cfg = SystemConfig {
        num_ues: 2,
        num_antennas: 2,
        ris_nx: 3,
        ris_ny: 1,
        num_active: 1,
        slots: 2,
        seed: seed.wrapping_add(i as u64),
        ..SystemConfig::desk()
    };
    let mut rng = rng_stream(cfg.seed, STREAM_VERIFY);
    let d = cfg.area_side_m;
    let v = Pos::new(rng.gen_range(0.0..d), rng.gen_range(0.0..d), cfg.altitude_m);
    let track = vec![v, v];
    let ch = ChannelSet::sample(&cfg, &track, cfg.seed).expect("valid scenario");
    let k = rng.gen_range(0..cfg.num_ues);
    let pt = cfg.pt_max_w();
    let w: Vec<Vec<C64>> = (0..2)
        .map(|_| {
            let raw: Vec<C64> = (0..cfg.num_antennas).map(|_| cn01(&mut rng)).collect();
            let n = evaluation::norm2(&raw).sqrt();
            raw.into_iter().map(|x| x * (pt.sqrt() / n)).collect()
        })
        .collect();
    let sr2 = cfg.sigma_r2_w();
    let amp = rng.gen_range(0.2..1.0) * cfg.a_max_lin().min((cfg.pris_max_w() / sr2).sqrt());
    let mask = cfg.active_mask();
    let alpha: Vec<C64> = (0..cfg.num_elements())
        .map(|n| {
            let r = if mask[n] { amp } else { 1.0 };
            C64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let ris = RisProfile::new(alpha, mask, cfg.a_max_lin());
    let st = MobileState {
        track,
        schedule: Schedule::single(k, cfg.num_ues, 2),
        w: Beamformers(w),
        ris: vec![ris.clone(), ris],
        tau: 0.0,
    };
    (cfg, ch, st, k)
}

/// Closed-form passive phases against a refined grid over the same phases.
pub fn phase_closed_form_suite(slots: usize, points: usize, seed: u64) -> SuiteReport {
    let mut worst: f64 = 0.0;
    for i in 0..slots {
        let (cfg, ch, st, k) = slot_instance(i, seed);
        let alpha = passive_phases(&ch, &st, 0, k);
        let free: Vec<usize> = (0..alpha.len()).filter(|&n| !st.ris[0].active[n]).collect();
        let v = st.track[0];
        let w = &st.w.0[0];
        let base = &st.ris[0];
        let grid = oracle::grid_phase_search(&base.alpha, &free, &vec![1.0; free.len()], points, |a| {
            let prof = RisProfile {
                alpha: a.to_vec(),
                ..base.clone()
            };
            evaluation::rate_mobile_slot(&cfg, &ch, k, 0, &v, w, &prof)
        })
        .expect("grid within cap");
        for (j, &n) in free.iter().enumerate() {
            worst = worst.max(wrap(alpha[n].arg() - grid.point[j]).abs());
        }
    }
    SuiteReport {
        suite: Suite::PhaseClosedForm,
        checks: vec![Check::at_most("passive-phase/max-error-rad", worst, 1e-3)],
    }
}

/// Closed-form UAV power against a grid over `[0, ptMax]`, in grid steps.
pub fn power_closed_form_suite(slots: usize, points: usize, seed: u64) -> SuiteReport {
    let mut worst: f64 = 0.0;
    for i in 0..slots {
        let (base, ch, mut st, k) = slot_instance(i, seed);
        // a spread of RIS budgets so both the UAV and the RIS constraint bind
        let cfg = SystemConfig {
            pris_max_dbm: -20.0 + 25.0 * (i % 5) as f64 / 4.0,
            ..base
        };
        let sr2 = cfg.sigma_r2_w();
        let cap = cfg.a_max_lin().min((cfg.pris_max_w() / sr2).sqrt());
        for n in 0..st.ris[0].len() {
            if st.ris[0].active[n] {
                let a = st.ris[0].alpha[n];
                st.ris[0].alpha[n] = a / a.norm() * (0.9 * cap);
            }
        }
        let v = st.track[0];
        let p = optimal_power(&cfg, &ch, &st.ris[0], 0, &v);
        let dir = matched(&ch.effective(k, 0, &v, &st.ris[0].alpha));
        let grid = oracle::slot_power_search(&cfg, &ch, k, 0, &v, &dir, &st.ris[0], points);
        worst = worst.max((p - grid.power).abs() / grid.step);
    }
    SuiteReport {
        suite: Suite::PowerClosedForm,
        checks: vec![Check::at_most("uav-power/max-error-steps", worst, 1.0)],
    }
}

/// Two passive elements, one UE, one antenna, fixed UAV: the RIS block run
/// to convergence against a phase grid.
pub fn tiny_ris_suite(seeds: usize, points: usize, seed: u64) -> SuiteReport {
    let mut worst = f64::INFINITY;
    let settings = SolveSettings::default();
    for i in 0..seeds {
        let cfg = SystemConfig {
            num_ues: 1,
            num_antennas: 1,
            ris_nx: 2,
            ris_ny: 1,
            num_active: 0,
            slots: 1,
            seed: seed.wrapping_add(i as u64),
            ..SystemConfig::desk()
        };
        let v = area_center(&cfg);
        let ch = ChannelSet::sample(&cfg, &[v], cfg.seed).expect("valid scenario");
        let mut st = static_opt::initialize(&cfg, &ch, cfg.seed);
        for _ in 0..100 {
            let before = st.tau;
            let res = static_opt::ris_block(&cfg, &ch, &st, &settings);
            static_opt::accept(&cfg, &ch, &mut st, res);
            if st.tau - before < 1e-10 {
                break;
            }
        }
        let grid = oracle::static_phase_search(&cfg, &ch, &st.v, &st.w, &st.ris, &[0, 1], points)
            .expect("grid within cap");
        worst = worst.min(st.tau / grid.value);
    }
    SuiteReport {
        suite: Suite::TinyRis,
        checks: vec![Check::at_least("ris-block/ratio-to-grid", worst, 0.98)],
    }
}
