//! Scenario constants.
//!
//! Everything user-facing is stored in the units people write down (dB, dBm,
//! metres). Linear values are derived on demand through the `*_w()` /
//! `*_lin()` accessors so there is exactly one place where conversion happens.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Pos;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Amplitude ratio for a gain given in dB (`10^(dB/20)`).
pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// All constants of one scenario.
///
/// The RIS panel is an `risNx x risNy` uniform planar array lying in the
/// x-z plane at `risPositionM`; element `n` sits in column `n % risNx` (along
/// x) and row `n / risNx` (along z). Setting both dimensions to zero removes
/// the RIS entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SystemConfig {
    pub area_side_m: f64,
    pub num_ues: usize,
    pub num_antennas: usize,
    pub ris_nx: usize,
    pub ris_ny: usize,
    /// Uses the first `numActive` elements unless `activeSet` is given.
    pub num_active: usize,
    /// Explicit 0-based active element indices.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_set: Option<Vec<usize>>,
    pub altitude_m: f64,
    /// Defaults to `(D/2, D, 50)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ris_position_m: Option<[f64; 3]>,
    /// Sampled uniformly over the area from `seed` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ue_positions_m: Option<Vec<[f64; 3]>>,
    pub zeta0_db: f64,
    /// Direct, UAV-RIS and RIS-UE exponents.
    pub path_loss_exponents: [f64; 3],
    pub rician_kappa: f64,
    pub pt_max_dbm: f64,
    pub pris_max_dbm: f64,
    pub a_max_db: f64,
    pub sigma_u2_dbm: f64,
    pub eta_db: f64,
    pub slots: usize,
    pub slot_s: f64,
    pub v_max_mps: f64,
    pub eps_conv: f64,
    pub max_iters: usize,
    pub spacing_ratio: f64,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl SystemConfig {
    /// The convergence-figure scenario: K=4, Nt=2, N=32 (8x4), two active
    /// elements, 200 m area, 20 dBm at the UAV, 0 dBm at the RIS, T=50.
    pub fn full() -> Self {
        SystemConfig {
            area_side_m: 200.0,
            num_ues: 4,
            num_antennas: 2,
            ris_nx: 8,
            ris_ny: 4,
            num_active: 2,
            active_set: None,
            altitude_m: 100.0,
            ris_position_m: None,
            ue_positions_m: None,
            zeta0_db: -30.0,
            path_loss_exponents: [3.2, 2.0, 2.2],
            rician_kappa: 10.0,
            pt_max_dbm: 20.0,
            pris_max_dbm: 0.0,
            a_max_db: 40.0,
            sigma_u2_dbm: -80.0,
            eta_db: 1.0,
            slots: 50,
            slot_s: 0.1,
            v_max_mps: 50.0,
            eps_conv: 1e-4,
            max_iters: 50,
            spacing_ratio: 0.5,
            seed: 0,
        }
    }

    /// Reduced scenario used for quick runs: K=2, N=16 (4x4), four active
    /// elements, T=20.
    pub fn desk() -> Self {
        SystemConfig {
            num_ues: 2,
            ris_nx: 4,
            ris_ny: 4,
            num_active: 4,
            slots: 20,
            ..Self::full()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SystemConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn num_elements(&self) -> usize {
        self.ris_nx * self.ris_ny
    }

    pub fn active_set(&self) -> Vec<usize> {
        match &self.active_set {
            Some(set) => {
                let mut s = set.clone();
                s.sort_unstable();
                s
            }
            None => (0..self.num_active.min(self.num_elements())).collect(),
        }
    }

    pub fn num_active_elements(&self) -> usize {
        self.active_set().len()
    }

    /// Boolean mask over RIS elements.
    pub fn active_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_elements()];
        for i in self.active_set() {
            mask[i] = true;
        }
        mask
    }

    pub fn pt_max_w(&self) -> f64 {
        dbm_to_w(self.pt_max_dbm)
    }

    pub fn pris_max_w(&self) -> f64 {
        dbm_to_w(self.pris_max_dbm)
    }

    pub fn sigma_u2_w(&self) -> f64 {
        dbm_to_w(self.sigma_u2_dbm)
    }

    /// Noise plus residual self-interference at an active element.
    pub fn sigma_r2_w(&self) -> f64 {
        (db_to_lin(self.eta_db) + 1.0) * self.sigma_u2_w()
    }

    pub fn a_max_lin(&self) -> f64 {
        db_to_amplitude(self.a_max_db)
    }

    pub fn zeta0_lin(&self) -> f64 {
        db_to_lin(self.zeta0_db)
    }

    /// Largest displacement in one slot.
    pub fn d_max_m(&self) -> f64 {
        self.slot_s * self.v_max_mps
    }

    pub fn ris_position(&self) -> Pos {
        let p = self.ris_position_m.unwrap_or([
            self.area_side_m / 2.0,
            self.area_side_m,
            50.0,
        ]);
        Pos::new(p[0], p[1], p[2])
    }

    /// Amplitude cap of each element.
    pub fn amplitude_caps(&self) -> Vec<f64> {
        let a = self.a_max_lin();
        self.active_mask()
            .into_iter()
            .map(|act| if act { a } else { 1.0 })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive, got {v}")))
            }
        }
        fn finite(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, "must be finite"))
            }
        }
        if self.num_ues == 0 {
            return Err(invalid("numUes", "at least one UE is required"));
        }
        if self.num_antennas == 0 {
            return Err(invalid("numAntennas", "at least one antenna is required"));
        }
        if (self.ris_nx == 0) != (self.ris_ny == 0) {
            return Err(invalid("risNx", "risNx and risNy must both be zero or both positive"));
        }
        positive("areaSideM", self.area_side_m)?;
        positive("altitudeM", self.altitude_m)?;
        finite("zeta0Db", self.zeta0_db)?;
        finite("ptMaxDbm", self.pt_max_dbm)?;
        finite("prisMaxDbm", self.pris_max_dbm)?;
        finite("sigmaU2Dbm", self.sigma_u2_dbm)?;
        finite("etaDb", self.eta_db)?;
        if !(self.a_max_db.is_finite() && self.a_max_db >= 0.0) {
            return Err(invalid("aMaxDb", "amplitude cap must be at least 0 dB"));
        }
        for (i, &e) in self.path_loss_exponents.iter().enumerate() {
            if !(e.is_finite() && e > 0.0) {
                return Err(invalid("pathLossExponents", format!("entry {i} must be positive")));
            }
            if i < 2 && e >= 4.0 {
                return Err(invalid(
                    "pathLossExponents",
                    format!("entry {i} must be below 4 for the placement surrogates"),
                ));
            }
        }
        if !(self.rician_kappa.is_finite() && self.rician_kappa >= 0.0) {
            return Err(invalid("ricianKappa", "must be nonnegative"));
        }
        if self.slots == 0 {
            return Err(invalid("slots", "at least one slot is required"));
        }
        if !(self.slot_s.is_finite() && self.slot_s >= 0.0) {
            return Err(invalid("slotS", "must be nonnegative"));
        }
        if !(self.v_max_mps.is_finite() && self.v_max_mps >= 0.0) {
            return Err(invalid("vMaxMps", "must be nonnegative"));
        }
        positive("epsConv", self.eps_conv)?;
        if self.max_iters == 0 {
            return Err(invalid("maxIters", "must be at least 1"));
        }
        positive("spacingRatio", self.spacing_ratio)?;
        let n = self.num_elements();
        if let Some(set) = &self.active_set {
            let mut s = set.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != set.len() {
                return Err(invalid("activeSet", "indices must be distinct"));
            }
            if let Some(&bad) = s.iter().find(|&&i| i >= n) {
                return Err(invalid("activeSet", format!("index {bad} exceeds element count {n}")));
            }
        } else if self.num_active > n {
            return Err(invalid(
                "numActive",
                format!("{} active elements requested but the RIS has {n}", self.num_active),
            ));
        }
        if let Some(p) = self.ris_position_m {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(invalid("risPositionM", "must be finite"));
            }
        }
        if let Some(ues) = &self.ue_positions_m {
            if ues.len() != self.num_ues {
                return Err(invalid(
                    "uePositionsM",
                    format!("{} positions given for {} UEs", ues.len(), self.num_ues),
                ));
            }
            if ues.iter().flatten().any(|v| !v.is_finite()) {
                return Err(invalid("uePositionsM", "must be finite"));
            }
        }
        Ok(())
    }
}
