//! TDMA scheduling, trajectory, beamforming and RIS design for a flying UAV.
//!
//! One outer iteration runs, in order: the relaxed scheduling LP, the
//! closed-form beamformer, the trajectory SCA, the closed-form passive
//! phases and the active-element SCA. The stored RIS profile of each slot is
//! the sum of its passive and active parts, so recombination is implicit.
//!
//! The objective carried through the loop is the relaxed-schedule min
//! average rate; the rounded schedule is evaluated separately for reports.

use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ue_positions, ChannelSet, Pos};
use crate::conic::{Affine, CAffine, ComplexVar, Program, SolveSettings, Status, Var};
use crate::config::SystemConfig;
use crate::evaluation::{self, apply, Beamformers, RisProfile, Schedule};
use crate::placement::{lower_amplitude, signal_lower, upper_amplitude, PlaneVars, Slacks};
use crate::static_opt::{active_amplitude, matched, power_split, random_phases, ACCEPT_TOL, FEAS_TOL};
use crate::trace::{Block, IterationTrace, Outcome, Termination, TraceRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MobileError {
    #[error("a closed trajectory needs at least 2 slots, got {0}")]
    TooFewSlots(usize),
    #[error("channel set has {got} slots, config has {want}")]
    SlotMismatch { got: usize, want: usize },
}

/// Below this share a UE is treated as absent from a slot.
const SHARE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobileState {
    pub track: Vec<Pos>,
    pub schedule: Schedule,
    /// One beamformer per slot.
    pub w: Beamformers,
    /// One RIS profile per slot (passive plus active part).
    pub ris: Vec<RisProfile>,
    /// Relaxed-schedule min average rate.
    pub tau: f64,
}

impl MobileState {
    pub fn rate_table(&self, cfg: &SystemConfig, ch: &ChannelSet) -> Vec<Vec<f64>> {
        evaluation::mobile_rate_table(cfg, ch, &self.track, &self.w, &self.ris)
    }

    pub fn average_rates(&self, cfg: &SystemConfig, ch: &ChannelSet) -> Vec<f64> {
        evaluation::average_rates(&self.schedule, &self.rate_table(cfg, ch))
    }

    /// Per-UE average rates on the rounded schedule.
    pub fn rounded_rates(&self, cfg: &SystemConfig, ch: &ChannelSet) -> Vec<f64> {
        evaluation::average_rates(&self.schedule.rounded(), &self.rate_table(cfg, ch))
    }

    pub fn rounded_tau(&self, cfg: &SystemConfig, ch: &ChannelSet) -> f64 {
        evaluation::min_rate(&self.rounded_rates(cfg, ch))
    }

    pub fn residual(&self, cfg: &SystemConfig, ch: &ChannelSet) -> f64 {
        evaluation::mobile_residual(cfg, ch, &self.track, &self.schedule, &self.w, &self.ris)
    }

    /// UE served in each slot of the rounded schedule (`None` if idle).
    pub fn scheduled_ues(&self) -> Vec<Option<usize>> {
        let r = self.schedule.rounded();
        (0..r.num_slots())
            .map(|t| (0..r.b.len()).find(|&k| r.b[k][t] > 0.5))
            .collect()
    }

    fn refresh(&mut self, cfg: &SystemConfig, ch: &ChannelSet) {
        self.tau = evaluation::min_rate(&self.average_rates(cfg, ch));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ActiveSplit {
    /// Per-slot programs when the schedule is binary, one joint program
    /// otherwise.
    #[default]
    Auto,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobileOptions {
    pub solve: SolveSettings,
    pub max_iters: usize,
    pub eps_conv: f64,
    pub inner_rounds: usize,
    pub active_split: ActiveSplit,
    /// Re-solve the scheduling LP after every accepted trajectory or active
    /// round; its gain is folded into that block's trace row.
    pub rebalance: bool,
    /// Re-optimize on the rounded schedule after convergence.
    pub polish: bool,
    pub timing: bool,
}

impl MobileOptions {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        MobileOptions {
            solve: SolveSettings::default(),
            max_iters: cfg.max_iters,
            eps_conv: cfg.eps_conv,
            inner_rounds: 4,
            active_split: ActiveSplit::Auto,
            rebalance: true,
            polish: true,
            timing: false,
        }
    }
}

/// Closed circle around the UE centroid, traversed once over the horizon.
///
/// The radius is the smaller of the circle whose perimeter the UAV covers in
/// `T - 1` steps and half the centroid-to-farthest-UE distance.
pub fn circular_track(cfg: &SystemConfig, ues: &[Pos]) -> Vec<Pos> {
    let t_n = cfg.slots;
    let n = ues.len().max(1) as f64;
    let cx = ues.iter().map(|u| u.x).sum::<f64>() / n;
    let cy = ues.iter().map(|u| u.y).sum::<f64>() / n;
    let far = ues
        .iter()
        .map(|u| ((u.x - cx).powi(2) + (u.y - cy).powi(2)).sqrt())
        .fold(0.0, f64::max);
    let laps = t_n.saturating_sub(1).max(1) as f64;
    let radius = (laps * cfg.d_max_m() / std::f64::consts::TAU).min(0.5 * far);
    (0..t_n)
        .map(|t| {
            let theta = std::f64::consts::TAU * t as f64 / laps;
            Pos::new(cx + radius * theta.cos(), cy + radius * theta.sin(), cfg.altitude_m)
        })
        .map(|mut p| {
            // exact closure despite rounding in cos/sin of 2 pi
            if t_n > 1 && (p - Pos::new(cx + radius, cy, cfg.altitude_m)).norm() < 1e-9 {
                p = Pos::new(cx + radius, cy, cfg.altitude_m);
            }
            p
        })
        .collect()
}

/// Initial track for a scenario seed.
pub fn initial_track(cfg: &SystemConfig, seed: u64) -> Vec<Pos> {
    circular_track(cfg, &ue_positions(cfg, seed))
}

fn check(cfg: &SystemConfig, ch: &ChannelSet) -> Result<(), MobileError> {
    if cfg.slots < 2 {
        return Err(MobileError::TooFewSlots(cfg.slots));
    }
    if ch.num_slots() != cfg.slots {
        return Err(MobileError::SlotMismatch {
            got: ch.num_slots(),
            want: cfg.slots,
        });
    }
    Ok(())
}

/// UE 0 in every slot, full-power matched filters on its direct link, random
/// active phases at the largest feasible amplitude and passive phases from
/// the closed form.
pub fn initialize(cfg: &SystemConfig, ch: &ChannelSet, seed: u64) -> Result<MobileState, MobileError> {
    check(cfg, ch)?;
    let t_n = cfg.slots;
    let pt = cfg.pt_max_w();
    let track = ch.track.clone();
    let w = Beamformers(
        (0..t_n)
            .map(|t| matched(&ch.g0[t][0]).into_iter().map(|x| x * pt.sqrt()).collect())
            .collect(),
    );
    let mask = cfg.active_mask();
    let sr2 = cfg.sigma_r2_w();
    let phases = random_phases(cfg, seed);
    let ris = (0..t_n)
        .map(|t| {
            let xi: Vec<f64> = (0..cfg.num_elements())
                .filter(|&n| mask[n])
                .map(|n| sr2 + ch.h1_norm2(n, t, &track[t]) * pt)
                .collect();
            let r = active_amplitude(&xi, cfg.pris_max_w(), cfg.a_max_lin());
            let alpha = phases
                .iter()
                .enumerate()
                .map(|(n, a)| if mask[n] { a * r } else { *a })
                .collect();
            RisProfile::new(alpha, mask.clone(), cfg.a_max_lin())
        })
        .collect();
    let mut st = MobileState {
        track,
        schedule: Schedule::single(0, ch.num_ues(), t_n),
        w,
        ris,
        tau: 0.0,
    };
    for t in 0..t_n {
        st.ris[t].alpha = passive_phases(ch, &st, t, 0);
    }
    project(cfg, ch, &mut st);
    st.refresh(cfg, ch);
    Ok(st)
}

/// Clips amplitudes, caps beam power, scales active elements to the RIS
/// budget and pins altitude and closure.
pub fn project(cfg: &SystemConfig, ch: &ChannelSet, st: &mut MobileState) {
    let pt = cfg.pt_max_w();
    let pr = cfg.pris_max_w();
    for t in 0..st.track.len() {
        st.track[t].z = cfg.altitude_m;
        st.ris[t].clip();
        let p = st.w.power(t);
        if p > pt {
            let s = (pt / p).sqrt();
            for x in &mut st.w.0[t] {
                *x *= s;
            }
        }
        let pw = evaluation::ris_tx_power(cfg, ch, &st.ris[t], st.w.power(t), t, &st.track[t]);
        if pw > pr {
            let s = (pr / pw).sqrt() * (1.0 - 1e-12);
            for n in 0..st.ris[t].len() {
                if st.ris[t].active[n] {
                    st.ris[t].alpha[n] *= s;
                }
            }
        }
    }
    if let Some(first) = st.track.first().copied() {
        let last = st.track.len() - 1;
        st.track[last] = first;
    }
}

/// Scheduling LP on a fixed rate table `r[k][t]`: maximize the min average
/// rate, then, at that level, the total rate so the answer sits on a vertex
/// with every usable slot assigned.
pub fn schedule_lp(rates: &[Vec<f64>], settings: &SolveSettings) -> Result<(Schedule, f64), Status> {
    let k_n = rates.len();
    let t_n = rates.first().map_or(0, Vec::len);
    let build = |floor: Option<f64>| -> crate::conic::Result<(Program, Var, Vec<Vec<Var>>)> {
        let mut prog = Program::new();
        let tau = prog.var("tau")?;
        let b: Vec<Vec<Var>> = (0..k_n)
            .map(|k| prog.vector(&format!("b{k}"), t_n))
            .collect::<Result<_, _>>()?;
        for row in &b {
            for &x in row {
                prog.nonneg(x.into())?;
                prog.le(x, 1.0)?;
            }
        }
        for t in 0..t_n {
            let mut s = Affine::zero();
            for row in &b {
                s += Affine::from(row[t]);
            }
            prog.le(s, 1.0)?;
        }
        let mut total = Affine::zero();
        for k in 0..k_n {
            let mut avg = Affine::zero();
            for t in 0..t_n {
                avg.add_term(b[k][t], rates[k][t] / t_n as f64);
                total.add_term(b[k][t], rates[k][t]);
            }
            prog.le(tau, avg)?;
        }
        match floor {
            None => prog.maximize(tau)?,
            Some(f) => {
                prog.le(f, tau)?;
                prog.maximize(total)?;
            }
        }
        Ok((prog, tau, b))
    };
    let run = |floor: Option<f64>| -> Result<(Schedule, f64), Status> {
        let (prog, tau, b) = build(floor).map_err(|_| Status::NumericalTrouble)?;
        let sol = prog.solve(settings).map_err(|_| Status::NumericalTrouble)?;
        if !sol.is_optimal() {
            return Err(sol.status);
        }
        let mut sched = Schedule {
            b: b.iter()
                .map(|row| row.iter().map(|&x| sol.value(x).unwrap().clamp(0.0, 1.0)).collect())
                .collect(),
        };
        for t in 0..t_n {
            let s: f64 = sched.b.iter().map(|r| r[t]).sum();
            if s > 1.0 {
                for row in &mut sched.b {
                    row[t] /= s;
                }
            }
        }
        Ok((sched, sol.value(tau).unwrap()))
    };
    let (first, tau) = run(None)?;
    match run(Some(tau - 1e-9 * (1.0 + tau.abs()))) {
        Ok(second) => Ok(second),
        Err(_) => Ok((first, tau)),
    }
}

/// Largest UAV power allowed by both budgets in slot `t`.
pub fn optimal_power(cfg: &SystemConfig, ch: &ChannelSet, ris: &RisProfile, t: usize, v: &Pos) -> f64 {
    let sr2 = cfg.sigma_r2_w();
    let mut r0 = 0.0;
    let mut r1 = 0.0;
    for n in 0..ris.len() {
        if ris.active[n] {
            let a2 = ris.alpha[n].norm_sqr();
            r0 += sr2 * a2;
            r1 += a2 * ch.h1_norm2(n, t, v);
        }
    }
    let pt = cfg.pt_max_w();
    if r1 <= 0.0 {
        return pt;
    }
    pt.min((cfg.pris_max_w() - r0) / r1).max(0.0)
}

/// Matched filter at the largest feasible power toward the leading UE.
pub fn closed_form_beam(cfg: &SystemConfig, ch: &ChannelSet, st: &MobileState, t: usize) -> Vec<C64> {
    let k = st.schedule.leader(t);
    let v = &st.track[t];
    let h = ch.effective(k, t, v, &st.ris[t].alpha);
    let p = optimal_power(cfg, ch, &st.ris[t], t, v);
    matched(&h).into_iter().map(|x| x * p.sqrt()).collect()
}

/// Passive coefficients aligning every passive path with the direct plus
/// active signal of UE `k` in slot `t`; active entries are left as they are.
pub fn passive_phases(ch: &ChannelSet, st: &MobileState, t: usize, k: usize) -> Vec<C64> {
    let v = &st.track[t];
    let w = &st.w.0[t];
    let ris = &st.ris[t];
    let mut alpha = ris.alpha.clone();
    if ch.num_elements() == 0 {
        return alpha;
    }
    let cascade = ch.cascade(k, t, v);
    let mut reference = apply(&ch.h0(k, t, v), w);
    for n in 0..ris.len() {
        if ris.active[n] {
            reference += ris.alpha[n] * apply(&cascade[n], w);
        }
    }
    let ref_angle = if reference.norm() == 0.0 { 0.0 } else { reference.arg() };
    for n in 0..ris.len() {
        if !ris.active[n] {
            let g = apply(&cascade[n], w);
            let theta = ref_angle - if g.norm() == 0.0 { 0.0 } else { g.arg() };
            alpha[n] = C64::from_polar(1.0, theta);
        }
    }
    alpha
}

/// Block outcome with an optional candidate.
#[derive(Debug, Clone)]
pub struct MobileBlock {
    pub status: Status,
    pub candidate: Option<MobileState>,
    pub surrogate: Option<f64>,
}

impl MobileBlock {
    fn failed(status: Status) -> Self {
        MobileBlock {
            status,
            candidate: None,
            surrogate: None,
        }
    }

    fn closed(cand: MobileState) -> Self {
        MobileBlock {
            status: Status::Optimal,
            candidate: Some(cand),
            surrogate: None,
        }
    }
}

pub fn scheduling_block(cfg: &SystemConfig, ch: &ChannelSet, st: &MobileState, s: &SolveSettings) -> MobileBlock {
    let table = st.rate_table(cfg, ch);
    match schedule_lp(&table, s) {
        Ok((sched, lp_tau)) => {
            let mut cand = st.clone();
            cand.schedule = sched;
            cand.refresh(cfg, ch);
            MobileBlock {
                status: Status::Optimal,
                candidate: Some(cand),
                surrogate: Some(lp_tau),
            }
        }
        Err(status) => MobileBlock::failed(status),
    }
}

/// Closed-form beams in every slot; if that would lower the relaxed
/// objective, only slots held entirely by one UE are updated.
pub fn beamforming_block(cfg: &SystemConfig, ch: &ChannelSet, st: &MobileState, _s: &SolveSettings) -> MobileBlock {
    let mut all = st.clone();
    for t in 0..st.track.len() {
        all.w.0[t] = closed_form_beam(cfg, ch, st, t);
    }
    project(cfg, ch, &mut all);
    all.refresh(cfg, ch);
    if all.tau >= st.tau - ACCEPT_TOL {
        return MobileBlock::closed(all);
    }
    let mut some = st.clone();
    for t in 0..st.track.len() {
        if st.schedule.b[st.schedule.leader(t)][t] >= 1.0 - 1e-6 {
            some.w.0[t] = all.w.0[t].clone();
        }
    }
    project(cfg, ch, &mut some);
    some.refresh(cfg, ch);
    MobileBlock::closed(some)
}

/// Closed-form passive phases toward each slot's leading UE, with the same
/// fallback to exclusively held slots as the beamformer.
pub fn passive_block(cfg: &SystemConfig, ch: &ChannelSet, st: &MobileState, _s: &SolveSettings) -> MobileBlock {
    if ch.num_elements() == 0 || st.ris[0].active.iter().all(|&a| a) {
        return MobileBlock::failed(Status::Optimal);
    }
    let mut all = st.clone();
    for t in 0..st.track.len() {
        all.ris[t].alpha = passive_phases(ch, st, t, st.schedule.leader(t));
    }
    project(cfg, ch, &mut all);
    all.refresh(cfg, ch);
    if all.tau >= st.tau - ACCEPT_TOL {
        return MobileBlock::closed(all);
    }
    let mut some = st.clone();
    for t in 0..st.track.len() {
        if st.schedule.b[st.schedule.leader(t)][t] >= 1.0 - 1e-6 {
            some.ris[t].alpha = all.ris[t].alpha.clone();
        }
    }
    project(cfg, ch, &mut some);
    some.refresh(cfg, ch);
    MobileBlock::closed(some)
}

pub fn trajectory_block(cfg: &SystemConfig, ch: &ChannelSet, st: &MobileState, s: &SolveSettings) -> MobileBlock {
    match build_trajectory(cfg, ch, st, s) {
        Ok(r) => r,
        Err(_) => MobileBlock::failed(Status::NumericalTrouble),
    }
}

fn build_trajectory(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    st: &MobileState,
    settings: &SolveSettings,
) -> crate::conic::Result<MobileBlock> {
    let k_n = ch.num_ues();
    let t_n = st.track.len();
    let su2 = cfg.sigma_u2_w();
    let [e0, e1, _] = ch.exponents;
    let has_ris = ch.num_elements() > 0;
    let scale = cfg.area_side_m;

    let mut prog = Program::new();
    let tau = prog.var("tau")?;
    let pos: Vec<PlaneVars> = (0..t_n)
        .map(|t| PlaneVars::new(&mut prog, &format!("v{t}"), scale, cfg.altitude_m))
        .collect::<Result<_, _>>()?;
    prog.eq(Affine::from(pos[0].x) - Affine::from(pos[t_n - 1].x))?;
    prog.eq(Affine::from(pos[0].y) - Affine::from(pos[t_n - 1].y))?;
    let step = cfg.d_max_m() / scale;
    for t in 0..t_n - 1 {
        prog.soc(
            vec![
                Affine::from(pos[t + 1].x) - Affine::from(pos[t].x),
                Affine::from(pos[t + 1].y) - Affine::from(pos[t].y),
            ],
            Affine::constant(step),
        )?;
    }

    let mut avg: Vec<Affine> = vec![Affine::zero(); k_n];
    for t in 0..t_n {
        let v0 = st.track[t];
        let ris = &st.ris[t];
        let (q, big_q): (Affine, Affine) = if has_ris {
            let q = lower_amplitude(&mut prog, &format!("q{t}"), &pos[t], &ch.ris_position, &v0, e1)?;
            let big_q = upper_amplitude(&mut prog, &format!("Q{t}"), &pos[t], &ch.ris_position, &v0, e1)?;
            (q.into(), big_q.into())
        } else {
            (Affine::constant(1.0), Affine::constant(1.0))
        };
        if has_ris {
            let sr2 = cfg.sigma_r2_w();
            let (mut r0, mut r1) = (0.0, 0.0);
            for n in 0..ris.len() {
                if ris.active[n] {
                    let a2 = ris.alpha[n].norm_sqr();
                    r0 += sr2 * a2;
                    r1 += a2 * ch.h1_norm2(n, t, &v0);
                }
            }
            let p = st.w.power(t);
            if r1 * p > 0.0 {
                let room = (cfg.pris_max_w() - r0) / (r1 * p);
                if room <= 0.0 {
                    return Ok(MobileBlock::failed(Status::Infeasible));
                }
                prog.le(big_q.clone(), room.sqrt())?;
            }
        }
        for k in 0..k_n {
            let share = st.schedule.b[k][t];
            if share <= SHARE_EPS {
                continue;
            }
            let u = ch.ue_positions[k];
            let sig = power_split(ch, k, t, &v0, &st.w.0[t], &ris.alpha, su2);
            let p = lower_amplitude(&mut prog, &format!("p{k}_{t}"), &pos[t], &u, &v0, e0)?;
            let big_p: Affine = if sig.s2 < 0.0 {
                upper_amplitude(&mut prog, &format!("P{k}_{t}"), &pos[t], &u, &v0, e0)?.into()
            } else {
                Affine::constant(1.0)
            };
            let slacks = Slacks {
                p: p.into(),
                q: q.clone(),
                big_p,
                big_q: big_q.clone(),
            };
            let a_hat = prog.var(format!("ahat{k}_{t}"))?;
            let (lin, quad) = signal_lower(&sig, &slacks);
            prog.quad_le(quad, lin - a_hat)?;
            let noise = evaluation::noise_power(cfg, ch, k, ris) / su2;
            let s = prog.var(format!("s{k}_{t}"))?;
            prog.exp_log(s.into(), Affine::term(a_hat, 1.0 / noise) + 1.0)?;
            avg[k].add_term(s, share / t_n as f64);
        }
    }
    for a in avg {
        prog.le(tau, a)?;
    }
    prog.maximize(tau)?;

    let sol = prog.solve(settings)?;
    if !sol.is_optimal() {
        return Ok(MobileBlock::failed(sol.status));
    }
    let values = sol.values().expect("optimal has values");
    let mut cand = st.clone();
    for t in 0..t_n {
        cand.track[t] = pos[t].position(values);
    }
    project(cfg, ch, &mut cand);
    cand.refresh(cfg, ch);
    Ok(MobileBlock {
        status: sol.status,
        candidate: Some(cand),
        surrogate: sol.objective,
    })
}

/// Active-element SCA. Slots are coupled only through the per-UE averages,
/// so with a binary schedule each slot can be solved on its own.
pub fn active_block(cfg: &SystemConfig, ch: &ChannelSet, st: &MobileState, s: &SolveSettings) -> MobileBlock {
    active_block_with(cfg, ch, st, s, ActiveSplit::Auto)
}

pub fn active_block_with(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    st: &MobileState,
    s: &SolveSettings,
    split: ActiveSplit,
) -> MobileBlock {
    if ch.num_elements() == 0 || !st.ris[0].active.iter().any(|&a| a) {
        return MobileBlock::failed(Status::Optimal);
    }
    let t_n = st.track.len();
    if split == ActiveSplit::Auto && st.schedule.is_binary(SHARE_EPS) {
        let mut cand = st.clone();
        for t in 0..t_n {
            let k = st.schedule.leader(t);
            if st.schedule.b[k][t] <= SHARE_EPS {
                continue;
            }
            match build_active(cfg, ch, st, &[t], s) {
                Ok((_, Some((psi, _)))) => cand.ris[t].alpha = psi.into_iter().next().expect("one slot"),
                Ok((status, None)) => return MobileBlock::failed(status),
                Err(_) => return MobileBlock::failed(Status::NumericalTrouble),
            }
        }
        // the per-slot objectives are slot rates; report the min average
        // they imply so both forms carry the same surrogate value
        let implied = implied_tau(cfg, ch, st, &cand);
        project(cfg, ch, &mut cand);
        cand.refresh(cfg, ch);
        MobileBlock {
            status: Status::Optimal,
            candidate: Some(cand),
            surrogate: Some(implied),
        }
    } else {
        let slots: Vec<usize> = (0..t_n).collect();
        match build_active(cfg, ch, st, &slots, s) {
            Ok((_, Some((psi, obj)))) => {
                let mut cand = st.clone();
                for (t, a) in psi.into_iter().enumerate() {
                    cand.ris[t].alpha = a;
                }
                project(cfg, ch, &mut cand);
                cand.refresh(cfg, ch);
                MobileBlock {
                    status: Status::Optimal,
                    candidate: Some(cand),
                    surrogate: Some(obj),
                }
            }
            Ok((status, None)) => MobileBlock::failed(status),
            Err(_) => MobileBlock::failed(Status::NumericalTrouble),
        }
    }
}

/// Surrogate min average rate implied by per-slot surrogate optima; used to
/// compare the split and joint forms.
fn implied_tau(cfg: &SystemConfig, ch: &ChannelSet, st: &MobileState, cand: &MobileState) -> f64 {
    let t_n = st.track.len();
    let k_n = ch.num_ues();
    let mut avg = vec![0.0; k_n];
    for t in 0..t_n {
        for k in 0..k_n {
            let share = st.schedule.b[k][t];
            if share <= SHARE_EPS {
                continue;
            }
            let parts = active_surrogate_rate(cfg, ch, st, t, k, &cand.ris[t].alpha);
            avg[k] += share * parts / t_n as f64;
        }
    }
    evaluation::min_rate(&avg)
}

/// Surrogate (lower-bound) slot rate of UE `k` at coefficients `alpha`,
/// expanded at the current state.
fn active_surrogate_rate(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    st: &MobileState,
    t: usize,
    k: usize,
    alpha: &[C64],
) -> f64 {
    let ctx = ActiveCtx::new(cfg, ch, st, t, k);
    let sig = ctx.signal_at(alpha);
    let sig0 = ctx.signal_at(&st.ris[t].alpha);
    let mut arg = 2.0 * (sig0.conj() * sig).re - sig0.norm_sqr() + 1.0;
    let mut theta = 1.0;
    let mut theta0 = 1.0;
    for (i, &n) in ctx.active.iter().enumerate() {
        let a0 = st.ris[t].alpha[n];
        arg += ctx.rho[i] * (2.0 * (a0.conj() * alpha[n]).re - a0.norm_sqr());
        theta += ctx.rho[i] * alpha[n].norm_sqr();
        theta0 += ctx.rho[i] * a0.norm_sqr();
    }
    arg.ln() - (theta0.ln() + (theta - theta0) / theta0)
}

/// Normalized per-(slot, UE) data for the active subproblem.
struct ActiveCtx {
    active: Vec<usize>,
    /// Direct plus passive signal over `sigma_u`.
    base: C64,
    /// Per-active-element gains over `sigma_u` (in `alpha` units).
    gains: Vec<C64>,
    /// `sigma_r^2 |h2k,n|^2 / sigma_u^2` per active element.
    rho: Vec<f64>,
}

impl ActiveCtx {
    fn new(cfg: &SystemConfig, ch: &ChannelSet, st: &MobileState, t: usize, k: usize) -> Self {
        let su2 = cfg.sigma_u2_w();
        let su = su2.sqrt();
        let v = &st.track[t];
        let w = &st.w.0[t];
        let ris = &st.ris[t];
        let cascade = ch.cascade(k, t, v);
        let mut base = apply(&ch.h0(k, t, v), w);
        let mut active = Vec::new();
        let mut gains = Vec::new();
        let mut rho = Vec::new();
        for n in 0..ris.len() {
            let g = apply(&cascade[n], w);
            if ris.active[n] {
                active.push(n);
                gains.push(g / su);
                rho.push(cfg.sigma_r2_w() * ch.h2(k, n).norm_sqr() / su2);
            } else {
                base += ris.alpha[n] * g;
            }
        }
        ActiveCtx {
            active,
            base: base / su,
            gains,
            rho,
        }
    }

    fn signal_at(&self, alpha: &[C64]) -> C64 {
        self.base
            + self
                .active
                .iter()
                .zip(&self.gains)
                .map(|(&n, g)| alpha[n] * g)
                .sum::<C64>()
    }
}

type ActiveSolution = (Status, Option<(Vec<Vec<C64>>, f64)>);

fn build_active(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    st: &MobileState,
    slots: &[usize],
    settings: &SolveSettings,
) -> crate::conic::Result<ActiveSolution> {
    let k_n = ch.num_ues();
    let t_n = st.track.len();
    let a_max = cfg.a_max_lin();
    let pr = cfg.pris_max_w();
    let sr2 = cfg.sigma_r2_w();
    let single = slots.len() == 1;

    let mut prog = Program::new();
    let tau = prog.var("tau")?;
    let mut avg: Vec<Affine> = vec![Affine::zero(); k_n];
    let mut used = vec![false; k_n];
    let mut betas: Vec<(usize, ComplexVar, Vec<usize>)> = Vec::new();
    for &t in slots {
        let ris = &st.ris[t];
        let active: Vec<usize> = (0..ris.len()).filter(|&n| ris.active[n]).collect();
        let beta = prog.complex_vector(&format!("beta{t}"), active.len())?;
        let beta0: Vec<C64> = active.iter().map(|&n| ris.alpha[n] / a_max).collect();
        for i in 0..active.len() {
            prog.soc(beta.entry(i).parts().to_vec(), Affine::constant(1.0))?;
        }
        let p = st.w.power(t);
        let v = &st.track[t];
        let mut power = Vec::new();
        for (i, &n) in active.iter().enumerate() {
            let xi = sr2 + ch.h1_norm2(n, t, v) * p;
            power.extend(beta.entry(i).scale(C64::new(a_max * (xi / pr).sqrt(), 0.0)).parts());
        }
        prog.soc(power, Affine::constant(1.0))?;

        for k in 0..k_n {
            let share = st.schedule.b[k][t];
            if share <= SHARE_EPS {
                continue;
            }
            used[k] = true;
            let ctx = ActiveCtx::new(cfg, ch, st, t, k);
            let gains: Vec<C64> = ctx.gains.iter().map(|g| g * a_max).collect();
            let sig = beta.dot(&gains) + CAffine::constant(ctx.base);
            let sig0 = ctx.base + beta0.iter().zip(&gains).map(|(b, g)| b * g).sum::<C64>();
            let mut arg = sig.re_conj_mul(sig0) * 2.0 - sig0.norm_sqr() + 1.0;
            let theta = prog.var(format!("theta{k}_{t}"))?;
            let mut quad = Vec::new();
            let mut theta0 = 1.0;
            for i in 0..active.len() {
                let r = ctx.rho[i] * a_max * a_max;
                if r > 0.0 {
                    arg += (beta.entry(i).re_conj_mul(beta0[i]) * 2.0 - beta0[i].norm_sqr()) * r;
                    quad.extend(beta.entry(i).scale(C64::new(r.sqrt(), 0.0)).parts());
                    theta0 += r * beta0[i].norm_sqr();
                }
            }
            prog.quad_le(quad, Affine::from(theta) - 1.0)?;
            let s = prog.var(format!("s{k}_{t}"))?;
            let lhs = Affine::from(s) + theta0.ln() + (Affine::from(theta) - theta0) * (1.0 / theta0);
            prog.exp_log(lhs, arg)?;
            if single {
                avg[k].add_term(s, 1.0);
            } else {
                avg[k].add_term(s, share / t_n as f64);
            }
        }
        betas.push((t, beta, active));
    }
    for k in 0..k_n {
        if used[k] || !single {
            prog.le(tau, avg[k].clone())?;
        }
    }
    prog.maximize(tau)?;
    let sol = prog.solve(settings)?;
    if !sol.is_optimal() {
        return Ok((sol.status, None));
    }
    let mut out = Vec::with_capacity(betas.len());
    for (t, beta, active) in &betas {
        let b = sol.complex(beta).expect("optimal has values");
        let mut alpha = st.ris[*t].alpha.clone();
        for (i, &n) in active.iter().enumerate() {
            alpha[n] = b[i] * a_max;
        }
        out.push(alpha);
    }
    Ok((Status::Optimal, Some((out, sol.objective.unwrap_or(f64::NAN)))))
}

/// Keeps a candidate only if it is feasible and does not lose objective.
pub fn accept(cfg: &SystemConfig, ch: &ChannelSet, st: &mut MobileState, res: MobileBlock) -> (Outcome, f64) {
    let Some(cand) = res.candidate else {
        return if res.status == Status::Optimal {
            (Outcome::Skipped, st.residual(cfg, ch))
        } else {
            (Outcome::Failed(res.status), st.residual(cfg, ch))
        };
    };
    let residual = cand.residual(cfg, ch);
    if residual <= FEAS_TOL && cand.tau.is_finite() && cand.tau >= st.tau - ACCEPT_TOL {
        *st = cand;
        (Outcome::Accepted, residual)
    } else {
        (Outcome::Rejected, st.residual(cfg, ch))
    }
}

type BlockFn = fn(&SystemConfig, &ChannelSet, &MobileState, &SolveSettings) -> MobileBlock;

/// Outer loop until the relaxed objective gain drops below `eps_conv`.
///
/// A `rounded` trace row follows with the objective on the rounded
/// schedule. With `polish` set, the schedule is then fixed to its rounding
/// and the other blocks run again; their rows come after the `rounded` row
/// and do not count as outer iterations.
pub fn run(cfg: &SystemConfig, ch: &ChannelSet, init: MobileState, opts: &MobileOptions) -> (MobileState, IterationTrace) {
    let mut st = init;
    let mut trace = IterationTrace::new();
    trace.taus.push(st.tau);
    trace.rows.push(TraceRow {
        iteration: 0,
        tau_nats: st.tau,
        block: Block::Init,
        status: Outcome::Accepted,
        residual: st.residual(cfg, ch),
        wall_ms: 0.0,
    });
    let active: BlockFn = match opts.active_split {
        ActiveSplit::Auto => active_block,
        ActiveSplit::Joint => |c, h, s, o| active_block_with(c, h, s, o, ActiveSplit::Joint),
    };
    let blocks = [
        (Block::Scheduling, scheduling_block as BlockFn, false),
        (Block::Beamforming, beamforming_block, false),
        (Block::Trajectory, trajectory_block, true),
        (Block::PassivePhase, passive_block, false),
        (Block::Active, active, true),
    ];
    trace.termination = Termination::IterationCap;
    for iter in 1..=opts.max_iters {
        let before = st.tau;
        let broke = block_pass(cfg, ch, &mut st, &blocks, iter, opts, opts.rebalance, &mut trace);
        trace.taus.push(st.tau);
        if broke {
            trace.termination = Termination::Breakdown;
            break;
        }
        if st.tau - before < opts.eps_conv {
            trace.termination = Termination::Converged;
            break;
        }
    }
    push_rounded(cfg, ch, &st, &mut trace);
    if opts.polish && trace.termination != Termination::Breakdown {
        st.schedule = st.schedule.rounded();
        st.refresh(cfg, ch);
        let first = trace.iterations() + 1;
        for iter in first..first + opts.max_iters {
            let before = st.tau;
            let broke = block_pass(cfg, ch, &mut st, &blocks[1..], iter, opts, false, &mut trace);
            if broke || st.tau - before < opts.eps_conv {
                break;
            }
        }
    }
    (st, trace)
}

/// One visit of every block; true when every attempted block failed.
#[allow(clippy::too_many_arguments)]
fn block_pass(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    st: &mut MobileState,
    blocks: &[(Block, BlockFn, bool)],
    iter: usize,
    opts: &MobileOptions,
    rebalance: bool,
    trace: &mut IterationTrace,
) -> bool {
    let mut failures = 0;
    let mut attempted = 0;
    for &(block, f, iterative) in blocks {
        let start = Instant::now();
        let rounds = if iterative { opts.inner_rounds.max(1) } else { 1 };
        let (mut outcome, mut residual) = (Outcome::Skipped, 0.0);
        for round in 0..rounds {
            let prev = st.tau;
            let res = f(cfg, ch, st, &opts.solve);
            let (o, r) = accept(cfg, ch, st, res);
            if iterative && rebalance && o == Outcome::Accepted {
                let res = scheduling_block(cfg, ch, st, &opts.solve);
                accept(cfg, ch, st, res);
            }
            if round == 0 || o == Outcome::Accepted {
                outcome = o;
                residual = r;
            }
            if o != Outcome::Accepted || st.tau - prev < 0.1 * opts.eps_conv {
                break;
            }
        }
        if outcome != Outcome::Skipped {
            attempted += 1;
        }
        if outcome.is_failure() {
            failures += 1;
        }
        trace.rows.push(TraceRow {
            iteration: iter,
            tau_nats: st.tau,
            block,
            status: outcome,
            residual,
            wall_ms: if opts.timing {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        });
    }
    attempted > 0 && failures == attempted
}

fn push_rounded(cfg: &SystemConfig, ch: &ChannelSet, st: &MobileState, trace: &mut IterationTrace) {
    let r = st.schedule.rounded();
    trace.rows.push(TraceRow {
        iteration: trace.iterations(),
        tau_nats: st.rounded_tau(cfg, ch),
        block: Block::Rounded,
        status: Outcome::Accepted,
        residual: evaluation::mobile_residual(cfg, ch, &st.track, &r, &st.w, &st.ris),
        wall_ms: 0.0,
    });
}

pub fn optimize(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    seed: u64,
    opts: &MobileOptions,
) -> Result<(MobileState, IterationTrace), MobileError> {
    let init = initialize(cfg, ch, seed)?;
    Ok(run(cfg, ch, init, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn desk(seed: u64) -> (SystemConfig, ChannelSet) {
        let cfg = SystemConfig::desk();
        let track = initial_track(&cfg, seed);
        let ch = ChannelSet::sample(&cfg, &track, seed).unwrap();
        (cfg, ch)
    }

    #[test]
    fn circle_is_closed_and_speed_feasible() {
        let cfg = SystemConfig::desk();
        let track = initial_track(&cfg, 3);
        assert_eq!(track.len(), cfg.slots);
        assert_eq!(track[0], track[cfg.slots - 1]);
        for p in track.windows(2) {
            assert!((p[1] - p[0]).norm() <= cfg.d_max_m() + 1e-9);
        }
        let two = SystemConfig { slots: 2, ..cfg };
        let t = initial_track(&two, 3);
        assert_eq!(t[0], t[1]);
    }

    #[test]
    fn lp_examples() {
        let s = SolveSettings::default();
        let (b, tau) = schedule_lp(&[vec![0.3, 0.5, 0.0]], &s).unwrap();
        assert_abs_diff_eq!(b.b[0][0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(b.b[0][1], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(tau, 0.8 / 3.0, epsilon = 1e-7);

        let (b, tau) = schedule_lp(&[vec![1.0, 1.0], vec![1.0, 1.0]], &s).unwrap();
        assert_abs_diff_eq!(tau, 0.5, epsilon = 1e-7);
        for t in 0..2 {
            assert_abs_diff_eq!(b.b[0][t] + b.b[1][t], 1.0, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(b.b[0].iter().sum::<f64>(), 1.0, epsilon = 1e-6);

        let (_, tau) = schedule_lp(&[vec![1.0, 2.0], vec![0.0, 0.0]], &s).unwrap();
        assert_abs_diff_eq!(tau, 0.0, epsilon = 1e-7);
    }

    #[test]
    fn power_examples() {
        let cfg = SystemConfig {
            pris_max_dbm: 60.0,
            ..SystemConfig::desk()
        };
        let (_, ch) = desk(1);
        let st = initialize(&cfg, &ch, 1).unwrap();
        assert_eq!(optimal_power(&cfg, &ch, &st.ris[0], 0, &st.track[0]), cfg.pt_max_w());
    }

    #[test]
    fn init_is_feasible_and_deterministic() {
        let (cfg, ch) = desk(2);
        let a = initialize(&cfg, &ch, 2).unwrap();
        let b = initialize(&cfg, &ch, 2).unwrap();
        assert_eq!(a, b);
        assert!(a.residual(&cfg, &ch) <= 1e-9);
    }

    #[test]
    fn passive_phase_example() {
        // h0 w = 1, no active part, one passive element with gain e^{j pi/4}
        let g = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let theta = C64::new(1.0, 0.0).arg() - g.arg();
        assert_abs_diff_eq!(theta, -std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn short_run_is_monotone() {
        let (cfg, ch) = desk(4);
        let opts = MobileOptions {
            max_iters: 4,
            ..MobileOptions::from_config(&cfg)
        };
        let (st, trace) = optimize(&cfg, &ch, 4, &opts).unwrap();
        assert!(trace.is_monotone(1e-6), "{:?}", trace.taus);
        assert!(st.residual(&cfg, &ch) <= 1e-6);
        assert_eq!(st.track[0], st.track[cfg.slots - 1]);
    }
}
