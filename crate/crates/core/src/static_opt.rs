//! Joint placement, beamforming and RIS design for a hovering UAV.
//!
//! Block coordinate ascent over three successive-convex-approximation
//! subproblems. Each block builds a convex restriction around the current
//! point, so the current point stays feasible and the true min-rate can only
//! go up; a candidate is still re-evaluated on the true model and discarded
//! if it fails to improve (solver tolerance can otherwise leak a tiny loss).
//!
//! All programs work in normalized units: powers over `sigma_u^2`, beams over
//! `sqrt(ptMax)`, positions over the area side.

use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{area_center, rng_stream, ChannelSet, Pos};
use crate::conic::{Affine, CAffine, ComplexVar, Program, SolveSettings, Status};
use crate::config::SystemConfig;
use crate::evaluation::{self, apply, norm2, Beamformers, RisProfile};
use crate::placement::{
    interference_upper, lower_amplitude, signal_lower, upper_amplitude, PlaneVars, PowerSplit,
    Slacks,
};
use crate::trace::{Block, IterationTrace, Outcome, Termination, TraceRow};

const STREAM_INIT: u64 = 4;
/// Candidates may lose at most this much true objective to solver noise.
pub const ACCEPT_TOL: f64 = 1e-9;
/// Largest relative constraint violation a candidate may carry.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticState {
    pub v: Pos,
    pub w: Beamformers,
    pub ris: RisProfile,
    pub tau: f64,
}

impl StaticState {
    pub fn rates(&self, cfg: &SystemConfig, ch: &ChannelSet) -> Vec<f64> {
        evaluation::rates_static(cfg, ch, &self.v, &self.w, &self.ris)
    }

    pub fn residual(&self, cfg: &SystemConfig, ch: &ChannelSet) -> f64 {
        evaluation::static_residual(cfg, ch, &self.v, &self.w, &self.ris)
    }

    fn refresh(&mut self, cfg: &SystemConfig, ch: &ChannelSet) {
        self.tau = evaluation::min_rate(&self.rates(cfg, ch));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticOptions {
    pub solve: SolveSettings,
    pub max_iters: usize,
    pub eps_conv: f64,
    /// Re-linearizations of a block within one outer iteration; a block
    /// stops early once its own gain drops below a tenth of `eps_conv`.
    pub inner_rounds: usize,
    /// Record wall-clock time per block (off by default so traces are
    /// reproducible byte for byte).
    pub timing: bool,
}

impl StaticOptions {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        StaticOptions {
            solve: SolveSettings::default(),
            max_iters: cfg.max_iters,
            eps_conv: cfg.eps_conv,
            inner_rounds: 4,
            timing: false,
        }
    }
}

/// Random unit phases for all elements.
pub fn random_phases(cfg: &SystemConfig, seed: u64) -> Vec<C64> {
    let mut rng = rng_stream(seed, STREAM_INIT);
    (0..cfg.num_elements())
        .map(|_| C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect()
}

/// Active amplitude that exhausts the RIS budget, capped at `aMax`.
pub fn active_amplitude(xi: &[f64], pris_max: f64, a_max: f64) -> f64 {
    let total: f64 = xi.iter().sum();
    if total <= 0.0 {
        a_max
    } else {
        a_max.min((pris_max / total).sqrt())
    }
}

/// Matched-filter unit vector for a row channel.
pub fn matched(h: &[C64]) -> Vec<C64> {
    let n = norm2(h).sqrt();
    if n == 0.0 {
        let mut e = vec![C64::new(0.0, 0.0); h.len()];
        e[0] = C64::new(1.0, 0.0);
        return e;
    }
    h.iter().map(|x| x.conj() / n).collect()
}

/// Hover above the centre, split the power evenly over matched filters on
/// the direct links, random RIS phases with the largest feasible amplitude
/// on the active elements.
pub fn initialize(cfg: &SystemConfig, ch: &ChannelSet, seed: u64) -> StaticState {
    let v = area_center(cfg);
    let k_n = ch.num_ues();
    let pt = cfg.pt_max_w();
    let w = Beamformers(
        (0..k_n)
            .map(|k| {
                matched(&ch.g0[0][k])
                    .into_iter()
                    .map(|x| x * (pt / k_n as f64).sqrt())
                    .collect()
            })
            .collect(),
    );
    let mask = cfg.active_mask();
    let sr2 = cfg.sigma_r2_w();
    let xi: Vec<f64> = (0..cfg.num_elements())
        .filter(|&n| mask[n])
        .map(|n| sr2 + ch.h1_norm2(n, 0, &v) * pt)
        .collect();
    let r = active_amplitude(&xi, cfg.pris_max_w(), cfg.a_max_lin());
    let alpha = random_phases(cfg, seed)
        .into_iter()
        .enumerate()
        .map(|(n, a)| if mask[n] { a * r } else { a })
        .collect();
    let mut st = StaticState {
        v,
        w,
        ris: RisProfile::new(alpha, mask, cfg.a_max_lin()),
        tau: 0.0,
    };
    project(cfg, ch, &mut st);
    st.refresh(cfg, ch);
    st
}

/// Pulls a candidate back onto the feasible set: clips amplitudes, scales
/// the beams to the UAV budget and the active elements to the RIS budget.
pub fn project(cfg: &SystemConfig, ch: &ChannelSet, st: &mut StaticState) {
    st.ris.clip();
    let pt = cfg.pt_max_w();
    let p = st.w.total_power();
    if p > pt {
        let s = (pt / p).sqrt();
        for w in &mut st.w.0 {
            for x in w {
                *x *= s;
            }
        }
    }
    let pr = cfg.pris_max_w();
    let pw = evaluation::ris_tx_power(cfg, ch, &st.ris, st.w.total_power(), 0, &st.v);
    if pw > pr {
        let s = (pr / pw).sqrt() * (1.0 - 1e-12);
        for n in 0..st.ris.len() {
            if st.ris.active[n] {
                st.ris.alpha[n] *= s;
            }
        }
    }
    st.v.z = cfg.altitude_m;
}

/// Result of one block: the candidate (if the solver produced one) and the
/// surrogate objective.
#[derive(Debug, Clone)]
pub struct BlockResult {
    pub status: Status,
    pub candidate: Option<StaticState>,
    pub surrogate: Option<f64>,
}

impl BlockResult {
    fn failed(status: Status) -> Self {
        BlockResult {
            status,
            candidate: None,
            surrogate: None,
        }
    }
}

fn affine_parts(z: CAffine) -> [Affine; 2] {
    z.parts()
}

fn ris_power_terms(cfg: &SystemConfig, ch: &ChannelSet, ris: &RisProfile, v: &Pos, t: usize) -> (f64, f64) {
    // (sigma_r^2 sum_A |a|^2, sum_A |a|^2 ||h1,n||^2)
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
    (r0, r1)
}

/// Beamforming subproblem at fixed placement and RIS.
pub fn beamforming_block(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    st: &StaticState,
    settings: &SolveSettings,
) -> BlockResult {
    match build_beamforming(cfg, ch, st, settings) {
        Ok(r) => r,
        Err(_) => BlockResult::failed(Status::NumericalTrouble),
    }
}

fn build_beamforming(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    st: &StaticState,
    settings: &SolveSettings,
) -> crate::conic::Result<BlockResult> {
    let k_n = ch.num_ues();
    let nt = ch.num_antennas();
    let pt = cfg.pt_max_w();
    let su2 = cfg.sigma_u2_w();
    let scale = (pt / su2).sqrt();

    let mut prog = Program::new();
    let tau = prog.var("tau")?;
    let w: Vec<ComplexVar> = (0..k_n)
        .map(|k| prog.complex_vector(&format!("w{k}"), nt))
        .collect::<Result<_, _>>()?;
    let gamma = prog.vector("gamma", k_n)?;

    for k in 0..k_n {
        let h: Vec<C64> = ch
            .effective(k, 0, &st.v, &st.ris.alpha)
            .into_iter()
            .map(|x| x * scale)
            .collect();
        let w0: Vec<Vec<C64>> = st.w.0.iter().map(|x| x.iter().map(|y| y / pt.sqrt()).collect()).collect();
        let a0 = apply(&h, &w0[k]);
        let interf: f64 = (0..k_n).filter(|&j| j != k).map(|j| apply(&h, &w0[j]).norm_sqr()).sum();
        let noise = evaluation::noise_power(cfg, ch, k, &st.ris) / su2;
        let g0 = (a0.norm_sqr() / (interf + noise)).max(1e-12);
        let mut quad = Vec::new();
        for (j, wj) in w.iter().enumerate() {
            if j != k {
                quad.extend(affine_parts(wj.dot(&h)));
            }
        }
        let bound = w[k].dot(&h).re_conj_mul(a0) * (2.0 / g0)
            - Affine::term(gamma[k], a0.norm_sqr() / (g0 * g0))
            - noise;
        prog.quad_le(quad, bound)?;
        prog.nonneg(gamma[k].into())?;
        prog.exp_log(tau.into(), Affine::from(gamma[k]) + 1.0)?;
    }

    let coords: Vec<Affine> = w.iter().flat_map(|x| x.coords()).collect();
    prog.soc(coords.clone(), Affine::constant(1.0))?;
    let (r0, r1) = ris_power_terms(cfg, ch, &st.ris, &st.v, 0);
    if r1 > 0.0 {
        let room = (cfg.pris_max_w() - r0) / (r1 * pt);
        if room <= 0.0 {
            return Ok(BlockResult::failed(Status::Infeasible));
        }
        prog.soc(coords, Affine::constant(room.sqrt()))?;
    }
    prog.maximize(tau)?;

    let sol = prog.solve(settings)?;
    if !sol.is_optimal() {
        return Ok(BlockResult::failed(sol.status));
    }
    let mut cand = st.clone();
    for (k, wk) in w.iter().enumerate() {
        cand.w.0[k] = sol
            .complex(wk)
            .expect("optimal has values")
            .into_iter()
            .map(|x| x * pt.sqrt())
            .collect();
    }
    project(cfg, ch, &mut cand);
    cand.refresh(cfg, ch);
    Ok(BlockResult {
        status: sol.status,
        candidate: Some(cand),
        surrogate: sol.objective,
    })
}

/// Coefficients of `|h_k(v) w_j|^2 / sigma_u^2` split over the direct and
/// RIS amplitudes at the expansion point.
pub fn power_split(
    ch: &ChannelSet,
    k: usize,
    t: usize,
    v0: &Pos,
    w: &[C64],
    alpha: &[C64],
    su2: f64,
) -> PowerSplit {
    let a = apply(&ch.h0(k, t, v0), w);
    let mut b = C64::new(0.0, 0.0);
    if ch.num_elements() > 0 {
        let cascade = ch.cascade(k, t, v0);
        for (n, an) in alpha.iter().enumerate() {
            b += an * apply(&cascade[n], w);
        }
    }
    PowerSplit {
        s0: a.norm_sqr() / su2,
        s1: b.norm_sqr() / su2,
        s2: 2.0 * (a * b.conj()).re / su2,
    }
}

/// Placement subproblem at fixed beams and RIS.
pub fn location_block(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    st: &StaticState,
    settings: &SolveSettings,
) -> BlockResult {
    match build_location(cfg, ch, st, settings) {
        Ok(r) => r,
        Err(_) => BlockResult::failed(Status::NumericalTrouble),
    }
}

fn build_location(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    st: &StaticState,
    settings: &SolveSettings,
) -> crate::conic::Result<BlockResult> {
    let k_n = ch.num_ues();
    let su2 = cfg.sigma_u2_w();
    let [e0, e1, _] = ch.exponents;
    let v0 = st.v;
    let has_ris = ch.num_elements() > 0;

    let mut prog = Program::new();
    let tau = prog.var("tau")?;
    let pos = PlaneVars::new(&mut prog, "v", cfg.area_side_m, cfg.altitude_m)?;
    let (q, big_q): (Affine, Affine) = if has_ris {
        let q = lower_amplitude(&mut prog, "q", &pos, &ch.ris_position, &v0, e1)?;
        let big_q = upper_amplitude(&mut prog, "Q", &pos, &ch.ris_position, &v0, e1)?;
        (q.into(), big_q.into())
    } else {
        (Affine::constant(1.0), Affine::constant(1.0))
    };

    for k in 0..k_n {
        let u = ch.ue_positions[k];
        let p = lower_amplitude(&mut prog, &format!("p{k}"), &pos, &u, &v0, e0)?;
        let big_p = upper_amplitude(&mut prog, &format!("P{k}"), &pos, &u, &v0, e0)?;
        let slacks = Slacks {
            p: p.into(),
            q: q.clone(),
            big_p: big_p.into(),
            big_q: big_q.clone(),
        };
        let noise = evaluation::noise_power(cfg, ch, k, &st.ris) / su2;

        let sig = power_split(ch, k, 0, &v0, &st.w.0[k], &st.ris.alpha, su2);
        let a_hat = prog.var(format!("ahat{k}"))?;
        let (lin, quad) = signal_lower(&sig, &slacks);
        prog.quad_le(quad, lin - a_hat)?;

        let mut interf_sum = Affine::zero();
        let mut interf0 = 0.0;
        for j in 0..k_n {
            if j == k {
                continue;
            }
            let split = power_split(ch, k, 0, &v0, &st.w.0[j], &st.ris.alpha, su2);
            let a_bar = prog.var(format!("abar{k}_{j}"))?;
            let (lin, quad) = interference_upper(&split, &slacks);
            prog.quad_le(quad, Affine::from(a_bar) - lin)?;
            interf_sum += Affine::from(a_bar);
            interf0 += split.total().max(0.0);
        }
        // tau <= log(noise + a_hat + sum a_bar) - log(noise + sum a_bar)
        let base = noise + interf0;
        let lhs = Affine::from(tau) + base.ln() + (interf_sum.clone() - interf0) * (1.0 / base);
        prog.exp_log(lhs, Affine::from(a_hat) + interf_sum + noise)?;
    }

    let (r0, r1) = ris_power_terms(cfg, ch, &st.ris, &v0, 0);
    if has_ris && r1 > 0.0 {
        let room = (cfg.pris_max_w() - r0) / (r1 * st.w.total_power().max(1e-300));
        if room <= 0.0 {
            return Ok(BlockResult::failed(Status::Infeasible));
        }
        prog.le(big_q.clone(), room.sqrt())?;
    }
    prog.maximize(tau)?;

    let sol = prog.solve(settings)?;
    if !sol.is_optimal() {
        return Ok(BlockResult::failed(sol.status));
    }
    let mut cand = st.clone();
    cand.v = pos.position(sol.values().expect("optimal has values"));
    project(cfg, ch, &mut cand);
    cand.refresh(cfg, ch);
    Ok(BlockResult {
        status: sol.status,
        candidate: Some(cand),
        surrogate: sol.objective,
    })
}

/// RIS coefficient subproblem at fixed placement and beams.
pub fn ris_block(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    st: &StaticState,
    settings: &SolveSettings,
) -> BlockResult {
    if ch.num_elements() == 0 {
        return BlockResult::failed(Status::Optimal);
    }
    match build_ris(cfg, ch, st, settings) {
        Ok(r) => r,
        Err(_) => BlockResult::failed(Status::NumericalTrouble),
    }
}

fn build_ris(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    st: &StaticState,
    settings: &SolveSettings,
) -> crate::conic::Result<BlockResult> {
    let k_n = ch.num_ues();
    let n_el = ch.num_elements();
    let su2 = cfg.sigma_u2_w();
    let su = su2.sqrt();
    let sr2 = cfg.sigma_r2_w();
    let v = st.v;
    let caps: Vec<f64> = (0..n_el).map(|n| st.ris.cap(n)).collect();
    let beta0: Vec<C64> = (0..n_el).map(|n| st.ris.alpha[n] / caps[n]).collect();

    let mut prog = Program::new();
    let tau = prog.var("tau")?;
    let beta = prog.complex_vector("beta", n_el)?;

    for k in 0..k_n {
        let h0 = ch.h0(k, 0, &v);
        let cascade = ch.cascade(k, 0, &v);
        // z_kj(beta) = a + beta^T b, normalized by sigma_u
        let mut z_aff = Vec::with_capacity(k_n);
        let mut z0 = Vec::with_capacity(k_n);
        for j in 0..k_n {
            let a = apply(&h0, &st.w.0[j]) / su;
            let b: Vec<C64> = (0..n_el)
                .map(|n| apply(&cascade[n], &st.w.0[j]) * caps[n] / su)
                .collect();
            let value = a + beta0.iter().zip(&b).map(|(x, y)| x * y).sum::<C64>();
            z_aff.push(beta.dot(&b) + CAffine::constant(a));
            z0.push(value);
        }
        let rho: Vec<f64> = (0..n_el)
            .map(|n| {
                if st.ris.active[n] {
                    sr2 * ch.h2(k, n).norm_sqr() * caps[n] * caps[n] / su2
                } else {
                    0.0
                }
            })
            .collect();

        // concave lower bound of log(sum_j |z_kj|^2 + noise)
        let mut arg = Affine::constant(1.0);
        for j in 0..k_n {
            arg += z_aff[j].re_conj_mul(z0[j]) * 2.0 - z0[j].norm_sqr();
        }
        for n in 0..n_el {
            if rho[n] > 0.0 {
                let e = beta.entry(n).re_conj_mul(beta0[n]) * 2.0 - beta0[n].norm_sqr();
                arg += e * rho[n];
            }
        }

        // theta >= interference + noise
        let theta = prog.var(format!("theta{k}"))?;
        let mut quad = Vec::new();
        let mut theta0 = 1.0;
        for j in 0..k_n {
            if j != k {
                quad.extend(affine_parts(z_aff[j].clone()));
                theta0 += z0[j].norm_sqr();
            }
        }
        for n in 0..n_el {
            if rho[n] > 0.0 {
                quad.extend(affine_parts(beta.entry(n).scale(C64::new(rho[n].sqrt(), 0.0))));
                theta0 += rho[n] * beta0[n].norm_sqr();
            }
        }
        prog.quad_le(quad, Affine::from(theta) - 1.0)?;
        let lhs = Affine::from(tau) + theta0.ln() + (Affine::from(theta) - theta0) * (1.0 / theta0);
        prog.exp_log(lhs, arg)?;
    }

    for n in 0..n_el {
        prog.soc(affine_parts(beta.entry(n)).to_vec(), Affine::constant(1.0))?;
    }
    let pt_now = st.w.total_power();
    let pr = cfg.pris_max_w();
    let mut power_coords = Vec::new();
    for n in 0..n_el {
        if st.ris.active[n] {
            let xi = sr2 + ch.h1_norm2(n, 0, &v) * pt_now;
            let s = caps[n] * (xi / pr).sqrt();
            power_coords.extend(affine_parts(beta.entry(n).scale(C64::new(s, 0.0))));
        }
    }
    if !power_coords.is_empty() {
        prog.soc(power_coords, Affine::constant(1.0))?;
    }
    prog.maximize(tau)?;

    let sol = prog.solve(settings)?;
    if !sol.is_optimal() {
        return Ok(BlockResult::failed(sol.status));
    }
    let b = sol.complex(&beta).expect("optimal has values");
    let mut cand = st.clone();
    cand.ris.alpha = b.iter().zip(&caps).map(|(x, c)| x * c).collect();
    project(cfg, ch, &mut cand);
    cand.refresh(cfg, ch);
    Ok(BlockResult {
        status: sol.status,
        candidate: Some(cand),
        surrogate: sol.objective,
    })
}

/// Applies a block result under the acceptance rule and returns the outcome.
pub fn accept(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    st: &mut StaticState,
    res: BlockResult,
) -> (Outcome, f64) {
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

/// Runs the three blocks in order until the objective gain drops below
/// `eps_conv` or the iteration cap is hit.
pub fn run(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    init: StaticState,
    opts: &StaticOptions,
) -> (StaticState, IterationTrace) {
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
    type BlockFn = fn(&SystemConfig, &ChannelSet, &StaticState, &SolveSettings) -> BlockResult;
    let blocks: [(Block, BlockFn); 3] = [
        (Block::Beamforming, beamforming_block),
        (Block::Location, location_block),
        (Block::Ris, ris_block),
    ];
    for iter in 1..=opts.max_iters {
        let before = st.tau;
        let mut failures = 0;
        let mut attempted = 0;
        for (block, f) in blocks {
            let start = Instant::now();
            let (mut outcome, mut residual) = (Outcome::Skipped, 0.0);
            for round in 0..opts.inner_rounds.max(1) {
                let prev = st.tau;
                let res = f(cfg, ch, &st, &opts.solve);
                let (o, r) = accept(cfg, ch, &mut st, res);
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
        trace.taus.push(st.tau);
        if attempted > 0 && failures == attempted {
            trace.termination = Termination::Breakdown;
            return (st, trace);
        }
        if st.tau - before < opts.eps_conv {
            trace.termination = Termination::Converged;
            return (st, trace);
        }
    }
    trace.termination = Termination::IterationCap;
    (st, trace)
}

/// Initializes from `seed` and runs to convergence.
pub fn optimize(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    seed: u64,
    opts: &StaticOptions,
) -> (StaticState, IterationTrace) {
    let init = initialize(cfg, ch, seed);
    run(cfg, ch, init, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn desk(seed: u64) -> (SystemConfig, ChannelSet) {
        let cfg = SystemConfig::desk();
        let ch = ChannelSet::sample(&cfg, &[area_center(&cfg)], seed).unwrap();
        (cfg, ch)
    }

    #[test]
    fn init_is_feasible() {
        let (cfg, ch) = desk(1);
        let st = initialize(&cfg, &ch, 1);
        assert!(st.residual(&cfg, &ch) <= 1e-9);
        let p = evaluation::ris_tx_power(&cfg, &ch, &st.ris, st.w.total_power(), 0, &st.v);
        assert!(p <= cfg.pris_max_w() * (1.0 + 1e-9));
        assert_abs_diff_eq!(st.w.total_power(), cfg.pt_max_w(), epsilon = 1e-12);
    }

    #[test]
    fn init_passive_has_unit_amplitudes() {
        let cfg = SystemConfig {
            num_active: 0,
            ..SystemConfig::desk()
        };
        let ch = ChannelSet::sample(&cfg, &[area_center(&cfg)], 2).unwrap();
        let st = initialize(&cfg, &ch, 2);
        for a in &st.ris.alpha {
            assert_abs_diff_eq!(a.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_ue_gets_full_power() {
        let cfg = SystemConfig {
            num_ues: 1,
            ..SystemConfig::desk()
        };
        let ch = ChannelSet::sample(&cfg, &[area_center(&cfg)], 3).unwrap();
        let st = initialize(&cfg, &ch, 3);
        assert_abs_diff_eq!(st.w.power(0), cfg.pt_max_w(), epsilon = 1e-12);
    }

    #[test]
    fn blocks_do_not_decrease() {
        let (cfg, ch) = desk(4);
        let mut st = initialize(&cfg, &ch, 4);
        let s = SolveSettings::default();
        for f in [beamforming_block, location_block, ris_block] {
            let before = st.tau;
            let res = f(&cfg, &ch, &st, &s);
            assert_eq!(res.status, Status::Optimal);
            let (o, _) = accept(&cfg, &ch, &mut st, res);
            assert_eq!(o, Outcome::Accepted);
            assert!(st.tau >= before - 1e-9);
        }
    }

    #[test]
    fn run_is_monotone_and_deterministic() {
        let (cfg, ch) = desk(5);
        let opts = StaticOptions::from_config(&cfg);
        let (a, ta) = optimize(&cfg, &ch, 5, &opts);
        let (b, tb) = optimize(&cfg, &ch, 5, &opts);
        assert_eq!(ta, tb);
        assert_eq!(a, b);
        assert!(ta.is_monotone(1e-6));
        assert!(a.residual(&cfg, &ch) <= 1e-6);
        assert_abs_diff_eq!(a.tau, evaluation::min_rate(&a.rates(&cfg, &ch)), epsilon = 1e-12);
    }
}
