//! Brute-force reference answers.
//!
//! Everything here evaluates the true objectives from [`crate::evaluation`]
//! or the raw prototype functions; none of it touches a surrogate or a conic
//! solver, so it can be used to check the optimizers.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BilSign};
use crate::channel::{rng_stream, ChannelSet, Pos};
use crate::config::SystemConfig;
use crate::evaluation::{self, Beamformers, RisProfile};

pub const DEFAULT_GRID_CAP: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("grid has {points} points, above the cap of {cap}")]
    Overflow { points: usize, cap: usize },
    #[error("grid dimension {0} needs a positive range and at least one point")]
    BadDimension(usize),
    #[error("phase search supports at most 3 free elements, got {0}")]
    TooManyPhases(usize),
}

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDim {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridDim {
    /// `points` samples covering `[lo, hi]` inclusive.
    pub fn closed(lo: f64, hi: f64, points: usize) -> Self {
        GridDim { lo, hi, points }
    }

    /// `points` phases on `[0, 2 pi)`.
    pub fn phase(points: usize) -> Self {
        let step = std::f64::consts::TAU / points as f64;
        GridDim {
            lo: 0.0,
            hi: std::f64::consts::TAU - step,
            points,
        }
    }

    pub fn step(&self) -> f64 {
        if self.points <= 1 {
            0.0
        } else {
            (self.hi - self.lo) / (self.points - 1) as f64
        }
    }

    pub fn at(&self, i: usize) -> f64 {
        self.lo + self.step() * i as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: Vec<GridDim>,
    pub cap: usize,
    /// Golden-section sweeps after the raw grid; zero disables refinement.
    pub refine_sweeps: usize,
}

impl GridSpec {
    pub fn new(dims: Vec<GridDim>) -> Self {
        GridSpec {
            dims,
            cap: DEFAULT_GRID_CAP,
            refine_sweeps: 2,
        }
    }

    pub fn total_points(&self) -> Result<usize> {
        let mut total: usize = 1;
        for (i, d) in self.dims.iter().enumerate() {
            if d.points == 0 || !(d.hi >= d.lo) || !d.lo.is_finite() || !d.hi.is_finite() {
                return Err(OracleError::BadDimension(i));
            }
            total = total.saturating_mul(d.points);
        }
        if total > self.cap {
            return Err(OracleError::Overflow {
                points: total,
                cap: self.cap,
            });
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub point: Vec<f64>,
    pub value: f64,
    /// Best value on the raw grid before refinement.
    pub grid_value: f64,
}

fn decode(spec: &GridSpec, mut idx: usize) -> Vec<f64> {
    let mut x = vec![0.0; spec.dims.len()];
    for (d, dim) in spec.dims.iter().enumerate().rev() {
        x[d] = dim.at(idx % dim.points);
        idx /= dim.points;
    }
    x
}

fn better(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    let av = if a.0.is_nan() { f64::NEG_INFINITY } else { a.0 };
    let bv = if b.0.is_nan() { f64::NEG_INFINITY } else { b.0 };
    if av > bv || (av == bv && a.1 < b.1) {
        (av, a.1)
    } else {
        (bv, b.1)
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Exhaustive maximization over the grid followed by per-coordinate
/// golden-section refinement within one grid step of the best point.
/// Refinement only ever replaces the incumbent with a strictly better point.
pub fn grid_search<F>(spec: &GridSpec, f: F) -> Result<GridResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let total = spec.total_points()?;
    let (best, idx) = (0..total)
        .into_par_iter()
        .map(|i| (f(&decode(spec, i)), i))
        .reduce(|| (f64::NEG_INFINITY, usize::MAX), better);
    let mut point = if idx == usize::MAX {
        decode(spec, 0)
    } else {
        decode(spec, idx)
    };
    let mut value = best;
    for _ in 0..spec.refine_sweeps {
        for (d, dim) in spec.dims.iter().enumerate() {
            let step = dim.step().max(if dim.points == 1 { 0.0 } else { 1e-12 });
            if step == 0.0 {
                continue;
            }
            let centre = point[d];
            let probe = |x: f64| {
                let mut p = point.clone();
                p[d] = x;
                f(&p)
            };
            let (x, fx) = golden_max(probe, centre - step, centre + step, 80);
            if fx > value {
                value = fx;
                point[d] = x;
            }
        }
    }
    Ok(GridResult {
        point,
        value,
        grid_value: best,
    })
}

/// Phase search over at most three free elements with an arbitrary true
/// objective of the full coefficient vector.
pub fn grid_phase_search<F>(
    base: &[C64],
    free: &[usize],
    amplitude: &[f64],
    points_per_dim: usize,
    objective: F,
) -> Result<GridResult>
where
    F: Fn(&[C64]) -> f64 + Sync,
{
    if free.len() > 3 {
        return Err(OracleError::TooManyPhases(free.len()));
    }
    let spec = GridSpec::new(vec![GridDim::phase(points_per_dim); free.len()]);
    grid_search(&spec, |theta| {
        let mut a = base.to_vec();
        for (i, &n) in free.iter().enumerate() {
            a[n] = C64::from_polar(amplitude[i], theta[i]);
        }
        objective(&a)
    })
}

/// Min-rate phase search for a hovering UAV: free elements get unit
/// amplitude and a searched phase, everything else stays as in `ris`.
#[allow(clippy::too_many_arguments)]
pub fn static_phase_search(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    v: &Pos,
    w: &Beamformers,
    ris: &RisProfile,
    free: &[usize],
    points_per_dim: usize,
) -> Result<GridResult> {
    let amps = vec![1.0; free.len()];
    grid_phase_search(&ris.alpha, free, &amps, points_per_dim, |a| {
        let prof = RisProfile {
            alpha: a.to_vec(),
            ..ris.clone()
        };
        evaluation::min_rate(&evaluation::rates_static(cfg, ch, v, w, &prof))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub power: f64,
    pub rate: f64,
    pub step: f64,
}

/// Best UAV power on `points` values of `[0, p_max]`, keeping only values for
/// which `feasible` holds.
pub fn grid_power_search(
    p_max: f64,
    points: usize,
    rate: impl Fn(f64) -> f64,
    feasible: impl Fn(f64) -> bool,
) -> PowerResult {
    let step = p_max / (points.max(2) - 1) as f64;
    let mut best = PowerResult {
        power: 0.0,
        rate: f64::NEG_INFINITY,
        step,
    };
    for i in 0..points.max(2) {
        let p = step * i as f64;
        if !feasible(p) {
            continue;
        }
        let r = rate(p);
        if r > best.rate {
            best.power = p;
            best.rate = r;
        }
    }
    best
}

/// Power search for one mobile slot along a fixed unit-norm direction.
#[allow(clippy::too_many_arguments)]
pub fn slot_power_search(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    k: usize,
    t: usize,
    v: &Pos,
    direction: &[C64],
    ris: &RisProfile,
    points: usize,
) -> PowerResult {
    let pr = cfg.pris_max_w();
    grid_power_search(
        cfg.pt_max_w(),
        points,
        |p| {
            let w: Vec<C64> = direction.iter().map(|d| d * p.sqrt()).collect();
            evaluation::rate_mobile_slot(cfg, ch, k, t, v, &w, ris)
        },
        |p| evaluation::ris_tx_power(cfg, ch, ris, p, t, v) <= pr,
    )
}

/// Horizontal placement search over `[0, D]^2` at fixed beams and RIS.
pub fn grid_location_search(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    w: &Beamformers,
    ris: &RisProfile,
    resolution_m: f64,
) -> Result<GridResult> {
    let points = (cfg.area_side_m / resolution_m).round() as usize + 1;
    let dim = GridDim::closed(0.0, cfg.area_side_m, points);
    let spec = GridSpec {
        refine_sweeps: 0,
        ..GridSpec::new(vec![dim, dim])
    };
    grid_search(&spec, |xy| {
        let v = Pos::new(xy[0], xy[1], cfg.altitude_m);
        evaluation::min_rate(&evaluation::rates_static(cfg, ch, &v, w, ris))
    })
}

/// The majorants under test. Swapping an entry lets a test feed a broken
/// bound through the same property suite.
#[derive(Clone, Copy)]
pub struct BoundTable {
    pub pow: fn(f64, f64, f64) -> bounds::Result<f64>,
    pub qua: fn(&[f64], &[f64], &[f64]) -> bounds::Result<f64>,
    pub bil: fn(f64, f64, BilSign, f64, f64) -> bounds::Result<f64>,
    pub qol: fn(&[C64], f64, &DMatrix<C64>, &[C64], f64) -> bounds::Result<f64>,
    pub log: fn(f64, f64, f64) -> bounds::Result<f64>,
}

impl Default for BoundTable {
    fn default() -> Self {
        BoundTable {
            pow: bounds::big_f_pow,
            qua: bounds::big_f_qua,
            bil: bounds::big_f_bil,
            qol: bounds::big_f_qol,
            log: bounds::log_upper_bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    Pow,
    Qua,
    BilPlus,
    BilMinus,
    Qol,
    Log,
}

impl BoundFamily {
    pub const ALL: [BoundFamily; 6] = [
        BoundFamily::Pow,
        BoundFamily::Qua,
        BoundFamily::BilPlus,
        BoundFamily::BilMinus,
        BoundFamily::Qol,
        BoundFamily::Log,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundFamily::Pow => "pow",
            BoundFamily::Qua => "qua",
            BoundFamily::BilPlus => "bil+",
            BoundFamily::BilMinus => "bil-",
            BoundFamily::Qol => "qol",
            BoundFamily::Log => "log",
        }
    }
}

/// One sampled instance flattened to real coordinates: `point` and
/// `expansion` live in the same space, `f` is the prototype and `big_f` its
/// majorant with the expansion point baked in.
struct Instance {
    point: Vec<f64>,
    expansion: Vec<f64>,
    f: Box<dyn Fn(&[f64]) -> f64>,
    big_f: Box<dyn Fn(&[f64]) -> f64>,
}

fn complex_from(x: &[f64]) -> Vec<C64> {
    x.chunks(2).map(|p| C64::new(p[0], p[1])).collect()
}

fn sample_instance<R: Rng>(family: BoundFamily, table: BoundTable, rng: &mut R) -> Instance {
    let pos = |rng: &mut R| 10f64.powf(rng.gen_range(-1.5..1.0));
    match family {
        BoundFamily::Pow => {
            let c = if rng.gen_bool(0.5) {
                rng.gen_range(1.05..4.0)
            } else {
                rng.gen_range(-3.0..-0.05)
            };
            let x0 = pos(rng);
            Instance {
                point: vec![pos(rng)],
                expansion: vec![x0],
                f: Box::new(move |x| bounds::f_pow(x[0], c).unwrap_or(f64::NAN)),
                big_f: Box::new(move |x| (table.pow)(x[0], c, x0).unwrap_or(f64::NAN)),
            }
        }
        BoundFamily::Qua => {
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let x0: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let point = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let c2 = c.clone();
            let x02 = x0.clone();
            Instance {
                point,
                expansion: x0,
                f: Box::new(move |x| bounds::f_qua(x, &c).unwrap_or(f64::NAN)),
                big_f: Box::new(move |x| (table.qua)(x, &c2, &x02).unwrap_or(f64::NAN)),
            }
        }
        BoundFamily::BilPlus | BoundFamily::BilMinus => {
            let sign = if family == BoundFamily::BilPlus {
                BilSign::Plus
            } else {
                BilSign::Minus
            };
            let (x0, y0) = (pos(rng), pos(rng));
            Instance {
                point: vec![pos(rng), pos(rng)],
                expansion: vec![x0, y0],
                f: Box::new(move |x| bounds::f_bil(x[0], x[1], sign).unwrap_or(f64::NAN)),
                big_f: Box::new(move |x| (table.bil)(x[0], x[1], sign, x0, y0).unwrap_or(f64::NAN)),
            }
        }
        BoundFamily::Qol => {
            let n = 3;
            let a = DMatrix::from_fn(n, n, |_, _| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let c = a.adjoint() * &a;
            let draw = |rng: &mut R| -> Vec<f64> {
                let mut v: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                v.push(pos(rng) + 0.05);
                v
            };
            let point = draw(rng);
            let expansion = draw(rng);
            let e = expansion.clone();
            let c2 = c.clone();
            Instance {
                point,
                expansion,
                f: Box::new(move |x| {
                    bounds::f_qol(&complex_from(&x[..2 * n]), x[2 * n], &c).unwrap_or(f64::NAN)
                }),
                big_f: Box::new(move |x| {
                    (table.qol)(
                        &complex_from(&x[..2 * n]),
                        x[2 * n],
                        &c2,
                        &complex_from(&e[..2 * n]),
                        e[2 * n],
                    )
                    .unwrap_or(f64::NAN)
                }),
            }
        }
        BoundFamily::Log => {
            let offset = rng.gen_range(0.1..5.0);
            let u0 = rng.gen_range(0.0..10.0);
            Instance {
                point: vec![rng.gen_range(0.0..10.0)],
                expansion: vec![u0],
                f: Box::new(move |x| (x[0] + offset).ln()),
                big_f: Box::new(move |x| (table.log)(x[0], u0, offset).unwrap_or(f64::NAN)),
            }
        }
    }
}

fn central_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub family: BoundFamily,
    pub samples: usize,
    /// Most negative `F - f` over the samples, scaled by `1 + |f|`.
    pub worst_slack: f64,
    /// Largest `|F - f|` at the expansion point, scaled by `1 + |f|`.
    pub worst_tangency: f64,
    /// Largest gradient mismatch at the expansion point, relative.
    pub worst_gradient: f64,
}

impl BoundReport {
    pub fn majorizes(&self) -> bool {
        self.worst_slack >= -1e-9
    }
    pub fn tangent(&self) -> bool {
        self.worst_tangency <= 1e-9
    }
    pub fn gradient_matches(&self, tol: f64) -> bool {
        self.worst_gradient <= tol
    }
    pub fn passes(&self) -> bool {
        self.majorizes() && self.tangent() && self.gradient_matches(1e-4)
    }
}

/// Majorization, tangency and gradient match over random pairs.
pub fn bound_properties(
    family: BoundFamily,
    table: BoundTable,
    samples: usize,
    seed: u64,
) -> BoundReport {
    let mut rng = rng_stream(seed, 40 + family as u64);
    let mut worst_slack = f64::INFINITY;
    let mut worst_tangency: f64 = 0.0;
    let mut worst_gradient: f64 = 0.0;
    for _ in 0..samples {
        let inst = sample_instance(family, table, &mut rng);
        let fv = (inst.f)(&inst.point);
        let slack = ((inst.big_f)(&inst.point) - fv) / (1.0 + fv.abs());
        worst_slack = worst_slack.min(if slack.is_nan() { f64::NEG_INFINITY } else { slack });
        let f0 = (inst.f)(&inst.expansion);
        let tang = ((inst.big_f)(&inst.expansion) - f0).abs() / (1.0 + f0.abs());
        worst_tangency = worst_tangency.max(if tang.is_nan() { f64::INFINITY } else { tang });
        let gf = central_gradient(&*inst.f, &inst.expansion);
        let gb = central_gradient(&*inst.big_f, &inst.expansion);
        let diff = gf.iter().zip(&gb).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = gb.iter().map(|b| b * b).sum::<f64>().sqrt().max(1.0);
        let g = diff / scale;
        worst_gradient = worst_gradient.max(if g.is_nan() { f64::INFINITY } else { g });
    }
    BoundReport {
        family,
        samples,
        worst_slack,
        worst_tangency,
        worst_gradient,
    }
}

/// Largest gradient discrepancy of one family over `samples` random points.
pub fn finite_difference_check(family: BoundFamily, samples: usize, seed: u64) -> f64 {
    bound_properties(family, BoundTable::default(), samples, seed).worst_gradient
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn coherent(theta: &[f64], h0: C64, g: f64) -> f64 {
        (h0 + C64::from_polar(g, theta[0])).norm_sqr()
    }

    #[test]
    fn single_element_phase_examples() {
        let spec = GridSpec::new(vec![GridDim::phase(360)]);
        let r = grid_search(&spec, |t| coherent(t, C64::new(1.0, 0.0), 0.5)).unwrap();
        assert_abs_diff_eq!(r.value, 2.25, epsilon = 1e-12);
        assert!(r.point[0].abs() < 1e-6 || (r.point[0] - 2.0 * PI).abs() < 1e-6);

        let r = grid_search(&spec, |t| coherent(t, C64::new(-1.0, 0.0), 0.5)).unwrap();
        assert_abs_diff_eq!(r.value, 2.25, epsilon = 1e-12);
        assert_abs_diff_eq!(r.point[0], PI, epsilon = 1e-6);
    }

    #[test]
    fn refinement_never_worse() {
        let spec = GridSpec::new(vec![GridDim::phase(7), GridDim::phase(5)]);
        let f = |t: &[f64]| (t[0] - 1.234).cos() + 0.5 * (t[1] + 0.4).cos();
        let r = grid_search(&spec, f).unwrap();
        assert!(r.value >= r.grid_value);
        assert_abs_diff_eq!(r.value, 1.5, epsilon = 1e-8);
    }

    #[test]
    fn grid_errors() {
        let spec = GridSpec::new(vec![GridDim::phase(10_000); 2]);
        let capped = GridSpec { cap: 1000, ..spec };
        assert!(matches!(grid_search(&capped, |_| 0.0), Err(OracleError::Overflow { .. })));
        let bad = GridSpec::new(vec![GridDim::closed(0.0, 1.0, 0)]);
        assert!(matches!(grid_search(&bad, |_| 0.0), Err(OracleError::BadDimension(0))));
        assert!(matches!(
            grid_phase_search(&[C64::new(0.0, 0.0); 4], &[0, 1, 2, 3], &[1.0; 4], 4, |_| 0.0),
            Err(OracleError::TooManyPhases(4))
        ));
    }

    #[test]
    fn power_search_examples() {
        let r = grid_power_search(1.0, 10_001, |p| (1.0 + p).ln(), |_| true);
        assert_abs_diff_eq!(r.power, 1.0);
        let r = grid_power_search(1.0, 10_001, |p| (1.0 + p).ln(), |p| p <= 0.37);
        assert!((r.power - 0.37).abs() <= r.step);
    }

    #[test]
    fn location_search_finds_lone_ue() {
        let cfg = SystemConfig {
            num_ues: 1,
            num_antennas: 1,
            ris_nx: 0,
            ris_ny: 0,
            num_active: 0,
            ue_positions_m: Some(vec![[63.0, 141.0, 0.0]]),
            ..SystemConfig::desk()
        };
        let v = crate::channel::area_center(&cfg);
        let ch = ChannelSet::sample(&cfg, &[v], 1).unwrap();
        let w = Beamformers(vec![vec![C64::new(0.3, 0.0)]]);
        let r = grid_location_search(&cfg, &ch, &w, &RisProfile::zeros(&cfg), 2.0).unwrap();
        assert!((r.point[0] - 63.0).abs() <= 2.0 && (r.point[1] - 141.0).abs() <= 2.0);
    }

    #[test]
    fn location_search_symmetric_pair() {
        let cfg = SystemConfig {
            num_ues: 2,
            num_antennas: 1,
            ris_nx: 0,
            ris_ny: 0,
            num_active: 0,
            ue_positions_m: Some(vec![[60.0, 100.0, 0.0], [140.0, 100.0, 0.0]]),
            ..SystemConfig::desk()
        };
        let v = crate::channel::area_center(&cfg);
        let mut ch = ChannelSet::sample(&cfg, &[v], 1).unwrap();
        ch.g0[0][0] = vec![C64::new(1.0, 0.0)];
        ch.g0[0][1] = vec![C64::new(1.0, 0.0)];
        let w = Beamformers(vec![vec![C64::new(0.1, 0.0)], vec![C64::new(0.0, 0.1)]]);
        let r = grid_location_search(&cfg, &ch, &w, &RisProfile::zeros(&cfg), 2.0).unwrap();
        assert!((r.point[0] - 100.0).abs() <= 2.0, "{:?}", r.point);
    }

    #[test]
    fn gradient_checks() {
        for fam in BoundFamily::ALL {
            assert!(finite_difference_check(fam, 100, 1) <= 1e-5, "{fam:?}");
        }
    }

    fn broken_bil(x: f64, y: f64, s: BilSign, x0: f64, y0: f64) -> bounds::Result<f64> {
        let flipped = match s {
            BilSign::Plus => BilSign::Minus,
            BilSign::Minus => BilSign::Plus,
        };
        bounds::big_f_bil(x, y, flipped, x0, y0)
    }

    #[test]
    fn mutant_bilinear_is_caught() {
        let table = BoundTable {
            bil: broken_bil,
            ..BoundTable::default()
        };
        assert!(!bound_properties(BoundFamily::BilPlus, table, 500, 3).passes());
        assert!(bound_properties(BoundFamily::BilPlus, BoundTable::default(), 500, 3).passes());
    }
}
