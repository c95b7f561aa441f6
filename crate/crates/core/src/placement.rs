//! Convex restrictions shared by the hovering-position and trajectory
//! subproblems.
//!
//! Positions are scaled by a length `L` so program coordinates stay O(1).
//! Path-loss amplitudes are expressed relative to their value at the
//! expansion point, so every slack equals 1 there:
//!
//! * `p <= (d/d0)^(-e/2)` (lower amplitude slack) is enforced through
//!   `d/d0 <= 1 + (2/e)(1 - p)`, which is the tangent of the convex `p^(-2/e)`.
//! * `P >= (d/d0)^(-e/2)` (upper amplitude slack) is enforced through
//!   `l(v) (cP - c + 1) >= 1` with `c = 4/e` and `l` the tangent of
//!   `d^2/d0^2`; it needs `e < 4`.

use crate::channel::Pos;
use crate::conic::{Affine, Program, Result, Var};

/// Horizontal position variables in units of `scale`.
#[derive(Debug, Clone, Copy)]
pub struct PlaneVars {
    pub x: Var,
    pub y: Var,
    pub scale: f64,
    pub altitude: f64,
}

impl PlaneVars {
    pub fn new(prog: &mut Program, name: &str, scale: f64, altitude: f64) -> Result<Self> {
        Ok(PlaneVars {
            x: prog.var(format!("{name}.x"))?,
            y: prog.var(format!("{name}.y"))?,
            scale,
            altitude,
        })
    }

    /// Scaled offset `(v - target) / L` as three affine coordinates.
    pub fn offset(&self, target: &Pos) -> Vec<Affine> {
        let l = self.scale;
        vec![
            Affine::from(self.x) - target.x / l,
            Affine::from(self.y) - target.y / l,
            Affine::constant((self.altitude - target.z) / l),
        ]
    }

    pub fn position(&self, values: &[f64]) -> Pos {
        Pos::new(
            values[self.x.index()] * self.scale,
            values[self.y.index()] * self.scale,
            self.altitude,
        )
    }

    /// `(v - v0)` horizontal step in scaled units.
    pub fn step_from(&self, v0: &Pos) -> [Affine; 2] {
        let l = self.scale;
        [
            Affine::from(self.x) - v0.x / l,
            Affine::from(self.y) - v0.y / l,
        ]
    }
}

/// Adds `p` with `p <= (d(v)/d0)^(-e/2)` and returns it.
pub fn lower_amplitude(
    prog: &mut Program,
    name: &str,
    pos: &PlaneVars,
    target: &Pos,
    v0: &Pos,
    exponent: f64,
) -> Result<Var> {
    let p = prog.var(name)?;
    let d0 = (v0 - target).norm().max(1e-9) / pos.scale;
    let bound = (Affine::constant(1.0 + 2.0 / exponent) - Affine::term(p, 2.0 / exponent)) * d0;
    prog.soc(pos.offset(target), bound)?;
    prog.nonneg(p.into())?;
    Ok(p)
}

/// Adds `P` with `P >= (d(v)/d0)^(-e/2)` and returns it.
pub fn upper_amplitude(
    prog: &mut Program,
    name: &str,
    pos: &PlaneVars,
    target: &Pos,
    v0: &Pos,
    exponent: f64,
) -> Result<Var> {
    let big_p = prog.var(name)?;
    let c = 4.0 / exponent;
    let l = pos.scale;
    let d0sq = (v0 - target).norm_squared().max(1e-18);
    let [dx, dy] = pos.step_from(v0);
    let tangent = Affine::constant(1.0)
        + dx * (2.0 * (v0.x - target.x) * l / d0sq)
        + dy * (2.0 * (v0.y - target.y) * l / d0sq);
    let lifted = Affine::term(big_p, c) + (1.0 - c);
    prog.rotated(tangent, lifted, vec![Affine::constant(1.0)])?;
    Ok(big_p)
}

/// Coefficients of a received power `s0 a0^2 + s1 a1^2 + s2 a0 a1` in the
/// relative amplitudes of the direct (`a0`) and RIS (`a1`) links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
}

impl PowerSplit {
    pub fn total(&self) -> f64 {
        self.s0 + self.s1 + self.s2
    }
}

/// Amplitude slacks entering the bounds: lower `p`, `q` and upper `P`, `Q`
/// for the direct and RIS links.
#[derive(Debug, Clone)]
pub struct Slacks {
    pub p: Affine,
    pub q: Affine,
    pub big_p: Affine,
    pub big_q: Affine,
}

/// Concave lower bound written as `lin - ||quad||^2`.
pub fn signal_lower(c: &PowerSplit, s: &Slacks) -> (Affine, Vec<Affine>) {
    let mut lin = (s.p.clone() * 2.0 - 1.0) * c.s0 + (s.q.clone() * 2.0 - 1.0) * c.s1;
    let mut quad = Vec::new();
    if c.s2 >= 0.0 {
        lin += (s.p.clone() + s.q.clone() - 1.0) * c.s2;
        quad.push((s.p.clone() - s.q.clone()) * (c.s2 / 4.0).sqrt());
    } else {
        let k = (-c.s2 / 2.0).sqrt();
        quad.push(s.big_p.clone() * k);
        quad.push(s.big_q.clone() * k);
    }
    (lin, quad)
}

/// Convex upper bound written as `lin + ||quad||^2`.
pub fn interference_upper(c: &PowerSplit, s: &Slacks) -> (Affine, Vec<Affine>) {
    let mut lin = Affine::zero();
    let mut quad = Vec::new();
    let (mut a, mut b) = (c.s0, c.s1);
    if c.s2 > 0.0 {
        a += c.s2 / 2.0;
        b += c.s2 / 2.0;
    } else {
        let m = -c.s2;
        quad.push((s.p.clone() - s.q.clone()) * (m / 4.0).sqrt());
        lin += (Affine::constant(1.0) - s.p.clone() - s.q.clone()) * m;
    }
    quad.push(s.big_p.clone() * a.max(0.0).sqrt());
    quad.push(s.big_q.clone() * b.max(0.0).sqrt());
    (lin, quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn eval_lower(c: &PowerSplit, vals: [f64; 4]) -> f64 {
        let s = Slacks {
            p: Affine::constant(vals[0]),
            q: Affine::constant(vals[1]),
            big_p: Affine::constant(vals[2]),
            big_q: Affine::constant(vals[3]),
        };
        let (lin, quad) = signal_lower(c, &s);
        lin.constant_part() - quad.iter().map(|a| a.constant_part().powi(2)).sum::<f64>()
    }

    fn eval_upper(c: &PowerSplit, vals: [f64; 4]) -> f64 {
        let s = Slacks {
            p: Affine::constant(vals[0]),
            q: Affine::constant(vals[1]),
            big_p: Affine::constant(vals[2]),
            big_q: Affine::constant(vals[3]),
        };
        let (lin, quad) = interference_upper(c, &s);
        lin.constant_part() + quad.iter().map(|a| a.constant_part().powi(2)).sum::<f64>()
    }

    #[test]
    fn bounds_are_tight_at_unit_slacks() {
        for s2 in [-0.7, 0.0, 0.9] {
            let c = PowerSplit { s0: 2.0, s1: 0.3, s2 };
            assert_abs_diff_eq!(eval_lower(&c, [1.0; 4]), c.total(), epsilon = 1e-12);
            assert_abs_diff_eq!(eval_upper(&c, [1.0; 4]), c.total(), epsilon = 1e-12);
        }
    }

    #[test]
    fn bounds_sandwich_true_power() {
        let mut rng = crate::channel::rng_stream(4, 77);
        use rand::Rng;
        for _ in 0..2000 {
            let c = PowerSplit {
                s0: rng.gen_range(0.0..3.0),
                s1: rng.gen_range(0.0..3.0),
                s2: rng.gen_range(-2.0..2.0),
            };
            let a0: f64 = rng.gen_range(0.05..2.0);
            let a1: f64 = rng.gen_range(0.05..2.0);
            let truth = c.s0 * a0 * a0 + c.s1 * a1 * a1 + c.s2 * a0 * a1;
            let p = a0 * rng.gen_range(0.0..1.0);
            let q = a1 * rng.gen_range(0.0..1.0);
            let big_p = a0 * rng.gen_range(1.0..2.0);
            let big_q = a1 * rng.gen_range(1.0..2.0);
            assert!(eval_lower(&c, [p, q, big_p, big_q]) <= truth + 1e-12);
            let p = a0 * rng.gen_range(0.5..1.0);
            let q = a1 * rng.gen_range(0.5..1.0);
            assert!(eval_upper(&c, [p, q, big_p, big_q]) >= truth - 1e-12);
        }
    }
}
