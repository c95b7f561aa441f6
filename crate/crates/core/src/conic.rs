//! A small conic modelling layer over the Clarabel interior-point solver.
//!
//! Programs are built from real scalar variables, sparse affine expressions
//! and four cone families: zero, nonnegative, second-order and the
//! exponential cone (used only as `t <= log(z)`). Complex vectors are lifted
//! to pairs of real coordinates.
//!
//! Two solve paths exist. [`SolverMode::ExpCone`] passes the exponential
//! cones to Clarabel directly. [`SolverMode::Bisection`] never shows an
//! exponential cone to the backend: it bisects on the objective level and
//! decides each level with second-order-cone programs in which the log
//! constraints are replaced by tangent cuts.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
    SupportedConeT::{ExponentialConeT, NonnegativeConeT, SecondOrderConeT, ZeroConeT},
};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("variable name `{0}` is already registered")]
    DuplicateName(String),
    #[error("expression references variable {index} but only {count} exist")]
    UnknownVariable { index: usize, count: usize },
    #[error("expression has a non-finite coefficient")]
    NonFinite,
    #[error("no objective was set")]
    NoObjective,
}

pub type Result<T> = std::result::Result<T, ConicError>;

/// Handle to a real scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Sparse affine expression `sum coef_i x_i + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl Affine {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Affine {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(v: Var, coef: f64) -> Self {
        Affine {
            terms: vec![(v.0, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: Var, coef: f64) {
        if coef != 0.0 {
            self.terms.push((v.0, coef));
        }
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (Var, f64)> + '_ {
        self.terms.iter().map(|&(i, c)| (Var(i), c))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    /// Sum of absolute term values at `x`, used to scale residuals.
    fn magnitude(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| (c * x[i]).abs()).sum::<f64>() + self.constant.abs()
    }

    fn compacted(&self) -> Affine {
        let mut t = self.terms.clone();
        t.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (i, c) in t {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        Affine {
            terms: out,
            constant: self.constant,
        }
    }

    fn check(&self, count: usize) -> Result<()> {
        if !self.constant.is_finite() {
            return Err(ConicError::NonFinite);
        }
        for &(i, c) in &self.terms {
            if i >= count {
                return Err(ConicError::UnknownVariable { index: i, count });
            }
            if !c.is_finite() {
                return Err(ConicError::NonFinite);
            }
        }
        Ok(())
    }
}

impl From<Var> for Affine {
    fn from(v: Var) -> Self {
        Affine::term(v, 1.0)
    }
}

impl From<f64> for Affine {
    fn from(c: f64) -> Self {
        Affine::constant(c)
    }
}

impl AddAssign<&Affine> for Affine {
    fn add_assign(&mut self, rhs: &Affine) {
        self.terms.extend_from_slice(&rhs.terms);
        self.constant += rhs.constant;
    }
}

impl AddAssign for Affine {
    fn add_assign(&mut self, rhs: Affine) {
        *self += &rhs;
    }
}

impl<T: Into<Affine>> Add<T> for Affine {
    type Output = Affine;
    fn add(mut self, rhs: T) -> Affine {
        self += rhs.into();
        self
    }
}

impl<T: Into<Affine>> Sub<T> for Affine {
    type Output = Affine;
    fn sub(self, rhs: T) -> Affine {
        self + (-rhs.into())
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self * -1.0
    }
}

impl Mul<f64> for Affine {
    type Output = Affine;
    fn mul(mut self, k: f64) -> Affine {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }
}

/// Complex affine scalar held as real and imaginary parts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CAffine {
    pub re: Affine,
    pub im: Affine,
}

impl CAffine {
    pub fn constant(c: C64) -> Self {
        CAffine {
            re: Affine::constant(c.re),
            im: Affine::constant(c.im),
        }
    }

    /// Multiplies by a complex constant.
    pub fn scale(&self, k: C64) -> CAffine {
        CAffine {
            re: self.re.clone() * k.re - self.im.clone() * k.im,
            im: self.re.clone() * k.im + self.im.clone() * k.re,
        }
    }

    /// `Re{conj(a) * self}`.
    pub fn re_conj_mul(&self, a: C64) -> Affine {
        self.re.clone() * a.re + self.im.clone() * a.im
    }

    pub fn parts(self) -> [Affine; 2] {
        [self.re, self.im]
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        C64::new(self.re.eval(x), self.im.eval(x))
    }
}

impl Add for CAffine {
    type Output = CAffine;
    fn add(self, rhs: CAffine) -> CAffine {
        CAffine {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

/// Complex vector variable lifted to real and imaginary coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVar {
    re: Vec<Var>,
    im: Vec<Var>,
}

impl ComplexVar {
    pub fn dim(&self) -> usize {
        self.re.len()
    }

    pub fn entry(&self, i: usize) -> CAffine {
        CAffine {
            re: self.re[i].into(),
            im: self.im[i].into(),
        }
    }

    /// `x^T h` (no conjugation).
    pub fn dot(&self, h: &[C64]) -> CAffine {
        let mut out = CAffine::default();
        for (i, hi) in h.iter().enumerate() {
            out.re.add_term(self.re[i], hi.re);
            out.re.add_term(self.im[i], -hi.im);
            out.im.add_term(self.re[i], hi.im);
            out.im.add_term(self.im[i], hi.re);
        }
        out
    }

    /// `Re{a^H x}`.
    pub fn re_inner(&self, a: &[C64]) -> Affine {
        let mut out = Affine::zero();
        for (i, ai) in a.iter().enumerate() {
            out.add_term(self.re[i], ai.re);
            out.add_term(self.im[i], ai.im);
        }
        out
    }

    /// Real coordinates `[re_0, im_0, re_1, ...]` scaled entrywise.
    pub fn scaled_coords(&self, scale: &[f64]) -> Vec<Affine> {
        let mut out = Vec::with_capacity(2 * self.dim());
        for i in 0..self.dim() {
            out.push(Affine::term(self.re[i], scale[i]));
            out.push(Affine::term(self.im[i], scale[i]));
        }
        out
    }

    pub fn coords(&self) -> Vec<Affine> {
        self.scaled_coords(&vec![1.0; self.dim()])
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Constraint {
    Zero(Affine),
    NonNeg(Affine),
    Soc { bound: Affine, args: Vec<Affine> },
    ExpLog { t: Affine, z: Affine },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    #[default]
    #[serde(rename = "expcone")]
    ExpCone,
    Bisection,
}

impl std::str::FromStr for SolverMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "expcone" => Ok(SolverMode::ExpCone),
            "bisection" => Ok(SolverMode::Bisection),
            other => Err(format!("unknown solver mode `{other}` (expected expcone or bisection)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    pub mode: SolverMode,
    pub max_iter: u32,
    /// Relative residual at which a backend answer is accepted as optimal.
    pub residual_tol: f64,
    /// Relative gap at which bisection stops.
    pub bisection_tol: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            mode: SolverMode::ExpCone,
            max_iter: 200,
            residual_tol: 1e-6,
            bisection_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::NumericalTrouble => "numerical_trouble",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    values: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub iterations: u32,
    /// Largest relative constraint violation at the returned point.
    pub residual: f64,
    names: HashMap<String, usize>,
}

impl Solution {
    fn failed(status: Status, iterations: u32) -> Self {
        Solution {
            status,
            values: None,
            objective: None,
            iterations,
            residual: f64::INFINITY,
            names: HashMap::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, v: Var) -> Option<f64> {
        self.values.as_ref().map(|x| x[v.0])
    }

    pub fn value_of(&self, a: &Affine) -> Option<f64> {
        self.values.as_ref().map(|x| a.eval(x))
    }

    pub fn complex(&self, v: &ComplexVar) -> Option<Vec<C64>> {
        let x = self.values.as_ref()?;
        Some(
            (0..v.dim())
                .map(|i| C64::new(x[v.re[i].0], x[v.im[i].0]))
                .collect(),
        )
    }

    pub fn by_name(&self, name: &str) -> Option<f64> {
        let i = *self.names.get(name)?;
        self.values.as_ref().map(|x| x[i])
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Program {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
    constraints: Vec<Constraint>,
    /// Expression to maximize.
    objective: Option<Affine>,
}

struct RawResult {
    status: SolverStatus,
    x: Vec<f64>,
    iterations: u32,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn var(&mut self, name: impl Into<String>) -> Result<Var> {
        let name = name.into();
        if self.lookup.contains_key(&name) {
            return Err(ConicError::DuplicateName(name));
        }
        let idx = self.names.len();
        self.lookup.insert(name.clone(), idx);
        self.names.push(name);
        Ok(Var(idx))
    }

    pub fn vector(&mut self, name: &str, dim: usize) -> Result<Vec<Var>> {
        (0..dim).map(|i| self.var(format!("{name}[{i}]"))).collect()
    }

    pub fn complex_vector(&mut self, name: &str, dim: usize) -> Result<ComplexVar> {
        if self.lookup.contains_key(name) {
            return Err(ConicError::DuplicateName(name.to_string()));
        }
        let re = self.vector(&format!("{name}.re"), dim)?;
        let im = self.vector(&format!("{name}.im"), dim)?;
        // reserve the bare name so it cannot be reused
        self.lookup.insert(name.to_string(), usize::MAX);
        Ok(ComplexVar { re, im })
    }

    fn push(&mut self, c: Constraint) -> Result<()> {
        let n = self.num_vars();
        match &c {
            Constraint::Zero(a) | Constraint::NonNeg(a) => a.check(n)?,
            Constraint::Soc { bound, args } => {
                bound.check(n)?;
                for a in args {
                    a.check(n)?;
                }
            }
            Constraint::ExpLog { t, z } => {
                t.check(n)?;
                z.check(n)?;
            }
        }
        self.constraints.push(c);
        Ok(())
    }

    /// `a == 0`.
    pub fn eq(&mut self, a: Affine) -> Result<()> {
        self.push(Constraint::Zero(a))
    }

    /// `a >= 0`.
    pub fn nonneg(&mut self, a: Affine) -> Result<()> {
        self.push(Constraint::NonNeg(a))
    }

    /// `lhs <= rhs`.
    pub fn le(&mut self, lhs: impl Into<Affine>, rhs: impl Into<Affine>) -> Result<()> {
        self.nonneg(rhs.into() - lhs.into())
    }

    /// `||args|| <= bound`.
    pub fn soc(&mut self, args: Vec<Affine>, bound: Affine) -> Result<()> {
        self.push(Constraint::Soc { bound, args })
    }

    /// `u * v >= ||w||^2` with `u, v >= 0`.
    pub fn rotated(&mut self, u: Affine, v: Affine, w: Vec<Affine>) -> Result<()> {
        let mut args: Vec<Affine> = w.into_iter().map(|a| a * 2.0).collect();
        args.push(u.clone() - v.clone());
        self.soc(args, u + v)
    }

    /// `||w||^2 <= bound`.
    pub fn quad_le(&mut self, w: Vec<Affine>, bound: Affine) -> Result<()> {
        if w.is_empty() {
            return self.nonneg(bound);
        }
        self.rotated(bound, Affine::constant(1.0), w)
    }

    /// `t <= log(z)`.
    pub fn exp_log(&mut self, t: Affine, z: Affine) -> Result<()> {
        self.push(Constraint::ExpLog { t, z })
    }

    pub fn maximize(&mut self, a: impl Into<Affine>) -> Result<()> {
        let a = a.into();
        a.check(self.num_vars())?;
        self.objective = Some(a);
        Ok(())
    }

    pub fn minimize(&mut self, a: impl Into<Affine>) -> Result<()> {
        self.maximize(-a.into())
    }

    pub fn has_exp(&self) -> bool {
        self.constraints
            .iter()
            .any(|c| matches!(c, Constraint::ExpLog { .. }))
    }

    /// Plain-text dump in the backend's standard form:
    /// minimize `q'x` subject to `A x + s = b`, `s` in the listed cones.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let n = self.num_vars();
        let _ = writeln!(out, "# minimize q'x  s.t.  A x + s = b,  s in K");
        let _ = writeln!(out, "vars {n}");
        for (i, name) in self.names.iter().enumerate() {
            let _ = writeln!(out, "var {i} {name}");
        }
        if let Some(obj) = &self.objective {
            let q = (obj.clone() * -1.0).compacted();
            let _ = write!(out, "q");
            for (v, c) in q.terms() {
                let _ = write!(out, " {}:{c:e}", v.0);
            }
            let _ = writeln!(out);
        }
        let (rows, cones) = self.standard_rows(&self.constraints);
        let mut r = 0;
        for cone in cones {
            let (label, dim) = match cone {
                ZeroConeT(d) => ("zero", d),
                NonnegativeConeT(d) => ("nonneg", d),
                SecondOrderConeT(d) => ("soc", d),
                ExponentialConeT() => ("exp", 3),
                _ => ("other", 0),
            };
            let _ = writeln!(out, "cone {label} {dim}");
            for row in &rows[r..r + dim] {
                let _ = write!(out, "row");
                for (v, c) in row.terms() {
                    let _ = write!(out, " {}:{:e}", v.0, -c);
                }
                let _ = writeln!(out, " | {:e}", row.constant);
            }
            r += dim;
        }
        out
    }

    /// Each constraint as a list of affine rows `s_i(x)` together with its cone.
    fn standard_rows(&self, cons: &[Constraint]) -> (Vec<Affine>, Vec<SupportedConeT<f64>>) {
        let mut rows = Vec::new();
        let mut cones = Vec::new();
        let mut zeros = Vec::new();
        let mut nonnegs = Vec::new();
        for c in cons {
            match c {
                Constraint::Zero(a) => zeros.push(a.compacted()),
                Constraint::NonNeg(a) => nonnegs.push(a.compacted()),
                _ => {}
            }
        }
        if !zeros.is_empty() {
            cones.push(ZeroConeT(zeros.len()));
            rows.extend(zeros);
        }
        if !nonnegs.is_empty() {
            cones.push(NonnegativeConeT(nonnegs.len()));
            rows.extend(nonnegs);
        }
        for c in cons {
            match c {
                Constraint::Soc { bound, args } => {
                    cones.push(SecondOrderConeT(args.len() + 1));
                    rows.push(bound.compacted());
                    rows.extend(args.iter().map(Affine::compacted));
                }
                Constraint::ExpLog { t, z } => {
                    cones.push(ExponentialConeT());
                    rows.push(t.compacted());
                    rows.push(Affine::constant(1.0));
                    rows.push(z.compacted());
                }
                _ => {}
            }
        }
        (rows, cones)
    }

    fn run_backend(
        &self,
        n: usize,
        cons: &[Constraint],
        maximize: &Affine,
        settings: &SolveSettings,
    ) -> RawResult {
        let (rows, cones) = self.standard_rows(cons);
        let m = rows.len();
        let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::with_capacity(m);
        for (r, row) in rows.iter().enumerate() {
            for &(j, c) in &row.terms {
                ii.push(r);
                jj.push(j);
                vv.push(-c);
            }
            b.push(row.constant);
        }
        let a = CscMatrix::new_from_triplets(m, n, ii, jj, vv);
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(j, c) in &maximize.compacted().terms {
            q[j] -= c;
        }
        let backend = DefaultSettings {
            verbose: false,
            max_iter: settings.max_iter,
            ..DefaultSettings::default()
        };
        let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, backend) {
            Ok(s) => s,
            Err(_) => {
                return RawResult {
                    status: SolverStatus::NumericalError,
                    x: vec![0.0; n],
                    iterations: 0,
                }
            }
        };
        solver.solve();
        RawResult {
            status: solver.solution.status,
            x: solver.solution.x.clone(),
            iterations: solver.solution.iterations,
        }
    }

    /// Largest relative violation of the original constraints at `x`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        residual_of(&self.constraints, x)
    }

    pub fn solve(&self, settings: &SolveSettings) -> Result<Solution> {
        let obj = self.objective.clone().ok_or(ConicError::NoObjective)?;
        match settings.mode {
            SolverMode::Bisection if self.has_exp() => Ok(self.solve_bisection(&obj, settings)),
            _ => Ok(self.solve_direct(&obj, settings)),
        }
    }

    fn finish(&self, x: Vec<f64>, obj: &Affine, iterations: u32, settings: &SolveSettings) -> Solution {
        let residual = self.residual(&x);
        if residual > settings.residual_tol || !x.iter().all(|v| v.is_finite()) {
            return Solution {
                residual,
                ..Solution::failed(Status::NumericalTrouble, iterations)
            };
        }
        Solution {
            status: Status::Optimal,
            objective: Some(obj.eval(&x)),
            values: Some(x),
            iterations,
            residual,
            names: self.lookup.clone(),
        }
    }

    fn solve_direct(&self, obj: &Affine, settings: &SolveSettings) -> Solution {
        let raw = self.run_backend(self.num_vars(), &self.constraints, obj, settings);
        match map_status(raw.status) {
            Status::Optimal => self.finish(raw.x, obj, raw.iterations, settings),
            other => Solution::failed(other, raw.iterations),
        }
    }

    fn solve_bisection(&self, obj: &Affine, settings: &SolveSettings) -> Solution {
        let n = self.num_vars();
        let (base, logs): (Vec<Constraint>, Vec<(Affine, Affine)>) = {
            let mut base = Vec::new();
            let mut logs = Vec::new();
            for c in &self.constraints {
                match c {
                    Constraint::ExpLog { t, z } => logs.push((t.clone(), z.clone())),
                    other => base.push(other.clone()),
                }
            }
            (base, logs)
        };
        let mut cuts = CutSet::new(&logs);
        let mut iterations = 0u32;

        // Outer approximation: maximize the objective over tangent cuts until
        // the relaxed optimum satisfies every log constraint.
        let mut upper = None;
        for _ in 0..MAX_KELLEY_ROUNDS {
            let mut cons = base.clone();
            cons.extend(cuts.constraints(None));
            let raw = self.run_backend(n, &cons, obj, settings);
            iterations += raw.iterations;
            match map_status(raw.status) {
                Status::Optimal => {}
                other => return Solution::failed(other, iterations),
            }
            let x = raw.x;
            if cuts.max_violation(&x) <= LOG_TOL {
                return self.finish(x, obj, iterations, settings);
            }
            upper = Some(obj.eval(&x));
            cuts.refine(&x, 0.0);
        }
        let Some(ub) = upper else {
            return Solution::failed(Status::NumericalTrouble, iterations);
        };

        // Find a feasible level below the relaxed bound, then bisect.
        let scale = 1.0 + ub.abs();
        let mut lo: Option<(f64, Vec<f64>)> = None;
        let mut hi = ub;
        let mut step = settings.bisection_tol * scale;
        for _ in 0..40 {
            let level = ub - step;
            let (probe, used) = self.probe_level(&base, &mut cuts, obj, level, settings);
            iterations += used;
            match probe {
                Probe::Feasible(x) => {
                    lo = Some((level, x));
                    break;
                }
                Probe::Infeasible | Probe::Undetermined => {
                    hi = level;
                    step *= 10.0;
                }
            }
        }
        let Some((mut lo_level, mut lo_x)) = lo else {
            return Solution::failed(Status::NumericalTrouble, iterations);
        };
        for _ in 0..60 {
            if hi - lo_level <= settings.bisection_tol * scale {
                break;
            }
            let mid = 0.5 * (lo_level + hi);
            let (probe, used) = self.probe_level(&base, &mut cuts, obj, mid, settings);
            iterations += used;
            match probe {
                Probe::Feasible(x) => {
                    lo_level = obj.eval(&x).max(mid);
                    lo_x = x;
                }
                Probe::Infeasible | Probe::Undetermined => hi = mid,
            }
        }
        self.finish(lo_x, obj, iterations, settings)
    }

    /// Decides whether `objective >= level` is attainable by maximizing the
    /// smallest log margin over an outer approximation.
    fn probe_level(
        &self,
        base: &[Constraint],
        cuts: &mut CutSet,
        obj: &Affine,
        level: f64,
        settings: &SolveSettings,
    ) -> (Probe, u32) {
        let n = self.num_vars();
        let margin = Var(n);
        let mut used = 0;
        for _ in 0..MAX_KELLEY_ROUNDS {
            let mut cons = base.to_vec();
            cons.push(Constraint::NonNeg(obj.clone() - level));
            cons.push(Constraint::NonNeg(Affine::constant(1.0) - Affine::from(margin)));
            cons.extend(cuts.constraints(Some(margin)));
            let raw = self.run_backend(n + 1, &cons, &Affine::from(margin), settings);
            used += raw.iterations;
            match map_status(raw.status) {
                Status::Optimal => {}
                Status::Infeasible => return (Probe::Infeasible, used),
                _ => return (Probe::Undetermined, used),
            }
            let relaxed = raw.x[n];
            let x = raw.x[..n].to_vec();
            if relaxed < -LOG_TOL {
                return (Probe::Infeasible, used);
            }
            if cuts.true_margin(&x) >= 0.0 && residual_of(base, &x) <= settings.residual_tol {
                return (Probe::Feasible(x), used);
            }
            cuts.refine(&raw.x, relaxed.max(0.0));
        }
        (Probe::Undetermined, used)
    }
}

const MAX_KELLEY_ROUNDS: usize = 60;
const LOG_TOL: f64 = 1e-9;

enum Probe {
    Feasible(Vec<f64>),
    Infeasible,
    Undetermined,
}

/// Tangent cuts `t + m <= log(z*) + (z - z*) / z*` for every log constraint.
struct CutSet {
    logs: Vec<(Affine, Affine)>,
    points: Vec<Vec<f64>>,
}

impl CutSet {
    fn new(logs: &[(Affine, Affine)]) -> Self {
        let seeds = vec![1e-6, 1e-3, 1.0, 1e3, 1e6];
        CutSet {
            logs: logs.to_vec(),
            points: vec![seeds; logs.len()],
        }
    }

    fn constraints(&self, margin: Option<Var>) -> Vec<Constraint> {
        let mut out = Vec::new();
        for ((t, z), pts) in self.logs.iter().zip(&self.points) {
            out.push(Constraint::NonNeg(z.clone()));
            for &p in pts {
                let mut e = z.clone() * (1.0 / p) + (p.ln() - 1.0) - t.clone();
                if let Some(m) = margin {
                    e.add_term(m, -1.0);
                }
                out.push(Constraint::NonNeg(e));
            }
        }
        out
    }

    fn max_violation(&self, x: &[f64]) -> f64 {
        -self.true_margin_relative(x)
    }

    fn true_margin_relative(&self, x: &[f64]) -> f64 {
        self.logs
            .iter()
            .map(|(t, z)| {
                let (tv, zv) = (t.eval(x), z.eval(x));
                let m = if zv > 0.0 { zv.ln() - tv } else { f64::NEG_INFINITY };
                m / (1.0 + tv.abs())
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn true_margin(&self, x: &[f64]) -> f64 {
        self.logs
            .iter()
            .map(|(t, z)| {
                let zv = z.eval(x);
                if zv > 0.0 {
                    zv.ln() - t.eval(x)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn refine(&mut self, x: &[f64], margin: f64) {
        for ((t, z), pts) in self.logs.iter().zip(self.points.iter_mut()) {
            let (tv, zv) = (t.eval(x), z.eval(x));
            let need = tv + margin;
            if zv > 0.0 && zv.ln() >= need {
                continue;
            }
            let mut add = |p: f64| {
                if p.is_finite() && p > 0.0 && !pts.iter().any(|&q| ((q - p) / q).abs() < 1e-12) {
                    pts.push(p);
                }
            };
            if zv > 0.0 {
                add(zv);
                add((0.5 * (zv.ln() + need)).exp());
            }
            add(need.exp());
        }
    }
}

fn residual_of(cons: &[Constraint], x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for c in cons {
        let v = match c {
            Constraint::Zero(a) => a.eval(x).abs() / (1.0 + a.magnitude(x)),
            Constraint::NonNeg(a) => (-a.eval(x)).max(0.0) / (1.0 + a.magnitude(x)),
            Constraint::Soc { bound, args } => {
                let norm = args.iter().map(|a| a.eval(x).powi(2)).sum::<f64>().sqrt();
                let b = bound.eval(x);
                (norm - b).max(0.0) / (1.0 + norm.abs() + b.abs())
            }
            Constraint::ExpLog { t, z } => {
                let (tv, zv) = (t.eval(x), z.eval(x));
                if zv <= 0.0 {
                    f64::INFINITY
                } else {
                    (tv - zv.ln()).max(0.0) / (1.0 + tv.abs())
                }
            }
        };
        worst = worst.max(if v.is_nan() { f64::INFINITY } else { v });
    }
    worst
}

fn map_status(s: SolverStatus) -> Status {
    match s {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Status::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Status::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Status::Unbounded,
        _ => Status::NumericalTrouble,
    }
}
