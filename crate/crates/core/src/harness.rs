//! Runs, sweeps and file output for the `hris` binary.
//!
//! Every output is data only (CSV and JSON). Floats are written in Rust's
//! shortest round-trip form, so identical runs give identical bytes.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{area_center, ChannelError, ChannelSet, CsiErrorSpec};
use crate::config::{ConfigError, SystemConfig};
use crate::conic::SolveSettings;
use crate::mobile_opt::{self, MobileError, MobileOptions, MobileState};
use crate::static_opt::{self, StaticOptions, StaticState};
use crate::trace::{IterationTrace, Termination};
use crate::verify::{self, Suite, SuiteReport, VerifySizes};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_BREAKDOWN: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Mobile(#[from] MobileError),
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_config(path: &Path) -> Result<SystemConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(SystemConfig::from_json(&text)?)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Scheme {
    NoRis,
    Passive,
    Hybrid,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::NoRis => "noRis",
            Scheme::Passive => "passive",
            Scheme::Hybrid => "hybrid",
        }
    }

    /// `noRis` drops the panel, `passive` drops the active elements.
    pub fn apply(self, cfg: &SystemConfig) -> SystemConfig {
        let mut c = cfg.clone();
        match self {
            Scheme::NoRis => {
                c.ris_nx = 0;
                c.ris_ny = 0;
                c.num_active = 0;
                c.active_set = None;
            }
            Scheme::Passive => {
                c.num_active = 0;
                c.active_set = None;
            }
            Scheme::Hybrid => {}
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Mode {
    Static,
    Mobile,
}

/// Run-time knobs that are not part of the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunSettings {
    pub solve: SolveSettings,
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    pub csi_epsilon: f64,
    /// Reported min rate: true channels, rounded schedule for mobile runs.
    pub min_rate_nats: f64,
    /// Optimizer objective on the channels it saw; for mobile runs the
    /// relaxed-schedule value at the end of the outer loop.
    pub tau_nats: f64,
    pub rates_nats: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub residual: f64,
}

pub struct StaticRun {
    pub config: SystemConfig,
    pub channels: ChannelSet,
    pub state: StaticState,
    pub trace: IterationTrace,
    pub summary: RunSummary,
}

pub struct MobileRun {
    pub config: SystemConfig,
    pub channels: ChannelSet,
    pub state: MobileState,
    pub trace: IterationTrace,
    pub summary: RunSummary,
}

fn estimate(ch: &ChannelSet, eps: f64, seed: u64) -> Result<ChannelSet> {
    Ok(ch.with_csi_error(&CsiErrorSpec::uniform(eps), seed)?)
}

/// Hovering design on channels estimated with error `eps`, scored on the
/// true channels.
pub fn run_static(cfg: &SystemConfig, seed: u64, eps: f64, settings: &RunSettings) -> Result<StaticRun> {
    cfg.validate()?;
    let truth = ChannelSet::sample(cfg, &[area_center(cfg)], seed)?;
    let seen = estimate(&truth, eps, seed)?;
    let opts = StaticOptions {
        solve: settings.solve,
        timing: settings.timing,
        ..StaticOptions::from_config(cfg)
    };
    let (state, trace) = static_opt::optimize(cfg, &seen, seed, &opts);
    let rates = state.rates(cfg, &truth);
    let summary = RunSummary {
        mode: Mode::Static,
        seed,
        csi_epsilon: eps,
        min_rate_nats: crate::evaluation::min_rate(&rates),
        tau_nats: state.tau,
        rates_nats: rates,
        iterations: trace.iterations(),
        termination: trace.termination,
        residual: state.residual(cfg, &truth),
    };
    Ok(StaticRun {
        config: cfg.clone(),
        channels: truth,
        state,
        trace,
        summary,
    })
}

/// Flying design; see [`run_static`] for the channel handling.
pub fn run_mobile(cfg: &SystemConfig, seed: u64, eps: f64, settings: &RunSettings) -> Result<MobileRun> {
    cfg.validate()?;
    let track = mobile_opt::initial_track(cfg, seed);
    let truth = ChannelSet::sample(cfg, &track, seed)?;
    let seen = estimate(&truth, eps, seed)?;
    let opts = MobileOptions {
        solve: settings.solve,
        timing: settings.timing,
        ..MobileOptions::from_config(cfg)
    };
    let (state, trace) = mobile_opt::optimize(cfg, &seen, seed, &opts)?;
    let rates = state.rounded_rates(cfg, &truth);
    let rounded = state.schedule.rounded();
    let summary = RunSummary {
        mode: Mode::Mobile,
        seed,
        csi_epsilon: eps,
        min_rate_nats: crate::evaluation::min_rate(&rates),
        tau_nats: trace.taus.last().copied().unwrap_or(f64::NAN),
        rates_nats: rates,
        iterations: trace.iterations(),
        termination: trace.termination,
        residual: crate::evaluation::mobile_residual(cfg, &truth, &state.track, &rounded, &state.w, &state.ris),
    };
    Ok(MobileRun {
        config: cfg.clone(),
        channels: truth,
        state,
        trace,
        summary,
    })
}

pub fn trace_csv(trace: &IterationTrace) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "tau_nats", "block", "status", "residual", "wall_ms"])?;
    for r in &trace.rows {
        w.write_record([
            r.iteration.to_string(),
            r.tau_nats.to_string(),
            r.block.to_string(),
            r.status.to_string(),
            r.residual.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

fn summary_json(summary: &RunSummary) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(summary)?;
    s.push(b'\n');
    Ok(s)
}

fn ris_rows(w: &mut csv::Writer<Vec<u8>>, t: Option<usize>, ris: &crate::evaluation::RisProfile) -> Result<()> {
    for (n, a) in ris.alpha.iter().enumerate() {
        let mut rec = Vec::new();
        if let Some(t) = t {
            rec.push(t.to_string());
        }
        rec.extend([
            n.to_string(),
            ris.active[n].to_string(),
            a.re.to_string(),
            a.im.to_string(),
            a.norm().to_string(),
            a.arg().to_string(),
        ]);
        w.write_record(rec)?;
    }
    Ok(())
}

const RIS_HEADER: [&str; 6] = ["n", "active", "re", "im", "amplitude", "phase_rad"];

/// `trace.csv`, `summary.json`, `ris_profile.csv` and `position.csv`.
pub fn write_static(dir: &Path, run: &StaticRun) -> Result<()> {
    ensure_dir(dir)?;
    write_atomic(&dir.join("trace.csv"), &trace_csv(&run.trace)?)?;
    write_atomic(&dir.join("summary.json"), &summary_json(&run.summary)?)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RIS_HEADER)?;
    ris_rows(&mut w, None, &run.state.ris)?;
    write_atomic(&dir.join("ris_profile.csv"), &w.into_inner().expect("in-memory writer"))?;
    let v = run.state.v;
    let pos = format!("x,y,z\n{},{},{}\n", v.x, v.y, v.z);
    write_atomic(&dir.join("position.csv"), pos.as_bytes())
}

pub fn trajectory_csv(state: &MobileState) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "x", "y", "z", "scheduledUe"])?;
    for (t, (p, k)) in state.track.iter().zip(state.scheduled_ues()).enumerate() {
        w.write_record([
            t.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.z.to_string(),
            k.map_or(String::new(), |k| k.to_string()),
        ])?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

/// As [`write_static`] plus `trajectory.csv` and the relaxed `schedule.csv`.
pub fn write_mobile(dir: &Path, run: &MobileRun) -> Result<()> {
    ensure_dir(dir)?;
    write_atomic(&dir.join("trace.csv"), &trace_csv(&run.trace)?)?;
    write_atomic(&dir.join("summary.json"), &summary_json(&run.summary)?)?;
    write_atomic(&dir.join("trajectory.csv"), &trajectory_csv(&run.state)?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t"];
    header.extend(RIS_HEADER);
    w.write_record(header)?;
    for (t, ris) in run.state.ris.iter().enumerate() {
        ris_rows(&mut w, Some(t), ris)?;
    }
    write_atomic(&dir.join("ris_profile.csv"), &w.into_inner().expect("in-memory writer"))?;

    let b = &run.state.schedule.b;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((0..b.len()).map(|k| format!("b{k}")));
    w.write_record(header)?;
    for t in 0..run.state.schedule.num_slots() {
        let mut rec = vec![t.to_string()];
        rec.extend(b.iter().map(|row| row[t].to_string()));
        w.write_record(rec)?;
    }
    write_atomic(&dir.join("schedule.csv"), &w.into_inner().expect("in-memory writer"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AxisName {
    PtMaxDbm,
    PrisMaxDbm,
    RisElements,
    NumActive,
    CsiEpsilon,
}

impl AxisName {
    pub fn name(self) -> &'static str {
        match self {
            AxisName::PtMaxDbm => "ptMaxDbm",
            AxisName::PrisMaxDbm => "prisMaxDbm",
            AxisName::RisElements => "risElements",
            AxisName::NumActive => "numActive",
            AxisName::CsiEpsilon => "csiEpsilon",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SweepAxis {
    pub name: AxisName,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "SystemConfig::desk")]
    pub base: SystemConfig,
    pub axis: SweepAxis,
    pub schemes: Vec<Scheme>,
    pub seeds: Vec<u64>,
    pub mode: Mode,
}

/// One sweep cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub value: f64,
    pub scheme: Scheme,
    pub seed: u64,
}

fn count(name: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(HarnessError::Spec(format!("{name} values must be non-negative integers, got {v}")))
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Spec("`seeds` is empty".into()));
        }
        if self.axis.values.is_empty() {
            return Err(HarnessError::Spec("`axis.values` is empty".into()));
        }
        if self.schemes.is_empty() {
            return Err(HarnessError::Spec("`schemes` is empty".into()));
        }
        self.base.validate()?;
        for &v in &self.axis.values {
            for &scheme in &self.schemes {
                let (cfg, _) = self.cell_config(v, scheme)?;
                cfg.validate()?;
            }
        }
        Ok(())
    }

    /// Scenario and CSI error of one axis point under one scheme.
    ///
    /// An element count keeps the base panel height when it divides the
    /// count and otherwise lays the panel out as a single row.
    pub fn cell_config(&self, value: f64, scheme: Scheme) -> Result<(SystemConfig, f64)> {
        let mut cfg = self.base.clone();
        let mut eps = 0.0;
        match self.axis.name {
            AxisName::PtMaxDbm => cfg.pt_max_dbm = value,
            AxisName::PrisMaxDbm => cfg.pris_max_dbm = value,
            AxisName::RisElements => {
                let n = count("risElements", value)?;
                let ny = if cfg.ris_ny > 0 && n % cfg.ris_ny == 0 { cfg.ris_ny } else { 1 };
                cfg.ris_ny = if n == 0 { 0 } else { ny };
                cfg.ris_nx = if n == 0 { 0 } else { n / ny };
                cfg.num_active = cfg.num_active.min(n);
                cfg.active_set = None;
            }
            AxisName::NumActive => {
                cfg.num_active = count("numActive", value)?;
                cfg.active_set = None;
            }
            AxisName::CsiEpsilon => {
                if !(value >= 0.0) {
                    return Err(HarnessError::Spec(format!("csiEpsilon must be non-negative, got {value}")));
                }
                eps = value;
            }
        }
        Ok((scheme.apply(&cfg), eps))
    }

    /// Axis value outermost, then scheme, then seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &value in &self.axis.values {
            for &scheme in &self.schemes {
                for &seed in &self.seeds {
                    out.push(Cell { value, scheme, seed });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub scheme: String,
    pub seed: u64,
    pub min_rate_nats: f64,
    pub tau_nats: f64,
    pub iterations: usize,
    pub termination: String,
    pub residual: f64,
    /// Empty on success.
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis: String,
    pub value: f64,
    pub scheme: String,
    pub runs: usize,
    pub failed: usize,
    pub mean_min_rate_nats: f64,
    pub std_min_rate_nats: f64,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn run_cell(spec: &ExperimentSpec, cell: Cell, settings: &RunSettings) -> SweepRow {
    let outcome = spec.cell_config(cell.value, cell.scheme).and_then(|(cfg, eps)| match spec.mode {
        Mode::Static => run_static(&cfg, cell.seed, eps, settings).map(|r| r.summary),
        Mode::Mobile => run_mobile(&cfg, cell.seed, eps, settings).map(|r| r.summary),
    });
    let base = SweepRow {
        axis: spec.axis.name.name().to_string(),
        value: cell.value,
        scheme: cell.scheme.name().to_string(),
        seed: cell.seed,
        min_rate_nats: f64::NAN,
        tau_nats: f64::NAN,
        iterations: 0,
        termination: String::new(),
        residual: f64::NAN,
        error: String::new(),
    };
    match outcome {
        Ok(s) => SweepRow {
            min_rate_nats: s.min_rate_nats,
            tau_nats: s.tau_nats,
            iterations: s.iterations,
            termination: format!("{:?}", s.termination).to_lowercase(),
            residual: s.residual,
            ..base
        },
        Err(e) => SweepRow {
            error: e.to_string(),
            ..base
        },
    }
}

pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

/// Runs every cell on at most `jobs` threads; row order is the cell order
/// whatever the thread count. Cells of one seed share channel draws across
/// schemes and axis values.
pub fn sweep(spec: &ExperimentSpec, jobs: usize, settings: &RunSettings) -> Result<SweepResult> {
    spec.validate()?;
    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Spec(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| cells.par_iter().map(|&c| run_cell(spec, c, settings)).collect());
    let mut summary = Vec::new();
    for &value in &spec.axis.values {
        for &scheme in &spec.schemes {
            let group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.value == value && r.scheme == scheme.name())
                .collect();
            let ok: Vec<f64> = group.iter().filter(|r| r.error.is_empty()).map(|r| r.min_rate_nats).collect();
            let (mean, std) = mean_std(&ok);
            summary.push(SummaryRow {
                axis: spec.axis.name.name().to_string(),
                value,
                scheme: scheme.name().to_string(),
                runs: group.len(),
                failed: group.len() - ok.len(),
                mean_min_rate_nats: mean,
                std_min_rate_nats: std,
            });
        }
    }
    Ok(SweepResult { rows, summary })
}

fn rows_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

/// `results.csv` (one row per cell) and `summary.csv` (mean and std per
/// axis value and scheme).
pub fn write_sweep(dir: &Path, res: &SweepResult) -> Result<()> {
    ensure_dir(dir)?;
    write_atomic(&dir.join("results.csv"), &rows_csv(&res.rows)?)?;
    write_atomic(&dir.join("summary.csv"), &rows_csv(&res.summary)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

pub fn run_verify(suites: &[Suite], sizes: &VerifySizes, seed: u64) -> VerifyReport {
    let suites: Vec<SuiteReport> = suites.iter().map(|&s| verify::run_suite(s, sizes, seed)).collect();
    VerifyReport {
        passed: suites.iter().all(SuiteReport::passed),
        suites,
    }
}

/// Which outputs a gnuplot script should draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Static,
    Mobile,
    Sweep,
}

/// A gnuplot script reading the CSVs written next to it.
pub fn gnuplot_script(kind: PlotKind, schemes: &[Scheme]) -> String {
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\nset grid\n");
    match kind {
        PlotKind::Static | PlotKind::Mobile => {
            s.push_str("set xlabel 'iteration'\nset ylabel 'min rate (nats/s/Hz)'\n");
            s.push_str("plot 'trace.csv' using 1:2 with linespoints title 'tau'\n");
            if kind == PlotKind::Mobile {
                s.push_str("pause -1\nset xlabel 'x (m)'\nset ylabel 'y (m)'\nset size ratio -1\n");
                s.push_str("plot 'trajectory.csv' using 2:3 with linespoints title 'UAV'\n");
            }
        }
        PlotKind::Sweep => {
            s.push_str("set ylabel 'mean min rate (nats/s/Hz)'\n");
            let parts: Vec<String> = schemes
                .iter()
                .map(|sc| {
                    format!(
                        "'summary.csv' using (strcol(3) eq '{0}' ? $2 : 1/0):6 with linespoints title '{0}'",
                        sc.name()
                    )
                })
                .collect();
            s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seeds: Vec<u64>) -> ExperimentSpec {
        ExperimentSpec {
            base: SystemConfig::desk(),
            axis: SweepAxis {
                name: AxisName::PtMaxDbm,
                values: vec![20.0],
            },
            schemes: vec![Scheme::NoRis, Scheme::Passive, Scheme::Hybrid],
            seeds,
            mode: Mode::Static,
        }
    }

    #[test]
    fn empty_seeds_rejected() {
        assert!(matches!(spec(vec![]).validate(), Err(HarnessError::Spec(_))));
    }

    #[test]
    fn cell_count() {
        assert_eq!(spec(vec![1, 2]).cells().len(), 6);
    }

    #[test]
    fn aggregation() {
        let (m, _) = mean_std(&[0.2, 0.4]);
        assert!((m - 0.3).abs() < 1e-15);
    }

    #[test]
    fn schemes_reshape_the_panel() {
        let base = SystemConfig::desk();
        assert_eq!(Scheme::NoRis.apply(&base).num_elements(), 0);
        assert_eq!(Scheme::Passive.apply(&base).num_active_elements(), 0);
        assert_eq!(Scheme::Hybrid.apply(&base), base);
    }

    #[test]
    fn element_axis_layout() {
        let s = ExperimentSpec {
            axis: SweepAxis {
                name: AxisName::RisElements,
                values: vec![8.0],
            },
            ..spec(vec![1])
        };
        let (cfg, _) = s.cell_config(8.0, Scheme::Hybrid).unwrap();
        assert_eq!((cfg.ris_nx, cfg.ris_ny), (2, 4));
        let (cfg, _) = s.cell_config(6.0, Scheme::Hybrid).unwrap();
        assert_eq!((cfg.ris_nx, cfg.ris_ny), (6, 1));
        assert!(s.cell_config(2.5, Scheme::Hybrid).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = spec(vec![3]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(ExperimentSpec::from_json(&text).unwrap(), s);
        let bad = text.replace("\"seeds\":[3]", "\"seeds\":[]");
        assert!(ExperimentSpec::from_json(&bad).is_err());
    }
}
