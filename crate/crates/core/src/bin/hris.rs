use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hybrid_ris_uav::config::SystemConfig;
use hybrid_ris_uav::conic::{SolveSettings, SolverMode};
use hybrid_ris_uav::harness::{
    self, ExperimentSpec, HarnessError, PlotKind, RunSettings, EXIT_BREAKDOWN, EXIT_INPUT, EXIT_OK,
    EXIT_VERIFY,
};
use hybrid_ris_uav::trace::Termination;
use hybrid_ris_uav::verify::{Suite, VerifySizes};

/// Hybrid active/passive RIS aided UAV downlink design.
#[derive(Parser)]
#[command(name = "hris", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hovering UAV: placement, beamforming and RIS design.
    RunStatic(RunArgs),
    /// Flying UAV: scheduling, trajectory, beamforming and RIS design.
    RunMobile(RunArgs),
    /// Seeded sweep over one axis and a set of schemes.
    Sweep(SweepArgs),
    /// Oracle checks of the bounds and closed forms.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "expcone")]
    solver_mode: SolverMode,
    /// Record wall-clock time per block in traces.
    #[arg(long)]
    timing: bool,
    /// Also write a gnuplot script next to the data.
    #[arg(long)]
    gnuplot_script: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the outer iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Overrides the convergence threshold (nats/s/Hz).
    #[arg(long)]
    eps: Option<f64>,
    /// Channel estimation error level.
    #[arg(long, default_value_t = 0.0)]
    csi_epsilon: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment JSON.
    #[arg(long)]
    config: PathBuf,
    /// Concurrent cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suites to run (repeatable); all by default.
    #[arg(long = "suite")]
    suites: Vec<Suite>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn settings(c: &Common) -> RunSettings {
    RunSettings {
        solve: SolveSettings {
            mode: c.solver_mode,
            ..SolveSettings::default()
        },
        timing: c.timing,
    }
}

fn overrides(cfg: &mut SystemConfig, max_iters: Option<usize>, eps: Option<f64>) -> Result<(), HarnessError> {
    if let Some(m) = max_iters {
        cfg.max_iters = m;
    }
    if let Some(e) = eps {
        cfg.eps_conv = e;
    }
    cfg.validate()?;
    Ok(())
}

fn gnuplot(dir: &Path, kind: PlotKind, spec: Option<&ExperimentSpec>) -> Result<(), HarnessError> {
    let schemes = spec.map(|s| s.schemes.clone()).unwrap_or_default();
    harness::write_atomic(&dir.join("plot.gp"), harness::gnuplot_script(kind, &schemes).as_bytes())
}

fn run(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::RunStatic(a) => {
            let mut cfg = harness::load_config(&a.config)?;
            overrides(&mut cfg, a.max_iters, a.eps)?;
            let seed = a.seed.unwrap_or(cfg.seed);
            let r = harness::run_static(&cfg, seed, a.csi_epsilon, &settings(&a.common))?;
            harness::write_static(&a.common.out, &r)?;
            if a.common.gnuplot_script {
                gnuplot(&a.common.out, PlotKind::Static, None)?;
            }
            println!("min rate {} nats/s/Hz after {} iterations", r.summary.min_rate_nats, r.summary.iterations);
            Ok(exit_for(r.summary.termination))
        }
        Command::RunMobile(a) => {
            let mut cfg = harness::load_config(&a.config)?;
            overrides(&mut cfg, a.max_iters, a.eps)?;
            let seed = a.seed.unwrap_or(cfg.seed);
            let r = harness::run_mobile(&cfg, seed, a.csi_epsilon, &settings(&a.common))?;
            harness::write_mobile(&a.common.out, &r)?;
            if a.common.gnuplot_script {
                gnuplot(&a.common.out, PlotKind::Mobile, None)?;
            }
            println!(
                "min rate {} nats/s/Hz (relaxed schedule {}) after {} iterations",
                r.summary.min_rate_nats, r.summary.tau_nats, r.summary.iterations
            );
            Ok(exit_for(r.summary.termination))
        }
        Command::Sweep(a) => {
            let mut spec = ExperimentSpec::load(&a.config)?;
            overrides(&mut spec.base, a.max_iters, a.eps)?;
            let res = harness::sweep(&spec, a.jobs, &settings(&a.common))?;
            harness::write_sweep(&a.common.out, &res)?;
            if a.common.gnuplot_script {
                gnuplot(&a.common.out, PlotKind::Sweep, Some(&spec))?;
            }
            let failed = res.rows.iter().filter(|r| !r.error.is_empty()).count();
            println!("{} cells, {} failed", res.rows.len(), failed);
            Ok(EXIT_OK)
        }
        Command::Verify(a) => {
            let suites = if a.suites.is_empty() { Suite::ALL.to_vec() } else { a.suites };
            let report = harness::run_verify(&suites, &VerifySizes::default(), a.seed);
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            print!("{text}");
            if let Some(path) = a.out {
                harness::write_atomic(&path, text.as_bytes())?;
            }
            Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY })
        }
    }
}

fn exit_for(t: Termination) -> i32 {
    if t == Termination::Breakdown {
        EXIT_BREAKDOWN
    } else {
        EXIT_OK
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
