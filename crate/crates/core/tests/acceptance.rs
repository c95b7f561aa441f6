//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. A
//! failing criterion fails the process unless it is listed in `KNOWN_RED`,
//! which is reserved for criteria documented as not met in the README.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hybrid_ris_uav::config::SystemConfig;
use hybrid_ris_uav::harness::{self, AxisName, ExperimentSpec, Mode, RunSettings, Scheme, SweepAxis};
use hybrid_ris_uav::oracle::BoundTable;
use hybrid_ris_uav::trace::{IterationTrace, Termination};
use hybrid_ris_uav::verify::{self, SuiteReport};

/// Criterion ids that are known not to hold; see the README.
const KNOWN_RED: &[u32] = &[9];

struct Verdict {
    id: u32,
    passed: bool,
    detail: String,
}

fn verdict(id: u32, passed: bool, detail: String) -> Verdict {
    Verdict { id, passed, detail }
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn suite_detail(r: &SuiteReport) -> String {
    r.checks
        .iter()
        .map(|c| format!("{}={:.3e}", c.name, c.value))
        .collect::<Vec<_>>()
        .join(" ")
}

fn bounds() -> Verdict {
    let start = Instant::now();
    let r = verify::bounds_suite(BoundTable::default(), 10_000, 1);
    let took = start.elapsed();
    let worst = |suffix: &str, pick: fn(f64, f64) -> f64, init: f64| {
        r.checks
            .iter()
            .filter(|c| c.name.ends_with(suffix))
            .map(|c| c.value)
            .fold(init, pick)
    };
    verdict(
        1,
        r.passed() && took < Duration::from_secs(10),
        format!(
            "6 families x 10^4 pairs, worst slack {:.2e}, tangency {:.2e}, gradient {:.2e}, {}",
            worst("majorization", f64::min, f64::INFINITY),
            worst("tangency", f64::max, 0.0),
            worst("gradient", f64::max, 0.0),
            secs(took)
        ),
    )
}

struct Runs {
    traces: Vec<IterationTrace>,
    residuals: Vec<f64>,
}

fn desk_runs() -> (Runs, Runs, Duration) {
    let cfg = SystemConfig::desk();
    let settings = RunSettings::default();
    let start = Instant::now();
    let mut st = Runs {
        traces: vec![],
        residuals: vec![],
    };
    let mut mo = Runs {
        traces: vec![],
        residuals: vec![],
    };
    for seed in 1..=20 {
        let r = harness::run_static(&cfg, seed, 0.0, &settings).expect("static run");
        st.residuals.push(r.summary.residual);
        st.traces.push(r.trace);
        let r = harness::run_mobile(&cfg, seed, 0.0, &settings).expect("mobile run");
        mo.residuals.push(r.summary.residual);
        mo.traces.push(r.trace);
    }
    (st, mo, start.elapsed())
}

fn monotone(st: &Runs, mo: &Runs, took: Duration) -> Verdict {
    let ok = |r: &Runs| {
        r.traces
            .iter()
            .all(|t| t.is_monotone(1e-6) && t.iterations() <= 50 && t.termination == Termination::Converged)
    };
    let worst = |r: &Runs| r.traces.iter().map(IterationTrace::worst_decrease).fold(0.0, f64::min);
    let most = |r: &Runs| r.traces.iter().map(IterationTrace::iterations).max().unwrap_or(0);
    verdict(
        2,
        ok(st) && ok(mo) && took < Duration::from_secs(600),
        format!(
            "desk, 20 seeds each: static worst step {:.1e}, max {} iterations; mobile worst step {:.1e}, max {} iterations; {}",
            worst(st),
            most(st),
            worst(mo),
            most(mo),
            secs(took)
        ),
    )
}

fn speed() -> (Verdict, Vec<f64>) {
    let cfg = SystemConfig::full();
    let settings = RunSettings::default();
    let start = Instant::now();
    let s = harness::run_static(&cfg, cfg.seed, 0.0, &settings).expect("static run");
    let m = harness::run_mobile(&cfg, cfg.seed, 0.0, &settings).expect("mobile run");
    let took = start.elapsed();
    let last_step = |t: &IterationTrace| {
        let n = t.taus.len();
        t.taus[n - 1] - t.taus[n - 2]
    };
    let passed = s.summary.termination == Termination::Converged
        && s.summary.iterations <= 20
        && m.summary.termination == Termination::Converged
        && m.summary.iterations <= 15
        && took < Duration::from_secs(900);
    (
        verdict(
            3,
            passed,
            format!(
                "K=4 N=32 T=50 seed {}: static {} iterations (last gain {:.1e}), mobile {} iterations (last gain {:.1e}); {}",
                cfg.seed,
                s.summary.iterations,
                last_step(&s.trace),
                m.summary.iterations,
                last_step(&m.trace),
                secs(took)
            ),
        ),
        vec![s.summary.residual, m.summary.residual],
    )
}

fn closed_forms() -> Verdict {
    let start = Instant::now();
    let phase = verify::phase_closed_form_suite(50, 360, 1);
    let power = verify::power_closed_form_suite(50, 10_000, 1);
    let took = start.elapsed();
    verdict(
        4,
        phase.passed() && power.passed() && took < Duration::from_secs(300),
        format!("50 slots each: {} {}; {}", suite_detail(&phase), suite_detail(&power), secs(took)),
    )
}

fn tiny_ris() -> Verdict {
    let start = Instant::now();
    let r = verify::tiny_ris_suite(20, 360, 1);
    let took = start.elapsed();
    verdict(
        5,
        r.passed() && took < Duration::from_secs(300),
        format!("20 seeds, 360^2 grid: worst {}; {}", suite_detail(&r), secs(took)),
    )
}

fn feasibility(st: &Runs, mo: &Runs, fig: &[f64]) -> Verdict {
    let all: Vec<f64> = st.residuals.iter().chain(&mo.residuals).chain(fig).copied().collect();
    let worst = all.iter().copied().fold(0.0, f64::max);
    verdict(
        6,
        worst <= 1e-6,
        format!("{} returned solutions, worst relative residual {:.2e}", all.len(), worst),
    )
}

fn mean_of(res: &harness::SweepResult, value: f64, scheme: Scheme) -> f64 {
    res.summary
        .iter()
        .find(|r| r.value == value && r.scheme == scheme.name())
        .map(|r| r.mean_min_rate_nats)
        .unwrap_or(f64::NAN)
}

fn schemes() -> Verdict {
    let spec = ExperimentSpec {
        base: SystemConfig::desk(),
        axis: SweepAxis {
            name: AxisName::PtMaxDbm,
            values: vec![20.0],
        },
        schemes: vec![Scheme::NoRis, Scheme::Passive, Scheme::Hybrid],
        seeds: (1..=10).collect(),
        mode: Mode::Mobile,
    };
    let start = Instant::now();
    let res = harness::sweep(&spec, 4, &RunSettings::default()).expect("sweep");
    let took = start.elapsed();
    let (n, p, h) = (
        mean_of(&res, 20.0, Scheme::NoRis),
        mean_of(&res, 20.0, Scheme::Passive),
        mean_of(&res, 20.0, Scheme::Hybrid),
    );
    let gain = h / n - 1.0;
    verdict(
        7,
        h > p && p > n && gain >= 0.25 && took < Duration::from_secs(1800),
        format!(
            "desk mobile, 10 seeds: hybrid {h:.4} > passive {p:.4} > noRis {n:.4}, hybrid gain {:.1}%; {}",
            100.0 * gain,
            secs(took)
        ),
    )
}

fn mobile_vs_static() -> Verdict {
    let cfg = SystemConfig::full();
    let settings = RunSettings::default();
    let start = Instant::now();
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 1..=10 {
        let s = harness::run_static(&cfg, seed, 0.0, &settings).expect("static run");
        let m = harness::run_mobile(&cfg, seed, 0.0, &settings).expect("mobile run");
        if m.summary.min_rate_nats > s.summary.min_rate_nats {
            wins += 1;
        }
        pairs.push(format!("{:.2}/{:.2}", m.summary.min_rate_nats, s.summary.min_rate_nats));
    }
    verdict(
        8,
        wins >= 9,
        format!(
            "full K=4 N=32 T=50 configuration, mobile beats static on {wins}/10 seeds (mobile/static: {}); {}",
            pairs.join(" "),
            secs(start.elapsed())
        ),
    )
}

fn csi() -> Verdict {
    let spec = ExperimentSpec {
        base: SystemConfig::desk(),
        axis: SweepAxis {
            name: AxisName::CsiEpsilon,
            values: vec![0.0, 0.1, 0.4],
        },
        schemes: vec![Scheme::Passive, Scheme::Hybrid],
        seeds: (1..=5).collect(),
        mode: Mode::Mobile,
    };
    let start = Instant::now();
    let res = harness::sweep(&spec, 4, &RunSettings::default()).expect("sweep");
    let took = start.elapsed();
    let h: Vec<f64> = [0.0, 0.1, 0.4].iter().map(|&e| mean_of(&res, e, Scheme::Hybrid)).collect();
    let p: Vec<f64> = [0.0, 0.1, 0.4].iter().map(|&e| mean_of(&res, e, Scheme::Passive)).collect();
    let nonincreasing = h.windows(2).all(|w| w[1] <= w[0]);
    let robust = h[2] > p[0];
    verdict(
        9,
        nonincreasing && robust && took < Duration::from_secs(1200),
        format!(
            "desk mobile, 5 seeds: hybrid {:.4} / {:.4} / {:.4} at eps 0 / 0.1 / 0.4 ({}), passive {:.4} / {:.4} / {:.4}; hybrid@0.4 {} passive@0; {}",
            h[0],
            h[1],
            h[2],
            if nonincreasing { "nonincreasing" } else { "not monotone" },
            p[0],
            p[1],
            p[2],
            if robust { ">" } else { "<=" },
            secs(took)
        ),
    )
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("dir entry");
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("file"))
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().expect("tempdir");
    let cfg_path = tmp.path().join("desk.json");
    std::fs::write(&cfg_path, SystemConfig::desk().to_json()).expect("write config");
    let spec_path = tmp.path().join("sweep.json");
    let spec = ExperimentSpec {
        base: SystemConfig::desk(),
        axis: SweepAxis {
            name: AxisName::PrisMaxDbm,
            values: vec![-10.0, 0.0],
        },
        schemes: vec![Scheme::Passive, Scheme::Hybrid],
        seeds: vec![1, 2],
        mode: Mode::Mobile,
    };
    std::fs::write(&spec_path, serde_json::to_string(&spec).expect("spec json")).expect("write spec");

    let bin = env!("CARGO_BIN_EXE_hris");
    let run = |args: &[&str]| {
        let ok = Command::new(bin).args(args).output().expect("run hris").status.success();
        assert!(ok, "hris {args:?} failed");
    };
    let dirs: Vec<_> = (0..2).map(|i| tmp.path().join(format!("run{i}"))).collect();
    let mut same = true;
    let mut files = 0;
    for (sub, extra) in [("static", "run-static"), ("mobile", "run-mobile")] {
        for d in &dirs {
            let out = d.join(sub);
            run(&[extra, "--config", cfg_path.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()]);
        }
        let (a, b) = (read_all(&dirs[0].join(sub)), read_all(&dirs[1].join(sub)));
        files += a.len();
        same &= a == b;
    }
    for (d, jobs) in dirs.iter().zip(["1", "3"]) {
        let out = d.join("sweep");
        run(&["sweep", "--config", spec_path.to_str().unwrap(), "--jobs", jobs, "--out", out.to_str().unwrap()]);
    }
    let (a, b) = (read_all(&dirs[0].join("sweep")), read_all(&dirs[1].join("sweep")));
    files += a.len();
    same &= a == b;
    verdict(
        10,
        same,
        format!("{files} artifacts from run-static, run-mobile and sweep (1 vs 3 jobs) compared byte for byte"),
    )
}

fn main() {
    let mut verdicts = vec![bounds()];
    let (st, mo, took) = desk_runs();
    verdicts.push(monotone(&st, &mo, took));
    let (v3, fig) = speed();
    verdicts.push(v3);
    verdicts.push(closed_forms());
    verdicts.push(tiny_ris());
    verdicts.push(feasibility(&st, &mo, &fig));
    verdicts.push(schemes());
    verdicts.push(mobile_vs_static());
    verdicts.push(csi());
    verdicts.push(determinism());

    let mut unexpected = 0;
    for v in &verdicts {
        let known = KNOWN_RED.contains(&v.id);
        let tag = match (v.passed, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known, see README)",
            (false, false) => "FAIL",
        };
        println!("{tag} criterion {}: {}", v.id, v.detail);
        if !v.passed && !known {
            unexpected += 1;
        }
        if v.passed && known {
            println!("note: criterion {} is listed as known red but passed", v.id);
        }
    }
    let passed = verdicts.iter().filter(|v| v.passed).count();
    println!("acceptance: {passed}/{} criteria pass", verdicts.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
