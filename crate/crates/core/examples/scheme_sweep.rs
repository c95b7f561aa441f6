//! noRis / passive / hybrid comparison over UAV power, flying UAV.

use hybrid_ris_uav::config::SystemConfig;
use hybrid_ris_uav::harness::{self, AxisName, ExperimentSpec, Mode, RunSettings, Scheme, SweepAxis};

fn main() {
    let spec = ExperimentSpec {
        base: SystemConfig::desk(),
        axis: SweepAxis {
            name: AxisName::PtMaxDbm,
            values: vec![10.0, 20.0, 30.0],
        },
        schemes: vec![Scheme::NoRis, Scheme::Passive, Scheme::Hybrid],
        seeds: vec![1, 2, 3],
        mode: Mode::Mobile,
    };
    let res = harness::sweep(&spec, 4, &RunSettings::default()).expect("sweep");
    println!("{:>8} {:>8} {:>10} {:>8}", "ptMax", "scheme", "mean", "std");
    for r in &res.summary {
        println!(
            "{:>8} {:>8} {:>10.4} {:>8.4}",
            r.value, r.scheme, r.mean_min_rate_nats, r.std_min_rate_nats
        );
    }
}
