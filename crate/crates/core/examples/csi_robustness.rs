//! Designs computed on noisy channel estimates, scored on the true channels.

use hybrid_ris_uav::config::SystemConfig;
use hybrid_ris_uav::harness::{self, RunSettings, Scheme};

fn main() {
    let seeds: Vec<u64> = (1..=5).collect();
    let base = SystemConfig::desk();
    for scheme in [Scheme::Passive, Scheme::Hybrid] {
        let cfg = scheme.apply(&base);
        for eps in [0.0, 0.1, 0.2, 0.4] {
            let rates: Vec<f64> = seeds
                .iter()
                .map(|&s| {
                    harness::run_mobile(&cfg, s, eps, &RunSettings::default())
                        .expect("run")
                        .summary
                        .min_rate_nats
                })
                .collect();
            let (mean, std) = harness::mean_std(&rates);
            println!("{:>8} eps={eps:<4} true min rate {mean:.4} +- {std:.4}", scheme.name());
        }
    }
}
