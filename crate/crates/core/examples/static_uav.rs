//! Hovering-UAV design on the convergence-figure scenario.

use hybrid_ris_uav::channel::{area_center, ChannelSet};
use hybrid_ris_uav::config::SystemConfig;
use hybrid_ris_uav::static_opt::{self, StaticOptions};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = SystemConfig::full();
    let ch = ChannelSet::sample(&cfg, &[area_center(&cfg)], seed).expect("channels");
    let (st, trace) = static_opt::optimize(&cfg, &ch, seed, &StaticOptions::from_config(&cfg));
    for row in &trace.rows {
        println!("{:>3} {:<12} {:<10} tau={:.6}", row.iteration, row.block.to_string(), row.status.to_string(), row.tau_nats);
    }
    println!("termination: {:?} after {} iterations", trace.termination, trace.iterations());
    println!("UAV at ({:.1}, {:.1}) m, min rate {:.4} nats/s/Hz", st.v.x, st.v.y, st.tau);
    println!("per-UE rates: {:?}", st.rates(&cfg, &ch));
}
