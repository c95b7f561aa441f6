//! Flying-UAV design next to the hovering design on the same scenario.
//!
//! Usage: `mobile_uav [seed] [full|desk]`

use std::time::Instant;

use hybrid_ris_uav::channel::{area_center, ChannelSet};
use hybrid_ris_uav::config::SystemConfig;
use hybrid_ris_uav::mobile_opt::{self, MobileOptions};
use hybrid_ris_uav::static_opt::{self, StaticOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = match args.next().as_deref() {
        Some("desk") => SystemConfig::desk(),
        _ => SystemConfig::full(),
    };

    let start = Instant::now();
    let track = mobile_opt::initial_track(&cfg, seed);
    let ch = ChannelSet::sample(&cfg, &track, seed).expect("channels");
    let (st, trace) = mobile_opt::optimize(&cfg, &ch, seed, &MobileOptions::from_config(&cfg)).expect("mobile");
    for row in trace.rows.iter().filter(|r| r.status.to_string() != "accepted") {
        println!("{:>3} {:<14} {:<22} tau={:.6}", row.iteration, row.block.to_string(), row.status.to_string(), row.tau_nats);
    }
    println!("taus: {:?}", trace.taus.iter().map(|t| (t * 1e4).round() / 1e4).collect::<Vec<_>>());
    println!(
        "mobile: {:?} after {} iterations, relaxed {:.4}, rounded {:.4} nats/s/Hz ({:.1} s)",
        trace.termination,
        trace.iterations(),
        trace.taus.last().unwrap(),
        st.rounded_tau(&cfg, &ch),
        start.elapsed().as_secs_f64()
    );
    println!("schedule: {:?}", st.scheduled_ues());

    let sch = ChannelSet::sample(&cfg, &[area_center(&cfg)], seed).expect("channels");
    let (s, strace) = static_opt::optimize(&cfg, &sch, seed, &StaticOptions::from_config(&cfg));
    println!("static: {} iterations, min rate {:.4} nats/s/Hz", strace.iterations(), s.tau);
}
