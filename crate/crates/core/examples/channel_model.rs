//! Samples a scenario and prints link budgets and a few rates.

use hybrid_ris_uav::channel::{area_center, ChannelSet};
use hybrid_ris_uav::config::SystemConfig;
use hybrid_ris_uav::evaluation::{self, Beamformers, RisProfile};
use hybrid_ris_uav::static_opt::matched;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = SystemConfig::desk();
    let v = area_center(&cfg);
    let ch = ChannelSet::sample(&cfg, &[v], seed).expect("channels");

    println!("UAV at ({:.0}, {:.0}, {:.0}) m, RIS at {:?}", v.x, v.y, v.z, ch.ris_position);
    println!("UAV-RIS large-scale gain {:.3e}", ch.beta1(&v));
    for k in 0..ch.num_ues() {
        let u = ch.ue_positions[k];
        println!(
            "UE {k} at ({:.1}, {:.1}): direct {:.3e}, RIS-UE {:.3e}",
            u.x,
            u.y,
            ch.beta0(k, &v),
            ch.beta2(k)
        );
    }

    // full power on UE 0, RIS switched off versus random unit phases
    let w = Beamformers(vec![
        matched(&ch.h0(0, 0, &v)).into_iter().map(|x| x * cfg.pt_max_w().sqrt()).collect(),
        vec![Default::default(); cfg.num_antennas],
    ]);
    let off = RisProfile::zeros(&cfg);
    let on = RisProfile::new(
        hybrid_ris_uav::static_opt::random_phases(&cfg, seed),
        vec![false; cfg.num_elements()],
        cfg.a_max_lin(),
    );
    for (name, ris) in [("no RIS", &off), ("random passive RIS", &on)] {
        let r = evaluation::rate_static(&cfg, &ch, &v, &w, ris, 0);
        println!("UE 0 rate with {name}: {r:.4} nats/s/Hz");
    }
}
