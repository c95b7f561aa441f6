//! Runs every verification suite at full size and prints the measured values.

use hybrid_ris_uav::verify::{self, Suite, VerifySizes};

fn main() {
    let sizes = VerifySizes::default();
    let mut ok = true;
    for suite in Suite::ALL {
        let r = verify::run_suite(suite, &sizes, 1);
        for c in &r.checks {
            println!(
                "{:<18} {:<30} {:>12.4e} (limit {:.1e}) {}",
                suite.name(),
                c.name,
                c.value,
                c.threshold,
                if c.passed { "ok" } else { "FAILED" }
            );
        }
        ok &= r.passed();
    }
    std::process::exit(if ok { 0 } else { 1 });
}
