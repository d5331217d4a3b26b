//! Bed counts from the regime rules next to the exact minimum found by
//! searching the Erlang-A model.
//!
//! cargo run --example staffing_regimes

use shelterq::erlang::SystemParams;
use shelterq::staffing::{min_beds_for_abandonment, min_beds_for_wait, staff_ed, staff_qd, staff_qed};

fn main() -> shelterq::Result<()> {
    for mu in [0.016, 1.0 / 60.0] {
        let params = SystemParams::new(4.44, mu, 0.5)?;
        println!("mu = {mu:.5} (R = {:.1})", params.offered_load());
        let qd = staff_qd(&params, 0.04)?;
        let ed = staff_ed(&params, 0.04)?;
        let qed = staff_qed(0.04, &params)?;
        println!("  QD  N = {}", qd.beds);
        println!("  ED  N = {}", ed.beds);
        println!("  QED N = {} (beta* = {:.5})", qed.beds, qed.beta_star.unwrap_or(f64::NAN));

        let exact = min_beds_for_abandonment(&params, 0.04)?;
        let cert = exact.certificate.expect("exact searches carry a certificate");
        print!("  exact P(Ab) <= 0.04: N = {} with P(Ab) = {:.5}", exact.beds, cert.at_beds.p_ab);
        if let Some(fewer) = cert.one_fewer {
            print!(", N-1 gives {:.5}", fewer.p_ab);
        }
        println!();

        let wait = min_beds_for_wait(&params, 1.0)?;
        println!("  exact E[W] <= 1 day: N = {}", wait.beds);
    }
    Ok(())
}
