//! Steady-state metrics of the shelter as a single M/M/N+M queue, and the
//! incomplete-gamma closed form checked against the birth-death solution.
//!
//! cargo run --example erlang_a_metrics

use shelterq::erlang::{erlang_a_metrics, p_ab_given_wait_closed_form, SystemParams};

fn main() -> shelterq::Result<()> {
    let params = SystemParams::new(4.44, 0.016, 0.5)?;
    println!("offered load R = {:.2} beds", params.offered_load());
    println!("{:>5} {:>9} {:>9} {:>11} {:>10}", "beds", "P(W>0)", "P(Ab)", "E[W] days", "occupancy");
    for beds in [164, 250, 270, 278, 298] {
        let m = erlang_a_metrics(beds, &params)?;
        println!(
            "{:>5} {:>9.4} {:>9.4} {:>11.4} {:>10.4}",
            beds, m.p_wait, m.p_ab, m.mean_wait, m.occupancy
        );
    }

    let m = erlang_a_metrics(270, &params)?;
    let closed = p_ab_given_wait_closed_form(270, &params)?;
    println!(
        "\nP(Ab | W>0) at 270 beds: chain {:.12}, closed form {:.12}",
        m.p_ab_given_wait, closed
    );

    // one server, all rates 1: P(Ab) = 1/e
    let unit = erlang_a_metrics(1, &SystemParams::new(1.0, 1.0, 1.0)?)?;
    println!("M/M/1+M with unit rates: P(Ab) = {:.12} (1/e = {:.12})", unit.p_ab, (-1.0f64).exp());
    Ok(())
}
