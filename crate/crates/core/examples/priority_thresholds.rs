//! Analytic entry thresholds for the six groups at several bed counts.
//! At the baseline load the lowest group's cumulative load exceeds 1, so
//! the recursion clamps it and flags the result.
//!
//! cargo run --example priority_thresholds

use shelterq::erlang::{erlang_a_metrics, SystemParams};
use shelterq::population::{class_arrival_rates, AttributeModel};
use shelterq::staffing::QosTargets;
use shelterq::thresholds::{
    cumulative_loads, thresholds_for_abandon_caps, thresholds_for_wait_caps, AbandonCap, DegeneracyHandling,
};

fn main() -> shelterq::Result<()> {
    let params = SystemParams::new(4.44, 0.016, 0.5)?;
    let mix = class_arrival_rates(params.lambda, &AttributeModel::default());
    let qos = QosTargets::shelter_baseline();
    let abandon: Vec<AbandonCap> = qos.per_class_abandon_caps.iter().map(|&a| AbandonCap::unit_horizon(a)).collect();

    for beds in [250, 270, 298, 320] {
        let loads = cumulative_loads(&mix.rates, beds, params.mu)?;
        let p_wait = erlang_a_metrics(beds, &params)?.p_wait;
        let wait = thresholds_for_wait_caps(&loads, &qos.per_class_wait_caps, p_wait, DegeneracyHandling::Clamp)?;
        let ab = thresholds_for_abandon_caps(&loads, &abandon, params.theta, p_wait, DegeneracyHandling::Clamp)?;
        println!(
            "N = {beds}: sigma_F = {:.3}, wait caps K = {:?}, abandon caps K = {:?}{}",
            loads.sigma[5],
            wait.policy.thresholds(),
            ab.policy.thresholds(),
            if wait.analytically_degenerate { "  [analytically-degenerate]" } else { "" }
        );
        let p: Vec<String> = wait.profile.p_wait_by_class.iter().map(|p| format!("{p:.4}")).collect();
        println!("          P(W_j > 0) = [{}]", p.join(", "));
    }

    // without the clamp the degenerate boundary is an error
    let loads = cumulative_loads(&mix.rates, 270, params.mu)?;
    let p_wait = erlang_a_metrics(270, &params)?.p_wait;
    match thresholds_for_wait_caps(&loads, &qos.per_class_wait_caps, p_wait, DegeneracyHandling::Fail) {
        Ok(_) => println!("unexpected: no degeneracy"),
        Err(e) => println!("strict mode: {e}"),
    }
    Ok(())
}
