//! Thresholds chosen by simulation instead of the analytic recursion.
//! With the shelter's own caps nothing needs holding back at 270 beds, so a
//! stricter abandonment cap on groups A-E is shown as well.
//!
//! cargo run --release --example calibrate_thresholds

use shelterq::desim::ScenarioConfig;
use shelterq::erlang::SystemParams;
use shelterq::staffing::QosTargets;
use shelterq::thresholds::{calibrate_thresholds_by_simulation, CalibrationCaps};

fn main() -> shelterq::Result<()> {
    let params = SystemParams::new(4.44, 0.016, 0.5)?;
    let config = ScenarioConfig::shelter(params, 270);
    let qos = QosTargets::shelter_baseline();

    let caps = [
        ("wait caps", CalibrationCaps::wait_caps(&qos)),
        ("abandonment caps", CalibrationCaps::abandon_caps(&qos)),
        ("abandonment <= 1% for A-E", CalibrationCaps::Abandonment(vec![0.01; 5])),
    ];
    for (name, cap) in caps {
        let out = calibrate_thresholds_by_simulation(&config, &cap, 100, 50, 5)?;
        let achieved: Vec<String> = out.achieved.iter().map(|v| format!("{v:.4}")).collect();
        println!("{name}: K = {:?} after {} evaluations", out.policy.thresholds(), out.steps.len());
        println!("    achieved [{}]", achieved.join(", "));
    }
    Ok(())
}
