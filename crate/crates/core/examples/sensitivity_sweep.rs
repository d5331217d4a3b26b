//! One-parameter sweeps on common random numbers.
//!
//! cargo run --release --example sensitivity_sweep

use shelterq::desim::ScenarioConfig;
use shelterq::erlang::SystemParams;
use shelterq::experiments::{sweep, SweepParameter, SweepSpec};
use shelterq::thresholds::ThresholdPolicy;

fn main() -> shelterq::Result<()> {
    let params = SystemParams::new(4.44, 0.016, 0.5)?;
    let base = ScenarioConfig::shelter(params, 270).with_policy(ThresholdPolicy::lowest_class_only(6, 25));
    let grids = [
        (SweepParameter::Lambda, vec![3.55, 4.0, 4.44, 4.88, 5.33]),
        (SweepParameter::Mu, vec![0.014, 0.016, 0.018, 0.021]),
        (SweepParameter::Theta, vec![0.0, 0.33, 0.5, 1.0]),
    ];
    for (parameter, values) in grids {
        let spec = SweepSpec { parameter, values };
        println!("{:>8} {:>12} {:>12} {:>12}", parameter.name(), "abandon", "utilization", "wait (d)");
        for point in sweep(&base, &spec, 100, 99)? {
            let s = &point.replications.summary;
            println!(
                "{:>8} {:>11.2}% {:>11.2}% {:>12.3}",
                point.value,
                100.0 * s.mean("abandonment"),
                100.0 * s.mean("utilization"),
                s.mean("mean_wait")
            );
        }
        println!();
    }
    Ok(())
}
