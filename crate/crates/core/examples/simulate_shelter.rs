//! One year of the shelter, from empty: today's 164 beds against 270 beds,
//! with and without 25 beds held back from group F.
//!
//! cargo run --release --example simulate_shelter

use shelterq::desim::ScenarioConfig;
use shelterq::erlang::SystemParams;
use shelterq::experiments::{comparison_table, compare_scenarios, NamedScenario};
use shelterq::thresholds::ThresholdPolicy;

fn main() -> shelterq::Result<()> {
    let params = SystemParams::new(4.44, 0.016, 0.5)?;
    let scenarios = [
        NamedScenario::new("current", ScenarioConfig::shelter(params, 164)),
        NamedScenario::new("expanded", ScenarioConfig::shelter(params, 270)),
        NamedScenario::new(
            "base",
            ScenarioConfig::shelter(params, 270).with_policy(ThresholdPolicy::lowest_class_only(6, 25)),
        ),
    ];
    let results = compare_scenarios(&scenarios, 100, 2024)?;
    print!("{}", comparison_table(&results));
    Ok(())
}
