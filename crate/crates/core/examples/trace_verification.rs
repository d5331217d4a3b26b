//! Record every event of one replication, check the admission rule on the
//! trace, then show the checker catching a trace whose header lies.
//!
//! cargo run --release --example trace_verification

use shelterq::desim::{run_replication_traced, verify_threshold_trace, ScenarioConfig, Trace};
use shelterq::erlang::SystemParams;
use shelterq::thresholds::ThresholdPolicy;

fn main() -> shelterq::Result<()> {
    let params = SystemParams::new(4.44, 0.016, 0.5)?;
    let config = ScenarioConfig::shelter(params, 270).with_policy(ThresholdPolicy::lowest_class_only(6, 25));
    let (metrics, trace) = run_replication_traced(&config, 11)?;
    println!("{} events, {} arrivals, {} abandoned", trace.records.len(), metrics.aggregate.arrivals, metrics.aggregate.abandoned);
    verify_threshold_trace(&trace)?;
    println!("admission rule holds on every event");

    let text = trace.to_text();
    println!("\nfirst lines of the trace file:");
    for line in text.lines().take(8) {
        println!("  {line}");
    }
    assert_eq!(Trace::parse(&text)?, trace);

    // claim the run used a much larger hold-back than it did: the group-F
    // admissions made with fewer idle beds now break the rule
    let mut bad = trace.clone();
    *bad.header.thresholds.last_mut().unwrap() = 200;
    match verify_threshold_trace(&bad) {
        Ok(()) => println!("\nno group-F admission below 200 idle beds"),
        Err(e) => println!("\ntampered trace rejected: {e}"),
    }
    Ok(())
}
