use proptest::prelude::*;
use shelterq::desim::{run_replication, ScenarioConfig, StreamSeed};
use shelterq::erlang::SystemParams;
use shelterq::experiments::{
    compare_scenarios, comparison_table, run_replications, summary_document, sweep, write_replications_csv,
    write_summary_json, write_sweep_csv, NamedScenario, Stat, SweepParameter, SweepSpec, Z95,
};
use shelterq::thresholds::ThresholdPolicy;

fn base() -> ScenarioConfig {
    let p = SystemParams::new(4.44, 0.016, 0.5).unwrap();
    ScenarioConfig::shelter(p, 270).with_policy(ThresholdPolicy::lowest_class_only(6, 25))
}

#[test]
fn half_width_is_normal_interval() {
    let r = run_replications(&base(), 12, 4).unwrap();
    for s in &r.summary.stats {
        assert_eq!(s.stat.n, 12);
        assert!((s.stat.ci95 - Z95 * s.stat.sd / 12f64.sqrt()).abs() < 1e-12);
    }
    assert!(run_replications(&base(), 1, 4).is_err());
}

#[test]
fn ci_shrinks_as_root_n() {
    let ci = |n| run_replications(&base(), n, 11).unwrap().summary.get("abandonment").unwrap().ci95;
    let (a, b, c) = (ci(25), ci(100), ci(400));
    for ratio in [a / b, b / c] {
        assert!((ratio / 2.0 - 1.0).abs() <= 0.2, "ratio {ratio}");
    }
}

#[test]
fn prefix_property() {
    let small = run_replications(&base(), 10, 77).unwrap();
    let large = run_replications(&base(), 20, 77).unwrap();
    assert_eq!(small.runs[..], large.runs[..10]);
    let recomputed = shelterq::experiments::ReplicationSummary::of(&large.runs[..10], &large.labels);
    assert_eq!(recomputed, small.summary);
}

#[test]
fn sweep_seeds_ignore_grid_position() {
    let alone = SweepSpec { parameter: SweepParameter::Lambda, values: vec![5.0] };
    let among = SweepSpec { parameter: SweepParameter::Lambda, values: vec![4.0, 4.5, 5.0] };
    let a = sweep(&base(), &alone, 5, 3).unwrap();
    let b = sweep(&base(), &among, 5, 3).unwrap();
    assert_eq!(a[0].replications, b[2].replications);
    // and replication r of a point is the plain run keyed by (seed, r)
    let cfg = among.apply(&base(), 5.0);
    assert_eq!(b[2].replications.runs[4], run_replication(&cfg, StreamSeed::new(3, 4)).unwrap());
}

#[test]
fn identical_configs_give_identical_columns() {
    let s = [NamedScenario::new("x", base()), NamedScenario::new("y", base())];
    let r = compare_scenarios(&s, 6, 8).unwrap();
    assert_eq!(r[0].replications, r[1].replications);
    let table = comparison_table(&r);
    for line in table.lines().skip(1) {
        let cells: Vec<&str> = line.split("  ").map(str::trim).filter(|c| !c.is_empty()).collect();
        assert_eq!(cells[cells.len() - 1], cells[cells.len() - 2], "{line}");
    }
}

#[test]
fn output_files_carry_provenance() {
    let r = run_replications(&base(), 3, 9).unwrap();
    let prov = serde_json::json!({ "note": "test" });

    let mut csv = Vec::new();
    write_replications_csv(&mut csv, &[("base", &r)], 9, &prov).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("# base_seed=9\n# config="));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("scenario,replication,arrivals,served,abandoned,waiting_at_horizon,abandonment"));
    assert_eq!(text.lines().filter(|l| l.starts_with("base,")).count(), 3);

    let mut json = Vec::new();
    write_summary_json(&mut json, &summary_document(&[("base", &r)], 9, &prov)).unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(doc["base_seed"], 9);
    assert_eq!(doc["provenance"]["note"], "test");
    let row = &doc["rows"][0];
    for key in ["scenario", "metric", "mean", "sd", "ci95", "n"] {
        assert!(row.get(key).is_some(), "{key}");
    }

    let spec = SweepSpec { parameter: SweepParameter::Theta, values: vec![0.0, 1.0] };
    let points = sweep(&base(), &spec, 3, 9).unwrap();
    let mut out = Vec::new();
    write_sweep_csv(&mut out, &spec, &points, 9, &prov).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.lines().any(|l| l == "parameter,value,metric,mean,sd,ci95,n"));
    assert!(text.lines().any(|l| l.starts_with("theta,0,abandonment,0,")));
}

proptest! {
    #[test]
    fn stat_is_translation_equivariant(values in prop::collection::vec(-1e3f64..1e3, 2..50), shift in -1e3f64..1e3) {
        let a = Stat::of(&values);
        let moved: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let b = Stat::of(&moved);
        prop_assert!((b.mean - a.mean - shift).abs() < 1e-9);
        prop_assert!((b.sd - a.sd).abs() < 1e-7);
        prop_assert!((a.ci95 - Z95 * a.sd / (values.len() as f64).sqrt()).abs() < 1e-12);
    }
}
