//! File formats for replication results.
//!
//! Every file starts with its provenance: CSV files carry `#` comment lines
//! with the base seed and the resolved configuration as one-line JSON, and
//! the JSON summary embeds the same under `provenance`.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{class_metric_name, Replications, ScenarioResult, SweepPoint, SweepSpec, AGGREGATE_METRICS};
use crate::error::Result;

fn write_provenance<W: Write>(w: &mut W, base_seed: u64, provenance: &serde_json::Value) -> Result<()> {
    writeln!(w, "# base_seed={base_seed}")?;
    writeln!(w, "# config={}", serde_json::to_string(provenance)?)?;
    Ok(())
}

/// One row per replication:
/// `scenario,replication,arrivals,served,abandoned,waiting_at_horizon,abandonment,mean_wait,utilization,high_risk_abandoned`
/// followed by `abandoned[<label>]`, `abandonment[<label>]` and `mean_wait[<label>]` per class.
pub fn write_replications_csv<W: Write>(
    mut w: W,
    results: &[(&str, &Replications)],
    base_seed: u64,
    provenance: &serde_json::Value,
) -> Result<()> {
    write_provenance(&mut w, base_seed, provenance)?;
    let labels = results.first().map(|(_, r)| r.labels.clone()).unwrap_or_default();
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = [
        "scenario",
        "replication",
        "arrivals",
        "served",
        "abandoned",
        "waiting_at_horizon",
        "abandonment",
        "mean_wait",
        "utilization",
        "high_risk_abandoned",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for l in &labels {
        for m in ["abandoned", "abandonment", "mean_wait"] {
            header.push(class_metric_name(m, l));
        }
    }
    out.write_record(&header)?;
    for (name, reps) in results {
        for (r, m) in reps.runs.iter().enumerate() {
            let a = &m.aggregate;
            let mut row = vec![
                name.to_string(),
                r.to_string(),
                a.arrivals.to_string(),
                a.served.to_string(),
                a.abandoned.to_string(),
                a.waiting_at_horizon.to_string(),
                a.abandonment_proportion().to_string(),
                a.mean_wait().to_string(),
                m.mean_utilization.to_string(),
                m.high_risk_abandoned.to_string(),
            ];
            for c in &m.per_class {
                row.push(c.abandoned.to_string());
                row.push(c.abandonment_proportion().to_string());
                row.push(c.mean_wait().to_string());
            }
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub ci95: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub base_seed: u64,
    pub provenance: serde_json::Value,
    pub rows: Vec<SummaryRow>,
}

pub fn summary_document(
    results: &[(&str, &Replications)],
    base_seed: u64,
    provenance: &serde_json::Value,
) -> SummaryDocument {
    let rows = results
        .iter()
        .flat_map(|(name, reps)| {
            reps.summary.stats.iter().map(move |s| SummaryRow {
                scenario: name.to_string(),
                metric: s.metric.clone(),
                mean: s.stat.mean,
                sd: s.stat.sd,
                ci95: s.stat.ci95,
                n: s.stat.n,
            })
        })
        .collect();
    SummaryDocument { base_seed, provenance: provenance.clone(), rows }
}

pub fn write_summary_json<W: Write>(mut w: W, doc: &SummaryDocument) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, doc)?;
    writeln!(w)?;
    Ok(())
}

/// Plot-ready series: `parameter,value,metric,mean,sd,ci95,n`, covering the
/// aggregate metrics and the per-class abandonment and mean wait.
pub fn write_sweep_csv<W: Write>(
    mut w: W,
    spec: &SweepSpec,
    points: &[SweepPoint],
    base_seed: u64,
    provenance: &serde_json::Value,
) -> Result<()> {
    write_provenance(&mut w, base_seed, provenance)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["parameter", "value", "metric", "mean", "sd", "ci95", "n"])?;
    for p in points {
        let mut names: Vec<String> = AGGREGATE_METRICS.iter().map(|s| s.to_string()).collect();
        for l in &p.replications.labels {
            names.push(class_metric_name("abandonment", l));
            names.push(class_metric_name("mean_wait", l));
        }
        for name in names {
            let s = p.replications.summary.get(&name).expect("summarized metric");
            out.write_record([
                spec.parameter.name().to_string(),
                p.value.to_string(),
                name,
                s.mean.to_string(),
                s.sd.to_string(),
                s.ci95.to_string(),
                s.n.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Side-by-side comparison: one column per scenario, mean ± 95% half-width.
pub fn comparison_table(results: &[ScenarioResult]) -> String {
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    let pct = |m: f64, c: f64| format!("{:.2}% ± {:.2}", 100.0 * m, 100.0 * c);
    let num = |m: f64, c: f64| format!("{m:.1} ± {c:.1}");
    let days = |m: f64, c: f64| format!("{m:.3} ± {:.3}", c);
    let mut push = |label: String, metric: String, fmt: &dyn Fn(f64, f64) -> String| {
        let cells = results
            .iter()
            .map(|r| match r.replications.summary.get(&metric) {
                Some(s) => fmt(s.mean, s.ci95),
                None => "-".to_string(),
            })
            .collect();
        rows.push((label, cells));
    };
    push("Utilization".into(), "utilization".into(), &pct);
    push("Abandonment".into(), "abandonment".into(), &pct);
    push("Abandoners (per horizon)".into(), "abandoned".into(), &num);
    push("High-risk abandoners".into(), "high_risk_abandoned".into(), &num);
    push("Mean wait (days)".into(), "mean_wait".into(), &days);
    let labels = results.first().map(|r| r.replications.labels.clone()).unwrap_or_default();
    for l in &labels {
        push(format!("Abandonment {l}"), class_metric_name("abandonment", l), &pct);
    }
    for l in &labels {
        push(format!("Mean wait {l} (days)"), class_metric_name("mean_wait", l), &days);
    }

    let names: Vec<&str> = results.iter().map(|r| r.name.as_str()).collect();
    let first = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0).max(6);
    let widths: Vec<usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| rows.iter().map(|(_, c)| c[i].chars().count()).max().unwrap_or(0).max(n.chars().count()))
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{:first$}", "Metric");
    for (n, w) in names.iter().zip(&widths) {
        let _ = write!(out, "  {n:>w$}");
    }
    out.push('\n');
    for (label, cells) in &rows {
        let _ = write!(out, "{label:first$}");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
    }
    out
}
