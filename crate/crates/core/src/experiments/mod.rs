//! Replicated runs, scenario comparison and one-parameter sweeps.
//!
//! Replication `r` of every run is keyed by `(base_seed, r)`, whatever the
//! scenario or grid point, so comparisons use common random numbers and the
//! first `n` replications never depend on how many more are requested.

mod output;

pub use output::{
    comparison_table, summary_document, write_replications_csv, write_summary_json, write_sweep_csv,
    SummaryDocument, SummaryRow,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::desim::{
    run_replication, run_replication_traced, verify_threshold_trace, RawReplicationMetrics, ScenarioConfig,
    StreamSeed, Trace,
};
use crate::error::{Error, Result};

/// z-value of the two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub ci95: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat { mean: f64::NAN, sd: f64::NAN, ci95: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, sd, ci95: Z95 * sd / (n as f64).sqrt(), n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedStat {
    pub metric: String,
    #[serde(flatten)]
    pub stat: Stat,
}

/// Summaries of the aggregate and per-class metrics over a set of replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub n: usize,
    pub stats: Vec<NamedStat>,
}

/// Metric names in the order they are summarized. Per-class metrics are
/// named `<metric>[<label>]`.
pub const AGGREGATE_METRICS: [&str; 8] = [
    "abandonment",
    "utilization",
    "mean_wait",
    "arrivals",
    "served",
    "abandoned",
    "waiting_at_horizon",
    "high_risk_abandoned",
];

pub const CLASS_METRICS: [&str; 5] = ["abandonment", "mean_wait", "long_wait_fraction", "arrivals", "abandoned"];

fn aggregate_value(m: &RawReplicationMetrics, metric: &str) -> f64 {
    let a = &m.aggregate;
    match metric {
        "abandonment" => a.abandonment_proportion(),
        "utilization" => m.mean_utilization,
        "mean_wait" => a.mean_wait(),
        "arrivals" => a.arrivals as f64,
        "served" => a.served as f64,
        "abandoned" => a.abandoned as f64,
        "waiting_at_horizon" => a.waiting_at_horizon as f64,
        "high_risk_abandoned" => m.high_risk_abandoned as f64,
        _ => unreachable!("unknown aggregate metric {metric}"),
    }
}

fn class_value(m: &RawReplicationMetrics, class: usize, metric: &str) -> f64 {
    let c = &m.per_class[class];
    match metric {
        "abandonment" => c.abandonment_proportion(),
        "mean_wait" => c.mean_wait(),
        "long_wait_fraction" => c.long_wait_fraction(),
        "arrivals" => c.arrivals as f64,
        "abandoned" => c.abandoned as f64,
        _ => unreachable!("unknown class metric {metric}"),
    }
}

pub fn class_metric_name(metric: &str, label: &str) -> String {
    format!("{metric}[{label}]")
}

impl ReplicationSummary {
    pub fn of(runs: &[RawReplicationMetrics], labels: &[String]) -> ReplicationSummary {
        let mut stats = Vec::new();
        for metric in AGGREGATE_METRICS {
            let values: Vec<f64> = runs.iter().map(|m| aggregate_value(m, metric)).collect();
            stats.push(NamedStat { metric: metric.to_string(), stat: Stat::of(&values) });
        }
        for (j, label) in labels.iter().enumerate() {
            for metric in CLASS_METRICS {
                let values: Vec<f64> = runs.iter().map(|m| class_value(m, j, metric)).collect();
                stats.push(NamedStat { metric: class_metric_name(metric, label), stat: Stat::of(&values) });
            }
        }
        ReplicationSummary { n: runs.len(), stats }
    }

    pub fn get(&self, metric: &str) -> Option<Stat> {
        self.stats.iter().find(|s| s.metric == metric).map(|s| s.stat)
    }

    /// Mean of `metric`; panics on an unknown name.
    pub fn mean(&self, metric: &str) -> f64 {
        self.get(metric).unwrap_or_else(|| panic!("no metric named {metric}")).mean
    }
}

/// Raw runs plus their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replications {
    pub base_seed: u64,
    pub labels: Vec<String>,
    pub runs: Vec<RawReplicationMetrics>,
    pub summary: ReplicationSummary,
}

/// `n ≥ 2` replications on the seed ladder `(base_seed, 0..n)`, run in parallel.
pub fn run_replications(config: &ScenarioConfig, n: usize, base_seed: u64) -> Result<Replications> {
    if n < 2 {
        return Err(Error::config(format!("at least 2 replications are needed, got {n}")));
    }
    config.validate()?;
    let runs = (0..n as u64)
        .into_par_iter()
        .map(|r| run_replication(config, StreamSeed::new(base_seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let labels = config.mix.labels();
    let summary = ReplicationSummary::of(&runs, &labels);
    Ok(Replications { base_seed, labels, runs, summary })
}

/// Re-run replications `0..n` with tracing, check every trace against the
/// admission rule, and return the first `keep` traces. Metrics are identical
/// to the untraced runs.
pub fn verify_traces(config: &ScenarioConfig, n: usize, base_seed: u64, keep: usize) -> Result<Vec<Trace>> {
    config.validate()?;
    let traces = (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let (_, trace) = run_replication_traced(config, StreamSeed::new(base_seed, r))?;
            verify_threshold_trace(&trace).map_err(|e| match e {
                Error::TraceViolation { line, reason } => {
                    Error::TraceViolation { line, reason: format!("replication {r}: {reason}") }
                }
                other => other,
            })?;
            Ok(((r as usize) < keep).then_some(trace))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(traces.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedScenario {
    pub name: String,
    pub config: ScenarioConfig,
}

impl NamedScenario {
    pub fn new(name: impl Into<String>, config: ScenarioConfig) -> NamedScenario {
        NamedScenario { name: name.into(), config }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub config: ScenarioConfig,
    pub replications: Replications,
}

/// Every scenario on the same seed ladder.
pub fn compare_scenarios(scenarios: &[NamedScenario], n: usize, base_seed: u64) -> Result<Vec<ScenarioResult>> {
    scenarios
        .iter()
        .map(|s| {
            Ok(ScenarioResult {
                name: s.name.clone(),
                config: s.config.clone(),
                replications: run_replications(&s.config, n, base_seed)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Lambda,
    Mu,
    Theta,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Lambda => "lambda",
            SweepParameter::Mu => "mu",
            SweepParameter::Theta => "theta",
        }
    }

    pub fn parse(s: &str) -> Option<SweepParameter> {
        match s {
            "lambda" => Some(SweepParameter::Lambda),
            "mu" => Some(SweepParameter::Mu),
            "theta" => Some(SweepParameter::Theta),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("sweep needs at least one value"));
        }
        for &v in &self.values {
            let ok = match self.parameter {
                SweepParameter::Theta => v >= 0.0 && v.is_finite(),
                _ => v > 0.0 && v.is_finite(),
            };
            if !ok {
                return Err(Error::config(format!("sweep value {v} is not allowed for {}", self.parameter.name())));
            }
        }
        Ok(())
    }

    /// `config` with the swept parameter set to `value`.
    pub fn apply(&self, config: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut c = config.clone();
        match self.parameter {
            SweepParameter::Lambda => c.params.lambda = value,
            SweepParameter::Mu => c.params.mu = value,
            SweepParameter::Theta => c.params.theta = value,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub replications: Replications,
}

pub fn sweep(config: &ScenarioConfig, spec: &SweepSpec, n: usize, base_seed: u64) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    spec.values
        .iter()
        .map(|&value| {
            Ok(SweepPoint { value, replications: run_replications(&spec.apply(config, value), n, base_seed)? })
        })
        .collect()
}
