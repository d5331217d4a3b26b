//! Thresholds found by simulation instead of the analytic recursion.
//!
//! Boundaries are handled from the lowest-priority class upward. At each one
//! the smallest increment is found whose replicated means meet the caps of
//! every class above the boundary; larger increments only hold the lower
//! classes back further, so the check is monotone up to sampling noise, and
//! the fixed seed ladder makes each evaluation deterministic.

use serde::{Deserialize, Serialize};

use super::ThresholdPolicy;
use crate::desim::ScenarioConfig;
use crate::error::{Error, Result};
use crate::experiments::{class_metric_name, run_replications};
use crate::staffing::{QosTargets, WaitCap};

/// Per-class caps checked against replication means, one entry per class
/// except the lowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationCaps {
    /// Fraction of arrivals waiting at least `horizon` stays at or below `fraction`.
    LongWait(Vec<WaitCap>),
    /// Abandonment proportion stays at or below the cap.
    Abandonment(Vec<f64>),
    /// Mean wait (days) stays at or below the cap.
    MeanWait(Vec<f64>),
}

impl CalibrationCaps {
    pub fn wait_caps(qos: &QosTargets) -> CalibrationCaps {
        CalibrationCaps::LongWait(qos.per_class_wait_caps.clone())
    }

    pub fn abandon_caps(qos: &QosTargets) -> CalibrationCaps {
        CalibrationCaps::Abandonment(qos.per_class_abandon_caps.clone())
    }

    fn len(&self) -> usize {
        match self {
            CalibrationCaps::LongWait(c) => c.len(),
            CalibrationCaps::Abandonment(c) | CalibrationCaps::MeanWait(c) => c.len(),
        }
    }

    fn metric(&self) -> &'static str {
        match self {
            CalibrationCaps::LongWait(_) => "long_wait_fraction",
            CalibrationCaps::Abandonment(_) => "abandonment",
            CalibrationCaps::MeanWait(_) => "mean_wait",
        }
    }

    fn limit(&self, class: usize) -> f64 {
        match self {
            CalibrationCaps::LongWait(c) => c[class].fraction,
            CalibrationCaps::Abandonment(c) | CalibrationCaps::MeanWait(c) => c[class],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub boundary: usize,
    pub increment: u32,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub policy: ThresholdPolicy,
    /// Replication mean of the capped metric per class under `policy`.
    pub achieved: Vec<f64>,
    /// Every policy evaluated, in order.
    pub steps: Vec<CalibrationStep>,
}

/// Smallest thresholds meeting `caps` in simulation, with `K_last ≤ max_k`.
pub fn calibrate_thresholds_by_simulation(
    config: &ScenarioConfig,
    caps: &CalibrationCaps,
    max_k: u32,
    reps: usize,
    base_seed: u64,
) -> Result<CalibrationOutcome> {
    let classes = config.classes();
    if caps.len() + 1 != classes {
        return Err(Error::config(format!(
            "{} caps given for {classes} classes; expected one per class except the lowest",
            caps.len()
        )));
    }
    if max_k > config.beds {
        return Err(Error::config(format!("max_k = {max_k} exceeds {} beds", config.beds)));
    }
    let mut base = config.clone();
    if let CalibrationCaps::LongWait(w) = caps {
        base.wait_horizons = w.iter().map(|c| c.horizon).chain(std::iter::once(1.0)).collect();
    }
    base.validate()?;
    let labels = base.mix.labels();
    let metric = caps.metric();

    let evaluate = |increments: &[u32]| -> Result<Vec<f64>> {
        let cfg = base.clone().with_policy(ThresholdPolicy::from_increments(increments));
        let reps = run_replications(&cfg, reps, base_seed)?;
        Ok(labels.iter().map(|l| reps.summary.mean(&class_metric_name(metric, l))).collect())
    };
    let meets = |values: &[f64], upto: usize| (0..upto).all(|j| values[j] <= caps.limit(j));

    let mut increments = vec![0u32; classes - 1];
    let mut steps = Vec::new();
    for b in (0..classes - 1).rev() {
        // boundary b separates class b (above) from class b + 1
        let guarded = b + 1;
        let used: u32 = increments.iter().sum();
        let budget = max_k - used;
        let check = |d: u32, steps: &mut Vec<CalibrationStep>| -> Result<bool> {
            let mut inc = increments.clone();
            inc[b] = d;
            let ok = meets(&evaluate(&inc)?, guarded);
            steps.push(CalibrationStep { boundary: guarded, increment: d, satisfied: ok });
            Ok(ok)
        };
        if check(0, &mut steps)? {
            continue;
        }
        if !check(budget, &mut steps)? {
            return Err(Error::InfeasibleAtMaxK { boundary: guarded, max_k });
        }
        let (mut lo, mut hi) = (0u32, budget);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if check(mid, &mut steps)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        increments[b] = hi;
    }
    let policy = ThresholdPolicy::from_increments(&increments);
    let achieved = evaluate(&increments)?;
    Ok(CalibrationOutcome { policy, achieved, steps })
}
