//! Idle-server entry thresholds `K_j` for threshold-priority admission.
//!
//! A waiting class-`j` customer may start service only while more than `K_j`
//! servers are idle. The analytic recursion sets each increment
//! `K_{j+1} - K_j` from the cumulative loads `σ_j` and the delay probability of
//! the class below, working upward from the lowest-priority class, whose delay
//! probability is the aggregate Erlang-A `P{W > 0}`.
//!
//! When the cumulative load of a boundary reaches `1 - ε` the recursion has no
//! meaning (ω̂ blows up). By default `σ` is clamped to `1 - ε` and the result is
//! flagged `analytically_degenerate`; [`calibrate`] offers a simulation-based
//! alternative for that case.

pub mod calibrate;

pub use calibrate::{calibrate_thresholds_by_simulation, CalibrationCaps, CalibrationOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::staffing::{QosTargets, WaitCap};

pub const DEFAULT_DEGENERACY_EPS: f64 = 0.01;

/// `ω̂` for one adjacent class pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaHat {
    /// `[Nμ (1 - σ_{j+1})(1 - σ_j)]^{-1}`, computed with clamped `σ` when degenerate.
    pub value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeLoads {
    pub servers: u32,
    pub mu: f64,
    pub eps: f64,
    /// `ρ_j = λ_j / (Nμ)`.
    pub rho: Vec<f64>,
    /// `σ_j = Σ_{k≤j} ρ_k`.
    pub sigma: Vec<f64>,
    /// `omega_hat[j]` belongs to the pair `(j, j+1)`.
    pub omega_hat: Vec<OmegaHat>,
}

impl CumulativeLoads {
    pub fn classes(&self) -> usize {
        self.rho.len()
    }

    /// `σ_j` capped at `1 - ε`.
    pub fn sigma_clamped(&self, j: usize) -> f64 {
        self.sigma[j].min(1.0 - self.eps)
    }

    pub fn any_degenerate(&self) -> bool {
        self.omega_hat.iter().any(|w| w.degenerate)
    }
}

/// Per-class loads for rates listed in priority order.
pub fn cumulative_loads(class_rates: &[f64], servers: u32, mu: f64) -> Result<CumulativeLoads> {
    cumulative_loads_with_eps(class_rates, servers, mu, DEFAULT_DEGENERACY_EPS)
}

pub fn cumulative_loads_with_eps(class_rates: &[f64], servers: u32, mu: f64, eps: f64) -> Result<CumulativeLoads> {
    if class_rates.is_empty() {
        return Err(Error::domain("at least one class is required"));
    }
    if class_rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::domain("every class arrival rate must be > 0"));
    }
    if servers == 0 || !(mu > 0.0) {
        return Err(Error::domain("N >= 1 and mu > 0 are required"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("degeneracy margin must lie in (0, 1), got {eps}")));
    }
    let capacity = servers as f64 * mu;
    let rho: Vec<f64> = class_rates.iter().map(|r| r / capacity).collect();
    let sigma: Vec<f64> = rho
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect();
    let cap = 1.0 - eps;
    let omega_hat = sigma
        .windows(2)
        .map(|w| {
            let degenerate = w[1] >= cap || w[0] >= cap;
            let (lo, hi) = (w[0].min(cap), w[1].min(cap));
            OmegaHat { value: 1.0 / (capacity * (1.0 - hi) * (1.0 - lo)), degenerate }
        })
        .collect();
    Ok(CumulativeLoads { servers, mu, eps, rho, sigma, omega_hat })
}

/// Entry thresholds, one per class in priority order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdPolicy {
    thresholds: Vec<u32>,
}

impl ThresholdPolicy {
    pub fn new(thresholds: Vec<u32>) -> Result<ThresholdPolicy> {
        if thresholds.is_empty() {
            return Err(Error::config("a threshold policy needs at least one class"));
        }
        if thresholds[0] != 0 {
            return Err(Error::config(format!(
                "the top-priority class must have threshold 0, got {}",
                thresholds[0]
            )));
        }
        if thresholds.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config(format!("thresholds must be nondecreasing: {thresholds:?}")));
        }
        Ok(ThresholdPolicy { thresholds })
    }

    /// Every class admitted whenever a server is idle.
    pub fn zeros(classes: usize) -> ThresholdPolicy {
        ThresholdPolicy { thresholds: vec![0; classes.max(1)] }
    }

    /// Cumulative thresholds from the increments `K_{j+1} - K_j`.
    pub fn from_increments(increments: &[u32]) -> ThresholdPolicy {
        let mut thresholds = Vec::with_capacity(increments.len() + 1);
        thresholds.push(0);
        for d in increments {
            let last = *thresholds.last().unwrap();
            thresholds.push(last + d);
        }
        ThresholdPolicy { thresholds }
    }

    /// Only the lowest-priority class is held back, by `k` idle servers.
    pub fn lowest_class_only(classes: usize, k: u32) -> ThresholdPolicy {
        let mut thresholds = vec![0; classes.max(1)];
        if classes > 1 {
            *thresholds.last_mut().unwrap() = k;
        }
        ThresholdPolicy { thresholds }
    }

    pub fn thresholds(&self) -> &[u32] {
        &self.thresholds
    }

    pub fn classes(&self) -> usize {
        self.thresholds.len()
    }

    pub fn increments(&self) -> Vec<u32> {
        self.thresholds.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn max_threshold(&self) -> u32 {
        *self.thresholds.last().unwrap()
    }
}

/// Per-class delay probabilities `P{W_j > 0}` implied by a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDelayProfile {
    pub p_wait_by_class: Vec<f64>,
    pub analytically_degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegeneracyHandling {
    /// Clamp `σ` to `1 - ε` and flag the result.
    #[default]
    Clamp,
    /// Fail with `degenerate-load`.
    Fail,
}

/// Which probability multiplies `T_j` in the wait-cap numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaitNumerator {
    /// `x_j T_j`, matching the constraint `P{W_j ≥ T_j} ≤ x_j`.
    #[default]
    WaitFraction,
    /// `α_j T_j`, the symbol printed in the source recursion.
    AbandonCap,
}

/// `P_j{Ab} ≤ α` with the horizon `T_j` kept by the recursion (1 day by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbandonCap {
    pub alpha: f64,
    pub horizon: f64,
}

impl AbandonCap {
    pub fn unit_horizon(alpha: f64) -> AbandonCap {
        AbandonCap { alpha, horizon: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticThresholds {
    pub policy: ThresholdPolicy,
    pub profile: ClassDelayProfile,
    /// Some boundary needed the `σ` clamp.
    pub analytically_degenerate: bool,
}

fn slack_ceil(x: f64) -> f64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil()
}

fn check_boundary(loads: &CumulativeLoads, j: usize, handling: DegeneracyHandling) -> Result<bool> {
    let degenerate = loads.omega_hat[j].degenerate;
    if degenerate && handling == DegeneracyHandling::Fail {
        return Err(Error::DegenerateLoad { boundary: j + 1, sigma: loads.sigma[j + 1] });
    }
    Ok(degenerate)
}

/// Core recursion, given the per-boundary numerators.
fn thresholds_from_numerators(
    loads: &CumulativeLoads,
    numerators: &[f64],
    p_wait_lowest: f64,
    handling: DegeneracyHandling,
) -> Result<AnalyticThresholds> {
    let classes = loads.classes();
    if numerators.len() + 1 != classes {
        return Err(Error::config(format!(
            "{} caps given for {classes} classes; expected one per class except the lowest",
            numerators.len()
        )));
    }
    if !(0.0..=1.0).contains(&p_wait_lowest) {
        return Err(Error::domain(format!("delay probability {p_wait_lowest} is outside [0, 1]")));
    }
    let mut increments = vec![0u32; classes - 1];
    let mut p_wait = vec![0.0; classes];
    p_wait[classes - 1] = p_wait_lowest;
    let mut degenerate = false;
    for j in (0..classes - 1).rev() {
        degenerate |= check_boundary(loads, j, handling)?;
        let sigma_j = loads.sigma_clamped(j);
        let ratio = numerators[j] / (p_wait[j + 1] * loads.omega_hat[j].value);
        let raw = ratio.ln() / sigma_j.ln();
        // a NaN here means 0·∞ style inputs; treat as no hold-back
        let step = if raw.is_nan() { 0.0 } else { slack_ceil(raw).max(0.0) };
        if step > u32::MAX as f64 / 2.0 {
            return Err(Error::NumericalInconsistency(format!("threshold increment {raw} at boundary {}", j + 1)));
        }
        increments[j] = step as u32;
        p_wait[j] = p_wait[j + 1] * sigma_j.powi(increments[j] as i32);
    }
    Ok(AnalyticThresholds {
        policy: ThresholdPolicy::from_increments(&increments),
        profile: ClassDelayProfile { p_wait_by_class: p_wait, analytically_degenerate: degenerate },
        analytically_degenerate: degenerate,
    })
}

/// Thresholds for `P{W_j ≥ T_j} ≤ x_j`:
/// `K_{j+1} - K_j = ⌈ln(x_j T_j / [P{W_{j+1} > 0} ω̂]) / ln σ_j⌉ ∨ 0`.
pub fn thresholds_for_wait_caps(
    loads: &CumulativeLoads,
    caps: &[WaitCap],
    p_wait_lowest: f64,
    handling: DegeneracyHandling,
) -> Result<AnalyticThresholds> {
    let numerators: Vec<f64> = caps.iter().map(|c| c.fraction * c.horizon).collect();
    thresholds_from_numerators(loads, &numerators, p_wait_lowest, handling)
}

/// Thresholds for `P_j{Ab} ≤ α_j` through `P{Ab} ≈ θ E[W]`:
/// `K_{j+1} - K_j = ⌈ln(α_j T_j / (θ P{W_{j+1} > 0} ω̂)) / ln σ_j⌉ ∨ 0`.
pub fn thresholds_for_abandon_caps(
    loads: &CumulativeLoads,
    caps: &[AbandonCap],
    theta: f64,
    p_wait_lowest: f64,
    handling: DegeneracyHandling,
) -> Result<AnalyticThresholds> {
    if !(theta > 0.0) {
        return Err(Error::domain("abandonment-cap thresholds need theta > 0"));
    }
    let numerators: Vec<f64> = caps.iter().map(|c| c.alpha * c.horizon / theta).collect();
    thresholds_from_numerators(loads, &numerators, p_wait_lowest, handling)
}

/// Wait-cap thresholds from a QoS bundle, with the numerator chosen by `numerator`.
pub fn thresholds_for_qos(
    loads: &CumulativeLoads,
    qos: &QosTargets,
    numerator: WaitNumerator,
    p_wait_lowest: f64,
    handling: DegeneracyHandling,
) -> Result<AnalyticThresholds> {
    qos.validate(loads.classes())?;
    let boundaries = loads.classes() - 1;
    let numerators: Vec<f64> = match numerator {
        WaitNumerator::WaitFraction => {
            qos.per_class_wait_caps.iter().take(boundaries).map(|c| c.fraction * c.horizon).collect()
        }
        WaitNumerator::AbandonCap => qos
            .per_class_abandon_caps
            .iter()
            .enumerate()
            .take(boundaries)
            .map(|(j, a)| a * qos.per_class_wait_caps.get(j).map_or(1.0, |c| c.horizon))
            .collect(),
    };
    thresholds_from_numerators(loads, &numerators, p_wait_lowest, handling)
}

/// `P{W_j > 0} = P{W_{j+1} > 0} σ_j^{K_{j+1} - K_j}`, anchored at the lowest class.
pub fn class_delay_profile(
    policy: &ThresholdPolicy,
    loads: &CumulativeLoads,
    p_wait_lowest: f64,
    handling: DegeneracyHandling,
) -> Result<ClassDelayProfile> {
    let classes = loads.classes();
    if policy.classes() != classes {
        return Err(Error::config(format!(
            "policy has {} classes, loads have {classes}",
            policy.classes()
        )));
    }
    let increments = policy.increments();
    let mut p_wait = vec![0.0; classes];
    p_wait[classes - 1] = p_wait_lowest;
    let mut degenerate = false;
    for j in (0..classes - 1).rev() {
        degenerate |= check_boundary(loads, j, handling)?;
        p_wait[j] = p_wait[j + 1] * loads.sigma_clamped(j).powi(increments[j] as i32);
    }
    Ok(ClassDelayProfile { p_wait_by_class: p_wait, analytically_degenerate: degenerate })
}
