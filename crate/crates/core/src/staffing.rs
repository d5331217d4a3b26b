//! Bed counts for an abandonment or mean-wait target.
//!
//! The three regime rules (QD, ED, QED square-root staffing) are closed-form
//! approximations; [`min_beds_for_abandonment`] and [`min_beds_for_wait`]
//! search the exact Erlang-A metrics and are the reference answers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::erlang::{erlang_a_metrics, normal_hazard, ErlangAMetrics, SystemParams};
use crate::error::{Error, Result};

/// Global and per-class service-quality limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosTargets {
    /// Cap on the aggregate abandonment probability.
    pub alpha_global: f64,
    /// Cap on the aggregate mean wait (days).
    pub max_mean_wait: f64,
    /// `P{W_j ≥ T_j} ≤ x_j` for every class but the lowest-priority one.
    pub per_class_wait_caps: Vec<WaitCap>,
    /// `P_j{Ab} ≤ α_j` for every class but the lowest-priority one.
    pub per_class_abandon_caps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitCap {
    /// Tolerated fraction of the class waiting at least `horizon` days.
    pub fraction: f64,
    pub horizon: f64,
}

impl QosTargets {
    /// The six-class shelter targets: `P{Ab} < 0.04`, `E[W] < 1`, and the
    /// group A–E wait and abandonment caps.
    pub fn shelter_baseline() -> QosTargets {
        QosTargets {
            alpha_global: 0.04,
            max_mean_wait: 1.0,
            per_class_wait_caps: vec![
                WaitCap { fraction: 0.05, horizon: 1.0 },
                WaitCap { fraction: 0.08, horizon: 1.0 },
                WaitCap { fraction: 0.05, horizon: 2.0 },
                WaitCap { fraction: 0.10, horizon: 2.0 },
                WaitCap { fraction: 0.15, horizon: 2.0 },
            ],
            per_class_abandon_caps: vec![0.05, 0.08, 0.10, 0.12, 0.15],
        }
    }

    /// Check ranges and that per-class lists cover `classes - 1` classes.
    pub fn validate(&self, classes: usize) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if p > 0.0 && p < 1.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} = {p} must lie in (0, 1)")))
            }
        };
        prob("alpha", self.alpha_global)?;
        if !(self.max_mean_wait > 0.0) {
            return Err(Error::config(format!("max_mean_wait = {} must be > 0", self.max_mean_wait)));
        }
        let want = classes.saturating_sub(1);
        if !self.per_class_wait_caps.is_empty() && self.per_class_wait_caps.len() != want {
            return Err(Error::config(format!(
                "{} per-class wait caps given, expected {want}",
                self.per_class_wait_caps.len()
            )));
        }
        if !self.per_class_abandon_caps.is_empty() && self.per_class_abandon_caps.len() != want {
            return Err(Error::config(format!(
                "{} per-class abandonment caps given, expected {want}",
                self.per_class_abandon_caps.len()
            )));
        }
        for c in &self.per_class_wait_caps {
            prob("wait cap fraction", c.fraction)?;
            if !(c.horizon > 0.0) {
                return Err(Error::config(format!("wait cap horizon {} must be > 0", c.horizon)));
            }
        }
        for &a in &self.per_class_abandon_caps {
            prob("abandonment cap", a)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    Qd,
    Ed,
    Qed,
    ExactAb,
    ExactWait,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Qd => "QD",
            Regime::Ed => "ED",
            Regime::Qed => "QED",
            Regime::ExactAb => "EXACT_AB",
            Regime::ExactWait => "EXACT_WAIT",
        })
    }
}

/// Metrics at the chosen bed count and one bed fewer, proving minimality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub at_beds: ErlangAMetrics,
    /// `None` when `beds = 1` or the smaller system has no steady state.
    pub one_fewer: Option<ErlangAMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaffingResult {
    pub regime: Regime,
    pub beds: u32,
    pub beta_star: Option<f64>,
    /// `R = λ/μ`.
    pub offered_load: f64,
    pub gamma_used: Option<f64>,
    /// Present for the exact searches.
    pub certificate: Option<Certificate>,
}

// absorbs representation noise so that e.g. R(1+γ) = 2.0000000000000004 staffs 2 beds
fn ceil_beds(x: f64) -> u32 {
    let slack = 1e-9 * x.abs().max(1.0);
    ((x - slack).ceil()).max(1.0) as u32
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("gamma must lie in (0, 1), got {gamma}")))
    }
}

/// Quality-driven rule `N = ⌈R(1 + γ)⌉`.
pub fn staff_qd(params: &SystemParams, gamma: f64) -> Result<StaffingResult> {
    params.validate()?;
    check_gamma(gamma)?;
    let r = params.offered_load();
    Ok(StaffingResult {
        regime: Regime::Qd,
        beds: ceil_beds(r * (1.0 + gamma)),
        beta_star: None,
        offered_load: r,
        gamma_used: Some(gamma),
        certificate: None,
    })
}

/// Efficiency-driven rule `N = max(1, ⌈R(1 - γ)⌉)`.
pub fn staff_ed(params: &SystemParams, gamma: f64) -> Result<StaffingResult> {
    params.validate()?;
    check_gamma(gamma)?;
    let r = params.offered_load();
    Ok(StaffingResult {
        regime: Regime::Ed,
        beds: ceil_beds(r * (1.0 - gamma)),
        beta_star: None,
        offered_load: r,
        gamma_used: Some(gamma),
        certificate: None,
    })
}

/// Components of the QED abandonment asymptotics at a given `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QedAsymptotics {
    /// `β̂ = β sqrt(μ/θ)`.
    pub beta_hat: f64,
    /// `P_a(β) = sqrt(θ) (h(β̂) - β̂)`.
    pub p_a: f64,
    /// `P_w(β) = [1 + sqrt(θ/μ) h(β̂)/h(-β)]^{-1}`.
    pub p_w: f64,
}

impl QedAsymptotics {
    pub fn at(beta: f64, params: &SystemParams) -> QedAsymptotics {
        let beta_hat = beta * (params.mu / params.theta).sqrt();
        let h_hat = normal_hazard(beta_hat);
        let p_a = params.theta.sqrt() * (h_hat - beta_hat);
        let ratio = h_hat / normal_hazard(-beta);
        let p_w = 1.0 / (1.0 + (params.theta / params.mu).sqrt() * ratio);
        QedAsymptotics { beta_hat, p_a, p_w }
    }

    /// Right-hand side of the service-grade equation, `P_a · P_w`.
    pub fn balance(&self) -> f64 {
        self.p_a * self.p_w
    }

    /// Asymptotic `P{Ab} ≈ P_a P_w / sqrt(λ)`.
    pub fn abandonment(&self, params: &SystemParams) -> f64 {
        self.balance() / params.lambda.sqrt()
    }
}

const BETA_BRACKET: (f64, f64) = (-10.0, 10.0);
const BRACKET_LIMIT: f64 = 1e6;
const BETA_RESIDUAL: f64 = 1e-9;

/// Service grade `β*` solving `M sqrt(λ) = P_a(β) P_w(β)` with `M` the
/// abandonment target.
///
/// Bisection on `[-10, 10]`; the bracket doubles outward (up to `±10^6`)
/// while both ends share a sign.
pub fn solve_beta_star(target_abandon: f64, params: &SystemParams) -> Result<f64> {
    solve_beta_star_in(target_abandon, params, BETA_BRACKET)
}

/// [`solve_beta_star`] starting from a caller-chosen bracket.
pub fn solve_beta_star_in(target_abandon: f64, params: &SystemParams, bracket: (f64, f64)) -> Result<f64> {
    params.validate()?;
    if !(target_abandon > 0.0 && target_abandon < 1.0) {
        return Err(Error::domain(format!("abandonment target must lie in (0, 1), got {target_abandon}")));
    }
    if params.theta <= 0.0 {
        return Err(Error::domain("QED staffing needs theta > 0"));
    }
    let lhs = target_abandon * params.lambda.sqrt();
    let f = |beta: f64| QedAsymptotics::at(beta, params).balance() - lhs;

    let (mut lo, mut hi) = bracket;
    // f decreases from +inf to -lhs, so widen whichever side is on the wrong sign
    while f(lo) < 0.0 && lo > -BRACKET_LIMIT {
        lo = lo * 2.0 - 1.0;
    }
    while f(hi) > 0.0 && hi < BRACKET_LIMIT {
        hi = hi * 2.0 + 1.0;
    }
    let (flo, fhi) = (f(lo), f(hi));
    if flo.is_nan() || fhi.is_nan() || flo * fhi > 0.0 {
        return Err(Error::NoRootInBracket { lo, hi });
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    let residual = f(root).abs();
    if residual > BETA_RESIDUAL {
        return Err(Error::NumericalInconsistency(format!("beta* residual {residual} exceeds {BETA_RESIDUAL}")));
    }
    Ok(root)
}

/// Square-root staffing `N = ⌈R + β* sqrt(R)⌉`.
pub fn staff_qed(target_abandon: f64, params: &SystemParams) -> Result<StaffingResult> {
    let beta = solve_beta_star(target_abandon, params)?;
    let r = params.offered_load();
    Ok(StaffingResult {
        regime: Regime::Qed,
        beds: ceil_beds(r + beta * r.sqrt()),
        beta_star: Some(beta),
        offered_load: r,
        gamma_used: Some(target_abandon),
        certificate: None,
    })
}

/// Smallest `N` passing `accept`, given that acceptance is monotone in `N`.
/// Systems without a steady state count as failing.
fn monotone_search(
    params: &SystemParams,
    accept: impl Fn(&ErlangAMetrics) -> bool,
) -> Result<(u32, Certificate)> {
    let eval = |n: u32| -> Result<Option<ErlangAMetrics>> {
        match erlang_a_metrics(n, params) {
            Ok(m) => Ok(Some(m)),
            Err(Error::UnstableWithoutAbandonment { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let ok = |m: &Option<ErlangAMetrics>| m.as_ref().is_some_and(&accept);

    let mut hi = 1u32;
    let mut hi_metrics = eval(hi)?;
    while !ok(&hi_metrics) {
        if hi > u32::MAX / 4 {
            return Err(Error::domain("bed search exceeded the representable range"));
        }
        hi *= 2;
        hi_metrics = eval(hi)?;
    }
    let mut lo = hi / 2; // fails (or is 0)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let m = eval(mid)?;
        if ok(&m) {
            hi = mid;
            hi_metrics = m;
        } else {
            lo = mid;
        }
    }
    let one_fewer = if hi > 1 { eval(hi - 1)? } else { None };
    let at_beds = hi_metrics.expect("accepted metrics exist");
    Ok((hi, Certificate { at_beds, one_fewer }))
}

/// Smallest `N` with exact `P{Ab} ≤ α`.
pub fn min_beds_for_abandonment(params: &SystemParams, alpha: f64) -> Result<StaffingResult> {
    params.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (beds, certificate) = monotone_search(params, |m| m.p_ab <= alpha)?;
    Ok(StaffingResult {
        regime: Regime::ExactAb,
        beds,
        beta_star: None,
        offered_load: params.offered_load(),
        gamma_used: Some(alpha),
        certificate: Some(certificate),
    })
}

/// Smallest `N` with exact `E[W] ≤ M`. The certificate's `p_ab` shows how much
/// abandonment hides behind a short mean wait.
pub fn min_beds_for_wait(params: &SystemParams, max_mean_wait: f64) -> Result<StaffingResult> {
    params.validate()?;
    if !(max_mean_wait > 0.0) {
        return Err(Error::domain(format!("max mean wait must be > 0, got {max_mean_wait}")));
    }
    let (beds, certificate) = monotone_search(params, |m| m.mean_wait <= max_mean_wait)?;
    Ok(StaffingResult {
        regime: Regime::ExactWait,
        beds,
        beta_star: None,
        offered_load: params.offered_load(),
        gamma_used: None,
        certificate: Some(certificate),
    })
}
