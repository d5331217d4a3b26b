//! Exact steady-state analysis of the single-class M/M/N+M (Erlang-A) queue.
//!
//! Metrics come from the truncated birth–death distribution; the closed form
//! for `P{Ab | W > 0}` in terms of `A(x, y)` is kept as an independent route
//! and checked against it.

mod special;

pub use special::{
    a_func, ln_a_func, ln_gamma, ln_lower_incomplete_gamma, lower_incomplete_gamma,
    normal_hazard, normal_pdf, normal_sf, regularized_gamma,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the probability mass dropped past the truncation point.
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;

/// Hard cap on the number of states kept; only reachable with `theta = 0`
/// at loads extremely close to 1.
const MAX_STATES: usize = 20_000_000;

/// Rates (per day) of the aggregate queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Arrival rate.
    pub lambda: f64,
    /// Service completions per busy server.
    pub mu: f64,
    /// Abandonment rate of each waiting customer; `0` means unlimited patience.
    pub theta: f64,
}

impl SystemParams {
    pub fn new(lambda: f64, mu: f64, theta: f64) -> Result<Self> {
        let p = SystemParams { lambda, mu, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::domain(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::domain(format!("theta must be >= 0, got {}", self.theta)));
        }
        let r = self.offered_load();
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::domain(format!("offered load lambda/mu = {r} is not usable")));
        }
        Ok(())
    }

    /// Offered load `R = λ/μ`.
    pub fn offered_load(&self) -> f64 {
        self.lambda / self.mu
    }

    /// Per-server utilization ratio `ρ = λ/(Nμ)`.
    pub fn rho(&self, servers: u32) -> f64 {
        self.lambda / (servers as f64 * self.mu)
    }

    /// Same system with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        SystemParams {
            lambda: self.lambda * factor,
            mu: self.mu * factor,
            theta: self.theta * factor,
        }
    }

    fn death_rate(&self, servers: u32, k: usize) -> f64 {
        let n = servers as usize;
        if k <= n {
            k as f64 * self.mu
        } else {
            n as f64 * self.mu + (k - n) as f64 * self.theta
        }
    }
}

/// Steady-state performance of an M/M/N+M queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErlangAMetrics {
    pub servers: u32,
    /// `P{W > 0}`: an arrival finds every server busy.
    pub p_wait: f64,
    /// `P{Ab | W > 0}`.
    pub p_ab_given_wait: f64,
    /// Long-run fraction of arrivals that abandon.
    pub p_ab: f64,
    /// Mean time in queue over all arrivals, abandoners included (days).
    pub mean_wait: f64,
    pub mean_queue: f64,
    pub mean_busy_servers: f64,
    /// `mean_busy_servers / N`.
    pub occupancy: f64,
}

/// Truncated stationary law of the number in system.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub servers: u32,
    /// `probs[k] = π_k`, summing to 1.
    pub probs: Vec<f64>,
}

impl StationaryDistribution {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the most likely state.
    pub fn mode(&self) -> usize {
        self.probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0)
    }
}

/// Birth–death stationary distribution with birth rate `λ` and death rate
/// `min(k, N)μ + max(k - N, 0)θ`.
///
/// Weights are built by ratio recursion outward from the modal state (so
/// nothing overflows even for offered loads in the thousands) and normalized
/// once. The upper tail is cut where a geometric bound on the remaining mass
/// falls below `tail_eps`, but never before `N + 20·sqrt(λ/θ + N)`.
pub fn stationary_distribution(
    servers: u32,
    params: &SystemParams,
    tail_eps: f64,
) -> Result<StationaryDistribution> {
    params.validate()?;
    if servers == 0 {
        return Err(Error::domain("N must be at least 1"));
    }
    if !(tail_eps > 0.0 && tail_eps <= 1e-6) {
        return Err(Error::domain(format!("tail_eps must lie in (0, 1e-6], got {tail_eps}")));
    }
    let n = servers as usize;
    let capacity = servers as f64 * params.mu;
    if params.theta == 0.0 && params.lambda >= capacity {
        return Err(Error::UnstableWithoutAbandonment { lambda: params.lambda, capacity });
    }

    // death rates are increasing in k, so the mode is the first k whose
    // successor ratio drops below one
    let mut mode = 0usize;
    while params.lambda > params.death_rate(servers, mode + 1) {
        mode += 1;
        if mode > MAX_STATES {
            return Err(Error::domain("state space exceeds the truncation cap"));
        }
    }

    let spread = if params.theta > 0.0 {
        params.lambda / params.theta + n as f64
    } else {
        n as f64
    };
    let min_len = n + (20.0 * spread.sqrt()).ceil() as usize;

    let mut below = Vec::with_capacity(mode);
    let mut w = 1.0f64;
    for k in (0..mode).rev() {
        w *= params.death_rate(servers, k + 1) / params.lambda;
        below.push(w);
    }
    below.reverse();

    let mut above = vec![1.0f64];
    let mut total: f64 = below.iter().sum::<f64>() + 1.0;
    let mut k = mode;
    let mut w = 1.0f64;
    loop {
        let ratio = params.lambda / params.death_rate(servers, k + 1);
        // remaining mass beyond k is at most w r / (1 - r) once r < 1 and decreasing
        let tail_bound = if ratio < 1.0 { w * ratio / (1.0 - ratio) } else { f64::INFINITY };
        if k + 1 >= min_len && tail_bound < tail_eps * total {
            break;
        }
        w *= ratio;
        above.push(w);
        total += w;
        k += 1;
        if k > MAX_STATES {
            return Err(Error::domain("state space exceeds the truncation cap"));
        }
    }

    let mut probs = below;
    probs.extend(above);
    let norm: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= norm;
    }
    Ok(StationaryDistribution { servers, probs })
}

/// Exact Erlang-A metrics with the default truncation.
pub fn erlang_a_metrics(servers: u32, params: &SystemParams) -> Result<ErlangAMetrics> {
    erlang_a_metrics_with_eps(servers, params, DEFAULT_TAIL_EPS)
}

pub fn erlang_a_metrics_with_eps(
    servers: u32,
    params: &SystemParams,
    tail_eps: f64,
) -> Result<ErlangAMetrics> {
    let dist = stationary_distribution(servers, params, tail_eps)?;
    Ok(metrics_from_distribution(&dist, params))
}

/// Metrics by PASTA and Little's law from a stationary distribution.
pub fn metrics_from_distribution(dist: &StationaryDistribution, params: &SystemParams) -> ErlangAMetrics {
    let n = dist.servers as usize;
    let mut p_wait = 0.0;
    let mut mean_queue = 0.0;
    let mut mean_busy = 0.0;
    for (k, &p) in dist.probs.iter().enumerate() {
        if k >= n {
            p_wait += p;
            mean_queue += (k - n) as f64 * p;
            mean_busy += n as f64 * p;
        } else {
            mean_busy += k as f64 * p;
        }
    }
    let p_wait = p_wait.min(1.0);
    let mean_wait = mean_queue / params.lambda;
    let p_ab = (params.theta * mean_wait).min(1.0);
    let p_ab_given_wait = if p_wait > 0.0 { (p_ab / p_wait).min(1.0) } else { 0.0 };
    ErlangAMetrics {
        servers: dist.servers,
        p_wait,
        p_ab_given_wait,
        p_ab,
        mean_wait,
        mean_queue,
        mean_busy_servers: mean_busy,
        occupancy: mean_busy / n as f64,
    }
}

/// Boundary slack before an out-of-range closed-form value counts as an error.
const CLOSED_FORM_SLACK: f64 = 1e-9;

/// `P{Ab | W > 0} = 1/(ρ A(Nμ/θ, λ/θ)) + 1 - 1/ρ` with `ρ = λ/(Nμ)`.
pub fn p_ab_given_wait_closed_form(servers: u32, params: &SystemParams) -> Result<f64> {
    params.validate()?;
    if servers == 0 {
        return Err(Error::domain("N must be at least 1"));
    }
    if params.theta <= 0.0 {
        return Err(Error::domain("closed form needs theta > 0"));
    }
    let rho = params.rho(servers);
    let x = servers as f64 * params.mu / params.theta;
    let y = params.lambda / params.theta;
    let ln_a = ln_a_func(x, y)?;
    // 1 + (1/A - 1)/ρ, with 1/A - 1 formed as expm1 to keep small loads accurate
    let value = 1.0 + (-ln_a).exp_m1() / rho;
    if !(-CLOSED_FORM_SLACK..=1.0 + CLOSED_FORM_SLACK).contains(&value) {
        return Err(Error::NumericalInconsistency(format!(
            "P{{Ab|W>0}} closed form gave {value} for N = {servers}"
        )));
    }
    Ok(value.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64, mu: f64, theta: f64) -> SystemParams {
        SystemParams::new(lambda, mu, theta).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SystemParams::new(0.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(1.0, -1.0, 1.0).is_err());
        assert!(SystemParams::new(1.0, 1.0, -0.1).is_err());
        assert!(SystemParams::new(f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn single_server_unit_rates_is_poisson() {
        // π_k = π_0 / k!  =>  π_k = e^{-1}/k!
        let d = stationary_distribution(1, &params(1.0, 1.0, 1.0), 1e-12).unwrap();
        let mut fact = 1.0;
        for (k, &p) in d.probs.iter().enumerate().take(15) {
            if k > 0 {
                fact *= k as f64;
            }
            let exact = (-1.0f64).exp() / fact;
            assert!((p - exact).abs() < 1e-13, "k = {k}");
        }
        let s: f64 = d.probs.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_load_sits_at_zero() {
        let d = stationary_distribution(2, &params(1e-4, 1.0, 1.0), 1e-12).unwrap();
        assert!((d.probs[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn overloaded_shelter_mode_is_above_capacity() {
        // drift λ = Nμ + (k - N)θ  =>  mode near N + (λ - Nμ)/θ
        let p = params(4.44, 0.016, 0.5);
        let d = stationary_distribution(164, &p, 1e-12).unwrap();
        let predicted = 164.0 + (4.44 - 164.0 * 0.016) / 0.5;
        assert!(d.mode() > 164);
        assert!((d.mode() as f64 - predicted).abs() <= 1.0);
        let above: f64 = d.probs[164..].iter().sum();
        assert!(above > 0.85, "{above}");
    }

    #[test]
    fn unstable_without_abandonment() {
        let err = stationary_distribution(2, &params(3.0, 1.0, 0.0), 1e-12).unwrap_err();
        assert!(matches!(err, Error::UnstableWithoutAbandonment { .. }));
        // exactly critical is unstable too
        assert!(stationary_distribution(3, &params(3.0, 1.0, 0.0), 1e-12).is_err());
    }

    #[test]
    fn tail_eps_domain() {
        let p = params(1.0, 1.0, 1.0);
        assert!(stationary_distribution(1, &p, 0.0).is_err());
        assert!(stationary_distribution(1, &p, 1e-3).is_err());
        assert!(stationary_distribution(0, &p, 1e-12).is_err());
    }

    #[test]
    fn erlang_c_matches_textbook_formula() {
        // M/M/2 with λ = 1, μ = 1: C(2, 1) = 1/3, E[Wq] = C/(Nμ - λ) = 1/3
        let m = erlang_a_metrics(2, &params(1.0, 1.0, 0.0)).unwrap();
        assert!((m.p_wait - 1.0 / 3.0).abs() < 1e-10);
        assert!((m.mean_wait - 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(m.p_ab, 0.0);
    }

    #[test]
    fn unit_rates_single_server_metrics() {
        let m = erlang_a_metrics(1, &params(1.0, 1.0, 1.0)).unwrap();
        let e_inv = (-1.0f64).exp();
        assert!((m.p_ab - e_inv).abs() < 1e-12);
        assert!((m.p_wait - (1.0 - e_inv)).abs() < 1e-12);
        assert!((m.p_ab_given_wait - e_inv / (1.0 - e_inv)).abs() < 1e-12);
    }

    #[test]
    fn vanishing_load_metrics() {
        let m = erlang_a_metrics(10, &params(0.001, 1.0, 0.5)).unwrap();
        assert!(m.p_ab < 1e-20);
        assert!(m.mean_wait < 1e-20);
        assert!((m.occupancy - 0.0001).abs() < 1e-12);
    }

    #[test]
    fn closed_form_unit_case() {
        let v = p_ab_given_wait_closed_form(1, &params(1.0, 1.0, 1.0)).unwrap();
        let e = 1f64.exp();
        assert!(rel(v, 1.0 / (e - 1.0)) < 1e-13);
        assert!((v - 0.581977).abs() < 1e-6);
    }

    #[test]
    fn closed_form_matches_birth_death() {
        for (n, p) in [
            (270, params(4.44, 0.016, 0.5)),
            (164, params(4.44, 0.016, 0.5)),
            (5, params(20.0, 1.0, 2.0)),
            (50, params(10.0, 1.0, 20.0)),
            (400, params(80.0, 1.0, 0.5)),
        ] {
            let exact = erlang_a_metrics(n, &p).unwrap();
            let closed = p_ab_given_wait_closed_form(n, &p).unwrap();
            assert!(rel(closed, exact.p_ab_given_wait) < 1e-8, "N = {n}: {closed} vs {exact:?}");
            assert!(rel(closed * exact.p_wait, exact.p_ab) < 1e-8);
        }
    }

    #[test]
    fn closed_form_rejects_theta_zero() {
        assert!(p_ab_given_wait_closed_form(3, &params(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn shelter_reference_values() {
        let p = params(4.44, 0.016, 0.5);
        let m = erlang_a_metrics(270, &p).unwrap();
        assert!(m.p_ab > 0.01 && m.p_ab < 0.1, "{m:?}");
        assert!(rel(p.lambda * (1.0 - m.p_ab), p.mu * m.mean_busy_servers) < 1e-8);
    }
}
