//! Special functions behind the Erlang-A closed forms.
//!
//! All incomplete-gamma quantities use the standard `e^{-t}` integrand,
//! `γ(x, y) = ∫₀ʸ t^{x-1} e^{-t} dt`. The function `A(x, y) = x e^y y^{-x} γ(x, y)`
//! is evaluated either by its convergent power series or in log space, so it
//! stays finite for the large shape parameters (`Nμ/θ` in the hundreds) that
//! show up in shelter-sized systems.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const MAX_ITER: usize = 100_000;
const EPS: f64 = 1e-17;
const TINY: f64 = 1e-300;

/// Above this point the hazard rate comes from the Mills-ratio continued
/// fraction instead of `φ / (1 - Φ)`.
const HAZARD_SWITCH: f64 = 5.0;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal survival function `1 - Φ(x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Hazard rate of the standard normal, `φ(x) / (1 - Φ(x))`.
///
/// For `x > 5` the ratio is evaluated as the reciprocal of Mills' ratio via
/// its continued fraction `x + 1/(x + 2/(x + 3/(x + ...)))`, which never forms
/// the vanishing tail probability. Very negative arguments return a value that
/// underflows gracefully towards zero.
pub fn normal_hazard(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > HAZARD_SWITCH {
        return inverse_mills_ratio(x);
    }
    normal_pdf(x) / normal_sf(x)
}

/// Modified Lentz evaluation of `x + 1/(x + 2/(x + 3/(x + ...)))`.
fn inverse_mills_ratio(x: f64) -> f64 {
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for n in 1..MAX_ITER {
        let a = n as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    f
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Regularized incomplete gamma pair `(P(x, y), Q(x, y))`.
pub fn regularized_gamma(x: f64, y: f64) -> Result<(f64, f64)> {
    check_gamma_args(x, y)?;
    if y == 0.0 {
        return Ok((0.0, 1.0));
    }
    let log_prefactor = -y + x * y.ln() - ln_gamma(x);
    if y < x + 1.0 {
        let p = (log_prefactor + gamma_series(x, y).ln()).exp();
        Ok((p, 1.0 - p))
    } else {
        let q = (log_prefactor + gamma_continued_fraction(x, y).ln()).exp();
        Ok((1.0 - q, q))
    }
}

/// Lower incomplete gamma `γ(x, y) = ∫₀ʸ t^{x-1} e^{-t} dt = Γ(x) P(x, y)`.
///
/// Overflows to infinity for very large `x`; use
/// [`ln_lower_incomplete_gamma`] in that range.
pub fn lower_incomplete_gamma(x: f64, y: f64) -> Result<f64> {
    Ok(ln_lower_incomplete_gamma(x, y)?.exp())
}

/// `ln γ(x, y)`; `-inf` when `y = 0`.
pub fn ln_lower_incomplete_gamma(x: f64, y: f64) -> Result<f64> {
    check_gamma_args(x, y)?;
    if y == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let log_power = -y + x * y.ln();
    if y < x + 1.0 {
        Ok(log_power + gamma_series(x, y).ln())
    } else {
        let ln_upper = log_power + gamma_continued_fraction(x, y).ln();
        let lg = ln_gamma(x);
        Ok(lg + (-(ln_upper - lg).exp()).ln_1p())
    }
}

/// `A(x, y) = x e^y y^{-x} γ(x, y)`.
pub fn a_func(x: f64, y: f64) -> Result<f64> {
    Ok(ln_a_func(x, y)?.exp())
}

/// `ln A(x, y)`, finite wherever `A` itself would overflow.
pub fn ln_a_func(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite() && y > 0.0 && y.is_finite()) {
        return Err(Error::domain(format!(
            "A(x, y) needs x > 0 and y > 0, got x = {x}, y = {y}"
        )));
    }
    if y < x + 1.0 {
        Ok(ln_a_by_series(x, y))
    } else {
        Ok(ln_a_by_continued_fraction(x, y))
    }
}

/// `A(x, y) = Σ_{n≥0} y^n / ((x+1)(x+2)...(x+n))`.
fn ln_a_by_series(x: f64, y: f64) -> f64 {
    (x * gamma_series(x, y)).ln()
}

/// `A = x e^y y^{-x} (Γ(x) - Γ(x, y))` with `Γ(x, y) = e^{-y} y^x · CF`.
fn ln_a_by_continued_fraction(x: f64, y: f64) -> f64 {
    let ln_full = x.ln() + y - x * y.ln() + ln_gamma(x);
    let ln_tail = x.ln() + gamma_continued_fraction(x, y).ln();
    ln_full + (-(ln_tail - ln_full).exp()).ln_1p()
}

fn check_gamma_args(x: f64, y: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) || !(y >= 0.0 && y.is_finite()) {
        return Err(Error::domain(format!(
            "incomplete gamma needs x > 0 and y >= 0, got x = {x}, y = {y}"
        )));
    }
    Ok(())
}

/// `Σ_{n≥0} y^n / (x (x+1) ... (x+n))`, so that `γ(x, y) = e^{-y} y^x · series`.
fn gamma_series(x: f64, y: f64) -> f64 {
    let mut term = 1.0 / x;
    let mut sum = term;
    let mut denom = x;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= y / denom;
        sum += term;
        if term < sum * EPS {
            break;
        }
    }
    sum
}

/// Continued fraction with `Γ(x, y) = e^{-y} y^x · CF`, valid for `y ≥ x + 1`.
fn gamma_continued_fraction(x: f64, y: f64) -> f64 {
    let mut b = y + 1.0 - x;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - x);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
