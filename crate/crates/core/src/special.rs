//! Complementary error function and its inverse.
//!
//! `erfc` uses the positive-term Taylor series of `erf` for `|x| < 2` and a
//! continued fraction (modified Lentz) for `x >= 2`. `ln_erfc` stays finite
//! deep in the tail where `erfc` itself underflows. `erfcinv` runs a
//! safeguarded Newton iteration on `ln erfc` with the analytic derivative.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::newton_bisect;

const SERIES_LIMIT: f64 = 2.0;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// erf(x) for |x| < 2 via erf(x) = 2/sqrt(pi) e^{-x^2} sum 2^n x^{2n+1} / (2n+1)!!
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    for n in 1..200 {
        term *= 2.0 * x2 / (2 * n + 1) as f64;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// Value of the continued fraction x + (1/2)/(x + 1/(x + (3/2)/(x + ...))), x >= 2.
fn erfc_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..5000 {
        let a = 0.5 * n as f64;
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
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_LIMIT {
        1.0 - erf_series(x)
    } else {
        (-x * x).exp() / (PI.sqrt() * erfc_fraction(x))
    }
}

/// Natural log of erfc(x); finite for every finite x.
pub fn ln_erfc(x: f64) -> f64 {
    if x < SERIES_LIMIT {
        erfc(x).ln()
    } else {
        -x * x - (PI.sqrt() * erfc_fraction(x)).ln()
    }
}

/// d/dx ln erfc(x) = -2/sqrt(pi) e^{-x^2} / erfc(x)
fn ln_erfc_derivative(x: f64) -> f64 {
    if x < SERIES_LIMIT {
        -FRAC_2_SQRT_PI * (-x * x).exp() / erfc(x)
    } else {
        -2.0 * erfc_fraction(x)
    }
}

/// Inverse of [`erfc`] on (0, 2).
pub fn erfcinv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 2.0) {
        return Err(Error::Domain {
            op: "erfcinv",
            value: p,
            detail: "argument must lie in (0, 2)",
        });
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    if p > 1.0 {
        return erfcinv(2.0 - p).map(|x| -x);
    }
    let target = p.ln();
    // rough tail asymptote as the starting guess
    let guess = (-target - 0.5 * (-target).max(1.0).ln()).max(0.0).sqrt();
    newton_bisect(
        "erfcinv",
        |x| (ln_erfc(x) - target, ln_erfc_derivative(x)),
        0.0,
        30.0,
        guess,
        4.0 * f64::EPSILON,
        200,
    )
}

/// Standard normal density and tail used by the two-sided (Beck) recursion.
#[derive(Debug, Clone, Copy, Default)]
pub struct BeckNormal;

impl BeckNormal {
    /// Standard normal density.
    pub fn pdf(&self, t: f64) -> f64 {
        (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
    }

    /// Upper tail G(x) = P(N > x) = erfc(x / sqrt 2) / 2.
    pub fn tail(&self, x: f64) -> f64 {
        0.5 * erfc(x / std::f64::consts::SQRT_2)
    }
}
