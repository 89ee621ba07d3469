//! The variational recursion f(x_{n-1}) + x_{n+1} f'(x_n) = 0 as a planar map,
//! in three charts:
//!
//! * `XY`: consecutive turning points (x_{n-1}, x_n);
//! * `SY`: (f(x_{n-1}), x_n), where the map preserves Lebesgue area;
//! * `YZ`: (x_n, x_n - x_{n-1}); z > 0 is monotonicity.
//!
//! Orbits are stepped in linear arithmetic while that is exact enough and in
//! log space once f or f' underflows, so long monotone orbits never stall on
//! a 0/0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::distributions::TailDistribution;
use crate::error::{Error, Result};
use crate::numerics::eigenvalues_2x2;
use crate::special::{erfc, erfcinv, BeckNormal};

/// Coordinates beyond this count as escaped to infinity.
pub const OVERFLOW_GUARD: f64 = 1e300;

/// Default orbit horizon in steps.
pub const DEFAULT_HORIZON: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    XY,
    SY,
    YZ,
}

/// A point of the phase plane tagged with its chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub chart: Chart,
    pub a: f64,
    pub b: f64,
}

impl PhasePoint {
    pub fn xy(x: f64, y: f64) -> Self {
        Self {
            chart: Chart::XY,
            a: x,
            b: y,
        }
    }

    pub fn sy(s: f64, y: f64) -> Self {
        Self {
            chart: Chart::SY,
            a: s,
            b: y,
        }
    }

    pub fn yz(y: f64, z: f64) -> Self {
        Self {
            chart: Chart::YZ,
            a: y,
            b: z,
        }
    }

    pub fn coords(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    fn to_xy(self, d: &TailDistribution) -> Result<(f64, f64)> {
        match self.chart {
            Chart::XY => Ok((self.a, self.b)),
            Chart::YZ => Ok((self.a - self.b, self.a)),
            Chart::SY => {
                let s = self.a;
                if !(s > 0.0 && s <= 1.0) {
                    return Err(Error::Domain {
                        op: "chart_convert",
                        value: s,
                        detail: "s = f(x) must lie in (0, 1] to be inverted",
                    });
                }
                Ok((d.inverse_tail(s), self.b))
            }
        }
    }

    /// Same point in another chart. SY needs f to be invertible at s.
    pub fn convert(self, d: &TailDistribution, chart: Chart) -> Result<PhasePoint> {
        if chart == self.chart {
            return Ok(self);
        }
        let (x, y) = self.to_xy(d)?;
        Ok(match chart {
            Chart::XY => PhasePoint::xy(x, y),
            Chart::SY => PhasePoint::sy(d.tail(x)?, y),
            Chart::YZ => PhasePoint::yz(y, y - x),
        })
    }

    /// One application of the map, staying in this point's chart.
    pub fn step(self, d: &TailDistribution) -> Result<PhasePoint> {
        match self.chart {
            Chart::XY => step_xy(d, self.coords()).map(|(a, b)| PhasePoint::xy(a, b)),
            Chart::SY => step_sy(d, self.coords()).map(|(a, b)| PhasePoint::sy(a, b)),
            Chart::YZ => {
                let (x, y) = self.to_xy(d)?;
                let (_, next) = step_xy(d, (x, y))?;
                Ok(PhasePoint::yz(next, next - y))
            }
        }
    }
}

fn singular(op: &'static str, at: f64, err: Error) -> Error {
    match err {
        Error::Domain { .. } => Error::SingularStep { op, at },
        other => other,
    }
}

/// R(x, y) = (y, -f(x)/f'(y)).
pub fn step_xy(d: &TailDistribution, (x, y): (f64, f64)) -> Result<(f64, f64)> {
    let fx = d.tail(x)?;
    let fpy = d.tail_derivative(y).map_err(|e| singular("step_xy", y, e))?;
    if fpy == 0.0 {
        return Err(Error::SingularStep { op: "step_xy", at: y });
    }
    Ok((y, -fx / fpy))
}

/// R(s, y) = (f(y), -s/f'(y)) in standard coordinates.
pub fn step_sy(d: &TailDistribution, (s, y): (f64, f64)) -> Result<(f64, f64)> {
    let fy = d.tail(y)?;
    let fpy = d.tail_derivative(y).map_err(|e| singular("step_sy", y, e))?;
    if fpy == 0.0 {
        return Err(Error::SingularStep { op: "step_sy", at: y });
    }
    Ok((fy, -s / fpy))
}

/// Exponential case in standard coordinates: (s, y) -> (e^{-y}, s e^y).
pub fn step_standard_exp((s, y): (f64, f64)) -> (f64, f64) {
    ((-y).exp(), s * y.exp())
}

/// Exponential case in the (y, z) chart: (y, z) -> (e^z, e^z - y).
pub fn step_yz_exp((y, z): (f64, f64)) -> (f64, f64) {
    let ez = z.exp();
    (ez, ez - y)
}

/// Inverse of [`step_yz_exp`]: (Y, Z) -> (Y - Z, ln Y).
pub fn inv_yz_exp((y, z): (f64, f64)) -> Result<(f64, f64)> {
    if !(y > 0.0) {
        return Err(Error::Domain {
            op: "inv_yz_exp",
            value: y,
            detail: "Y must be positive",
        });
    }
    Ok((y - z, y.ln()))
}

/// Differential of [`step_yz_exp`].
pub fn jacobian_yz_exp((_, z): (f64, f64)) -> [[f64; 2]; 2] {
    let ez = z.exp();
    [[0.0, ez], [-1.0, ez]]
}

/// Differential of [`step_sy`]; its determinant is identically 1.
pub fn jacobian_sy(d: &TailDistribution, (s, y): (f64, f64)) -> Result<[[f64; 2]; 2]> {
    let fp = d.tail_derivative(y).map_err(|e| singular("jacobian_sy", y, e))?;
    if fp == 0.0 {
        return Err(Error::SingularStep {
            op: "jacobian_sy",
            at: y,
        });
    }
    let fpp = d.tail_second_derivative(y)?;
    Ok([[0.0, fp], [-1.0 / fp, s * fpp / (fp * fp)]])
}

/// Differential of [`step_xy`]; determinant f'(x)/f'(y).
pub fn jacobian_xy(d: &TailDistribution, (x, y): (f64, f64)) -> Result<[[f64; 2]; 2]> {
    let fx = d.tail(x)?;
    let fpx = d.tail_derivative(x)?;
    let fpy = d.tail_derivative(y).map_err(|e| singular("jacobian_xy", y, e))?;
    if fpy == 0.0 {
        return Err(Error::SingularStep {
            op: "jacobian_xy",
            at: y,
        });
    }
    let fppy = d.tail_second_derivative(y)?;
    Ok([[0.0, 1.0], [-fpx / fpy, fx * fppy / (fpy * fpy)]])
}

/// How an orbit computation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitEnd {
    /// Entered a region from which every further step is increasing, overflowed,
    /// or covered a bounded support.
    Escaped,
    /// Some x_k <= x_{k-1}.
    Broken,
    /// f'(x_k) = 0 (or undefined) at the last point.
    Singular,
    /// Reached the horizon without a verdict.
    Horizon,
}

impl OrbitEnd {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrbitEnd::Escaped => "escaped",
            OrbitEnd::Broken => "break",
            OrbitEnd::Singular => "singular",
            OrbitEnd::Horizon => "horizon",
        }
    }
}

/// A finite piece of a recursion orbit, x_0, x_1, ..., x_n.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    xs: Vec<f64>,
    ln_xs: Vec<f64>,
    end: OrbitEnd,
}

impl Orbit {
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// ln x_k, exact even where x_k itself overflowed.
    pub fn ln_xs(&self) -> &[f64] {
        &self.ln_xs
    }

    pub fn end(&self) -> OrbitEnd {
        self.end
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn escaped(&self) -> bool {
        self.end == OrbitEnd::Escaped
    }

    /// First index k with x_k <= x_{k-1}.
    pub fn break_step(&self) -> Option<usize> {
        (self.end == OrbitEnd::Broken).then(|| self.xs.len() - 1)
    }

    /// Largest k with x_0 < x_1 < ... < x_k.
    pub fn monotone_prefix(&self) -> usize {
        match self.end {
            OrbitEnd::Broken => self.xs.len() - 2,
            _ => self.xs.len() - 1,
        }
    }

    /// z_k = x_k - x_{k-1} for k >= 1.
    pub fn increments(&self) -> Vec<f64> {
        self.xs.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Relative residuals |f(x_{k-1}) + x_{k+1} f'(x_k)| / f(x_{k-1}) for each generated point.
    pub fn residuals(&self, d: &TailDistribution) -> Vec<f64> {
        (1..self.xs.len() - 1)
            .map(|k| {
                let (xp, xc, xn) = (self.xs[k - 1], self.xs[k], self.xs[k + 1]);
                let direct = (|| {
                    let fp = d.tail(xp).ok()?;
                    let fpc = d.tail_derivative(xc).ok()?;
                    let r = (fp + xn * fpc) / fp;
                    (fp.is_normal() && fpc.is_normal() && r.is_finite()).then_some(r.abs())
                })();
                direct.unwrap_or_else(|| {
                    let u =
                        self.ln_xs[k + 1] + d.ln_neg_derivative(xc, self.ln_xs[k]) - d.ln_tail(xp, self.ln_xs[k - 1]);
                    u.exp_m1().abs()
                })
            })
            .collect()
    }
}

pub(crate) fn ln_point(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        x.ln()
    }
}

/// Applies the map `steps` times from (x_prev, x_cur) with no stopping rule.
/// Returns x and ln x for x_prev, x_cur and every image.
pub fn iterate(d: &TailDistribution, x_prev: f64, x_cur: f64, steps: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = vec![x_prev, x_cur];
    let mut us = vec![ln_point(x_prev), ln_point(x_cur)];
    for k in 1..=steps {
        let (x, u) = next_point(d, (xs[k - 1], us[k - 1]), (xs[k], us[k]))?;
        xs.push(x);
        us.push(u);
    }
    Ok((xs, us))
}

/// Next turning point after (x_{k-1}, x_k) with their logs; (x, ln x).
pub(crate) fn next_point(d: &TailDistribution, prev: (f64, f64), cur: (f64, f64)) -> Result<(f64, f64)> {
    let (xp, up) = prev;
    let (xc, uc) = cur;
    if xc.is_finite() {
        let fp = d.tail(xp)?;
        let fpc = d.tail_derivative(xc).map_err(|e| singular("orbit", xc, e))?;
        let value = -fp / fpc;
        // subnormal inputs have already lost digits
        if fp.is_normal() && fpc.is_normal() && value.is_normal() && value > 0.0 {
            return Ok((value, value.ln()));
        }
    }
    let ln_neg = d.ln_neg_derivative(xc, uc);
    if ln_neg == f64::NEG_INFINITY {
        return Err(Error::SingularStep { op: "orbit", at: xc });
    }
    let u = d.ln_tail(xp, up) - ln_neg;
    if u.is_nan() {
        return Err(Error::SingularStep { op: "orbit", at: xc });
    }
    Ok((u.exp(), u))
}

/// True once (x_{k-1}, x_k) lies in a set that the map sends into itself and
/// on which every step is increasing.
fn escape_certificate(d: &TailDistribution, xp: f64, xc: f64) -> bool {
    if xc > OVERFLOW_GUARD {
        return true;
    }
    match *d {
        // {z >= max(2, 2 ln y)} is forward invariant: Y = e^z >= y^2 and e^z - y >= 2z
        TailDistribution::Exponential => {
            let z = xc - xp;
            z >= 2.0 && z >= 2.0 * xc.ln()
        }
        // {x >= 1.5, x^2 - x_prev^2 >= ln(4 x^4)} is forward invariant
        TailDistribution::GaussianOneSided => xc >= 1.5 && xc * xc - xp * xp >= (4.0 * xc.powi(4)).ln(),
        // the ratio map r -> r^alpha / alpha is increasing with fixed point r*
        TailDistribution::Pareto { alpha } => xp >= 1.0 && xc >= pareto_invariant_ratio(alpha) * xp,
        TailDistribution::SqrtSingular => xc >= 1.0,
    }
}

/// Iterates the recursion from (x_{k-1}, x_k) = (x_prev, x_cur) up to index `horizon`.
///
/// Never fails: a singular step ends the orbit with [`OrbitEnd::Singular`].
pub fn trace_orbit(d: &TailDistribution, x_prev: f64, x_cur: f64, horizon: usize) -> Orbit {
    let mut xs = vec![x_prev, x_cur];
    let mut ln_xs = vec![ln_point(x_prev), ln_point(x_cur)];
    let end = loop {
        let k = xs.len() - 1;
        let (xp, xc) = (xs[k - 1], xs[k]);
        if !(xc > xp) {
            break OrbitEnd::Broken;
        }
        if escape_certificate(d, xp, xc) {
            break OrbitEnd::Escaped;
        }
        if k >= horizon {
            break OrbitEnd::Horizon;
        }
        match next_point(d, (xp, ln_xs[k - 1]), (xc, ln_xs[k])) {
            Ok((x, u)) => {
                xs.push(x);
                ln_xs.push(u);
            }
            Err(_) => break OrbitEnd::Singular,
        }
    };
    Orbit { xs, ln_xs, end }
}

/// Orbit from x_0 = 0 and x_1; a singular step is an error.
pub fn orbit(d: &TailDistribution, x1: f64, horizon: usize) -> Result<Orbit> {
    if !(x1 > 0.0) {
        return Err(Error::Domain {
            op: "orbit",
            value: x1,
            detail: "x1 must be positive",
        });
    }
    let o = trace_orbit(d, 0.0, x1, horizon);
    if o.end == OrbitEnd::Singular {
        return Err(Error::SingularStep {
            op: "orbit",
            at: o.xs[o.xs.len() - 1],
        });
    }
    Ok(o)
}

/// Stationary structure of the map.
#[derive(Debug, Clone, PartialEq)]
pub enum FixedPoint {
    /// A fixed point in standard coordinates with the eigenvalues of the differential there.
    Point {
        point: PhasePoint,
        eigenvalues: [Complex64; 2],
    },
    /// The ray x_{k+1}/x_k = ratio is invariant (scale-free tails have no fixed point).
    InvariantRay { ratio: f64 },
}

impl FixedPoint {
    /// Both eigenvalues on the unit circle and off the real axis.
    pub fn is_elliptic(&self, tol: f64) -> bool {
        match self {
            FixedPoint::Point { eigenvalues, .. } => {
                eigenvalues.iter().all(|l| (l.norm() - 1.0).abs() <= tol && l.im != 0.0)
            }
            FixedPoint::InvariantRay { .. } => false,
        }
    }
}

/// Fixed points x_{k-1} = x_k = x*, i.e. the roots of f(x) + x f'(x) = 0.
pub fn fixed_points(d: &TailDistribution) -> Result<Vec<FixedPoint>> {
    let x_star = match *d {
        TailDistribution::Exponential => 1.0,
        TailDistribution::GaussianOneSided => std::f64::consts::FRAC_1_SQRT_2,
        TailDistribution::SqrtSingular => 4.0 / 9.0,
        TailDistribution::Pareto { alpha } => {
            return Ok(vec![FixedPoint::InvariantRay {
                ratio: pareto_invariant_ratio(alpha),
            }])
        }
    };
    let s = d.tail(x_star)?;
    let eigenvalues = eigenvalues_2x2(jacobian_sy(d, (s, x_star))?);
    Ok(vec![FixedPoint::Point {
        point: PhasePoint::sy(s, x_star),
        eigenvalues,
    }])
}

/// r* = alpha^{1/(alpha-1)}.
pub fn pareto_invariant_ratio(alpha: f64) -> f64 {
    alpha.powf(1.0 / (alpha - 1.0))
}

/// Ratios r_k = x_k / x_{k-1} of a Pareto orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioOrbit {
    pub ratios: Vec<f64>,
    /// Stopped early because a ratio passed the overflow guard.
    pub overflowed: bool,
}

/// r_{k+1} = r_k^alpha / alpha, up to `n` terms.
pub fn pareto_ratio_orbit(alpha: f64, r1: f64, n: usize) -> Result<RatioOrbit> {
    if !(alpha > 1.0) || !(r1 > 0.0) {
        return Err(Error::invalid(
            "pareto_ratio_orbit",
            format!("need alpha > 1 and r1 > 0, got alpha = {alpha}, r1 = {r1}"),
        ));
    }
    let mut ratios = Vec::with_capacity(n);
    let mut r = r1;
    for _ in 0..n {
        if r > OVERFLOW_GUARD {
            return Ok(RatioOrbit {
                ratios,
                overflowed: true,
            });
        }
        ratios.push(r);
        r = r.powf(alpha) / alpha;
    }
    Ok(RatioOrbit {
        ratios,
        overflowed: false,
    })
}

/// Closed-form optimum for the Pareto tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoOptimum {
    pub alpha: f64,
    pub x1: f64,
    pub cost: f64,
}

impl ParetoOptimum {
    /// Turning point x_k = alpha^{k/(alpha-1)}.
    pub fn point(&self, k: usize) -> f64 {
        if self.alpha == 2.0 {
            return 2f64.powi(k as i32);
        }
        self.alpha.powf(k as f64 / (self.alpha - 1.0))
    }

    pub fn points(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|k| self.point(k)).collect()
    }
}

pub fn pareto_optimum(alpha: f64) -> Result<ParetoOptimum> {
    TailDistribution::pareto(alpha)?;
    Ok(ParetoOptimum {
        alpha,
        x1: pareto_invariant_ratio(alpha),
        cost: alpha.powf(alpha / (alpha - 1.0)) / (alpha - 1.0),
    })
}

/// Cost of the recursion orbit from x_1 >= alpha^{1/(alpha-1)}: each term is 1/alpha of the previous.
pub fn pareto_recursion_cost(alpha: f64, x1: f64) -> f64 {
    x1 * alpha / (alpha - 1.0)
}

const BECK: BeckNormal = BeckNormal;

/// Two-sided Gaussian search: (x_n, y_n) -> (x_{n+1}, y_{n+1}) with y_n = x_n - x_{n-1}.
pub fn beck_forward((x, y): (f64, f64)) -> Result<(f64, f64)> {
    let pdf = BECK.pdf(x);
    if !(pdf > 0.0) {
        return Err(Error::Domain {
            op: "beck_forward",
            value: x,
            detail: "normal density underflows",
        });
    }
    let s2 = std::f64::consts::SQRT_2;
    let next = (erfc(x / s2) + erfc((x - y) / s2)) / (2.0 * pdf) - x;
    Ok((next, next - x))
}

/// Inverse of [`beck_forward`].
pub fn beck_inverse((x, y): (f64, f64)) -> Result<(f64, f64)> {
    let prev = x - y;
    let arg = 2.0 * BECK.pdf(prev) * (prev + x) - erfc(prev / std::f64::consts::SQRT_2);
    let before = erfcinv(arg).map_err(|_| Error::Domain {
        op: "beck_inverse",
        value: arg,
        detail: "erfcinv argument left (0, 2)",
    })? * std::f64::consts::SQRT_2;
    Ok((prev, prev - before))
}

/// |(x_n + x_{n+1}) phi(x_n) - G(x_n) - G(x_{n-1})|
pub fn beck_relation_residual(x_prev: f64, x: f64, x_next: f64) -> f64 {
    ((x + x_next) * BECK.pdf(x) - BECK.tail(x) - BECK.tail(x_prev)).abs()
}

/// Forward iterates of the symmetric seed x_1 = y_1 = t: [(x_1, y_1), (x_2, y_2), ...].
pub fn beck_iterate(t: f64, steps: usize) -> Result<Vec<(f64, f64)>> {
    let mut out = vec![(t, t)];
    for _ in 0..steps {
        let last = out[out.len() - 1];
        out.push(beck_forward(last)?);
    }
    Ok(out)
}

/// [`beck_iterate`] that ends the orbit, without error, once the density at
/// the current point underflows; such orbits have escaped to infinity.
pub fn beck_orbit(t: f64, steps: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(t, t)];
    for _ in 0..steps {
        match beck_forward(out[out.len() - 1]) {
            Ok(p) => out.push(p),
            Err(_) => break,
        }
    }
    out
}

/// Actual turning points (-1)^n x_n of the two-sided search.
pub fn beck_turning_points(iterates: &[(f64, f64)]) -> Vec<f64> {
    iterates
        .iter()
        .enumerate()
        .map(|(i, &(x, _))| if (i + 1) % 2 == 0 { x } else { -x })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::richardson_derivative;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    const EXP: TailDistribution = TailDistribution::Exponential;
    const GAUSS: TailDistribution = TailDistribution::GaussianOneSided;
    const SQRT: TailDistribution = TailDistribution::SqrtSingular;

    fn pareto(a: f64) -> TailDistribution {
        TailDistribution::pareto(a).unwrap()
    }

    #[test]
    fn step_xy_examples() {
        let (a, b) = step_xy(&EXP, (0.0, 1.0)).unwrap();
        assert_eq!(a, 1.0);
        assert_abs_diff_eq!(b, E, epsilon = 1e-15);
        assert_eq!(step_xy(&EXP, (1.0, 1.0)).unwrap(), (1.0, 1.0));
        assert_eq!(step_xy(&pareto(2.0), (1.0, 2.0)).unwrap(), (2.0, 4.0));
    }

    #[test]
    fn step_xy_singular_where_derivative_vanishes() {
        let err = step_xy(&pareto(2.0), (0.0, 0.5)).unwrap_err();
        assert!(matches!(err, Error::SingularStep { op: "step_xy", .. }));
        assert!(step_xy(&SQRT, (0.1, 0.0)).is_err());
    }

    #[test]
    fn standard_exp_examples() {
        let fixed = ((-1f64).exp(), 1.0);
        let image = step_standard_exp(fixed);
        assert_abs_diff_eq!(image.0, fixed.0, epsilon = 1e-16);
        assert_abs_diff_eq!(image.1, fixed.1, epsilon = 1e-15);
        assert_eq!(step_standard_exp((1.0, 0.0)), (1.0, 1.0));
        let generic = step_sy(&EXP, (0.3, 0.8)).unwrap();
        let special = step_standard_exp((0.3, 0.8));
        assert_abs_diff_eq!(generic.0, special.0, epsilon = 1e-15);
        assert_abs_diff_eq!(generic.1, special.1, epsilon = 1e-15);
    }

    #[test]
    fn yz_examples_and_round_trip() {
        assert_eq!(step_yz_exp((1.0, 0.0)), (1.0, 0.0));
        let (y, z) = step_yz_exp((1.0, 1.0));
        assert_abs_diff_eq!(y, E, epsilon = 1e-15);
        assert_abs_diff_eq!(z, E - 1.0, epsilon = 1e-15);
        let back = inv_yz_exp(step_yz_exp((0.3, 2.1))).unwrap();
        assert_abs_diff_eq!(back.0, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(back.1, 2.1, epsilon = 1e-12);
        assert_eq!(inv_yz_exp((0.0, 1.0)).unwrap_err().op(), "inv_yz_exp");
    }

    #[test]
    fn yz_jacobian_matches_differences() {
        assert_eq!(jacobian_yz_exp((3.0, 0.0)), [[0.0, 1.0], [-1.0, 1.0]]);
        let j = jacobian_yz_exp((0.0, 4f64.ln()));
        assert_abs_diff_eq!(j[0][1], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(j[1][1], 4.0, epsilon = 1e-14);
        for &(y, z) in &[(0.5, 0.3), (2.0, 1.7), (10.0, -0.4)] {
            let j = jacobian_yz_exp((y, z));
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            assert_abs_diff_eq!(det, z.exp(), epsilon = 1e-12 * z.exp());
            for (row, comp) in [(0usize, 0usize), (1, 1)] {
                let dy = richardson_derivative(|t| [step_yz_exp((t, z)).0, step_yz_exp((t, z)).1][comp], y, 1e-3);
                let dz = richardson_derivative(|t| [step_yz_exp((y, t)).0, step_yz_exp((y, t)).1][comp], z, 1e-3);
                assert!((j[row][0] - dy).abs() < 1e-6 && (j[row][1] - dz).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sy_jacobian_has_unit_determinant() {
        for d in [EXP, GAUSS, pareto(2.5), SQRT] {
            for &(s, y) in &[(0.2, 0.5), (0.9, 1.3), (0.05, 0.9)] {
                if d.support_end().is_some_and(|e| y >= e) {
                    continue;
                }
                if matches!(d, TailDistribution::Pareto { .. }) && y <= 1.0 {
                    continue;
                }
                let j = jacobian_sy(&d, (s, y)).unwrap();
                assert_abs_diff_eq!(j[0][0] * j[1][1] - j[0][1] * j[1][0], 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn chart_conversions_are_mutually_inverse() {
        for d in [EXP, GAUSS, pareto(2.0)] {
            let p = PhasePoint::xy(1.3, 2.2);
            for chart in [Chart::SY, Chart::YZ] {
                let back = p.convert(&d, chart).unwrap().convert(&d, Chart::XY).unwrap();
                assert_abs_diff_eq!(back.a, p.a, epsilon = 1e-12);
                assert_abs_diff_eq!(back.b, p.b, epsilon = 1e-12);
            }
        }
        let fp = PhasePoint::sy((-1f64).exp(), 1.0).convert(&EXP, Chart::YZ).unwrap();
        assert_abs_diff_eq!(fp.a, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fp.b, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn stepping_commutes_with_chart_conversion() {
        for d in [EXP, GAUSS, pareto(3.0)] {
            let p = PhasePoint::xy(1.2, 1.9);
            let stepped = p.step(&d).unwrap();
            for chart in [Chart::SY, Chart::YZ] {
                let other = p.convert(&d, chart).unwrap().step(&d).unwrap();
                let want = stepped.convert(&d, chart).unwrap();
                assert!((other.a - want.a).abs() <= 1e-10 * want.a.abs().max(1.0));
                assert!((other.b - want.b).abs() <= 1e-10 * want.b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn exponential_orbit_from_one() {
        let o = orbit(&EXP, 1.0, 30).unwrap();
        let xs = o.xs();
        assert_eq!(xs[0], 0.0);
        assert_eq!(xs[1], 1.0);
        assert_abs_diff_eq!(xs[2], E, epsilon = 1e-15);
        assert_abs_diff_eq!(xs[3], (E - 1.0).exp(), epsilon = 1e-13);
        assert!(o.escaped());
        assert_eq!(o.break_step(), None);
    }

    #[test]
    fn exponential_orbit_in_window_breaks() {
        let o = orbit(&EXP, 0.5, 500).unwrap();
        assert_eq!(o.end(), OrbitEnd::Broken);
        let k = o.break_step().unwrap();
        assert!(o.xs()[k] <= o.xs()[k - 1]);
        assert_eq!(o.monotone_prefix(), k - 1);
    }

    #[test]
    fn pareto_doubling_orbit_is_exact() {
        let o = orbit(&pareto(2.0), 2.0, 40).unwrap();
        for (k, &x) in o.xs().iter().enumerate() {
            assert_eq!(x, 2f64.powi(k as i32) * if k == 0 { 0.0 } else { 1.0 });
        }
        let o = trace_orbit(&pareto(2.0), 1.0, 2.0, 40);
        for (k, &x) in o.xs().iter().enumerate() {
            assert_eq!(x, 2f64.powi(k as i32));
        }
    }

    #[test]
    fn orbit_rejects_non_positive_start_and_reports_singularity() {
        assert!(orbit(&EXP, 0.0, 10).is_err());
        let err = orbit(&pareto(2.0), 0.5, 10).unwrap_err();
        assert!(matches!(err, Error::SingularStep { .. }));
    }

    #[test]
    fn log_domain_steps_past_underflow() {
        // f(x) and f'(x) both underflow near x = 800 but the ratio is e^7
        let (x, u) = next_point(&EXP, (793.0, 793f64.ln()), (800.0, 800f64.ln())).unwrap();
        assert_abs_diff_eq!(u, 7.0, epsilon = 1e-10);
        assert_abs_diff_eq!(x, 7f64.exp(), epsilon = 1e-8);
        let (x, _) = next_point(&GAUSS, (26.0, 26f64.ln()), (27.0, 27f64.ln())).unwrap();
        assert_abs_diff_eq!(x, (53f64).exp() / 54.0, epsilon = 1e-12 * x);
    }

    #[test]
    fn residuals_are_small_along_orbits() {
        for (d, x1) in [(EXP, 0.9), (EXP, 0.5), (GAUSS, 1.0), (pareto(2.5), 2.0), (SQRT, 0.2)] {
            let o = orbit(&d, x1, 200).unwrap();
            for r in o.residuals(&d) {
                assert!(r <= 1e-10, "{d} from {x1}: {r:e}");
            }
        }
    }

    #[test]
    fn escape_certificates_are_forward_invariant() {
        // start just inside each certified set and check many further steps stay increasing
        let cases = [
            (EXP, 0.0, 3.0),
            (GAUSS, 1.0, 2.5),
            (pareto(3.0), 1.0, 3f64.sqrt() + 1e-9),
        ];
        for (d, xp, xc) in cases {
            assert!(escape_certificate(&d, xp, xc), "{d}");
            let (mut a, mut b) = ((xp, ln_point(xp)), (xc, ln_point(xc)));
            for _ in 0..6 {
                if b.0 > OVERFLOW_GUARD {
                    break;
                }
                let c = next_point(&d, a, b).unwrap();
                assert!(c.1 > b.1);
                assert!(escape_certificate(&d, b.0, c.0) || c.0 > OVERFLOW_GUARD);
                a = b;
                b = c;
            }
        }
    }

    #[test]
    fn exponential_fixed_point_is_elliptic() {
        let fps = fixed_points(&EXP).unwrap();
        let FixedPoint::Point { point, eigenvalues } = &fps[0] else {
            panic!("expected a point");
        };
        assert_abs_diff_eq!(point.a, (-1f64).exp(), epsilon = 1e-16);
        assert_eq!(point.b, 1.0);
        for l in eigenvalues {
            assert_abs_diff_eq!(l.re, 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(l.im.abs(), 3f64.sqrt() / 2.0, epsilon = 1e-14);
        }
        assert!(fps[0].is_elliptic(1e-9));
    }

    #[test]
    fn other_fixed_points_solve_stationarity() {
        for d in [GAUSS, SQRT] {
            let fps = fixed_points(&d).unwrap();
            let FixedPoint::Point { point, .. } = fps[0] else {
                panic!()
            };
            let x = point.b;
            let (_, next) = step_xy(&d, (x, x)).unwrap();
            assert_abs_diff_eq!(next, x, epsilon = 1e-14);
            assert!(fps[0].is_elliptic(1e-12), "{d}");
        }
        assert_eq!(
            fixed_points(&pareto(2.0)).unwrap(),
            vec![FixedPoint::InvariantRay { ratio: 2.0 }]
        );
    }

    #[test]
    fn ratio_orbit_examples() {
        let on = pareto_ratio_orbit(2.0, 2.0, 30).unwrap();
        assert!(on.ratios.iter().all(|&r| r == 2.0));
        let below = pareto_ratio_orbit(2.0, 1.9, 30).unwrap();
        assert!(below.ratios.last().unwrap() < &1e-3);
        let above = pareto_ratio_orbit(2.0, 2.1, 30).unwrap();
        assert!(above.overflowed);
        let w: Vec<f64> = above.ratios.iter().map(|r| r / 2.0).collect();
        for k in 0..w.len() - 1 {
            assert!((w[k + 1] - w[k] * w[k]).abs() <= 1e-12 * w[k + 1]);
        }
        assert!(pareto_ratio_orbit(0.5, 1.0, 3).is_err());
    }

    #[test]
    fn pareto_optimum_examples() {
        let p = pareto_optimum(2.0).unwrap();
        assert_eq!((p.x1, p.cost), (2.0, 4.0));
        assert_eq!(p.points(4), vec![2.0, 4.0, 8.0, 16.0]);
        let p3 = pareto_optimum(3.0).unwrap();
        assert_abs_diff_eq!(p3.x1, 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(p3.cost, 2.598076211353316, epsilon = 1e-14);
        assert_eq!(pareto_recursion_cost(2.0, 3.0), 6.0);
        assert!(pareto_optimum(1.0).is_err());
    }

    #[test]
    fn beck_round_trip_and_relation() {
        let p = (1.0, 0.4);
        let back = beck_inverse(beck_forward(p).unwrap()).unwrap();
        assert_abs_diff_eq!(back.0, p.0, epsilon = 1e-8);
        assert_abs_diff_eq!(back.1, p.1, epsilon = 1e-8);

        let it = beck_iterate(0.5, 1).unwrap();
        let (x1, y1) = it[0];
        let (x2, _) = it[1];
        assert!(beck_relation_residual(x1 - y1, x1, x2) <= 1e-10);
        assert_abs_diff_eq!(BeckNormal.tail(0.0), 0.5, epsilon = 1e-16);
        assert_eq!(beck_turning_points(&[(1.0, 1.0), (2.0, 1.0)]), vec![-1.0, 2.0]);
    }

    #[test]
    fn beck_inverse_reports_domain_exit() {
        let err = beck_inverse((0.0, 5.0)).unwrap_err();
        assert_eq!(err.op(), "beck_inverse");
    }

    #[test]
    fn beck_orbit_stops_at_escape() {
        let o = beck_orbit(0.2, 6);
        assert!(o.len() < 7);
        assert!(o.last().unwrap().0 > 1e10);
        assert!(beck_iterate(0.2, 6).is_err());
        assert_eq!(beck_orbit(1.2, 3), beck_iterate(1.2, 3).unwrap());
    }
}
