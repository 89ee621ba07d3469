//! The separatrix bounding the region of forever-monotone orbits, built as
//! the fixed point of a contraction on graphs.
//!
//! Exponential tail, chart (y, z): the curve z = phi(y) is invariant under
//! (y, z) -> (e^z, e^z - y). Its image condition gives
//! `Phi(phi)(y) = ln w` with `w - phi(w) = y`.
//!
//! One-sided Gaussian tail, chart (x, y) with y = x_n^2 - x_{n-1}^2: the
//! curve y = h(x) is invariant under (x, y) -> (X, X^2 - x^2), X = e^y / 2x,
//! giving `Phi(h)(x) = ln(2 x z)` with `z^2 - h(z) = x^2`.
//!
//! Graphs are stored as cubic Hermite interpolants whose node slopes are
//! carried through the iteration by implicit differentiation. Beyond the last
//! node an asymptotic expansion takes over.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::TailDistribution;
use crate::error::{Error, Result};
use crate::numerics::{geometric_grid, newton_bisect, regression_slope, HermiteCurve};
use crate::recursion::{inv_yz_exp, step_yz_exp};

const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparatrixKind {
    Exponential,
    GaussianOneSided,
}

impl SeparatrixKind {
    pub fn for_distribution(d: &TailDistribution) -> Result<Self> {
        match d {
            TailDistribution::Exponential => Ok(SeparatrixKind::Exponential),
            TailDistribution::GaussianOneSided => Ok(SeparatrixKind::GaussianOneSided),
            other => Err(Error::invalid(
                "compute_separatrix",
                format!("no separatrix construction for {other}"),
            )),
        }
    }

    /// Starting graph and its slope.
    fn initial(self, y: f64) -> (f64, f64) {
        match self {
            SeparatrixKind::Exponential => (y.ln(), 1.0 / y),
            SeparatrixKind::GaussianOneSided => ((2.0 * y * y).ln(), 2.0 / y),
        }
    }

    /// Asymptotic expansion and its slope, used beyond the last node.
    pub fn tail(self, y: f64) -> (f64, f64) {
        match self {
            SeparatrixKind::Exponential => asymptotic_phi_exp_with_slope(y),
            SeparatrixKind::GaussianOneSided => {
                let l = (2.0 * y * y).ln();
                let y2 = y * y;
                (l + l / (2.0 * y2), 2.0 / y + (1.0 - l) / (y2 * y))
            }
        }
    }

    /// Image of a point of the chart under the map.
    pub fn forward(self, (a, b): (f64, f64)) -> (f64, f64) {
        match self {
            SeparatrixKind::Exponential => step_yz_exp((a, b)),
            SeparatrixKind::GaussianOneSided => {
                let x_next = b.exp() / (2.0 * a);
                (x_next, x_next * x_next - a * a)
            }
        }
    }

    /// Preimage of a point of the chart.
    pub fn inverse(self, (a, b): (f64, f64)) -> Result<(f64, f64)> {
        match self {
            SeparatrixKind::Exponential => inv_yz_exp((a, b)),
            SeparatrixKind::GaussianOneSided => {
                let sq = a * a - b;
                if !(sq > 0.0) || !(a > 0.0) {
                    return Err(Error::Domain {
                        op: "inverse_gauss",
                        value: sq,
                        detail: "preimage needs x^2 > y",
                    });
                }
                let x = sq.sqrt();
                Ok((x, (2.0 * x * a).ln()))
            }
        }
    }

    /// Signed distance to the curve of initial conditions (x_0 = 0):
    /// z - y for the exponential chart, y - x^2 for the Gaussian chart.
    pub fn initial_gap(self, (a, b): (f64, f64)) -> f64 {
        match self {
            SeparatrixKind::Exponential => b - a,
            SeparatrixKind::GaussianOneSided => b - a * a,
        }
    }

    /// One node of Phi(phi): new value and slope.
    fn solve_node<F>(self, y: f64, phi: &F) -> Result<(f64, f64)>
    where
        F: Fn(f64) -> (f64, f64),
    {
        let (py, _) = phi(y);
        let hi = y + py + 2.0;
        match self {
            SeparatrixKind::Exponential => {
                let w = newton_bisect(
                    "contraction_step",
                    |w| {
                        let (p, dp) = phi(w);
                        (w - p - y, 1.0 - dp)
                    },
                    y,
                    hi,
                    y + py,
                    NEWTON_TOL * y.max(1.0),
                    NEWTON_MAX_ITER,
                )
                .map_err(|e| node_error(e, y))?;
                let (_, dp) = phi(w);
                Ok((w.ln(), 1.0 / (w * (1.0 - dp))))
            }
            SeparatrixKind::GaussianOneSided => {
                let x2 = y * y;
                let z = newton_bisect(
                    "contraction_step",
                    |z| {
                        let (p, dp) = phi(z);
                        (z * z - p - x2, 2.0 * z - dp)
                    },
                    y,
                    hi,
                    (x2 + py).sqrt(),
                    NEWTON_TOL * x2.max(1.0),
                    NEWTON_MAX_ITER,
                )
                .map_err(|e| node_error(e, y))?;
                let (_, dp) = phi(z);
                let dz = 2.0 * y / (2.0 * z - dp);
                Ok(((2.0 * y * z).ln(), 1.0 / y + dz / z))
            }
        }
    }
}

fn node_error(e: Error, y: f64) -> Error {
    match e {
        Error::NoConvergence {
            iterations, residual, ..
        } => Error::Divergence {
            op: "contraction_step",
            detail: format!("node y = {y}: no convergence after {iterations} iterations, residual {residual:e}"),
        },
        other => other,
    }
}

/// ln y + ln y / y + (2 ln y - ln^2 y / 2) / y^2, error O(ln^3 y / y^3).
pub fn asymptotic_phi_exp(y: f64) -> f64 {
    asymptotic_phi_exp_with_slope(y).0
}

fn asymptotic_phi_exp_with_slope(y: f64) -> (f64, f64) {
    let l = y.ln();
    let q2 = 2.0 * l - 0.5 * l * l;
    let value = l + l / y + q2 / (y * y);
    let slope = 1.0 / y + (1.0 - l) / (y * y) + (2.0 - 5.0 * l + l * l) / (y * y * y);
    (value, slope)
}

/// Construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixConfig {
    pub y0: f64,
    pub y_max: f64,
    pub nodes: usize,
    pub tol: f64,
}

impl SeparatrixConfig {
    pub fn default_for(kind: SeparatrixKind) -> Self {
        match kind {
            SeparatrixKind::Exponential => Self {
                y0: 4.0,
                y_max: 1e4,
                nodes: 2000,
                tol: 1e-10,
            },
            SeparatrixKind::GaussianOneSided => Self {
                y0: 1.0,
                y_max: 1e3,
                nodes: 2000,
                tol: 1e-10,
            },
        }
    }

    /// Proven contraction factor on [y0, inf).
    pub fn contraction_factor(&self, kind: SeparatrixKind) -> f64 {
        match kind {
            SeparatrixKind::Exponential => 2.0 / self.y0,
            SeparatrixKind::GaussianOneSided => 1.0 / 3.0,
        }
    }

    fn validate(&self, kind: SeparatrixKind) -> Result<()> {
        let min = match kind {
            SeparatrixKind::Exponential => 4.0,
            SeparatrixKind::GaussianOneSided => 1.0,
        };
        if !(self.y0 >= min) {
            return Err(Error::Domain {
                op: "compute_separatrix",
                value: self.y0,
                detail: "left end below the contraction threshold",
            });
        }
        if !(self.y_max > self.y0) || self.nodes < 4 || !(self.tol > 0.0) {
            return Err(Error::invalid(
                "compute_separatrix",
                format!("bad configuration {self:?}"),
            ));
        }
        Ok(())
    }
}

/// A converged separatrix graph.
#[derive(Debug, Clone)]
pub struct SeparatrixCurve {
    kind: SeparatrixKind,
    curve: HermiteCurve,
    changes: Vec<f64>,
    residual_sup: f64,
}

impl SeparatrixCurve {
    pub fn kind(&self) -> SeparatrixKind {
        self.kind
    }

    pub fn nodes(&self) -> &[f64] {
        self.curve.nodes()
    }

    pub fn values(&self) -> &[f64] {
        self.curve.values()
    }

    pub fn slopes(&self) -> &[f64] {
        self.curve.slopes()
    }

    pub fn y_min(&self) -> f64 {
        self.curve.x_min()
    }

    pub fn y_max(&self) -> f64 {
        self.curve.x_max()
    }

    /// Sup-norm change of each sweep.
    pub fn changes(&self) -> &[f64] {
        &self.changes
    }

    pub fn iterations(&self) -> usize {
        self.changes.len()
    }

    /// Largest functional-equation residual over the nodes where it is defined.
    pub fn residual_sup(&self) -> f64 {
        self.residual_sup
    }

    /// Value and slope; the asymptotic tail beyond the last node.
    pub fn phi_with_slope(&self, y: f64) -> (f64, f64) {
        eval_graph(self.kind, &self.curve, y)
    }

    pub fn phi(&self, y: f64) -> f64 {
        self.phi_with_slope(y).0
    }

    /// |phi(a') - b'| where (a', b') is the preimage of (y, phi(y)),
    /// if the preimage lies on the stored range.
    pub fn residual(&self, y: f64) -> Option<f64> {
        let (a, b) = self.kind.inverse((y, self.phi(y))).ok()?;
        (a >= self.y_min()).then(|| (self.phi(a) - b).abs())
    }

    /// |Z - phi(Y)| for the image (Y, Z) of (y, phi(y)).
    pub fn invariance_defect(&self, y: f64) -> f64 {
        let (a, b) = self.kind.forward((y, self.phi(y)));
        (self.phi(a) - b).abs()
    }
}

fn eval_graph(kind: SeparatrixKind, curve: &HermiteCurve, y: f64) -> (f64, f64) {
    if y > curve.x_max() {
        kind.tail(y)
    } else {
        curve.eval_with_slope(y)
    }
}

/// One application of the contraction on the given nodes.
pub fn contraction_step(kind: SeparatrixKind, current: &HermiteCurve, grid: &[f64]) -> Result<HermiteCurve> {
    let phi = |y: f64| eval_graph(kind, current, y);
    let solved: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&y| kind.solve_node(y, &phi))
        .collect::<Result<_>>()?;
    let (values, slopes) = solved.into_iter().unzip();
    Ok(HermiteCurve::monotone(grid.to_vec(), values, slopes))
}

/// The starting graph sampled on `grid`.
pub fn initial_curve(kind: SeparatrixKind, grid: &[f64]) -> HermiteCurve {
    let (values, slopes) = grid.iter().map(|&y| kind.initial(y)).unzip();
    HermiteCurve::monotone(grid.to_vec(), values, slopes)
}

/// Iterates the contraction from the starting graph until the sup-norm change
/// drops below `tol`. Two consecutive increases of the change are reported as
/// divergence.
pub fn compute_separatrix(kind: SeparatrixKind, config: &SeparatrixConfig) -> Result<SeparatrixCurve> {
    config.validate(kind)?;
    let grid = geometric_grid(config.y0, config.y_max, config.nodes);
    let factor = config.contraction_factor(kind);
    let max_iter = (config.tol.ln() / factor.ln()).ceil() as usize + 10;
    let mut curve = initial_curve(kind, &grid);
    let mut changes: Vec<f64> = Vec::new();
    let mut rising = 0;
    loop {
        let next = contraction_step(kind, &curve, &grid)?;
        let change = next
            .values()
            .iter()
            .zip(curve.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if changes.last().is_some_and(|&last| change > last) {
            rising += 1;
        } else {
            rising = 0;
        }
        changes.push(change);
        curve = next;
        if rising >= 2 {
            return Err(Error::Divergence {
                op: "compute_separatrix",
                detail: format!("sup-norm change grew twice in a row, now {change:e}"),
            });
        }
        if change < config.tol {
            break;
        }
        if changes.len() >= max_iter {
            return Err(Error::NoConvergence {
                op: "compute_separatrix",
                iterations: changes.len(),
                residual: change,
            });
        }
    }
    let mut out = SeparatrixCurve {
        kind,
        curve,
        changes,
        residual_sup: 0.0,
    };
    out.residual_sup = out.nodes().iter().filter_map(|&y| out.residual(y)).fold(0.0, f64::max);
    Ok(out)
}

/// Solution t of t - ln t = x with t >= 1, for x >= 1.
pub fn t_of_x(x: f64) -> Result<f64> {
    if !(x >= 1.0) {
        return Err(Error::Domain {
            op: "t_of_x",
            value: x,
            detail: "x must be at least 1",
        });
    }
    newton_bisect(
        "t_of_x",
        |t| (t - t.ln() - x, 1.0 - 1.0 / t),
        1.0,
        2.0 * x + 2.0,
        x + x.ln(),
        NEWTON_TOL * x,
        NEWTON_MAX_ITER,
    )
}

/// Images of the stored graph under the inverse map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    /// Number of inverse steps applied.
    pub step: usize,
    /// (curve parameter, a, b) triples in parameter order.
    pub points: Vec<(f64, f64, f64)>,
}

/// R^{-level} of the graph point over parameter p.
pub fn backward_point(curve: &SeparatrixCurve, p: f64, level: usize) -> Result<(f64, f64)> {
    let mut q = (p, curve.phi(p));
    for _ in 0..level {
        q = curve.kind.inverse(q)?;
    }
    Ok(q)
}

/// Default parameter sampling for backward extension: the first two decades of the curve.
pub fn backward_parameters(curve: &SeparatrixCurve, samples: usize) -> Vec<f64> {
    let hi = (curve.y_min() * 100.0).min(curve.y_max());
    geometric_grid(curve.y_min(), hi, samples)
}

/// Applies the inverse map to `params` sampled on the curve `steps` times.
/// Each polyline stops at the first parameter whose preimage is undefined.
pub fn extend_backward(curve: &SeparatrixCurve, steps: usize, params: &[f64]) -> Vec<Polyline> {
    let mut current: Vec<(f64, (f64, f64))> = params.iter().map(|&p| (p, (p, curve.phi(p)))).collect();
    let mut out = Vec::with_capacity(steps);
    for step in 1..=steps {
        let mut next = Vec::with_capacity(current.len());
        for &(p, q) in &current {
            match curve.kind.inverse(q) {
                Ok(r) if r.0.is_finite() && r.1.is_finite() => next.push((p, r)),
                _ => break,
            }
        }
        out.push(Polyline {
            step,
            points: next.iter().map(|&(p, (a, b))| (p, a, b)).collect(),
        });
        current = next;
    }
    out
}

/// Deepest level used by [`extended_phi`].
pub const EXTENSION_LEVELS: usize = 3;

/// The separatrix continued below its left end through backward images:
/// the first level k whose image reaches abscissa `y` supplies the value.
/// None when no image up to [`EXTENSION_LEVELS`] reaches `y`.
pub fn extended_phi(curve: &SeparatrixCurve, y: f64) -> Option<f64> {
    if y >= curve.y_min() {
        return Some(curve.phi(y));
    }
    let p0 = curve.y_min();
    for level in 1..=EXTENSION_LEVELS {
        let a_of = |p: f64| backward_point(curve, p, level).ok().map(|q| q.0);
        let left = a_of(p0)?;
        if y < left {
            continue;
        }
        let mut hi = 2.0 * p0;
        while a_of(hi).is_some_and(|a| a < y) {
            hi *= 2.0;
            if hi > curve.y_max() {
                return None;
            }
        }
        let (mut lo, mut hi) = (p0, hi);
        while hi - lo > 1e-15 * hi {
            let mid = 0.5 * (lo + hi);
            match a_of(mid) {
                Some(a) if a < y => lo = mid,
                _ => hi = mid,
            }
        }
        return backward_point(curve, 0.5 * (lo + hi), level).ok().map(|q| q.1);
    }
    None
}

/// Where a backward image of the curve meets a target curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub level: usize,
    pub param: f64,
    pub a: f64,
    pub b: f64,
}

/// Sign changes of `gap` along R^{-level}(p, phi(p)), refined by bisection in p.
fn crossings_with<G>(curve: &SeparatrixCurve, levels: usize, params: &[f64], gap: G) -> Vec<Crossing>
where
    G: Fn((f64, f64)) -> f64,
{
    let mut out = Vec::new();
    for level in 1..=levels {
        let eval = |p: f64| backward_point(curve, p, level).ok().map(|q| (gap(q), q));
        let mut prev: Option<(f64, f64)> = None;
        for &p in params {
            let Some((g, _)) = eval(p) else {
                prev = None;
                continue;
            };
            if let Some((pp, gp)) = prev {
                if gp == 0.0 || gp.signum() != g.signum() {
                    let (mut lo, mut hi, mut glo) = (pp, p, gp);
                    while hi - lo > 1e-14 * hi {
                        let mid = 0.5 * (lo + hi);
                        match eval(mid) {
                            Some((gm, _)) if gm.signum() == glo.signum() && gm != 0.0 => {
                                lo = mid;
                                glo = gm;
                            }
                            Some(_) => hi = mid,
                            None => break,
                        }
                    }
                    let p_star = 0.5 * (lo + hi);
                    if let Some((_, q)) = eval(p_star) {
                        out.push(Crossing {
                            level,
                            param: p_star,
                            a: q.0,
                            b: q.1,
                        });
                    }
                }
            }
            prev = Some((p, g));
        }
    }
    out
}

/// Crossings of the backward images with the curve of initial conditions.
pub fn initial_curve_crossings(curve: &SeparatrixCurve, levels: usize, params: &[f64]) -> Vec<Crossing> {
    let kind = curve.kind;
    crossings_with(curve, levels, params, move |q| kind.initial_gap(q))
}

/// Crossings of the backward images with the axis b = 0.
pub fn axis_crossings(curve: &SeparatrixCurve, levels: usize, params: &[f64]) -> Vec<Crossing> {
    crossings_with(curve, levels, params, |q| q.1)
}

/// Orbit of the map restricted to the exponential separatrix, with growth diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// x_0 = x_start, x_{k+1} = e^{phi(x_k)}.
    pub xs: Vec<f64>,
    /// |x_{k+1} - x_k - ln x_k| x_k / ln x_k.
    pub scaled_defects: Vec<f64>,
    /// Largest scaled defect: the measured constant C.
    pub measured_c: f64,
    /// r_{n+1} - r_n for r_n = x_n - n (ln n + ln ln n), n >= 3.
    pub increments: Vec<(usize, f64)>,
}

impl GrowthReport {
    /// Least-squares slope of the increments over n in [lo, hi].
    pub fn increment_trend(&self, lo: usize, hi: usize) -> f64 {
        let (ns, rs): (Vec<f64>, Vec<f64>) = self
            .increments
            .iter()
            .filter(|(n, _)| (lo..=hi).contains(n))
            .map(|&(n, r)| (n as f64, r))
            .unzip();
        regression_slope(&ns, &rs)
    }
}

pub fn restricted_map_growth(curve: &SeparatrixCurve, x_start: f64, n: usize) -> Result<GrowthReport> {
    if curve.kind != SeparatrixKind::Exponential {
        return Err(Error::invalid(
            "restricted_map_growth",
            "defined for the exponential separatrix",
        ));
    }
    if !(x_start >= curve.y_min()) {
        return Err(Error::Domain {
            op: "restricted_map_growth",
            value: x_start,
            detail: "start must lie on the stored curve",
        });
    }
    let mut xs = vec![x_start];
    for _ in 0..n {
        let x = xs[xs.len() - 1];
        xs.push(curve.phi(x).exp());
    }
    let scaled_defects: Vec<f64> = xs
        .windows(2)
        .map(|w| {
            let l = w[0].ln();
            (w[1] - w[0] - l).abs() * w[0] / l
        })
        .collect();
    let measured_c = scaled_defects.iter().copied().fold(0.0, f64::max);
    let r = |k: usize| {
        let nf = k as f64;
        xs[k] - nf * (nf.ln() + nf.ln().ln())
    };
    let increments = (3..xs.len() - 1).map(|k| (k, r(k + 1) - r(k))).collect();
    Ok(GrowthReport {
        xs,
        scaled_defects,
        measured_c,
        increments,
    })
}
