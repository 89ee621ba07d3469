//! Labels initial conditions by the fate of their recursion orbit, and checks
//! the cone field and the stable region of the exponential map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::TailDistribution;
use crate::error::{Error, Result};
use crate::numerics::bisect_indicator;
use crate::recursion::{jacobian_yz_exp, step_yz_exp, trace_orbit, OrbitEnd};
use crate::separatrix::{extended_phi, SeparatrixCurve};

/// Bracket width at which a bisected boundary is reported.
pub const BOUNDARY_WIDTH: f64 = 1e-9;

/// Slack of the closed cone.
pub const CONE_TOL: f64 = 1e-12;

/// Slack of the stable-region membership test near the interpolated curve.
pub const REGION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionLabel {
    Monotone,
    /// `break_step` is None when the horizon ran out without a certificate.
    Chaotic {
        break_step: Option<usize>,
    },
    Boundary {
        tolerance: f64,
    },
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::Monotone => "monotone",
            RegionLabel::Chaotic { .. } => "chaotic",
            RegionLabel::Boundary { .. } => "boundary",
        }
    }

    pub fn is_monotone(&self) -> bool {
        matches!(self, RegionLabel::Monotone)
    }

    pub fn break_step(&self) -> Option<usize> {
        match self {
            RegionLabel::Chaotic { break_step } => *break_step,
            _ => None,
        }
    }
}

/// Largest k <= horizon with 0 = x_0 < x_1 < ... < x_k; `horizon` when the
/// escape certificate fires. A singular step counts as a break.
pub fn monotone_steps(d: &TailDistribution, x1: f64, horizon: usize) -> Result<usize> {
    check_start(x1, "monotone_steps")?;
    let orbit = trace_orbit(d, 0.0, x1, horizon);
    Ok(match orbit.end() {
        OrbitEnd::Escaped => horizon,
        _ => orbit.monotone_prefix().min(horizon),
    })
}

pub fn classify(d: &TailDistribution, x1: f64, horizon: usize) -> Result<RegionLabel> {
    check_start(x1, "classify")?;
    let orbit = trace_orbit(d, 0.0, x1, horizon);
    Ok(match orbit.end() {
        OrbitEnd::Escaped => RegionLabel::Monotone,
        OrbitEnd::Broken | OrbitEnd::Singular => RegionLabel::Chaotic {
            break_step: Some(orbit.monotone_prefix()),
        },
        OrbitEnd::Horizon => RegionLabel::Chaotic { break_step: None },
    })
}

fn check_start(x1: f64, op: &'static str) -> Result<()> {
    if x1 > 0.0 && x1.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            op,
            value: x1,
            detail: "x1 must be positive",
        })
    }
}

/// Bisects the monotone/chaotic indicator between a point of each kind.
pub fn locate_boundary(
    d: &TailDistribution,
    monotone_end: f64,
    chaotic_end: f64,
    horizon: usize,
    width: f64,
) -> Result<(f64, RegionLabel)> {
    let is_monotone = |x: f64| classify(d, x, horizon).is_ok_and(|l| l.is_monotone());
    if !is_monotone(monotone_end) || is_monotone(chaotic_end) {
        return Err(Error::invalid(
            "locate_boundary",
            format!("bracket ({monotone_end}, {chaotic_end}) does not straddle a boundary"),
        ));
    }
    // bisect_indicator expects pred(lo) true
    let (a, b) = if monotone_end < chaotic_end {
        bisect_indicator(monotone_end, chaotic_end, width, is_monotone)
    } else {
        bisect_indicator(chaotic_end, monotone_end, width, |x| !is_monotone(x))
    };
    Ok((0.5 * (a + b), RegionLabel::Boundary { tolerance: b - a }))
}

/// Constant cone spanned by eta = (1, 2) and xi = (2, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeField {
    pub eta: (f64, f64),
    pub xi: (f64, f64),
}

impl Default for ConeField {
    fn default() -> Self {
        Self {
            eta: (1.0, 2.0),
            xi: (2.0, 1.0),
        }
    }
}

impl ConeField {
    /// Closed cone: a > 0 and b/a between the generator slopes.
    pub fn contains(&self, (a, b): (f64, f64)) -> bool {
        let lo = self.xi.1 / self.xi.0;
        let hi = self.eta.1 / self.eta.0;
        a > 0.0 && b / a >= lo - CONE_TOL && b / a <= hi + CONE_TOL
    }

    pub fn images(&self, (y, z): (f64, f64)) -> ((f64, f64), (f64, f64)) {
        let m = jacobian_yz_exp((y, z));
        let apply = |v: (f64, f64)| (m[0][0] * v.0 + m[0][1] * v.1, m[1][0] * v.0 + m[1][1] * v.1);
        (apply(self.eta), apply(self.xi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeRow {
    pub y: f64,
    pub z: f64,
    pub eta_ok: bool,
    pub xi_ok: bool,
}

impl ConeRow {
    pub fn consistent(&self) -> bool {
        self.eta_ok && self.xi_ok
    }
}

pub fn cone_check(cone: &ConeField, p: (f64, f64)) -> ConeRow {
    let (e, x) = cone.images(p);
    ConeRow {
        y: p.0,
        z: p.1,
        eta_ok: cone.contains(e),
        xi_ok: cone.contains(x),
    }
}

/// Both generator images of the exponential differential stay in the cone.
pub fn cone_consistent(p: (f64, f64)) -> bool {
    cone_check(&ConeField::default(), p).consistent()
}

pub fn cone_report(points: &[(f64, f64)]) -> Vec<ConeRow> {
    let cone = ConeField::default();
    points.iter().map(|&p| cone_check(&cone, p)).collect()
}

/// Lower edge of A = {y >= 0, z >= max(0, phi(y))}; the axis wherever no
/// backward image of the curve reaches.
pub fn region_floor(curve: &SeparatrixCurve, y: f64) -> f64 {
    extended_phi(curve, y).unwrap_or(0.0).max(0.0)
}

pub fn in_region(curve: &SeparatrixCurve, (y, z): (f64, f64), tol: f64) -> bool {
    y >= -tol && z >= region_floor(curve, y) - tol
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RStableReport {
    pub checked: usize,
    /// (point, image) pairs whose image left A.
    pub violations: Vec<((f64, f64), (f64, f64))>,
}

impl RStableReport {
    pub fn is_stable(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Maps every point of A in `points` once and records images outside A.
pub fn r_stable_check(curve: &SeparatrixCurve, points: &[(f64, f64)]) -> RStableReport {
    let violations = points
        .par_iter()
        .filter(|&&p| in_region(curve, p, 0.0))
        .filter_map(|&p| {
            let q = step_yz_exp(p);
            (!in_region(curve, q, REGION_TOL)).then_some((p, q))
        })
        .collect();
    RStableReport {
        checked: points.iter().filter(|&&p| in_region(curve, p, 0.0)).count(),
        violations,
    }
}

/// Uniform y in [0, y_hi], z up to `height` above the floor of A.
pub fn sample_region(curve: &SeparatrixCurve, n: usize, y_hi: f64, height: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let y = rng.random::<f64>() * y_hi;
            let z = region_floor(curve, y) + rng.random::<f64>() * height;
            (y, z)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortraitRow {
    pub x1: f64,
    pub label: RegionLabel,
}

/// Labels `points` evenly spaced x1 values on [lo, hi].
pub fn portrait(d: &TailDistribution, lo: f64, hi: f64, points: usize, horizon: usize) -> Result<Vec<PortraitRow>> {
    if !(lo > 0.0 && hi >= lo) || points == 0 {
        return Err(Error::invalid(
            "portrait",
            format!("bad range [{lo}, {hi}] with {points} points"),
        ));
    }
    linspace(lo, hi, points)
        .into_par_iter()
        .map(|x1| {
            Ok(PortraitRow {
                x1,
                label: classify(d, x1, horizon)?,
            })
        })
        .collect()
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
