//! Optimal plans: the recursion orbit started where the separatrix meets the
//! curve of initial conditions, on whichever side is cheaper.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classification::{classify, linspace, RegionLabel, BOUNDARY_WIDTH};
use crate::distributions::TailDistribution;
use crate::error::{Error, Result};
use crate::numerics::bisect_indicator;
use crate::plan_cost::{approximant, cost_bounds, expected_cost, SearchPlan, DEFAULT_MAX_TERMS};
use crate::recursion::{pareto_invariant_ratio, DEFAULT_HORIZON};
use crate::separatrix::{
    backward_parameters, compute_separatrix, initial_curve_crossings, SeparatrixConfig, SeparatrixKind,
};

/// Scan step for the chaotic witness.
pub const SCAN_STEP: f64 = 1e-2;

/// Required agreement between bisection and backward-extension crossings.
pub const CROSS_CHECK_TOL: f64 = 1e-4;

/// Candidate costs must be summed to this truncation bound.
pub const CANDIDATE_TRUNCATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// A bisected boundary of the chaotic window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBracket {
    pub side: Side,
    pub monotone_end: f64,
    pub chaotic_end: f64,
}

impl BoundaryBracket {
    pub fn width(&self) -> f64 {
        (self.monotone_end - self.chaotic_end).abs()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.monotone_end + self.chaotic_end)
    }

    pub fn label(&self) -> RegionLabel {
        RegionLabel::Boundary {
            tolerance: self.width(),
        }
    }

    fn exact(side: Side, x: f64) -> Self {
        Self {
            side,
            monotone_end: x,
            chaotic_end: x,
        }
    }
}

/// Default search bracket for the chaotic window.
pub fn default_bracket(d: &TailDistribution) -> (f64, f64) {
    match d {
        TailDistribution::Exponential => (0.01, 1.5),
        TailDistribution::Pareto { alpha } => (1.0, 2.0 * pareto_invariant_ratio(*alpha)),
        TailDistribution::GaussianOneSided => (0.01, 3.0),
        TailDistribution::SqrtSingular => (0.005, 0.9),
    }
}

/// Bisects both ends of the chaotic window inside (lo, hi) to `width`.
///
/// Pareto tails have no monotone region to the left; the single boundary is
/// the invariant ray, x_1 = alpha^{1/(alpha-1)}.
pub fn boundary_candidates(
    d: &TailDistribution,
    lo: f64,
    hi: f64,
    horizon: usize,
    width: f64,
) -> Result<Vec<BoundaryBracket>> {
    if let TailDistribution::Pareto { alpha } = d {
        return Ok(vec![BoundaryBracket::exact(
            Side::Right,
            pareto_invariant_ratio(*alpha),
        )]);
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(
            "boundary_candidates",
            format!("bad bracket ({lo}, {hi})"),
        ));
    }
    let monotone = |x: f64| classify(d, x, horizon).is_ok_and(|l| l.is_monotone());
    if !monotone(lo) || !monotone(hi) {
        return Err(Error::invalid(
            "boundary_candidates",
            format!("bracket ends ({lo}, {hi}) must both be monotone"),
        ));
    }
    let n = ((hi - lo) / SCAN_STEP).floor() as usize;
    let scan: Vec<f64> = (0..=n).map(|i| lo + i as f64 * SCAN_STEP).filter(|&x| x < hi).collect();
    let labels: Vec<bool> = scan.par_iter().map(|&x| monotone(x)).collect();
    let first = labels.iter().position(|m| !m);
    let last = labels.iter().rposition(|m| !m);
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::invalid(
            "boundary_candidates",
            format!("no chaotic window found in ({lo}, {hi})"),
        ));
    };
    let (a, b) = bisect_indicator(scan[first - 1], scan[first], width, monotone);
    let left = BoundaryBracket {
        side: Side::Left,
        monotone_end: a,
        chaotic_end: b,
    };
    let right_hi = scan.get(last + 1).copied().unwrap_or(hi);
    let (a, b) = bisect_indicator(scan[last], right_hi, width, |x| !monotone(x));
    let right = BoundaryBracket {
        side: Side::Right,
        monotone_end: b,
        chaotic_end: a,
    };
    Ok(vec![left, right])
}

/// Largest distance from a bisected boundary to the nearest crossing of the
/// backward-extended separatrix with the curve of initial conditions.
/// None for tails without a separatrix construction or without crossings.
pub fn cross_check(d: &TailDistribution, candidates: &[BoundaryBracket]) -> Result<Option<f64>> {
    let Ok(kind) = SeparatrixKind::for_distribution(d) else {
        return Ok(None);
    };
    let curve = compute_separatrix(kind, &SeparatrixConfig::default_for(kind))?;
    let crossings = initial_curve_crossings(&curve, 3, &backward_parameters(&curve, 4000));
    if crossings.is_empty() {
        return Ok(None);
    }
    let worst = candidates
        .iter()
        .map(|c| {
            crossings
                .iter()
                .map(|x| (x.a - c.midpoint()).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(Some(worst))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub side: Side,
    pub x1: f64,
    pub cost: f64,
    pub trunc: f64,
    pub terms: usize,
    pub bracket_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub dist: String,
    pub candidates: Vec<Candidate>,
    pub chosen: usize,
    /// (L, 4L + eps)
    pub bounds: (f64, f64),
    /// Bisection versus backward extension, when available.
    pub cross_check: Option<f64>,
}

impl CostReport {
    pub fn best(&self) -> &Candidate {
        &self.candidates[self.chosen]
    }

    pub fn plan(&self, d: &TailDistribution) -> Result<SearchPlan> {
        SearchPlan::recursion(*d, self.best().x1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub horizon: usize,
    pub width: f64,
    pub bracket: Option<(f64, f64)>,
    pub cross_check: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            width: BOUNDARY_WIDTH,
            bracket: None,
            cross_check: true,
        }
    }
}

fn candidate_cost(d: &TailDistribution, b: &BoundaryBracket) -> Result<Candidate> {
    // the monotone end of the bracket is certified to escape
    let cost = expected_cost(&SearchPlan::recursion(*d, b.monotone_end)?, d, DEFAULT_MAX_TERMS)?;
    if cost.truncation_bound >= CANDIDATE_TRUNCATION {
        return Err(Error::NoConvergence {
            op: "optimal_plan",
            iterations: cost.terms_used,
            residual: cost.truncation_bound,
        });
    }
    Ok(Candidate {
        side: b.side,
        x1: b.monotone_end,
        cost: cost.value,
        trunc: cost.truncation_bound,
        terms: cost.terms_used,
        bracket_width: b.width(),
    })
}

pub fn optimal_plan(d: &TailDistribution, opts: &OptimizeOptions) -> Result<CostReport> {
    let (lo, hi) = opts.bracket.unwrap_or_else(|| default_bracket(d));
    let mut brackets = boundary_candidates(d, lo, hi, opts.horizon, opts.width)?;
    let mut candidates = Vec::with_capacity(brackets.len());
    for b in brackets.iter_mut() {
        let c = match candidate_cost(d, b) {
            Err(Error::NonMonotonePlan { .. }) => {
                // refine once and retry
                let (m, c) = (b.monotone_end, b.chaotic_end);
                let monotone = |x: f64| classify(d, x, 2 * opts.horizon).is_ok_and(|l| l.is_monotone());
                let (a, z) = if m < c {
                    bisect_indicator(m - opts.width, c, 1e-3 * opts.width, monotone)
                } else {
                    let (a, z) = bisect_indicator(c, m + opts.width, 1e-3 * opts.width, |x| !monotone(x));
                    (z, a)
                };
                b.monotone_end = a;
                b.chaotic_end = z;
                candidate_cost(d, b)?
            }
            other => other?,
        };
        candidates.push(c);
    }
    let chosen = candidates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::invalid("optimal_plan", "no candidates"))?;
    let bounds = cost_bounds(d)?;
    let cross = if opts.cross_check {
        cross_check(d, &brackets)?
    } else {
        None
    };
    Ok(CostReport {
        dist: d.to_string(),
        candidates,
        chosen,
        bounds: (bounds.lower, bounds.upper),
        cross_check: cross,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x1: f64,
    #[serde(rename = "EN")]
    pub en: f64,
    pub label: RegionLabel,
}

impl SweepRow {
    pub fn break_step(&self) -> Option<usize> {
        self.label.break_step()
    }
}

/// E^N along the orbit for `points` evenly spaced x1 on [lo, hi]; every point
/// uses exactly N + 1 terms. NaN marks orbits whose terms are undefined.
pub fn cost_sweep(
    d: &TailDistribution,
    lo: f64,
    hi: f64,
    points: usize,
    n_terms: usize,
    horizon: usize,
) -> Result<Vec<SweepRow>> {
    if !(lo > 0.0 && hi >= lo) || points == 0 {
        return Err(Error::invalid(
            "cost_sweep",
            format!("bad range [{lo}, {hi}] with {points} points"),
        ));
    }
    linspace(lo, hi, points)
        .into_par_iter()
        .map(|x1| {
            Ok(SweepRow {
                x1,
                en: approximant(d, x1, n_terms).unwrap_or(f64::NAN),
                label: classify(d, x1, horizon)?,
            })
        })
        .collect()
}

/// True when successive differences of `values` never change sign.
pub fn is_monotone_sequence(values: &[f64]) -> bool {
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    diffs.iter().all(|&d| d > 0.0) || diffs.iter().all(|&d| d < 0.0)
}
