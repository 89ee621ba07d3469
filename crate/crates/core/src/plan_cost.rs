//! Search plans and the expected cost E = sum_k x_k f(x_{k-1}), x_0 = 0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::TailDistribution;
use crate::error::{Error, Result};
use crate::recursion::{iterate, ln_point, next_point, OVERFLOW_GUARD};

/// Relative truncation target for cost sums.
pub const TRUNCATION_TOL: f64 = 1e-14;

/// Default cap on the number of cost terms.
pub const DEFAULT_MAX_TERMS: usize = 2000;

/// Offset A of the doubling witness plan.
pub const DOUBLING_OFFSET: f64 = 1e-3;

/// How a plan continues past its stored prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Extension {
    /// The plan ends at its last stored point.
    None,
    /// x_{k+1} = 2 x_k; with an empty prefix x_1 = a.
    Doubling { a: f64 },
    /// Continue with the variational recursion of `dist` from the last two points.
    Recursion { dist: TailDistribution },
}

/// Turning points x_1 < x_2 < ... plus a rule for what follows them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPlan {
    pub points: Vec<f64>,
    pub extension: Extension,
}

fn check_monotone(op: &'static str, points: &[f64]) -> Result<()> {
    let mut last = 0.0;
    for (i, &x) in points.iter().enumerate() {
        if !(x > last) {
            return Err(Error::NonMonotonePlan { op, index: i + 1 });
        }
        last = x;
    }
    Ok(())
}

impl SearchPlan {
    /// Validated plan: points positive and strictly increasing.
    pub fn new(points: Vec<f64>, extension: Extension) -> Result<Self> {
        check_monotone("search_plan", &points)?;
        if let Extension::Doubling { a } = extension {
            if !(a > 0.0) {
                return Err(Error::invalid("search_plan", "doubling offset must be positive"));
            }
        }
        Ok(Self { points, extension })
    }

    /// Stores the points as given, for input to [`prune_plan`].
    pub fn unchecked(points: Vec<f64>, extension: Extension) -> Self {
        Self { points, extension }
    }

    pub fn finite(points: Vec<f64>) -> Result<Self> {
        Self::new(points, Extension::None)
    }

    /// x_k = a 2^{k-1}.
    pub fn doubling(a: f64) -> Result<Self> {
        Self::new(Vec::new(), Extension::Doubling { a })
    }

    /// Recursion orbit of `d` from x_0 = 0 and x_1.
    pub fn recursion(d: TailDistribution, x1: f64) -> Result<Self> {
        Self::new(vec![x1], Extension::Recursion { dist: d })
    }

    /// Lazily generated turning points as (x, ln x).
    pub fn walk(&self) -> PlanWalker<'_> {
        PlanWalker {
            plan: self,
            strict: true,
            k: 0,
            prev: (0.0, f64::NEG_INFINITY),
            cur: (0.0, f64::NEG_INFINITY),
        }
    }
}

/// A turning point with its log; `generated` marks points produced by a
/// recursion extension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanPoint {
    pub x: f64,
    pub ln_x: f64,
    pub generated: bool,
}

/// Iterator over a plan's turning points, prefix first, then the extension.
pub struct PlanWalker<'a> {
    plan: &'a SearchPlan,
    strict: bool,
    k: usize,
    prev: (f64, f64),
    cur: (f64, f64),
}

impl PlanWalker<'_> {
    /// The next point, `None` once a finite plan runs out.
    pub fn next_point(&mut self) -> Result<Option<PlanPoint>> {
        let k = self.k + 1;
        let mut generated = false;
        let next = if let Some(&x) = self.plan.points.get(k - 1) {
            Some((x, ln_point(x)))
        } else {
            match self.plan.extension {
                Extension::None => None,
                Extension::Doubling { a } => Some(if k == 1 {
                    (a, a.ln())
                } else {
                    (2.0 * self.cur.0, self.cur.1 + std::f64::consts::LN_2)
                }),
                Extension::Recursion { dist } => {
                    if k == 1 {
                        return Err(Error::invalid(
                            "plan_walk",
                            "recursion extension needs at least one stored point",
                        ));
                    }
                    let p = next_point(&dist, self.prev, self.cur)?;
                    if self.strict && !(p.1 > self.cur.1) {
                        return Err(Error::NonMonotonePlan {
                            op: "plan_walk",
                            index: k,
                        });
                    }
                    generated = true;
                    Some(p)
                }
            }
        };
        if let Some(p) = next {
            self.k = k;
            self.prev = self.cur;
            self.cur = p;
        }
        Ok(next.map(|(x, ln_x)| PlanPoint { x, ln_x, generated }))
    }
}

/// A cost value with a bound on the neglected remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub value: f64,
    pub truncation_bound: f64,
    pub terms_used: usize,
}

/// One summand x_k f(x_{k-1}) of the cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTerm {
    pub k: usize,
    pub x_k: f64,
    pub f_prev: f64,
    pub term: f64,
}

/// x f(x_prev), via logs when either factor is out of range.
fn cost_term(d: &TailDistribution, (xp, up): (f64, f64), (x, u): (f64, f64)) -> Result<(f64, f64)> {
    let fp = if xp.is_finite() { d.tail(xp)? } else { 0.0 };
    if x.is_finite() && fp.is_normal() {
        let direct = x * fp;
        if direct.is_finite() {
            return Ok((fp, direct));
        }
    }
    let ln_f = d.ln_tail(xp, up);
    if ln_f == f64::NEG_INFINITY {
        return Ok((fp, 0.0));
    }
    let term = (u + ln_f).exp();
    if term.is_nan() {
        return Err(Error::Divergence {
            op: "expected_cost",
            detail: format!("cost term undefined at x = {x:e}"),
        });
    }
    Ok((fp, term))
}

/// Remainder bound after the last summed term.
fn remainder_bound(d: &TailDistribution, x_before_last: f64, last: f64, before: Option<f64>) -> f64 {
    let integral = 4.0 * d.tail_integral(x_before_last);
    let geometric = match before {
        Some(b) if b > 0.0 => {
            let rho = last / b;
            if rho < 1.0 {
                last * rho / (1.0 - rho)
            } else {
                f64::INFINITY
            }
        }
        _ => 0.0,
    };
    integral.max(geometric)
}

/// Sums the cost until the remainder bound is below [`TRUNCATION_TOL`]
/// relative, the plan ends, or `max_terms` terms were used.
///
/// The reported bound is max(4 * integral of f beyond x_{K-1}, geometric tail
/// of the last two terms); it is zero once the plan covers a bounded support.
pub fn expected_cost(plan: &SearchPlan, d: &TailDistribution, max_terms: usize) -> Result<CostEstimate> {
    Ok(cost_with_terms(plan, d, max_terms, false, true)?.0)
}

/// Like [`expected_cost`], also returning the individual terms.
pub fn cost_terms(plan: &SearchPlan, d: &TailDistribution, max_terms: usize) -> Result<(CostEstimate, Vec<CostTerm>)> {
    cost_with_terms(plan, d, max_terms, true, true)
}

fn cost_with_terms(
    plan: &SearchPlan,
    d: &TailDistribution,
    max_terms: usize,
    keep: bool,
    strict: bool,
) -> Result<(CostEstimate, Vec<CostTerm>)> {
    if max_terms == 0 {
        return Err(Error::invalid("expected_cost", "need at least one term"));
    }
    if strict {
        check_monotone("expected_cost", &plan.points)?;
    }
    let end = d.support_end();
    let same_recursion = matches!(plan.extension, Extension::Recursion { dist } if dist == *d);
    let mut walker = plan.walk();
    walker.strict = strict;
    let mut prev: (f64, f64) = (0.0, f64::NEG_INFINITY);
    let mut value = 0.0;
    let mut last_term: Option<f64> = None;
    let mut bound = 4.0 * d.mean();
    let mut used = 0;
    let mut rows = Vec::new();
    while used < max_terms {
        let point = match walker.next_point() {
            Ok(Some(p)) => p,
            Ok(None) => break,
            // the orbit left the representable range; later terms underflow
            Err(Error::SingularStep { .. }) if !prev.0.is_finite() => break,
            Err(e) => return Err(e),
        };
        let cur = (point.x, point.ln_x);
        let (fp, term) = match last_term {
            // x_{k+1} f(x_k) = x_k f(x_{k-1}) / elasticity(x_k) along the orbit
            Some(t) if point.generated && same_recursion && !cur.0.is_finite() => {
                let fp = if prev.0.is_finite() { d.tail(prev.0)? } else { 0.0 };
                (fp, (t.ln() - d.ln_elasticity_at_log(prev.1)).exp())
            }
            _ => cost_term(d, prev, cur)?,
        };
        value += term;
        used += 1;
        if keep {
            rows.push(CostTerm {
                k: used,
                x_k: cur.0,
                f_prev: fp,
                term,
            });
        }
        if end.is_some_and(|e| cur.0 >= e) {
            bound = 0.0;
            break;
        }
        bound = remainder_bound(d, prev.0, term, last_term);
        last_term = Some(term);
        prev = cur;
        if strict && bound <= TRUNCATION_TOL * value.max(1.0) {
            break;
        }
    }
    Ok((
        CostEstimate {
            value,
            truncation_bound: bound,
            terms_used: used,
        },
        rows,
    ))
}

/// Sum x_k f(x_{k-1}) over exactly the given points, monotone or not.
pub fn prefix_cost(points: &[f64], d: &TailDistribution) -> Result<f64> {
    let mut prev = 0.0;
    let mut total = 0.0;
    for &x in points {
        total += x * d.tail(prev)?;
        prev = x;
    }
    Ok(total)
}

/// Lower bound L and the upper bound 4L + A witnessed by a doubling plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBounds {
    pub lower: f64,
    pub upper: f64,
    pub witness: SearchPlan,
    pub witness_cost: CostEstimate,
}

pub fn cost_bounds(d: &TailDistribution) -> Result<CostBounds> {
    let lower = d.mean();
    let upper = 4.0 * lower + DOUBLING_OFFSET;
    let witness = SearchPlan::doubling(DOUBLING_OFFSET)?;
    let witness_cost = expected_cost(&witness, d, DEFAULT_MAX_TERMS)?;
    if witness_cost.value > upper {
        return Err(Error::invalid(
            "cost_bounds",
            format!("doubling witness costs {} > {upper}", witness_cost.value),
        ));
    }
    Ok(CostBounds {
        lower,
        upper,
        witness,
        witness_cost,
    })
}

/// E^N(x_1) = sum_{k=0}^{N} x_{k+1} f(x_k) along the recursion orbit from (0, x_1),
/// without any monotonicity requirement.
pub fn approximant(d: &TailDistribution, x1: f64, n: usize) -> Result<f64> {
    let plan = SearchPlan::recursion(*d, x1)?;
    Ok(cost_with_terms(&plan, d, n + 1, false, false)?.0.value)
}

/// dE^N/dx_1 = f(x_N) dx_{N+1}/dx_1, by propagating the orbit's tangent.
pub fn approximant_derivative(d: &TailDistribution, x1: f64, n: usize) -> Result<f64> {
    let (xs, _) = iterate(d, 0.0, x1, n)?;
    let mut tangent = vec![0.0, 1.0];
    for k in 1..=n {
        let (xp, xc, xn) = (xs[k - 1], xs[k], xs[k + 1]);
        let lead = if k == 1 {
            0.0
        } else {
            d.log_derivative(xp)? * tangent[k - 1]
        };
        let t = xn * (lead - d.curvature_ratio(xc)? * tangent[k]);
        tangent.push(t);
    }
    let value = d.tail(xs[n])? * tangent[n + 1];
    if !value.is_finite() {
        return Err(Error::Divergence {
            op: "approximant_derivative",
            detail: format!("tangent overflowed after {n} steps"),
        });
    }
    Ok(value)
}

/// Central difference (E^N(x_1 + h) - E^N(x_1 - h)) / 2h.
pub fn approximant_derivative_fd(d: &TailDistribution, x1: f64, n: usize, h: f64) -> Result<f64> {
    Ok((approximant(d, x1 + h, n)? - approximant(d, x1 - h, n)?) / (2.0 * h))
}

/// b_1 = 2 E_0, b_{k+1} = 2 E_0 / f(b_k).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingSequence {
    pub values: Vec<f64>,
    /// Stopped early because a term passed the overflow guard.
    pub diverged: bool,
}

pub fn upper_bounding_sequence(d: &TailDistribution, e0: f64, k: usize) -> Result<BoundingSequence> {
    if !(e0 > 0.0) {
        return Err(Error::Domain {
            op: "upper_bounding_sequence",
            value: e0,
            detail: "E0 must be positive",
        });
    }
    let mut values = Vec::with_capacity(k);
    let mut b = 2.0 * e0;
    while values.len() < k {
        if !(b <= OVERFLOW_GUARD) {
            return Ok(BoundingSequence { values, diverged: true });
        }
        values.push(b);
        b = 2.0 * e0 / d.tail(b)?;
    }
    Ok(BoundingSequence {
        values,
        diverged: false,
    })
}

/// Drops points that do not exceed their kept predecessor, then every point
/// below delta = 1/(2 C_L) except the last such one.
///
/// Without a Lipschitz constant only monotonicity is enforced. Every removal
/// lowers the prefix cost; a computed increase is reported as an error.
pub fn prune_plan(plan: &SearchPlan, d: &TailDistribution) -> Result<SearchPlan> {
    let mut kept: Vec<f64> = Vec::with_capacity(plan.points.len());
    for &x in &plan.points {
        if !(x > 0.0) {
            continue;
        }
        if kept.last().is_none_or(|&last| x > last) {
            kept.push(x);
        }
    }
    if let Some(c) = d.lipschitz_bound() {
        let delta = 1.0 / (2.0 * c);
        let below = kept.iter().take_while(|&&x| x < delta).count();
        if below > 1 {
            kept.drain(..below - 1);
        }
    }
    if kept.len() != plan.points.len() {
        let before = prefix_cost(&plan.points, d)?;
        let after = prefix_cost(&kept, d)?;
        // equality only when the removed terms are below one ulp of the total
        if after > before {
            return Err(Error::invalid(
                "prune_plan",
                format!("pruning raised the cost from {before} to {after}"),
            ));
        }
    }
    SearchPlan::new(kept, plan.extension)
}

/// The plan with `x0` inserted in front of its first point.
pub fn insert_leading_point(plan: &SearchPlan, x0: f64) -> Result<SearchPlan> {
    let mut points = Vec::with_capacity(plan.points.len() + 1);
    points.push(x0);
    points.extend_from_slice(&plan.points);
    SearchPlan::new(points, plan.extension)
}

/// Sample mean and standard error of a simulated cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Partitions per Monte Carlo run; fixed so results do not depend on the thread count.
pub const MC_PARTITIONS: usize = 64;

/// Materialized turning points and their running sums.
struct PlanCache<'a> {
    walker: PlanWalker<'a>,
    points: Vec<f64>,
    sums: Vec<f64>,
    done: bool,
}

impl<'a> PlanCache<'a> {
    fn new(plan: &'a SearchPlan) -> Self {
        Self {
            walker: plan.walk(),
            points: Vec::new(),
            sums: Vec::new(),
            done: false,
        }
    }

    /// Distance walked until the object at `h` is found.
    fn cost_for(&mut self, h: f64) -> Result<f64> {
        while !self.done && self.points.last().is_none_or(|&x| x < h) {
            match self.walker.next_point()? {
                Some(PlanPoint { x, .. }) => {
                    let s = self.sums.last().copied().unwrap_or(0.0) + x;
                    self.points.push(x);
                    self.sums.push(s);
                }
                None => self.done = true,
            }
        }
        let k = self.points.partition_point(|&x| x < h);
        self.sums.get(k).copied().ok_or_else(|| {
            Error::invalid(
                "monte_carlo_cost",
                format!("object at {h} lies beyond the last turning point"),
            )
        })
    }
}

/// Simulates `n` searches: H ~ f, walk the plan until some x_k >= H, and
/// accumulate x_1 + ... + x_k. Deterministic per seed.
pub fn monte_carlo_cost(plan: &SearchPlan, d: &TailDistribution, n: usize, seed: u64) -> Result<MonteCarloEstimate> {
    if n < 2 {
        return Err(Error::invalid("monte_carlo_cost", "need at least two samples"));
    }
    check_monotone("monte_carlo_cost", &plan.points)?;
    let parts: Vec<(f64, f64, usize)> = (0..MC_PARTITIONS)
        .into_par_iter()
        .map(|p| {
            let count = n / MC_PARTITIONS + usize::from(p < n % MC_PARTITIONS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let mut cache = PlanCache::new(plan);
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..count {
                let c = cache.cost_for(d.sample(&mut rng))?;
                sum += c;
                sq += c * c;
            }
            Ok((sum, sq, count))
        })
        .collect::<Result<_>>()?;
    let (sum, sq) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok(MonteCarloEstimate {
        mean,
        stderr: (var / nf).sqrt(),
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const EXP: TailDistribution = TailDistribution::Exponential;
    const GAUSS: TailDistribution = TailDistribution::GaussianOneSided;
    const SQRT: TailDistribution = TailDistribution::SqrtSingular;

    fn pareto(a: f64) -> TailDistribution {
        TailDistribution::pareto(a).unwrap()
    }

    fn powers_of_two(n: i32) -> Vec<f64> {
        (1..=n).map(|k| 2f64.powi(k)).collect()
    }

    #[test]
    fn pareto_doubling_costs_four() {
        let plan = SearchPlan::finite(powers_of_two(40)).unwrap();
        let c = expected_cost(&plan, &pareto(2.0), 40).unwrap();
        assert_abs_diff_eq!(c.value, 4.0, epsilon = 1e-9);
        assert!(c.truncation_bound < 1e-9);
        assert_eq!(c.terms_used, 40);
    }

    #[test]
    fn single_point_costs_itself() {
        let plan = SearchPlan::finite(vec![1.7]).unwrap();
        let c = expected_cost(&plan, &EXP, 1).unwrap();
        assert_eq!(c.value, 1.7);
        assert_eq!(c.terms_used, 1);
    }

    #[test]
    fn doubling_respects_mean_bounds() {
        let plan = SearchPlan::doubling(1.0).unwrap();
        let c = expected_cost(&plan, &EXP, 60).unwrap();
        assert!((1.0..=5.0).contains(&c.value), "{}", c.value);
        let direct: f64 = 1.0
            + (2..=60)
                .map(|k| 2f64.powi(k - 1) * (-(2f64.powi(k - 2))).exp())
                .sum::<f64>();
        assert_abs_diff_eq!(c.value, direct, epsilon = 1e-12);
    }

    #[test]
    fn non_monotone_plans_are_rejected() {
        let plan = SearchPlan::unchecked(vec![1.0, 3.0, 2.0], Extension::None);
        let err = expected_cost(&plan, &EXP, 10).unwrap_err();
        assert_eq!(
            err,
            Error::NonMonotonePlan {
                op: "expected_cost",
                index: 3
            }
        );
        assert!(SearchPlan::finite(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn recursion_plan_matches_closed_form_for_pareto() {
        for (alpha, x1) in [(2.0, 2.0), (2.0, 3.0), (3.0, 2.0), (1.5, 2.5)] {
            let d = pareto(alpha);
            let c = expected_cost(&SearchPlan::recursion(d, x1).unwrap(), &d, 4000).unwrap();
            let want = x1 * alpha / (alpha - 1.0);
            assert!((c.value - want).abs() <= 1e-9 * want, "{alpha} {x1}: {}", c.value);
            assert!(c.truncation_bound < 1e-9);
        }
    }

    #[test]
    fn cost_terms_rows_sum_to_value() {
        let plan = SearchPlan::recursion(EXP, 0.9).unwrap();
        let (c, rows) = cost_terms(&plan, &EXP, 100).unwrap();
        assert_eq!(rows.len(), c.terms_used);
        assert_abs_diff_eq!(rows.iter().map(|r| r.term).sum::<f64>(), c.value, epsilon = 1e-14);
        assert_eq!(rows[0].f_prev, 1.0);
        assert_eq!(rows[0].x_k, 0.9);
    }

    #[test]
    fn bounds_examples() {
        let b = cost_bounds(&EXP).unwrap();
        assert_eq!((b.lower, b.upper), (1.0, 4.001));
        assert_eq!(b.witness.extension, Extension::Doubling { a: 1e-3 });
        let b = cost_bounds(&pareto(2.0)).unwrap();
        assert_eq!((b.lower, b.upper), (2.0, 8.001));
        let b = cost_bounds(&GAUSS).unwrap();
        assert_abs_diff_eq!(b.lower, 0.886226925452758, epsilon = 1e-14);
        assert_abs_diff_eq!(b.upper, 3.545907701811032, epsilon = 1e-12);
        for d in [SQRT, pareto(1.5), pareto(3.0)] {
            let b = cost_bounds(&d).unwrap();
            assert!(b.lower <= b.witness_cost.value && b.witness_cost.value <= b.upper);
        }
    }

    #[test]
    fn approximant_derivative_examples() {
        assert_abs_diff_eq!(approximant_derivative(&EXP, 0.9, 1).unwrap(), 1.0, epsilon = 1e-14);
        let exact = approximant_derivative(&EXP, 0.9, 3).unwrap();
        let fd = approximant_derivative_fd(&EXP, 0.9, 3, 1e-6).unwrap();
        assert!((exact - fd).abs() <= 1e-5, "{exact} vs {fd}");
        let p = pareto(2.0);
        let exact = approximant_derivative(&p, 2.0, 5).unwrap();
        let fd = approximant_derivative_fd(&p, 2.0, 5, 1e-6).unwrap();
        assert!((exact - fd).abs() <= 1e-5 * exact.abs().max(1.0), "{exact} vs {fd}");
    }

    #[test]
    fn approximant_sums_leading_terms() {
        // E^1(x) = x + e^x e^{-x} = x + 1
        assert_abs_diff_eq!(approximant(&EXP, 0.9, 1).unwrap(), 1.9, epsilon = 1e-14);
        assert!(approximant(&pareto(2.0), 0.5, 2).is_err());
    }

    #[test]
    fn bounding_sequence_examples() {
        let s = upper_bounding_sequence(&EXP, 2.4, 2).unwrap();
        assert_eq!(s.values[0], 4.8);
        assert_abs_diff_eq!(s.values[1], 4.8 * 4.8f64.exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(s.values[1], 583.25, epsilon = 0.01);
        assert_eq!(upper_bounding_sequence(&GAUSS, 1.3, 1).unwrap().values, vec![2.6]);
        assert_eq!(
            upper_bounding_sequence(&pareto(2.0), 4.0, 2).unwrap().values,
            vec![8.0, 512.0]
        );
        let long = upper_bounding_sequence(&EXP, 2.4, 10).unwrap();
        assert!(long.diverged && long.values.len() < 10);
        assert!(long.values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn prune_example() {
        let plan = SearchPlan::unchecked(vec![0.1, 0.2, 3.0, 2.0, 5.0], Extension::None);
        let pruned = prune_plan(&plan, &EXP).unwrap();
        assert_eq!(pruned.points, vec![0.2, 3.0, 5.0]);
        assert!(prefix_cost(&pruned.points, &EXP).unwrap() < prefix_cost(&plan.points, &EXP).unwrap());
        let fine = SearchPlan::finite(vec![0.7, 2.0, 4.0]).unwrap();
        assert_eq!(prune_plan(&fine, &EXP).unwrap(), fine);
        let sq = SearchPlan::unchecked(vec![0.01, 0.02, 0.5, 0.4], Extension::None);
        assert_eq!(prune_plan(&sq, &SQRT).unwrap().points, vec![0.01, 0.02, 0.5]);
    }

    #[test]
    fn sqrt_insertion_example() {
        let plan = SearchPlan::finite(vec![0.25]).unwrap();
        let base = expected_cost(&plan, &SQRT, 10).unwrap().value;
        let with = insert_leading_point(&plan, 0.05).unwrap();
        assert!(expected_cost(&with, &SQRT, 10).unwrap().value < base);
    }

    #[test]
    fn monte_carlo_is_deterministic_and_consistent() {
        let plan = SearchPlan::doubling(0.5).unwrap();
        let a = monte_carlo_cost(&plan, &EXP, 20_000, 9).unwrap();
        let b = monte_carlo_cost(&plan, &EXP, 20_000, 9).unwrap();
        assert_eq!(a, b);
        let exact = expected_cost(&plan, &EXP, 200).unwrap().value;
        assert!((a.mean - exact).abs() <= 4.0 * a.stderr, "{} vs {exact}", a.mean);
    }

    #[test]
    fn monte_carlo_degenerate_plan_pays_first_excursion() {
        let plan = SearchPlan::new(vec![60.0], Extension::Doubling { a: 1.0 }).unwrap();
        let mc = monte_carlo_cost(&plan, &EXP, 10_000, 1).unwrap();
        assert_eq!(mc.mean, 60.0);
        assert_eq!(mc.stderr, 0.0);
    }

    #[test]
    fn monte_carlo_finite_plan_errors_past_its_end() {
        let plan = SearchPlan::finite(vec![0.5]).unwrap();
        let err = monte_carlo_cost(&plan, &EXP, 1000, 3).unwrap_err();
        assert_eq!(err.op(), "monte_carlo_cost");
    }

    #[test]
    fn monte_carlo_agrees_on_every_instance() {
        for d in [EXP, GAUSS, SQRT, pareto(3.0)] {
            let plan = SearchPlan::doubling(0.3).unwrap();
            let mc = monte_carlo_cost(&plan, &d, 100_000, 5).unwrap();
            let exact = expected_cost(&plan, &d, DEFAULT_MAX_TERMS).unwrap();
            assert!(
                (mc.mean - exact.value).abs() <= 4.0 * mc.stderr,
                "{d}: {} vs {}",
                mc.mean,
                exact.value
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn removing_non_monotone_points_never_raises_cost(
            base in prop::collection::vec(0.05f64..3.0, 2..8),
            noise in prop::collection::vec(-1.0f64..1.0, 8),
        ) {
            let mut pts: Vec<f64> = base.iter().scan(0.0, |acc, &s| { *acc += s; Some(*acc) }).collect();
            for (p, e) in pts.iter_mut().zip(&noise) {
                *p = (*p + e).max(0.01);
            }
            for d in [EXP, GAUSS, pareto(2.0)] {
                let plan = SearchPlan::unchecked(pts.clone(), Extension::None);
                let pruned = prune_plan(&plan, &d).unwrap();
                prop_assert!(pruned.points.windows(2).all(|w| w[1] > w[0]));
                prop_assert!(prefix_cost(&pruned.points, &d).unwrap() <= prefix_cost(&pts, &d).unwrap());
            }
        }

        #[test]
        fn cost_is_at_least_the_mean(
            steps in prop::collection::vec(0.01f64..2.0, 1..10),
            a in 0.01f64..1.0,
        ) {
            let pts: Vec<f64> = steps.iter().scan(0.0, |acc, &s| { *acc += s; Some(*acc) }).collect();
            let plan = SearchPlan::new(pts, Extension::Doubling { a }).unwrap();
            for d in [EXP, GAUSS, pareto(2.0), pareto(3.0)] {
                let c = expected_cost(&plan, &d, DEFAULT_MAX_TERMS).unwrap();
                prop_assert!(d.mean() <= c.value + c.truncation_bound);
            }
        }

        #[test]
        fn approximant_derivative_matches_differences(x1 in 0.75f64..1.2, n in 1usize..=4) {
            let exact = approximant_derivative(&EXP, x1, n).unwrap();
            let fd = approximant_derivative_fd(&EXP, x1, n, 1e-6).unwrap();
            prop_assert!((exact - fd).abs() <= 1e-5 * exact.abs().max(1.0), "{} vs {}", exact, fd);
        }

        #[test]
        fn sqrt_insertion_threshold(x1 in 0.02f64..0.98, frac in 0.02f64..0.98) {
            let plan = SearchPlan::finite(vec![x1]).unwrap();
            let base = prefix_cost(&plan.points, &SQRT).unwrap();
            let below = frac * x1 * x1;
            let above = x1 * x1 + frac * (x1 - x1 * x1);
            let lower = insert_leading_point(&plan, below).unwrap();
            let higher = insert_leading_point(&plan, above).unwrap();
            prop_assert!(prefix_cost(&lower.points, &SQRT).unwrap() < base);
            prop_assert!(prefix_cost(&higher.points, &SQRT).unwrap() > base);
        }
    }
}
