//! Tail distributions f(x) = P(H > x) of the hidden object's position.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::erfc;

/// The four tail functions studied by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailDistribution {
    /// f(x) = e^{-x}
    Exponential,
    /// f(x) = 1 on [0, 1), x^{-alpha} beyond; alpha > 1
    Pareto { alpha: f64 },
    /// f(x) = e^{-x^2}
    GaussianOneSided,
    /// f(x) = 1 - sqrt(x) on [0, 1]; not Lipschitz at the origin
    SqrtSingular,
}

impl TailDistribution {
    pub fn pareto(alpha: f64) -> Result<Self> {
        if alpha > 1.0 && alpha.is_finite() {
            Ok(TailDistribution::Pareto { alpha })
        } else {
            Err(Error::Domain {
                op: "pareto",
                value: alpha,
                detail: "shape alpha must exceed 1 for a finite mean",
            })
        }
    }

    /// Selector string accepted by the command line.
    pub fn selector(&self) -> String {
        match self {
            TailDistribution::Exponential => "exp".into(),
            TailDistribution::Pareto { alpha } => format!("pareto:{alpha}"),
            TailDistribution::GaussianOneSided => "gauss1".into(),
            TailDistribution::SqrtSingular => "sqrt".into(),
        }
    }

    /// Right end of the support, if bounded.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            TailDistribution::SqrtSingular => Some(1.0),
            _ => None,
        }
    }

    fn check_domain(&self, op: &'static str, x: f64) -> Result<()> {
        if !(x >= 0.0) {
            return Err(Error::Domain {
                op,
                value: x,
                detail: "x must be non-negative",
            });
        }
        if let Some(end) = self.support_end() {
            if x > end {
                return Err(Error::Domain {
                    op,
                    value: x,
                    detail: "sqrt-singular tail lives on [0, 1]",
                });
            }
        }
        Ok(())
    }

    /// f(x) = P(H > x).
    pub fn tail(&self, x: f64) -> Result<f64> {
        self.check_domain("tail", x)?;
        Ok(match *self {
            TailDistribution::Exponential => (-x).exp(),
            TailDistribution::Pareto { alpha } => {
                if x < 1.0 {
                    1.0
                } else {
                    x.powf(-alpha)
                }
            }
            TailDistribution::GaussianOneSided => (-x * x).exp(),
            TailDistribution::SqrtSingular => 1.0 - x.sqrt(),
        })
    }

    /// f'(x), exact.
    pub fn tail_derivative(&self, x: f64) -> Result<f64> {
        self.check_domain("tail_derivative", x)?;
        Ok(match *self {
            TailDistribution::Exponential => -(-x).exp(),
            TailDistribution::Pareto { alpha } => {
                if x < 1.0 {
                    0.0
                } else if x == 1.0 {
                    return Err(Error::Domain {
                        op: "tail_derivative",
                        value: x,
                        detail: "pareto tail has a corner at x = 1",
                    });
                } else {
                    -alpha * x.powf(-alpha - 1.0)
                }
            }
            TailDistribution::GaussianOneSided => -2.0 * x * (-x * x).exp(),
            TailDistribution::SqrtSingular => {
                if x == 0.0 {
                    return Err(Error::Domain {
                        op: "tail_derivative",
                        value: x,
                        detail: "sqrt-singular tail has unbounded slope at 0",
                    });
                }
                -0.5 / x.sqrt()
            }
        })
    }

    /// f''(x), exact.
    pub fn tail_second_derivative(&self, x: f64) -> Result<f64> {
        self.tail_derivative(x)?;
        Ok(match *self {
            TailDistribution::Exponential => (-x).exp(),
            TailDistribution::Pareto { alpha } => {
                if x < 1.0 {
                    0.0
                } else {
                    alpha * (alpha + 1.0) * x.powf(-alpha - 2.0)
                }
            }
            TailDistribution::GaussianOneSided => (4.0 * x * x - 2.0) * (-x * x).exp(),
            TailDistribution::SqrtSingular => 0.25 * x.powf(-1.5),
        })
    }

    /// ln f evaluated at x = e^u. Stays finite where f underflows.
    pub fn ln_tail_at_log(&self, u: f64) -> f64 {
        match *self {
            TailDistribution::Exponential => -u.exp(),
            TailDistribution::Pareto { alpha } => {
                if u < 0.0 {
                    0.0
                } else {
                    -alpha * u
                }
            }
            TailDistribution::GaussianOneSided => -(2.0 * u).exp(),
            TailDistribution::SqrtSingular => (-(0.5 * u).exp()).ln_1p(),
        }
    }

    /// ln(-f') evaluated at x = e^u; `-inf` where f' vanishes.
    pub fn ln_neg_derivative_at_log(&self, u: f64) -> f64 {
        match *self {
            TailDistribution::Exponential => -u.exp(),
            TailDistribution::Pareto { alpha } => {
                if u < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    alpha.ln() - (alpha + 1.0) * u
                }
            }
            TailDistribution::GaussianOneSided => std::f64::consts::LN_2 + u - (2.0 * u).exp(),
            TailDistribution::SqrtSingular => -std::f64::consts::LN_2 - 0.5 * u,
        }
    }

    /// ln f(x) given both x and u = ln x; uses x while it is finite.
    pub fn ln_tail(&self, x: f64, u: f64) -> f64 {
        if !x.is_finite() {
            return self.ln_tail_at_log(u);
        }
        match *self {
            TailDistribution::Exponential => -x,
            TailDistribution::GaussianOneSided => -x * x,
            _ => self.ln_tail_at_log(u),
        }
    }

    /// ln(-f'(x)) given both x and u = ln x; uses x while it is finite.
    pub fn ln_neg_derivative(&self, x: f64, u: f64) -> f64 {
        if !x.is_finite() {
            return self.ln_neg_derivative_at_log(u);
        }
        match *self {
            TailDistribution::Exponential => -x,
            TailDistribution::GaussianOneSided => (2.0 * x).ln() - x * x,
            _ => self.ln_neg_derivative_at_log(u),
        }
    }

    /// f'(x)/f(x).
    pub fn log_derivative(&self, x: f64) -> Result<f64> {
        self.tail_derivative(x)?;
        Ok(match *self {
            TailDistribution::Exponential => -1.0,
            TailDistribution::Pareto { alpha } => {
                if x < 1.0 {
                    0.0
                } else {
                    -alpha / x
                }
            }
            TailDistribution::GaussianOneSided => -2.0 * x,
            TailDistribution::SqrtSingular => {
                let r = x.sqrt();
                -0.5 / (r * (1.0 - r))
            }
        })
    }

    /// f''(x)/f'(x); undefined where f' vanishes.
    pub fn curvature_ratio(&self, x: f64) -> Result<f64> {
        let fp = self.tail_derivative(x)?;
        if fp == 0.0 && !matches!(self, TailDistribution::GaussianOneSided) {
            return Err(Error::SingularStep {
                op: "curvature_ratio",
                at: x,
            });
        }
        Ok(match *self {
            TailDistribution::Exponential => -1.0,
            TailDistribution::Pareto { alpha } => -(alpha + 1.0) / x,
            TailDistribution::GaussianOneSided => {
                if x == 0.0 {
                    return Err(Error::SingularStep {
                        op: "curvature_ratio",
                        at: x,
                    });
                }
                (1.0 - 2.0 * x * x) / x
            }
            TailDistribution::SqrtSingular => -0.5 / x,
        })
    }

    /// ln of the elasticity -x f'(x)/f(x) at x = e^u; `-inf` where f' vanishes.
    pub fn ln_elasticity_at_log(&self, u: f64) -> f64 {
        match *self {
            TailDistribution::Exponential => u,
            TailDistribution::Pareto { alpha } => {
                if u < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    alpha.ln()
                }
            }
            TailDistribution::GaussianOneSided => std::f64::consts::LN_2 + 2.0 * u,
            TailDistribution::SqrtSingular => 0.5 * u - std::f64::consts::LN_2 - (-(0.5 * u).exp()).ln_1p(),
        }
    }

    /// Mean L = E[H] = integral of f over [0, inf).
    pub fn mean(&self) -> f64 {
        match *self {
            TailDistribution::Exponential => 1.0,
            TailDistribution::Pareto { alpha } => 1.0 + 1.0 / (alpha - 1.0),
            TailDistribution::GaussianOneSided => 0.5 * PI.sqrt(),
            TailDistribution::SqrtSingular => 1.0 / 3.0,
        }
    }

    /// Integral of f over [x, inf), closed form.
    pub fn tail_integral(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match *self {
            TailDistribution::Exponential => (-x).exp(),
            TailDistribution::Pareto { alpha } => {
                if x < 1.0 {
                    (1.0 - x) + 1.0 / (alpha - 1.0)
                } else {
                    x.powf(1.0 - alpha) / (alpha - 1.0)
                }
            }
            TailDistribution::GaussianOneSided => 0.5 * PI.sqrt() * erfc(x),
            TailDistribution::SqrtSingular => {
                if x >= 1.0 {
                    0.0
                } else {
                    (1.0 - x) - (2.0 / 3.0) * (1.0 - x.powf(1.5))
                }
            }
        }
    }

    /// Lipschitz constant of f, where one exists.
    pub fn lipschitz_bound(&self) -> Option<f64> {
        match *self {
            TailDistribution::Exponential => Some(1.0),
            TailDistribution::Pareto { alpha } => Some(alpha),
            // sup of 2x e^{-x^2}, attained at x = 1/sqrt 2
            TailDistribution::GaussianOneSided => Some((2.0 / std::f64::consts::E).sqrt()),
            TailDistribution::SqrtSingular => None,
        }
    }

    /// Inverse transform: the x with f(x) = u, for u in (0, 1].
    pub fn inverse_tail(&self, u: f64) -> f64 {
        match *self {
            TailDistribution::Exponential => -u.ln(),
            TailDistribution::Pareto { alpha } => u.powf(-1.0 / alpha),
            TailDistribution::GaussianOneSided => (-u.ln()).sqrt(),
            TailDistribution::SqrtSingular => (1.0 - u) * (1.0 - u),
        }
    }

    /// Draws H with P(H > x) = f(x).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = 1.0 - rng.random::<f64>();
        self.inverse_tail(u)
    }
}

impl fmt::Display for TailDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.selector())
    }
}

/// Everything the `--dist` flag can name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistSelector {
    Tail(TailDistribution),
    /// Two-sided Gaussian search (map dynamics only).
    Beck,
}

impl FromStr for DistSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "exp" => return Ok(DistSelector::Tail(TailDistribution::Exponential)),
            "gauss1" => return Ok(DistSelector::Tail(TailDistribution::GaussianOneSided)),
            "sqrt" => return Ok(DistSelector::Tail(TailDistribution::SqrtSingular)),
            "beck" => return Ok(DistSelector::Beck),
            _ => {}
        }
        if let Some(alpha) = s.strip_prefix("pareto:") {
            let alpha: f64 = alpha
                .parse()
                .map_err(|_| Error::invalid("parse_dist", format!("bad pareto shape in {s:?}")))?;
            return TailDistribution::pareto(alpha).map(DistSelector::Tail);
        }
        Err(Error::invalid(
            "parse_dist",
            format!("unknown distribution {s:?}; expected exp, pareto:<alpha>, gauss1, sqrt or beck"),
        ))
    }
}

impl fmt::Display for DistSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistSelector::Tail(d) => d.fmt(f),
            DistSelector::Beck => f.write_str("beck"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::richardson_derivative;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const EXP: TailDistribution = TailDistribution::Exponential;
    const GAUSS: TailDistribution = TailDistribution::GaussianOneSided;
    const SQRT: TailDistribution = TailDistribution::SqrtSingular;

    fn pareto2() -> TailDistribution {
        TailDistribution::pareto(2.0).unwrap()
    }

    fn all() -> Vec<TailDistribution> {
        vec![EXP, pareto2(), TailDistribution::pareto(3.0).unwrap(), GAUSS, SQRT]
    }

    /// Adaptive Simpson; test oracle only.
    fn simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec<F: Fn(f64) -> f64 + Copy>(
            f: F,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    /// Integral of f over [0, inf) with x = e^s beyond 1 so heavy tails converge.
    fn tail_quadrature(d: TailDistribution) -> f64 {
        let f = |x: f64| d.tail(x).unwrap();
        let end = d.support_end().unwrap_or(1.0);
        let head = simpson(f, 0.0, end, 1e-13);
        if d.support_end().is_some() {
            return head;
        }
        head + simpson(|s: f64| f(s.exp()) * s.exp(), 0.0, 80.0, 1e-13)
    }

    #[test]
    fn tail_examples() {
        assert_eq!(EXP.tail(0.0).unwrap(), 1.0);
        assert_eq!(pareto2().tail(0.5).unwrap(), 1.0);
        // e^{-1} to 20 digits
        assert!((EXP.tail(1.0).unwrap() - 0.3678794411714423216).abs() < 1e-16);
        for d in all() {
            assert_eq!(d.tail(0.0).unwrap(), 1.0, "{d}");
        }
        assert_eq!(SQRT.tail(1.0).unwrap(), 0.0);
    }

    #[test]
    fn tail_domain_errors() {
        assert_eq!(EXP.tail(-0.1).unwrap_err().op(), "tail");
        assert!(SQRT.tail(1.01).is_err());
        assert!(SQRT.tail_derivative(0.0).is_err());
        assert!(pareto2().tail_derivative(1.0).is_err());
        assert!(TailDistribution::pareto(1.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(EXP.tail_derivative(0.0).unwrap(), -1.0);
        assert_eq!(pareto2().tail_derivative(2.0).unwrap(), -0.25);
        let g = GAUSS.tail_derivative(1.0).unwrap();
        assert!((g - (-0.73575888234288464319)).abs() < 1e-15);
        let fd = (GAUSS.tail(1.0 + 1e-6).unwrap() - GAUSS.tail(1.0 - 1e-6).unwrap()) / 2e-6;
        assert!((g - fd).abs() < 1e-9);
    }

    #[test]
    fn derivative_matches_central_differences_on_grid() {
        for d in all() {
            let end = d.support_end().unwrap_or(6.0);
            for i in 1..60 {
                let x = end * i as f64 / 60.0;
                if matches!(d, TailDistribution::Pareto { .. }) && (x - 1.0).abs() < 1e-3 {
                    continue;
                }
                let h = 1e-6;
                let fd = (d.tail(x + h).unwrap() - d.tail(x - h).unwrap()) / (2.0 * h);
                let exact = d.tail_derivative(x).unwrap();
                assert!((fd - exact).abs() <= 1e-6, "{d} at {x}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn second_derivative_matches_richardson() {
        for d in all() {
            for x in [0.3, 0.6, 0.9, 1.4, 2.5] {
                if d.support_end().is_some_and(|e| x >= e) {
                    continue;
                }
                let exact = d.tail_second_derivative(x).unwrap();
                let fd = richardson_derivative(|t| d.tail_derivative(t).unwrap(), x, 1e-3);
                assert!((exact - fd).abs() <= 1e-8 * (1.0 + exact.abs()), "{d} at {x}");
            }
        }
    }

    #[test]
    fn log_domain_helpers_agree_with_direct_evaluation() {
        for d in all() {
            for x in [0.2, 0.7, 1.5, 3.0] {
                if d.support_end().is_some_and(|e| x >= e) {
                    continue;
                }
                let u = f64::ln(x);
                let lt = d.ln_tail_at_log(u);
                assert!((lt - d.tail(x).unwrap().ln()).abs() < 1e-13, "{d} {x}");
                let fp = d.tail_derivative(x).unwrap();
                let el = -x * fp / d.tail(x).unwrap();
                assert!(
                    (d.ln_elasticity_at_log(u).exp() - el).abs() < 1e-12 * el.max(1.0),
                    "{d} {x}"
                );
                if fp < 0.0 {
                    let ld = d.ln_neg_derivative_at_log(u);
                    assert!((ld - (-fp).ln()).abs() < 1e-13, "{d} {x}");
                }
            }
        }
    }

    #[test]
    fn derivative_ratios_match_definitions() {
        for d in all() {
            for x in [0.3, 0.6, 1.4, 2.5] {
                if d.support_end().is_some_and(|e| x >= e) {
                    continue;
                }
                let (f, fp) = (d.tail(x).unwrap(), d.tail_derivative(x).unwrap());
                let fpp = d.tail_second_derivative(x).unwrap();
                assert!((d.log_derivative(x).unwrap() - fp / f).abs() < 1e-12, "{d} {x}");
                if fp != 0.0 {
                    assert!((d.curvature_ratio(x).unwrap() - fpp / fp).abs() < 1e-12, "{d} {x}");
                }
            }
        }
    }

    #[test]
    fn mean_examples() {
        assert_eq!(EXP.mean(), 1.0);
        assert_eq!(pareto2().mean(), 2.0);
        assert!((GAUSS.mean() - 0.88622692545275801365).abs() < 1e-15);
    }

    #[test]
    fn mean_matches_tail_quadrature() {
        for d in all() {
            let q = tail_quadrature(d);
            assert!((q - d.mean()).abs() <= 1e-8, "{d}: quadrature {q} vs mean {}", d.mean());
        }
        let p15 = TailDistribution::pareto(1.5).unwrap();
        assert!((tail_quadrature(p15) - 3.0).abs() <= 1e-8);
    }

    #[test]
    fn tail_integral_matches_quadrature() {
        for d in all() {
            let end = d.support_end().unwrap_or(4.0);
            for x in [0.0, 0.25 * end, 0.5 * end] {
                let head = simpson(|t| d.tail(t).unwrap(), 0.0, x, 1e-13);
                assert!((d.mean() - head - d.tail_integral(x)).abs() < 1e-9, "{d} {x}");
            }
        }
    }

    #[test]
    fn lipschitz_bounds() {
        assert_eq!(EXP.lipschitz_bound(), Some(1.0));
        assert_eq!(pareto2().lipschitz_bound(), Some(2.0));
        let g = GAUSS.lipschitz_bound().unwrap();
        let peak = 2.0 * std::f64::consts::FRAC_1_SQRT_2 * (-0.5f64).exp();
        assert!((g - peak).abs() < 1e-15);
        assert_eq!(SQRT.lipschitz_bound(), None);
    }

    #[test]
    fn inverse_transform_examples() {
        assert!((EXP.inverse_tail(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(pareto2().inverse_tail(0.25), 2.0);
        for d in all() {
            for u in [0.9, 0.5, 0.1, 0.01] {
                assert!((d.tail(d.inverse_tail(u)).unwrap() - u).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exponential_sample_mean_within_three_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mean = (0..n).map(|_| EXP.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() <= 0.003, "mean {mean}");
    }

    #[test]
    fn samples_pass_kolmogorov_smirnov_at_one_percent() {
        let n = 100_000;
        let critical = 1.628 / (n as f64).sqrt();
        for d in all() {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            let mut stat: f64 = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                let cdf = 1.0 - d.tail(x).unwrap();
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                stat = stat.max((cdf - lo).abs()).max((hi - cdf).abs());
            }
            assert!(stat < critical, "{d}: KS {stat} >= {critical}");
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5).map(|_| GAUSS.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn selector_grammar() {
        assert_eq!("exp".parse::<DistSelector>().unwrap(), DistSelector::Tail(EXP));
        assert_eq!(
            "pareto:2.5".parse::<DistSelector>().unwrap(),
            DistSelector::Tail(TailDistribution::Pareto { alpha: 2.5 })
        );
        assert_eq!("gauss1".parse::<DistSelector>().unwrap(), DistSelector::Tail(GAUSS));
        assert_eq!("sqrt".parse::<DistSelector>().unwrap(), DistSelector::Tail(SQRT));
        assert_eq!("beck".parse::<DistSelector>().unwrap(), DistSelector::Beck);
        assert!("pareto:0.5".parse::<DistSelector>().is_err());
        assert!("pareto:x".parse::<DistSelector>().is_err());
        assert!("cauchy".parse::<DistSelector>().is_err());
        for d in all() {
            assert_eq!(d.selector().parse::<DistSelector>().unwrap(), DistSelector::Tail(d));
        }
    }
}
