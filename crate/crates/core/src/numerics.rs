//! Small numerical kernels shared by the solver modules: a safeguarded
//! Newton root finder, indicator bisection, Richardson-extrapolated
//! differences, monotone cubic Hermite interpolation and 2x2 eigenvalues.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Safeguarded Newton iteration for a scalar equation `g(x) = 0` bracketed by `[lo, hi]`.
///
/// `g` returns the value and derivative. A Newton step that leaves the current
/// bracket (or a vanishing derivative) falls back to bisection. Converges when
/// `|g(x)| <= tol` or the bracket collapses to a few ulps.
pub fn newton_bisect<G>(op: &'static str, mut g: G, lo: f64, hi: f64, x0: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    G: FnMut(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (ga, _) = g(a);
    let (gb, _) = g(b);
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        return Err(Error::invalid(
            op,
            format!("root not bracketed in [{a}, {b}] (g = {ga:e}, {gb:e})"),
        ));
    }
    let rising = gb > 0.0;
    let mut x = if x0 > a && x0 < b { x0 } else { 0.5 * (a + b) };
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let (gx, dg) = g(x);
        last = gx;
        if gx.abs() <= tol {
            return Ok(x);
        }
        if (gx > 0.0) == rising {
            b = x;
        } else {
            a = x;
        }
        if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
        let newton = x - gx / dg;
        x = if dg != 0.0 && newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    Err(Error::NoConvergence {
        op,
        iterations: max_iter,
        residual: last,
    })
}

/// Bisection on a boolean indicator with `pred(lo) != pred(hi)`.
///
/// Returns the final bracket `(a, b)` with `pred(a) == pred(lo)` and
/// `b - a <= width`.
pub fn bisect_indicator<P>(mut lo: f64, mut hi: f64, width: f64, mut pred: P) -> (f64, f64)
where
    P: FnMut(f64) -> bool,
{
    let side = pred(lo);
    while (hi - lo).abs() > width {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if pred(mid) == side {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Central difference with one level of Richardson extrapolation, error `O(h^4)`.
pub fn richardson_derivative<F>(mut f: F, x: f64, h: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let mut central = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let coarse = central(h);
    let fine = central(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// Eigenvalues of a real 2x2 matrix.
pub fn eigenvalues_2x2(m: [[f64; 2]; 2]) -> [Complex64; 2] {
    let trace = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = 0.5 * trace;
    let disc = half * half - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [Complex64::new(half + r, 0.0), Complex64::new(half - r, 0.0)]
    } else {
        let r = (-disc).sqrt();
        [Complex64::new(half, r), Complex64::new(half, -r)]
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Piecewise cubic Hermite interpolant through `(x_i, y_i)` with node slopes `d_i`.
///
/// Slopes violating the Fritsch–Carlson region are scaled back so the
/// interpolant is monotone wherever the data are.
#[derive(Debug, Clone)]
pub struct HermiteCurve {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl HermiteCurve {
    pub fn monotone(xs: Vec<f64>, ys: Vec<f64>, mut ds: Vec<f64>) -> Self {
        debug_assert!(xs.len() == ys.len() && ys.len() == ds.len() && xs.len() >= 2);
        for i in 0..xs.len() - 1 {
            let secant = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            if secant == 0.0 {
                ds[i] = 0.0;
                ds[i + 1] = 0.0;
                continue;
            }
            let a = ds[i] / secant;
            let b = ds[i + 1] / secant;
            if a < 0.0 {
                ds[i] = 0.0;
            }
            if b < 0.0 {
                ds[i + 1] = 0.0;
            }
            let norm = a * a + b * b;
            if norm > 9.0 {
                let tau = 3.0 / norm.sqrt();
                ds[i] = tau * a * secant;
                ds[i + 1] = tau * b * secant;
            }
        }
        Self { xs, ys, ds }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn slopes(&self) -> &[f64] {
        &self.ds
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&node| node <= x) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Value and derivative at `x` (cubic extrapolation outside the node range).
    pub fn eval_with_slope(&self, x: f64) -> (f64, f64) {
        let i = self.segment(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.ds[i] * h, self.ds[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value =
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1;
        let dvalue = (6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1;
        (value, dvalue / h)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_slope(x).0
    }
}

/// `n` geometrically spaced nodes covering `[lo, hi]` exactly at both ends.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    grid
}
