//! Uniform 1-D grids, cubic Hermite interpolation and a bracketed 1-D
//! minimiser for functions that are partly sampled on a grid.
//!
//! Node slopes come from fourth-order finite differences, so the
//! interpolant reproduces polynomials up to degree three exactly and has
//! `O(h⁴)` error on smooth data.

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 65;
pub const DEFAULT_POINTS: usize = 1025;
pub const MAX_POINTS: usize = 4097;

/// `points` nodes `x_k = (k − zero) h`, so `x_zero = 0` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDomain {
    h: f64,
    points: usize,
    zero: usize,
}

impl GridDomain {
    /// Smallest grid with the given node count that covers `[lo, hi]` and
    /// has 0 as a node. Requires `lo < 0 < hi` and `points = 2^k + 1 ≥ 65`.
    pub fn covering(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo < 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "grid interval [{lo}, {hi}] must be finite and contain 0 in its interior"
            )));
        }
        if points < MIN_POINTS || !(points - 1).is_power_of_two() {
            return Err(Error::InvalidProblem(format!(
                "grid needs 2^k + 1 >= {MIN_POINTS} points, got {points}"
            )));
        }
        let cells = (points - 1) as f64;
        let zero = ((-lo / (hi - lo) * cells).round() as usize).clamp(1, points - 2);
        let h = (-lo / zero as f64).max(hi / (points - 1 - zero) as f64);
        Ok(Self { h, points, zero })
    }

    /// `[-radius, radius]` with 0 at the centre node.
    pub fn symmetric(radius: f64, points: usize) -> Result<Self> {
        Self::covering(-radius, radius, points)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn zero_index(&self) -> usize {
        self.zero
    }

    #[inline]
    pub fn x(&self, k: usize) -> f64 {
        (k as f64 - self.zero as f64) * self.h
    }

    pub fn lo(&self) -> f64 {
        self.x(0)
    }

    pub fn hi(&self) -> f64 {
        self.x(self.points - 1)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo() && x <= self.hi()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|k| self.x(k))
    }

    /// The same interval at half the spacing; every old node stays a node.
    pub fn refined(&self) -> Self {
        Self {
            h: 0.5 * self.h,
            points: 2 * self.points - 1,
            zero: 2 * self.zero,
        }
    }
}

/// Fourth-order node slopes for values sampled on `domain`.
fn node_slopes(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let v = values;
    let c = 1.0 / (12.0 * h);
    let mut s = vec![0.0; n];
    for k in 2..n - 2 {
        s[k] = (v[k - 2] - 8.0 * v[k - 1] + 8.0 * v[k + 1] - v[k + 2]) * c;
    }
    s[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) * c;
    s[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) * c;
    let m = n - 1;
    s[m] = (25.0 * v[m] - 48.0 * v[m - 1] + 36.0 * v[m - 2] - 16.0 * v[m - 3] + 3.0 * v[m - 4]) * c;
    s[m - 1] = (3.0 * v[m] + 10.0 * v[m - 1] - 18.0 * v[m - 2] + 6.0 * v[m - 3] - v[m - 4]) * c;
    s
}

/// C¹ piecewise-cubic Hermite interpolant of grid samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    domain: GridDomain,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Interpolant {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.points());
        let slopes = node_slopes(&values, domain.h());
        Self {
            domain,
            values,
            slopes,
        }
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value, first and second derivative at `x`. Points outside the domain
    /// use the boundary cell's cubic.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let d = &self.domain;
        let h = d.h;
        let pos = x / h + d.zero as f64;
        let k = (pos.floor().max(0.0) as usize).min(d.points - 2);
        let u = pos - k as f64;
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        let val = (2.0 * u3 - 3.0 * u2 + 1.0) * v0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * v1
            + (u3 - u2) * m1;
        let d1 = ((6.0 * u2 - 6.0 * u) * v0
            + (3.0 * u2 - 4.0 * u + 1.0) * m0
            + (-6.0 * u2 + 6.0 * u) * v1
            + (3.0 * u2 - 2.0 * u) * m1)
            / h;
        let d2 = ((12.0 * u - 6.0) * v0
            + (6.0 * u - 4.0) * m0
            + (-12.0 * u + 6.0) * v1
            + (6.0 * u - 2.0) * m1)
            / (h * h);
        (val, d1, d2)
    }

    /// Resamples onto another grid.
    pub fn resample(&self, target: GridDomain) -> Vec<f64> {
        target.nodes().map(|x| self.eval(x).0).collect()
    }
}

/// Gradient tolerance for the Newton polish.
pub const INNER_GRADIENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    /// Second derivative of the objective at `x`.
    pub curvature: f64,
    /// Grid index of the best node.
    pub node: usize,
}

/// Why [`minimise`] could not produce an interior minimiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinimiseError {
    Boundary { at: f64 },
    NonFinite,
}

/// Minimises a function on `domain` given its values at the nodes
/// (`at_node`) and a smooth evaluator `(value, d1, d2)` between them.
///
/// The best node is located by golden-section search on the node index
/// (the node values of a strictly convex function are unimodal); the
/// continuous minimiser is then polished by safeguarded Newton on the
/// derivative inside the two neighbouring cells. A best node on the
/// boundary is an error rather than a clamp.
pub fn minimise(
    domain: &GridDomain,
    at_node: impl Fn(usize) -> f64,
    eval: impl Fn(f64) -> (f64, f64, f64),
) -> std::result::Result<Minimum, MinimiseError> {
    let node = golden_index_search(domain.points(), &at_node);
    if node == 0 || node == domain.points() - 1 {
        return Err(MinimiseError::Boundary { at: domain.x(node) });
    }
    let (mut a, mut b) = (domain.x(node - 1), domain.x(node + 1));
    let mut x = domain.x(node);
    let (mut fx, mut dx, mut ddx) = eval(x);
    if !(fx.is_finite() && dx.is_finite() && ddx.is_finite()) {
        return Err(MinimiseError::NonFinite);
    }
    let (_, da, _) = eval(a);
    let (_, db, _) = eval(b);
    if da < 0.0 && db > 0.0 {
        for _ in 0..100 {
            if dx.abs() <= INNER_GRADIENT_TOL || b - a <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
                break;
            }
            if dx > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let newton = x - dx / ddx;
            x = if ddx > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            (fx, dx, ddx) = eval(x);
            if !(fx.is_finite() && dx.is_finite()) {
                return Err(MinimiseError::NonFinite);
            }
        }
    }
    // Without a sign change the interpolant is flat to rounding across the
    // bracket; the best node is then the answer.
    Ok(Minimum {
        x,
        value: fx,
        curvature: ddx,
        node,
    })
}

/// Index of the minimum of a unimodal sequence `f(0..len)`.
fn golden_index_search(len: usize, f: impl Fn(usize) -> f64) -> usize {
    const INV_PHI: f64 = 0.618_033_988_749_895;
    let (mut lo, mut hi) = (0usize, len - 1);
    while hi - lo > 3 {
        let span = (hi - lo) as f64;
        let m1 = lo + ((span * (1.0 - INV_PHI)).round() as usize).max(1);
        let m2 = (lo + (span * INV_PHI).round() as usize).min(hi - 1).max(m1 + 1);
        let (f1, f2) = (f(m1), f(m2));
        if f1 < f2 {
            hi = m2;
        } else if f1 > f2 {
            lo = m1;
        } else {
            lo = m1;
            hi = m2;
        }
    }
    (lo..=hi)
        .min_by(|&a, &b| f(a).total_cmp(&f(b)))
        .unwrap_or(lo)
}
