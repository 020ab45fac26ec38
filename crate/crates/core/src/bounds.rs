//! Geometric convergence-rate bounds and their comparison with measured
//! error traces.
//!
//! Every bound has the form `C λ^(t+k) / (1 − λ)` in the weighted error
//! `max_r |x_r^(t) − x*_r| / w_r`:
//!
//! * general: `k = 0`, `C = max_i Σ_{u∈N_i} |∇₁f_iu(x*_i, x*_u) − ∇J⁰_{u→i}(x*_i)| / (w_i inf ∂²F/∂x_i²)`;
//! * simplified (initial messages `f_ji(·, x⁰_i)`): `k = 1`,
//!   `C = M max_v |x⁰_v − x*_v| / w_v` with `M` the diagonal conditioning value;
//! * quadratic: the same two with `∇J⁰_{u→i}(x) = α⁰_{u→i} x − β⁰_{u→i}` and `M = 1`.

use crate::error::{Error, Result};
use crate::general::GeneralInit;
use crate::problem::{PairwiseObjective, QuadraticProblem};
use crate::quadratic::QuadraticMessage;
use crate::trace::{weighted_error, Trace};

/// Relative slack in `measured ≤ bound`.
pub const BOUND_RTOL: f64 = 1e-9;
/// Weighted errors below `FLOOR_RTOL (1 + ‖x*‖∞) / min w` are at the
/// resolution of double precision and cannot be compared with a smaller
/// bound.
pub const FLOOR_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    General,
    GeneralSimplified,
    Quadratic,
    QuadraticSimplified,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::General => "general",
            Self::GeneralSimplified => "general_simplified",
            Self::Quadratic => "quadratic",
            Self::QuadraticSimplified => "quadratic_simplified",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "general" => Some(Self::General),
            "general_simplified" => Some(Self::GeneralSimplified),
            "quadratic" => Some(Self::Quadratic),
            "quadratic_simplified" => Some(Self::QuadraticSimplified),
            _ => None,
        }
    }

    /// Extra power of `λ` in the bound.
    fn offset(self) -> i32 {
        match self {
            Self::General | Self::Quadratic => 0,
            Self::GeneralSimplified | Self::QuadraticSimplified => 1,
        }
    }
}

/// `bound(t) = coefficient · λ^(t + offset) / (1 − λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBound {
    pub kind: BoundKind,
    pub lambda: f64,
    pub w: Vec<f64>,
    pub coefficient: f64,
    /// Conditioning value, for the simplified kinds.
    pub m: Option<f64>,
}

impl RateBound {
    pub fn value(&self, t: usize) -> f64 {
        let exp = t as i32 + self.kind.offset();
        self.coefficient * self.lambda.powi(exp) / (1.0 - self.lambda)
    }
}

fn check_lambda_w(lambda: f64, w: &[f64], n: usize) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::BoundInapplicable(format!("lambda = {lambda} is not in [0, 1)")));
    }
    if w.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: w.len(),
        });
    }
    if w.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::BoundInapplicable("weights must be positive".into()));
    }
    Ok(())
}

fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: v.len(),
        });
    }
    Ok(())
}

/// `max_i sup ∂²F/∂x_i² / inf ∂²F/∂x_i²` in closed form; inapplicable when
/// a factor is custom or the supremum is infinite.
pub fn conditioning_value(obj: &PairwiseObjective) -> Result<f64> {
    let mut m = 1.0f64;
    for i in 0..obj.n() {
        let (Some(lo), Some(hi)) = (obj.min_diagonal_curvature(i), obj.max_diagonal_curvature(i))
        else {
            return Err(Error::BoundInapplicable(
                "conditioning value needs closed-form curvature bounds".into(),
            ));
        };
        if !hi.is_finite() {
            return Err(Error::BoundInapplicable(format!(
                "diagonal curvature of node {i} is unbounded, so the conditioning value is infinite"
            )));
        }
        if !(lo > 0.0) {
            return Err(Error::BoundInapplicable(format!(
                "diagonal curvature of node {i} has infimum {lo}"
            )));
        }
        m = m.max(hi / lo);
    }
    Ok(m)
}

/// `inf ∂²F/∂x_i²`: closed form for builtin factors, otherwise the minimum
/// over a uniform sampling of `boxes` (node `i` and each neighbour).
fn min_curvature(obj: &PairwiseObjective, i: usize, boxes: Option<&[(f64, f64)]>) -> Result<f64> {
    if let Some(c) = obj.min_diagonal_curvature(i) {
        return Ok(c);
    }
    let boxes = boxes.ok_or_else(|| {
        Error::BoundInapplicable(format!(
            "node {i} has custom factors; a box is needed for its curvature infimum"
        ))
    })?;
    const STEPS: usize = 64;
    let at = |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * k as f64 / STEPS as f64;
    let g = obj.graph();
    let mut min = f64::INFINITY;
    for k in 0..=STEPS {
        let y = at(boxes[i], k);
        let mut v = obj.node_factor(i).second_derivative(y);
        for nb in g.neighbours(i) {
            let f = obj.oriented_by_index(nb.edge, i);
            let lowest = (0..=STEPS)
                .map(|l| f.partials(y, at(boxes[nb.node], l)).d11)
                .fold(f64::INFINITY, f64::min);
            v += lowest;
        }
        min = min.min(v);
    }
    Ok(min)
}

/// General bound from the initial messages of `init`. Custom factors need
/// `boxes` for the curvature infimum.
pub fn bound_general(
    obj: &PairwiseObjective,
    init: &GeneralInit,
    lambda: f64,
    w: &[f64],
    x_star: &[f64],
    boxes: Option<&[(f64, f64)]>,
) -> Result<RateBound> {
    let n = obj.n();
    check_lambda_w(lambda, w, n)?;
    check_len(x_star, n)?;
    check_len(init.x0(), n)?;
    let g = obj.graph();
    let mut coefficient = 0.0f64;
    for i in 0..n {
        let mut num = 0.0;
        for nb in g.neighbours(i) {
            let u = nb.node;
            let f = obj.oriented_by_index(nb.edge, i);
            let grad = f.partials(x_star[i], x_star[u]).d1;
            let d = g.directed_index(u, i).unwrap();
            let grad0 = match init {
                GeneralInit::Estimates(x0) => f.partials(x_star[i], x0[u]).d1,
                GeneralInit::Custom { messages, .. } => messages[d].derivative(x_star[i]),
            };
            num += (grad - grad0).abs();
        }
        let den = min_curvature(obj, i, boxes)?;
        if !(den > 0.0) {
            return Err(Error::BoundInapplicable(format!(
                "curvature infimum of node {i} is {den}"
            )));
        }
        coefficient = coefficient.max(num / (w[i] * den));
    }
    Ok(RateBound {
        kind: BoundKind::General,
        lambda,
        w: w.to_vec(),
        coefficient,
        m: None,
    })
}

/// Simplified bound for initial messages `J⁰_{i→j} = f_ji(·, x⁰_i)`.
pub fn bound_simplified(
    obj: &PairwiseObjective,
    lambda: f64,
    w: &[f64],
    x0: &[f64],
    x_star: &[f64],
) -> Result<RateBound> {
    let n = obj.n();
    check_lambda_w(lambda, w, n)?;
    check_len(x0, n)?;
    check_len(x_star, n)?;
    let m = conditioning_value(obj)?;
    Ok(RateBound {
        kind: BoundKind::GeneralSimplified,
        lambda,
        w: w.to_vec(),
        coefficient: m * weighted_error(x0, x_star, w),
        m: Some(m),
    })
}

/// Quadratic bound for arbitrary initial `(α⁰, β⁰)`.
pub fn bound_quadratic(
    q: &QuadraticProblem,
    messages: &[QuadraticMessage],
    lambda: f64,
    w: &[f64],
    x_star: &[f64],
) -> Result<RateBound> {
    let n = q.n();
    check_lambda_w(lambda, w, n)?;
    check_len(x_star, n)?;
    let g = q.graph();
    if messages.len() != 2 * g.edge_count() {
        return Err(Error::Dimension {
            expected: 2 * g.edge_count(),
            got: messages.len(),
        });
    }
    let mut coefficient = 0.0f64;
    for i in 0..n {
        let num: f64 = g
            .neighbours(i)
            .iter()
            .map(|nb| {
                let m = messages[g.directed_index(nb.node, i).unwrap()];
                (q.off()[nb.edge] * x_star[nb.node] - m.alpha * x_star[i] + m.beta).abs()
            })
            .sum();
        coefficient = coefficient.max(num / (w[i] * q.diag()[i]));
    }
    Ok(RateBound {
        kind: BoundKind::Quadratic,
        lambda,
        w: w.to_vec(),
        coefficient,
        m: None,
    })
}

/// Quadratic simplified bound (`α⁰ = 0`, `β⁰_{i→j} = −a_ji x⁰_i`, `M = 1`).
pub fn bound_quadratic_simplified(
    q: &QuadraticProblem,
    lambda: f64,
    w: &[f64],
    x0: &[f64],
    x_star: &[f64],
) -> Result<RateBound> {
    let n = q.n();
    check_lambda_w(lambda, w, n)?;
    check_len(x0, n)?;
    check_len(x_star, n)?;
    Ok(RateBound {
        kind: BoundKind::QuadraticSimplified,
        lambda,
        w: w.to_vec(),
        coefficient: weighted_error(x0, x_star, w),
        m: Some(1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub t: usize,
    pub measured: f64,
    pub bound: f64,
    pub satisfied: bool,
    /// The bound was below the floating-point floor and the row was judged
    /// against the floor instead.
    pub at_floor: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub lambda: f64,
    pub w: Vec<f64>,
    pub m: Option<f64>,
    pub floor: f64,
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.satisfied).count()
    }

    pub fn floor_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.at_floor).count()
    }

    pub fn all_satisfied(&self) -> bool {
        self.violations() == 0
    }

    /// One line: verdict, kind, λ, rows checked, violations.
    pub fn summary(&self) -> String {
        format!(
            "{} bound={} lambda={} rows={} violations={} at_floor={}",
            if self.all_satisfied() { "SATISFIED" } else { "VIOLATED" },
            self.kind.name(),
            self.lambda,
            self.rows.len(),
            self.violations(),
            self.floor_rows()
        )
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,measured,bound,satisfied,at_floor")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{:e},{},{}",
                r.t, r.measured, r.bound, r.satisfied, r.at_floor
            )?;
        }
        Ok(())
    }
}

/// Evaluates `bound` at every row of `trace` against `x_star`; also fills
/// the trace's `err_weighted` and `bound_value` columns.
pub fn check_trace(trace: &mut Trace, bound: &RateBound, x_star: &[f64]) -> BoundReport {
    let w = &bound.w;
    let scale = 1.0 + x_star.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let w_min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let floor = FLOOR_RTOL * scale / w_min;
    let rows = trace
        .rows
        .iter_mut()
        .map(|row| {
            let measured = weighted_error(&row.x, x_star, w);
            let value = bound.value(row.t);
            row.err_weighted = Some(measured);
            row.bound_value = Some(value);
            let at_floor = value < floor;
            let limit = if at_floor { floor } else { value * (1.0 + BOUND_RTOL) };
            BoundRow {
                t: row.t,
                measured,
                bound: value,
                satisfied: measured <= limit,
                at_floor,
            }
        })
        .collect();
    BoundReport {
        kind: bound.kind,
        lambda: bound.lambda,
        w: w.clone(),
        m: bound.m,
        floor,
        rows,
    }
}
