//! Scaled diagonal dominance: for every node `i` and every `x`,
//! `Σ_{j∈N_i} w_j |∂²F/∂x_i∂x_j| ≤ λ w_i ∂²F/∂x_i²` with `λ < 1`, `w > 0`.
//!
//! For a quadratic the condition does not depend on `x`, and the smallest
//! feasible `λ` over positive `w` is the spectral radius of
//! `B = D⁻¹|A_off|`, attained at its Perron vector. The power iteration
//! below brackets that radius with Collatz–Wielandt bounds
//! `min_i (Bw)_i/w_i ≤ ρ(B) ≤ max_i (Bw)_i/w_i`, so a returned certificate
//! is valid for the returned `w` regardless of how far the iteration got.

use crate::error::{Error, Result};
use crate::problem::{PairwiseObjective, QuadraticProblem};

pub const POWER_MAX_ITERATIONS: usize = 10_000;
pub const POWER_TOLERANCE: f64 = 1e-13;
/// Relative slack allowed when re-checking a certificate row by row.
pub const CERTIFICATE_RTOL: f64 = 1e-12;
pub const DEFAULT_BOX: (f64, f64) = (-10.0, 10.0);
pub const DEFAULT_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    /// Constant Hessian; the condition was checked exactly.
    ExactQuadratic,
    /// Builtin factor families with closed-form global curvature bounds.
    ClosedForm,
    /// Checked only at sample points inside a box.
    Sampled,
}

impl CertificateKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ExactQuadratic => "exact_quadratic",
            Self::ClosedForm => "closed_form",
            Self::Sampled => "sampled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact_quadratic" => Some(Self::ExactQuadratic),
            "closed_form" => Some(Self::ClosedForm),
            "sampled" => Some(Self::Sampled),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceCertificate {
    pub lambda: f64,
    pub w: Vec<f64>,
    pub kind: CertificateKind,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceRefutation {
    /// Best achievable `λ` (the spectral radius of `D⁻¹|A_off|`).
    pub lambda_star: f64,
    /// Perron vector at `lambda_star`.
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certification {
    Certified(DominanceCertificate),
    Refuted(DominanceRefutation),
    /// The power iteration hit its cap with a bracket straddling 1.
    Indeterminate { lower: f64, upper: f64 },
}

impl Certification {
    pub fn certificate(&self) -> Option<&DominanceCertificate> {
        match self {
            Self::Certified(c) => Some(c),
            _ => None,
        }
    }
}

/// Nonnegative square matrix in row-compressed form.
#[derive(Debug, Clone)]
pub struct NonnegativeMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl NonnegativeMatrix {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert!(rows.iter().flatten().all(|&(_, v)| v >= 0.0));
        Self { rows }
    }

    /// `B_ij = |a_ij| / a_ii` off the diagonal.
    pub fn jacobi_of(q: &QuadraticProblem) -> Self {
        let g = q.graph();
        let rows = (0..q.n())
            .map(|i| {
                g.neighbours(i)
                    .iter()
                    .map(|nb| (nb.node, q.off()[nb.edge].abs() / q.diag()[i]))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    fn apply_row(&self, i: usize, v: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, b)| b * v[j]).sum()
    }

    /// Collatz–Wielandt bracket `(min_i (Bv)_i/v_i, max_i (Bv)_i/v_i)` over
    /// `members`, for `v > 0`.
    pub fn collatz_wielandt(&self, v: &[f64], members: &[usize]) -> (f64, f64) {
        members.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &i| {
            let r = self.apply_row(i, v) / v[i];
            (lo.min(r), hi.max(r))
        })
    }

    /// Connected components of the support pattern.
    fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let mut members = vec![s];
            label[s] = out.len();
            let mut head = 0;
            while head < members.len() {
                let v = members[head];
                head += 1;
                for &(j, b) in &self.rows[v] {
                    if b > 0.0 && label[j] == usize::MAX {
                        label[j] = out.len();
                        members.push(j);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PerronResult {
    pub lower: f64,
    pub upper: f64,
    /// Positive vector, max entry 1 on every component.
    pub w: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PerronResult {
    pub fn estimate(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Perron root and vector of a symmetric-pattern nonnegative matrix by
/// shifted power iteration on `B + I`, one connected component at a time.
/// Isolated nodes get `w_i = 1` and contribute a zero radius.
pub fn perron(b: &NonnegativeMatrix, max_iterations: usize, tol: f64) -> PerronResult {
    let n = b.n();
    let mut w = vec![1.0; n];
    let mut lower = 0.0f64;
    let mut upper = 0.0f64;
    let mut iterations = 0;
    let mut converged = true;
    let mut next = vec![0.0; n];
    for comp in b.components() {
        if comp.len() == 1 && b.row(comp[0]).iter().all(|&(_, v)| v == 0.0) {
            continue;
        }
        let mut prev_rq = f64::NAN;
        let mut done = false;
        let mut k = 0;
        while k < max_iterations {
            k += 1;
            for &i in &comp {
                next[i] = w[i] + b.apply_row(i, &w);
            }
            let scale = comp.iter().fold(0.0f64, |m, &i| m.max(next[i]));
            for &i in &comp {
                w[i] = next[i] / scale;
            }
            let (lo, hi) = b.collatz_wielandt(&w, &comp);
            let num: f64 = comp.iter().map(|&i| w[i] * b.apply_row(i, &w)).sum();
            let den: f64 = comp.iter().map(|&i| w[i] * w[i]).sum();
            let rq = num / den;
            let width_ok = hi - lo <= tol * hi.max(1.0);
            let rq_ok = (rq - prev_rq).abs() < tol;
            prev_rq = rq;
            if width_ok && rq_ok {
                done = true;
                break;
            }
        }
        iterations = iterations.max(k);
        converged &= done;
        let (lo, hi) = b.collatz_wielandt(&w, &comp);
        lower = lower.max(lo);
        upper = upper.max(hi);
    }
    PerronResult {
        lower,
        upper,
        w,
        iterations,
        converged,
    }
}

fn classify(p: PerronResult, kind: CertificateKind, sample_count: usize) -> Certification {
    if p.upper < 1.0 {
        Certification::Certified(DominanceCertificate {
            lambda: p.upper,
            w: p.w,
            kind,
            sample_count,
        })
    } else if p.converged || p.lower >= 1.0 {
        Certification::Refuted(DominanceRefutation {
            lambda_star: p.estimate(),
            w: p.w,
        })
    } else {
        Certification::Indeterminate {
            lower: p.lower,
            upper: p.upper,
        }
    }
}

/// Finds the tightest `(λ, w)` for a quadratic, or refutes dominance.
pub fn certify_quadratic(q: &QuadraticProblem) -> Certification {
    let b = NonnegativeMatrix::jacobi_of(q);
    classify(
        perron(&b, POWER_MAX_ITERATIONS, POWER_TOLERANCE),
        CertificateKind::ExactQuadratic,
        0,
    )
}

/// Per-row slack `λ w_i a_ii − Σ_{j∈N_i} w_j |a_ij|`.
pub fn dominance_margin(q: &QuadraticProblem, lambda: f64, w: &[f64]) -> Vec<f64> {
    let g = q.graph();
    (0..q.n())
        .map(|i| {
            let s: f64 = g
                .neighbours(i)
                .iter()
                .map(|nb| w[nb.node] * q.off()[nb.edge].abs())
                .sum();
            lambda * w[i] * q.diag()[i] - s
        })
        .collect()
}

/// Row-by-row re-check of a quadratic certificate.
pub fn verify_quadratic(q: &QuadraticProblem, lambda: f64, w: &[f64]) -> bool {
    if !(0.0..1.0).contains(&lambda) || w.len() != q.n() || w.iter().any(|&v| !(v > 0.0)) {
        return false;
    }
    dominance_margin(q, lambda, w)
        .iter()
        .enumerate()
        .all(|(i, &m)| m >= -CERTIFICATE_RTOL * lambda.max(f64::EPSILON) * w[i] * q.diag()[i])
}

/// Outcome of a sampled dominance check.
#[derive(Debug, Clone, PartialEq)]
pub enum SampledCheck {
    Pass { points: usize },
    Witness {
        row: usize,
        x: Vec<f64>,
        /// `Σ_j w_j |∂²F/∂x_i∂x_j|`
        lhs: f64,
        /// `λ w_i ∂²F/∂x_i²`
        rhs: f64,
    },
}

/// Radical-inverse Halton coordinate.
fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let inv = 1.0 / base as f64;
    while index > 0 {
        f *= inv;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

fn first_primes(k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut c = 2;
    while out.len() < k {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// The points visited by [`certify_general`]: the box centre, the corners of
/// every edge's 2-D slice (other coordinates at the centre), then `samples`
/// Halton points.
pub fn sample_points<'a>(
    obj: &'a PairwiseObjective,
    boxes: &[(f64, f64)],
    samples: usize,
) -> impl Iterator<Item = Vec<f64>> + 'a {
    let centre: Vec<f64> = boxes.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    let mut corners = Vec::with_capacity(4 * obj.graph().edge_count());
    for &(i, j) in obj.graph().edges() {
        for (ci, cj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let mut x = centre.clone();
            x[i] = if ci == 0 { boxes[i].0 } else { boxes[i].1 };
            x[j] = if cj == 0 { boxes[j].0 } else { boxes[j].1 };
            corners.push(x);
        }
    }
    let primes = first_primes(boxes.len());
    let boxes = boxes.to_vec();
    std::iter::once(centre)
        .chain(corners)
        .chain((1..=samples).map(move |k| {
            boxes
                .iter()
                .zip(&primes)
                .map(|(&(lo, hi), &p)| lo + (hi - lo) * halton(k, p))
                .collect()
        }))
}

/// Checks the dominance inequality at sample points inside `boxes`. This is
/// a sampled check, not a proof.
pub fn certify_general(
    obj: &PairwiseObjective,
    boxes: &[(f64, f64)],
    samples: usize,
    lambda: f64,
    w: &[f64],
) -> Result<SampledCheck> {
    let n = obj.n();
    if boxes.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: boxes.len(),
        });
    }
    if w.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: w.len(),
        });
    }
    if samples == 0 || w.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidProblem(
            "sampled check needs samples >= 1 and w > 0".into(),
        ));
    }
    if boxes
        .iter()
        .any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
    {
        return Err(Error::InvalidProblem("sampling box must be finite".into()));
    }
    let g = obj.graph();
    let mut points = 0;
    for x in sample_points(obj, boxes, samples) {
        points += 1;
        for i in 0..n {
            let diag = obj.hessian_diagonal(&x, i);
            let mut lhs = 0.0;
            for nb in g.neighbours(i) {
                let d12 = obj.oriented_by_index(nb.edge, i).partials(x[i], x[nb.node]).d12;
                lhs += w[nb.node] * d12.abs();
            }
            if !diag.is_finite() || !lhs.is_finite() {
                return Err(Error::NonFinite(format!(
                    "second derivative in row {i} at sample point {points}"
                )));
            }
            let rhs = lambda * w[i] * diag;
            if lhs > rhs + CERTIFICATE_RTOL * rhs.abs() {
                return Ok(SampledCheck::Witness { row: i, x, lhs, rhs });
            }
        }
    }
    Ok(SampledCheck::Pass { points })
}

/// Bound matrix `B_ij = sup|∇₁₂ f_ij| / inf ∂²F/∂x_i²`. Closed form when
/// every factor is builtin, otherwise extrema over the sample points in
/// `boxes` (in which case the flag is `false`).
pub fn curvature_bound_matrix(
    obj: &PairwiseObjective,
    boxes: &[(f64, f64)],
    samples: usize,
) -> Result<(NonnegativeMatrix, bool)> {
    let n = obj.n();
    let g = obj.graph();
    let closed: Option<Vec<f64>> = (0..n).map(|i| obj.min_diagonal_curvature(i)).collect();
    let cross: Option<Vec<f64>> = obj.edge_factors().iter().map(|f| f.max_abs_cross()).collect();
    let (min_diag, max_cross, exact) = match (closed, cross) {
        (Some(d), Some(c)) => (d, c, true),
        (d, c) => {
            let mut min_diag = vec![f64::INFINITY; n];
            let mut max_cross = vec![0.0f64; g.edge_count()];
            for x in sample_points(obj, boxes, samples) {
                for (i, m) in min_diag.iter_mut().enumerate() {
                    *m = m.min(obj.hessian_diagonal(&x, i));
                }
                for (e, (&(i, j), f)) in g.edges().iter().zip(obj.edge_factors()).enumerate() {
                    max_cross[e] = max_cross[e].max(f.partials(x[i], x[j]).d12.abs());
                }
            }
            (d.unwrap_or(min_diag), c.unwrap_or(max_cross), false)
        }
    };
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        if !(min_diag[i] > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "diagonal curvature of node {i} is not bounded away from zero ({})",
                min_diag[i]
            )));
        }
        rows.push(
            g.neighbours(i)
                .iter()
                .map(|nb| (nb.node, max_cross[nb.edge] / min_diag[i]))
                .collect(),
        );
    }
    Ok((NonnegativeMatrix::from_rows(rows), exact))
}

/// Certifies a general objective: `(λ, w)` from the Perron pair of the
/// curvature bound matrix, then re-checked at sample points. A certificate
/// from closed-form bounds is global; otherwise it only covers `boxes`.
pub fn certify_objective(
    obj: &PairwiseObjective,
    boxes: &[(f64, f64)],
    samples: usize,
) -> Result<Certification> {
    if let Some(q) = obj.as_quadratic() {
        return Ok(certify_quadratic(&q));
    }
    let (b, exact) = curvature_bound_matrix(obj, boxes, samples)?;
    let p = perron(&b, POWER_MAX_ITERATIONS, POWER_TOLERANCE);
    let kind = if exact {
        CertificateKind::ClosedForm
    } else {
        CertificateKind::Sampled
    };
    let outcome = classify(p, kind, samples);
    if let Certification::Certified(cert) = &outcome {
        if let SampledCheck::Witness { row, lhs, rhs, .. } =
            certify_general(obj, boxes, samples, cert.lambda, &cert.w)?
        {
            return Err(Error::InvalidProblem(format!(
                "bound-matrix certificate λ = {} fails at a sample point in row {row} ({lhs} > {rhs})",
                cert.lambda
            )));
        }
    }
    Ok(outcome)
}
