//! Ground-truth minimisers: a direct symmetric positive-definite solve for
//! quadratic problems and damped Newton for general objectives.
//!
//! Both are independent of the message-passing code: the linear algebra
//! works on the assembled matrix, and the Newton Hessian is built from the
//! analytic factor partials.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{PairwiseObjective, QuadraticProblem};

/// Systems at or above this size use sparse elimination.
pub const DENSE_LIMIT: usize = 512;

/// Symmetric matrix given by its diagonal and strictly-upper entries.
#[derive(Debug, Clone)]
pub struct SymmetricSystem {
    pub diag: Vec<f64>,
    pub off: Vec<(usize, usize, f64)>,
}

impl SymmetricSystem {
    pub fn from_quadratic(q: &QuadraticProblem) -> Self {
        let off = q
            .graph()
            .edges()
            .iter()
            .zip(q.off())
            .map(|(&(i, j), &a)| (i, j, a))
            .collect();
        Self {
            diag: q.diag().to_vec(),
            off,
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Solves `M x = rhs`, failing if `M` is not positive definite.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                got: rhs.len(),
            });
        }
        if self.n() < DENSE_LIMIT {
            self.solve_dense(rhs)
        } else {
            SparseLdl::factor(self)?.solve(rhs)
        }
    }

    pub fn solve_dense(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (i, &d) in self.diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        for &(i, j, v) in &self.off {
            m[(i, j)] += v;
            m[(j, i)] += v;
        }
        let chol = m.cholesky().ok_or(Error::NotPositiveDefinite {
            pivot: 0,
            value: f64::NAN,
        })?;
        let x = chol.solve(&DVector::from_column_slice(rhs));
        Ok(x.iter().copied().collect())
    }
}

/// `LDLᵀ` factorisation by symmetric elimination in minimum-degree order.
/// On trees this never creates fill.
#[derive(Debug, Clone)]
pub struct SparseLdl {
    n: usize,
    /// `(pivot, d, [(row, l_row)])` in elimination order.
    steps: Vec<(usize, f64, Vec<(usize, f64)>)>,
}

impl SparseLdl {
    pub fn factor(m: &SymmetricSystem) -> Result<Self> {
        let n = m.n();
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        let mut diag = m.diag.clone();
        for &(i, j, v) in &m.off {
            if v != 0.0 {
                *rows[i].entry(j).or_insert(0.0) += v;
                *rows[j].entry(i).or_insert(0.0) += v;
            }
        }
        let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (rows[i].len(), i)).collect();
        let mut done = vec![false; n];
        let mut steps = Vec::with_capacity(n);
        while let Some((_, p)) = queue.pop_first() {
            let d = diag[p];
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: p, value: d });
            }
            done[p] = true;
            let col: Vec<(usize, f64)> = rows[p]
                .iter()
                .filter(|(u, _)| !done[**u])
                .map(|(&u, &v)| (u, v))
                .collect();
            for &(u, _) in &col {
                queue.remove(&(rows[u].len(), u));
                rows[u].remove(&p);
            }
            for (a, &(u, vu)) in col.iter().enumerate() {
                diag[u] -= vu * vu / d;
                for &(v, vv) in &col[a + 1..] {
                    let delta = vu * vv / d;
                    *rows[u].entry(v).or_insert(0.0) -= delta;
                    *rows[v].entry(u).or_insert(0.0) -= delta;
                }
            }
            for &(u, _) in &col {
                queue.insert((rows[u].len(), u));
            }
            rows[p].clear();
            let l = col.into_iter().map(|(u, v)| (u, v / d)).collect();
            steps.push((p, d, l));
        }
        Ok(Self { n, steps })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: rhs.len(),
            });
        }
        let mut x = rhs.to_vec();
        for (p, _, l) in &self.steps {
            let xp = x[*p];
            for &(u, lu) in l {
                x[u] -= lu * xp;
            }
        }
        for (p, d, _) in &self.steps {
            x[*p] /= d;
        }
        for (p, _, l) in self.steps.iter().rev() {
            let s: f64 = l.iter().map(|&(u, lu)| lu * x[u]).sum();
            x[*p] -= s;
        }
        Ok(x)
    }
}

/// `x* = A⁻¹ b`.
pub fn solve_quadratic_direct(q: &QuadraticProblem) -> Result<Vec<f64>> {
    SymmetricSystem::from_quadratic(q).solve(q.b())
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iterations: 200,
            max_halvings: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub gradient_inf: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn hessian(obj: &PairwiseObjective, x: &[f64]) -> SymmetricSystem {
    let diag = (0..obj.n()).map(|i| obj.hessian_diagonal(x, i)).collect();
    let off = obj
        .graph()
        .edges()
        .iter()
        .zip(obj.edge_factors())
        .map(|(&(i, j), f)| (i, j, f.partials(x[i], x[j]).d12))
        .collect();
    SymmetricSystem { diag, off }
}

/// Newton's method with Armijo backtracking (step halving) on the
/// analytically assembled Hessian.
pub fn solve_general_newton(
    obj: &PairwiseObjective,
    x_init: &[f64],
    opts: NewtonOptions,
) -> Result<NewtonResult> {
    let mut x = x_init.to_vec();
    let mut g = obj.gradient(&x)?;
    let mut fx = obj.evaluate(&x)?;
    for it in 0..=opts.max_iterations {
        let gn = inf_norm(&g);
        if !gn.is_finite() || !fx.is_finite() {
            return Err(Error::NonFinite(format!("Newton iterate {it}")));
        }
        if gn <= opts.tol {
            return Ok(NewtonResult {
                x,
                iterations: it,
                gradient_inf: gn,
            });
        }
        if it == opts.max_iterations {
            break;
        }
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let dir = hessian(obj, &x).solve(&neg_g)?;
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let ft = obj.evaluate(&trial)?;
            let gt = obj.gradient(&trial)?;
            // Near the optimum F stalls at rounding level; a smaller
            // gradient is then the only meaningful progress signal.
            if ft <= fx + 1e-4 * step * slope || inf_norm(&gt) < gn {
                x = trial;
                fx = ft;
                g = gt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence(format!(
                "line search failed after {} halvings at Newton iteration {it}",
                opts.max_halvings
            )));
        }
    }
    Err(Error::NoConvergence(format!(
        "Newton did not reach |grad| <= {} in {} iterations",
        opts.tol, opts.max_iterations
    )))
}
