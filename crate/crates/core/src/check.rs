//! The full invariant pipeline for one problem: certify, solve, compare
//! with the exact minimiser, verify the computation-tree key property and
//! check the rate bound at every iteration.

use rayon::prelude::*;

use crate::bounds::{
    bound_general, bound_quadratic, bound_quadratic_simplified, bound_simplified, check_trace,
    BoundReport, RateBound,
};
use crate::dominance::{certify_objective, certify_quadratic, Certification};
use crate::error::{Error, Result};
use crate::general::{
    check_local_convexity, check_message_envelope, check_minimiser_slope, run_general_observed,
    GeneralInit, GeneralRunOptions, GridOptions,
};
use crate::io::Problem;
use crate::quadratic::{check_edge_invariants, init_messages_quadratic, run_quadratic_observed, QuadraticInit, RunOptions};
use crate::reference::{solve_general_newton, solve_quadratic_direct, NewtonOptions};
use crate::trace::Trace;
use crate::tree::{key_property_general, key_property_quadratic, projected_size, KeyProperty, MAX_TREE_NODES};

/// Resolution floor for bound checks on the grid path, relative to
/// `1 + ‖x*‖∞`; interpolation error keeps iterates from getting closer.
pub const GRID_FLOOR_RTOL: f64 = 1e-8;
/// Key-property tolerance on the parametric path.
pub const KEY_TOL_QUADRATIC: f64 = 1e-9;
/// Key-property tolerance on the grid path.
pub const KEY_TOL_GENERAL: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub x0: Option<Vec<f64>>,
    pub t_max: usize,
    pub tol: f64,
    pub grid: GridOptions,
    pub force_general: bool,
    /// Sampling box for general certification.
    pub sample_box: (f64, f64),
    pub samples: usize,
    /// Largest `t` for the key-property check.
    pub key_t_max: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            x0: None,
            t_max: 1000,
            tol: 1e-12,
            grid: GridOptions::default(),
            force_general: false,
            sample_box: crate::dominance::DEFAULT_BOX,
            samples: crate::dominance::DEFAULT_SAMPLES,
            key_t_max: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvePath {
    Parametric,
    Grid,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub certification: Certification,
    pub path: SolvePath,
    pub trace: Trace,
    pub x_star: Vec<f64>,
    /// `max_i |x_i − x*_i|` at the last iterate.
    pub final_error: f64,
    /// Per-iteration property violations (edge dominance invariant or grid checks).
    pub invariant_violations: Vec<String>,
    pub key_property: Vec<KeyProperty>,
    pub key_tolerance: f64,
    pub bound: Option<BoundReport>,
    /// Why a step was skipped.
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn key_property_ok(&self) -> bool {
        self.key_property.iter().all(|k| k.diff <= self.key_tolerance)
    }

    pub fn passed(&self) -> bool {
        matches!(self.certification, Certification::Certified(_))
            && self.invariant_violations.is_empty()
            && self.key_property_ok()
            && self.bound.as_ref().is_none_or(BoundReport::all_satisfied)
    }

    pub fn summary(&self) -> String {
        let cert = match &self.certification {
            Certification::Certified(c) => format!("certified lambda={} ({})", c.lambda, c.kind.name()),
            Certification::Refuted(r) => format!("refuted lambda*={}", r.lambda_star),
            Certification::Indeterminate { lower, upper } => {
                format!("indeterminate lambda in [{lower}, {upper}]")
            }
        };
        let key = self
            .key_property
            .iter()
            .map(|k| k.diff)
            .fold(0.0f64, f64::max);
        let mut lines = vec![
            format!("certify: {cert}"),
            format!(
                "solve: {} path, {} iterations, converged={}",
                match self.path {
                    SolvePath::Parametric => "parametric",
                    SolvePath::Grid => "grid",
                },
                self.trace.rows.len(),
                self.trace.converged
            ),
            format!("exact: max |x - x*| = {:e}", self.final_error),
            format!(
                "tree: {} checks, max diff {:e} (tolerance {:e})",
                self.key_property.len(),
                key,
                self.key_tolerance
            ),
            format!("invariants: {} violations", self.invariant_violations.len()),
        ];
        lines.extend(self.invariant_violations.iter().take(5).map(|v| format!("  {v}")));
        match &self.bound {
            Some(b) => lines.push(format!("bound: {}", b.summary())),
            None => lines.push("bound: not evaluated".into()),
        }
        lines.extend(self.notes.iter().map(|n| format!("note: {n}")));
        lines.push(if self.passed() { "PASS".into() } else { "FAIL".into() });
        lines.join("\n")
    }
}

pub fn run_check(problem: &Problem, opts: &CheckOptions) -> Result<CheckReport> {
    let n = problem.n();
    let x0 = opts.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    if x0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    match (problem.quadratic(), opts.force_general) {
        (Some(q), false) => check_quadratic(&q, x0, opts),
        _ => check_general(problem, x0, opts),
    }
}

/// Largest `t ≤ key_t_max` whose trees at every root stay within the
/// guardrail.
fn key_depth(g: &crate::problem::Graph, key_t_max: usize) -> usize {
    let mut t = 0;
    while t < key_t_max && (0..g.n()).all(|r| projected_size(g, r, t) <= MAX_TREE_NODES) {
        t += 1;
    }
    t
}

fn check_quadratic(
    q: &crate::problem::QuadraticProblem,
    x0: Vec<f64>,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let certification = certify_quadratic(q);
    let cert = certification.certificate().cloned();
    let init = QuadraticInit::Estimates(x0.clone());
    let mut violations = Vec::new();
    let run = run_quadratic_observed(
        q,
        &init,
        RunOptions {
            t_max: opts.t_max,
            tol: opts.tol,
        },
        |s| {
            if let (Some(c), true) = (&cert, s.t >= 1) {
                violations.extend(check_edge_invariants(q, s, c.lambda, &c.w).into_iter().map(|v| {
                    format!(
                        "edge invariant at t={} on {}->{}: alpha={} slack={}",
                        v.t, v.from, v.to, v.alpha, v.slack
                    )
                }));
            }
            Ok(())
        },
    )?;
    let x_star = solve_quadratic_direct(q)?;
    let mut notes = Vec::new();
    let depth = key_depth(q.graph(), opts.key_t_max);
    if depth < opts.key_t_max {
        notes.push(format!("key property checked only up to t={depth} (tree size limit)"));
    }
    let roots: Vec<usize> = (0..q.n()).collect();
    let mut key_property = Vec::new();
    for t in 1..=depth {
        key_property.extend(key_property_quadratic(q, &init, &roots, t)?);
    }
    let mut trace = run.trace;
    let bound = match &cert {
        Some(c) => {
            let b = bound_quadratic_simplified(q, c.lambda, &c.w, &x0, &x_star)?;
            Some(check_trace(&mut trace, &b, &x_star))
        }
        None => {
            notes.push("no certificate, so no rate bound".into());
            None
        }
    };
    // The quadratic form of the general bound is also evaluated, as a
    // cross-check of the simplified one.
    if let Some(c) = &cert {
        let s0 = init_messages_quadratic(q, &init)?;
        let general: RateBound = bound_quadratic(q, &s0.messages, c.lambda, &c.w, &x_star)?;
        let simplified = bound.as_ref().and_then(|b| b.rows.first().map(|r| r.bound));
        if let Some(s) = simplified {
            if general.value(1) > s * (1.0 + 1e-9) + 1e-300 {
                violations.push(format!(
                    "general-form bound {} exceeds simplified bound {s} at t=1",
                    general.value(1)
                ));
            }
        }
    }
    let final_error = crate::trace::inf_norm_diff(trace.final_x(), &x_star);
    Ok(CheckReport {
        certification,
        path: SolvePath::Parametric,
        trace,
        x_star,
        final_error,
        invariant_violations: violations,
        key_property,
        key_tolerance: KEY_TOL_QUADRATIC,
        bound,
        notes,
    })
}

fn check_general(problem: &Problem, x0: Vec<f64>, opts: &CheckOptions) -> Result<CheckReport> {
    let obj = problem.objective();
    let n = obj.n();
    let boxes = vec![opts.sample_box; n];
    let certification = certify_objective(&obj, &boxes, opts.samples)?;
    let cert = certification.certificate().cloned();
    let init = GeneralInit::Estimates(x0.clone());
    let mut violations = Vec::new();
    let run = run_general_observed(
        &obj,
        &init,
        GeneralRunOptions {
            t_max: opts.t_max,
            tol: opts.tol,
            grid: opts.grid,
        },
        |_, s| {
            let mut found = check_local_convexity(&obj, s);
            found.extend(check_minimiser_slope(&obj, s));
            if let Some(c) = &cert {
                found.extend(check_message_envelope(&obj, s, c.lambda, &c.w));
            }
            violations.extend(found.into_iter().map(|v| {
                format!(
                    "{} at t={} on {}->{} x={}: measured {} expected {} (tol {})",
                    v.property, s.t, v.from, v.to, v.x, v.measured, v.expected, v.tolerance
                )
            }));
            Ok(())
        },
    )?;
    let x_star = solve_general_newton(&obj, &x0, NewtonOptions::default())?.x;
    let mut notes = Vec::new();
    let depth = key_depth(obj.graph(), opts.key_t_max.min(3));
    let roots: Vec<usize> = (0..n).collect();
    let mut key_property = Vec::new();
    for t in 1..=depth {
        key_property.extend(key_property_general(&obj, &init, &roots, t, opts.grid)?);
    }
    let mut trace = run.trace;
    let bound = match &cert {
        Some(c) => {
            let b = match bound_simplified(&obj, c.lambda, &c.w, &x0, &x_star) {
                Ok(b) => b,
                Err(Error::BoundInapplicable(why)) => {
                    notes.push(format!("simplified bound skipped: {why}"));
                    bound_general(&obj, &init, c.lambda, &c.w, &x_star, Some(&boxes))?
                }
                Err(e) => return Err(e),
            };
            let mut report = check_trace(&mut trace, &b, &x_star);
            let scale = 1.0 + x_star.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let grid_floor =
                GRID_FLOOR_RTOL * scale / c.w.iter().cloned().fold(f64::INFINITY, f64::min);
            for row in &mut report.rows {
                if row.bound < grid_floor {
                    row.at_floor = true;
                    row.satisfied = row.measured <= grid_floor;
                }
            }
            report.floor = report.floor.max(grid_floor);
            Some(report)
        }
        None => {
            notes.push("no certificate, so no rate bound".into());
            None
        }
    };
    let final_error = crate::trace::inf_norm_diff(trace.final_x(), &x_star);
    Ok(CheckReport {
        certification,
        path: SolvePath::Grid,
        trace,
        x_star,
        final_error,
        invariant_violations: violations,
        key_property,
        key_tolerance: KEY_TOL_GENERAL,
        bound,
        notes,
    })
}

/// Runs [`run_check`] on generated problems for every seed, in parallel.
pub fn check_batch(
    seeds: &[u64],
    make: impl Fn(u64) -> Result<Problem> + Sync,
    opts: &CheckOptions,
) -> Vec<(u64, Result<CheckReport>)> {
    seeds
        .par_iter()
        .map(|&seed| (seed, make(seed).and_then(|p| run_check(&p, opts))))
        .collect()
}
