//! Parametric min-sum for `F(x) = ½ xᵀAx − bᵀx`.
//!
//! Every message is `J_{i→j}(x) = ½ α x² − β x`, so the min in the update
//! has the closed form
//!
//! ```text
//! a_{i→j} = a_ii + Σ_{u∈N_i\j} α_{u→i}      b_{i→j} = b_i + Σ_{u∈N_i\j} β_{u→i}
//! α'_{i→j} = −a_ji² / a_{i→j}               β'_{i→j} = −a_ji b_{i→j} / a_{i→j}
//! ```
//!
//! and the estimate is `x_i = (b_i + Σ_u β_{u→i}) / (a_ii + Σ_u α_{u→i})`.
//! The schedule is synchronous: all `2|E|` messages of iteration `t+1` are
//! computed from the complete state at `t`.

use crate::error::{Error, Result};
use crate::problem::QuadraticProblem;
use crate::trace::{inf_norm_diff, Trace, TraceRow};

/// `J(x) = ½ α x² − β x`; `J(0) = 0` by construction.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QuadraticMessage {
    pub alpha: f64,
    pub beta: f64,
}

impl QuadraticMessage {
    pub fn value(&self, x: f64) -> f64 {
        0.5 * self.alpha * x * x - self.beta * x
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.alpha * x - self.beta
    }
}

/// Messages indexed by directed edge (see [`Graph::directed_index`]) and
/// the estimate `x^(t)` produced from the messages of iteration `t − 1`.
///
/// [`Graph::directed_index`]: crate::problem::Graph::directed_index
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMessageState {
    pub t: usize,
    pub messages: Vec<QuadraticMessage>,
    pub estimates: Vec<f64>,
}

/// Witness that explicit initial curvatures are admissible:
/// `α⁰_{i→j} ≥ −ρ (w_i/w_j) |a_ji|` with `0 ≤ ρ < 1/λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitWitness {
    pub rho: f64,
    pub lambda: f64,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuadraticInit {
    /// `J⁰_{i→j}(x_j) = a_ji x_j x⁰_i`, i.e. `α⁰ = 0`, `β⁰ = −a_ji x⁰_i`.
    Estimates(Vec<f64>),
    /// Caller-chosen `(α⁰, β⁰)` per directed edge, with `x0` recorded as the
    /// trace's starting point.
    Explicit {
        messages: Vec<QuadraticMessage>,
        x0: Vec<f64>,
        witness: Option<InitWitness>,
    },
}

impl QuadraticInit {
    pub fn zero(n: usize) -> Self {
        Self::Estimates(vec![0.0; n])
    }
}

pub fn init_messages_quadratic(
    q: &QuadraticProblem,
    init: &QuadraticInit,
) -> Result<QuadraticMessageState> {
    let g = q.graph();
    let n = q.n();
    match init {
        QuadraticInit::Estimates(x0) => {
            if x0.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: x0.len(),
                });
            }
            let messages = (0..2 * g.edge_count())
                .map(|d| {
                    let (from, _) = g.directed_endpoints(d);
                    QuadraticMessage {
                        alpha: 0.0,
                        beta: -q.off()[d / 2] * x0[from],
                    }
                })
                .collect();
            Ok(QuadraticMessageState {
                t: 0,
                messages,
                estimates: x0.clone(),
            })
        }
        QuadraticInit::Explicit {
            messages,
            x0,
            witness,
        } => {
            if messages.len() != 2 * g.edge_count() {
                return Err(Error::Dimension {
                    expected: 2 * g.edge_count(),
                    got: messages.len(),
                });
            }
            if x0.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: x0.len(),
                });
            }
            if let Some(wit) = witness {
                validate_initial_curvature(q, messages, wit)?;
            }
            Ok(QuadraticMessageState {
                t: 0,
                messages: messages.clone(),
                estimates: x0.clone(),
            })
        }
    }
}

fn validate_initial_curvature(
    q: &QuadraticProblem,
    messages: &[QuadraticMessage],
    wit: &InitWitness,
) -> Result<()> {
    let g = q.graph();
    if !(wit.rho >= 0.0 && wit.rho * wit.lambda < 1.0) {
        return Err(Error::InitialMessage {
            from: 0,
            to: 0,
            detail: format!("rho = {} is outside [0, 1/lambda)", wit.rho),
        });
    }
    for (d, m) in messages.iter().enumerate() {
        let (i, j) = g.directed_endpoints(d);
        let floor = -wit.rho * wit.w[i] / wit.w[j] * q.off()[d / 2].abs();
        if m.alpha < floor {
            return Err(Error::InitialMessage {
                from: i,
                to: j,
                detail: format!("alpha = {} < {floor}", m.alpha),
            });
        }
    }
    Ok(())
}

/// `(a_{i→j}, b_{i→j})` from the messages in `s`.
pub fn directed_coefficients(
    q: &QuadraticProblem,
    s: &QuadraticMessageState,
    from: usize,
    to: usize,
) -> (f64, f64) {
    let g = q.graph();
    let mut a = q.diag()[from];
    let mut b = q.b()[from];
    for nb in g.neighbours(from) {
        if nb.node != to {
            let m = s.messages[g.directed_index(nb.node, from).unwrap()];
            a += m.alpha;
            b += m.beta;
        }
    }
    (a, b)
}

/// `(a_ii + Σ α_{u→i}, b_i + Σ β_{u→i})`: curvature and linear term of the
/// local objective `γ_i`.
fn local_coefficients(q: &QuadraticProblem, s: &QuadraticMessageState, i: usize) -> (f64, f64) {
    let g = q.graph();
    let mut a = q.diag()[i];
    let mut b = q.b()[i];
    for nb in g.neighbours(i) {
        let m = s.messages[g.directed_index(nb.node, i).unwrap()];
        a += m.alpha;
        b += m.beta;
    }
    (a, b)
}

/// One synchronous iteration. The input state is not modified.
pub fn update_messages_quadratic(
    q: &QuadraticProblem,
    s: &QuadraticMessageState,
) -> Result<QuadraticMessageState> {
    let g = q.graph();
    let mut messages = Vec::with_capacity(s.messages.len());
    for d in 0..s.messages.len() {
        let (i, j) = g.directed_endpoints(d);
        let (a, b) = directed_coefficients(q, s, i, j);
        if !(a > 0.0) {
            return Err(Error::IllPosed {
                from: i,
                to: j,
                t: s.t,
                value: a,
            });
        }
        let aji = q.off()[d / 2];
        messages.push(QuadraticMessage {
            alpha: -aji * aji / a,
            beta: -aji * b / a,
        });
    }
    let mut estimates = Vec::with_capacity(q.n());
    for i in 0..q.n() {
        let (a, b) = local_coefficients(q, s, i);
        if !(a > 0.0) {
            return Err(Error::IllPosed {
                from: i,
                to: i,
                t: s.t,
                value: a,
            });
        }
        let x = b / a;
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("estimate of node {i} at t = {}", s.t + 1)));
        }
        estimates.push(x);
    }
    Ok(QuadraticMessageState {
        t: s.t + 1,
        messages,
        estimates,
    })
}

/// A violated curvature property on one directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeInvariantViolation {
    pub from: usize,
    pub to: usize,
    pub t: usize,
    pub alpha: f64,
    /// `λ w_i a_{i→j} − w_j |a_ji|`
    pub slack: f64,
}

/// Checks `α_{i→j} < 0` (for `t ≥ 1`) and `λ w_i a_{i→j} ≥ w_j |a_ji|` on
/// every directed edge of `s`.
pub fn check_edge_invariants(
    q: &QuadraticProblem,
    s: &QuadraticMessageState,
    lambda: f64,
    w: &[f64],
) -> Vec<EdgeInvariantViolation> {
    let g = q.graph();
    let mut out = Vec::new();
    for (d, m) in s.messages.iter().enumerate() {
        let (i, j) = g.directed_endpoints(d);
        let (a, _) = directed_coefficients(q, s, i, j);
        let rhs = w[j] * q.off()[d / 2].abs();
        let lhs = lambda * w[i] * a;
        let slack = lhs - rhs;
        let concave_ok = s.t == 0 || m.alpha < 0.0;
        if !concave_ok || slack < -crate::dominance::CERTIFICATE_RTOL * lhs.abs().max(rhs) {
            out.push(EdgeInvariantViolation {
                from: i,
                to: j,
                t: s.t,
                alpha: m.alpha,
                slack,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub t_max: usize,
    pub tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            t_max: 1000,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticRun {
    pub trace: Trace,
    pub state: QuadraticMessageState,
}

pub fn run_quadratic(
    q: &QuadraticProblem,
    init: &QuadraticInit,
    opts: RunOptions,
) -> Result<QuadraticRun> {
    run_quadratic_observed(q, init, opts, |_| Ok(()))
}

/// Like [`run_quadratic`], calling `observe` on the initial state and on
/// every new state; an observer error aborts the run.
pub fn run_quadratic_observed(
    q: &QuadraticProblem,
    init: &QuadraticInit,
    opts: RunOptions,
    mut observe: impl FnMut(&QuadraticMessageState) -> Result<()>,
) -> Result<QuadraticRun> {
    if opts.t_max == 0 || !(opts.tol > 0.0) {
        return Err(Error::InvalidProblem("need t_max >= 1 and tol > 0".into()));
    }
    let mut state = init_messages_quadratic(q, init)?;
    observe(&state)?;
    let mut trace = Trace {
        x0: state.estimates.clone(),
        rows: Vec::new(),
        converged: false,
    };
    while state.t < opts.t_max {
        let next = update_messages_quadratic(q, &state)?;
        observe(&next)?;
        let step = inf_norm_diff(&next.estimates, &state.estimates);
        trace.rows.push(TraceRow {
            t: next.t,
            x: next.estimates.clone(),
            step_inf: step,
            residual_inf: q.residual_inf(&next.estimates),
            err_weighted: None,
            bound_value: None,
            grid_points: None,
        });
        state = next;
        if step <= opts.tol {
            trace.converged = true;
            break;
        }
    }
    Ok(QuadraticRun { trace, state })
}
