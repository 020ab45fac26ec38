//! Min-sum for general pairwise-separable objectives with messages sampled
//! on per-node grids.
//!
//! All messages into node `i` live on node `i`'s grid. An update of
//! `J_{i→j}` minimises
//! `g_ij(y, x_j) = f_i(y) + f_ji(x_j, y) + Σ_{u∈N_i\j} J_{u→i}(y)` over `y`
//! for every node `x_j` of node `j`'s grid; the factors are evaluated
//! analytically and the message sum through its cubic interpolant. The
//! result is shifted so that the message vanishes at the grid node `x = 0`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dominance::{perron, NonnegativeMatrix, POWER_MAX_ITERATIONS, POWER_TOLERANCE};
use crate::error::{Error, Result};
use crate::grid::{minimise, GridDomain, Interpolant, MinimiseError, DEFAULT_POINTS, MAX_POINTS};
use crate::problem::{EdgeFactor, PairwiseObjective, ScalarFunction};
use crate::quadratic::InitWitness;
use crate::trace::{inf_norm_diff, Trace, TraceRow};

/// A message `J_{i→j}` sampled on node `j`'s grid, together with the
/// minimiser map `x_{i→j}(x_j)` and the curvature
/// `a_{i→j}(x_j) = ∇₁² g_ij(x_{i→j}(x_j), x_j)` at the same nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMessage {
    pub interp: Interpolant,
    pub minimiser: Vec<f64>,
    pub curvature: Vec<f64>,
}

impl GridMessage {
    pub fn domain(&self) -> &GridDomain {
        self.interp.domain()
    }

    pub fn values(&self) -> &[f64] {
        self.interp.values()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.interp.eval(x).0
    }
}

#[derive(Debug, Clone)]
pub struct GeneralMessageState {
    pub t: usize,
    pub domains: Vec<GridDomain>,
    /// Indexed by directed edge.
    pub messages: Vec<GridMessage>,
    pub estimates: Vec<f64>,
}

impl GeneralMessageState {
    pub fn grid_points(&self) -> usize {
        self.domains.iter().map(GridDomain::points).max().unwrap_or(0)
    }
}

/// Initial messages for the grid path.
#[derive(Clone)]
pub enum GeneralInit {
    /// `J⁰_{i→j}(x_j) = f_ji(x_j, x⁰_i)`.
    Estimates(Vec<f64>),
    /// Caller-supplied `J⁰_{i→j}` per directed edge with anchors
    /// `x⁰_{i→j}`; with a witness the curvature condition
    /// `J⁰'' − ∇₁² f_ji(·, x⁰_{i→j}) ≥ −ρ (w_i/w_j) |∇₁₂ f_ji(·, x⁰_{i→j})|`
    /// is checked on the grid.
    Custom {
        messages: Vec<Arc<dyn ScalarFunction>>,
        anchors: Vec<f64>,
        x0: Vec<f64>,
        witness: Option<InitWitness>,
    },
}

impl GeneralInit {
    pub fn x0(&self) -> &[f64] {
        match self {
            Self::Estimates(x0) | Self::Custom { x0, .. } => x0,
        }
    }
}

/// Per-node grid brackets containing `x0` and every minimiser the
/// iteration can produce, widened by `margin`.
///
/// For builtin node factors with bilinear edges, with `c_i = inf f_i''` and
/// `(λ, w)` the Perron pair of `B_iu = |a_iu| / c_i`, every inner minimiser
/// satisfies `c_i |y| ≤ |b_i| + Σ_u |a_iu| R_u`, so the radii
/// `R_i = margin · K · w_i` with `K ≥ |b_v| / (c_v w_v (1 − λ))` and
/// `K ≥ |x⁰_v| / w_v` keep every minimiser strictly inside. Other
/// objectives fall back to doubling a bracket around `x0_i` until the slice
/// derivative `∂F/∂x_i` changes sign.
pub fn choose_domains(
    obj: &PairwiseObjective,
    x0: &[f64],
    margin: f64,
    points: usize,
) -> Result<Vec<GridDomain>> {
    let n = obj.n();
    if x0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    if !(margin > 1.0) {
        return Err(Error::InvalidProblem(format!("margin must exceed 1, got {margin}")));
    }
    if let Some(radii) = closed_form_radii(obj, x0) {
        return radii
            .into_iter()
            .map(|r| GridDomain::symmetric(margin * r, points))
            .collect();
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = 1.0f64;
        let mut x = x0.to_vec();
        let mut doublings = 0;
        loop {
            x[i] = x0[i] - r;
            let left = obj.gradient(&x)?[i];
            x[i] = x0[i] + r;
            let right = obj.gradient(&x)?[i];
            if left < 0.0 && right > 0.0 {
                break;
            }
            doublings += 1;
            if doublings > 60 {
                return Err(Error::NoConvergence(format!(
                    "no sign change of dF/dx_{i} within 2^60 of x0; objective not coercive?"
                )));
            }
            r *= 2.0;
        }
        out.push(GridDomain::symmetric(margin * (x0[i].abs() + r), points)?);
    }
    Ok(out)
}

fn closed_form_radii(obj: &PairwiseObjective, x0: &[f64]) -> Option<Vec<f64>> {
    let n = obj.n();
    let g = obj.graph();
    let mut c = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for f in obj.node_factors() {
        c.push(f.curvature_bounds()?.0);
        b.push(f.linear_term()?);
    }
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::new();
        for nb in g.neighbours(i) {
            match obj.edge_factor(nb.edge) {
                EdgeFactor::Bilinear { a } => row.push((nb.node, a.abs() / c[i])),
                EdgeFactor::Custom(_) => return None,
            }
        }
        rows.push(row);
    }
    let p = perron(
        &NonnegativeMatrix::from_rows(rows),
        POWER_MAX_ITERATIONS,
        POWER_TOLERANCE,
    );
    if !(p.upper < 1.0) {
        return None;
    }
    let lambda = p.upper;
    let mut k = 1.0f64;
    for v in 0..n {
        k = k
            .max(b[v].abs() / (c[v] * p.w[v] * (1.0 - lambda)))
            .max(x0[v].abs() / p.w[v]);
    }
    Some(p.w.iter().map(|w| k * w).collect())
}

fn boundary_error(node: usize, domain: &GridDomain, e: MinimiseError) -> Error {
    match e {
        MinimiseError::Boundary { at } => Error::DomainBoundary {
            node,
            at,
            lo: domain.lo(),
            hi: domain.hi(),
        },
        MinimiseError::NonFinite => {
            Error::NonFinite(format!("objective of node {node} on its grid"))
        }
    }
}

/// Sum of the messages into `i` from every neighbour except `skip`, on
/// node `i`'s grid.
fn incoming_sum(
    obj: &PairwiseObjective,
    s: &GeneralMessageState,
    i: usize,
    skip: Option<usize>,
) -> Vec<f64> {
    let g = obj.graph();
    let mut sum = vec![0.0; s.domains[i].points()];
    for nb in g.neighbours(i) {
        if Some(nb.node) == skip {
            continue;
        }
        let m = &s.messages[g.directed_index(nb.node, i).unwrap()];
        for (acc, v) in sum.iter_mut().zip(m.values()) {
            *acc += v;
        }
    }
    sum
}

pub fn init_messages_general(
    obj: &PairwiseObjective,
    init: &GeneralInit,
    domains: Vec<GridDomain>,
) -> Result<GeneralMessageState> {
    let g = obj.graph();
    let n = obj.n();
    if domains.len() != n || init.x0().len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: init.x0().len().min(domains.len()),
        });
    }
    let mut messages = Vec::with_capacity(2 * g.edge_count());
    for d in 0..2 * g.edge_count() {
        let (i, j) = g.directed_endpoints(d);
        let dom = domains[j];
        let f_ji = obj.oriented_by_index(d / 2, j);
        let (values, anchor): (Vec<f64>, f64) = match init {
            GeneralInit::Estimates(x0) => {
                (dom.nodes().map(|xj| f_ji.value(xj, x0[i])).collect(), x0[i])
            }
            GeneralInit::Custom {
                messages: custom,
                anchors,
                witness,
                ..
            } => {
                if custom.len() != 2 * g.edge_count() || anchors.len() != custom.len() {
                    return Err(Error::Dimension {
                        expected: 2 * g.edge_count(),
                        got: custom.len(),
                    });
                }
                let m = &custom[d];
                if let Some(wit) = witness {
                    for xj in dom.nodes() {
                        let p = f_ji.partials(xj, anchors[d]);
                        let lhs = m.second_derivative(xj) - p.d11;
                        let floor = -wit.rho * wit.w[i] / wit.w[j] * p.d12.abs();
                        if !(wit.rho >= 0.0 && wit.rho * wit.lambda < 1.0) || lhs < floor {
                            return Err(Error::InitialMessage {
                                from: i,
                                to: j,
                                detail: format!("curvature {lhs} < {floor} at x = {xj}"),
                            });
                        }
                    }
                }
                (dom.nodes().map(|xj| m.value(xj)).collect(), anchors[d])
            }
        };
        let shift = values[dom.zero_index()];
        let values: Vec<f64> = values.into_iter().map(|v| v - shift).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("initial message {i}->{j}")));
        }
        messages.push(GridMessage {
            interp: Interpolant::new(dom, values),
            minimiser: vec![anchor; dom.points()],
            curvature: vec![f64::NAN; dom.points()],
        });
    }
    Ok(GeneralMessageState {
        t: 0,
        domains,
        messages,
        estimates: init.x0().to_vec(),
    })
}

/// `J^(t+1)_{i→j}` from the state at `t`.
pub fn update_message_general(
    obj: &PairwiseObjective,
    s: &GeneralMessageState,
    from: usize,
    to: usize,
) -> Result<GridMessage> {
    let (i, j) = (from, to);
    let e = obj
        .graph()
        .edge_index(i, j)
        .ok_or(Error::NotAnEdge { i, j })?;
    let dom_i = s.domains[i];
    let dom_j = s.domains[j];
    let fi = obj.node_factor(i);
    let f_ji = obj.oriented_by_index(e, j);
    let rest = Interpolant::new(dom_i, incoming_sum(obj, s, i, Some(j)));
    let fi_nodes: Vec<f64> = dom_i.nodes().map(|y| fi.value(y)).collect();
    let mut values = Vec::with_capacity(dom_j.points());
    let mut minimiser = Vec::with_capacity(dom_j.points());
    let mut curvature = Vec::with_capacity(dom_j.points());
    for xj in dom_j.nodes() {
        let m = minimise(
            &dom_i,
            |k| fi_nodes[k] + f_ji.value(xj, dom_i.x(k)) + rest.values()[k],
            |y| {
                let (sv, sd, sdd) = rest.eval(y);
                let p = f_ji.partials(xj, y);
                (
                    fi.value(y) + f_ji.value(xj, y) + sv,
                    fi.derivative(y) + p.d2 + sd,
                    fi.second_derivative(y) + p.d22 + sdd,
                )
            },
        )
        .map_err(|err| boundary_error(i, &dom_i, err))?;
        values.push(m.value);
        minimiser.push(m.x);
        curvature.push(m.curvature);
    }
    let shift = values[dom_j.zero_index()];
    for v in &mut values {
        *v -= shift;
    }
    Ok(GridMessage {
        interp: Interpolant::new(dom_j, values),
        minimiser,
        curvature,
    })
}

/// Minimiser of `γ_i = f_i + Σ_{u∈N_i} J_{u→i}` over node `i`'s grid.
pub fn extract_estimate_general(
    obj: &PairwiseObjective,
    s: &GeneralMessageState,
    i: usize,
) -> Result<f64> {
    let dom = s.domains[i];
    let fi = obj.node_factor(i);
    let sum = Interpolant::new(dom, incoming_sum(obj, s, i, None));
    minimise(
        &dom,
        |k| fi.value(dom.x(k)) + sum.values()[k],
        |y| {
            let (v, d, dd) = sum.eval(y);
            (
                fi.value(y) + v,
                fi.derivative(y) + d,
                fi.second_derivative(y) + dd,
            )
        },
    )
    .map(|m| m.x)
    .map_err(|err| boundary_error(i, &dom, err))
}

/// One synchronous iteration; per-edge updates run in parallel.
pub fn update_messages_general(
    obj: &PairwiseObjective,
    s: &GeneralMessageState,
) -> Result<GeneralMessageState> {
    let g = obj.graph();
    let messages = (0..s.messages.len())
        .into_par_iter()
        .map(|d| {
            let (i, j) = g.directed_endpoints(d);
            update_message_general(obj, s, i, j)
        })
        .collect::<Result<Vec<_>>>()?;
    let estimates = (0..obj.n())
        .into_par_iter()
        .map(|i| extract_estimate_general(obj, s, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneralMessageState {
        t: s.t + 1,
        domains: s.domains.clone(),
        messages,
        estimates,
    })
}

/// The state resampled onto grids with half the spacing.
pub fn refine(s: &GeneralMessageState) -> GeneralMessageState {
    let domains: Vec<GridDomain> = s.domains.iter().map(GridDomain::refined).collect();
    let messages = s
        .messages
        .iter()
        .map(|m| {
            let dom = m.domain().refined();
            let values = m.interp.resample(dom);
            let old = Interpolant::new(*m.domain(), m.minimiser.clone());
            GridMessage {
                interp: Interpolant::new(dom, values),
                minimiser: old.resample(dom),
                curvature: vec![f64::NAN; dom.points()],
            }
        })
        .collect();
    GeneralMessageState {
        t: s.t,
        domains,
        messages,
        estimates: s.estimates.clone(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GridOptions {
    pub points: usize,
    pub max_points: usize,
    pub margin: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            points: DEFAULT_POINTS,
            max_points: MAX_POINTS,
            margin: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GeneralRunOptions {
    pub t_max: usize,
    pub tol: f64,
    pub grid: GridOptions,
}

impl Default for GeneralRunOptions {
    fn default() -> Self {
        Self {
            t_max: 200,
            tol: 1e-8,
            grid: GridOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneralRun {
    pub trace: Trace,
    pub state: GeneralMessageState,
}

/// Iterations without a 10% drop in step size before the grid is refined.
const STALL_WINDOW: usize = 5;

pub fn run_general(
    obj: &PairwiseObjective,
    init: &GeneralInit,
    opts: GeneralRunOptions,
) -> Result<GeneralRun> {
    run_general_observed(obj, init, opts, |_, _| Ok(()))
}

/// Like [`run_general`], calling `observe(previous, next)` after every
/// iteration.
pub fn run_general_observed(
    obj: &PairwiseObjective,
    init: &GeneralInit,
    opts: GeneralRunOptions,
    mut observe: impl FnMut(&GeneralMessageState, &GeneralMessageState) -> Result<()>,
) -> Result<GeneralRun> {
    if opts.t_max == 0 || !(opts.tol > 0.0) {
        return Err(Error::InvalidProblem("need t_max >= 1 and tol > 0".into()));
    }
    let domains = choose_domains(obj, init.x0(), opts.grid.margin, opts.grid.points)?;
    let mut state = init_messages_general(obj, init, domains)?;
    let mut trace = Trace {
        x0: state.estimates.clone(),
        rows: Vec::new(),
        converged: false,
    };
    let mut steps: Vec<f64> = Vec::new();
    while state.t < opts.t_max {
        let next = update_messages_general(obj, &state)?;
        observe(&state, &next)?;
        let step = inf_norm_diff(&next.estimates, &state.estimates);
        let residual = obj
            .gradient(&next.estimates)?
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        trace.rows.push(TraceRow {
            t: next.t,
            x: next.estimates.clone(),
            step_inf: step,
            residual_inf: residual,
            err_weighted: None,
            bound_value: None,
            grid_points: Some(next.grid_points()),
        });
        state = next;
        if step <= opts.tol {
            trace.converged = true;
            break;
        }
        steps.push(step);
        let stalled = steps.len() > STALL_WINDOW
            && step >= 0.9 * steps[steps.len() - 1 - STALL_WINDOW];
        if stalled && 2 * state.grid_points() - 1 <= opts.grid.max_points {
            state = refine(&state);
            steps.clear();
        }
    }
    Ok(GeneralRun { trace, state })
}

/// A failed per-iteration property check on the grid path.
#[derive(Debug, Clone, PartialEq)]
pub struct GridViolation {
    pub property: &'static str,
    pub from: usize,
    pub to: usize,
    pub x: f64,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
}

/// Interior nodes skipped at each end of a grid by the finite-difference
/// checks.
const FD_SKIP: usize = 2;

/// Strict convexity of every `γ_i`: the second difference of
/// `f_i + Σ_u J_{u→i}` on node `i`'s grid is positive at interior nodes.
pub fn check_local_convexity(obj: &PairwiseObjective, s: &GeneralMessageState) -> Vec<GridViolation> {
    let mut out = Vec::new();
    for i in 0..obj.n() {
        let dom = s.domains[i];
        let fi = obj.node_factor(i);
        let sum = incoming_sum(obj, s, i, None);
        let gamma: Vec<f64> = dom
            .nodes()
            .zip(&sum)
            .map(|(x, m)| fi.value(x) + m)
            .collect();
        let h2 = dom.h() * dom.h();
        for k in 1..dom.points() - 1 {
            let dd = (gamma[k + 1] - 2.0 * gamma[k] + gamma[k - 1]) / h2;
            if !(dd > 0.0) {
                out.push(GridViolation {
                    property: "local objective curvature",
                    from: i,
                    to: i,
                    x: dom.x(k),
                    measured: dd,
                    expected: 0.0,
                    tolerance: 0.0,
                });
                break;
            }
        }
    }
    out
}

/// Curvature envelope of every new message:
/// `0 ≥ J'' − ∇₁² f_ji(x_j, x_{i→j}) ≥ −λ (w_i/w_j) |∇₁₂ f_ji(x_j, x_{i→j})|`
/// up to `10 h²`, with `J''` a second difference on node `j`'s grid.
pub fn check_message_envelope(
    obj: &PairwiseObjective,
    s: &GeneralMessageState,
    lambda: f64,
    w: &[f64],
) -> Vec<GridViolation> {
    let g = obj.graph();
    let mut out = Vec::new();
    for (d, m) in s.messages.iter().enumerate() {
        let (i, j) = g.directed_endpoints(d);
        let dom = *m.domain();
        let f_ji = obj.oriented_by_index(d / 2, j);
        let h = dom.h();
        let tol = 10.0 * h * h;
        let v = m.values();
        for k in FD_SKIP..dom.points() - FD_SKIP {
            let xj = dom.x(k);
            let p = f_ji.partials(xj, m.minimiser[k]);
            let dd = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (h * h);
            let excess = dd - p.d11;
            let floor = -lambda * w[i] / w[j] * p.d12.abs();
            if excess > tol || excess < floor - tol {
                out.push(GridViolation {
                    property: "message curvature envelope",
                    from: i,
                    to: j,
                    x: xj,
                    measured: excess,
                    expected: floor,
                    tolerance: tol,
                });
                break;
            }
        }
    }
    out
}

/// Minimiser-map slope identity
/// `d x_{i→j}/d x_j = −∇₁₂ f_ji(x_j, x_{i→j}) / a_{i→j}(x_j)`, comparing a
/// central difference of the recorded map with the recorded curvature,
/// relative tolerance `100 h²` with `h` the coarser of the two grids.
pub fn check_minimiser_slope(obj: &PairwiseObjective, s: &GeneralMessageState) -> Vec<GridViolation> {
    let g = obj.graph();
    let mut out = Vec::new();
    for (d, m) in s.messages.iter().enumerate() {
        if m.curvature.iter().any(|c| c.is_nan()) {
            continue;
        }
        let (i, j) = g.directed_endpoints(d);
        let dom = *m.domain();
        let f_ji = obj.oriented_by_index(d / 2, j);
        let h = dom.h().max(s.domains[i].h());
        let rtol = 100.0 * h * h;
        for k in FD_SKIP..dom.points() - FD_SKIP {
            let xj = dom.x(k);
            let fd = (m.minimiser[k + 1] - m.minimiser[k - 1]) / (2.0 * dom.h());
            let pred = -f_ji.partials(xj, m.minimiser[k]).d12 / m.curvature[k];
            if (fd - pred).abs() > rtol * pred.abs() + 1e-12 {
                out.push(GridViolation {
                    property: "minimiser slope",
                    from: i,
                    to: j,
                    x: xj,
                    measured: fd,
                    expected: pred,
                    tolerance: rtol,
                });
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Graph, NodeFactor, QuadraticProblem};

    fn two_node() -> QuadraticProblem {
        QuadraticProblem::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]], vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn domains_for_two_node_example() {
        let f = two_node().to_pairwise();
        let d = choose_domains(&f, &[0.0, 0.0], 2.0, 1025).unwrap();
        assert!(d[0].lo() <= -4.0 / 3.0 && d[0].hi() >= 4.0 / 3.0);
        assert_eq!(d[0].x(d[0].zero_index()), 0.0);
    }

    #[test]
    fn domains_for_isolated_quartics() {
        let g = Graph::new(2, &[]).unwrap();
        let f = PairwiseObjective::new(
            g,
            vec![
                NodeFactor::Quartic { c: 1.0, b: 0.0 },
                NodeFactor::Quartic { c: 1.0, b: 30.0 },
            ],
            vec![],
        )
        .unwrap();
        let d = choose_domains(&f, &[0.0, 0.0], 2.0, 1025).unwrap();
        assert!(d[0].contains(0.0));
        let s = init_messages_general(&f, &GeneralInit::Estimates(vec![0.0; 2]), d).unwrap();
        let x0 = extract_estimate_general(&f, &s, 0).unwrap();
        let x1 = extract_estimate_general(&f, &s, 1).unwrap();
        assert!(x0.abs() < 1e-9);
        assert!((x1 - 3.0).abs() < 1e-9);
        assert!(s.domains[1].hi() > 3.0 && s.domains[1].lo() < 3.0);
    }

    #[test]
    fn first_message_matches_closed_form() {
        let f = two_node().to_pairwise();
        let d = choose_domains(&f, &[0.0, 0.0], 2.0, 1025).unwrap();
        let s = init_messages_general(&f, &GeneralInit::Estimates(vec![0.0; 2]), d).unwrap();
        let m = update_message_general(&f, &s, 0, 1).unwrap();
        // J_{1→2}(x) = ½(−½)x² − (−½)x
        let sup = m
            .domain()
            .nodes()
            .zip(m.values())
            .map(|(x, v)| (v - (-0.25 * x * x + 0.5 * x)).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-6, "sup error {sup}");
    }

    #[test]
    fn two_updates_reach_the_optimum() {
        let f = two_node().to_pairwise();
        let d = choose_domains(&f, &[0.0, 0.0], 2.0, 1025).unwrap();
        let s0 = init_messages_general(&f, &GeneralInit::Estimates(vec![0.0; 2]), d).unwrap();
        let s1 = update_messages_general(&f, &s0).unwrap();
        let s2 = update_messages_general(&f, &s1).unwrap();
        assert!((s1.estimates[0] - 0.5).abs() < 1e-9);
        assert!((s2.estimates[0] - 2.0 / 3.0).abs() < 1e-5);
        assert!((s2.estimates[1] + 1.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn zero_coupling_message_vanishes() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let f = PairwiseObjective::new(
            g,
            vec![NodeFactor::Quartic { c: 1.0, b: 2.0 }; 2],
            vec![EdgeFactor::Bilinear { a: 0.0 }],
        )
        .unwrap();
        let d = choose_domains(&f, &[0.0, 0.0], 2.0, 65).unwrap();
        let s = init_messages_general(&f, &GeneralInit::Estimates(vec![0.0; 2]), d).unwrap();
        let m = update_message_general(&f, &s, 0, 1).unwrap();
        assert!(m.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_coupling_converges_at_once() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let f = PairwiseObjective::new(
            g,
            vec![
                NodeFactor::Quartic { c: 1.0, b: 2.0 },
                NodeFactor::LogCosh { s: 1.0, c: 0.5, b: -1.0 },
            ],
            vec![EdgeFactor::Bilinear { a: 0.0 }],
        )
        .unwrap();
        let run = run_general(
            &f,
            &GeneralInit::Estimates(vec![0.0; 2]),
            GeneralRunOptions {
                t_max: 10,
                ..Default::default()
            },
        )
        .unwrap();
        let x1 = &run.trace.rows[0].x;
        assert!((x1[0] - 1.0).abs() < 1e-9); // x³ + x = 2
        assert!((x1[1] - run.trace.final_x()[1]).abs() < 1e-12);
        assert!(run.trace.converged && run.trace.rows.len() == 2);
    }

    #[test]
    fn refinement_preserves_messages() {
        let f = two_node().to_pairwise();
        let d = choose_domains(&f, &[0.0, 0.0], 2.0, 65).unwrap();
        let s0 = init_messages_general(&f, &GeneralInit::Estimates(vec![0.0; 2]), d).unwrap();
        let s1 = update_messages_general(&f, &s0).unwrap();
        let r = refine(&s1);
        assert_eq!(r.grid_points(), 129);
        for (a, b) in s1.messages.iter().zip(&r.messages) {
            for k in 0..a.domain().points() {
                assert!((a.values()[k] - b.values()[2 * k]).abs() < 1e-14);
            }
        }
    }
}
