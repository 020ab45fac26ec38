//! Pairwise-separable objectives `F(x) = Σ f_i(x_i) + Σ f_ij(x_i, x_j)` and the
//! quadratic special case `F(x) = ½ xᵀAx − bᵀx`.
//!
//! Node indices are 0-based here. Each undirected edge is stored once with
//! `i < j`; the factor on that edge takes its arguments in the order
//! `(x_i, x_j)`. Use [`PairwiseObjective::oriented`] to evaluate it from
//! either endpoint.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbour {
    pub node: usize,
    pub edge: usize,
}

/// Undirected simple graph with a canonical edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<Neighbour>>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Pairs are canonicalised to
    /// `(min, max)` and sorted; self-loops, duplicates and out-of-range
    /// indices are rejected.
    pub fn new(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut edges = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::InvalidProblem(format!(
                    "edge ({i}, {j}) references a node outside 0..{n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidProblem(format!("self-loop on node {i}")));
            }
            edges.push((i.min(j), i.max(j)));
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidProblem(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (e, &(i, j)) in edges.iter().enumerate() {
            adjacency[i].push(Neighbour { node: j, edge: e });
            adjacency[j].push(Neighbour { node: i, edge: e });
        }
        Ok(Self { n, edges, adjacency })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbours(&self, i: usize) -> &[Neighbour] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).ok()
    }

    /// Index of the directed edge `from -> to` in `0..2|E|`.
    pub fn directed_index(&self, from: usize, to: usize) -> Option<usize> {
        self.edge_index(from, to)
            .map(|e| if from < to { 2 * e } else { 2 * e + 1 })
    }

    /// Endpoints `(from, to)` of directed edge `d`.
    pub fn directed_endpoints(&self, d: usize) -> (usize, usize) {
        let (i, j) = self.edges[d / 2];
        if d % 2 == 0 {
            (i, j)
        } else {
            (j, i)
        }
    }

    /// Connected components, each sorted ascending.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            label[start] = id;
            let mut head = 0;
            while head < members.len() {
                let v = members[head];
                head += 1;
                for nb in &self.adjacency[v] {
                    if label[nb.node] == usize::MAX {
                        label[nb.node] = id;
                        members.push(nb.node);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Longest shortest path (in edges) over all connected pairs.
    pub fn diameter(&self) -> usize {
        (0..self.n)
            .map(|s| self.eccentricity(s))
            .max()
            .unwrap_or(0)
    }

    pub fn eccentricity(&self, s: usize) -> usize {
        let mut dist = vec![usize::MAX; self.n];
        dist[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        let mut far = 0;
        while let Some(v) = queue.pop_front() {
            far = far.max(dist[v]);
            for nb in &self.adjacency[v] {
                if dist[nb.node] == usize::MAX {
                    dist[nb.node] = dist[v] + 1;
                    queue.push_back(nb.node);
                }
            }
        }
        far
    }

    pub fn is_forest(&self) -> bool {
        self.edges.len() + self.components().len() == self.n
    }
}

/// A univariate function supplied through the library API.
pub trait ScalarFunction: Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn second_derivative(&self, x: f64) -> f64;
}

/// A bivariate function supplied through the library API, taking its
/// arguments in canonical `(x_i, x_j)` order with `i < j`.
pub trait PairFunction: Send + Sync {
    fn value(&self, x: f64, y: f64) -> f64;
    fn partials(&self, x: f64, y: f64) -> EdgePartials;
}

/// First and second partial derivatives of an edge factor at a point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EdgePartials {
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d22: f64,
    pub d12: f64,
}

impl EdgePartials {
    fn swapped(self) -> Self {
        Self {
            d1: self.d2,
            d2: self.d1,
            d11: self.d22,
            d22: self.d11,
            d12: self.d12,
        }
    }
}

/// Node factor `f_i`.
#[derive(Clone)]
pub enum NodeFactor {
    /// `½ a x² − b x`, `a > 0`.
    Quadratic { a: f64, b: f64 },
    /// `x⁴/4 + c x²/2 − b x`, `c > 0`.
    Quartic { c: f64, b: f64 },
    /// `s log cosh x + c x²/2 − b x`, `s ≥ 0`, `c > 0`.
    LogCosh { s: f64, c: f64, b: f64 },
    Custom(Arc<dyn ScalarFunction>),
}

impl fmt::Debug for NodeFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Quadratic { a, b } => write!(f, "Quadratic {{ a: {a}, b: {b} }}"),
            Self::Quartic { c, b } => write!(f, "Quartic {{ c: {c}, b: {b} }}"),
            Self::LogCosh { s, c, b } => write!(f, "LogCosh {{ s: {s}, c: {c}, b: {b} }}"),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Numerically stable `log cosh x`.
fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl NodeFactor {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Quadratic { a, b } => a > 0.0 && a.is_finite() && b.is_finite(),
            Self::Quartic { c, b } => c > 0.0 && c.is_finite() && b.is_finite(),
            Self::LogCosh { s, c, b } => {
                s >= 0.0 && c > 0.0 && s.is_finite() && c.is_finite() && b.is_finite()
            }
            Self::Custom(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProblem(format!(
                "node factor {self:?} has invalid parameters"
            )))
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Self::Quadratic { a, b } => 0.5 * a * x * x - b * x,
            Self::Quartic { c, b } => 0.25 * x.powi(4) + 0.5 * c * x * x - b * x,
            Self::LogCosh { s, c, b } => s * log_cosh(x) + 0.5 * c * x * x - b * x,
            Self::Custom(ref f) => f.value(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Quadratic { a, b } => a * x - b,
            Self::Quartic { c, b } => x.powi(3) + c * x - b,
            Self::LogCosh { s, c, b } => s * x.tanh() + c * x - b,
            Self::Custom(ref f) => f.derivative(x),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Quadratic { a, .. } => a,
            Self::Quartic { c, .. } => 3.0 * x * x + c,
            Self::LogCosh { s, c, .. } => {
                let sech = 1.0 / x.cosh();
                s * sech * sech + c
            }
            Self::Custom(ref f) => f.second_derivative(x),
        }
    }

    /// Global `(inf, sup)` of `f''` over ℝ for builtin families; `None` for
    /// custom factors.
    pub fn curvature_bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Quadratic { a, .. } => Some((a, a)),
            Self::Quartic { c, .. } => Some((c, f64::INFINITY)),
            Self::LogCosh { s, c, .. } => Some((c, c + s)),
            Self::Custom(_) => None,
        }
    }

    /// Linear coefficient `b` of the builtin families.
    pub fn linear_term(&self) -> Option<f64> {
        match *self {
            Self::Quadratic { b, .. } | Self::Quartic { b, .. } | Self::LogCosh { b, .. } => {
                Some(b)
            }
            Self::Custom(_) => None,
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self, Self::Custom(_))
    }
}

/// Edge factor `f_ij`, arguments in canonical `(x_i, x_j)` order.
#[derive(Clone)]
pub enum EdgeFactor {
    /// `a x_i x_j`.
    Bilinear { a: f64 },
    Custom(Arc<dyn PairFunction>),
}

impl fmt::Debug for EdgeFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bilinear { a } => write!(f, "Bilinear {{ a: {a} }}"),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl EdgeFactor {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::Bilinear { a } => a * x * y,
            Self::Custom(ref f) => f.value(x, y),
        }
    }

    pub fn partials(&self, x: f64, y: f64) -> EdgePartials {
        match *self {
            Self::Bilinear { a } => EdgePartials {
                d1: a * y,
                d2: a * x,
                d11: 0.0,
                d22: 0.0,
                d12: a,
            },
            Self::Custom(ref f) => f.partials(x, y),
        }
    }

    /// `sup |∇₁₂ f|` over ℝ² for builtin families.
    pub fn max_abs_cross(&self) -> Option<f64> {
        match *self {
            Self::Bilinear { a } => Some(a.abs()),
            Self::Custom(_) => None,
        }
    }

    /// `(inf ∇₁² f, inf ∇₂² f)` over ℝ² for builtin families.
    pub fn min_own_curvature(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Bilinear { .. } => Some((0.0, 0.0)),
            Self::Custom(_) => None,
        }
    }

    /// Same as [`min_own_curvature`](Self::min_own_curvature) but the suprema.
    pub fn max_own_curvature(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Bilinear { .. } => Some((0.0, 0.0)),
            Self::Custom(_) => None,
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self, Self::Custom(_))
    }
}

/// An edge factor viewed from one endpoint: `value(u, v)` is
/// `f_{self,other}(u, v)` with `u` the coordinate of the viewing node.
#[derive(Clone, Copy)]
pub struct Oriented<'a> {
    factor: &'a EdgeFactor,
    swap: bool,
}

impl Oriented<'_> {
    #[inline]
    pub fn value(&self, u: f64, v: f64) -> f64 {
        if self.swap {
            self.factor.value(v, u)
        } else {
            self.factor.value(u, v)
        }
    }

    #[inline]
    pub fn partials(&self, u: f64, v: f64) -> EdgePartials {
        if self.swap {
            self.factor.partials(v, u).swapped()
        } else {
            self.factor.partials(u, v)
        }
    }

    pub fn factor(&self) -> &EdgeFactor {
        self.factor
    }
}

/// `F(x) = Σ f_i(x_i) + Σ_{(i,j)∈E} f_ij(x_i, x_j)`.
#[derive(Debug, Clone)]
pub struct PairwiseObjective {
    graph: Graph,
    nodes: Vec<NodeFactor>,
    edges: Vec<EdgeFactor>,
}

impl PairwiseObjective {
    pub fn new(graph: Graph, nodes: Vec<NodeFactor>, edges: Vec<EdgeFactor>) -> Result<Self> {
        if nodes.len() != graph.n() {
            return Err(Error::Dimension {
                expected: graph.n(),
                got: nodes.len(),
            });
        }
        if edges.len() != graph.edge_count() {
            return Err(Error::Dimension {
                expected: graph.edge_count(),
                got: edges.len(),
            });
        }
        for f in &nodes {
            f.validate()?;
        }
        Ok(Self {
            graph,
            nodes,
            edges,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn node_factor(&self, i: usize) -> &NodeFactor {
        &self.nodes[i]
    }

    pub fn node_factors(&self) -> &[NodeFactor] {
        &self.nodes
    }

    pub fn edge_factor(&self, e: usize) -> &EdgeFactor {
        &self.edges[e]
    }

    pub fn edge_factors(&self) -> &[EdgeFactor] {
        &self.edges
    }

    /// The factor on edge `e` as seen from node `from`.
    pub fn oriented_by_index(&self, e: usize, from: usize) -> Oriented<'_> {
        Oriented {
            factor: &self.edges[e],
            swap: self.graph.edges()[e].0 != from,
        }
    }

    /// `f_{from,to}` viewed from `from`, if the edge exists.
    pub fn oriented(&self, from: usize, to: usize) -> Option<Oriented<'_>> {
        self.graph
            .edge_index(from, to)
            .map(|e| self.oriented_by_index(e, from))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let nodes: f64 = self.nodes.iter().zip(x).map(|(f, &xi)| f.value(xi)).sum();
        let edges: f64 = self
            .graph
            .edges()
            .iter()
            .zip(&self.edges)
            .map(|(&(i, j), f)| f.value(x[i], x[j]))
            .sum();
        Ok(nodes + edges)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g: Vec<f64> = self
            .nodes
            .iter()
            .zip(x)
            .map(|(f, &xi)| f.derivative(xi))
            .collect();
        for (&(i, j), f) in self.graph.edges().iter().zip(&self.edges) {
            let p = f.partials(x[i], x[j]);
            g[i] += p.d1;
            g[j] += p.d2;
        }
        Ok(g)
    }

    /// `∂²F/∂x_i²` at `x`.
    pub fn hessian_diagonal(&self, x: &[f64], i: usize) -> f64 {
        let mut h = self.nodes[i].second_derivative(x[i]);
        for nb in self.graph.neighbours(i) {
            h += self
                .oriented_by_index(nb.edge, i)
                .partials(x[i], x[nb.node])
                .d11;
        }
        h
    }

    /// `∂²F/∂x_i∂x_j` at `x`; requires `i == j` or `(i, j) ∈ E`.
    pub fn partial_hessian(&self, x: &[f64], i: usize, j: usize) -> Result<f64> {
        self.check_dim(x)?;
        if i >= self.n() || j >= self.n() {
            return Err(Error::NotAnEdge { i, j });
        }
        if i == j {
            return Ok(self.hessian_diagonal(x, i));
        }
        let e = self.graph.edge_index(i, j).ok_or(Error::NotAnEdge { i, j })?;
        Ok(self.oriented_by_index(e, i).partials(x[i], x[j]).d12)
    }

    /// Global `inf_x ∂²F/∂x_i²` when every factor touching `i` is builtin.
    pub fn min_diagonal_curvature(&self, i: usize) -> Option<f64> {
        let (mut lo, _) = self.nodes[i].curvature_bounds()?;
        for nb in self.graph.neighbours(i) {
            let (m1, m2) = self.edges[nb.edge].min_own_curvature()?;
            lo += if self.graph.edges()[nb.edge].0 == i { m1 } else { m2 };
        }
        Some(lo)
    }

    /// Global `sup_x ∂²F/∂x_i²` when every factor touching `i` is builtin.
    pub fn max_diagonal_curvature(&self, i: usize) -> Option<f64> {
        let (_, mut hi) = self.nodes[i].curvature_bounds()?;
        for nb in self.graph.neighbours(i) {
            let (m1, m2) = self.edges[nb.edge].max_own_curvature()?;
            hi += if self.graph.edges()[nb.edge].0 == i { m1 } else { m2 };
        }
        Some(hi)
    }

    pub fn is_builtin(&self) -> bool {
        self.nodes.iter().all(NodeFactor::is_builtin)
            && self.edges.iter().all(EdgeFactor::is_builtin)
    }

    /// Recovers `(A, b)` when every node factor is quadratic and every edge
    /// factor bilinear.
    pub fn as_quadratic(&self) -> Option<QuadraticProblem> {
        let mut diag = Vec::with_capacity(self.n());
        let mut b = Vec::with_capacity(self.n());
        for f in &self.nodes {
            match *f {
                NodeFactor::Quadratic { a, b: bi } => {
                    diag.push(a);
                    b.push(bi);
                }
                _ => return None,
            }
        }
        let mut off = Vec::with_capacity(self.edges.len());
        for f in &self.edges {
            match *f {
                EdgeFactor::Bilinear { a } => off.push(a),
                EdgeFactor::Custom(_) => return None,
            }
        }
        QuadraticProblem::from_parts(self.graph.clone(), diag, off, b).ok()
    }
}

/// `F(x) = ½ xᵀAx − bᵀx` with sparse symmetric `A`. Off-diagonal entries
/// live on the edges of `graph`; explicit zeros are not edges.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    graph: Graph,
    diag: Vec<f64>,
    off: Vec<f64>,
    b: Vec<f64>,
}

impl QuadraticProblem {
    /// `diag[i] = a_ii`, `off[e] = a_ij` for the `e`-th canonical edge.
    pub fn from_parts(graph: Graph, diag: Vec<f64>, off: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = graph.n();
        if diag.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: diag.len(),
            });
        }
        if b.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: b.len(),
            });
        }
        if off.len() != graph.edge_count() {
            return Err(Error::Dimension {
                expected: graph.edge_count(),
                got: off.len(),
            });
        }
        for (i, &d) in diag.iter().enumerate() {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NonPositiveDiagonal { node: i, value: d });
            }
        }
        if let Some(v) = off.iter().chain(&b).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix or vector entry {v}")));
        }
        if let Some(e) = off.iter().position(|&a| a == 0.0) {
            let (i, j) = graph.edges()[e];
            return Err(Error::InvalidProblem(format!(
                "edge ({i}, {j}) has a zero coefficient"
            )));
        }
        Ok(Self { graph, diag, off, b })
    }

    /// Builds from 0-based coordinate triplets. Each off-diagonal entry may
    /// be given as `(i, j)`, `(j, i)` or both; when both are present they
    /// must agree. Repeating the same `(i, j)` is an error, as is a missing
    /// diagonal entry. Zero off-diagonal values are dropped.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)], b: Vec<f64>) -> Result<Self> {
        let mut seen: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidProblem(format!(
                    "entry ({i}, {j}) outside a {n}x{n} matrix"
                )));
            }
            if seen.insert((i, j), v).is_some() {
                return Err(Error::InvalidProblem(format!("duplicate entry ({i}, {j})")));
            }
        }
        let mut diag = vec![f64::NAN; n];
        let mut upper: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&(i, j), &v) in &seen {
            if i == j {
                diag[i] = v;
                continue;
            }
            let key = (i.min(j), i.max(j));
            if let Some(&mirror) = seen.get(&(j, i)) {
                if mirror != v {
                    return Err(Error::Asymmetric {
                        i: key.0,
                        j: key.1,
                        a_ij: seen[&key],
                        a_ji: seen[&(key.1, key.0)],
                    });
                }
            }
            upper.insert(key, v);
        }
        for (i, &d) in diag.iter().enumerate() {
            if d.is_nan() {
                return Err(Error::InvalidProblem(format!("missing diagonal entry ({i}, {i})")));
            }
        }
        upper.retain(|_, v| *v != 0.0);
        let pairs: Vec<_> = upper.keys().copied().collect();
        let graph = Graph::new(n, &pairs)?;
        let off = upper.values().copied().collect();
        Self::from_parts(graph, diag, off, b)
    }

    /// Builds from a dense row-major matrix, requiring exact symmetry.
    pub fn from_dense(a: &[Vec<f64>], b: Vec<f64>) -> Result<Self> {
        let n = a.len();
        let mut triplets = Vec::new();
        for (i, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate().skip(i) {
                if i != j && v != a[j][i] {
                    return Err(Error::Asymmetric {
                        i,
                        j,
                        a_ij: v,
                        a_ji: a[j][i],
                    });
                }
                triplets.push((i, j, v));
            }
        }
        Self::from_triplets(n, &triplets, b)
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Off-diagonal coefficients indexed by canonical edge.
    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `a_ij`, zero when `(i, j)` is not an edge.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else {
            self.graph.edge_index(i, j).map_or(0.0, |e| self.off[e])
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for (&(i, j), &a) in self.graph.edges().iter().zip(&self.off) {
            y[i] += a * x[j];
            y[j] += a * x[i];
        }
        y
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                got: x.len(),
            });
        }
        let ax = self.matvec(x);
        Ok(x.iter()
            .zip(&ax)
            .zip(&self.b)
            .map(|((xi, axi), bi)| 0.5 * xi * axi - bi * xi)
            .sum())
    }

    /// `‖Ax − b‖∞`.
    pub fn residual_inf(&self, x: &[f64]) -> f64 {
        self.matvec(x)
            .iter()
            .zip(&self.b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = self.diag[i];
        }
        for (&(i, j), &v) in self.graph.edges().iter().zip(&self.off) {
            a[i][j] = v;
            a[j][i] = v;
        }
        a
    }

    /// The natural pairwise form: `f_i = ½ a_ii x² − b_i x`, `f_ij = a_ij x_i x_j`.
    pub fn to_pairwise(&self) -> PairwiseObjective {
        let nodes = self
            .diag
            .iter()
            .zip(&self.b)
            .map(|(&a, &b)| NodeFactor::Quadratic { a, b })
            .collect();
        let edges = self.off.iter().map(|&a| EdgeFactor::Bilinear { a }).collect();
        PairwiseObjective {
            graph: self.graph.clone(),
            nodes,
            edges,
        }
    }

    /// The same problem under the relabelling `new = perm[old]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut triplets = Vec::with_capacity(n + self.off.len());
        let mut b = vec![0.0; n];
        for i in 0..n {
            triplets.push((perm[i], perm[i], self.diag[i]));
            b[perm[i]] = self.b[i];
        }
        for (&(i, j), &v) in self.graph.edges().iter().zip(&self.off) {
            triplets.push((perm[i], perm[j], v));
        }
        Self::from_triplets(n, &triplets, b)
    }
}

/// Convenience alias matching the factor-level naming in the docs.
pub fn quadratic_to_pairwise(q: &QuadraticProblem) -> PairwiseObjective {
    q.to_pairwise()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> QuadraticProblem {
        QuadraticProblem::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]], vec![1.0, 0.0]).unwrap()
    }

    fn quartic_pair() -> PairwiseObjective {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        PairwiseObjective::new(
            g,
            vec![
                NodeFactor::Quartic { c: 1.0, b: 0.0 },
                NodeFactor::Quartic { c: 1.0, b: 0.0 },
            ],
            vec![EdgeFactor::Bilinear { a: 0.3 }],
        )
        .unwrap()
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(Graph::new(3, &[(0, 0)]).is_err());
        assert!(Graph::new(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(3, &[(0, 3)]).is_err());
        let g = Graph::new(3, &[(2, 0), (1, 2)]).unwrap();
        assert_eq!(g.edges(), &[(0, 2), (1, 2)]);
        assert_eq!(g.degree(2), 2);
        assert_eq!(g.directed_index(2, 0), Some(1));
        assert_eq!(g.directed_endpoints(1), (2, 0));
    }

    #[test]
    fn evaluate_quadratic_examples() {
        let q = two_node();
        let f = q.to_pairwise();
        assert_eq!(f.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
        assert!((f.evaluate(&[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(f.evaluate(&[1.0]).is_err());
    }

    #[test]
    fn evaluate_isolated_quartic() {
        let g = Graph::new(1, &[]).unwrap();
        let f = PairwiseObjective::new(g, vec![NodeFactor::Quartic { c: 1.0, b: 0.0 }], vec![])
            .unwrap();
        assert!((f.evaluate(&[2.0]).unwrap() - 6.0).abs() < 1e-15);
    }

    #[test]
    fn partial_hessian_examples() {
        let q = two_node();
        let f = q.to_pairwise();
        let x = [0.3, -7.0];
        assert_eq!(f.partial_hessian(&x, 0, 0).unwrap(), 2.0);
        assert_eq!(f.partial_hessian(&x, 1, 0).unwrap(), 1.0);

        let f = quartic_pair();
        assert_eq!(f.partial_hessian(&[2.0, 0.0], 0, 0).unwrap(), 13.0);
        assert_eq!(f.partial_hessian(&[2.0, 0.0], 0, 1).unwrap(), 0.3);

        let g = Graph::new(3, &[(0, 1)]).unwrap();
        let f = quadratic_like(g);
        assert!(matches!(
            f.partial_hessian(&[0.0; 3], 0, 2),
            Err(Error::NotAnEdge { i: 0, j: 2 })
        ));
    }

    fn quadratic_like(g: Graph) -> PairwiseObjective {
        let n = g.n();
        let m = g.edge_count();
        PairwiseObjective::new(
            g,
            vec![NodeFactor::Quadratic { a: 1.0, b: 0.0 }; n],
            vec![EdgeFactor::Bilinear { a: 0.1 }; m],
        )
        .unwrap()
    }

    #[test]
    fn pairwise_form_of_two_node_example() {
        let f = two_node().to_pairwise();
        assert!(matches!(f.node_factor(0), NodeFactor::Quadratic { a, b } if *a == 2.0 && *b == 1.0));
        assert!(matches!(f.node_factor(1), NodeFactor::Quadratic { a, b } if *a == 2.0 && *b == 0.0));
        assert!(matches!(f.edge_factor(0), EdgeFactor::Bilinear { a } if *a == 1.0));
        // x = [1, -1]: ½(2 − 1 − 1 + 2) − 1 = 0
        let x = [1.0, -1.0];
        assert_eq!(f.evaluate(&x).unwrap(), 0.0);
        assert_eq!(two_node().evaluate(&x).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_problem_has_no_edges() {
        let q = QuadraticProblem::from_dense(
            &[vec![2.0, 0.0], vec![0.0, 3.0]],
            vec![1.0, 1.0],
        )
        .unwrap();
        assert_eq!(q.to_pairwise().edge_factors().len(), 0);
    }

    #[test]
    fn triplets_symmetry_and_duplicates() {
        let b = vec![0.0, 0.0];
        assert!(QuadraticProblem::from_triplets(
            2,
            &[(0, 0, 2.0), (1, 1, 2.0), (0, 1, 1.0), (1, 0, 1.0)],
            b.clone()
        )
        .is_ok());
        assert!(matches!(
            QuadraticProblem::from_triplets(
                2,
                &[(0, 0, 2.0), (1, 1, 2.0), (0, 1, 1.0), (1, 0, 0.5)],
                b.clone()
            ),
            Err(Error::Asymmetric { .. })
        ));
        assert!(QuadraticProblem::from_triplets(
            2,
            &[(0, 0, 2.0), (1, 1, 2.0), (0, 1, 1.0), (0, 1, 1.0)],
            b.clone()
        )
        .is_err());
        assert!(matches!(
            QuadraticProblem::from_triplets(2, &[(0, 0, 2.0), (1, 1, 0.0)], b),
            Err(Error::NonPositiveDiagonal { node: 1, .. })
        ));
    }

    #[test]
    fn log_cosh_is_stable() {
        assert!((log_cosh(0.0)).abs() < 1e-16);
        assert!((log_cosh(1.0) - 1.0f64.cosh().ln()).abs() < 1e-15);
        assert!((log_cosh(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn builtin_families_are_coercive() {
        let fams = [
            NodeFactor::Quadratic { a: 0.5, b: 3.0 },
            NodeFactor::Quartic { c: 0.1, b: -5.0 },
            NodeFactor::LogCosh { s: 2.0, c: 0.1, b: 4.0 },
        ];
        for f in &fams {
            for x in [-1e6, 1e6] {
                assert!(f.value(x) > f.value(0.0) + 1e9, "{f:?} at {x}");
            }
        }
    }
}
