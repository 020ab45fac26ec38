//! Computation trees: the unrolling of a loopy graph around a root such
//! that `t` synchronous min-sum rounds on the graph produce, at the root,
//! the exact minimiser of the tree's objective.
//!
//! A tree of depth `d` has levels `0..=d`. Level 0 is the root `r`; each
//! copy of node `v` reached from a parent copy of `p` has one child per
//! neighbour in `N_v \ {p}` (the root has one child per neighbour). Leaves
//! at level `d` absorb the initial messages `J⁰_{u→v}` from every
//! `u ∈ N_v \ {p}` (all of `N_r` when `d = 0`). The estimate `x_r^(t)` is
//! the root coordinate of the minimiser of the depth `t − 1` tree.
//!
//! The oracle solves trees by elimination, not by message passing: leaf to
//! root Gaussian elimination for quadratic trees, Newton on the assembled
//! tree objective otherwise.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::general::{
    init_messages_general, update_messages_general, choose_domains, GeneralInit, GridOptions,
};
use crate::problem::{
    EdgeFactor, EdgePartials, Graph, NodeFactor, PairFunction, PairwiseObjective,
    QuadraticProblem, ScalarFunction,
};
use crate::quadratic::{
    init_messages_quadratic, update_messages_quadratic, QuadraticInit, QuadraticMessage,
};
use crate::reference::{solve_general_newton, NewtonOptions};

/// Refuse to build trees larger than this.
pub const MAX_TREE_NODES: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeNode {
    /// Original node this copy stands for.
    pub sigma: usize,
    pub parent: Option<usize>,
    pub depth: usize,
}

/// Nodes are stored breadth first, so `nodes[0]` is the root and every
/// parent precedes its children.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputationTree {
    pub nodes: Vec<TreeNode>,
    /// Original edge index of the edge to the parent (unused for the root).
    pub parent_edge: Vec<usize>,
    /// Directed edges `u→σ(k)` whose initial message is absorbed into node
    /// `k` (non-empty only at the deepest level).
    pub absorbed: Vec<Vec<usize>>,
    pub depth: usize,
}

/// Number of tree nodes per level, by counting directed edges
/// `p→v` traversed at each level. Saturates instead of overflowing.
pub fn level_sizes(g: &Graph, root: usize, depth: usize) -> Vec<usize> {
    let mut sizes = vec![1usize];
    let mut counts = vec![0usize; 2 * g.edge_count()];
    for nb in g.neighbours(root) {
        counts[g.directed_index(root, nb.node).unwrap()] = 1;
    }
    for level in 1..=depth {
        sizes.push(counts.iter().fold(0usize, |s, &c| s.saturating_add(c)));
        if level == depth {
            break;
        }
        let mut next = vec![0usize; counts.len()];
        for (d, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let (p, v) = g.directed_endpoints(d);
            for nb in g.neighbours(v) {
                if nb.node != p {
                    let e = g.directed_index(v, nb.node).unwrap();
                    next[e] = next[e].saturating_add(c);
                }
            }
        }
        counts = next;
    }
    sizes
}

pub fn projected_size(g: &Graph, root: usize, depth: usize) -> usize {
    level_sizes(g, root, depth)
        .into_iter()
        .fold(0usize, usize::saturating_add)
}

pub fn build_tree(g: &Graph, root: usize, depth: usize) -> Result<ComputationTree> {
    if root >= g.n() {
        return Err(Error::InvalidProblem(format!(
            "root {root} out of range for {} nodes",
            g.n()
        )));
    }
    let projected = projected_size(g, root, depth);
    if projected > MAX_TREE_NODES {
        return Err(Error::TreeTooLarge {
            projected,
            limit: MAX_TREE_NODES,
        });
    }
    let mut nodes = Vec::with_capacity(projected);
    let mut parent_edge = Vec::with_capacity(projected);
    nodes.push(TreeNode {
        sigma: root,
        parent: None,
        depth: 0,
    });
    parent_edge.push(usize::MAX);
    let mut head = 0;
    while head < nodes.len() {
        let k = head;
        head += 1;
        let node = nodes[k];
        if node.depth == depth {
            continue;
        }
        let from = node.parent.map(|p| nodes[p].sigma);
        for nb in g.neighbours(node.sigma) {
            if Some(nb.node) == from {
                continue;
            }
            nodes.push(TreeNode {
                sigma: nb.node,
                parent: Some(k),
                depth: node.depth + 1,
            });
            parent_edge.push(nb.edge);
        }
    }
    let absorbed = nodes
        .iter()
        .map(|node| {
            if node.depth < depth {
                return Vec::new();
            }
            let from = node.parent.map(|p| nodes[p].sigma);
            g.neighbours(node.sigma)
                .iter()
                .filter(|nb| Some(nb.node) != from)
                .map(|nb| g.directed_index(nb.node, node.sigma).unwrap())
                .collect()
        })
        .collect();
    Ok(ComputationTree {
        nodes,
        parent_edge,
        absorbed,
        depth,
    })
}

impl ComputationTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node count per level.
    pub fn level_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.depth + 1];
        for node in &self.nodes {
            out[node.depth] += 1;
        }
        out
    }

    /// `(child, parent)` pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(k, n)| n.parent.map(|p| (k, p)))
            .collect()
    }

    /// Structural invariants against the graph the tree was built from.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if self.nodes.first().map(|n| (n.parent, n.depth)) != Some((None, 0)) {
            return bad("tree root must be node 0 at depth 0".into());
        }
        let mut children = vec![0usize; self.len()];
        for (k, node) in self.nodes.iter().enumerate().skip(1) {
            let Some(p) = node.parent else {
                return bad(format!("tree node {k} has no parent"));
            };
            if p >= k || self.nodes[p].depth + 1 != node.depth {
                return bad(format!("tree node {k} has inconsistent parent {p}"));
            }
            let e = self.parent_edge[k];
            if g.edge_index(node.sigma, self.nodes[p].sigma) != Some(e) {
                return bad(format!("tree edge {k}-{p} is not a graph edge"));
            }
            children[p] += 1;
        }
        for (k, node) in self.nodes.iter().enumerate() {
            let expected = if node.depth == self.depth {
                0
            } else if node.parent.is_none() {
                g.degree(node.sigma)
            } else {
                g.degree(node.sigma) - 1
            };
            if children[k] != expected {
                return bad(format!(
                    "tree node {k} has {} children, expected {expected}",
                    children[k]
                ));
            }
            let absorbed = if node.depth == self.depth { expected_absorbed(g, self, k) } else { 0 };
            if self.absorbed[k].len() != absorbed {
                return bad(format!("tree node {k} absorbs the wrong messages"));
            }
        }
        Ok(())
    }

    /// The tree objective as a pairwise objective over the tree's nodes,
    /// with initial messages folded into the leaf node factors.
    pub fn objective(&self, obj: &PairwiseObjective, init: &GeneralInit) -> Result<PairwiseObjective> {
        let og = obj.graph();
        let pairs: Vec<(usize, usize)> = self.edges().into_iter().map(|(c, p)| (p, c)).collect();
        let tg = Graph::new(self.len(), &pairs)?;
        let mut node_factors = Vec::with_capacity(self.len());
        for (k, node) in self.nodes.iter().enumerate() {
            let own = obj.node_factor(node.sigma).clone();
            if self.absorbed[k].is_empty() {
                node_factors.push(own);
                continue;
            }
            let extras = self.absorbed[k]
                .iter()
                .map(|&d| initial_message(obj, init, d))
                .collect::<Result<Vec<_>>>()?;
            node_factors.push(NodeFactor::Custom(Arc::new(Absorbed { own, extras })));
        }
        let mut edge_factors = Vec::with_capacity(pairs.len());
        for &(p, c) in tg.edges() {
            let e = self.parent_edge[c];
            let (lo, _) = og.edges()[e];
            let f = obj.edge_factor(e).clone();
            // Tree edge (p, c) is canonical since parents precede children.
            if self.nodes[p].sigma == lo {
                edge_factors.push(f);
            } else {
                edge_factors.push(match f {
                    EdgeFactor::Bilinear { a } => EdgeFactor::Bilinear { a },
                    other => EdgeFactor::Custom(Arc::new(Swapped(other))),
                });
            }
        }
        PairwiseObjective::new(tg, node_factors, edge_factors)
    }
}

fn expected_absorbed(g: &Graph, t: &ComputationTree, k: usize) -> usize {
    match t.nodes[k].parent {
        None => g.degree(t.nodes[k].sigma),
        Some(_) => g.degree(t.nodes[k].sigma) - 1,
    }
}

/// `J⁰_{u→v}` for directed edge `d = u→v` as a function of `x_v`.
fn initial_message(
    obj: &PairwiseObjective,
    init: &GeneralInit,
    d: usize,
) -> Result<Arc<dyn ScalarFunction>> {
    let (u, v) = obj.graph().directed_endpoints(d);
    match init {
        GeneralInit::Estimates(x0) => Ok(Arc::new(Slice {
            edge: obj.oriented_by_index(d / 2, v).factor().clone(),
            swap: obj.graph().edges()[d / 2].0 != v,
            other: x0[u],
        })),
        GeneralInit::Custom { messages, .. } => messages
            .get(d)
            .cloned()
            .ok_or(Error::Dimension {
                expected: 2 * obj.graph().edge_count(),
                got: messages.len(),
            }),
    }
}

/// `y ↦ f(y, other)` (or `f(other, y)` when `swap`).
struct Slice {
    edge: EdgeFactor,
    swap: bool,
    other: f64,
}

impl Slice {
    fn partials(&self, y: f64) -> (f64, f64, f64) {
        if self.swap {
            let p = self.edge.partials(self.other, y);
            (self.edge.value(self.other, y), p.d2, p.d22)
        } else {
            let p = self.edge.partials(y, self.other);
            (self.edge.value(y, self.other), p.d1, p.d11)
        }
    }
}

impl ScalarFunction for Slice {
    fn value(&self, x: f64) -> f64 {
        self.partials(x).0
    }
    fn derivative(&self, x: f64) -> f64 {
        self.partials(x).1
    }
    fn second_derivative(&self, x: f64) -> f64 {
        self.partials(x).2
    }
}

struct Absorbed {
    own: NodeFactor,
    extras: Vec<Arc<dyn ScalarFunction>>,
}

impl ScalarFunction for Absorbed {
    fn value(&self, x: f64) -> f64 {
        self.own.value(x) + self.extras.iter().map(|f| f.value(x)).sum::<f64>()
    }
    fn derivative(&self, x: f64) -> f64 {
        self.own.derivative(x) + self.extras.iter().map(|f| f.derivative(x)).sum::<f64>()
    }
    fn second_derivative(&self, x: f64) -> f64 {
        self.own.second_derivative(x)
            + self.extras.iter().map(|f| f.second_derivative(x)).sum::<f64>()
    }
}

struct Swapped(EdgeFactor);

impl PairFunction for Swapped {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.0.value(y, x)
    }
    fn partials(&self, x: f64, y: f64) -> EdgePartials {
        let p = self.0.partials(y, x);
        EdgePartials {
            d1: p.d2,
            d2: p.d1,
            d11: p.d22,
            d22: p.d11,
            d12: p.d12,
        }
    }
}

/// Exact minimiser of a quadratic tree objective by leaf-to-root
/// elimination and back substitution. `messages` are the initial
/// `(α⁰, β⁰)` per directed edge of the original graph.
pub fn solve_tree_quadratic(
    tree: &ComputationTree,
    q: &QuadraticProblem,
    messages: &[QuadraticMessage],
) -> Result<Vec<f64>> {
    let m = tree.len();
    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for (k, node) in tree.nodes.iter().enumerate() {
        let mut ak = q.diag()[node.sigma];
        let mut bk = q.b()[node.sigma];
        for &d in &tree.absorbed[k] {
            ak += messages[d].alpha;
            bk += messages[d].beta;
        }
        a.push(ak);
        b.push(bk);
    }
    for k in (1..m).rev() {
        if !(a[k] > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: k, value: a[k] });
        }
        let p = tree.nodes[k].parent.unwrap();
        let c = q.off()[tree.parent_edge[k]];
        a[p] -= c * c / a[k];
        b[p] -= c * b[k] / a[k];
    }
    if !(a[0] > 0.0) {
        return Err(Error::NotPositiveDefinite { pivot: 0, value: a[0] });
    }
    let mut x = vec![0.0; m];
    x[0] = b[0] / a[0];
    for k in 1..m {
        let p = tree.nodes[k].parent.unwrap();
        x[k] = (b[k] - q.off()[tree.parent_edge[k]] * x[p]) / a[k];
    }
    Ok(x)
}

/// Exact minimiser of a general tree objective (Newton on the assembled
/// tree objective, started from the original-graph `x0` copied to every
/// node).
pub fn solve_tree_general(
    tree: &ComputationTree,
    obj: &PairwiseObjective,
    init: &GeneralInit,
    opts: NewtonOptions,
) -> Result<Vec<f64>> {
    let f = tree.objective(obj, init)?;
    let start: Vec<f64> = tree.nodes.iter().map(|n| init.x0()[n.sigma]).collect();
    Ok(solve_general_newton(&f, &start, opts)?.x)
}

/// Root estimate from loopy message passing next to the root coordinate
/// of the corresponding tree minimiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyProperty {
    pub root: usize,
    pub t: usize,
    pub tree_value: f64,
    pub loopy_value: f64,
    pub diff: f64,
    pub tree_nodes: usize,
}

fn key_property(root: usize, t: usize, tree_value: f64, loopy_value: f64, tree_nodes: usize) -> KeyProperty {
    KeyProperty {
        root,
        t,
        tree_value,
        loopy_value,
        diff: (tree_value - loopy_value).abs(),
        tree_nodes,
    }
}

fn check_t(t: usize) -> Result<()> {
    if t == 0 {
        return Err(Error::InvalidProblem("key property needs t >= 1".into()));
    }
    Ok(())
}

/// Key property at every root in `roots` after `t` quadratic iterations.
pub fn key_property_quadratic(
    q: &QuadraticProblem,
    init: &QuadraticInit,
    roots: &[usize],
    t: usize,
) -> Result<Vec<KeyProperty>> {
    check_t(t)?;
    let s0 = init_messages_quadratic(q, init)?;
    let mut s = s0.clone();
    for _ in 0..t {
        s = update_messages_quadratic(q, &s)?;
    }
    roots
        .iter()
        .map(|&r| {
            let tree = build_tree(q.graph(), r, t - 1)?;
            let x = solve_tree_quadratic(&tree, q, &s0.messages)?;
            Ok(key_property(r, t, x[0], s.estimates[r], tree.len()))
        })
        .collect()
}

/// Key property at every root in `roots` after `t` grid iterations.
pub fn key_property_general(
    obj: &PairwiseObjective,
    init: &GeneralInit,
    roots: &[usize],
    t: usize,
    grid: GridOptions,
) -> Result<Vec<KeyProperty>> {
    check_t(t)?;
    let domains = choose_domains(obj, init.x0(), grid.margin, grid.points)?;
    let mut s = init_messages_general(obj, init, domains)?;
    for _ in 0..t {
        s = update_messages_general(obj, &s)?;
    }
    roots
        .iter()
        .map(|&r| {
            let tree = build_tree(obj.graph(), r, t - 1)?;
            let x = solve_tree_general(&tree, obj, init, NewtonOptions::default())?;
            Ok(key_property(r, t, x[0], s.estimates[r], tree.len()))
        })
        .collect()
}

/// Edge-list text: one `child parent sigma_child sigma_parent` line per tree
/// edge after a `root sigma` line, 1-based original labels.
pub fn write_tree<W: std::io::Write>(tree: &ComputationTree, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# nodes {} depth {}", tree.len(), tree.depth)?;
    writeln!(out, "root 0 sigma {}", tree.nodes[0].sigma + 1)?;
    for (c, p) in tree.edges() {
        writeln!(
            out,
            "{c} {p} {} {}",
            tree.nodes[c].sigma + 1,
            tree.nodes[p].sigma + 1
        )?;
    }
    Ok(())
}
