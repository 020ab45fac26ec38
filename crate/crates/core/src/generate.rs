//! Seeded random test instances with a known dominance level.
//!
//! Off-diagonal couplings are `±U[0.1, 1]`. Each diagonal is
//! `s_i Σ_j |a_ij| / λ_target` with a row-specific stretch `s_i ∈ [1, 1.5]`,
//! so every row of `D⁻¹|A_off|` sums to at most `λ_target` and the spectral
//! radius cannot exceed it. Isolated nodes get a diagonal in `[1, 2]`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problem::{EdgeFactor, Graph, NodeFactor, PairwiseObjective, QuadraticProblem};

/// Keeps rounding in the diagonal from pushing the radius over the target.
const HEADROOM: f64 = 1.0 + 1e-9;

fn check_lambda(lambda_target: f64) -> Result<()> {
    if !(lambda_target > 0.0 && lambda_target < 1.0) {
        return Err(Error::InvalidProblem(format!(
            "lambda_target must be in (0, 1), got {lambda_target}"
        )));
    }
    Ok(())
}

/// Near-regular random graph: every node tries to reach `degree`
/// neighbours among nodes that still have room.
pub fn random_graph(n: usize, degree: usize, rng: &mut impl Rng) -> Result<Graph> {
    if n < 2 || degree == 0 || degree >= n {
        return Err(Error::InvalidProblem(format!(
            "need n >= 2 and 1 <= degree < n, got n = {n}, degree = {degree}"
        )));
    }
    let mut adj = vec![Vec::<usize>::new(); n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for &i in &order {
        while adj[i].len() < degree {
            let candidates: Vec<usize> = (0..n)
                .filter(|&j| j != i && adj[j].len() < degree && !adj[i].contains(&j))
                .collect();
            let Some(&j) = candidates.choose(rng) else {
                break;
            };
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let pairs: Vec<(usize, usize)> = adj
        .iter()
        .enumerate()
        .flat_map(|(i, nb)| nb.iter().filter(move |&&j| i < j).map(move |&j| (i, j)))
        .collect();
    Graph::new(n, &pairs)
}

/// Uniform random recursive tree: node `k` attaches to a uniform earlier node.
pub fn random_tree(n: usize, rng: &mut impl Rng) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidProblem("a tree needs at least one node".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let pairs: Vec<(usize, usize)> = (1..n)
        .map(|k| (order[rng.gen_range(0..k)], order[k]))
        .collect();
    Graph::new(n, &pairs)
}

fn couplings(count: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let v = rng.gen_range(0.1..=1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// Diagonal curvatures giving row dominance `≤ λ_target`.
fn dominant_diagonal(g: &Graph, off: &[f64], lambda_target: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..g.n())
        .map(|i| {
            let row: f64 = g.neighbours(i).iter().map(|nb| off[nb.edge].abs()).sum();
            if row == 0.0 {
                rng.gen_range(1.0..=2.0)
            } else {
                row / lambda_target * rng.gen_range(1.0..=1.5) * HEADROOM
            }
        })
        .collect()
}

fn quadratic_on(g: Graph, lambda_target: f64, rng: &mut impl Rng) -> Result<QuadraticProblem> {
    let off = couplings(g.edge_count(), rng);
    let diag = dominant_diagonal(&g, &off, lambda_target, rng);
    let b = (0..g.n()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    QuadraticProblem::from_parts(g, diag, off, b)
}

/// Random sparse quadratic with `ρ(D⁻¹|A_off|) ≤ λ_target`. Deterministic
/// per seed.
pub fn generate_random_sdd(
    n: usize,
    degree: usize,
    lambda_target: f64,
    seed: u64,
) -> Result<QuadraticProblem> {
    check_lambda(lambda_target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(n, degree, &mut rng)?;
    quadratic_on(g, lambda_target, &mut rng)
}

/// Like [`generate_random_sdd`] on a random tree.
pub fn generate_random_tree_sdd(n: usize, lambda_target: f64, seed: u64) -> Result<QuadraticProblem> {
    check_lambda(lambda_target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_tree(n, &mut rng)?;
    quadratic_on(g, lambda_target, &mut rng)
}

/// Quartic node factors `x⁴/4 + c_i x²/2 − b_i x` with bilinear couplings,
/// `c_i` chosen like the quadratic diagonal so that the closed-form
/// dominance level is at most `λ_target`.
pub fn generate_random_quartic(
    n: usize,
    degree: usize,
    lambda_target: f64,
    seed: u64,
) -> Result<PairwiseObjective> {
    check_lambda(lambda_target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(n, degree, &mut rng)?;
    let off = couplings(g.edge_count(), &mut rng);
    let c = dominant_diagonal(&g, &off, lambda_target, &mut rng);
    let nodes = c
        .into_iter()
        .map(|c| NodeFactor::Quartic {
            c,
            b: rng.gen_range(-1.0..=1.0),
        })
        .collect();
    let edges = off.into_iter().map(|a| EdgeFactor::Bilinear { a }).collect();
    PairwiseObjective::new(g, nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dominance::certify_quadratic;

    #[test]
    fn generated_problems_certify_below_target() {
        for (n, degree, target) in [(2, 1, 0.5), (10, 3, 0.9), (40, 4, 0.7), (7, 6, 0.2)] {
            for seed in 0..5 {
                let q = generate_random_sdd(n, degree, target, seed).unwrap();
                let c = certify_quadratic(&q);
                let lambda = c.certificate().expect("certificate").lambda;
                assert!(lambda <= target, "n={n} seed={seed}: {lambda} > {target}");
            }
        }
    }

    #[test]
    fn same_seed_same_problem() {
        assert_eq!(
            generate_random_sdd(20, 3, 0.8, 42).unwrap(),
            generate_random_sdd(20, 3, 0.8, 42).unwrap()
        );
        assert_ne!(
            generate_random_sdd(20, 3, 0.8, 42).unwrap(),
            generate_random_sdd(20, 3, 0.8, 43).unwrap()
        );
    }

    #[test]
    fn degrees_are_bounded() {
        let q = generate_random_sdd(30, 4, 0.5, 7).unwrap();
        let g = q.graph();
        assert!((0..30).all(|i| g.degree(i) <= 4));
        assert!(g.edge_count() >= 30 * 4 / 2 - 4);
    }

    #[test]
    fn infeasible_degree_is_rejected() {
        assert!(generate_random_sdd(3, 3, 0.5, 0).is_err());
        assert!(generate_random_sdd(3, 0, 0.5, 0).is_err());
        assert!(generate_random_sdd(1, 1, 0.5, 0).is_err());
        assert!(generate_random_sdd(5, 2, 1.0, 0).is_err());
    }

    #[test]
    fn trees_are_trees() {
        for seed in 0..10 {
            let q = generate_random_tree_sdd(25, 0.8, seed).unwrap();
            assert!(q.graph().is_forest());
            assert_eq!(q.graph().components().len(), 1);
        }
    }
}
